use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::config::{remote_physical, LinkConfig};
use crate::error::{Error, Result};
use crate::metrics::accidental_rate;
use crate::pair_source::SourceConfig;
use crate::quantum_state::{apply_one_sided_unitary, PolarizationBasisSetting as B, TwoPhotonState};
use crate::units::sigma_from_fwhm;

/// Rates the calibrated link should reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationTargets {
    pub local_singles: f64,
    /// Remote singles including dark counts.
    pub remote_singles: f64,
    /// Mean coincidence rate of the correlated setting pairs inside the window.
    pub coincidences: f64,
    pub window_ps: f64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        Self {
            local_singles: 2.1e6,
            remote_singles: 55.0,
            coincidences: 4.3,
            window_ps: 823.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub source: SourceConfig,
    pub targets: CalibrationTargets,
    /// Fraction of true coincidences that fall inside the window.
    pub window_fraction: f64,
    /// Mean correlated-pair joint pass probability.
    pub joint_pass: f64,
}

/// Rates the link model predicts for a configuration, per block-average
/// correlated setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRates {
    pub local_singles: f64,
    pub remote_singles: f64,
    pub remote_dark: f64,
    pub true_coincidences: f64,
    pub accidentals: f64,
    /// Rate of pairs whose travelling photon survives the link.
    pub surviving_pairs: f64,
}

fn mean_correlated_pass(cfg: &LinkConfig, state: &TwoPhotonState) -> f64 {
    let rotated = apply_one_sided_unitary(state, &cfg.channel.residual_rotation);
    let combos = [(B::H, B::V), (B::V, B::H), (B::D, B::A), (B::A, B::D)];
    let ka = cfg.detector_local.analyzer_contrast;
    let kb = cfg.detector_remote.analyzer_contrast;
    combos
        .iter()
        .map(|&(a, b)| {
            let pa = a.projector_with_contrast(ka);
            let pb = remote_physical(b).projector_with_contrast(kb);
            (rotated.matrix() * pa.kronecker(&pb)).trace().re
        })
        .sum::<f64>()
        / combos.len() as f64
}

fn marginal_pass(m: &nalgebra::Matrix2<num_complex::Complex64>) -> f64 {
    // every analyzer setting sees the same marginal for a rotation-invariant state
    (m * B::H.projector()).trace().re
}

/// Fraction of a Gaussian coincidence peak captured by a centred window.
pub fn window_fraction(cfg: &LinkConfig, window_ps: f64) -> f64 {
    let jitter_a = cfg.detector_local.total_jitter_fwhm(&cfg.tagger);
    let jitter_b = cfg.detector_remote.total_jitter_fwhm(&cfg.tagger);
    let fwhm = (jitter_a.powi(2) + jitter_b.powi(2) + cfg.channel.dispersion_fwhm_ps.powi(2)).sqrt();
    let sigma = sigma_from_fwhm(fwhm);
    // both tags are floored to the tagger grid
    let q = cfg.tagger.bin_width_ps;
    let sigma = (sigma * sigma + q * q / 6.0).sqrt();
    if sigma == 0.0 {
        return 1.0;
    }
    erf(window_ps / 2.0 / (sigma * std::f64::consts::SQRT_2))
}

/// Predicted rates for the configuration as given.
pub fn expected_rates(cfg: &LinkConfig, window_ps: f64) -> Result<ExpectedRates> {
    let s = &cfg.source;
    let state = s.state()?;
    let (ma, mb) = (marginal_pass(&state.local_marginal()), marginal_pass(&state.remote_marginal()));
    let (ea, eb) = (cfg.detector_local.efficiency, cfg.detector_remote.efficiency);
    let t = cfg.channel.transmission() * s.remote_coupling;
    let local = s.pair_rate * s.local_coupling * ea * ma + cfg.detector_local.dark_rate;
    let remote = s.pair_rate * t * eb * mb + cfg.detector_remote.dark_rate;
    let true_c = s.pair_rate * s.local_coupling * t * ea * eb * mean_correlated_pass(cfg, &state) * window_fraction(cfg, window_ps);
    Ok(ExpectedRates {
        local_singles: local,
        remote_singles: remote,
        remote_dark: cfg.detector_remote.dark_rate,
        true_coincidences: true_c,
        accidentals: accidental_rate(local, remote, window_ps),
        surviving_pairs: s.pair_rate * t,
    })
}

/// Solves for pair rate, local coupling and remote coupling so the link
/// reproduces the three target rates.
///
/// Local singles fix `N·c_l`, remote singles fix `N·c_r`, and the true
/// coincidences above the accidental floor fix `N` itself.
pub fn calibrate_rates(targets: &CalibrationTargets, cfg: &LinkConfig) -> Result<Calibration> {
    for (name, v) in [
        ("local_singles", targets.local_singles),
        ("remote_singles", targets.remote_singles),
        ("coincidences", targets.coincidences),
        ("window_ps", targets.window_ps),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Unreachable(format!("target {name} = {v} must be finite and > 0")));
        }
    }
    let state = cfg.source.state()?;
    let (ma, mb) = (marginal_pass(&state.local_marginal()), marginal_pass(&state.remote_marginal()));
    let (ea, eb) = (cfg.detector_local.efficiency, cfg.detector_remote.efficiency);
    let (da, db) = (cfg.detector_local.dark_rate, cfg.detector_remote.dark_rate);
    let t = cfg.channel.transmission();
    let local_photons = targets.local_singles - da;
    let remote_photons = targets.remote_singles - db;
    if local_photons <= 0.0 || remote_photons <= 0.0 {
        return Err(Error::Unreachable("singles targets do not exceed the dark counts".into()));
    }
    let acc = accidental_rate(targets.local_singles, targets.remote_singles, targets.window_ps);
    let true_c = targets.coincidences - acc;
    if true_c <= 0.0 {
        return Err(Error::Unreachable(format!(
            "coincidence target {} is below the accidental rate {acc:.4}",
            targets.coincidences
        )));
    }
    let joint = mean_correlated_pass(cfg, &state);
    let fwin = window_fraction(cfg, targets.window_ps);
    let n = local_photons * remote_photons * joint * fwin / (ma * mb * true_c);
    let local_coupling = local_photons / (n * ea * ma);
    let remote_coupling = remote_photons / (n * t * eb * mb);
    if !(local_coupling <= 1.0) {
        return Err(Error::Unreachable(format!(
            "local coupling {local_coupling:.3} exceeds 1"
        )));
    }
    if !(remote_coupling * t <= 1.0) {
        return Err(Error::Unreachable(format!(
            "remote survival probability {:.3} exceeds 1",
            remote_coupling * t
        )));
    }
    let source = SourceConfig {
        pair_rate: n,
        local_coupling,
        remote_coupling,
        ..cfg.source.clone()
    };
    source.validate()?;
    Ok(Calibration {
        source,
        targets: *targets,
        window_fraction: fwin,
        joint_pass: joint,
    })
}
