//! Detector click generation: analyzer projection, efficiency, dark counts,
//! timing jitter and time-tagger quantisation.

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fibre_channel::TravellingPhoton;
use crate::pair_source::{poisson_times, CHUNK_PS};
use crate::quantum_state::{PoincareRotation, PolarizationBasisSetting, TwoPhotonState};
use crate::rng::{Module, StreamKey};
use crate::timetag::TimeTagStream;
use crate::units::{sigma_from_fwhm, PS_PER_S};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub label: String,
    pub channel: u8,
    pub efficiency: f64,
    /// Dark counts per second.
    pub dark_rate: f64,
    /// Detector plus tagger timing jitter, FWHM ps.
    pub jitter_fwhm_ps: f64,
    /// Adds the tagger's clock-synchronisation jitter (long-delay channel).
    pub long_delay: bool,
    /// Polarizer contrast of the analyzer in front of the detector; 1 is ideal.
    pub analyzer_contrast: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self::local()
    }
}

impl DetectorConfig {
    /// Detector at the source: 60 % efficiency, 900 dark counts per second.
    pub fn local() -> Self {
        Self {
            label: "A".into(),
            channel: 0,
            efficiency: 0.60,
            dark_rate: 900.0,
            jitter_fwhm_ps: 250.0 / std::f64::consts::SQRT_2,
            long_delay: false,
            analyzer_contrast: 1.0,
        }
    }

    /// Detector after the link: 12 % efficiency, 20 dark counts per second.
    pub fn remote() -> Self {
        Self {
            label: "B".into(),
            channel: 1,
            efficiency: 0.12,
            dark_rate: 20.0,
            jitter_fwhm_ps: 250.0 / std::f64::consts::SQRT_2,
            long_delay: true,
            analyzer_contrast: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::param("detector.efficiency", "must lie in [0, 1]"));
        }
        if !(self.dark_rate >= 0.0 && self.dark_rate.is_finite()) {
            return Err(Error::param("detector.dark_rate", "must be finite and >= 0"));
        }
        if !(self.jitter_fwhm_ps >= 0.0) {
            return Err(Error::param("detector.jitter_fwhm_ps", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.analyzer_contrast) {
            return Err(Error::param("detector.analyzer_contrast", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Total timing spread of this detector's clicks, FWHM ps.
    pub fn total_jitter_fwhm(&self, tagger: &TaggerConfig) -> f64 {
        let sync = if self.long_delay {
            tagger.sync_jitter_fwhm_ps
        } else {
            0.0
        };
        self.jitter_fwhm_ps.hypot(sync)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaggerConfig {
    pub bin_width_ps: f64,
    /// Clock-synchronisation jitter on the long-delay channel, FWHM ps.
    pub sync_jitter_fwhm_ps: f64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        Self {
            bin_width_ps: 82.3,
            sync_jitter_fwhm_ps: 500.0,
        }
    }
}

impl TaggerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width_ps > 0.0) || self.bin_width_fs() == 0 {
            return Err(Error::param("tagger.bin_width_ps", "must be > 0 (fs resolution)"));
        }
        if !(self.sync_jitter_fwhm_ps >= 0.0) {
            return Err(Error::param("tagger.sync_jitter_fwhm_ps", "must be >= 0"));
        }
        Ok(())
    }

    pub fn bin_width_fs(&self) -> u64 {
        (self.bin_width_ps * 1000.0).round() as u64
    }

    /// Tagger bin of an event at `t_ps` displaced by `offset_ps`.
    pub fn quantize(&self, t_ps: u64, offset_ps: f64) -> u64 {
        let fs = t_ps as i128 * 1000 + (offset_ps * 1000.0).round() as i128;
        (fs.max(0) / self.bin_width_fs() as i128) as u64
    }
}

/// Which photon of the pair a detector sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Local,
    Remote,
}

fn analyzer_operator(basis: &PolarizationBasisSetting, contrast: f64) -> Matrix2<Complex64> {
    if contrast == 1.0 {
        basis.projector()
    } else {
        basis.projector_with_contrast(contrast)
    }
}

/// Probability that a photon passes its analyzer, ignoring the partner:
/// partial trace over the other photon, then projection. The rotation acts on
/// the travelling photon only.
pub fn single_sided_click_probability(
    rho: &TwoPhotonState,
    basis: &PolarizationBasisSetting,
    rotation: &PoincareRotation,
    side: Side,
) -> f64 {
    let op = basis.projector();
    let p = match side {
        Side::Local => (rho.local_marginal() * op).trace().re,
        Side::Remote => {
            let u = rotation.su2();
            (u * rho.remote_marginal() * u.adjoint() * op).trace().re
        }
    };
    p.clamp(0.0, 1.0)
}

/// Joint and marginal analyzer-pass probabilities for one pair.
#[derive(Debug, Clone, Copy)]
struct JointPass {
    both: f64,
    local: f64,
    remote: f64,
}

fn joint_pass(
    rho: &TwoPhotonState,
    local_op: &Matrix2<Complex64>,
    remote_op: &Matrix2<Complex64>,
    rotation: &PoincareRotation,
) -> JointPass {
    let u = rotation.su2();
    let remote_back = u.adjoint() * remote_op * u;
    let both = (rho.matrix() * local_op.kronecker(&remote_back)).trace().re;
    let local = (rho.local_marginal() * local_op).trace().re;
    let remote = (rho.remote_marginal() * remote_back).trace().re;
    JointPass {
        both: both.clamp(0.0, 1.0),
        local: local.clamp(0.0, 1.0),
        remote: remote.clamp(0.0, 1.0),
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma == 0.0 {
        0.0
    } else {
        let z: f64 = StandardNormal.sample(rng);
        sigma * z
    }
}

/// Dark-count times over `[start_ps, end_ps)`; chunked on the absolute time
/// grid so any split of the interval gives the same counts.
pub fn dark_count_times(rate: f64, start_ps: u64, end_ps: u64, key: StreamKey, module: Module) -> Vec<u64> {
    if rate <= 0.0 || end_ps <= start_ps {
        return Vec::new();
    }
    let first = start_ps / CHUNK_PS;
    let last = (end_ps - 1) / CHUNK_PS;
    let parts: Vec<Vec<u64>> = (first..=last)
        .into_par_iter()
        .map(|i| {
            let mut rng = key.stream(module, i);
            let mut v = Vec::new();
            poisson_times(&mut rng, rate, i * CHUNK_PS, (i + 1) * CHUNK_PS, &mut v);
            v.retain(|&t| t >= start_ps && t < end_ps);
            v
        })
        .collect();
    parts.concat()
}

fn into_stream(mut bins: Vec<u64>, tagger: &TaggerConfig, channel: u8) -> TimeTagStream {
    bins.par_sort_unstable();
    TimeTagStream::from_bins(tagger.bin_width_fs(), bins, channel).expect("sorted")
}

fn dark_module(side: Side) -> Module {
    match side {
        Side::Local => Module::DarkLocal,
        Side::Remote => Module::DarkRemote,
    }
}

fn click_module(side: Side) -> Module {
    match side {
        Side::Local => Module::DetectorLocal,
        Side::Remote => Module::DetectorRemote,
    }
}

/// Independent detection of single photons of `state` on one side.
///
/// Each photon clicks with its marginal pass probability times the detector
/// efficiency; click times get Gaussian jitter and are quantised; dark counts
/// over `[0, duration)` are merged in.
#[allow(clippy::too_many_arguments)]
pub fn detect(
    photons: &[TravellingPhoton],
    state: &TwoPhotonState,
    side: Side,
    basis: &PolarizationBasisSetting,
    det: &DetectorConfig,
    tagger: &TaggerConfig,
    duration_s: f64,
    seed: u64,
) -> Result<TimeTagStream> {
    det.validate()?;
    tagger.validate()?;
    let key = StreamKey::new(seed);
    let sigma = sigma_from_fwhm(det.total_jitter_fwhm(tagger));
    let op = analyzer_operator(basis, det.analyzer_contrast);
    let module = click_module(side);
    let mut bins: Vec<u64> = photons
        .par_iter()
        .filter_map(|p| {
            let mut rng = key.stream(module, p.emission_ps);
            let pass = match side {
                Side::Local => (state.local_marginal() * op).trace().re,
                Side::Remote => {
                    let u = p.rotation.su2();
                    (state.remote_marginal() * u.adjoint() * op * u).trace().re
                }
            };
            let clicks = rng.random::<f64>() < pass * det.efficiency;
            let at = match side {
                Side::Local => p.emission_ps,
                Side::Remote => p.arrival_ps,
            };
            clicks.then(|| tagger.quantize(at, gaussian(&mut rng, sigma)))
        })
        .collect();
    let end = (duration_s * PS_PER_S).round() as u64;
    bins.extend(
        dark_count_times(det.dark_rate, 0, end, key, dark_module(side))
            .into_iter()
            .map(|t| tagger.quantize(t, 0.0)),
    );
    Ok(into_stream(bins, tagger, det.channel))
}

/// Settings and hardware for detecting both photons of each pair.
#[derive(Debug, Clone)]
pub struct PairDetector<'a> {
    pub state: &'a TwoPhotonState,
    pub local_basis: PolarizationBasisSetting,
    pub remote_basis: PolarizationBasisSetting,
    pub local: &'a DetectorConfig,
    pub remote: &'a DetectorConfig,
    pub tagger: &'a TaggerConfig,
    /// Probability that the partner photon reaches the local analyzer.
    pub local_coupling: f64,
}

/// Clicks produced by jointly detected pairs, before dark counts.
#[derive(Debug, Default, Clone)]
pub struct PairClicks {
    pub local_bins: Vec<u64>,
    pub remote_bins: Vec<u64>,
    /// Pairs where both photons clicked.
    pub coincident: u64,
}

impl PairDetector<'_> {
    /// Samples correlated analyzer outcomes for each surviving pair.
    ///
    /// The local outcome is drawn from its marginal, the remote one from the
    /// conditional probability given the local result, which reproduces
    /// `tr(ρ·P_a⊗P_b)` for the joint pass statistics.
    pub fn detect(&self, photons: &[TravellingPhoton], key: StreamKey) -> PairClicks {
        let local_op = analyzer_operator(&self.local_basis, self.local.analyzer_contrast);
        let remote_op = analyzer_operator(&self.remote_basis, self.remote.analyzer_contrast);
        let sigma_local = sigma_from_fwhm(self.local.total_jitter_fwhm(self.tagger));
        let sigma_remote = sigma_from_fwhm(self.remote.total_jitter_fwhm(self.tagger));
        let outcomes: Vec<(Option<u64>, Option<u64>)> = photons
            .par_iter()
            .map(|p| {
                let mut rng = key.stream(Module::DetectorRemote, p.emission_ps);
                let probs = joint_pass(self.state, &local_op, &remote_op, &p.rotation);
                let local_present = rng.random::<f64>() < self.local_coupling;
                let (local_pass, remote_pass) = if local_present {
                    let a = rng.random::<f64>() < probs.local;
                    let cond = if a {
                        ratio(probs.both, probs.local)
                    } else {
                        ratio(probs.remote - probs.both, 1.0 - probs.local)
                    };
                    (a, rng.random::<f64>() < cond)
                } else {
                    (false, rng.random::<f64>() < probs.remote)
                };
                let local_click = local_pass && rng.random::<f64>() < self.local.efficiency;
                let remote_click = remote_pass && rng.random::<f64>() < self.remote.efficiency;
                let jl = gaussian(&mut rng, sigma_local);
                let jr = gaussian(&mut rng, sigma_remote);
                (
                    local_click.then(|| self.tagger.quantize(p.emission_ps, jl)),
                    remote_click.then(|| self.tagger.quantize(p.arrival_ps, jr)),
                )
            })
            .collect();
        let mut out = PairClicks::default();
        for (l, r) in outcomes {
            if l.is_some() && r.is_some() {
                out.coincident += 1;
            }
            out.local_bins.extend(l);
            out.remote_bins.extend(r);
        }
        out
    }
}

/// Completes a set of photon clicks into a sorted stream with dark counts
/// over `[start_ps, end_ps)`.
pub fn finish_stream(
    mut photon_bins: Vec<u64>,
    det: &DetectorConfig,
    tagger: &TaggerConfig,
    side: Side,
    start_ps: u64,
    end_ps: u64,
    key: StreamKey,
) -> (TimeTagStream, u64) {
    let dark = dark_count_times(det.dark_rate, start_ps, end_ps, key, dark_module(side));
    let n_dark = dark.len() as u64;
    photon_bins.extend(dark.into_iter().map(|t| tagger.quantize(t, 0.0)));
    (into_stream(photon_bins, tagger, det.channel), n_dark)
}
