//! Timed emission of polarization-entangled photon pairs.
//!
//! Pair emissions form a homogeneous Poisson process. Simulated time is cut
//! into fixed one-second chunks; chunk `i` always draws from stream
//! `(seed, PairSource, i)`, so any interval can be generated piecewise or in
//! parallel and concatenates to the single-pass result.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum_state::{make_phi_minus, werner_mix, werner_weight_for_fidelity, TwoPhotonState};
use crate::rng::{Module, StreamKey};
use crate::units::{sigma_from_fwhm, PS_PER_S};

/// Length of one generation chunk in picoseconds.
pub const CHUNK_PS: u64 = 1_000_000_000_000;

/// A wavelength channel of the ITU DWDM grid as used by the source filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItuChannel {
    pub number: u32,
    pub center_nm: f64,
    pub fwhm_nm: f64,
}

impl ItuChannel {
    /// Channel 32, 1551.72 nm; carries the photon sent through the fibre.
    pub fn c32() -> Self {
        Self {
            number: 32,
            center_nm: 1551.72,
            fwhm_nm: 0.6,
        }
    }

    /// Channel 36, 1548.51 nm; carries the photon analysed at the source.
    pub fn c36() -> Self {
        Self {
            number: 36,
            center_nm: 1548.51,
            fwhm_nm: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceConfig {
    /// Emitted pairs per second.
    pub pair_rate: f64,
    /// Fidelity of the emitted state to |Φ⁻⟩, realised by isotropic mixing.
    pub local_fidelity: f64,
    /// Travelling photon.
    pub signal_channel: ItuChannel,
    /// Photon analysed at the source.
    pub idler_channel: ItuChannel,
    /// Probability that the idler reaches the local analyzer.
    pub local_coupling: f64,
    /// Collection scale of the travelling photon relative to the nominal link
    /// budget. May exceed 1 when the nominal loss figures overstate the real
    /// loss; the product with the link transmission must stay a probability.
    pub remote_coupling: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            pair_rate: 1.0e6,
            local_fidelity: 0.98,
            signal_channel: ItuChannel::c32(),
            idler_channel: ItuChannel::c36(),
            local_coupling: 1.0,
            remote_coupling: 1.0,
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pair_rate >= 0.0 && self.pair_rate.is_finite()) {
            return Err(Error::param("source.pair_rate", "must be finite and >= 0"));
        }
        if !(0.25..=1.0).contains(&self.local_fidelity) {
            return Err(Error::param("source.local_fidelity", "must lie in [0.25, 1]"));
        }
        if !(0.0..=1.0).contains(&self.local_coupling) {
            return Err(Error::param("source.local_coupling", "must lie in [0, 1]"));
        }
        if !(self.remote_coupling >= 0.0 && self.remote_coupling.is_finite()) {
            return Err(Error::param("source.remote_coupling", "must be finite and >= 0"));
        }
        for (field, ch) in [
            ("source.signal_channel.fwhm_nm", &self.signal_channel),
            ("source.idler_channel.fwhm_nm", &self.idler_channel),
        ] {
            if !(ch.fwhm_nm > 0.0) {
                return Err(Error::param(field, "must be > 0"));
            }
        }
        Ok(())
    }

    /// The emitted two-photon state.
    pub fn state(&self) -> Result<TwoPhotonState> {
        werner_mix(&make_phi_minus(), werner_weight_for_fidelity(self.local_fidelity)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEvent {
    pub emission_ps: u64,
    /// Offset of the travelling photon from its channel centre, nm.
    pub wavelength_offset_nm: f64,
}

/// Pair emissions sharing one emitted state.
#[derive(Debug, Clone)]
pub struct PairStream {
    pub state: TwoPhotonState,
    pub events: Vec<PairEvent>,
}

/// Emits pairs over `[0, duration)`.
pub fn generate_pairs(cfg: &SourceConfig, duration_s: f64, seed: u64) -> Result<PairStream> {
    cfg.validate()?;
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::param("duration", "must be finite and > 0"));
    }
    let end = (duration_s * PS_PER_S).round() as u64;
    let events = poisson_events(
        cfg.pair_rate,
        cfg.signal_channel.fwhm_nm,
        0,
        end,
        StreamKey::new(seed),
        Module::PairSource,
    );
    Ok(PairStream {
        state: cfg.state()?,
        events,
    })
}

/// Poisson emissions at `rate` per second over `[start_ps, end_ps)`, generated
/// chunk by chunk in parallel.
pub fn poisson_events(
    rate: f64,
    spectrum_fwhm_nm: f64,
    start_ps: u64,
    end_ps: u64,
    key: StreamKey,
    module: Module,
) -> Vec<PairEvent> {
    if rate <= 0.0 || end_ps <= start_ps {
        return Vec::new();
    }
    let first = start_ps / CHUNK_PS;
    let last = (end_ps - 1) / CHUNK_PS;
    let chunks: Vec<Vec<PairEvent>> = (first..=last)
        .into_par_iter()
        .map(|i| chunk_events(rate, spectrum_fwhm_nm, i, start_ps, end_ps, key, module))
        .collect();
    chunks.concat()
}

/// Emissions of chunk `index` that fall in `[lo, hi)`. The chunk is always
/// drawn from its start, so the result does not depend on the requested range.
fn chunk_events(rate: f64, fwhm_nm: f64, index: u64, lo: u64, hi: u64, key: StreamKey, module: Module) -> Vec<PairEvent> {
    let mut rng = key.stream(module, index);
    let gap = Exp::new(rate / PS_PER_S).expect("positive rate");
    let spectrum = Normal::new(0.0, sigma_from_fwhm(fwhm_nm)).expect("finite width");
    let start = index * CHUNK_PS;
    let end = start + CHUNK_PS;
    let (lo, hi) = (lo.max(start), hi.min(end));
    let expected = rate * (hi - lo) as f64 / PS_PER_S;
    let mut events = Vec::with_capacity((expected * 1.05 + 16.0) as usize);
    let mut t = 0.0f64;
    let mut prev: Option<u64> = None;
    loop {
        t += gap.sample(&mut rng);
        if t >= CHUNK_PS as f64 {
            break;
        }
        let offset = spectrum.sample(&mut rng);
        let mut at = start + t as u64;
        // keep emission times strictly increasing on the integer-ps grid
        if let Some(p) = prev {
            if at <= p {
                at = p + 1;
            }
        }
        if at >= hi.min(end) {
            break;
        }
        prev = Some(at);
        if at >= lo {
            events.push(PairEvent {
                emission_ps: at,
                wavelength_offset_nm: offset,
            });
        }
    }
    events
}

/// Homogeneous Poisson click times (no payload) over `[start_ps, end_ps)`.
pub fn poisson_times<R: Rng + ?Sized>(rng: &mut R, rate: f64, start_ps: u64, end_ps: u64, out: &mut Vec<u64>) {
    if rate <= 0.0 || end_ps <= start_ps {
        return;
    }
    let gap = Exp::new(rate / PS_PER_S).expect("positive rate");
    let span = (end_ps - start_ps) as f64;
    let mut t = 0.0f64;
    loop {
        t += gap.sample(rng);
        if t >= span {
            break;
        }
        out.push(start_ps + t as u64);
    }
}
