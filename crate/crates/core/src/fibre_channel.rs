//! Impairments of the deployed fibre acting on the travelling photon:
//! attenuation, propagation delay, chromatic dispersion and birefringence.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::DelayDrift;
use crate::error::{Error, Result};
use crate::pair_source::{PairEvent, PairStream};
use crate::quantum_state::PoincareRotation;
use crate::rng::{Module, StreamKey};
use crate::units::{PS_PER_S, SPEED_OF_LIGHT};

/// `10^(−loss_db/10)`.
pub fn transmission_from_db(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Time-dependent birefringence of the link, as a rotation on the Poincaré sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BirefringenceTrajectory {
    Constant {
        rotation: PoincareRotation,
    },
    /// Random walk of the rotation vector, reflected at `cap_deg`.
    RandomWalk {
        /// RMS change of each rotation-vector component per √hour, degrees.
        speed_deg_per_sqrt_h: f64,
        cap_deg: f64,
        grid_s: f64,
    },
}

impl Default for BirefringenceTrajectory {
    fn default() -> Self {
        BirefringenceTrajectory::RandomWalk {
            speed_deg_per_sqrt_h: 4.0,
            cap_deg: 12.0,
            grid_s: 60.0,
        }
    }
}

impl BirefringenceTrajectory {
    pub fn constant(rotation: PoincareRotation) -> Self {
        BirefringenceTrajectory::Constant { rotation }
    }

    pub fn none() -> Self {
        Self::constant(PoincareRotation::identity())
    }

    /// Materialises the trajectory for a run keyed by `key`.
    pub fn track(&self, key: StreamKey) -> BirefringenceTrack {
        match *self {
            BirefringenceTrajectory::Constant { rotation } => BirefringenceTrack::Constant(rotation),
            BirefringenceTrajectory::RandomWalk {
                speed_deg_per_sqrt_h,
                cap_deg,
                grid_s,
            } => BirefringenceTrack::Walk(RandomWalkTrack {
                key,
                step_sigma: speed_deg_per_sqrt_h * (grid_s / 3600.0).sqrt(),
                cap_deg,
                grid_ps: grid_s * PS_PER_S,
                nodes: std::sync::Mutex::new(vec![[0.0; 3]]),
            }),
        }
    }
}

/// A realised birefringence trajectory.
#[derive(Debug)]
pub enum BirefringenceTrack {
    Constant(PoincareRotation),
    Walk(RandomWalkTrack),
}

#[derive(Debug)]
pub struct RandomWalkTrack {
    key: StreamKey,
    step_sigma: f64,
    cap_deg: f64,
    grid_ps: f64,
    nodes: std::sync::Mutex<Vec<[f64; 3]>>,
}

impl RandomWalkTrack {
    /// Rotation vector at grid node `i`; node `i` draws from stream `i`, so the
    /// walk is extended lazily and deterministically.
    fn node(&self, i: usize) -> [f64; 3] {
        let mut nodes = self.nodes.lock().expect("walk cache poisoned");
        while nodes.len() <= i {
            let j = nodes.len() as u64;
            let mut rng = self.key.stream(Module::Birefringence, j);
            let mut w = nodes[nodes.len() - 1];
            for c in w.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *c += self.step_sigma * z;
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > self.cap_deg {
                let reflected = (2.0 * self.cap_deg - norm).max(0.0);
                w = w.map(|x| x * reflected / norm);
            }
            nodes.push(w);
        }
        nodes[i]
    }
}

impl BirefringenceTrack {
    pub fn at(&self, t_ps: u64) -> PoincareRotation {
        match self {
            BirefringenceTrack::Constant(r) => *r,
            BirefringenceTrack::Walk(w) => {
                let x = t_ps as f64 / w.grid_ps;
                let i = x.floor() as usize;
                let f = x - i as f64;
                let a = w.node(i);
                let b = w.node(i + 1);
                PoincareRotation::from_rotation_vector([
                    a[0] + f * (b[0] - a[0]),
                    a[1] + f * (b[1] - a[1]),
                    a[2] + f * (b[2] - a[2]),
                ])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    pub length_m: f64,
    pub loss_db: f64,
    pub base_delay_ps: f64,
    /// FWHM of the arrival spread the source spectrum acquires, ps.
    pub dispersion_fwhm_ps: f64,
    /// Spectrum FWHM for which `dispersion_fwhm_ps` holds, nm.
    pub reference_spectrum_fwhm_nm: f64,
    /// Sign of the delay-versus-wavelength slope.
    pub dispersion_sign: f64,
    pub group_index: f64,
    pub birefringence: BirefringenceTrajectory,
    /// Static error left after birefringence compensation, applied before the drift.
    pub residual_rotation: PoincareRotation,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            length_m: 192_820.538,
            loss_db: 48.0,
            base_delay_ps: 9.45e8,
            dispersion_fwhm_ps: 760.0,
            reference_spectrum_fwhm_nm: 0.6,
            dispersion_sign: 1.0,
            group_index: 9.45e8 / PS_PER_S * SPEED_OF_LIGHT / 192_820.538,
            birefringence: BirefringenceTrajectory::default(),
            residual_rotation: PoincareRotation::new([0.0, 1.0, 0.0], 25.0).expect("unit axis"),
        }
    }
}

impl ChannelConfig {
    /// A lossless, dispersionless, birefringence-free link with the default delay.
    pub fn ideal() -> Self {
        Self {
            loss_db: 0.0,
            dispersion_fwhm_ps: 0.0,
            birefringence: BirefringenceTrajectory::none(),
            residual_rotation: PoincareRotation::identity(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.loss_db >= 0.0) {
            return Err(Error::param("channel.loss_db", "must be >= 0"));
        }
        if !(self.length_m > 0.0) {
            return Err(Error::param("channel.length_m", "must be > 0"));
        }
        if !(self.dispersion_fwhm_ps >= 0.0) {
            return Err(Error::param("channel.dispersion_fwhm_ps", "must be >= 0"));
        }
        if !(self.reference_spectrum_fwhm_nm > 0.0) {
            return Err(Error::param("channel.reference_spectrum_fwhm_nm", "must be > 0"));
        }
        if self.dispersion_sign.abs() != 1.0 {
            return Err(Error::param("channel.dispersion_sign", "must be +1 or -1"));
        }
        let expected = self.group_index * self.length_m / SPEED_OF_LIGHT * PS_PER_S;
        if ((self.base_delay_ps - expected) / expected).abs() > 1e-3 {
            return Err(Error::param(
                "channel.base_delay_ps",
                format!(
                    "{} ps inconsistent with group_index·length/c = {expected:.1} ps",
                    self.base_delay_ps
                ),
            ));
        }
        if let BirefringenceTrajectory::RandomWalk {
            speed_deg_per_sqrt_h,
            cap_deg,
            grid_s,
        } = self.birefringence
        {
            if !(speed_deg_per_sqrt_h >= 0.0 && cap_deg >= 0.0 && grid_s > 0.0) {
                return Err(Error::param("channel.birefringence", "speed, cap >= 0 and grid > 0"));
            }
        }
        Ok(())
    }

    pub fn transmission(&self) -> f64 {
        transmission_from_db(self.loss_db)
    }

    /// Delay per nm of wavelength offset, ps/nm.
    pub fn dispersion_slope(&self) -> f64 {
        self.dispersion_sign * self.dispersion_fwhm_ps / self.reference_spectrum_fwhm_nm
    }
}

/// The travelling photon after the fibre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TravellingPhoton {
    pub emission_ps: u64,
    pub arrival_ps: u64,
    /// Polarization rotation accumulated in the fibre.
    pub rotation: PoincareRotation,
}

/// A fibre realised for one run: configuration, thermal drift and birefringence track.
pub struct Fibre {
    cfg: ChannelConfig,
    drift: DelayDrift,
    track: BirefringenceTrack,
    key: StreamKey,
}

impl Fibre {
    pub fn new(cfg: &ChannelConfig, drift: DelayDrift, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let key = StreamKey::new(seed);
        Ok(Self {
            cfg: cfg.clone(),
            drift,
            track: cfg.birefringence.track(key),
            key,
        })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    /// Net rotation at emission time `t_ps`.
    pub fn rotation_at(&self, t_ps: u64) -> PoincareRotation {
        self.cfg.residual_rotation.then(&self.track.at(t_ps))
    }

    /// Applies loss, then delay, dispersion and birefringence to the survivors.
    /// Each event's survival draw is keyed by its emission time.
    pub fn propagate(&self, events: &[PairEvent]) -> Vec<TravellingPhoton> {
        let t = self.cfg.transmission();
        let survivors: Vec<PairEvent> = events
            .par_iter()
            .filter(|e| self.key.stream(Module::Fibre, e.emission_ps).random::<f64>() < t)
            .copied()
            .collect();
        self.propagate_survivors(&survivors)
    }

    /// Propagation without the loss step, for events already thinned by the
    /// link transmission. Output is ordered by arrival.
    pub fn propagate_survivors(&self, events: &[PairEvent]) -> Vec<TravellingPhoton> {
        let slope = self.cfg.dispersion_slope();
        let base = self.cfg.base_delay_ps;
        let mut out: Vec<TravellingPhoton> = events
            .par_iter()
            .map(|e| {
                let shift = base + slope * e.wavelength_offset_nm + self.drift.offset_ps(e.emission_ps as f64);
                TravellingPhoton {
                    emission_ps: e.emission_ps,
                    arrival_ps: (e.emission_ps as f64 + shift).round().max(0.0) as u64,
                    rotation: self.rotation_at(e.emission_ps),
                }
            })
            .collect();
        if out.windows(2).any(|w| w[1].arrival_ps < w[0].arrival_ps) {
            out.sort_by_key(|p| p.arrival_ps);
        }
        out
    }
}

/// Propagates a pair stream through a fibre without thermal drift.
pub fn propagate(pairs: &PairStream, cfg: &ChannelConfig, seed: u64) -> Result<Vec<TravellingPhoton>> {
    Ok(Fibre::new(cfg, DelayDrift::none(), seed)?.propagate(&pairs.events))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pair_source::{generate_pairs, SourceConfig};

    #[test]
    fn db_conversion() {
        assert_eq!(transmission_from_db(0.0), 1.0);
        assert!((transmission_from_db(48.0) / 1.584_893e-5 - 1.0).abs() < 1e-6);
        assert!((transmission_from_db(24.0) / 3.981_072e-3 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn default_delay_is_consistent_with_length() {
        let c = ChannelConfig::default();
        c.validate().unwrap();
        assert!((c.group_index - 1.4693).abs() < 1e-4);
        let bad = ChannelConfig {
            base_delay_ps: 9.5e8,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let neg = ChannelConfig {
            loss_db: -1.0,
            ..Default::default()
        };
        assert!(neg.validate().is_err());
    }

    #[test]
    fn lossless_dispersionless_adds_exact_delay() {
        let pairs = generate_pairs(
            &SourceConfig {
                pair_rate: 1e4,
                ..Default::default()
            },
            1.0,
            8,
        )
        .unwrap();
        let out = propagate(&pairs, &ChannelConfig::ideal(), 8).unwrap();
        assert_eq!(out.len(), pairs.events.len());
        for (p, e) in out.iter().zip(&pairs.events) {
            assert_eq!(p.arrival_ps, e.emission_ps + 945_000_000);
            assert_eq!(p.rotation, PoincareRotation::identity());
        }
    }

    #[test]
    fn total_absorption() {
        let pairs = generate_pairs(
            &SourceConfig {
                pair_rate: 1e6,
                ..Default::default()
            },
            1.0,
            2,
        )
        .unwrap();
        let cfg = ChannelConfig {
            loss_db: 300.0,
            ..ChannelConfig::ideal()
        };
        assert!(propagate(&pairs, &cfg, 2).unwrap().is_empty());
    }

    #[test]
    fn random_walk_stays_capped_and_is_reproducible() {
        let traj = BirefringenceTrajectory::RandomWalk {
            speed_deg_per_sqrt_h: 30.0,
            cap_deg: 12.0,
            grid_s: 60.0,
        };
        let a = traj.track(StreamKey::new(3));
        let b = traj.track(StreamKey::new(3));
        let mut max = 0.0f64;
        for k in 0..2000u64 {
            let t = k * 11_700_000_000_000;
            let r = a.at(t);
            assert_eq!(r, b.at(t));
            max = max.max(r.angle_deg().abs());
        }
        assert!(max <= 12.0 + 1e-9, "{max}");
        assert!(max > 6.0);
    }

    #[test]
    fn arrival_order_is_sorted() {
        let pairs = generate_pairs(
            &SourceConfig {
                pair_rate: 5e8,
                ..Default::default()
            },
            0.001,
            4,
        )
        .unwrap();
        let cfg = ChannelConfig {
            loss_db: 0.0,
            ..Default::default()
        };
        let out = propagate(&pairs, &cfg, 4).unwrap();
        assert!(out.windows(2).all(|w| w[0].arrival_ps <= w[1].arrival_ps));
    }
}
