use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::{DetectorConfig, TaggerConfig};
use crate::environment::{TemperatureProfile, ThermalConstants};
use crate::error::{Error, Result};
use crate::fibre_channel::{BirefringenceTrajectory, ChannelConfig};
use crate::pair_source::SourceConfig;
use crate::quantum_state::PolarizationBasisSetting as B;

/// One measurement block: fixed analyzer settings for `duration_s`.
///
/// Labels follow the convention in which orthogonal labels are the
/// correlated combinations of the distributed state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub basis_a: B,
    pub basis_b: B,
    pub duration_s: f64,
}

impl Block {
    pub fn new(basis_a: B, basis_b: B, duration_s: f64) -> Self {
        Self {
            basis_a,
            basis_b,
            duration_s,
        }
    }
}

/// The eight-setting cycle: four correlated, then four uncorrelated pairs per
/// basis, `duration_s` each.
pub fn default_cycle(duration_s: f64) -> Vec<Block> {
    [
        (B::H, B::V),
        (B::V, B::H),
        (B::H, B::H),
        (B::V, B::V),
        (B::D, B::A),
        (B::A, B::D),
        (B::D, B::D),
        (B::A, B::A),
    ]
    .into_iter()
    .map(|(a, b)| Block::new(a, b, duration_s))
    .collect()
}

/// Physical remote analyzer angle for a schedule label: the mirror `90° − θ`.
pub fn remote_physical(label: B) -> B {
    B::from_degrees(90.0 - label.degrees())
}

/// Complete description of a simulated link experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkConfig {
    pub source: SourceConfig,
    pub channel: ChannelConfig,
    pub detector_local: DetectorConfig,
    pub detector_remote: DetectorConfig,
    pub tagger: TaggerConfig,
    pub thermal: ThermalConstants,
    /// Optional temperature offset of the fibre over time.
    pub temperature: Option<TemperatureProfile>,
    /// Local clicks without a surviving partner are generated only within this
    /// half-width around each remote click, shifted by the base delay. `None`
    /// or 0 generates the full local stream.
    pub local_gate_ps: Option<f64>,
    /// Divide all rates by this factor and multiply durations by it.
    pub rate_scale: f64,
    /// Repetitions of `schedule`.
    pub cycles: u32,
    pub schedule: Vec<Block>,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            source: SourceConfig::default(),
            channel: ChannelConfig::default(),
            detector_local: DetectorConfig::local(),
            detector_remote: DetectorConfig::remote(),
            tagger: TaggerConfig::default(),
            thermal: ThermalConstants::default(),
            temperature: None,
            local_gate_ps: Some(25_000.0),
            rate_scale: 1.0,
            cycles: 1,
            schedule: default_cycle(100.0),
        }
    }
}

impl LinkConfig {
    /// Link defaults with the source calibrated to the reference rates.
    pub fn reference() -> Self {
        let mut cfg = Self::default();
        cfg.source = super::calibrate_rates(&super::CalibrationTargets::default(), &cfg)
            .expect("reference targets are reachable")
            .source;
        cfg
    }

    /// An idealised link: perfect state, no dark counts, no rotation, no
    /// dispersion or sync jitter.
    pub fn ideal(pair_rate: f64) -> Self {
        let mut cfg = Self::default();
        cfg.source.pair_rate = pair_rate;
        cfg.source.local_fidelity = 1.0;
        cfg.channel.dispersion_fwhm_ps = 0.0;
        cfg.channel.birefringence = BirefringenceTrajectory::none();
        cfg.channel.residual_rotation = Default::default();
        cfg.detector_local.dark_rate = 0.0;
        cfg.detector_remote.dark_rate = 0.0;
        cfg.tagger.sync_jitter_fwhm_ps = 0.0;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.channel.validate()?;
        self.detector_local.validate()?;
        self.detector_remote.validate()?;
        self.tagger.validate()?;
        self.thermal.validate()?;
        if self.detector_local.channel == self.detector_remote.channel {
            return Err(Error::param("detector_remote.channel", "must differ from detector_local.channel"));
        }
        if self.source.remote_coupling * self.channel.transmission() > 1.0 {
            return Err(Error::param(
                "source.remote_coupling",
                "remote_coupling times link transmission exceeds 1",
            ));
        }
        if let Some(g) = self.local_gate_ps {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::param("local_gate_ps", "must be finite and >= 0"));
            }
        }
        if !(self.rate_scale >= 1.0 && self.rate_scale.is_finite()) {
            return Err(Error::param("rate_scale", "must be finite and >= 1"));
        }
        if self.cycles == 0 {
            return Err(Error::param("cycles", "must be >= 1"));
        }
        if self.schedule.is_empty() {
            return Err(Error::param("schedule", "needs at least one block"));
        }
        if let Some(b) = self.schedule.iter().find(|b| !(b.duration_s > 0.0 && b.duration_s.is_finite())) {
            return Err(Error::param(
                "schedule.duration_s",
                format!("{} for block {}–{} must be finite and > 0", b.duration_s, b.basis_a, b.basis_b),
            ));
        }
        Ok(())
    }

    /// The schedule repeated `cycles` times, with the rate scale applied.
    pub fn blocks(&self) -> Vec<Block> {
        let mut out = Vec::with_capacity(self.schedule.len() * self.cycles as usize);
        for _ in 0..self.cycles {
            out.extend(self.schedule.iter().map(|b| Block {
                duration_s: b.duration_s * self.rate_scale,
                ..*b
            }));
        }
        out
    }

    /// Configuration actually simulated: rates divided by `rate_scale`.
    pub(crate) fn effective(&self) -> LinkConfig {
        let k = self.rate_scale;
        let mut cfg = self.clone();
        if k != 1.0 {
            cfg.source.pair_rate /= k;
            cfg.detector_local.dark_rate /= k;
            cfg.detector_remote.dark_rate /= k;
        }
        cfg
    }

    pub fn total_duration_s(&self) -> f64 {
        self.blocks().iter().map(|b| b.duration_s).sum()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: LinkConfig = toml::from_str(text).map_err(|e| Error::format("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serialisable")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = LinkConfig {
            temperature: Some(TemperatureProfile::ramp(0.0, 3600.0, 0.022).unwrap()),
            ..Default::default()
        };
        let back = LinkConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_takes_defaults() {
        let cfg = LinkConfig::from_toml("cycles = 3\n[source]\npair_rate = 2e6\n").unwrap();
        assert_eq!(cfg.cycles, 3);
        assert_eq!(cfg.source.pair_rate, 2e6);
        assert_eq!(cfg.channel, ChannelConfig::default());
        assert_eq!(cfg.blocks().len(), 24);
    }

    #[test]
    fn field_level_errors() {
        let err = LinkConfig::from_toml("[detector_remote]\nefficiency = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("detector.efficiency"), "{err}");
        let err = LinkConfig::from_toml("[[schedule]]\nbasis_a = \"H\"\nbasis_b = \"V\"\nduration_s = 0\n").unwrap_err();
        assert!(err.to_string().contains("schedule.duration_s"), "{err}");
        assert!(LinkConfig::from_toml("[source]\npair_rate = \"fast\"\n").is_err());
    }

    #[test]
    fn mirror_maps_labels() {
        assert_eq!(remote_physical(B::H), B::V);
        assert_eq!(remote_physical(B::V), B::H);
        assert_eq!(remote_physical(B::D), B::D);
        assert_eq!(remote_physical(B::A), B::A);
    }
}
