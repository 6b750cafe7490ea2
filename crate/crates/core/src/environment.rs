//! Thermal model of a long fibre: temperature change to optical delay and
//! length change, and its inverse.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::units::{PS_PER_S, SPEED_OF_LIGHT};

/// How the thermal expansion term enters the delay derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DelaySensitivity {
    /// `Δτ = (L/c)·(dn/dT + α)·ΔT`. Reproduces the reported 22 mK ↔ 124 ps pairing.
    #[default]
    IndexPlusExpansion,
    /// `Δτ = (L/c)·(dn/dT + n·α)·ΔT`, the strict derivative of `τ = nL/c`.
    GroupIndexWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThermalConstants {
    /// Fractional length change per kelvin.
    pub alpha: f64,
    /// Refractive-index change per kelvin.
    pub dn_dt: f64,
    pub group_index: f64,
    pub length_m: f64,
    pub sensitivity: DelaySensitivity,
}

impl Default for ThermalConstants {
    fn default() -> Self {
        Self {
            alpha: 5.6e-7,
            dn_dt: 8.45e-6,
            group_index: 1.469_26,
            length_m: 192_820.538,
            sensitivity: DelaySensitivity::default(),
        }
    }
}

impl ThermalConstants {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("thermal.alpha", self.alpha),
            ("thermal.dn_dt", self.dn_dt),
            ("thermal.group_index", self.group_index),
            ("thermal.length_m", self.length_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(field, "must be finite and > 0"));
            }
        }
        Ok(())
    }

    /// Delay change per kelvin, in picoseconds.
    pub fn ps_per_kelvin(&self) -> f64 {
        let expansion = match self.sensitivity {
            DelaySensitivity::IndexPlusExpansion => self.alpha,
            DelaySensitivity::GroupIndexWeighted => self.group_index * self.alpha,
        };
        self.length_m / SPEED_OF_LIGHT * (self.dn_dt + expansion) * PS_PER_S
    }
}

pub fn delay_shift_from_temperature(dt_k: f64, k: &ThermalConstants) -> f64 {
    k.ps_per_kelvin() * dt_k
}

pub fn temperature_from_delay_shift(dtau_ps: f64, k: &ThermalConstants) -> f64 {
    dtau_ps / k.ps_per_kelvin()
}

/// Fibre elongation in millimetres.
pub fn length_change(dt_k: f64, k: &ThermalConstants) -> f64 {
    k.length_m * k.alpha * dt_k * 1e3
}

/// Piecewise-linear temperature offset versus time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TemperatureProfile {
    /// `(time_s, temp_offset_K)` with strictly increasing times.
    pub points: Vec<(f64, f64)>,
}

impl TemperatureProfile {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::param("temperature profile", "times must be strictly increasing"));
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::param("temperature profile", "non-finite entry"));
        }
        Ok(Self { points })
    }

    /// Linear ramp from 0 K at `t0_s` to `delta_k` at `t1_s`, flat outside.
    pub fn ramp(t0_s: f64, t1_s: f64, delta_k: f64) -> Result<Self> {
        Self::new(vec![(t0_s, 0.0), (t1_s, delta_k)])
    }

    /// Offset at `t_s`; held constant beyond the end points, zero when empty.
    pub fn at(&self, t_s: f64) -> f64 {
        match self.points.as_slice() {
            [] => 0.0,
            [(_, v)] => *v,
            pts => {
                if t_s <= pts[0].0 {
                    return pts[0].1;
                }
                let last = pts[pts.len() - 1];
                if t_s >= last.0 {
                    return last.1;
                }
                let i = pts.partition_point(|p| p.0 <= t_s);
                let (t0, v0) = pts[i - 1];
                let (t1, v1) = pts[i];
                v0 + (v1 - v0) * (t_s - t0) / (t1 - t0)
            }
        }
    }

    /// Parses CSV with header `time_s,temp_offset_K`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next().map(str::trim) {
            Some("time_s,temp_offset_K") => {}
            other => {
                return Err(Error::format(
                    "temperature profile",
                    format!("expected header `time_s,temp_offset_K`, found {other:?}"),
                ))
            }
        }
        let mut points = Vec::new();
        for line in lines {
            let mut cols = line.split(',').map(str::trim);
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::format("temperature profile", format!("bad row `{line}`")))
            };
            let t = parse(cols.next())?;
            let v = parse(cols.next())?;
            points.push((t, v));
        }
        Self::new(points)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("time_s,temp_offset_K\n");
        for (t, v) in &self.points {
            s.push_str(&format!("{t},{v}\n"));
        }
        s
    }
}

/// Delay offset over time produced by a temperature profile.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DelayDrift {
    profile: TemperatureProfile,
    ps_per_kelvin: f64,
}

impl DelayDrift {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn offset_ps(&self, t_ps: f64) -> f64 {
        if self.profile.points.is_empty() {
            return 0.0;
        }
        self.ps_per_kelvin * self.profile.at(t_ps / PS_PER_S)
    }
}

pub fn drift_trajectory(profile: &TemperatureProfile, k: &ThermalConstants) -> DelayDrift {
    DelayDrift {
        profile: profile.clone(),
        ps_per_kelvin: k.ps_per_kelvin(),
    }
}
