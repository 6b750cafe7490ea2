//! Figures of merit derived from coincidence counts: visibility, fidelity
//! bounds, QBER, accidental coincidences and asymptotic key rates.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum_state::PolarizationBasisSetting;
use crate::units::PS_PER_S;

/// Default error-correction inefficiency.
pub const EC_EFFICIENCY: f64 = 1.15;

/// Counts from one analyzer setting pair integrated over `duration_s`.
///
/// Settings use the labelling in which orthogonal labels (H–V, D–A) are the
/// correlated combinations of the distributed state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub basis_a: PolarizationBasisSetting,
    pub basis_b: PolarizationBasisSetting,
    pub duration_s: f64,
    pub coincidences: u64,
    pub singles_a: u64,
    pub singles_b: u64,
}

impl MeasurementRecord {
    pub fn new(basis_a: PolarizationBasisSetting, basis_b: PolarizationBasisSetting, duration_s: f64, coincidences: u64) -> Self {
        Self {
            basis_a,
            basis_b,
            duration_s,
            coincidences,
            singles_a: 0,
            singles_b: 0,
        }
    }

    /// A record with the given coincidence rate, rounded to whole counts.
    pub fn from_rate(basis_a: PolarizationBasisSetting, basis_b: PolarizationBasisSetting, duration_s: f64, rate: f64) -> Self {
        Self::new(basis_a, basis_b, duration_s, (rate * duration_s).round() as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::param("record.duration_s", "must be finite and > 0"));
        }
        Ok(())
    }

    pub fn rate(&self) -> f64 {
        self.coincidences as f64 / self.duration_s
    }

    pub fn is_correlated(&self) -> bool {
        self.basis_a.is_orthogonal_to(&self.basis_b)
    }

    fn family(&self) -> Option<BasisPair> {
        if !self.basis_a.same_family(&self.basis_b) {
            return None;
        }
        let a = self.basis_a;
        if a.same_family(&PolarizationBasisSetting::H) {
            Some(BasisPair::HV)
        } else if a.same_family(&PolarizationBasisSetting::D) {
            Some(BasisPair::DA)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisPair {
    #[serde(rename = "H-V")]
    HV,
    #[serde(rename = "D-A")]
    DA,
}

impl std::fmt::Display for BasisPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BasisPair::HV => "H-V",
            BasisPair::DA => "D-A",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityResult {
    pub basis_pair: BasisPair,
    pub visibility: f64,
    pub stderr: f64,
}

/// Visibility of one basis from the summed rates of its correlated and
/// uncorrelated setting pairs, with Poisson error propagation.
///
/// All four setting combinations of the basis must be present; repeated
/// combinations (several cycles) are pooled.
pub fn visibility(records: &[MeasurementRecord]) -> Result<VisibilityResult> {
    let first = records.first().ok_or(Error::RecordCount { expected: 4, got: 0 })?;
    let family = first
        .family()
        .ok_or_else(|| Error::MixedBasis(format!("{}–{}", first.basis_a, first.basis_b)))?;
    let mut seen = [false; 4];
    let (mut x, mut y, mut vx, mut vy) = (0.0, 0.0, 0.0, 0.0);
    for r in records {
        r.validate()?;
        if r.family() != Some(family) {
            return Err(Error::MixedBasis(format!(
                "{}–{} alongside {family} records",
                r.basis_a, r.basis_b
            )));
        }
        let idx = usize::from(r.basis_a != first.basis_a) * 2 + usize::from(r.is_correlated());
        seen[idx] = true;
        let (rate, var) = (r.rate(), r.coincidences as f64 / (r.duration_s * r.duration_s));
        if r.is_correlated() {
            x += rate;
            vx += var;
        } else {
            y += rate;
            vy += var;
        }
    }
    let distinct = seen.iter().filter(|&&s| s).count();
    if distinct != 4 {
        return Err(Error::RecordCount {
            expected: 4,
            got: distinct,
        });
    }
    let total = x + y;
    if total <= 0.0 {
        return Err(Error::UndefinedVisibility);
    }
    let v = (x - y) / total;
    let stderr = 2.0 / (total * total) * (y * y * vx + x * x * vy).sqrt();
    Ok(VisibilityResult {
        basis_pair: family,
        visibility: v,
        stderr,
    })
}

/// Lower bound on the fidelity to the target Bell state: mean of the two visibilities.
pub fn fidelity_lower_bound(v_hv: f64, v_da: f64) -> f64 {
    0.5 * (v_hv + v_da)
}

pub fn qber_from_visibility(v: f64) -> f64 {
    ((1.0 - v) / 2.0).clamp(0.0, 0.5)
}

/// Shannon binary entropy in bits.
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Expected rate of chance coincidences between independent streams.
pub fn accidental_rate(s1: f64, s2: f64, window_ps: f64) -> f64 {
    s1 * s2 * window_ps / PS_PER_S
}

/// Best attainable fidelity when true coincidences carry `local_fidelity` and
/// accidentals contribute a maximally mixed state.
pub fn fidelity_ceiling(local_fidelity: f64, true_rate: f64, accidental_rate: f64) -> f64 {
    let total = true_rate + accidental_rate;
    if total <= 0.0 {
        return local_fidelity;
    }
    (local_fidelity * true_rate + 0.25 * accidental_rate) / total
}

/// [`fidelity_ceiling`] with accidentals from the singles product.
pub fn fidelity_ceiling_from_singles(local_fidelity: f64, true_rate: f64, s1: f64, s2: f64, window_ps: f64) -> f64 {
    fidelity_ceiling(local_fidelity, true_rate, accidental_rate(s1, s2, window_ps))
}

/// One quarter of the summed coincidence rates of all eight setting pairs.
pub fn sifted_rate(records: &[MeasurementRecord]) -> Result<f64> {
    if records.len() < 8 {
        return Err(Error::RecordCount {
            expected: 8,
            got: records.len(),
        });
    }
    let mut sum = 0.0;
    for r in records {
        r.validate()?;
        sum += r.rate();
    }
    Ok(sum / 4.0)
}

/// Asymptotic key rate with equal bit and phase error rates, clamped at zero.
pub fn secure_rate(sifted: f64, qber: f64, ec_efficiency: f64) -> f64 {
    let h = binary_entropy(qber);
    (sifted * (1.0 - ec_efficiency * h - h)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateEstimate {
    pub sifted_rate: f64,
    pub qber: f64,
    pub secure_rate: f64,
    pub ec_efficiency: f64,
}

impl KeyRateEstimate {
    pub fn new(sifted_rate: f64, qber: f64, ec_efficiency: f64) -> Self {
        let qber = qber.clamp(0.0, 0.5);
        Self {
            sifted_rate,
            qber,
            secure_rate: secure_rate(sifted_rate, qber, ec_efficiency),
            ec_efficiency,
        }
    }

    /// Key rate for a full eight-setting cycle; the error rate follows from the
    /// fidelity bound of the two bases.
    pub fn from_records(records: &[MeasurementRecord], ec_efficiency: f64) -> Result<Self> {
        let sifted = sifted_rate(records)?;
        let (hv, da) = basis_visibilities(records)?;
        let qber = qber_from_visibility(fidelity_lower_bound(hv.visibility, da.visibility));
        Ok(Self::new(sifted, qber, ec_efficiency))
    }
}

/// Splits records by basis and evaluates both visibilities.
pub fn basis_visibilities(records: &[MeasurementRecord]) -> Result<(VisibilityResult, VisibilityResult)> {
    let mut hv = Vec::new();
    let mut da = Vec::new();
    for r in records {
        match r.family() {
            Some(BasisPair::HV) => hv.push(*r),
            Some(BasisPair::DA) => da.push(*r),
            None => return Err(Error::MixedBasis(format!("{}–{}", r.basis_a, r.basis_b))),
        }
    }
    Ok((visibility(&hv)?, visibility(&da)?))
}

/// Smallest error rate with zero key, by bisection to `tol`.
pub fn qber_threshold(ec_efficiency: f64, tol: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 0.5);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if secure_rate(1.0, mid, ec_efficiency) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngleConvention {
    /// The visibility scales with the cosine of the Poincaré angle.
    #[default]
    Cosine,
    /// The extra error rate equals sin² of half the Poincaré angle.
    QberSinSquared,
}

/// Poincaré-sphere rotation implied by a visibility drop, degrees.
pub fn rotation_angle_from_visibility_drop(v_ref: f64, v_obs: f64, convention: AngleConvention) -> Result<f64> {
    if !(v_obs > 0.0 && v_ref <= 1.0) {
        return Err(Error::param("visibility", "need 0 < v_obs and v_ref <= 1"));
    }
    if v_obs > v_ref {
        return Err(Error::param("v_obs", format!("{v_obs} exceeds reference {v_ref}")));
    }
    let rad = match convention {
        AngleConvention::Cosine => (v_obs / v_ref).acos(),
        AngleConvention::QberSinSquared => 2.0 * ((v_ref - v_obs) / 2.0).sqrt().asin(),
    };
    Ok(rad.to_degrees())
}

/// One point of the long-term series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub time_h: f64,
    pub qber: f64,
    pub qber_err: f64,
    pub secure_rate: f64,
    pub peak_pos_ps: f64,
    pub peak_err_ps: f64,
}

pub const SERIES_HEADER: &str = "time_h,qber,qber_err,secure_rate,peak_pos_ps,peak_err_ps";

pub fn write_series_csv<W: Write>(mut w: W, points: &[SeriesPoint]) -> std::io::Result<()> {
    writeln!(w, "{SERIES_HEADER}")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            p.time_h, p.qber, p.qber_err, p.secure_rate, p.peak_pos_ps, p.peak_err_ps
        )?;
    }
    Ok(())
}

/// Writes `key=value` lines.
pub fn write_key_values<W: Write, K: std::fmt::Display, V: std::fmt::Display>(
    mut w: W,
    pairs: impl IntoIterator<Item = (K, V)>,
) -> std::io::Result<()> {
    for (k, v) in pairs {
        writeln!(w, "{k}={v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use PolarizationBasisSetting as B;

    fn hv(corr: f64, uncorr: f64) -> Vec<MeasurementRecord> {
        vec![
            MeasurementRecord::from_rate(B::H, B::V, 100.0, corr),
            MeasurementRecord::from_rate(B::V, B::H, 100.0, corr),
            MeasurementRecord::from_rate(B::H, B::H, 100.0, uncorr),
            MeasurementRecord::from_rate(B::V, B::V, 100.0, uncorr),
        ]
    }

    #[test]
    fn visibility_examples() {
        let v = visibility(&hv(4.3, 0.3)).unwrap();
        assert!((v.visibility - 4.0 / 4.6).abs() < 1e-12);
        assert_eq!(v.basis_pair, BasisPair::HV);
        assert_eq!(visibility(&hv(1.0, 0.0)).unwrap().visibility, 1.0);
        assert_eq!(visibility(&hv(1.0, 1.0)).unwrap().visibility, 0.0);
        assert!(matches!(visibility(&hv(0.0, 0.0)), Err(Error::UndefinedVisibility)));
    }

    #[test]
    fn visibility_stderr_matches_propagation() {
        // 860 correlated and 60 uncorrelated counts over 100 s each pair
        let v = visibility(&hv(4.3, 0.3)).unwrap();
        let (x, y) = (8.6f64, 0.6f64);
        let (sx, sy) = ((860.0f64).sqrt() / 100.0, (60.0f64).sqrt() / 100.0);
        let expect = ((2.0 * y / (x + y).powi(2) * sx).powi(2) + (2.0 * x / (x + y).powi(2) * sy).powi(2)).sqrt();
        assert!((v.stderr - expect).abs() < 1e-12);
    }

    #[test]
    fn mixed_or_missing_records_rejected() {
        let mut r = hv(1.0, 1.0);
        r[0].basis_b = B::D;
        assert!(matches!(visibility(&r), Err(Error::MixedBasis(_))));
        assert!(matches!(visibility(&hv(1.0, 1.0)[..3]), Err(Error::RecordCount { .. })));
    }

    #[test]
    fn qber_and_fidelity() {
        assert_eq!(qber_from_visibility(1.0), 0.0);
        assert_eq!(qber_from_visibility(0.0), 0.5);
        assert_eq!(qber_from_visibility(-0.2), 0.5);
        assert!((qber_from_visibility(0.8696) - 0.0652).abs() < 1e-12);
        assert!((fidelity_lower_bound(0.82, 0.94) - 0.88).abs() < 1e-12);
        assert!((fidelity_lower_bound(0.80, 0.90) - 0.85).abs() < 1e-12);
    }

    #[test]
    fn accidentals_and_ceiling() {
        assert!((accidental_rate(2.1e6, 55.0, 823.0) - 0.095_056_5).abs() < 1e-6);
        assert_eq!(accidental_rate(0.0, 55.0, 823.0), 0.0);
        assert!((accidental_rate(1e3, 1e3, 1e6) - 1.0).abs() < 1e-12);
        assert!((fidelity_ceiling(0.98, 4.2, 0.0) - 0.98).abs() < 1e-15);
        assert!((fidelity_ceiling(0.25, 4.2, 3.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn sifted_and_secure() {
        let mut recs = hv(4.3, 0.3);
        recs.extend([
            MeasurementRecord::from_rate(B::D, B::A, 100.0, 4.3),
            MeasurementRecord::from_rate(B::A, B::D, 100.0, 4.3),
            MeasurementRecord::from_rate(B::D, B::D, 100.0, 0.3),
            MeasurementRecord::from_rate(B::A, B::A, 100.0, 0.3),
        ]);
        assert!((sifted_rate(&recs).unwrap() - 4.6).abs() < 1e-12);
        assert!(sifted_rate(&recs[..7]).is_err());
        assert_eq!(secure_rate(3.0, 0.0, 1.15), 3.0);
        assert_eq!(secure_rate(3.0, 0.11, 1.15), 0.0);
        assert!((secure_rate(4.6, 0.075, 1.15) - 0.80).abs() < 0.01);
        let k = KeyRateEstimate::from_records(&recs, EC_EFFICIENCY).unwrap();
        assert!((k.qber - 0.6 / 9.2).abs() < 1e-12);
    }

    #[test]
    fn angle_conventions() {
        assert_eq!(rotation_angle_from_visibility_drop(0.9, 0.9, AngleConvention::Cosine).unwrap(), 0.0);
        assert!((rotation_angle_from_visibility_drop(1.0, 0.5, AngleConvention::Cosine).unwrap() - 60.0).abs() < 1e-9);
        let q = rotation_angle_from_visibility_drop(0.94, 0.87, AngleConvention::QberSinSquared).unwrap();
        assert!((q - 2.0 * 0.035f64.sqrt().asin().to_degrees()).abs() < 1e-12);
        assert!((q - 21.6).abs() < 0.05);
        assert!(rotation_angle_from_visibility_drop(0.8, 0.9, AngleConvention::Cosine).is_err());
    }
}
