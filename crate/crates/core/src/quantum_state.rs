//! Two-photon polarization states and projective analyzer measurements.
//!
//! Ordering convention: the first qubit is the photon analysed next to the
//! source, the second is the photon that travels through the fibre. The
//! product basis is ordered `(HH, HV, VH, VV)`.
//!
//! Poincaré-sphere convention: Stokes `S1` is the H/V axis, `S2` the D/A axis
//! and `S3` the R/L axis. A rotation by angle `φ` about unit axis `n` on the
//! sphere corresponds to the SU(2) element
//! `U = cos(φ/2)·I − i·sin(φ/2)·(n1·σz + n2·σx + n3·σy)`, i.e. the Poincaré
//! angle is twice the SU(2) rotation angle.

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector2, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Linear analyzer angle in degrees, normalised to `(-90°, 90°]`.
///
/// The angle is the transmission axis of an ideal linear polarizer. The four
/// canonical settings are H = 0°, V = 90°, D = 45° and A = −45°.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PolarizationBasisSetting {
    angle_deg: f64,
}

impl PolarizationBasisSetting {
    pub const H: Self = Self { angle_deg: 0.0 };
    pub const V: Self = Self { angle_deg: 90.0 };
    pub const D: Self = Self { angle_deg: 45.0 };
    pub const A: Self = Self { angle_deg: -45.0 };

    pub fn from_degrees(angle_deg: f64) -> Self {
        let mut a = angle_deg % 180.0;
        if a <= -90.0 {
            a += 180.0;
        } else if a > 90.0 {
            a -= 180.0;
        }
        Self { angle_deg: a }
    }

    pub fn degrees(&self) -> f64 {
        self.angle_deg
    }

    /// The setting rotated by 90°, whose projector completes this one to the identity.
    pub fn orthogonal(&self) -> Self {
        Self::from_degrees(self.angle_deg + 90.0)
    }

    /// Canonical letter for H, V, D or A; `None` for other angles.
    pub fn label(&self) -> Option<char> {
        match self.angle_deg {
            0.0 => Some('H'),
            90.0 => Some('V'),
            45.0 => Some('D'),
            -45.0 => Some('A'),
            _ => None,
        }
    }

    /// True when both settings belong to the same pair of orthogonal axes.
    pub fn same_family(&self, other: &Self) -> bool {
        let d = (self.angle_deg - other.angle_deg).rem_euclid(90.0);
        d < 1e-9 || (90.0 - d) < 1e-9
    }

    /// True when the two analyzer axes are perpendicular.
    pub fn is_orthogonal_to(&self, other: &Self) -> bool {
        let d = (self.angle_deg - other.angle_deg).rem_euclid(180.0);
        (d - 90.0).abs() < 1e-9
    }

    pub fn jones(&self) -> Vector2<Complex64> {
        let t = self.angle_deg.to_radians();
        Vector2::new(c(t.cos(), 0.0), c(t.sin(), 0.0))
    }

    pub fn projector(&self) -> Matrix2<Complex64> {
        let v = self.jones();
        v * v.adjoint()
    }

    /// Projector of a polarizer with finite contrast `k`: `k·P + (1−k)·I/2`.
    pub fn projector_with_contrast(&self, contrast: f64) -> Matrix2<Complex64> {
        self.projector() * c(contrast, 0.0) + Matrix2::identity() * c((1.0 - contrast) / 2.0, 0.0)
    }
}

impl fmt::Display for PolarizationBasisSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.label() {
            Some(l) => write!(f, "{l}"),
            None => write!(f, "{}", self.angle_deg),
        }
    }
}

impl FromStr for PolarizationBasisSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "H" | "h" => Ok(Self::H),
            "V" | "v" => Ok(Self::V),
            "D" | "d" => Ok(Self::D),
            "A" | "a" => Ok(Self::A),
            other => other
                .trim_end_matches("deg")
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|a| a.is_finite())
                .map(Self::from_degrees)
                .ok_or_else(|| Error::format("basis setting", format!("`{other}`"))),
        }
    }
}

impl TryFrom<String> for PolarizationBasisSetting {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PolarizationBasisSetting> for String {
    fn from(b: PolarizationBasisSetting) -> String {
        b.to_string()
    }
}

/// Rotation of the polarization state on the Poincaré sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareRotation {
    axis: [f64; 3],
    angle_deg: f64,
}

impl Default for PoincareRotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl PoincareRotation {
    pub fn identity() -> Self {
        Self {
            axis: [1.0, 0.0, 0.0],
            angle_deg: 0.0,
        }
    }

    /// Rotation by `angle_deg` about `axis` given in `(S1, S2, S3)` components.
    /// The axis is normalised; a zero axis is rejected.
    pub fn new(axis: [f64; 3], angle_deg: f64) -> Result<Self> {
        let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) || !angle_deg.is_finite() {
            return Err(Error::param("rotation", "axis must be a finite non-zero vector"));
        }
        Ok(Self {
            axis: axis.map(|x| x / norm),
            angle_deg,
        })
    }

    /// Builds a rotation from its rotation vector (axis scaled by angle, degrees).
    pub fn from_rotation_vector(v: [f64; 3]) -> Self {
        let angle = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if angle == 0.0 {
            return Self::identity();
        }
        Self {
            axis: v.map(|x| x / angle),
            angle_deg: angle,
        }
    }

    pub fn rotation_vector(&self) -> [f64; 3] {
        self.axis.map(|x| x * self.angle_deg)
    }

    pub fn axis(&self) -> [f64; 3] {
        self.axis
    }

    pub fn angle_deg(&self) -> f64 {
        self.angle_deg
    }

    pub fn inverse(&self) -> Self {
        Self {
            axis: self.axis,
            angle_deg: -self.angle_deg,
        }
    }

    /// SU(2) Jones matrix in the (H, V) basis.
    pub fn su2(&self) -> Matrix2<Complex64> {
        let half = self.angle_deg.to_radians() / 2.0;
        let (s, co) = half.sin_cos();
        let [n1, n2, n3] = self.axis;
        // n1·σz + n2·σx + n3·σy
        let gen = Matrix2::new(c(n1, 0.0), c(n2, -n3), c(n2, n3), c(-n1, 0.0));
        Matrix2::identity() * c(co, 0.0) - gen * c(0.0, s)
    }

    /// `other` applied after `self`.
    pub fn then(&self, other: &Self) -> Self {
        Self::from_su2(&(other.su2() * self.su2()))
    }

    fn from_su2(u: &Matrix2<Complex64>) -> Self {
        // u = a·I − i·(b1 σz + b2 σx + b3 σy), a = cos(φ/2), |b| = sin(φ/2)
        let a = (u[(0, 0)] + u[(1, 1)]).re / 2.0;
        let b1 = -(u[(0, 0)] - u[(1, 1)]).im / 2.0;
        let b2 = -(u[(0, 1)] + u[(1, 0)]).im / 2.0;
        let b3 = (u[(1, 0)] - u[(0, 1)]).re / 2.0;
        let s = (b1 * b1 + b2 * b2 + b3 * b3).sqrt();
        if s < 1e-15 {
            return Self::identity();
        }
        let angle = 2.0 * s.atan2(a);
        Self {
            axis: [b1 / s, b2 / s, b3 / s],
            angle_deg: angle.to_degrees(),
        }
    }

    /// The 3×3 rotation acting on Stokes vectors `(S1, S2, S3)`.
    pub fn stokes_matrix(&self) -> Matrix3<f64> {
        let phi = self.angle_deg.to_radians();
        let (s, co) = phi.sin_cos();
        let [x, y, z] = self.axis;
        let t = 1.0 - co;
        Matrix3::new(
            co + x * x * t,
            x * y * t - z * s,
            x * z * t + y * s,
            y * x * t + z * s,
            co + y * y * t,
            y * z * t - x * s,
            z * x * t - y * s,
            z * y * t + x * s,
            co + z * z * t,
        )
    }
}

/// Density matrix of a polarization photon pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonState {
    rho: Matrix4<Complex64>,
}

impl TwoPhotonState {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn from_matrix(rho: Matrix4<Complex64>) -> Result<Self> {
        let herm = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > HERMITIAN_TOL {
            return Err(Error::param("rho", format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::param("rho", format!("trace {tr} is not 1")));
        }
        let min_eig = rho
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(Error::param("rho", format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(Self { rho })
    }

    pub fn from_pure(psi: Vector4<Complex64>) -> Result<Self> {
        let n = psi.norm();
        if !(n > 0.0) {
            return Err(Error::param("psi", "zero state vector"));
        }
        let psi = psi / c(n, 0.0);
        Ok(Self {
            rho: psi * psi.adjoint(),
        })
    }

    pub fn maximally_mixed() -> Self {
        Self {
            rho: Matrix4::identity() * c(0.25, 0.0),
        }
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.rho
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    pub fn purity(&self) -> f64 {
        (self.rho * self.rho).trace().re
    }

    /// Reduced state of the local (first) photon.
    pub fn local_marginal(&self) -> Matrix2<Complex64> {
        Matrix2::from_fn(|i, j| self.rho[(2 * i, 2 * j)] + self.rho[(2 * i + 1, 2 * j + 1)])
    }

    /// Reduced state of the travelling (second) photon.
    pub fn remote_marginal(&self) -> Matrix2<Complex64> {
        Matrix2::from_fn(|i, j| self.rho[(i, j)] + self.rho[(2 + i, 2 + j)])
    }

    /// `⟨v|ρ|v⟩` for a (not necessarily normalised) product vector.
    fn expectation(&self, v: &Vector4<Complex64>) -> f64 {
        (v.adjoint() * self.rho * v)[(0, 0)].re
    }
}

/// `|Φ⁻⟩ = (|VV⟩ − |HH⟩)/√2`.
pub fn phi_minus_vector() -> Vector4<Complex64> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    Vector4::new(c(-r, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(r, 0.0))
}

pub fn make_phi_minus() -> TwoPhotonState {
    let v = phi_minus_vector();
    TwoPhotonState {
        rho: v * v.adjoint(),
    }
}

/// Isotropic mixture `p·ρ + (1−p)·I/4`.
pub fn werner_mix(rho: &TwoPhotonState, p: f64) -> Result<TwoPhotonState> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", format!("{p} outside [0, 1]")));
    }
    Ok(TwoPhotonState {
        rho: rho.rho * c(p, 0.0) + Matrix4::identity() * c((1.0 - p) / 4.0, 0.0),
    })
}

/// Mixing weight giving fidelity `f` to |Φ⁻⟩ when applied to |Φ⁻⟩: `p = (4F − 1)/3`.
pub fn werner_weight_for_fidelity(fidelity: f64) -> Result<f64> {
    if !(0.25..=1.0).contains(&fidelity) {
        return Err(Error::param(
            "fidelity",
            format!("{fidelity} outside [0.25, 1] reachable by isotropic mixing"),
        ));
    }
    Ok((4.0 * fidelity - 1.0) / 3.0)
}

/// `(I ⊗ U) ρ (I ⊗ U)†` with `U` the Jones matrix of `r`, acting on the travelling photon.
pub fn apply_one_sided_unitary(rho: &TwoPhotonState, r: &PoincareRotation) -> TwoPhotonState {
    let u = r.su2();
    let full = Matrix2::<Complex64>::identity().kronecker(&u);
    TwoPhotonState {
        rho: full * rho.rho * full.adjoint(),
    }
}

/// `tr(ρ · P_a ⊗ P_b)` for ideal linear analyzers.
pub fn coincidence_probability(
    rho: &TwoPhotonState,
    a: &PolarizationBasisSetting,
    b: &PolarizationBasisSetting,
) -> f64 {
    let v = a.jones().kronecker(&b.jones());
    rho.expectation(&v).clamp(0.0, 1.0)
}

/// Coincidence probability with analyzers of finite contrast (1.0 is ideal).
pub fn coincidence_probability_with_contrast(
    rho: &TwoPhotonState,
    a: &PolarizationBasisSetting,
    b: &PolarizationBasisSetting,
    contrast: f64,
) -> f64 {
    let op = a
        .projector_with_contrast(contrast)
        .kronecker(&b.projector_with_contrast(contrast));
    (rho.rho * op).trace().re.clamp(0.0, 1.0)
}

/// Coincidence probability after the travelling photon picked up rotation `r`.
///
/// Equivalent to `coincidence_probability(apply_one_sided_unitary(rho, r), a, b)`
/// but evaluated as `⟨a, U†b| ρ |a, U†b⟩` without forming the rotated state.
pub fn coincidence_probability_rotated(
    rho: &TwoPhotonState,
    a: &PolarizationBasisSetting,
    b: &PolarizationBasisSetting,
    r: &PoincareRotation,
) -> f64 {
    let b_back = r.su2().adjoint() * b.jones();
    let v = a.jones().kronecker(&b_back);
    rho.expectation(&v).clamp(0.0, 1.0)
}

/// `⟨Φ⁻|ρ|Φ⁻⟩`.
pub fn fidelity_to_phi_minus(rho: &TwoPhotonState) -> f64 {
    rho.expectation(&phi_minus_vector()).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type B = PolarizationBasisSetting;

    const LABELS: [B; 4] = [B::H, B::V, B::D, B::A];

    /// Builds P_a ⊗ P_b by explicit index arithmetic and traces ρ·(P_a ⊗ P_b)
    /// with plain loops, independent of the nalgebra kronecker path.
    fn oracle_coincidence(rho: &TwoPhotonState, a: f64, b: f64) -> f64 {
        let proj = |t: f64| {
            let (s, co) = t.to_radians().sin_cos();
            [[co * co, co * s], [co * s, s * s]]
        };
        let pa = proj(a);
        let pb = proj(b);
        let mut total = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let op = pa[j / 2][i / 2] * pb[j % 2][i % 2];
                total += (rho.matrix()[(i, j)] * op).re;
            }
        }
        total
    }

    fn arb_state() -> impl Strategy<Value = TwoPhotonState> {
        proptest::collection::vec(-1.0f64..1.0, 32).prop_map(|x| {
            let m = Matrix4::from_fn(|i, j| c(x[4 * i + j], x[16 + 4 * i + j]));
            let rho = m * m.adjoint();
            let tr = rho.trace().re;
            TwoPhotonState::from_matrix(rho / c(tr, 0.0)).unwrap()
        })
    }

    fn arb_rotation() -> impl Strategy<Value = PoincareRotation> {
        (
            -1.0f64..1.0,
            -1.0f64..1.0,
            -1.0f64..1.0,
            -720.0f64..720.0,
        )
            .prop_filter("non-zero axis", |(x, y, z, _)| x * x + y * y + z * z > 1e-3)
            .prop_map(|(x, y, z, a)| PoincareRotation::new([x, y, z], a).unwrap())
    }

    #[test]
    fn phi_minus_entries() {
        let rho = make_phi_minus();
        let m = rho.matrix();
        assert!((m[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((m[(3, 3)].re - 0.5).abs() < 1e-15);
        assert!((m[(0, 3)].re + 0.5).abs() < 1e-15);
        for i in 0..4 {
            for j in [1, 2] {
                assert_eq!(m[(i, j)], c(0.0, 0.0));
                assert_eq!(m[(j, i)], c(0.0, 0.0));
            }
        }
        assert!((rho.trace().re - 1.0).abs() < 1e-15);
        assert!((rho.purity() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn werner_cases() {
        let phi = make_phi_minus();
        assert_eq!(werner_mix(&phi, 1.0).unwrap(), phi);
        let mixed = werner_mix(&phi, 0.0).unwrap();
        assert!((mixed.matrix() - TwoPhotonState::maximally_mixed().matrix()).camax() < 1e-15);
        assert!(werner_mix(&phi, 1.01).is_err());
        assert!(werner_mix(&phi, -0.1).is_err());

        let p = werner_weight_for_fidelity(0.98).unwrap();
        assert!((p - 0.973_333_333_333_333_3).abs() < 1e-15);
        let f = fidelity_to_phi_minus(&werner_mix(&phi, p).unwrap());
        assert!((f - 0.98).abs() < 1e-12);
        assert!((f - (p + (1.0 - p) / 4.0)).abs() < 1e-12);
    }

    #[test]
    fn fidelity_cases() {
        assert!((fidelity_to_phi_minus(&make_phi_minus()) - 1.0).abs() < 1e-15);
        assert!((fidelity_to_phi_minus(&TwoPhotonState::maximally_mixed()) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn projections_of_phi_minus() {
        let phi = make_phi_minus();
        assert!(coincidence_probability(&phi, &B::H, &B::V).abs() < 1e-15);
        assert!((coincidence_probability(&phi, &B::H, &B::H) - 0.5).abs() < 1e-15);
        assert!((coincidence_probability(&phi, &B::D, &B::A) - 0.5).abs() < 1e-15);
        assert!(coincidence_probability(&phi, &B::D, &B::D).abs() < 1e-15);
        for a in LABELS {
            for b in LABELS {
                let p = coincidence_probability(&phi, &a, &b);
                let o = oracle_coincidence(&phi, a.degrees(), b.degrees());
                assert!((p - o).abs() < 1e-12, "{a}{b}: {p} vs {o}");
            }
        }
    }

    #[test]
    fn rotation_identity_and_full_turn() {
        let phi = make_phi_minus();
        let id = apply_one_sided_unitary(&phi, &PoincareRotation::identity());
        assert!((id.matrix() - phi.matrix()).camax() < 1e-15);
        for axis in [[1.0, 0.0, 0.0], [0.3, -0.4, 0.8], [0.0, 0.0, 1.0]] {
            let full = PoincareRotation::new(axis, 360.0).unwrap();
            let out = apply_one_sided_unitary(&phi, &full);
            assert!((out.matrix() - phi.matrix()).camax() < 1e-12);
        }
    }

    #[test]
    fn half_turn_about_s1_matches_matrix_product_oracle() {
        // Oracle: U = diag(-i, i) for 180° about S1; build I⊗U by hand and multiply.
        let phi = make_phi_minus();
        let r = PoincareRotation::new([1.0, 0.0, 0.0], 180.0).unwrap();
        let mut full = Matrix4::<Complex64>::zeros();
        full[(0, 0)] = c(0.0, -1.0);
        full[(1, 1)] = c(0.0, 1.0);
        full[(2, 2)] = c(0.0, -1.0);
        full[(3, 3)] = c(0.0, 1.0);
        let oracle = TwoPhotonState {
            rho: full * phi.matrix() * full.adjoint(),
        };
        let out = apply_one_sided_unitary(&phi, &r);
        assert!((out.matrix() - oracle.matrix()).camax() < 1e-14);
        for a in LABELS {
            for b in LABELS {
                let got = coincidence_probability(&out, &a, &b);
                let want = oracle_coincidence(&oracle, a.degrees(), b.degrees());
                assert!((got - want).abs() < 1e-12);
            }
        }
        // The phase flip turns |Φ⁻⟩ into |Φ⁺⟩: HH stays 0.5 while DD goes 0 → 0.5.
        assert!((coincidence_probability(&out, &B::H, &B::H) - 0.5).abs() < 1e-12);
        assert!((coincidence_probability(&out, &B::D, &B::D) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn contrast_one_is_ideal_and_zero_is_blind() {
        let phi = make_phi_minus();
        for a in LABELS {
            for b in LABELS {
                let ideal = coincidence_probability(&phi, &a, &b);
                let k1 = coincidence_probability_with_contrast(&phi, &a, &b, 1.0);
                assert!((ideal - k1).abs() < 1e-14);
                let k0 = coincidence_probability_with_contrast(&phi, &a, &b, 0.0);
                assert!((k0 - 0.25).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn basis_normalisation_and_labels() {
        assert_eq!(B::from_degrees(180.0), B::H);
        assert_eq!(B::from_degrees(-90.0), B::V);
        assert_eq!(B::from_degrees(135.0), B::A);
        assert_eq!(B::from_degrees(225.0), B::D);
        assert_eq!(B::H.orthogonal(), B::V);
        assert_eq!(B::D.orthogonal(), B::A);
        assert_eq!(B::A.orthogonal(), B::D);
        assert_eq!("A".parse::<B>().unwrap(), B::A);
        assert_eq!("22.5".parse::<B>().unwrap().degrees(), 22.5);
        assert!(B::H.same_family(&B::V) && !B::H.same_family(&B::D));
        assert!(B::D.is_orthogonal_to(&B::A) && !B::D.is_orthogonal_to(&B::D));
        assert!("Q".parse::<B>().is_err());
    }

    #[test]
    fn stokes_matrix_agrees_with_su2_action() {
        let r = PoincareRotation::new([0.2, 0.5, -0.7], 37.0).unwrap();
        let u = r.su2();
        // Rotating H (S = +S1) must land on R·(1,0,0).
        let h = Vector2::new(c(1.0, 0.0), c(0.0, 0.0));
        let out = u * h;
        let s1 = out[0].norm_sqr() - out[1].norm_sqr();
        let s2 = 2.0 * (out[0].conj() * out[1]).re;
        let s3 = 2.0 * (out[0].conj() * out[1]).im;
        let m = r.stokes_matrix();
        assert!((m[(0, 0)] - s1).abs() < 1e-12);
        assert!((m[(1, 0)] - s2).abs() < 1e-12);
        assert!((m[(2, 0)] - s3).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn operations_preserve_trace_and_hermiticity(rho in arb_state(), r in arb_rotation(), p in 0.0f64..=1.0) {
            for s in [apply_one_sided_unitary(&rho, &r), werner_mix(&rho, p).unwrap()] {
                prop_assert!((s.trace().re - 1.0).abs() < 1e-12);
                prop_assert!((s.matrix() - s.matrix().adjoint()).camax() < 1e-12);
                prop_assert!(TwoPhotonState::from_matrix(*s.matrix()).is_ok());
            }
        }

        #[test]
        fn projector_completeness(rho in arb_state(), a in -90.0f64..90.0, b in -90.0f64..90.0) {
            let a = B::from_degrees(a);
            let b = B::from_degrees(b);
            let total: f64 = [(a, b), (a, b.orthogonal()), (a.orthogonal(), b), (a.orthogonal(), b.orthogonal())]
                .iter()
                .map(|(x, y)| coincidence_probability(&rho, x, y))
                .sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            let single = coincidence_probability(&rho, &a, &b) + coincidence_probability(&rho, &a, &b.orthogonal());
            let marginal = (a.projector() * rho.local_marginal()).trace().re;
            prop_assert!((single - marginal).abs() < 1e-12);
        }

        #[test]
        fn rotation_then_inverse_is_identity(rho in arb_state(), r in arb_rotation()) {
            let back = apply_one_sided_unitary(&apply_one_sided_unitary(&rho, &r), &r.inverse());
            prop_assert!((back.matrix() - rho.matrix()).camax() < 1e-10);
        }

        #[test]
        fn rotated_probability_matches_rotated_state(rho in arb_state(), r in arb_rotation(), a in -90.0f64..90.0, b in -90.0f64..90.0) {
            let a = B::from_degrees(a);
            let b = B::from_degrees(b);
            let direct = coincidence_probability(&apply_one_sided_unitary(&rho, &r), &a, &b);
            let fast = coincidence_probability_rotated(&rho, &a, &b, &r);
            prop_assert!((direct - fast).abs() < 1e-12);
        }

        #[test]
        fn composition_matches_sequential_application(r1 in arb_rotation(), r2 in arb_rotation()) {
            let phi = make_phi_minus();
            let seq = apply_one_sided_unitary(&apply_one_sided_unitary(&phi, &r1), &r2);
            let comp = apply_one_sided_unitary(&phi, &r1.then(&r2));
            prop_assert!((seq.matrix() - comp.matrix()).camax() < 1e-10);
        }

        #[test]
        fn global_phase_does_not_move_anticorrelation_angle(extra in 0u32..4) {
            // A 360°·k rotation only adds a global phase to U; the argmax over θ of
            // P(θ, θ+90°) must not change.
            let phi = make_phi_minus();
            let turned = apply_one_sided_unitary(&phi, &PoincareRotation::new([0.0, 0.0, 1.0], 360.0 * extra as f64).unwrap());
            let argmax = |s: &TwoPhotonState| {
                (0..180)
                    .map(|k| {
                        let t = B::from_degrees(k as f64 - 89.0);
                        (k, coincidence_probability(s, &t, &t.orthogonal()))
                    })
                    .fold((0, -1.0), |best, x| if x.1 > best.1 + 1e-12 { x } else { best })
                    .0
            };
            prop_assert_eq!(argmax(&phi), argmax(&turned));
        }
    }
}
