//! Algebraic properties of the figures of merit.

use proptest::prelude::*;

use qlink::metrics::{
    basis_visibilities, binary_entropy, fidelity_ceiling, qber_from_visibility, qber_threshold, secure_rate,
    visibility, KeyRateEstimate, MeasurementRecord,
};
use qlink::quantum_state::PolarizationBasisSetting as B;
use qlink::Error;

fn hv(correlated: u64, uncorrelated: u64) -> Vec<MeasurementRecord> {
    vec![
        MeasurementRecord::new(B::H, B::V, 100.0, correlated),
        MeasurementRecord::new(B::V, B::H, 100.0, correlated),
        MeasurementRecord::new(B::H, B::H, 100.0, uncorrelated),
        MeasurementRecord::new(B::V, B::V, 100.0, uncorrelated),
    ]
}

proptest! {
    #[test]
    fn visibility_is_antisymmetric_and_bounded(x in 0u64..10_000, y in 0u64..10_000) {
        prop_assume!(x + y > 0);
        let v = visibility(&hv(x, y)).unwrap().visibility;
        let w = visibility(&hv(y, x)).unwrap().visibility;
        prop_assert!((v + w).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&v));
    }

    #[test]
    fn visibility_ignores_record_order(x in 1u64..10_000, y in 0u64..10_000, rot in 0usize..4) {
        let mut r = hv(x, y);
        let v = visibility(&r).unwrap();
        r.rotate_left(rot);
        prop_assert_eq!(visibility(&r).unwrap(), v);
    }

    #[test]
    fn qber_falls_as_visibility_rises(a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(qber_from_visibility(hi) <= qber_from_visibility(lo));
    }

    #[test]
    fn secure_rate_is_monotone(r in 0.0f64..100.0, q1 in 0.0f64..0.5, q2 in 0.0f64..0.5, f in 1.0f64..1.5) {
        let (lo, hi) = if q1 < q2 { (q1, q2) } else { (q2, q1) };
        prop_assert!(secure_rate(r, hi, f) <= secure_rate(r, lo, f) + 1e-12);
        prop_assert!(secure_rate(r, lo, f) <= r);
        prop_assert!(secure_rate(2.0 * r, lo, f) >= secure_rate(r, lo, f));
    }

    #[test]
    fn threshold_separates_positive_and_zero_key(f in 1.0f64..2.0) {
        let t = qber_threshold(f, 1e-9);
        prop_assert!(secure_rate(1.0, t - 1e-6, f) > 0.0);
        prop_assert_eq!(secure_rate(1.0, t + 1e-6, f), 0.0);
        prop_assert!((1.0 - (1.0 + f) * binary_entropy(t)).abs() < 1e-6);
    }

    #[test]
    fn ceiling_is_a_mixture_of_source_fidelity_and_noise(
        fid in 0.25f64..1.0,
        c in 0.0f64..100.0,
        a1 in 0.0f64..10.0,
        a2 in 0.0f64..10.0,
    ) {
        prop_assume!(c > 0.0);
        let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
        let f_lo = fidelity_ceiling(fid, c, lo);
        prop_assert!(fidelity_ceiling(fid, c, hi) <= f_lo + 1e-12);
        prop_assert!((0.25 - 1e-12..=fid + 1e-12).contains(&f_lo));
        prop_assert!((fidelity_ceiling(fid, c, 0.0) - fid).abs() < 1e-12);
    }
}

#[test]
fn binary_entropy_shape() {
    assert_eq!(binary_entropy(0.0), 0.0);
    assert_eq!(binary_entropy(1.0), 0.0);
    assert!((binary_entropy(0.5) - 1.0).abs() < 1e-15);
    assert!((binary_entropy(0.11) - binary_entropy(0.89)).abs() < 1e-15);
}

#[test]
fn key_rate_from_a_cycle() {
    let mut records = hv(930, 70);
    records.extend([
        MeasurementRecord::new(B::D, B::A, 100.0, 930),
        MeasurementRecord::new(B::A, B::D, 100.0, 930),
        MeasurementRecord::new(B::D, B::D, 100.0, 70),
        MeasurementRecord::new(B::A, B::A, 100.0, 70),
    ]);
    let (v_hv, v_da) = basis_visibilities(&records).unwrap();
    assert!((v_hv.visibility - 0.86).abs() < 1e-12 && (v_da.visibility - 0.86).abs() < 1e-12);
    let k = KeyRateEstimate::from_records(&records, 1.15).unwrap();
    assert!((k.sifted_rate - 10.0).abs() < 1e-12);
    assert!((k.qber - 0.07).abs() < 1e-12);
    assert!((k.secure_rate - secure_rate(10.0, 0.07, 1.15)).abs() < 1e-12);
    assert!(matches!(
        KeyRateEstimate::from_records(&records[..6], 1.15),
        Err(Error::RecordCount { expected: 8, got: 6 })
    ));
}
