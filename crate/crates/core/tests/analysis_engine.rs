//! Correlation, coincidence counting and peak fitting against brute-force
//! and Monte-Carlo oracles.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use qlink::analysis::{
    count_coincidences, cross_correlate, cross_correlate_chunked, fit_gaussian_peak, CoincidenceMode,
};
use qlink::timetag::TimeTagStream;
use qlink::Error;

fn stream(mut bins: Vec<u64>, width_fs: u64, channel: u8) -> TimeTagStream {
    bins.sort_unstable();
    TimeTagStream::from_bins(width_fs, bins, channel).unwrap()
}

fn brute_force(a: &TimeTagStream, b: &TimeTagStream, lo_fs: i128, width_fs: i128, n: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n];
    for i in 0..a.len() {
        for j in 0..b.len() {
            let d = b.time_fs(j) - a.time_fs(i);
            if d >= lo_fs && d < lo_fs + width_fs * n as i128 {
                counts[((d - lo_fs) / width_fs) as usize] += 1;
            }
        }
    }
    counts
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_brute_force(
        a in proptest::collection::vec(0u64..20_000, 0..150),
        b in proptest::collection::vec(0u64..20_000, 0..150),
        lo in -2_000i64..0,
        nbins in 1usize..60,
        width in 1u64..200,
    ) {
        let (sa, sb) = (stream(a, 82_300, 0), stream(b, 82_300, 1));
        let lo_ps = lo as f64 * 100.0;
        let w_ps = width as f64 * 10.0;
        let h = cross_correlate(&sa, &sb, lo_ps, lo_ps + nbins as f64 * w_ps, w_ps).unwrap();
        prop_assert_eq!(h.counts, brute_force(&sa, &sb, lo as i128 * 100_000, width as i128 * 10_000, nbins));
    }

    #[test]
    fn chunking_never_changes_the_histogram(
        a in proptest::collection::vec(0u64..5_000, 0..400),
        b in proptest::collection::vec(0u64..5_000, 0..400),
        chunks in 1usize..17,
    ) {
        let (sa, sb) = (stream(a, 82_300, 0), stream(b, 82_300, 1));
        let one = cross_correlate(&sa, &sb, -20_000.0, 20_000.0, 823.0).unwrap();
        let many = cross_correlate_chunked(&sa, &sb, -20_000.0, 20_000.0, 823.0, chunks).unwrap();
        prop_assert_eq!(one, many);
    }

    #[test]
    fn swapping_streams_mirrors_the_histogram(
        a in proptest::collection::vec(0u64..3_000_000, 0..200),
        b in proptest::collection::vec(0u64..3_000_000, 0..200),
    ) {
        // 1 ps tags and bin edges at half-integer ps: no difference sits on an edge
        let (sa, sb) = (stream(a, 1_000, 0), stream(b, 1_000, 1));
        let ab = cross_correlate(&sa, &sb, -100_000.5, 99_999.5, 1_000.0).unwrap();
        let ba = cross_correlate(&sb, &sa, -99_999.5, 100_000.5, 1_000.0).unwrap();
        let mut reversed = ba.counts.clone();
        reversed.reverse();
        prop_assert_eq!(ab.counts, reversed);
    }

    #[test]
    fn coincidence_modes_bracket_each_other(
        a in proptest::collection::vec(0u64..2_000, 0..200),
        b in proptest::collection::vec(0u64..2_000, 0..200),
        delay in -30i64..30,
        window in 1u64..2_000,
    ) {
        let (sa, sb) = (stream(a, 82_300, 0), stream(b, 82_300, 1));
        let d = delay as f64 * 82.3;
        let w = window as f64;
        let greedy = count_coincidences(&sa, &sb, d, w, CoincidenceMode::Greedy).unwrap();
        let all = count_coincidences(&sa, &sb, d, w, CoincidenceMode::Histogram).unwrap();
        // every-pair count from the definition
        let mut oracle = 0u64;
        for i in 0..sa.len() {
            for j in 0..sb.len() {
                let off = (sb.time_fs(j) - sa.time_fs(i) - (d * 1000.0).round() as i128).abs();
                if off <= (w * 500.0).round() as i128 {
                    oracle += 1;
                }
            }
        }
        prop_assert_eq!(all, oracle);
        prop_assert!(greedy <= all);
        prop_assert!(greedy <= sa.len().min(sb.len()) as u64);
    }
}

#[test]
fn invalid_grids_are_rejected() {
    let s = stream(vec![1, 2, 3], 82_300, 0);
    for (lo, hi, w) in [(0.0, 0.0, 1.0), (10.0, -10.0, 1.0), (-10.0, 10.0, 0.0), (-10.0, 10.0, -1.0)] {
        assert!(matches!(cross_correlate(&s, &s, lo, hi, w), Err(Error::InvalidParameter { .. })));
    }
    assert!(count_coincidences(&s, &s, 0.0, 0.0, CoincidenceMode::Greedy).is_err());
}

/// Peak of `n` true pairs with Gaussian delay `N(center, sigma)` on a flat background.
fn synthetic(n: usize, center: f64, sigma: f64, background: usize, seed: u64) -> (TimeTagStream, TimeTagStream) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(center, sigma).unwrap();
    let span = 1_000_000_000u64;
    let mut a = Vec::with_capacity(n + background);
    let mut b = Vec::with_capacity(n + background);
    for _ in 0..n {
        let t = rng.random_range(10_000..span);
        a.push(t);
        b.push((t as f64 + jitter.sample(&mut rng)).round() as u64);
    }
    for _ in 0..background {
        a.push(rng.random_range(0..span));
        b.push(rng.random_range(0..span));
    }
    (stream(a, 1_000, 0), stream(b, 1_000, 1))
}

#[test]
fn fit_uncertainties_are_calibrated() {
    let (center, sigma) = (1_234.0, 400.0);
    let reps = 150;
    let mut pulls_c = Vec::new();
    let mut pulls_w = Vec::new();
    for seed in 0..reps {
        let (a, b) = synthetic(2_000, center, sigma, 0, seed);
        let h = cross_correlate(&a, &b, -3_000.0, 5_000.0, 82.3).unwrap();
        let f = fit_gaussian_peak(&h).unwrap();
        pulls_c.push((f.center - center) / f.center_stderr);
        pulls_w.push((f.fwhm - sigma * 2.354_820_045) / f.fwhm_stderr);
    }
    for (name, p) in [("center", &pulls_c), ("fwhm", &pulls_w)] {
        let n = p.len() as f64;
        let m = p.iter().sum::<f64>() / n;
        let s = (p.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(m.abs() < 0.35, "{name} pull mean {m}");
        assert!((0.75..1.3).contains(&s), "{name} pull spread {s}");
    }
}

#[test]
fn fit_survives_background() {
    let (a, b) = synthetic(3_000, -500.0, 300.0, 20_000, 99);
    let h = cross_correlate(&a, &b, -6_000.0, 6_000.0, 82.3).unwrap();
    let f = fit_gaussian_peak(&h).unwrap();
    assert!((f.center + 500.0).abs() < 5.0 * f.center_stderr, "{f:?}");
    assert!(f.baseline > 0.0);
}
