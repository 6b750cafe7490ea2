//! Statistical checks of the source, fibre and detector models against
//! closed-form oracles.

use qlink::analysis::{cross_correlate, fit_gaussian_peak};
use qlink::detection::{DetectorConfig, PairDetector, TaggerConfig};
use qlink::environment::DelayDrift;
use qlink::fibre_channel::{transmission_from_db, ChannelConfig, Fibre, TravellingPhoton};
use qlink::pair_source::{generate_pairs, SourceConfig};
use qlink::quantum_state::{
    apply_one_sided_unitary, coincidence_probability, make_phi_minus, PoincareRotation, PolarizationBasisSetting as B,
};
use qlink::rng::StreamKey;
use qlink::timetag::TimeTagStream;
use qlink::units::FWHM_PER_SIGMA;

fn source(rate: f64) -> SourceConfig {
    SourceConfig {
        pair_rate: rate,
        ..Default::default()
    }
}

fn std_dev(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[test]
fn interarrival_times_are_exponential() {
    let rate = 1e6;
    let pairs = generate_pairs(&source(rate), 0.2, 11).unwrap();
    let mut gaps: Vec<f64> = pairs
        .events
        .windows(2)
        .map(|w| (w[1].emission_ps - w[0].emission_ps) as f64)
        .collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = gaps.len() as f64;
    let mean = 1e12 / rate;
    let d = gaps
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let cdf = 1.0 - (-g / mean).exp();
            (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max);
    // 1 % critical value of the one-sample Kolmogorov–Smirnov statistic
    assert!(d < 1.63 / n.sqrt(), "D = {d}");
}

#[test]
fn counts_in_disjoint_windows_are_poissonian() {
    let pairs = generate_pairs(&source(1e5), 2.0, 12).unwrap();
    let window = 1_000_000_000u64; // 1 ms -> mean 100
    let mut counts = vec![0f64; 2000];
    for e in &pairs.events {
        counts[(e.emission_ps / window) as usize] += 1.0;
    }
    let m = counts.iter().sum::<f64>() / counts.len() as f64;
    let var = std_dev(&counts).powi(2);
    assert!((m - 100.0).abs() < 5.0 * (100.0 / 2000.0f64).sqrt(), "mean {m}");
    // index of dispersion is 1 ± √(2/(n−1)) for Poisson counts
    assert!((var / m - 1.0).abs() < 5.0 * (2.0 / 1999.0f64).sqrt(), "dispersion {}", var / m);
}

#[test]
fn survival_is_binomial_and_loss_is_additive_in_db() {
    assert!((transmission_from_db(48.0) - transmission_from_db(24.0).powi(2)).abs() < 1e-18);
    let cfg = ChannelConfig {
        loss_db: 10.0,
        ..ChannelConfig::ideal()
    };
    let pairs = generate_pairs(&source(1e6), 1.0, 13).unwrap();
    let n = pairs.events.len() as f64;
    let out = Fibre::new(&cfg, DelayDrift::none(), 13).unwrap().propagate(&pairs.events);
    let k = out.len() as f64;
    let t = cfg.transmission();
    assert!((k - n * t).abs() < 5.0 * (n * t * (1.0 - t)).sqrt(), "{k} of {n}");
}

#[test]
fn dispersion_spread_matches_configured_width() {
    let cfg = ChannelConfig {
        dispersion_fwhm_ps: 760.0,
        ..ChannelConfig::ideal()
    };
    let pairs = generate_pairs(&source(2e5), 1.0, 14).unwrap();
    let out = Fibre::new(&cfg, DelayDrift::none(), 14).unwrap().propagate(&pairs.events);
    let delays: Vec<f64> = out
        .iter()
        .map(|p| p.arrival_ps as f64 - p.emission_ps as f64 - cfg.base_delay_ps)
        .collect();
    let fwhm = std_dev(&delays) * FWHM_PER_SIGMA;
    assert!((fwhm / 760.0 - 1.0).abs() < 0.01, "{fwhm}");
}

fn photons(n: u64, rotation: PoincareRotation) -> Vec<TravellingPhoton> {
    (0..n)
        .map(|i| TravellingPhoton {
            emission_ps: i * 1_000_000,
            arrival_ps: i * 1_000_000 + 500_000,
            rotation,
        })
        .collect()
}

fn perfect(det: DetectorConfig) -> DetectorConfig {
    DetectorConfig {
        efficiency: 1.0,
        dark_rate: 0.0,
        ..det
    }
}

#[test]
fn two_detector_jitter_gives_250_ps_coincidence_width() {
    let state = make_phi_minus();
    let (local, remote) = (perfect(DetectorConfig::local()), perfect(DetectorConfig::remote()));
    let tagger = TaggerConfig {
        bin_width_ps: 1.0,
        sync_jitter_fwhm_ps: 0.0,
    };
    let pd = PairDetector {
        state: &state,
        local_basis: B::H,
        remote_basis: B::H,
        local: &local,
        remote: &remote,
        tagger: &tagger,
        local_coupling: 1.0,
    };
    let clicks = pd.detect(&photons(100_000, PoincareRotation::identity()), StreamKey::new(15));
    let a = TimeTagStream::from_bins(1000, clicks.local_bins, 0).unwrap();
    let b = TimeTagStream::from_bins(1000, clicks.remote_bins, 1).unwrap();
    let h = cross_correlate(&a, &b, 499_000.0, 501_000.0, 10.0).unwrap();
    let fit = fit_gaussian_peak(&h).unwrap();
    assert!((fit.fwhm / 250.0 - 1.0).abs() < 0.05, "{fit:?}");
    assert!((fit.center - 500_000.0).abs() < 5.0, "{fit:?}");
}

#[test]
fn joint_detection_reproduces_born_probabilities() {
    let state = make_phi_minus();
    let (local, remote) = (perfect(DetectorConfig::local()), perfect(DetectorConfig::remote()));
    let tagger = TaggerConfig::default();
    let rotation = PoincareRotation::new([0.3, 0.8, 0.52], 37.0).unwrap();
    let n = 40_000u64;
    let batch = photons(n, rotation);
    let rotated = apply_one_sided_unitary(&state, &rotation);
    for (a, b) in [(B::H, B::H), (B::H, B::V), (B::D, B::A), (B::D, B::D), (B::from_degrees(22.5), B::V)] {
        let pd = PairDetector {
            state: &state,
            local_basis: a,
            remote_basis: b,
            local: &local,
            remote: &remote,
            tagger: &tagger,
            local_coupling: 1.0,
        };
        let clicks = pd.detect(&batch, StreamKey::new(16));
        let p = coincidence_probability(&rotated, &a, &b);
        let expected = n as f64 * p;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt().max(1.0);
        assert!(
            (clicks.coincident as f64 - expected).abs() < 5.0 * sigma,
            "{a:?} {b:?}: {} vs {expected}",
            clicks.coincident
        );
        // marginals stay flat for a maximally entangled state
        let half = n as f64 / 2.0;
        let sigma_half = (n as f64 / 4.0).sqrt();
        assert!((clicks.local_bins.len() as f64 - half).abs() < 5.0 * sigma_half);
        assert!((clicks.remote_bins.len() as f64 - half).abs() < 5.0 * sigma_half);
    }
}
