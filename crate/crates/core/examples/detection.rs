//! Joint detection of pairs: correlated analyzer outcomes, efficiencies,
//! timing jitter and time-tagger quantisation.

use qlink::analysis::{cross_correlate, fit_gaussian_peak};
use qlink::detection::{DetectorConfig, PairDetector, TaggerConfig};
use qlink::fibre_channel::TravellingPhoton;
use qlink::quantum_state::{make_phi_minus, PoincareRotation, PolarizationBasisSetting as B};
use qlink::rng::StreamKey;
use qlink::timetag::TimeTagStream;

pub fn run_example() -> qlink::Result<()> {
    let state = make_phi_minus();
    let (local, remote, tagger) = (DetectorConfig::local(), DetectorConfig::remote(), TaggerConfig::default());
    let photons: Vec<TravellingPhoton> = (0..200_000u64)
        .map(|i| TravellingPhoton {
            emission_ps: i * 1_000_000,
            arrival_ps: i * 1_000_000 + 400_000,
            rotation: PoincareRotation::identity(),
        })
        .collect();
    for (a, b) in [(B::H, B::H), (B::H, B::V), (B::D, B::D)] {
        let clicks = PairDetector {
            state: &state,
            local_basis: a,
            remote_basis: b,
            local: &local,
            remote: &remote,
            tagger: &tagger,
            local_coupling: 1.0,
        }
        .detect(&photons, StreamKey::new(3));
        println!(
            "{a}–{b}: local {} remote {} coincident {}",
            clicks.local_bins.len(),
            clicks.remote_bins.len(),
            clicks.coincident
        );
        if clicks.coincident > 1000 {
            let sa = TimeTagStream::from_bins(tagger.bin_width_fs(), clicks.local_bins, 0)?;
            let sb = TimeTagStream::from_bins(tagger.bin_width_fs(), clicks.remote_bins, 1)?;
            let fit = fit_gaussian_peak(&cross_correlate(&sa, &sb, 397_000.0, 403_000.0, 82.3)?)?;
            println!("  peak {:.0} ps, FWHM {:.0} ps (jitter plus sync)", fit.center, fit.fwhm);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> qlink::Result<()> {
    run_example()
}
