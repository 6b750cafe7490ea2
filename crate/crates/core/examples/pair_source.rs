//! Poisson pair emission: rate, inter-arrival statistics and the spectral
//! spread of the travelling photon.

use qlink::pair_source::{generate_pairs, SourceConfig};

pub fn run_example() -> qlink::Result<()> {
    let cfg = SourceConfig {
        pair_rate: 5e6,
        ..Default::default()
    };
    let pairs = generate_pairs(&cfg, 0.1, 1)?;
    let n = pairs.events.len() as f64;
    let gaps: Vec<f64> = pairs
        .events
        .windows(2)
        .map(|w| (w[1].emission_ps - w[0].emission_ps) as f64)
        .collect();
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let offsets: Vec<f64> = pairs.events.iter().map(|e| e.wavelength_offset_nm).collect();
    let rms = (offsets.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
    println!("{n} pairs in 100 ms ({:.3e} /s)", n / 0.1);
    println!("mean gap {mean_gap:.0} ps (expected {:.0} ps)", 1e12 / cfg.pair_rate);
    println!("wavelength offset FWHM {:.3} nm", rms * qlink::units::FWHM_PER_SIGMA);
    Ok(())
}

#[allow(dead_code)]
fn main() -> qlink::Result<()> {
    run_example()
}
