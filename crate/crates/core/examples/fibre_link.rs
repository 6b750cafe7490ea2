//! Propagation over the 192 km link: loss, delay, dispersion and the
//! birefringence drift of the travelling photon.

use qlink::environment::DelayDrift;
use qlink::fibre_channel::{ChannelConfig, Fibre};
use qlink::pair_source::{generate_pairs, SourceConfig};
use qlink::units::FWHM_PER_SIGMA;

pub fn run_example() -> qlink::Result<()> {
    // a lossless copy shows the timing; the real link keeps 1 in 63 000
    let lossless = ChannelConfig {
        loss_db: 0.0,
        ..ChannelConfig::default()
    };
    let pairs = generate_pairs(&SourceConfig::default(), 0.2, 2)?;
    let fibre = Fibre::new(&lossless, DelayDrift::none(), 2)?;
    let out = fibre.propagate(&pairs.events);
    let delays: Vec<f64> = out.iter().map(|p| p.arrival_ps as f64 - p.emission_ps as f64).collect();
    let mean = delays.iter().sum::<f64>() / delays.len() as f64;
    let sd = (delays.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / delays.len() as f64).sqrt();
    println!("mean delay {:.6} ms, dispersion FWHM {:.0} ps", mean / 1e9, sd * FWHM_PER_SIGMA);

    let real = ChannelConfig::default();
    println!("transmission at {} dB: {:.3e}", real.loss_db, real.transmission());
    let drifting = Fibre::new(&real, DelayDrift::none(), 2)?;
    for h in [0u64, 1, 2, 4, 6] {
        let r = drifting.rotation_at(h * 3_600_000_000_000_000);
        println!("  t = {h} h: net rotation {:.1}°", r.angle_deg());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> qlink::Result<()> {
    run_example()
}
