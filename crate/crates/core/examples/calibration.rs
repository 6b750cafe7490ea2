//! Fitting pair rate and couplings to measured singles and coincidence rates.

use qlink::harness::{calibrate_rates, expected_rates, CalibrationTargets, LinkConfig};

pub fn run_example() -> qlink::Result<()> {
    let mut cfg = LinkConfig::default();
    let targets = CalibrationTargets::default();
    let cal = calibrate_rates(&targets, &cfg)?;
    println!("pair rate {:.3e} /s", cal.source.pair_rate);
    println!("local coupling {:.4}, remote coupling {:.3}", cal.source.local_coupling, cal.source.remote_coupling);
    println!("window captures {:.1} % of the peak", 100.0 * cal.window_fraction);

    cfg.source = cal.source;
    let r = expected_rates(&cfg, targets.window_ps)?;
    println!(
        "predicted: local {:.3e} /s, remote {:.1} /s, coincidences {:.2} /s (accidental {:.3} /s)",
        r.local_singles,
        r.remote_singles,
        r.true_coincidences + r.accidentals,
        r.accidentals
    );

    let doubled = CalibrationTargets {
        coincidences: 2.0 * targets.coincidences,
        ..targets
    };
    let cal2 = calibrate_rates(&doubled, &LinkConfig::default())?;
    println!("doubling the coincidence target gives pair rate {:.3e} /s", cal2.source.pair_rate);
    Ok(())
}

#[allow(dead_code)]
fn main() -> qlink::Result<()> {
    run_example()
}
