//! One eight-setting measurement cycle: simulate the link, analyze the tag
//! streams and print the summary.

use qlink::harness::{analyze, default_cycle, simulate, AnalysisSettings, LinkConfig};

pub fn run_example() -> qlink::Result<()> {
    let mut cfg = LinkConfig::reference();
    cfg.schedule = default_cycle(50.0);
    let run = simulate(&cfg, 5)?;
    let report = analyze(&run.local, &run.remote, &run.schedule(), &AnalysisSettings::default())?;
    for b in &report.blocks {
        println!(
            "{}–{}: {:>4} coincidences ({:.2} /s)",
            b.record.basis_a, b.record.basis_b, b.record.coincidences, b.rate
        );
    }
    for (k, v) in report.key_values() {
        println!("{k} = {v}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> qlink::Result<()> {
    run_example()
}
