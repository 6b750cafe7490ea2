//! Finding the 0.945 ms coincidence peak of a 10 s measurement and fitting it.

use qlink::analysis::{count_coincidences, find_peak, fit_gaussian_peak, CoincidenceMode, PeakSearch};
use qlink::harness::{simulate, Block, LinkConfig};
use qlink::quantum_state::PolarizationBasisSetting as B;

pub fn run_example() -> qlink::Result<()> {
    let mut cfg = LinkConfig::reference();
    cfg.schedule = vec![Block::new(B::D, B::A, 10.0)];
    let run = simulate(&cfg, 4)?;
    println!("{} local tags, {} remote tags", run.local.len(), run.remote.len());

    let h = find_peak(&run.local, &run.remote, &PeakSearch::default())?;
    let fit = fit_gaussian_peak(&h)?;
    println!(
        "peak at {:.3} ± {:.3} ns, FWHM {:.0} ± {:.0} ps",
        fit.center / 1e3,
        fit.center_stderr / 1e3,
        fit.fwhm,
        fit.fwhm_stderr
    );
    let n = count_coincidences(&run.local, &run.remote, fit.center, 823.0, CoincidenceMode::Greedy)?;
    println!("{n} coincidences in an 823 ps window ({:.2} /s)", n as f64 / 10.0);
    Ok(())
}

#[allow(dead_code)]
fn main() -> qlink::Result<()> {
    run_example()
}
