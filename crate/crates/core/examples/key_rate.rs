//! Visibilities, fidelity bound, error rate and asymptotic key rate from the
//! eight setting-pair coincidence rates of one measurement cycle.

use qlink::metrics::{
    accidental_rate, basis_visibilities, fidelity_ceiling, fidelity_lower_bound, qber_threshold, KeyRateEstimate,
    MeasurementRecord, EC_EFFICIENCY,
};
use qlink::quantum_state::PolarizationBasisSetting as B;

pub fn run_example() -> qlink::Result<()> {
    let rates = [
        (B::H, B::V, 4.1),
        (B::V, B::H, 4.0),
        (B::H, B::H, 0.45),
        (B::V, B::V, 0.40),
        (B::D, B::A, 4.4),
        (B::A, B::D, 4.3),
        (B::D, B::D, 0.15),
        (B::A, B::A, 0.16),
    ];
    let records: Vec<MeasurementRecord> = rates
        .iter()
        .map(|&(a, b, r)| MeasurementRecord::from_rate(a, b, 100.0, r))
        .collect();
    let (hv, da) = basis_visibilities(&records)?;
    println!("V(H–V) = {:.3} ± {:.3}", hv.visibility, hv.stderr);
    println!("V(D–A) = {:.3} ± {:.3}", da.visibility, da.stderr);
    println!("fidelity ≥ {:.3}", fidelity_lower_bound(hv.visibility, da.visibility));

    let key = KeyRateEstimate::from_records(&records, EC_EFFICIENCY)?;
    println!(
        "sifted {:.2} /s, QBER {:.3}, secure {:.2} /s (zero key above QBER {:.4})",
        key.sifted_rate,
        key.qber,
        key.secure_rate,
        qber_threshold(EC_EFFICIENCY, 1e-9)
    );

    let acc = accidental_rate(2.1e6, 55.0, 823.0);
    println!("accidental floor {acc:.4} /s, fidelity ceiling {:.3}", fidelity_ceiling(0.98, 4.3, acc));
    Ok(())
}

#[allow(dead_code)]
fn main() -> qlink::Result<()> {
    run_example()
}
