//! Coincidence probabilities of the distributed Bell state, with and without
//! source noise and a polarization rotation in the fibre.

use qlink::quantum_state::{
    apply_one_sided_unitary, coincidence_probability, fidelity_to_phi_minus, make_phi_minus, werner_mix,
    werner_weight_for_fidelity, PoincareRotation, PolarizationBasisSetting as B,
};

pub fn run_example() -> qlink::Result<()> {
    let phi = make_phi_minus();
    let settings = [B::H, B::V, B::D, B::A];
    println!("P(a, b) for |Φ⁻⟩");
    for a in &settings {
        let row: Vec<String> = settings
            .iter()
            .map(|b| format!("{:.3}", coincidence_probability(&phi, a, b)))
            .collect();
        println!("  {a}: {}", row.join("  "));
    }

    let noisy = werner_mix(&phi, werner_weight_for_fidelity(0.98)?)?;
    println!("source fidelity {:.4}", fidelity_to_phi_minus(&noisy));

    let rotation = PoincareRotation::new([0.0, 1.0, 0.0], 25.0)?;
    let rotated = apply_one_sided_unitary(&noisy, &rotation);
    println!(
        "after 25° about S2: fidelity {:.4}, P(H,H) = {:.4}, P(D,D) = {:.4}",
        fidelity_to_phi_minus(&rotated),
        coincidence_probability(&rotated, &B::H, &B::H),
        coincidence_probability(&rotated, &B::D, &B::D)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> qlink::Result<()> {
    run_example()
}
