//! Delay drift of the 192 km fibre under a slow temperature ramp, and the
//! inverse estimate of the temperature change from a measured peak shift.

use qlink::environment::{
    delay_shift_from_temperature, drift_trajectory, length_change, temperature_from_delay_shift, TemperatureProfile,
    ThermalConstants,
};

pub fn run_example() -> qlink::Result<()> {
    let k = ThermalConstants::default();
    println!("sensitivity {:.0} ps/K", k.ps_per_kelvin());
    let dt = 0.022;
    println!(
        "{} mK -> {:.1} ps delay, {:.2} mm elongation",
        dt * 1e3,
        delay_shift_from_temperature(dt, &k),
        length_change(dt, &k)
    );
    println!("a 124 ps shift implies {:.1} mK", temperature_from_delay_shift(124.0, &k) * 1e3);

    // ramp over four hours starting 2.28 h into the run
    let profile = TemperatureProfile::ramp(8_208.0, 22_608.0, dt)?;
    let drift = drift_trajectory(&profile, &k);
    for h in 0..=7u32 {
        println!("  t = {h} h: {:6.1} ps", drift.offset_ps(f64::from(h) * 3.6e15));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> qlink::Result<()> {
    run_example()
}
