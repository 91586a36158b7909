//! How a PCEM step departs from the Euler-Maruyama step.

use pcem::models::linear_model;
use pcem::schemes::{pcem_step, residual_decomposition, SchemePreset, StepInput};

pub fn run_example() -> pcem::Result<f64> {
    let model = linear_model(vec![1.0, 2.0], vec![2.0, 1.0])?;
    let input = StepInput {
        state: &[200.0],
        regime: 0,
        dt: 0.01,
        dw: &[0.05],
    };
    let mut worst = 0.0f64;
    for preset in SchemePreset::ALL {
        let params = preset.params();
        let parts = residual_decomposition(&model, &params, &input)?;
        let step = pcem_step(&model, &params, &input)[0];
        let [r1, r2, r3, r4] = parts.residuals;
        println!(
            "{:<30} EM {:>10.5} R1 {r1:>+9.5} R2 {r2:>+9.5} R3 {r3:>+9.5} R4 {r4:>+9.5} step {step:>10.5}",
            preset.name(),
            parts.em_step
        );
        worst = worst.max((parts.total() - step).abs());
    }
    println!("largest mismatch {worst:e}");
    Ok(worst)
}

fn main() -> pcem::Result<()> {
    run_example().map(|_| ())
}
