//! Log-log slope of the Euler-Maruyama error against the step size.

use pcem::analysis::convergence_study;
use pcem::ctmc::GeneratorMatrix;
use pcem::models::linear_model;
use pcem::schemes::SchemePreset;
use pcem::simulate::LinearSystem;

pub fn run_example() -> pcem::Result<f64> {
    let system = LinearSystem::new(
        linear_model(vec![0.15, 0.05], vec![0.1, 0.1])?,
        GeneratorMatrix::new(&[vec![-0.5, 0.5], vec![0.5, -0.5]])?,
        10.0,
        0,
    )?;
    let schemes = [
        SchemePreset::EulerMaruyama.params(),
        SchemePreset::SemiDiffusionImplicit.params(),
    ];
    let study = convergence_study(&system, &schemes, 5.0, &[0.1, 0.02, 0.004, 0.001], 60, 11)?;
    for (s, name) in ["EM", "semi-diffusion-implicit"].iter().enumerate() {
        let fit = study.fits[s].clone()?;
        println!("{name}: slope {:.3}, r^2 {:.4}", fit.slope, fit.r_squared);
    }
    Ok(study.fits[0].clone()?.slope)
}

fn main() -> pcem::Result<()> {
    run_example().map(|_| ())
}
