//! A numeric path next to the reference path on the same noise.

use pcem::analysis::sup_squared_error;
use pcem::ctmc::GeneratorMatrix;
use pcem::models::linear_model;
use pcem::schemes::SchemePreset;
use pcem::simulate::{build_grid, simulate_coupled, LinearSystem, ReplicationSeeds};

pub fn run_example() -> pcem::Result<f64> {
    let system = LinearSystem::new(
        linear_model(vec![0.15, 0.05], vec![0.1, 0.1])?,
        GeneratorMatrix::new(&[vec![-0.5, 0.5], vec![0.5, -0.5]])?,
        10.0,
        0,
    )?;
    let grid = build_grid(10.0, 0.01)?;
    let paths = simulate_coupled(
        &system,
        &SchemePreset::Symmetric.params(),
        &grid,
        ReplicationSeeds::new(42, 0),
    )?;
    println!(
        "{:>6} {:>6} {:>12} {:>12}",
        "t", "regime", "numeric", "reference"
    );
    for k in (0..grid.n_points()).step_by(100) {
        println!(
            "{:>6.2} {:>6} {:>12.6} {:>12.6}",
            grid.time(k),
            paths.numeric.regimes.get(k) + 1,
            paths.numeric.state(k)[0],
            paths.reference.state(k)[0]
        );
    }
    let err = sup_squared_error(&paths.numeric, &paths.reference)?;
    println!("sup squared error: {err:e}");
    Ok(err)
}

fn main() -> pcem::Result<()> {
    run_example().map(|_| ())
}
