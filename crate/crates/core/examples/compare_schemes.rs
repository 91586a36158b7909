//! Strong errors of all six presets on common random numbers.

use pcem::analysis::compare_schemes;
use pcem::ctmc::GeneratorMatrix;
use pcem::models::linear_model;
use pcem::schemes::SchemePreset;
use pcem::simulate::{build_grid, LinearSystem};

pub fn run_example() -> pcem::Result<Vec<Vec<f64>>> {
    let system = LinearSystem::new(
        linear_model(vec![0.15, 0.05], vec![0.1, 0.1])?,
        GeneratorMatrix::new(&[vec![-0.5, 0.5], vec![0.5, -0.5]])?,
        10.0,
        0,
    )?;
    let schemes: Vec<_> = SchemePreset::ALL.iter().map(|p| p.params()).collect();
    let mut table = Vec::new();
    print!("{:>8}", "delta");
    for p in SchemePreset::ALL {
        print!(
            " {:>12}",
            p.degrees().0.to_string() + "," + &p.degrees().1.to_string()
        );
    }
    println!();
    for delta in [0.1, 0.02, 0.004] {
        let grid = build_grid(10.0, delta)?;
        let cells = compare_schemes(&system, &schemes, &grid, 50, 7)?;
        let means = cells
            .into_iter()
            .map(|c| c.map(|s| s.mean_sup_sq))
            .collect::<pcem::Result<Vec<_>>>()?;
        print!("{delta:>8}");
        for m in &means {
            print!(" {m:>12.4e}");
        }
        println!();
        table.push(means);
    }
    Ok(table)
}

fn main() -> pcem::Result<()> {
    run_example().map(|_| ())
}
