//! Mean-square stability regions of two schemes as character maps.

use pcem::analysis::{
    continuous_stability_boundary, scan_stability_region, state_p_stable, Lattice,
};
use pcem::models::StabilityTestModel;
use pcem::schemes::SchemePreset;

pub fn run_example() -> pcem::Result<(usize, usize)> {
    let lattice = Lattice::uniform((-3.0, -0.05), 16, (0.0, 0.95), 40)?;
    let mut counts = Vec::new();
    for preset in [SchemePreset::EulerMaruyama, SchemePreset::Symmetric] {
        let region = scan_stability_region(&preset.params(), 2.0, &lattice)?;
        println!("{preset} (rows: lambda dt, columns: alpha)");
        for (i, l) in lattice.lambda_dt().iter().enumerate() {
            let row: String = (0..lattice.alpha().len())
                .map(|j| if region.stable(i, j) { '#' } else { '.' })
                .collect();
            println!("{l:>6.2} {row}");
        }
        counts.push(region.stable_count());
    }
    println!(
        "continuous boundary at p = 2: alpha < {}",
        continuous_stability_boundary(2.0)
    );

    let model = StabilityTestModel::new(vec![0.1, 0.4], vec![-2.0, -8.0])?;
    let verdict = state_p_stable(&model, &SchemePreset::Symmetric.params(), 0.2, 2.0)?;
    for (i, pt) in verdict.per_regime.iter().enumerate() {
        println!(
            "regime {}: E|G|^2 = {:.4} stable = {}",
            i + 1,
            pt.moment,
            pt.stable
        );
    }
    println!("state-2-stable: {}", verdict.overall);
    Ok((counts[0], counts[1]))
}

fn main() -> pcem::Result<()> {
    run_example().map(|_| ())
}
