//! One-step transition probabilities of the regime chain.

use pcem::ctmc::GeneratorMatrix;

pub fn run_example() -> pcem::Result<Vec<[f64; 4]>> {
    let mut out = Vec::new();
    for q in [2.0, 1.5, 0.5] {
        let generator = GeneratorMatrix::new(&[vec![-1.0, 1.0], vec![q, -q]])?;
        let p = generator.transition_matrix(1e-5)?;
        println!("q = {q}");
        for i in 0..2 {
            println!("  [{:.6}, {:.6}]", p.prob(i, 0), p.prob(i, 1));
        }
        out.push([p.prob(0, 0), p.prob(0, 1), p.prob(1, 0), p.prob(1, 1)]);
    }
    Ok(out)
}

fn main() -> pcem::Result<()> {
    run_example().map(|_| ())
}
