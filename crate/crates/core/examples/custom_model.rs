//! A user-defined two-dimensional model with two drivers.

use pcem::ctmc::GeneratorMatrix;
use pcem::models::SwitchingModel;
use pcem::schemes::SchemeParams;
use pcem::simulate::{build_grid, simulate_path, ReplicationSeeds};

/// Damped oscillator whose noise level depends on the regime.
struct NoisyOscillator {
    damping: [f64; 2],
    sigma: [f64; 2],
}

impl SwitchingModel for NoisyOscillator {
    fn dim(&self) -> usize {
        2
    }

    fn n_drivers(&self) -> usize {
        2
    }

    fn n_regimes(&self) -> usize {
        2
    }

    fn drift(&self, x: &[f64], r: usize, out: &mut [f64]) {
        out[0] = x[1];
        out[1] = -x[0] - self.damping[r] * x[1];
    }

    // g^{k,j} = sigma * x^k when k == j
    fn diffusion(&self, x: &[f64], r: usize, driver: usize, out: &mut [f64]) {
        out.fill(0.0);
        out[driver] = self.sigma[r] * x[driver];
    }

    fn diffusion_derivative(
        &self,
        _x: &[f64],
        r: usize,
        driver: usize,
        k: usize,
        wrt: usize,
    ) -> f64 {
        if k == driver && wrt == driver {
            self.sigma[r]
        } else {
            0.0
        }
    }
}

pub fn run_example() -> pcem::Result<Vec<f64>> {
    let model = NoisyOscillator {
        damping: [0.1, 1.0],
        sigma: [0.05, 0.3],
    };
    let generator = GeneratorMatrix::new(&[vec![-0.2, 0.2], vec![1.0, -1.0]])?;
    // drift-implicit in position, symmetric in velocity
    let params = SchemeParams::new(vec![1.0, 0.5], vec![0.0, 0.5])?;
    let grid = build_grid(20.0, 0.01)?;
    let path = simulate_path(
        &model,
        &generator,
        &params,
        &grid,
        &[1.0, 0.0],
        0,
        ReplicationSeeds::new(3, 0),
    )?;
    for k in (0..path.len()).step_by(250) {
        let x = path.state(k);
        println!(
            "t = {:>5.2} regime {} x = ({:+.4}, {:+.4})",
            grid.time(k),
            path.regimes.get(k) + 1,
            x[0],
            x[1]
        );
    }
    Ok(path.state(path.len() - 1).to_vec())
}

fn main() -> pcem::Result<()> {
    run_example().map(|_| ())
}
