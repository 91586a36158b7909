//! Strong error estimates against the reference path and order fits.

use rayon::prelude::*;

use crate::ctmc::GridTransitions;
use crate::error::{Error, Result};
use crate::schemes::{pcem_step_into, SchemeParams, StepInput, StepWorkspace};
use crate::simulate::{
    build_grid, draw_increments, exact_log_increment, LinearSystem, PathResult, ReplicationSeeds,
    TimeGrid,
};
use rand::Rng;

/// Minimum number of replications for an error estimate.
pub const MIN_REPLICATIONS: usize = 2;
/// Minimum decades spanned by the step sizes of a fit.
pub const MIN_SPAN_DECADES: f64 = 2.0;

/// `sup_k |numeric_k - reference_k|^2` over the grid.
///
/// Fails with [`Error::OverflowPresent`] when either path overflowed; the
/// error carries the supremum over the common finite prefix.
pub fn sup_squared_error(numeric: &PathResult, reference: &PathResult) -> Result<f64> {
    if numeric.dim() != reference.dim() || numeric.grid != reference.grid {
        return Err(Error::DimensionMismatch(
            "paths live on different grids or dimensions".into(),
        ));
    }
    let n = numeric.len().min(reference.len());
    let sup = (0..n)
        .map(|k| {
            numeric
                .state(k)
                .iter()
                .zip(reference.state(k))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    if numeric.overflowed() || reference.overflowed() {
        Err(Error::OverflowPresent { partial: sup })
    } else {
        Ok(sup)
    }
}

/// Monte Carlo estimate of `E sup_k |Y_k - y(t_k)|^2` for one scheme and step.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStats {
    pub params: SchemeParams,
    pub delta: f64,
    pub n_replications: usize,
    /// Replications entering the mean.
    pub n_finite: usize,
    pub mean_sup_sq: f64,
    /// Sample standard deviation over `sqrt(n_finite)`; NaN when `n_finite < 2`.
    pub std_error: f64,
    pub overflow_count: usize,
}

// One replication: sup squared error per scheme, None after an overflow.
fn replication_errors(
    system: &LinearSystem,
    schemes: &[SchemeParams],
    grid: &TimeGrid,
    transitions: &GridTransitions,
    seeds: ReplicationSeeds,
) -> Vec<Option<f64>> {
    let model = &system.model;
    let mut brownian = seeds.brownian().rng();
    let mut chain = seeds.regime().rng();
    let mut ws = StepWorkspace::new(1, 1);
    let mut states: Vec<Option<f64>> = vec![Some(system.y0); schemes.len()];
    let mut sups = vec![0.0f64; schemes.len()];
    let mut reference = system.y0;
    let mut regime = system.r0;
    let mut dw = [0.0];
    let mut next = [0.0];

    for k in 0..grid.n_steps() {
        let h = grid.step(k);
        draw_increments(grid, k, &mut brownian, &mut dw);
        reference *= exact_log_increment(model, regime, h, dw[0]).exp();
        if !reference.is_finite() {
            return vec![None; schemes.len()];
        }
        for ((state, sup), params) in states.iter_mut().zip(sups.iter_mut()).zip(schemes) {
            let Some(y) = *state else { continue };
            let input = StepInput {
                state: &[y],
                regime,
                dt: h,
                dw: &dw,
            };
            pcem_step_into(model, params, &input, &mut ws, &mut next);
            if next[0].is_finite() {
                *state = Some(next[0]);
                let e = next[0] - reference;
                *sup = sup.max(e * e);
            } else {
                *state = None;
            }
        }
        let xi: f64 = chain.random();
        regime = transitions.for_step(k).sample(regime, xi);
    }
    states
        .iter()
        .zip(sups)
        .map(|(s, sup)| s.map(|_| sup))
        .collect()
}

fn summarize(
    params: &SchemeParams,
    grid: &TimeGrid,
    samples: impl Iterator<Item = Option<f64>> + Clone,
    n_replications: usize,
) -> Result<ErrorStats> {
    let finite: Vec<f64> = samples.flatten().collect();
    let n_finite = finite.len();
    if n_finite == 0 {
        return Err(Error::AllOverflowed { n_replications });
    }
    let mean = finite.iter().sum::<f64>() / n_finite as f64;
    let std_error = if n_finite >= 2 {
        let var =
            finite.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n_finite - 1) as f64;
        (var / n_finite as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(ErrorStats {
        params: params.clone(),
        delta: grid.dt(),
        n_replications,
        n_finite,
        mean_sup_sq: mean,
        std_error,
        overflow_count: n_replications - n_finite,
    })
}

/// Error estimates for several schemes on common random numbers.
///
/// Replication `r` uses the streams of `ReplicationSeeds::new(master_seed, r)`
/// for every scheme, so all schemes see the same regime path and increments as
/// [`simulate_coupled`](crate::simulate::simulate_coupled) would. Overflowed
/// replications are excluded from the mean and counted; a replication whose
/// reference overflows counts as overflowed for every scheme. Results do not
/// depend on the number of worker threads.
pub fn compare_schemes(
    system: &LinearSystem,
    schemes: &[SchemeParams],
    grid: &TimeGrid,
    n_replications: usize,
    master_seed: u64,
) -> Result<Vec<Result<ErrorStats>>> {
    if n_replications < MIN_REPLICATIONS {
        return Err(Error::TooFewReplications {
            needed: MIN_REPLICATIONS,
            got: n_replications,
        });
    }
    for params in schemes {
        params.check_dim(1)?;
    }
    let transitions = GridTransitions::new(&system.generator, grid)?;
    let per_rep: Vec<Vec<Option<f64>>> = (0..n_replications as u64)
        .into_par_iter()
        .map(|r| {
            replication_errors(
                system,
                schemes,
                grid,
                &transitions,
                ReplicationSeeds::new(master_seed, r),
            )
        })
        .collect();
    Ok(schemes
        .iter()
        .enumerate()
        .map(|(s, params)| {
            summarize(
                params,
                grid,
                per_rep.iter().map(move |rep| rep[s]),
                n_replications,
            )
        })
        .collect())
}

/// Error estimate for a single scheme.
pub fn monte_carlo_error(
    system: &LinearSystem,
    params: &SchemeParams,
    grid: &TimeGrid,
    n_replications: usize,
    master_seed: u64,
) -> Result<ErrorStats> {
    compare_schemes(
        system,
        std::slice::from_ref(params),
        grid,
        n_replications,
        master_seed,
    )?
    .pop()
    .expect("one scheme in, one result out")
}

/// Least-squares line through `(ln delta, ln error)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Fits `ln mean = intercept + slope ln delta`.
///
/// Needs at least three positive, distinct step sizes spanning two decades and
/// positive finite errors.
pub fn fit_strong_order(deltas: &[f64], means: &[f64]) -> Result<ConvergenceFit> {
    if deltas.len() != means.len() {
        return Err(Error::LengthMismatch {
            left: deltas.len(),
            right: means.len(),
        });
    }
    let n = deltas.len();
    if n < 3 {
        return Err(Error::InsufficientPoints(n));
    }
    if deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::InsufficientSpan {
            span_decades: f64::NAN,
        });
    }
    let mut sorted = deltas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let span_decades = (sorted[n - 1] / sorted[0]).log10();
    if sorted.windows(2).any(|w| w[0] == w[1]) || span_decades < MIN_SPAN_DECADES {
        return Err(Error::InsufficientSpan { span_decades });
    }
    if let Some(m) = means.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
        return Err(Error::DegenerateFit(format!(
            "error {m} has no finite logarithm"
        )));
    }

    let xs: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = means.iter().map(|m| m.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / n as f64;
    let y_mean = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_tot: f64 = ys.iter().map(|y| (y - y_mean).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(ConvergenceFit {
        slope,
        intercept,
        r_squared,
        n_points: n,
    })
}

/// Error tables over a ladder of step sizes, with one fit per scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub deltas: Vec<f64>,
    /// `cells[i][s]`: step `deltas[i]`, scheme `s`.
    pub cells: Vec<Vec<Result<ErrorStats>>>,
    pub fits: Vec<Result<ConvergenceFit>>,
}

/// Runs [`compare_schemes`] at every step size of the ladder.
pub fn convergence_study(
    system: &LinearSystem,
    schemes: &[SchemeParams],
    horizon: f64,
    deltas: &[f64],
    n_replications: usize,
    master_seed: u64,
) -> Result<ConvergenceStudy> {
    let cells = deltas
        .iter()
        .map(|&dt| {
            let grid = build_grid(horizon, dt)?;
            compare_schemes(system, schemes, &grid, n_replications, master_seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let fits = (0..schemes.len())
        .map(|s| {
            let mut ds = Vec::new();
            let mut ms = Vec::new();
            for (i, row) in cells.iter().enumerate() {
                // a fully overflowed cell drops out of the fit
                if let Ok(stats) = &row[s] {
                    ds.push(deltas[i]);
                    ms.push(stats.mean_sup_sq);
                }
            }
            fit_strong_order(&ds, &ms)
        })
        .collect();
    Ok(ConvergenceStudy {
        deltas: deltas.to_vec(),
        cells,
        fits,
    })
}
