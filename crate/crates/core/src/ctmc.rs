//! Continuous-time Markov chains observed on a time grid.
//!
//! A chain with generator `Q` observed at grid points is a discrete chain whose
//! one-step transition matrix over an interval of length `h` is `exp(h Q)`.
//! Regimes are 0-based indices internally; configs and dumps print them 1-based.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::simulate::TimeGrid;

/// Tolerance on generator row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Largest row-sum drift of an exponentiated matrix that is silently renormalized.
pub const RENORMALIZE_TOL: f64 = 1e-10;

const TAYLOR_TERM_TOL: f64 = 1e-16;
const TAYLOR_MAX_TERMS: usize = 60;
const MAX_SQUARINGS: u32 = 1024;

/// A validated generator matrix `Q = (q_ij)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    q: DMatrix<f64>,
}

impl GeneratorMatrix {
    /// Validates a row-major generator.
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        validate_generator(rows)
    }

    pub fn n_states(&self) -> usize {
        self.q.nrows()
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.q[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Row-major copy of the entries.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_states())
            .map(|i| self.q.row(i).iter().copied().collect())
            .collect()
    }

    pub fn transition_matrix(&self, delta: f64) -> Result<TransitionMatrix> {
        transition_matrix(self, delta)
    }
}

/// Checks that `raw` is a square matrix of finite entries with non-negative
/// off-diagonal rates and zero row sums.
pub fn validate_generator(raw: &[Vec<f64>]) -> Result<GeneratorMatrix> {
    let n = raw.len();
    if n == 0 {
        return Err(Error::EmptyGenerator);
    }
    for (row, r) in raw.iter().enumerate() {
        if r.len() != n {
            return Err(Error::NonSquare {
                row,
                len: r.len(),
                expected: n,
            });
        }
    }
    for (i, r) in raw.iter().enumerate() {
        for (j, &value) in r.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteEntry { i, j, value });
            }
            if i != j && value < 0.0 {
                return Err(Error::NegativeOffDiagonal { i, j, value });
            }
        }
        let sum: f64 = r.iter().sum();
        if sum.abs() > ROW_SUM_TOL {
            return Err(Error::RowSumNonzero { row: i, sum });
        }
    }
    let q = DMatrix::from_fn(n, n, |i, j| raw[i][j]);
    Ok(GeneratorMatrix { q })
}

/// One-step transition probabilities of the chain over an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    p: DMatrix<f64>,
    cumulative: Vec<Vec<f64>>,
    interval: f64,
}

impl TransitionMatrix {
    pub fn n_states(&self) -> usize {
        self.p.nrows()
    }

    pub fn interval(&self) -> f64 {
        self.interval
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.p[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.p.row(i).iter().copied().collect()
    }

    /// Samples the next regime from `from` with a uniform variate `xi`.
    ///
    /// Equivalent to `sample_next_regime(&self.row(from), xi)` but uses
    /// cumulative sums precomputed in the same summation order.
    pub fn sample(&self, from: usize, xi: f64) -> usize {
        let cum = &self.cumulative[from];
        let last = cum.len() - 1;
        cum[..last].iter().position(|&c| xi < c).unwrap_or(last)
    }
}

fn cumulative_rows(p: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..p.nrows())
        .map(|i| {
            let mut acc = 0.0;
            p.row(i)
                .iter()
                .map(|&v| {
                    acc += v;
                    acc
                })
                .collect()
        })
        .collect()
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(delta Q)` by scaling and squaring with a truncated Taylor series.
pub fn transition_matrix(q: &GeneratorMatrix, delta: f64) -> Result<TransitionMatrix> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::DomainError(format!(
            "transition interval must be positive and finite, got {delta}"
        )));
    }
    let n = q.n_states();
    let a = q.as_matrix() * delta;
    let norm = inf_norm(&a);
    if !norm.is_finite() {
        return Err(Error::NonConvergent(format!(
            "|Q delta| is not finite for delta={delta}"
        )));
    }

    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
        if squarings > MAX_SQUARINGS {
            return Err(Error::NonConvergent(format!(
                "|Q delta| = {norm} needs too many squarings"
            )));
        }
    }
    let b = a * scale;

    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut converged = false;
    for k in 1..=TAYLOR_MAX_TERMS {
        term = &term * &b / k as f64;
        sum += &term;
        if inf_norm(&term) < TAYLOR_TERM_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergent(
            "Taylor series did not reach the term tolerance".into(),
        ));
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }

    for i in 0..n {
        let row_sum: f64 = sum.row(i).iter().sum();
        let min = sum.row(i).iter().copied().fold(f64::INFINITY, f64::min);
        if !row_sum.is_finite() || (row_sum - 1.0).abs() > RENORMALIZE_TOL || min < -RENORMALIZE_TOL
        {
            return Err(Error::NonConvergent(format!(
                "row {i} of exp(Q delta) drifted: sum={row_sum}, min entry={min}"
            )));
        }
        let mut clamped_sum = 0.0;
        for j in 0..n {
            let v = sum[(i, j)].max(0.0);
            sum[(i, j)] = v;
            clamped_sum += v;
        }
        for j in 0..n {
            sum[(i, j)] /= clamped_sum;
        }
    }

    let cumulative = cumulative_rows(&sum);
    Ok(TransitionMatrix {
        p: sum,
        cumulative,
        interval: delta,
    })
}

/// Picks the next regime from a probability row by the cumulative rule:
/// the first state whose cumulative probability exceeds `xi`, and the last
/// state when `xi` is at or beyond the cumulative sum of all others.
pub fn sample_next_regime(row: &[f64], xi: f64) -> usize {
    let last = row.len() - 1;
    let mut acc = 0.0;
    for (state, &p) in row[..last].iter().enumerate() {
        acc += p;
        if xi < acc {
            return state;
        }
    }
    last
}

/// Regime labels observed at each grid point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegimePath {
    n_states: usize,
    states: Vec<usize>,
}

impl RegimePath {
    pub fn new(n_states: usize, states: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = states.iter().find(|&&s| s >= n_states) {
            return Err(Error::RegimeOutOfRange {
                regime: bad,
                n_states,
            });
        }
        Ok(Self { n_states, states })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn get(&self, k: usize) -> usize {
        self.states[k]
    }
}

/// Transition matrices for the equal interior steps and the possibly shorter
/// final step of a grid.
#[derive(Debug, Clone)]
pub struct GridTransitions {
    interior: TransitionMatrix,
    last: Option<TransitionMatrix>,
    n_steps: usize,
}

impl GridTransitions {
    pub fn new(q: &GeneratorMatrix, grid: &TimeGrid) -> Result<Self> {
        let interior = transition_matrix(q, grid.dt())?;
        let last = if grid.last_step() != grid.dt() {
            Some(transition_matrix(q, grid.last_step())?)
        } else {
            None
        };
        Ok(Self {
            interior,
            last,
            n_steps: grid.n_steps(),
        })
    }

    pub fn for_step(&self, k: usize) -> &TransitionMatrix {
        match &self.last {
            Some(last) if k + 1 == self.n_steps => last,
            _ => &self.interior,
        }
    }
}

/// Simulates the chain at the grid points, drawing one uniform per step.
pub fn simulate_regime_path<R: Rng + ?Sized>(
    q: &GeneratorMatrix,
    grid: &TimeGrid,
    initial: usize,
    rng: &mut R,
) -> Result<RegimePath> {
    let n_states = q.n_states();
    if initial >= n_states {
        return Err(Error::RegimeOutOfRange {
            regime: initial,
            n_states,
        });
    }
    let transitions = GridTransitions::new(q, grid)?;
    let mut states = Vec::with_capacity(grid.n_points());
    let mut current = initial;
    states.push(current);
    for k in 0..grid.n_steps() {
        let xi: f64 = rng.random();
        current = transitions.for_step(k).sample(current, xi);
        states.push(current);
    }
    Ok(RegimePath { n_states, states })
}
