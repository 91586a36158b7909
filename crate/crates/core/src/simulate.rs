//! Time grids, random streams, Brownian increments and path generation.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::ctmc::{simulate_regime_path, GeneratorMatrix, RegimePath};
use crate::error::{Error, Result};
use crate::models::{LinearSwitchingModel, SwitchingModel};
use crate::schemes::{pcem_step_into, SchemeParams, StepInput, StepWorkspace};

const DIVISIBLE_TOL: f64 = 1e-9;

/// Equidistant grid on `[0, T]` whose final step is clamped to land on `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    dt: f64,
    n_steps: usize,
    last_step: f64,
}

/// Builds `t_k = k dt` for `t_k < T`, then `t_n = T`.
pub fn build_grid(horizon: f64, dt: f64) -> Result<TimeGrid> {
    if !(dt > 0.0 && dt.is_finite() && horizon.is_finite() && dt <= horizon) {
        return Err(Error::InvalidStep { horizon, dt });
    }
    let ratio = horizon / dt;
    let nearest = ratio.round();
    let divisible = (ratio - nearest).abs() <= DIVISIBLE_TOL * nearest.max(1.0);
    let n_steps = if divisible { nearest } else { ratio.ceil() } as usize;
    let last_step = if divisible {
        dt
    } else {
        let rem = horizon - (n_steps - 1) as f64 * dt;
        rem.min(dt)
    };
    Ok(TimeGrid {
        horizon,
        dt,
        n_steps,
        last_step,
    })
}

impl TimeGrid {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }

    pub fn last_step(&self) -> f64 {
        self.last_step
    }

    /// Length of step `k`, from `t_k` to `t_{k+1}`.
    #[inline]
    pub fn step(&self, k: usize) -> f64 {
        if k + 1 == self.n_steps {
            self.last_step
        } else {
            self.dt
        }
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_points()).map(|k| self.time(k)).collect()
    }
}

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamPurpose {
    Brownian = 0,
    Regime = 1,
}

/// Identifies one reproducible random stream.
///
/// The master seed keys a ChaCha20 generator; replication index and purpose
/// select one of its 2^64 independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub replication: u64,
    pub purpose: StreamPurpose,
}

impl SeedSpec {
    pub fn new(master_seed: u64, replication: u64, purpose: StreamPurpose) -> Self {
        Self {
            master_seed,
            replication,
            purpose,
        }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        assert!(self.replication < 1 << 63, "replication index too large");
        let mut rng = ChaCha20Rng::seed_from_u64(self.master_seed);
        rng.set_stream((self.replication << 1) | self.purpose as u64);
        rng
    }
}

/// The regime and Brownian streams of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReplicationSeeds {
    pub master_seed: u64,
    pub replication: u64,
}

impl ReplicationSeeds {
    pub fn new(master_seed: u64, replication: u64) -> Self {
        Self {
            master_seed,
            replication,
        }
    }

    pub fn regime(&self) -> SeedSpec {
        SeedSpec::new(self.master_seed, self.replication, StreamPurpose::Regime)
    }

    pub fn brownian(&self) -> SeedSpec {
        SeedSpec::new(self.master_seed, self.replication, StreamPurpose::Brownian)
    }
}

/// Brownian increments, one `m`-vector per grid step.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianIncrements {
    drivers: usize,
    values: Vec<f64>,
}

impl BrownianIncrements {
    pub fn from_values(drivers: usize, values: Vec<f64>) -> Result<Self> {
        if drivers == 0 || !values.len().is_multiple_of(drivers) {
            return Err(Error::DimensionMismatch(format!(
                "{} increment values do not split into {drivers} drivers",
                values.len()
            )));
        }
        Ok(Self { drivers, values })
    }

    pub fn drivers(&self) -> usize {
        self.drivers
    }

    pub fn n_steps(&self) -> usize {
        self.values.len() / self.drivers
    }

    pub fn step(&self, k: usize) -> &[f64] {
        &self.values[k * self.drivers..(k + 1) * self.drivers]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Draws the `m` increments of step `k`: independent `N(0, h_k)` variates.
#[inline]
pub fn draw_increments<R: Rng + ?Sized>(grid: &TimeGrid, k: usize, rng: &mut R, out: &mut [f64]) {
    let sd = grid.step(k).sqrt();
    for v in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = sd * z;
    }
}

pub fn brownian_increments<R: Rng + ?Sized>(
    grid: &TimeGrid,
    drivers: usize,
    rng: &mut R,
) -> BrownianIncrements {
    let mut values = vec![0.0; grid.n_steps() * drivers];
    for (k, chunk) in values.chunks_exact_mut(drivers.max(1)).enumerate() {
        draw_increments(grid, k, rng, chunk);
    }
    BrownianIncrements { drivers, values }
}

/// One simulated trajectory on a grid.
///
/// When a state becomes non-finite the path is frozen: `overflow` holds the
/// index of the first non-finite grid point and `states` stops just before it.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub grid: TimeGrid,
    pub regimes: Arc<RegimePath>,
    pub increments: Arc<BrownianIncrements>,
    dim: usize,
    states: Vec<f64>,
    overflow: Option<usize>,
}

impl PathResult {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored (finite) states.
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn overflow(&self) -> Option<usize> {
        self.overflow
    }

    pub fn overflowed(&self) -> bool {
        self.overflow.is_some()
    }
}

fn check_inputs(
    grid: &TimeGrid,
    regimes: &RegimePath,
    increments: &BrownianIncrements,
    n_regimes: usize,
    drivers: usize,
) -> Result<()> {
    if regimes.len() != grid.n_points() {
        return Err(Error::DimensionMismatch(format!(
            "regime path has {} points, grid has {}",
            regimes.len(),
            grid.n_points()
        )));
    }
    if increments.n_steps() != grid.n_steps() || increments.drivers() != drivers {
        return Err(Error::DimensionMismatch(format!(
            "increments cover {} steps x {} drivers, expected {} x {drivers}",
            increments.n_steps(),
            increments.drivers(),
            grid.n_steps()
        )));
    }
    if regimes.n_states() > n_regimes {
        return Err(Error::DimensionMismatch(format!(
            "chain has {} states but the model has {n_regimes} regimes",
            regimes.n_states()
        )));
    }
    Ok(())
}

/// Iterates the scheme along given regime and increment sequences.
pub fn integrate_path<M: SwitchingModel + ?Sized>(
    model: &M,
    params: &SchemeParams,
    grid: &TimeGrid,
    regimes: Arc<RegimePath>,
    increments: Arc<BrownianIncrements>,
    y0: &[f64],
) -> Result<PathResult> {
    let d = model.dim();
    if y0.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, model dimension is {d}",
            y0.len()
        )));
    }
    params.check_dim(d)?;
    check_inputs(
        grid,
        &regimes,
        &increments,
        model.n_regimes(),
        model.n_drivers(),
    )?;

    let mut ws = StepWorkspace::for_model(model);
    let mut states = Vec::with_capacity(grid.n_points() * d);
    let mut overflow = None;
    if y0.iter().all(|v| v.is_finite()) {
        states.extend_from_slice(y0);
        let mut next = vec![0.0; d];
        for k in 0..grid.n_steps() {
            let input = StepInput {
                state: &states[k * d..(k + 1) * d],
                regime: regimes.get(k),
                dt: grid.step(k),
                dw: increments.step(k),
            };
            pcem_step_into(model, params, &input, &mut ws, &mut next);
            if !next.iter().all(|v| v.is_finite()) {
                overflow = Some(k + 1);
                break;
            }
            states.extend_from_slice(&next);
        }
    } else {
        overflow = Some(0);
    }
    Ok(PathResult {
        grid: *grid,
        regimes,
        increments,
        dim: d,
        states,
        overflow,
    })
}

/// Generates the regime path and increments of one replication.
pub fn replication_noise(
    generator: &GeneratorMatrix,
    grid: &TimeGrid,
    drivers: usize,
    r0: usize,
    seeds: ReplicationSeeds,
) -> Result<(Arc<RegimePath>, Arc<BrownianIncrements>)> {
    let regimes = simulate_regime_path(generator, grid, r0, &mut seeds.regime().rng())?;
    let increments = brownian_increments(grid, drivers, &mut seeds.brownian().rng());
    Ok((Arc::new(regimes), Arc::new(increments)))
}

/// Simulates one numeric path with its own regime and Brownian streams.
pub fn simulate_path<M: SwitchingModel + ?Sized>(
    model: &M,
    generator: &GeneratorMatrix,
    params: &SchemeParams,
    grid: &TimeGrid,
    y0: &[f64],
    r0: usize,
    seeds: ReplicationSeeds,
) -> Result<PathResult> {
    let (regimes, increments) = replication_noise(generator, grid, model.n_drivers(), r0, seeds)?;
    integrate_path(model, params, grid, regimes, increments, y0)
}

/// Per-step exponent of the reference recursion for a linear model.
#[inline]
pub fn exact_log_increment(model: &LinearSwitchingModel, regime: usize, h: f64, dw: f64) -> f64 {
    let (a, b) = (model.a(regime), model.b(regime));
    h * a + dw * b - 0.5 * h * b * b
}

/// Reference path of a linear model,
/// `y_{k+1} = y_k exp(h a(r_k) + dW b(r_k) - h b(r_k)^2 / 2)`.
pub fn exact_linear_path(
    model: &LinearSwitchingModel,
    grid: &TimeGrid,
    regimes: Arc<RegimePath>,
    increments: Arc<BrownianIncrements>,
    y0: f64,
) -> Result<PathResult> {
    check_inputs(grid, &regimes, &increments, model.n_regimes(), 1)?;
    let mut states = Vec::with_capacity(grid.n_points());
    let mut overflow = None;
    if y0.is_finite() {
        states.push(y0);
        let mut y = y0;
        for k in 0..grid.n_steps() {
            y *= exact_log_increment(model, regimes.get(k), grid.step(k), increments.step(k)[0])
                .exp();
            if !y.is_finite() {
                overflow = Some(k + 1);
                break;
            }
            states.push(y);
        }
    } else {
        overflow = Some(0);
    }
    Ok(PathResult {
        grid: *grid,
        regimes,
        increments,
        dim: 1,
        states,
        overflow,
    })
}

/// A numeric path and its reference path driven by the same noise.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPaths {
    pub numeric: PathResult,
    pub reference: PathResult,
}

impl CoupledPaths {
    /// True when both members hold the very same regime and increment buffers.
    pub fn shares_noise(&self) -> bool {
        Arc::ptr_eq(&self.numeric.regimes, &self.reference.regimes)
            && Arc::ptr_eq(&self.numeric.increments, &self.reference.increments)
            && self.numeric.grid == self.reference.grid
    }
}

/// A linear switching system with its chain and initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub model: LinearSwitchingModel,
    pub generator: GeneratorMatrix,
    pub y0: f64,
    pub r0: usize,
}

impl LinearSystem {
    pub fn new(
        model: LinearSwitchingModel,
        generator: GeneratorMatrix,
        y0: f64,
        r0: usize,
    ) -> Result<Self> {
        if model.n_regimes() != generator.n_states() {
            return Err(Error::DimensionMismatch(format!(
                "model has {} regimes, generator has {} states",
                model.n_regimes(),
                generator.n_states()
            )));
        }
        if r0 >= generator.n_states() {
            return Err(Error::RegimeOutOfRange {
                regime: r0,
                n_states: generator.n_states(),
            });
        }
        if !y0.is_finite() {
            return Err(Error::DomainError(format!(
                "initial state {y0} is not finite"
            )));
        }
        Ok(Self {
            model,
            generator,
            y0,
            r0,
        })
    }
}

/// Simulates a numeric path and the reference path on shared noise.
pub fn simulate_coupled(
    system: &LinearSystem,
    params: &SchemeParams,
    grid: &TimeGrid,
    seeds: ReplicationSeeds,
) -> Result<CoupledPaths> {
    let (regimes, increments) = replication_noise(&system.generator, grid, 1, system.r0, seeds)?;
    let numeric = integrate_path(
        &system.model,
        params,
        grid,
        regimes.clone(),
        increments.clone(),
        &[system.y0],
    )?;
    let reference = exact_linear_path(&system.model, grid, regimes, increments, system.y0)?;
    Ok(CoupledPaths { numeric, reference })
}

/// Tab-separated dump of coupled paths: one row per grid point with time,
/// 1-based regime, increment into the point, numeric and reference states.
pub fn dump_coupled(paths: &CoupledPaths) -> String {
    let grid = &paths.numeric.grid;
    let mut out = String::from("t\tregime\tdW\tnumeric\treference\n");
    for k in 0..grid.n_points() {
        let dw = if k == 0 {
            0.0
        } else {
            paths.numeric.increments.step(k - 1)[0]
        };
        let cell = |p: &PathResult| {
            if k < p.len() {
                format!("{:?}", p.state(k)[0])
            } else {
                "NaN".to_string()
            }
        };
        let _ = writeln!(
            out,
            "{:?}\t{}\t{:?}\t{}\t{}",
            grid.time(k),
            paths.numeric.regimes.get(k) + 1,
            dw,
            cell(&paths.numeric),
            cell(&paths.reference)
        );
    }
    out
}
