//! p-stability of the schemes on the linear test equation.
//!
//! On `dX = (1 - 1.5 alpha) lambda X dt + sqrt(alpha |lambda|) X dW` one step
//! multiplies the state by a random factor that depends on `(lambda dt, alpha)`
//! only. With `a = (1 - 1.5 alpha) lambda`, `b = sqrt(alpha |lambda|)`,
//! `abar = a - eta b^2` and `dW = sqrt(dt) Z`, substituting into the predictor
//! and corrector gives
//!
//! ```text
//! Y'/Y = 1 + abar dt [theta (1 + a dt + b sqrt(dt) Z) + (1 - theta)]
//!          + b sqrt(dt) Z [eta (1 + a dt + b sqrt(dt) Z) + (1 - eta)]
//! ```
//!
//! a quadratic in `Z`. A scheme is p-stable at a point when `E|Y'/Y|^p < 1`.

use rayon::prelude::*;

use super::quadrature::{doubling_expectation, normal_pdf, tanh_sinh};
use crate::error::{Error, Result};
use crate::models::StabilityTestModel;
use crate::schemes::SchemeParams;

/// Moments within this distance of 1 count as unstable.
pub const BOUNDARY_TOL: f64 = 1e-10;
/// Agreement required between successive Gauss-Hermite rules.
pub const QUADRATURE_REL_TOL: f64 = 1e-8;

const SPLIT_REL_TOL: f64 = 1e-12;
const TRUNCATION: f64 = 40.0;

/// Per-step amplification factor `c0 + c1 Z + c2 Z^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferPolynomial {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl TransferPolynomial {
    pub fn new(theta: f64, eta: f64, lambda_dt: f64, alpha: f64) -> Self {
        let a_dt = (1.0 - 1.5 * alpha) * lambda_dt;
        let b2_dt = alpha * lambda_dt.abs();
        let b_sd = b2_dt.sqrt();
        let abar_dt = a_dt - eta * b2_dt;
        Self {
            c0: 1.0 + abar_dt * (1.0 + theta * a_dt),
            c1: theta * abar_dt * b_sd + b_sd * (1.0 + eta * a_dt),
            c2: eta * b2_dt,
        }
    }

    pub fn for_scheme(params: &SchemeParams, lambda_dt: f64, alpha: f64) -> Self {
        Self::new(params.theta(0), params.eta(0), lambda_dt, alpha)
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        self.c0 + z * (self.c1 + z * self.c2)
    }

    /// Real roots in ascending order.
    pub fn real_roots(&self) -> Vec<f64> {
        let TransferPolynomial { c0, c1, c2 } = *self;
        if c2 == 0.0 {
            return if c1 != 0.0 {
                vec![-c0 / c1]
            } else {
                Vec::new()
            };
        }
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc < 0.0 {
            return Vec::new();
        }
        let sq = disc.sqrt();
        // stable quadratic formula
        let q = -0.5 * (c1 + c1.signum() * sq);
        let mut roots = if q == 0.0 {
            vec![0.0]
        } else {
            vec![q / c2, c0 / q]
        };
        roots.sort_by(f64::total_cmp);
        roots.dedup();
        roots
    }
}

fn is_even_integer(p: f64) -> bool {
    p.fract() == 0.0 && (p as u64).is_multiple_of(2)
}

// Integrates |G(z)|^p phi(z) piecewise between the real roots of G, where the
// integrand is smooth inside each piece.
fn split_expectation(g: &TransferPolynomial, p: f64) -> Option<f64> {
    let mut breaks = vec![-TRUNCATION, -10.0, -5.0, 0.0, 5.0, 10.0, TRUNCATION];
    breaks.extend(g.real_roots().into_iter().filter(|r| r.abs() < TRUNCATION));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let f = |z: f64| g.eval(z).abs().powf(p) * normal_pdf(z);
    breaks
        .windows(2)
        .map(|w| tanh_sinh(f, w[0], w[1], SPLIT_REL_TOL))
        .sum()
}

/// `E|Y'/Y|^p` for a scheme on the test equation at `(lambda dt, alpha)`.
///
/// Smooth integrands (even integer `p`, or a factor without real roots) use
/// Gauss-Hermite rules with node doubling. Otherwise `|G|^p` has kinks at the
/// roots of `G`, and the expectation is split at those roots.
pub fn transfer_moment(params: &SchemeParams, lambda_dt: f64, alpha: f64, p: f64) -> Result<f64> {
    if !(lambda_dt < 0.0 && lambda_dt.is_finite()) {
        return Err(Error::DomainError(format!(
            "lambda_dt = {lambda_dt} must be negative"
        )));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::DomainError(format!(
            "alpha = {alpha} must lie in [0, 1)"
        )));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::DomainError(format!("p = {p} must be positive")));
    }
    let g = TransferPolynomial::for_scheme(params, lambda_dt, alpha);
    let smooth = is_even_integer(p) || g.real_roots().iter().all(|r| r.abs() >= TRUNCATION);
    let value = if smooth {
        doubling_expectation(|z| g.eval(z).abs().powf(p), QUADRATURE_REL_TOL)
    } else {
        split_expectation(&g, p)
    };
    value.ok_or(Error::QuadratureNonConvergent {
        lambda_dt,
        alpha,
        p,
    })
}

/// Verdict at one `(lambda dt, alpha, p)` triplet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityPoint {
    pub lambda_dt: f64,
    pub alpha: f64,
    pub p: f64,
    pub moment: f64,
    pub stable: bool,
}

/// Strict inequality `moment < 1`, with moments within [`BOUNDARY_TOL`] of 1
/// treated as boundary points and reported unstable.
pub fn is_stable_moment(moment: f64) -> bool {
    moment < 1.0 - BOUNDARY_TOL
}

pub fn stability_point(
    params: &SchemeParams,
    lambda_dt: f64,
    alpha: f64,
    p: f64,
) -> Result<StabilityPoint> {
    let moment = transfer_moment(params, lambda_dt, alpha, p)?;
    Ok(StabilityPoint {
        lambda_dt,
        alpha,
        p,
        moment,
        stable: is_stable_moment(moment),
    })
}

/// Rectangular lattice over `(lambda dt, alpha)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    lambda_dt: Vec<f64>,
    alpha: Vec<f64>,
}

fn linspace(min: f64, max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    max
                } else {
                    min + (max - min) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

impl Lattice {
    pub fn new(lambda_dt: Vec<f64>, alpha: Vec<f64>) -> Result<Self> {
        if lambda_dt.is_empty() || alpha.is_empty() {
            return Err(Error::DomainError("lattice axes must not be empty".into()));
        }
        if let Some(l) = lambda_dt.iter().find(|l| !(**l < 0.0 && l.is_finite())) {
            return Err(Error::DomainError(format!(
                "lattice lambda_dt = {l} must be negative"
            )));
        }
        if let Some(a) = alpha.iter().find(|a| !(0.0..1.0).contains(*a)) {
            return Err(Error::DomainError(format!(
                "lattice alpha = {a} must lie in [0, 1)"
            )));
        }
        Ok(Self { lambda_dt, alpha })
    }

    /// Evenly spaced axes including both end points.
    pub fn uniform(
        lambda_dt: (f64, f64),
        n_lambda: usize,
        alpha: (f64, f64),
        n_alpha: usize,
    ) -> Result<Self> {
        Self::new(
            linspace(lambda_dt.0, lambda_dt.1, n_lambda),
            linspace(alpha.0, alpha.1, n_alpha),
        )
    }

    pub fn lambda_dt(&self) -> &[f64] {
        &self.lambda_dt
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.lambda_dt.len() * self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes in row-major order, `lambda_dt` outer.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.lambda_dt
            .iter()
            .flat_map(move |&l| self.alpha.iter().map(move |&a| (l, a)))
    }
}

/// Stability verdicts over a lattice for one scheme and one `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRegion {
    pub params: SchemeParams,
    pub p: f64,
    pub lattice: Lattice,
    pub points: Vec<StabilityPoint>,
}

impl StabilityRegion {
    /// Verdict at node `(i, j)` = (`lambda_dt` index, `alpha` index).
    pub fn stable(&self, i: usize, j: usize) -> bool {
        self.points[i * self.lattice.alpha.len() + j].stable
    }

    pub fn mask(&self) -> Vec<bool> {
        self.points.iter().map(|p| p.stable).collect()
    }

    pub fn stable_count(&self) -> usize {
        self.points.iter().filter(|p| p.stable).count()
    }

    /// CSV rows `lambda_dt,alpha,p,moment,stable`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda_dt,alpha,p,moment,stable\n");
        for pt in &self.points {
            out.push_str(&format!(
                "{:?},{:?},{:?},{:?},{}\n",
                pt.lambda_dt, pt.alpha, pt.p, pt.moment, pt.stable
            ));
        }
        out
    }
}

pub fn scan_stability_region(
    params: &SchemeParams,
    p: f64,
    lattice: &Lattice,
) -> Result<StabilityRegion> {
    let nodes: Vec<(f64, f64)> = lattice.nodes().collect();
    let points = nodes
        .par_iter()
        .map(|&(l, a)| stability_point(params, l, a, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(StabilityRegion {
        params: params.clone(),
        p,
        lattice: lattice.clone(),
        points,
    })
}

/// Per-regime verdicts of a switching test model and their conjunction.
#[derive(Debug, Clone, PartialEq)]
pub struct StateStability {
    pub per_regime: Vec<StabilityPoint>,
    pub overall: bool,
}

/// State-p-stability: every regime's `(lambda(i) dt, alpha(i), p)` is stable.
pub fn state_p_stable(
    model: &StabilityTestModel,
    params: &SchemeParams,
    dt: f64,
    p: f64,
) -> Result<StateStability> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::DomainError(format!("dt = {dt} must be positive")));
    }
    let per_regime = (0..model.n_regimes())
        .map(|i| stability_point(params, model.lambda(i) * dt, model.alpha(i), p))
        .collect::<Result<Vec<_>>>()?;
    let overall = per_regime.iter().all(|pt| pt.stable);
    Ok(StateStability {
        per_regime,
        overall,
    })
}

/// Largest `alpha` for which the continuous test equation is p-stable
/// (exclusive): `1 / (1 + p / 2)`.
pub fn continuous_stability_boundary(p: f64) -> f64 {
    1.0 / (1.0 + p / 2.0)
}
