//! Switching models: drift and diffusion coefficients indexed by regime.
//!
//! A model describes `dy = f(y, r) dt + sum_j g^j(y, r) dW^j` for a state in
//! `R^d`, `m` Brownian drivers and `N` regimes. Solvers assume the usual global
//! Lipschitz and linear-growth conditions on `f`, `g` and the corrected drift;
//! those cannot be checked for black-box coefficients and are the caller's
//! responsibility.

use crate::error::{Error, Result};

/// Coefficients of a stochastic differential equation with Markovian switching.
///
/// Implementations must be pure: the same inputs always give the same outputs,
/// and evaluation may happen concurrently from many threads.
pub trait SwitchingModel: Sync {
    /// State dimension `d`.
    fn dim(&self) -> usize;

    /// Number of Brownian drivers `m`.
    fn n_drivers(&self) -> usize;

    /// Number of regimes `N`.
    fn n_regimes(&self) -> usize;

    /// Writes `f(x, regime)` into `out` (length `d`).
    fn drift(&self, x: &[f64], regime: usize, out: &mut [f64]);

    /// Writes the diffusion column `g^driver(x, regime)` into `out` (length `d`).
    fn diffusion(&self, x: &[f64], regime: usize, driver: usize, out: &mut [f64]);

    /// Partial derivative `d g^{component, driver} / d x^wrt` at `(x, regime)`.
    ///
    /// For a scalar model this is just `dg/dx`.
    fn diffusion_derivative(
        &self,
        x: &[f64],
        regime: usize,
        driver: usize,
        component: usize,
        wrt: usize,
    ) -> f64;
}

/// Scalar linear model `dy = a(r) y dt + b(r) y dW`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSwitchingModel {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl LinearSwitchingModel {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        linear_model(a, b)
    }

    pub fn a(&self, regime: usize) -> f64 {
        self.a[regime]
    }

    pub fn b(&self, regime: usize) -> f64 {
        self.b[regime]
    }

    pub fn drift_coeffs(&self) -> &[f64] {
        &self.a
    }

    pub fn diffusion_coeffs(&self) -> &[f64] {
        &self.b
    }
}

/// Builds the linear switching model with per-regime coefficients `a(i)`, `b(i)`.
pub fn linear_model(a: Vec<f64>, b: Vec<f64>) -> Result<LinearSwitchingModel> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::DomainError(
            "a model needs at least one regime".into(),
        ));
    }
    if let Some(v) = a.iter().chain(&b).find(|v| !v.is_finite()) {
        return Err(Error::DomainError(format!("coefficient {v} is not finite")));
    }
    Ok(LinearSwitchingModel { a, b })
}

impl SwitchingModel for LinearSwitchingModel {
    fn dim(&self) -> usize {
        1
    }

    fn n_drivers(&self) -> usize {
        1
    }

    fn n_regimes(&self) -> usize {
        self.a.len()
    }

    #[inline]
    fn drift(&self, x: &[f64], regime: usize, out: &mut [f64]) {
        out[0] = self.a[regime] * x[0];
    }

    #[inline]
    fn diffusion(&self, x: &[f64], regime: usize, _driver: usize, out: &mut [f64]) {
        out[0] = self.b[regime] * x[0];
    }

    #[inline]
    fn diffusion_derivative(&self, _x: &[f64], regime: usize, _: usize, _: usize, _: usize) -> f64 {
        self.b[regime]
    }
}

/// Linear test equation with multiplicative noise,
/// `dX = (1 - 1.5 alpha) lambda X dt + sqrt(alpha |lambda|) X dW`, per regime.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityTestModel {
    alpha: Vec<f64>,
    lambda: Vec<f64>,
}

impl StabilityTestModel {
    pub fn new(alpha: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        if alpha.len() != lambda.len() {
            return Err(Error::LengthMismatch {
                left: alpha.len(),
                right: lambda.len(),
            });
        }
        if alpha.is_empty() {
            return Err(Error::DomainError(
                "a model needs at least one regime".into(),
            ));
        }
        for (i, (&al, &la)) in alpha.iter().zip(&lambda).enumerate() {
            if !(0.0..1.0).contains(&al) {
                return Err(Error::DomainError(format!(
                    "alpha[{i}] = {al} must lie in [0, 1)"
                )));
            }
            if !(la < 0.0 && la.is_finite()) {
                return Err(Error::DomainError(format!(
                    "lambda[{i}] = {la} must be negative and finite"
                )));
            }
        }
        Ok(Self { alpha, lambda })
    }

    pub fn n_regimes(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self, regime: usize) -> f64 {
        self.alpha[regime]
    }

    pub fn lambda(&self, regime: usize) -> f64 {
        self.lambda[regime]
    }

    /// Drift coefficient `(1 - 1.5 alpha) lambda`.
    pub fn drift_coeff(&self, regime: usize) -> f64 {
        (1.0 - 1.5 * self.alpha[regime]) * self.lambda[regime]
    }

    /// Diffusion coefficient `sqrt(alpha |lambda|)`.
    pub fn diffusion_coeff(&self, regime: usize) -> f64 {
        (self.alpha[regime] * self.lambda[regime].abs()).sqrt()
    }

    pub fn to_linear(&self) -> LinearSwitchingModel {
        let n = self.n_regimes();
        LinearSwitchingModel {
            a: (0..n).map(|i| self.drift_coeff(i)).collect(),
            b: (0..n).map(|i| self.diffusion_coeff(i)).collect(),
        }
    }
}

/// The stability test equation as a linear switching model.
pub fn stability_model(alpha: Vec<f64>, lambda: Vec<f64>) -> Result<LinearSwitchingModel> {
    Ok(StabilityTestModel::new(alpha, lambda)?.to_linear())
}

/// `E|X_t|^p` for the single-regime test equation started at `x0 >= 0`.
///
/// The explicit solution is lognormal, so the moment is
/// `x0^p exp(p lambda t [(1 - alpha) - p alpha / 2])`.
pub fn exact_linear_moment(alpha: f64, lambda: f64, p: f64, t: f64, x0: f64) -> f64 {
    x0.powf(p) * (p * lambda * t * ((1.0 - alpha) - p * alpha / 2.0)).exp()
}
