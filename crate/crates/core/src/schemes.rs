//! The predictor-corrector Euler-Maruyama family.
//!
//! One step from `(Y, r)` over `dt` with Brownian increment `dW`:
//!
//! ```text
//! predictor:  Yp = Y + f(Y, r) dt + sum_j g^j(Y, r) dW^j
//! corrector:  Y' = Y + { theta fbar(Yp, r) + (1 - theta) fbar(Y, r) } dt
//!                    + sum_j { eta g^j(Yp, r) + (1 - eta) g^j(Y, r) } dW^j
//! ```
//!
//! with the corrected drift `fbar = f - eta * (g . grad) g`. Both stages use the
//! regime at the start of the step. In `d` dimensions `theta` and `eta` are
//! per-component.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::models::SwitchingModel;

/// Degrees of implicitness `(theta, eta)`, one entry per state component.
///
/// A length-1 parameter set applies the same degrees to every component.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeParams {
    theta: Vec<f64>,
    eta: Vec<f64>,
}

impl SchemeParams {
    pub fn new(theta: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        if theta.len() != eta.len() {
            return Err(Error::LengthMismatch {
                left: theta.len(),
                right: eta.len(),
            });
        }
        if theta.is_empty() {
            return Err(Error::DomainError("theta and eta must not be empty".into()));
        }
        for (name, values) in [("theta", &theta), ("eta", &eta)] {
            if let Some((k, v)) = values
                .iter()
                .enumerate()
                .find(|(_, v)| !(0.0..=1.0).contains(*v))
            {
                return Err(Error::DomainError(format!(
                    "{name}[{k}] = {v} must lie in [0, 1]"
                )));
            }
        }
        Ok(Self { theta, eta })
    }

    pub fn scalar(theta: f64, eta: f64) -> Result<Self> {
        Self::new(vec![theta], vec![eta])
    }

    /// Drift implicitness for component `k`.
    #[inline]
    pub fn theta(&self, k: usize) -> f64 {
        if self.theta.len() == 1 {
            self.theta[0]
        } else {
            self.theta[k]
        }
    }

    /// Diffusion implicitness for component `k`.
    #[inline]
    pub fn eta(&self, k: usize) -> f64 {
        if self.eta.len() == 1 {
            self.eta[0]
        } else {
            self.eta[k]
        }
    }

    pub fn thetas(&self) -> &[f64] {
        &self.theta
    }

    pub fn etas(&self) -> &[f64] {
        &self.eta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Checks that the parameters can drive a model of dimension `dim`.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.len() == 1 || self.len() == dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "scheme has {} components, model has dimension {dim}",
                self.len()
            )))
        }
    }
}

/// The named members of the family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemePreset {
    EulerMaruyama,
    Symmetric,
    SemiDriftImplicit,
    DriftImplicit,
    SemiDiffusionImplicit,
    FullyImplicit,
}

impl SchemePreset {
    pub const ALL: [SchemePreset; 6] = [
        SchemePreset::EulerMaruyama,
        SchemePreset::Symmetric,
        SchemePreset::SemiDriftImplicit,
        SchemePreset::DriftImplicit,
        SchemePreset::SemiDiffusionImplicit,
        SchemePreset::FullyImplicit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemePreset::EulerMaruyama => "EM",
            SchemePreset::Symmetric => "symmetric-PCEM",
            SchemePreset::SemiDriftImplicit => "semi-drift-implicit-PCEM",
            SchemePreset::DriftImplicit => "drift-implicit-PCEM",
            SchemePreset::SemiDiffusionImplicit => "semi-diffusion-implicit-PCEM",
            SchemePreset::FullyImplicit => "fully-implicit-PCEM",
        }
    }

    /// `(theta, eta)` of the preset.
    pub fn degrees(self) -> (f64, f64) {
        match self {
            SchemePreset::EulerMaruyama => (0.0, 0.0),
            SchemePreset::Symmetric => (0.5, 0.5),
            SchemePreset::SemiDriftImplicit => (0.5, 0.0),
            SchemePreset::DriftImplicit => (1.0, 0.0),
            SchemePreset::SemiDiffusionImplicit => (0.0, 0.5),
            SchemePreset::FullyImplicit => (1.0, 1.0),
        }
    }

    pub fn params(self) -> SchemeParams {
        let (theta, eta) = self.degrees();
        SchemeParams {
            theta: vec![theta],
            eta: vec![eta],
        }
    }
}

impl fmt::Display for SchemePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemePreset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::DomainError(format!("unknown scheme preset '{s}'")))
    }
}

/// A labelled parameter set, either a preset or explicit degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct Scheme {
    pub label: String,
    pub params: SchemeParams,
}

impl Scheme {
    pub fn custom(params: SchemeParams) -> Self {
        let label = if params.len() == 1 {
            format!(
                "custom(theta={:?},eta={:?})",
                params.theta(0),
                params.eta(0)
            )
        } else {
            format!(
                "custom(theta={:?},eta={:?})",
                params.thetas(),
                params.etas()
            )
        };
        Self { label, params }
    }
}

impl From<SchemePreset> for Scheme {
    fn from(p: SchemePreset) -> Self {
        Self {
            label: p.name().to_string(),
            params: p.params(),
        }
    }
}

/// Inputs of one step.
#[derive(Debug, Clone, Copy)]
pub struct StepInput<'a> {
    pub state: &'a [f64],
    pub regime: usize,
    pub dt: f64,
    pub dw: &'a [f64],
}

/// Scratch buffers for stepping a model of fixed dimensions.
#[derive(Debug, Clone)]
pub struct StepWorkspace {
    dim: usize,
    drivers: usize,
    drift: Vec<f64>,
    g_state: Vec<f64>,
    g_pred: Vec<f64>,
    fbar_state: Vec<f64>,
    fbar_pred: Vec<f64>,
    predictor: Vec<f64>,
}

impl StepWorkspace {
    pub fn new(dim: usize, drivers: usize) -> Self {
        Self {
            dim,
            drivers,
            drift: vec![0.0; dim],
            g_state: vec![0.0; dim * drivers],
            g_pred: vec![0.0; dim * drivers],
            fbar_state: vec![0.0; dim],
            fbar_pred: vec![0.0; dim],
            predictor: vec![0.0; dim],
        }
    }

    pub fn for_model<M: SwitchingModel + ?Sized>(model: &M) -> Self {
        Self::new(model.dim(), model.n_drivers())
    }
}

// Diffusion columns laid out driver-major: g[j * d + k] = g^{k,j}.
fn eval_diffusion<M: SwitchingModel + ?Sized>(model: &M, x: &[f64], regime: usize, g: &mut [f64]) {
    let d = model.dim();
    for (j, col) in g.chunks_exact_mut(d).enumerate() {
        model.diffusion(x, regime, j, col);
    }
}

// sum_{j1, j2} sum_l g^{l,j1} d g^{k,j2} / d x^l
fn drift_correction<M: SwitchingModel + ?Sized>(
    model: &M,
    x: &[f64],
    regime: usize,
    g: &[f64],
    k: usize,
) -> f64 {
    let d = model.dim();
    let m = model.n_drivers();
    let mut total = 0.0;
    for j1 in 0..m {
        for j2 in 0..m {
            for l in 0..d {
                total += g[j1 * d + l] * model.diffusion_derivative(x, regime, j2, k, l);
            }
        }
    }
    total
}

fn corrected_drift_from<M: SwitchingModel + ?Sized>(
    model: &M,
    params: &SchemeParams,
    x: &[f64],
    regime: usize,
    g: &[f64],
    out: &mut [f64],
) {
    model.drift(x, regime, out);
    for (k, o) in out.iter_mut().enumerate() {
        let eta = params.eta(k);
        if eta != 0.0 {
            *o -= eta * drift_correction(model, x, regime, g, k);
        }
    }
}

/// The corrected drift `fbar_eta(x, regime)`; `eta` holds one degree per
/// component or a single shared degree.
pub fn corrected_drift<M: SwitchingModel + ?Sized>(
    model: &M,
    eta: &[f64],
    x: &[f64],
    regime: usize,
) -> Vec<f64> {
    let params = SchemeParams {
        theta: vec![0.0; eta.len()],
        eta: eta.to_vec(),
    };
    let mut g = vec![0.0; model.dim() * model.n_drivers()];
    eval_diffusion(model, x, regime, &mut g);
    let mut out = vec![0.0; model.dim()];
    corrected_drift_from(model, &params, x, regime, &g, &mut out);
    out
}

fn predictor_into<M: SwitchingModel + ?Sized>(
    model: &M,
    input: &StepInput<'_>,
    ws: &mut StepWorkspace,
) {
    let d = ws.dim;
    model.drift(input.state, input.regime, &mut ws.drift);
    eval_diffusion(model, input.state, input.regime, &mut ws.g_state);
    for k in 0..d {
        let mut acc = input.state[k] + ws.drift[k] * input.dt;
        for j in 0..ws.drivers {
            acc += ws.g_state[j * d + k] * input.dw[j];
        }
        ws.predictor[k] = acc;
    }
}

// Expects ws.g_state and ws.predictor filled by predictor_into.
fn corrector_into<M: SwitchingModel + ?Sized>(
    model: &M,
    params: &SchemeParams,
    input: &StepInput<'_>,
    ws: &mut StepWorkspace,
    out: &mut [f64],
) {
    let d = ws.dim;
    let r = input.regime;
    eval_diffusion(model, &ws.predictor, r, &mut ws.g_pred);
    corrected_drift_from(
        model,
        params,
        input.state,
        r,
        &ws.g_state,
        &mut ws.fbar_state,
    );
    corrected_drift_from(
        model,
        params,
        &ws.predictor,
        r,
        &ws.g_pred,
        &mut ws.fbar_pred,
    );
    for k in 0..d {
        let theta = params.theta(k);
        let eta = params.eta(k);
        let drift = theta * ws.fbar_pred[k] + (1.0 - theta) * ws.fbar_state[k];
        let mut acc = input.state[k] + drift * input.dt;
        for j in 0..ws.drivers {
            let g = eta * ws.g_pred[j * d + k] + (1.0 - eta) * ws.g_state[j * d + k];
            acc += g * input.dw[j];
        }
        out[k] = acc;
    }
}

/// Advances one step in place using preallocated buffers.
pub fn pcem_step_into<M: SwitchingModel + ?Sized>(
    model: &M,
    params: &SchemeParams,
    input: &StepInput<'_>,
    ws: &mut StepWorkspace,
    out: &mut [f64],
) {
    predictor_into(model, input, ws);
    corrector_into(model, params, input, ws, out);
}

/// The explicit Euler-Maruyama predictor `Yp`.
pub fn predictor_step<M: SwitchingModel + ?Sized>(model: &M, input: &StepInput<'_>) -> Vec<f64> {
    let mut ws = StepWorkspace::for_model(model);
    predictor_into(model, input, &mut ws);
    ws.predictor
}

/// The corrector stage given the predictor computed from the same input.
pub fn corrector_step<M: SwitchingModel + ?Sized>(
    model: &M,
    params: &SchemeParams,
    input: &StepInput<'_>,
    predictor: &[f64],
) -> Vec<f64> {
    let mut ws = StepWorkspace::for_model(model);
    eval_diffusion(model, input.state, input.regime, &mut ws.g_state);
    ws.predictor.copy_from_slice(predictor);
    let mut out = vec![0.0; model.dim()];
    corrector_into(model, params, input, &mut ws, &mut out);
    out
}

/// Predictor followed by corrector.
pub fn pcem_step<M: SwitchingModel + ?Sized>(
    model: &M,
    params: &SchemeParams,
    input: &StepInput<'_>,
) -> Vec<f64> {
    let mut ws = StepWorkspace::for_model(model);
    let mut out = vec![0.0; model.dim()];
    pcem_step_into(model, params, input, &mut ws, &mut out);
    out
}

/// A scalar step split into the Euler-Maruyama value and four residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualDecomposition {
    /// `Y + f(Y) dt + g(Y) dW`.
    pub em_step: f64,
    /// `theta {f(Yp) - f(Y)} dt`, `-theta eta {gg'(Yp) - gg'(Y)} dt`,
    /// `-eta gg'(Y) dt`, `eta {g(Yp) - g(Y)} dW`.
    pub residuals: [f64; 4],
}

impl ResidualDecomposition {
    pub fn total(&self) -> f64 {
        self.em_step + self.residuals.iter().sum::<f64>()
    }
}

/// Splits a scalar PCEM step into its Euler-Maruyama part and residuals.
pub fn residual_decomposition<M: SwitchingModel + ?Sized>(
    model: &M,
    params: &SchemeParams,
    input: &StepInput<'_>,
) -> Result<ResidualDecomposition> {
    if model.dim() != 1 || model.n_drivers() != 1 {
        return Err(Error::DimensionUnsupported {
            dim: model.dim(),
            drivers: model.n_drivers(),
        });
    }
    let (theta, eta) = (params.theta(0), params.eta(0));
    let (y, r, dt, dw) = (input.state[0], input.regime, input.dt, input.dw[0]);
    let f = |x: f64| {
        let mut o = [0.0];
        model.drift(&[x], r, &mut o);
        o[0]
    };
    let g = |x: f64| {
        let mut o = [0.0];
        model.diffusion(&[x], r, 0, &mut o);
        o[0]
    };
    let ggp = |x: f64| g(x) * model.diffusion_derivative(&[x], r, 0, 0, 0);

    let em_step = y + f(y) * dt + g(y) * dw;
    let yp = em_step;
    Ok(ResidualDecomposition {
        em_step,
        residuals: [
            theta * (f(yp) - f(y)) * dt,
            -theta * eta * (ggp(yp) - ggp(y)) * dt,
            -eta * ggp(y) * dt,
            eta * (g(yp) - g(y)) * dw,
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{linear_model, stability_model};
    use proptest::prelude::*;

    /// `dx = x dt`, no noise.
    struct Growth;

    impl SwitchingModel for Growth {
        fn dim(&self) -> usize {
            1
        }
        fn n_drivers(&self) -> usize {
            1
        }
        fn n_regimes(&self) -> usize {
            1
        }
        fn drift(&self, x: &[f64], _: usize, out: &mut [f64]) {
            out[0] = x[0];
        }
        fn diffusion(&self, _: &[f64], _: usize, _: usize, out: &mut [f64]) {
            out[0] = 0.0;
        }
        fn diffusion_derivative(&self, _: &[f64], _: usize, _: usize, _: usize, _: usize) -> f64 {
            0.0
        }
    }

    /// Nonlinear scalar model with state-dependent noise, for identity checks.
    struct Nonlinear;

    impl SwitchingModel for Nonlinear {
        fn dim(&self) -> usize {
            1
        }
        fn n_drivers(&self) -> usize {
            1
        }
        fn n_regimes(&self) -> usize {
            2
        }
        fn drift(&self, x: &[f64], r: usize, out: &mut [f64]) {
            out[0] = if r == 0 {
                -x[0] + x[0].sin()
            } else {
                0.5 * x[0]
            };
        }
        fn diffusion(&self, x: &[f64], r: usize, _: usize, out: &mut [f64]) {
            out[0] = if r == 0 {
                0.3 * x[0].cos() + 0.2 * x[0]
            } else {
                0.4
            };
        }
        fn diffusion_derivative(&self, x: &[f64], r: usize, _: usize, _: usize, _: usize) -> f64 {
            if r == 0 {
                -0.3 * x[0].sin() + 0.2
            } else {
                0.0
            }
        }
    }

    fn input<'a>(state: &'a [f64], dt: f64, dw: &'a [f64]) -> StepInput<'a> {
        StepInput {
            state,
            regime: 0,
            dt,
            dw,
        }
    }

    #[test]
    fn presets_map_to_degrees() {
        let want = [
            ("EM", 0.0, 0.0),
            ("symmetric-PCEM", 0.5, 0.5),
            ("semi-drift-implicit-PCEM", 0.5, 0.0),
            ("drift-implicit-PCEM", 1.0, 0.0),
            ("semi-diffusion-implicit-PCEM", 0.0, 0.5),
            ("fully-implicit-PCEM", 1.0, 1.0),
        ];
        for (preset, (name, theta, eta)) in SchemePreset::ALL.iter().zip(want) {
            assert_eq!(preset.name(), name);
            assert_eq!(preset.degrees(), (theta, eta));
            assert_eq!(name.parse::<SchemePreset>().unwrap(), *preset);
        }
        assert!("Milstein".parse::<SchemePreset>().is_err());
    }

    #[test]
    fn params_validate_range() {
        assert!(SchemeParams::scalar(1.5, 0.0).is_err());
        assert!(SchemeParams::scalar(0.0, -0.1).is_err());
        assert!(SchemeParams::new(vec![0.0, 1.0], vec![0.0]).is_err());
        let p = SchemeParams::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert!(p.check_dim(2).is_ok());
        assert!(p.check_dim(3).is_err());
        assert!(SchemeParams::scalar(0.3, 0.4).unwrap().check_dim(5).is_ok());
    }

    #[test]
    fn corrected_drift_values() {
        let m = linear_model(vec![1.0, 2.0], vec![2.0, 1.0]).unwrap();
        assert_eq!(corrected_drift(&m, &[0.0], &[3.0], 0), vec![3.0]);
        assert_eq!(corrected_drift(&m, &[1.0], &[3.0], 0), vec![-9.0]);
        let s = stability_model(vec![0.5], vec![-1.0]).unwrap();
        let v = corrected_drift(&s, &[1.0], &[1.0], 0)[0];
        assert!((v - (-0.75)).abs() < 1e-15);
    }

    #[test]
    fn predictor_values() {
        let y = predictor_step(&Growth, &input(&[1.0], 0.01, &[0.3]));
        assert_eq!(y, vec![1.01]);
        let m = linear_model(vec![1.0], vec![2.0]).unwrap();
        let y = predictor_step(&m, &input(&[1.0], 0.1, &[0.05]));
        assert!((y[0] - 1.2).abs() < 1e-15);
        let y = predictor_step(&m, &input(&[1.7], 1e-3, &[0.0]));
        assert_eq!(y[0], 1.7 + 1.7 * 1e-3);
    }

    #[test]
    fn corrector_values() {
        let inp = input(&[1.0], 0.01, &[0.0]);
        let pred = predictor_step(&Growth, &inp);
        let params = SchemeParams::scalar(1.0, 0.0).unwrap();
        let y = corrector_step(&Growth, &params, &inp, &pred);
        assert!((y[0] - 1.0101).abs() < 1e-15);

        let m = linear_model(vec![0.15], vec![0.1]).unwrap();
        for preset in SchemePreset::ALL {
            let inp = input(&[3.0], 1e-300, &[0.0]);
            let y = pcem_step(&m, &preset.params(), &inp);
            assert!((y[0] - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_step_matches_hand_evaluation() {
        let m = linear_model(vec![0.15, 0.05], vec![0.1, 0.1]).unwrap();
        let (y, dt, dw) = (10.0, 0.01, 0.0734);
        for regime in 0..2 {
            let (a, b) = (m.a(regime), m.b(regime));
            let pred = y + a * y * dt + b * y * dw;
            let fbar = |x: f64| a * x - 0.5 * b * b * x;
            let want =
                y + (0.5 * fbar(pred) + 0.5 * fbar(y)) * dt + (0.5 * b * pred + 0.5 * b * y) * dw;
            let got = pcem_step(
                &m,
                &SchemePreset::Symmetric.params(),
                &StepInput {
                    state: &[y],
                    regime,
                    dt,
                    dw: &[dw],
                },
            )[0];
            assert!((got - want).abs() <= 1e-14 * want.abs());
        }
    }

    #[test]
    fn residuals_vanish_for_em() {
        let em = SchemePreset::EulerMaruyama.params();
        let d = residual_decomposition(&Nonlinear, &em, &input(&[0.7], 0.1, &[0.2])).unwrap();
        assert_eq!(d.residuals, [0.0; 4]);
    }

    #[test]
    fn residuals_for_pure_diffusion_correction() {
        let m = linear_model(vec![0.0], vec![0.5]).unwrap();
        let params = SchemeParams::scalar(0.0, 1.0).unwrap();
        let (y, dt) = (2.0, 0.1);
        let d = residual_decomposition(&m, &params, &input(&[y], dt, &[0.05])).unwrap();
        assert_eq!(d.residuals[0], 0.0);
        assert_eq!(d.residuals[1], 0.0);
        assert!((d.residuals[2] - (-(0.5 * y) * 0.5 * dt)).abs() < 1e-15);
        assert!(d.residuals[2] != 0.0);
    }

    #[test]
    fn residual_decomposition_rejects_vector_models() {
        struct Plane;
        impl SwitchingModel for Plane {
            fn dim(&self) -> usize {
                2
            }
            fn n_drivers(&self) -> usize {
                1
            }
            fn n_regimes(&self) -> usize {
                1
            }
            fn drift(&self, _: &[f64], _: usize, out: &mut [f64]) {
                out.fill(0.0);
            }
            fn diffusion(&self, _: &[f64], _: usize, _: usize, out: &mut [f64]) {
                out.fill(0.0);
            }
            fn diffusion_derivative(
                &self,
                _: &[f64],
                _: usize,
                _: usize,
                _: usize,
                _: usize,
            ) -> f64 {
                0.0
            }
        }
        let params = SchemeParams::scalar(0.5, 0.5).unwrap();
        let inp = StepInput {
            state: &[1.0, 1.0],
            regime: 0,
            dt: 0.1,
            dw: &[0.0],
        };
        assert!(matches!(
            residual_decomposition(&Plane, &params, &inp),
            Err(Error::DimensionUnsupported { dim: 2, .. })
        ));
    }

    #[test]
    fn deterministic_local_error_is_second_order() {
        for theta in [0.0, 1.0] {
            let params = SchemeParams::scalar(theta, 0.0).unwrap();
            let err = |dt: f64| {
                let y = pcem_step(&Growth, &params, &input(&[1.0], dt, &[0.0]))[0];
                (y - dt.exp()).abs()
            };
            let ratio = err(0.02) / err(0.01);
            assert!((ratio - 4.0).abs() < 0.4, "theta={theta}: ratio {ratio}");
        }
    }

    proptest! {
        #[test]
        fn em_preset_is_the_predictor(y in -50.0f64..50.0, dt in 1e-6f64..1.0,
                                      dw in -3.0f64..3.0, r in 0usize..2) {
            let inp = StepInput { state: &[y], regime: r, dt, dw: &[dw] };
            let em = SchemePreset::EulerMaruyama.params();
            prop_assert_eq!(pcem_step(&Nonlinear, &em, &inp), predictor_step(&Nonlinear, &inp));
        }

        #[test]
        fn eta_zero_leaves_drift_unchanged(x in -50.0f64..50.0, r in 0usize..2) {
            let mut f = [0.0];
            Nonlinear.drift(&[x], r, &mut f);
            prop_assert_eq!(corrected_drift(&Nonlinear, &[0.0], &[x], r)[0], f[0]);
        }

        #[test]
        fn linear_step_is_homogeneous(a in -3.0f64..3.0, b in -2.0f64..2.0, y in -10.0f64..10.0,
                                      c in prop::sample::select(vec![2.0, 0.5, -4.0, 0.25, 8.0]),
                                      dt in 1e-4f64..0.5, dw in -1.0f64..1.0,
                                      theta in 0.0f64..=1.0, eta in 0.0f64..=1.0) {
            let m = linear_model(vec![a], vec![b]).unwrap();
            let params = SchemeParams::scalar(theta, eta).unwrap();
            let base = pcem_step(&m, &params, &StepInput { state: &[y], regime: 0, dt, dw: &[dw] })[0];
            let scaled = pcem_step(&m, &params, &StepInput { state: &[c * y], regime: 0, dt, dw: &[dw] })[0];
            prop_assert_eq!(scaled, c * base);
        }
    }
}
