//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on failure.

use std::time::Instant;

use clap::Parser;
use pcem::analysis::{
    continuous_stability_boundary, fit_strong_order, scan_stability_region, state_p_stable,
    transfer_moment, Lattice, TransferPolynomial,
};
use pcem::cli::{error_cells, execute, Cli, Example, ExperimentConfig};
use pcem::ctmc::GeneratorMatrix;
use pcem::models::{exact_linear_moment, linear_model, StabilityTestModel, SwitchingModel};
use pcem::schemes::{pcem_step, residual_decomposition, SchemeParams, SchemePreset, StepInput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const TRANSITION_DECIMALS_TOL: f64 = 5e-6;
const RESIDUAL_REL_TOL: f64 = 1e-12;
const TRANSFER_TOL: f64 = 1e-12;
const SLOPE_RANGE: (f64, f64) = (0.8, 1.4);
const ORDERING_FACTOR: f64 = 2.0;
const CLOSED_FORM_TOL: f64 = 1e-10;
const BOUNDARY_OFFSET: f64 = 1e-3;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn transition_matrices() -> Outcome {
    let expected = [
        (2.0, [0.99999, 0.00001, 0.00002, 0.99998]),
        (1.5, [0.99999, 0.00001, 0.000015, 0.999985]),
        (0.5, [0.99999, 0.00001, 0.000005, 0.999995]),
    ];
    let mut worst = 0.0f64;
    for (q, want) in expected {
        let p = GeneratorMatrix::new(&[vec![-1.0, 1.0], vec![q, -q]])
            .and_then(|g| g.transition_matrix(1e-5))
            .expect("valid generator");
        let got = [p.prob(0, 0), p.prob(0, 1), p.prob(1, 0), p.prob(1, 1)];
        for (g, w) in got.iter().zip(want) {
            worst = worst.max((g - w).abs());
        }
    }
    outcome(
        worst < TRANSITION_DECIMALS_TOL,
        format!("max deviation {worst:.2e} (tolerance {TRANSITION_DECIMALS_TOL:.0e})"),
    )
}

// f = sin(x) - x / 2, g = 0.3 x + 0.2 cos(x)
struct Smooth;

impl SwitchingModel for Smooth {
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
        out[0] = x[0].sin() - 0.5 * x[0];
    }
    fn diffusion(&self, x: &[f64], _: usize, _: usize, out: &mut [f64]) {
        out[0] = 0.3 * x[0] + 0.2 * x[0].cos();
    }
    fn diffusion_derivative(&self, x: &[f64], _: usize, _: usize, _: usize, _: usize) -> f64 {
        0.3 - 0.2 * x[0].sin()
    }
}

fn scheme_identities() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(20);
    let em = SchemePreset::EulerMaruyama.params();
    let mut em_mismatch = 0;
    let mut worst_residual = 0.0f64;
    for _ in 0..10_000 {
        let a = rng.random_range(-3.0..3.0);
        let b = rng.random_range(-2.0..2.0);
        let y: f64 = rng.random_range(-100.0..100.0);
        let dt: f64 = rng.random_range(1e-4..0.5);
        let dw = rng.random_range(-2.0..2.0) * dt.sqrt();
        let model = linear_model(vec![a], vec![b]).unwrap();
        let input = StepInput {
            state: &[y],
            regime: 0,
            dt,
            dw: &[dw],
        };
        let step = pcem_step(&model, &em, &input)[0];
        let hand = y + a * y * dt + b * y * dw;
        if step.to_bits() != hand.to_bits() {
            em_mismatch += 1;
        }

        let params =
            SchemeParams::scalar(rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0)).unwrap();
        let x = rng.random_range(-5.0..5.0);
        let cases: [(&dyn SwitchingModel, f64); 2] = [(&model, y), (&Smooth, x)];
        for (m, state) in cases {
            let input = StepInput {
                state: &[state],
                regime: 0,
                dt,
                dw: &[dw],
            };
            let parts = residual_decomposition(m, &params, &input).unwrap();
            let step = pcem_step(m, &params, &input)[0];
            let scale = parts.em_step.abs() + parts.residuals.iter().map(|r| r.abs()).sum::<f64>();
            worst_residual =
                worst_residual.max((parts.total() - step).abs() / scale.max(f64::MIN_POSITIVE));
        }
    }

    let mut worst_transfer = 0.0f64;
    for _ in 0..1_000 {
        let z: f64 = rng.random_range(-4.0..4.0);
        let alpha = rng.random_range(0.0..0.99);
        let lambda_dt = rng.random_range(-3.0..-1e-3);
        let (theta, eta) = (rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0));
        let dt: f64 = rng.random_range(1e-3..1.0);
        let model = pcem::models::stability_model(vec![alpha], vec![lambda_dt / dt]).unwrap();
        let params = SchemeParams::scalar(theta, eta).unwrap();
        let input = StepInput {
            state: &[1.0],
            regime: 0,
            dt,
            dw: &[dt.sqrt() * z],
        };
        let ratio = pcem_step(&model, &params, &input)[0];
        let g = TransferPolynomial::new(theta, eta, lambda_dt, alpha).eval(z);
        worst_transfer = worst_transfer.max((ratio - g).abs() / g.abs().max(1.0));
    }
    outcome(
        em_mismatch == 0 && worst_residual <= RESIDUAL_REL_TOL && worst_transfer <= TRANSFER_TOL,
        format!(
            "EM bitwise mismatches {em_mismatch}/10000, residual identity {worst_residual:.1e}, transfer {worst_transfer:.1e}"
        ),
    )
}

fn desk_run() -> (Vec<String>, Vec<f64>, Vec<Vec<f64>>) {
    let config = ExperimentConfig::builtin(Example::Ex2);
    let run = config.run.as_ref().expect("ex2 has a run section");
    assert_eq!(run.horizon, 10.0);
    assert_eq!(run.deltas, vec![0.1, 0.02, 0.004, 0.0008]);
    assert_eq!(run.replications, 200);
    let cells = error_cells(run, &run.schemes, config.seed).expect("desk run succeeds");
    let means = cells
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| c.as_ref().map(|s| s.mean_sup_sq).unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    (
        run.schemes.iter().map(|s| s.label.clone()).collect(),
        run.deltas.clone(),
        means,
    )
}

fn strong_order(deltas: &[f64], means: &[Vec<f64>], names: &[String]) -> Outcome {
    let em = names.iter().position(|n| n == "EM").unwrap();
    let col: Vec<f64> = means.iter().map(|row| row[em]).collect();
    match fit_strong_order(deltas, &col) {
        Ok(fit) => outcome(
            fit.slope >= SLOPE_RANGE.0 && fit.slope <= SLOPE_RANGE.1,
            format!(
                "EM slope {:.4} (accepted [{}, {}]), r^2 {:.4}",
                fit.slope, SLOPE_RANGE.0, SLOPE_RANGE.1, fit.r_squared
            ),
        ),
        Err(e) => outcome(false, format!("fit failed: {e}")),
    }
}

fn table_orderings(deltas: &[f64], means: &[Vec<f64>], names: &[String]) -> Outcome {
    let idx = |n: &str| names.iter().position(|x| x == n).unwrap();
    let (em, sym, sdi) = (
        idx("EM"),
        idx("symmetric-PCEM"),
        idx("semi-diffusion-implicit-PCEM"),
    );
    let mut pass = true;
    let mut min_sdi_em = f64::INFINITY;
    let mut min_sym_sdi = f64::INFINITY;
    for row in means {
        let r1 = row[sdi] / row[sym];
        let r2 = row[em] / row[sdi];
        min_sym_sdi = min_sym_sdi.min(r1);
        min_sdi_em = min_sdi_em.min(r2);
        pass &= r1 >= ORDERING_FACTOR && r2 >= ORDERING_FACTOR;
    }
    let mut monotone = true;
    for s in 0..names.len() {
        for w in means.windows(2) {
            monotone &= w[1][s] < w[0][s];
        }
    }
    outcome(
        pass && monotone && deltas.len() == means.len(),
        format!(
            "min semi-diffusion/symmetric {min_sym_sdi:.1}x, min EM/semi-diffusion {min_sdi_em:.2}x (need {ORDERING_FACTOR}x), all presets decrease with delta: {monotone}"
        ),
    )
}

// Not a gate: how often the 2x separation holds for other master seeds.
fn ordering_seed_sweep() -> String {
    let config = ExperimentConfig::builtin(Example::Ex2);
    let run = config.run.as_ref().unwrap();
    let names: Vec<String> = run.schemes.iter().map(|s| s.label.clone()).collect();
    let mut held = 0;
    let mut worst = f64::INFINITY;
    for seed in 1..=10 {
        let cells = error_cells(run, &run.schemes, seed).unwrap();
        let means: Vec<Vec<f64>> = cells
            .iter()
            .map(|row| {
                row.iter()
                    .map(|c| c.as_ref().map(|s| s.mean_sup_sq).unwrap_or(f64::NAN))
                    .collect()
            })
            .collect();
        let o = table_orderings(&run.deltas, &means, &names);
        held += usize::from(o.pass);
        let em = names.iter().position(|n| n == "EM").unwrap();
        let sdi = names
            .iter()
            .position(|n| n == "semi-diffusion-implicit-PCEM")
            .unwrap();
        worst = worst.min(
            means
                .iter()
                .map(|r| r[em] / r[sdi])
                .fold(f64::INFINITY, f64::min),
        );
    }
    format!("seeds 1..=10 meet criterion 4 in {held}/10 runs, smallest EM/semi-diffusion ratio {worst:.2}x")
}

fn closed_form_stability() -> Outcome {
    let lattice = Lattice::uniform((-3.0, -0.01), 30, (0.0, 0.97), 30).unwrap();
    let mut worst = 0.0f64;
    for preset in SchemePreset::ALL {
        let params = preset.params();
        for (l, a) in lattice.nodes() {
            let g = TransferPolynomial::for_scheme(&params, l, a);
            let hand = g.c0 * g.c0 + g.c1 * g.c1 + 3.0 * g.c2 * g.c2 + 2.0 * g.c0 * g.c2;
            let m = transfer_moment(&params, l, a, 2.0).unwrap();
            worst = worst.max((m - hand).abs());
        }
    }
    let em = scan_stability_region(&SchemePreset::EulerMaruyama.params(), 2.0, &lattice).unwrap();
    let column_ok = lattice
        .lambda_dt()
        .iter()
        .enumerate()
        .all(|(i, &l)| em.stable(i, 0) == (l > -2.0 && l < 0.0));
    outcome(
        worst <= CLOSED_FORM_TOL && column_ok,
        format!("max |quadrature - closed form| {worst:.1e} over 6 x 900 nodes, EM alpha=0 column exact: {column_ok}"),
    )
}

fn state_region_equivalence() -> Outcome {
    let lattice = Lattice::uniform((-3.0, -0.01), 30, (0.0, 0.97), 30).unwrap();
    let mut mismatches = 0;
    let mut checked = 0;
    for preset in SchemePreset::ALL {
        let params = preset.params();
        let region = scan_stability_region(&params, 2.0, &lattice).unwrap();
        let nodes: Vec<(f64, f64)> = lattice.nodes().collect();
        // identical copies of every node
        for (n, &(l, a)) in nodes.iter().enumerate() {
            let model = StabilityTestModel::new(vec![a, a], vec![l, l]).unwrap();
            let v = state_p_stable(&model, &params, 1.0, 2.0).unwrap();
            checked += 1;
            mismatches += usize::from(v.overall != region.points[n].stable);
        }
        // every pair on a 10 x 10 sub-lattice
        let sub: Vec<usize> = (0..30)
            .step_by(3)
            .flat_map(|i| (0..30).step_by(3).map(move |j| i * 30 + j))
            .collect();
        for &n1 in &sub {
            for &n2 in &sub {
                let (l1, a1) = nodes[n1];
                let (l2, a2) = nodes[n2];
                let model = StabilityTestModel::new(vec![a1, a2], vec![l1, l2]).unwrap();
                let v = state_p_stable(&model, &params, 1.0, 2.0).unwrap();
                checked += 1;
                let want = region.points[n1].stable && region.points[n2].stable;
                mismatches += usize::from(v.overall != want);
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("{mismatches} mismatches over {checked} two-regime models"),
    )
}

fn continuous_boundary() -> Outcome {
    let mut pass = true;
    for p in [0.5, 1.0, 2.0, 4.0] {
        let boundary = continuous_stability_boundary(p);
        pass &= boundary == 1.0 / (1.0 + p / 2.0);
        // exponent sign of the lognormal moment at lambda = -1, t = 1
        let below = exact_linear_moment(boundary - BOUNDARY_OFFSET, -1.0, p, 1.0, 1.0).ln();
        let above = exact_linear_moment(boundary + BOUNDARY_OFFSET, -1.0, p, 1.0, 1.0).ln();
        pass &= below < 0.0 && above > 0.0;
    }
    outcome(pass, "p in {0.5, 1, 2, 4}, boundary +- 1e-3")
}

fn run_compare(threads: Option<usize>, out: &std::path::Path, config: &std::path::Path) -> Vec<u8> {
    let mut args = vec![
        "pcem".to_string(),
        "compare".into(),
        "--config".into(),
        config.display().to_string(),
        "--no-header".into(),
        "--out".into(),
        out.display().to_string(),
    ];
    if let Some(n) = threads {
        args.push("--threads".into());
        args.push(n.to_string());
    }
    let cli = Cli::try_parse_from(args).unwrap();
    let mut buffer = Vec::new();
    execute(&cli, &mut buffer).unwrap();
    let mut files = std::fs::read(out.join("compare.csv")).unwrap();
    files.extend(std::fs::read(out.join("compare_wide.csv")).unwrap());
    buffer.extend(files);
    buffer
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("ex2.toml");
    std::fs::write(&config, Example::Ex2.config_text()).unwrap();
    let runs: Vec<Vec<u8>> = [None, Some(1), Some(3), None]
        .iter()
        .enumerate()
        .map(|(i, &t)| run_compare(t, &dir.path().join(format!("run{i}")), &config))
        .collect();
    let same = runs.windows(2).all(|w| w[0] == w[1]);
    outcome(
        same,
        format!(
            "4 runs (default, 1, 3, default threads), {} bytes each, identical: {same}",
            runs[0].len()
        ),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut timed = |n: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        results.push((n, name, o, start.elapsed().as_secs_f64()));
    };
    timed(1, "transition matrices", &mut transition_matrices);
    timed(2, "scheme identities", &mut scheme_identities);
    let start = Instant::now();
    let (names, deltas, means) = desk_run();
    let desk_secs = start.elapsed().as_secs_f64();
    timed(3, "strong order", &mut || {
        strong_order(&deltas, &means, &names)
    });
    timed(4, "error table orderings", &mut || {
        table_orderings(&deltas, &means, &names)
    });
    timed(5, "p-stability closed form", &mut closed_form_stability);
    timed(
        6,
        "state-wise region equals scalar region",
        &mut state_region_equivalence,
    );
    timed(7, "continuous stability boundary", &mut continuous_boundary);
    timed(8, "compare determinism", &mut determinism);

    println!("desk run (6 presets, 4 steps, 200 replications): {desk_secs:.2}s");
    for (s, name) in names.iter().enumerate() {
        let row: Vec<String> = means.iter().map(|r| format!("{:.4e}", r[s])).collect();
        println!("  {name:<30} {}", row.join(" "));
    }
    println!("info: {}", ordering_seed_sweep());
    let mut failed = 0;
    for (n, name, o, secs) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n} {tag} {name}: {} [{secs:.2}s]", o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
