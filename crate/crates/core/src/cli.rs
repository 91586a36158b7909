//! Command-line driver: experiment configs, subcommands and CSV output.
//!
//! Config files are TOML:
//!
//! ```toml
//! [model]
//! family = "linear"          # or "stability-test" with alpha = [...], lambda = [...]
//! a = [0.15, 0.05]
//! b = [0.1, 0.1]
//!
//! [chain]
//! generator = [[-0.5, 0.5], [0.5, -0.5]]
//!
//! [initial]
//! y0 = 10.0
//! r0 = 1                     # regimes are numbered from 1
//!
//! [run]
//! horizon = 10.0
//! deltas = [0.1, 0.02, 0.004, 0.0008]
//! schemes = ["EM", "symmetric-PCEM", { theta = 0.3, eta = 0.7 }]
//! replications = 200
//! seed = 2024
//! out_dir = "out"
//!
//! [stability]
//! p = 2.0
//! lambda_dt = { min = -3.0, max = -0.01, n = 30 }
//! alpha = { min = 0.0, max = 0.97, n = 30 }
//! dt = 0.5                   # per-regime verdicts for a stability-test model
//! ```
//!
//! Exit codes: 0 success, 2 usage or config error, 3 numeric failure,
//! 4 resource guard.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::analysis::{
    compare_schemes, fit_strong_order, scan_stability_region, state_p_stable, sup_squared_error,
    ConvergenceFit, ErrorStats, Lattice,
};
use crate::ctmc::GeneratorMatrix;
use crate::error::Error;
use crate::models::{LinearSwitchingModel, StabilityTestModel};
use crate::schemes::{Scheme, SchemeParams, SchemePreset};
use crate::simulate::{build_grid, dump_coupled, simulate_coupled, LinearSystem, ReplicationSeeds};

/// Step evaluations (replications x steps x schemes) allowed without `--allow-long`.
pub const WORK_BUDGET: f64 = 2e9;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUT_DIR: &str = "pcem-out";

#[derive(Debug, Parser)]
#[command(
    name = "pcem",
    version,
    about = "Predictor-corrector Euler-Maruyama experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Experiment config (TOML)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed, overrides run.seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory, overrides run.out_dir
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Preset name or `custom` (with --theta/--eta); replaces the config scheme list
    #[arg(long, global = true)]
    pub scheme: Option<String>,

    /// Drift implicitness per component, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    pub theta: Option<Vec<f64>>,

    /// Diffusion implicitness per component, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    pub eta: Option<Vec<f64>>,

    /// Permit runs above the work budget and full-size reproductions
    #[arg(long, global = true)]
    pub allow_long: bool,

    /// Also write coupled-path dumps of replication 0
    #[arg(long, global = true)]
    pub dump_paths: bool,

    /// Omit the `# pcem ...` header line
    #[arg(long, global = true)]
    pub no_header: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One coupled numeric/reference path
    Simulate {
        /// Step size (default: first entry of run.deltas)
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Error table over schemes and step sizes
    Compare,
    /// Error table plus log-log order fit per scheme
    Convergence,
    /// p-stability regions on a (lambda dt, alpha) lattice
    Stability {
        /// Moment order, overrides stability.p
        #[arg(long)]
        p: Option<f64>,
    },
    /// Run one of the bundled example configurations
    Reproduce {
        #[arg(value_enum)]
        example: Example,
        #[arg(long, value_enum, default_value_t = Scale::Desk)]
        scale: Scale,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Example {
    #[value(name = "ex1-case1")]
    Ex1Case1,
    #[value(name = "ex1-case2")]
    Ex1Case2,
    #[value(name = "ex1-case3")]
    Ex1Case3,
    #[value(name = "ex2")]
    Ex2,
}

impl Example {
    pub fn name(self) -> &'static str {
        match self {
            Example::Ex1Case1 => "ex1-case1",
            Example::Ex1Case2 => "ex1-case2",
            Example::Ex1Case3 => "ex1-case3",
            Example::Ex2 => "ex2",
        }
    }

    /// The bundled desk-scale config.
    pub fn config_text(self) -> &'static str {
        match self {
            Example::Ex1Case1 => include_str!("../configs/ex1-case1.toml"),
            Example::Ex1Case2 => include_str!("../configs/ex1-case2.toml"),
            Example::Ex1Case3 => include_str!("../configs/ex1-case3.toml"),
            Example::Ex2 => include_str!("../configs/ex2.toml"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    Desk,
    Paper,
}

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    ResourceGuard(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::ResourceGuard(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NonConvergent(_)
            | Error::AllOverflowed { .. }
            | Error::OverflowPresent { .. }
            | Error::DegenerateFit(_)
            | Error::QuadratureNonConvergent { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Option<RawModel>,
    chain: Option<RawChain>,
    initial: Option<RawInitial>,
    run: Option<RawRun>,
    stability: Option<RawStability>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "family")]
enum RawModel {
    #[serde(rename = "linear")]
    Linear { a: Vec<f64>, b: Vec<f64> },
    #[serde(rename = "stability-test")]
    StabilityTest { alpha: Vec<f64>, lambda: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChain {
    generator: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    y0: f64,
    r0: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    horizon: f64,
    deltas: Vec<f64>,
    schemes: Option<Vec<RawScheme>>,
    replications: usize,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawScheme {
    Name(String),
    Custom { theta: OneOrMany, eta: OneOrMany },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStability {
    p: Option<f64>,
    lambda_dt: Option<RawAxis>,
    alpha: Option<RawAxis>,
    dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAxis {
    min: f64,
    max: f64,
    n: usize,
}

/// Model family named in a config.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Linear(LinearSwitchingModel),
    StabilityTest(StabilityTestModel),
}

impl ModelSpec {
    pub fn to_linear(&self) -> LinearSwitchingModel {
        match self {
            ModelSpec::Linear(m) => m.clone(),
            ModelSpec::StabilityTest(m) => m.to_linear(),
        }
    }
}

/// Settings of the Monte Carlo commands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub system: LinearSystem,
    pub horizon: f64,
    pub deltas: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub replications: usize,
}

/// Settings of the stability command.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySettings {
    pub p: f64,
    pub lattice: Lattice,
    pub dt: Option<f64>,
}

impl Default for StabilitySettings {
    fn default() -> Self {
        Self {
            p: 2.0,
            lattice: Lattice::uniform((-3.0, -0.01), 30, (0.0, 0.97), 30)
                .expect("default lattice is valid"),
            dt: None,
        }
    }
}

/// A validated experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: Option<ModelSpec>,
    pub run: Option<RunSettings>,
    pub schemes: Option<Vec<Scheme>>,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub stability: StabilitySettings,
}

fn field_err(origin: &str, field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{origin}: {field}: {msg}"))
}

fn parse_scheme(raw: RawScheme) -> crate::Result<Scheme> {
    match raw {
        RawScheme::Name(name) => Ok(resolve_preset(&name)?.into()),
        RawScheme::Custom { theta, eta } => Ok(Scheme::custom(SchemeParams::new(
            theta.into_vec(),
            eta.into_vec(),
        )?)),
    }
}

/// Accepts the preset names and the short form `EM`.
pub fn resolve_preset(name: &str) -> crate::Result<SchemePreset> {
    if name == "EM" {
        return Ok(SchemePreset::EulerMaruyama);
    }
    name.parse()
}

impl ExperimentConfig {
    /// Parses and validates TOML text; `origin` prefixes error messages.
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, CliError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;

        let model = match raw.model {
            None => None,
            Some(RawModel::Linear { a, b }) => Some(ModelSpec::Linear(
                LinearSwitchingModel::new(a, b).map_err(|e| field_err(origin, "model", e))?,
            )),
            Some(RawModel::StabilityTest { alpha, lambda }) => Some(ModelSpec::StabilityTest(
                StabilityTestModel::new(alpha, lambda)
                    .map_err(|e| field_err(origin, "model", e))?,
            )),
        };

        let mut seed = DEFAULT_SEED;
        let mut out_dir = None;
        let mut scheme_list = None;
        let run = match raw.run {
            None => None,
            Some(run) => {
                seed = run.seed.unwrap_or(DEFAULT_SEED);
                out_dir = run.out_dir.clone();
                let schemes = match run.schemes {
                    None => SchemePreset::ALL.iter().map(|&p| p.into()).collect(),
                    Some(list) => {
                        if list.is_empty() {
                            return Err(field_err(origin, "run.schemes", "must not be empty"));
                        }
                        list.into_iter()
                            .enumerate()
                            .map(|(i, s)| {
                                parse_scheme(s)
                                    .map_err(|e| field_err(origin, &format!("run.schemes[{i}]"), e))
                            })
                            .collect::<Result<Vec<_>, _>>()?
                    }
                };
                scheme_list = Some(schemes.clone());
                let model = model.as_ref().ok_or_else(|| {
                    field_err(origin, "model", "section [model] is required with [run]")
                })?;
                let chain = raw.chain.ok_or_else(|| {
                    field_err(origin, "chain", "section [chain] is required with [run]")
                })?;
                let initial = raw.initial.ok_or_else(|| {
                    field_err(
                        origin,
                        "initial",
                        "section [initial] is required with [run]",
                    )
                })?;
                let generator = GeneratorMatrix::new(&chain.generator)
                    .map_err(|e| field_err(origin, "chain.generator", e))?;
                if initial.r0 == 0 || initial.r0 > generator.n_states() {
                    return Err(field_err(
                        origin,
                        "initial.r0",
                        format!(
                            "regime {} is outside 1..={}",
                            initial.r0,
                            generator.n_states()
                        ),
                    ));
                }
                let system =
                    LinearSystem::new(model.to_linear(), generator, initial.y0, initial.r0 - 1)
                        .map_err(|e| field_err(origin, "model", e))?;
                if !(run.horizon > 0.0 && run.horizon.is_finite()) {
                    return Err(field_err(
                        origin,
                        "run.horizon",
                        "must be positive and finite",
                    ));
                }
                if run.deltas.is_empty() {
                    return Err(field_err(origin, "run.deltas", "must not be empty"));
                }
                for (i, &d) in run.deltas.iter().enumerate() {
                    let field = format!("run.deltas[{i}]");
                    if !(d > 0.0 && d.is_finite()) {
                        return Err(field_err(origin, &field, format!("{d} must be positive")));
                    }
                    if d > run.horizon {
                        return Err(field_err(
                            origin,
                            &field,
                            format!("{d} exceeds the horizon"),
                        ));
                    }
                    if run.deltas[..i].contains(&d) {
                        return Err(field_err(origin, &field, format!("{d} is repeated")));
                    }
                }
                if run.replications < 2 {
                    return Err(field_err(origin, "run.replications", "must be at least 2"));
                }
                Some(RunSettings {
                    system,
                    horizon: run.horizon,
                    deltas: run.deltas,
                    schemes,
                    replications: run.replications,
                })
            }
        };

        let mut stability = StabilitySettings::default();
        if let Some(st) = raw.stability {
            if let Some(p) = st.p {
                if !(p > 0.0 && p.is_finite()) {
                    return Err(field_err(origin, "stability.p", "must be positive"));
                }
                stability.p = p;
            }
            let l = st.lambda_dt.unwrap_or(RawAxis {
                min: -3.0,
                max: -0.01,
                n: 30,
            });
            let a = st.alpha.unwrap_or(RawAxis {
                min: 0.0,
                max: 0.97,
                n: 30,
            });
            stability.lattice = Lattice::uniform((l.min, l.max), l.n, (a.min, a.max), a.n)
                .map_err(|e| field_err(origin, "stability", e))?;
            if let Some(dt) = st.dt {
                if !(dt > 0.0 && dt.is_finite()) {
                    return Err(field_err(origin, "stability.dt", "must be positive"));
                }
                stability.dt = Some(dt);
            }
        }

        Ok(Self {
            model,
            run,
            schemes: scheme_list,
            seed,
            out_dir,
            stability,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn builtin(example: Example) -> Self {
        Self::from_toml_str(example.config_text(), example.name())
            .expect("bundled configs are valid")
    }

    /// Switches a bundled example to its full problem size.
    pub fn full_scale(mut self, example: Example) -> Self {
        if let Some(run) = self.run.as_mut() {
            run.replications = 1000;
            match example {
                Example::Ex2 => {
                    run.horizon = 10.0;
                    run.deltas = vec![0.1, 0.01, 0.001, 0.0001, 0.00001];
                }
                _ => {
                    run.horizon = 50.0;
                    run.deltas = vec![0.00001];
                }
            }
        }
        self
    }

    fn run_settings(&self) -> Result<&RunSettings, CliError> {
        self.run
            .as_ref()
            .ok_or_else(|| CliError::Config("config has no [run] section".into()))
    }
}

/// Formats a number so that parsing the text gives back the same value.
pub fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

fn join_nums(values: &[f64]) -> String {
    values
        .iter()
        .map(|&v| fmt_num(v))
        .collect::<Vec<_>>()
        .join(";")
}

fn csv_text(rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 input")
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

struct Output<'a> {
    dir: PathBuf,
    header: Option<String>,
    stdout: &'a mut dyn Write,
}

impl Output<'_> {
    fn with_header(&self, body: &str) -> String {
        match &self.header {
            Some(h) => format!("{h}\n{body}"),
            None => body.to_string(),
        }
    }

    fn file(&self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(&self.dir).map_err(|e| io_error(&self.dir, e))?;
        let path = self.dir.join(name);
        std::fs::write(&path, self.with_header(body)).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    fn print(&mut self, body: &str) -> Result<(), CliError> {
        let text = self.with_header(body);
        self.stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Config(format!("stdout: {e}")))
    }

    fn print_raw(&mut self, text: &str) -> Result<(), CliError> {
        self.stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Config(format!("stdout: {e}")))
    }
}

/// Column names of the error table.
pub const ERROR_TABLE_COLUMNS: [&str; 8] = [
    "scheme",
    "theta",
    "eta",
    "delta",
    "n_reps",
    "mean_sup_sq",
    "std_error",
    "overflow_count",
];

/// Error table rows; scheme-major, step sizes in ladder order.
pub fn error_table(
    schemes: &[Scheme],
    deltas: &[f64],
    replications: usize,
    cells: &[Vec<crate::Result<ErrorStats>>],
) -> String {
    let mut rows = vec![ERROR_TABLE_COLUMNS.iter().map(|s| s.to_string()).collect()];
    for (s, scheme) in schemes.iter().enumerate() {
        for (i, &delta) in deltas.iter().enumerate() {
            let (mean, se, overflow) = match &cells[i][s] {
                Ok(st) => (st.mean_sup_sq, st.std_error, st.overflow_count),
                Err(_) => (f64::NAN, f64::NAN, replications),
            };
            rows.push(vec![
                scheme.label.clone(),
                join_nums(scheme.params.thetas()),
                join_nums(scheme.params.etas()),
                fmt_num(delta),
                replications.to_string(),
                fmt_num(mean),
                fmt_num(se),
                overflow.to_string(),
            ]);
        }
    }
    csv_text(&rows)
}

/// Means laid out with one row per step size and one column per scheme.
pub fn wide_table(
    schemes: &[Scheme],
    deltas: &[f64],
    cells: &[Vec<crate::Result<ErrorStats>>],
) -> String {
    let mut header = vec!["delta".to_string()];
    header.extend(schemes.iter().map(|s| s.label.clone()));
    let mut rows = vec![header];
    for (i, &delta) in deltas.iter().enumerate() {
        let mut row = vec![fmt_num(delta)];
        row.extend(
            cells[i]
                .iter()
                .map(|c| fmt_num(c.as_ref().map(|st| st.mean_sup_sq).unwrap_or(f64::NAN))),
        );
        rows.push(row);
    }
    csv_text(&rows)
}

fn fit_table(schemes: &[Scheme], fits: &[crate::Result<ConvergenceFit>]) -> String {
    let mut rows = vec![[
        "scheme",
        "theta",
        "eta",
        "slope",
        "intercept",
        "r_squared",
        "n_points",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect::<Vec<_>>()];
    for (scheme, fit) in schemes.iter().zip(fits) {
        let (slope, intercept, r2, n) = match fit {
            Ok(f) => (f.slope, f.intercept, f.r_squared, f.n_points),
            Err(_) => (f64::NAN, f64::NAN, f64::NAN, 0),
        };
        rows.push(vec![
            scheme.label.clone(),
            join_nums(scheme.params.thetas()),
            join_nums(scheme.params.etas()),
            fmt_num(slope),
            fmt_num(intercept),
            fmt_num(r2),
            n.to_string(),
        ]);
    }
    csv_text(&rows)
}

fn scheme_override(cli: &Cli) -> Result<Option<Scheme>, CliError> {
    let custom = |cli: &Cli| -> Result<Scheme, CliError> {
        match (&cli.theta, &cli.eta) {
            (Some(t), Some(e)) => Ok(Scheme::custom(
                SchemeParams::new(t.clone(), e.clone())
                    .map_err(|e| field_err("flags", "--theta/--eta", e))?,
            )),
            _ => Err(CliError::Config(
                "flags: a custom scheme needs both --theta and --eta".into(),
            )),
        }
    };
    match cli.scheme.as_deref() {
        Some("custom") => custom(cli).map(Some),
        Some(name) => {
            if cli.theta.is_some() || cli.eta.is_some() {
                return Err(CliError::Config(
                    "flags: --theta/--eta only apply with --scheme custom".into(),
                ));
            }
            Ok(Some(
                resolve_preset(name)
                    .map_err(|e| field_err("flags", "--scheme", e))?
                    .into(),
            ))
        }
        None if cli.theta.is_some() || cli.eta.is_some() => custom(cli).map(Some),
        None => Ok(None),
    }
}

fn header_line(cli: &Cli, command: &str, seed: u64) -> Option<String> {
    if cli.no_header {
        return None;
    }
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Some(format!(
        "# pcem {command} version={} seed={seed} unix_time={now}",
        env!("CARGO_PKG_VERSION")
    ))
}

fn check_budget(cli: &Cli, run: &RunSettings, n_schemes: usize) -> Result<(), CliError> {
    let steps: f64 = run.deltas.iter().map(|d| (run.horizon / d).ceil()).sum();
    let work = steps * run.replications as f64 * n_schemes as f64;
    if work > WORK_BUDGET && !cli.allow_long {
        return Err(CliError::ResourceGuard(format!(
            "about {work:.2e} scheme steps exceed the budget of {WORK_BUDGET:.0e}; pass --allow-long to run anyway"
        )));
    }
    Ok(())
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    match &cli.config {
        Some(path) => ExperimentConfig::load(path),
        None => Err(CliError::Config(
            "--config <file> is required for this command".into(),
        )),
    }
}

fn make_output<'a>(
    cli: &Cli,
    config: &ExperimentConfig,
    command: &str,
    seed: u64,
    stdout: &'a mut dyn Write,
) -> Output<'a> {
    let dir = cli
        .out
        .clone()
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    Output {
        dir,
        header: header_line(cli, command, seed),
        stdout,
    }
}

fn cmd_simulate(cli: &Cli, delta: Option<f64>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let config = load_config(cli)?;
    let run = config.run_settings()?;
    let seed = cli.seed.unwrap_or(config.seed);
    let scheme = match scheme_override(cli)? {
        Some(s) => s,
        None => run.schemes[0].clone(),
    };
    let delta = delta.unwrap_or(run.deltas[0]);
    let grid = build_grid(run.horizon, delta).map_err(|e| field_err("flags", "--delta", e))?;
    if grid.n_steps() as f64 > WORK_BUDGET / 100.0 && !cli.allow_long {
        return Err(CliError::ResourceGuard(format!(
            "{} steps in one stored path; pass --allow-long to run anyway",
            grid.n_steps()
        )));
    }
    let paths = simulate_coupled(
        &run.system,
        &scheme.params,
        &grid,
        ReplicationSeeds::new(seed, 0),
    )?;
    let (sup, overflow) = match sup_squared_error(&paths.numeric, &paths.reference) {
        Ok(v) => (v, false),
        Err(Error::OverflowPresent { partial }) => (partial, true),
        Err(e) => return Err(e.into()),
    };
    let mut out = make_output(cli, &config, "simulate", seed, stdout);
    let name = format!("path_{}_{}.tsv", file_stem(&scheme.label), fmt_num(delta));
    let path = out.file(&name, &dump_coupled(&paths))?;
    let mut line = String::new();
    write!(
        line,
        "scheme={} delta={} steps={} sup_sq_error={} overflow={}",
        scheme.label,
        fmt_num(delta),
        grid.n_steps(),
        fmt_num(sup),
        overflow
    )
    .unwrap();
    if let Some(k) = paths.numeric.overflow().or(paths.reference.overflow()) {
        write!(line, " overflow_index={k}").unwrap();
    }
    writeln!(line, " dump={}", path.display()).unwrap();
    out.print_raw(&line)
}

/// Runs the error table: `cells[i][s]` for step `deltas[i]` and scheme `s`.
pub fn error_cells(
    run: &RunSettings,
    schemes: &[Scheme],
    seed: u64,
) -> Result<Vec<Vec<crate::Result<ErrorStats>>>, CliError> {
    let params: Vec<SchemeParams> = schemes.iter().map(|s| s.params.clone()).collect();
    run.deltas
        .iter()
        .map(|&dt| {
            let grid = build_grid(run.horizon, dt)?;
            compare_schemes(&run.system, &params, &grid, run.replications, seed)
        })
        .collect::<crate::Result<Vec<_>>>()
        .map_err(CliError::from)
}

fn fits_for(
    deltas: &[f64],
    cells: &[Vec<crate::Result<ErrorStats>>],
    n_schemes: usize,
) -> Vec<crate::Result<ConvergenceFit>> {
    (0..n_schemes)
        .map(|s| {
            let (ds, ms): (Vec<f64>, Vec<f64>) = deltas
                .iter()
                .zip(cells)
                .filter_map(|(&d, row)| row[s].as_ref().ok().map(|st| (d, st.mean_sup_sq)))
                .unzip();
            fit_strong_order(&ds, &ms)
        })
        .collect()
}

fn all_overflow_error(
    schemes: &[Scheme],
    deltas: &[f64],
    cells: &[Vec<crate::Result<ErrorStats>>],
) -> Option<CliError> {
    let bad: Vec<String> = cells
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter().enumerate().filter_map(move |(s, c)| {
                c.as_ref()
                    .err()
                    .map(|_| format!("{} at delta={}", schemes[s].label, fmt_num(deltas[i])))
            })
        })
        .collect();
    (!bad.is_empty()).then(|| {
        CliError::Numeric(format!(
            "every replication overflowed for {}",
            bad.join(", ")
        ))
    })
}

fn write_error_outputs(
    cli: &Cli,
    out: &mut Output<'_>,
    run: &RunSettings,
    schemes: &[Scheme],
    seed: u64,
    cells: &[Vec<crate::Result<ErrorStats>>],
    prefix: &str,
) -> Result<(), CliError> {
    let table = error_table(schemes, &run.deltas, run.replications, cells);
    out.file(&format!("{prefix}.csv"), &table)?;
    out.file(
        &format!("{prefix}_wide.csv"),
        &wide_table(schemes, &run.deltas, cells),
    )?;
    if cli.dump_paths {
        for scheme in schemes {
            for &dt in &run.deltas {
                let grid = build_grid(run.horizon, dt)?;
                let paths = simulate_coupled(
                    &run.system,
                    &scheme.params,
                    &grid,
                    ReplicationSeeds::new(seed, 0),
                )?;
                let name = format!("path_{}_{}.tsv", file_stem(&scheme.label), fmt_num(dt));
                out.file(&name, &dump_coupled(&paths))?;
            }
        }
    }
    out.print(&table)
}

fn cmd_compare(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let config = load_config(cli)?;
    run_compare(cli, &config, "compare", stdout, false)
}

fn run_compare(
    cli: &Cli,
    config: &ExperimentConfig,
    command: &str,
    stdout: &mut dyn Write,
    with_fits: bool,
) -> Result<(), CliError> {
    let run = config.run_settings()?;
    let seed = cli.seed.unwrap_or(config.seed);
    let schemes = match scheme_override(cli)? {
        Some(s) => vec![s],
        None => run.schemes.clone(),
    };
    check_budget(cli, run, schemes.len())?;
    let cells = error_cells(run, &schemes, seed)?;
    let mut out = make_output(cli, config, command, seed, stdout);
    write_error_outputs(cli, &mut out, run, &schemes, seed, &cells, command)?;
    if with_fits {
        let fits = fits_for(&run.deltas, &cells, schemes.len());
        let table = fit_table(&schemes, &fits);
        out.file(&format!("{command}_fit.csv"), &table)?;
        out.print_raw("\n")?;
        out.print_raw(&table)?;
    }
    match all_overflow_error(&schemes, &run.deltas, &cells) {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn cmd_convergence(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let config = load_config(cli)?;
    let run = config.run_settings()?;
    // the ladder itself must admit a fit before any simulation starts
    let ones = vec![1.0; run.deltas.len()];
    fit_strong_order(&run.deltas, &ones).map_err(|e| field_err("config", "run.deltas", e))?;
    let seed = cli.seed.unwrap_or(config.seed);
    let schemes = match scheme_override(cli)? {
        Some(s) => vec![s],
        None => run.schemes.clone(),
    };
    check_budget(cli, run, schemes.len())?;
    let cells = error_cells(run, &schemes, seed)?;
    let fits = fits_for(&run.deltas, &cells, schemes.len());
    let mut out = make_output(cli, &config, "convergence", seed, stdout);
    write_error_outputs(cli, &mut out, run, &schemes, seed, &cells, "convergence")?;
    let table = fit_table(&schemes, &fits);
    out.file("convergence_fit.csv", &table)?;
    out.print_raw("\n")?;
    out.print_raw(&table)?;
    if let Some(e) = all_overflow_error(&schemes, &run.deltas, &cells) {
        return Err(e);
    }
    match fits.into_iter().find_map(|f| f.err()) {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn cmd_stability(cli: &Cli, p: Option<f64>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::from_toml_str("", "defaults")?,
    };
    let seed = cli.seed.unwrap_or(config.seed);
    let p = p.unwrap_or(config.stability.p);
    if !(p > 0.0 && p.is_finite()) {
        return Err(field_err("flags", "--p", "must be positive"));
    }
    let schemes = match scheme_override(cli)? {
        Some(s) => vec![s],
        None => config
            .schemes
            .clone()
            .unwrap_or_else(|| SchemePreset::ALL.iter().map(|&p| p.into()).collect()),
    };
    let lattice = &config.stability.lattice;
    let mut summary = vec![
        ["scheme", "theta", "eta", "p", "stable_nodes", "total_nodes"]
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>(),
    ];
    let mut out = make_output(cli, &config, "stability", seed, stdout);
    for scheme in &schemes {
        let region = scan_stability_region(&scheme.params, p, lattice)?;
        out.file(
            &format!("stability_{}.csv", file_stem(&scheme.label)),
            &region.to_csv(),
        )?;
        summary.push(vec![
            scheme.label.clone(),
            join_nums(scheme.params.thetas()),
            join_nums(scheme.params.etas()),
            fmt_num(p),
            region.stable_count().to_string(),
            lattice.len().to_string(),
        ]);
    }
    let summary = csv_text(&summary);
    out.file("stability_summary.csv", &summary)?;
    out.print(&summary)?;

    if let (Some(ModelSpec::StabilityTest(model)), Some(dt)) = (&config.model, config.stability.dt)
    {
        let mut rows = vec![[
            "scheme",
            "regime",
            "lambda_dt",
            "alpha",
            "p",
            "moment",
            "stable",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()];
        for scheme in &schemes {
            let verdict = state_p_stable(model, &scheme.params, dt, p)?;
            for (i, pt) in verdict.per_regime.iter().enumerate() {
                rows.push(vec![
                    scheme.label.clone(),
                    (i + 1).to_string(),
                    fmt_num(pt.lambda_dt),
                    fmt_num(pt.alpha),
                    fmt_num(pt.p),
                    fmt_num(pt.moment),
                    pt.stable.to_string(),
                ]);
            }
            rows.push(vec![
                scheme.label.clone(),
                "all".into(),
                String::new(),
                String::new(),
                fmt_num(p),
                String::new(),
                verdict.overall.to_string(),
            ]);
        }
        let table = csv_text(&rows);
        out.file("state_stability.csv", &table)?;
        out.print_raw("\n")?;
        out.print_raw(&table)?;
    }
    Ok(())
}

fn cmd_reproduce(
    cli: &Cli,
    example: Example,
    scale: Scale,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let mut config = ExperimentConfig::builtin(example);
    if scale == Scale::Paper {
        if !cli.allow_long {
            return Err(CliError::ResourceGuard(format!(
                "{} at full scale is a long run; pass --allow-long to start it",
                example.name()
            )));
        }
        config = config.full_scale(example);
    }
    let with_fits = config
        .run
        .as_ref()
        .is_some_and(|r| fit_strong_order(&r.deltas, &vec![1.0; r.deltas.len()]).is_ok());
    run_compare(
        cli,
        &config,
        &format!("reproduce-{}", example.name()),
        stdout,
        with_fits,
    )
}

/// Executes a parsed command line, writing the primary table to `stdout`.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let body = |stdout: &mut dyn Write| match &cli.command {
        Command::Simulate { delta } => cmd_simulate(cli, *delta, stdout),
        Command::Compare => cmd_compare(cli, stdout),
        Command::Convergence => cmd_convergence(cli, stdout),
        Command::Stability { p } => cmd_stability(cli, *p, stdout),
        Command::Reproduce { example, scale } => cmd_reproduce(cli, *example, *scale, stdout),
    };
    match cli.threads {
        None => body(stdout),
        Some(0) => Err(field_err("flags", "--threads", "must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            let mut buffer = Vec::new();
            let result = pool.install(|| body(&mut buffer));
            stdout
                .write_all(&buffer)
                .map_err(|e| CliError::Config(format!("stdout: {e}")))?;
            result
        }
    }
}

/// Parses `args`, runs the command and reports errors on stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli, &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
