//! Command-line front end: configuration, dispatch and report files.
//!
//! Exit codes: 0 success, 2 a verdict failed, 3 configuration or numerical
//! error, 4 missing inputs.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{FpkError, Result};
use crate::evolution::{decay_fit, evolve, lp_monitor, Integrator, Observers};
use crate::fields::{
    check_h3, h3_positive_radius, lambda0_p, FieldKind, ForceField, HypothesisOptions,
    HypothesisReport, SampleSet, Verdict, WeightContext,
};
use crate::grid::{assemble_operator, mass, Grid, GridFunction, OperatorMatrix};
use crate::inequalities::{nash_check, negpart_coercivity_check, strict_positivity_check};
use crate::par;
use crate::probes;
use crate::spectral::{spectrum, stationary};
use crate::splitting::{
    build_cutoff, convolution_bound_check, dissipativity_fit, duhamel_residual, split,
    DissipativityOptions,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_ERROR: i32 = 3;
pub const EXIT_MISSING: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "fpk",
    version,
    about = "Finite-volume Fokker-Planck laboratory"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output (run) directory; overrides `run.out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Base seed; overrides `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Sample the field hypotheses and report the constants.
    CheckHypotheses,
    /// Unit-mass stationary state.
    Stationary,
    /// Time evolution and decay-rate fit.
    Evolve,
    /// Dense spectrum and gap.
    Spectrum,
    /// Cutoff splitting, dissipativity and Duhamel checks.
    Splitting,
    /// Nash ratios and negative-part coercivity.
    Nash,
    /// Consolidated summary of a run directory.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckHypotheses => "check-hypotheses",
            Command::Stationary => "stationary",
            Command::Evolve => "evolve",
            Command::Spectrum => "spectrum",
            Command::Splitting => "splitting",
            Command::Nash => "nash",
            Command::Report => "report",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub half_width: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightConfig {
    pub k: f64,
    pub p: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self { k: 2.0, p: 2.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    pub window_fraction: f64,
    pub sample_every: usize,
    /// Initial datum: unit-mass Gaussian shifted by this amount along `x1`.
    pub initial_shift: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_end: 10.0,
            integrator: Integrator::ImplicitEuler,
            window_fraction: 0.1,
            sample_every: 1,
            initial_shift: 2.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplittingConfig {
    pub amplitude: f64,
    /// Cutoff scale `n`; chosen from the H3 sweep when absent.
    pub n_cutoff: Option<f64>,
    pub trials: usize,
    pub t_end: f64,
    pub dt: f64,
    pub min_rate: f64,
    pub duhamel_t: f64,
    pub bound_trials: usize,
    pub bound_samples: usize,
}

impl Default for SplittingConfig {
    fn default() -> Self {
        Self {
            amplitude: 10.0,
            n_cutoff: None,
            trials: 50,
            t_end: 10.0,
            dt: 0.05,
            min_rate: 1e-3,
            duhamel_t: 1.0,
            bound_trials: 20,
            bound_samples: 20,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HypothesisConfig {
    pub gamma: Option<f64>,
    pub gamma2: Option<f64>,
    pub radius: Option<f64>,
    pub alpha0: Option<f64>,
    pub r_max: f64,
    pub radial: usize,
    pub angular: usize,
}

impl Default for HypothesisConfig {
    fn default() -> Self {
        Self {
            gamma: None,
            gamma2: None,
            radius: None,
            alpha0: None,
            r_max: 50.0,
            radial: 10_000,
            angular: 64,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    pub stationary: f64,
    pub max_iter: usize,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            stationary: 1e-10,
            max_iter: 200,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NashConfig {
    pub family_size: usize,
    pub width_min: f64,
    pub width_max: f64,
    pub negpart_trials: usize,
}

impl Default for NashConfig {
    fn default() -> Self {
        Self {
            family_size: 64,
            width_min: 0.2,
            width_max: 2.0,
            negpart_trials: 50,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub out: Option<PathBuf>,
}

/// Parsed configuration file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub field: FieldKind,
    pub grid: GridConfig,
    #[serde(default)]
    pub weights: WeightConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub splitting: SplittingConfig,
    #[serde(default)]
    pub hypotheses: HypothesisConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub nash: NashConfig,
    #[serde(default)]
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| FpkError::Config(format!("malformed config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| FpkError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// Validated objects shared by the commands.
pub struct Setup {
    pub config: RunConfig,
    pub field: ForceField,
    pub grid: Grid,
    pub ctx: WeightContext,
    pub samples: SampleSet,
    pub seed: u64,
    pub out: PathBuf,
    pub warnings: Vec<String>,
}

impl Setup {
    pub fn new(config: RunConfig, out: Option<PathBuf>, seed: Option<u64>) -> Result<Self> {
        let grid = Grid::new(config.grid.dim, config.grid.half_width, config.grid.n)?;
        let field = ForceField::new(config.field.clone(), config.grid.dim)?;
        let ctx = WeightContext::new(config.weights.k, config.grid.dim, config.weights.p)?;
        let h = &config.hypotheses;
        let samples = SampleSet::new(config.grid.dim, h.r_max, h.radial, h.angular)?;
        let t = &config.time;
        if !(t.dt > 0.0 && t.t_end > 0.0 && t.dt <= t.t_end) {
            return Err(FpkError::Config(format!(
                "need 0 < time.dt <= time.t_end, got {} and {}",
                t.dt, t.t_end
            )));
        }
        if !(0.0..1.0).contains(&t.window_fraction) {
            return Err(FpkError::Config(
                "time.window_fraction must lie in [0, 1)".into(),
            ));
        }
        let s = &config.splitting;
        if !(s.dt > 0.0 && s.t_end > 0.0 && s.duhamel_t > 0.0) {
            return Err(FpkError::Config("splitting times must be positive".into()));
        }
        let mut warnings = Vec::new();
        if let Some(n) = s.n_cutoff {
            if 2.0 * n >= grid.half_width() {
                warnings.push(format!(
                    "2 n_cutoff = {} reaches the box half-width {}",
                    2.0 * n,
                    grid.half_width()
                ));
            }
        }
        let out = out
            .or_else(|| config.run.out.clone())
            .unwrap_or_else(|| PathBuf::from("fpk-out"));
        let seed = seed.unwrap_or(config.run.seed);
        Ok(Self {
            config,
            field,
            grid,
            ctx,
            samples,
            seed,
            out,
            warnings,
        })
    }

    pub fn operator(&self) -> Result<OperatorMatrix> {
        assemble_operator(&self.grid, &self.field)
    }

    fn hypothesis_options(&self) -> HypothesisOptions {
        let h = &self.config.hypotheses;
        HypothesisOptions {
            gamma: h.gamma,
            gamma2: h.gamma2,
            radius: h.radius,
            alpha0: h.alpha0,
        }
    }

    /// Unit-mass Gaussian `exp(-|x - s e1|^2 / 2) / (2 pi)^{d/2}`.
    pub fn initial_datum(&self) -> GridFunction {
        let s = self.config.time.initial_shift;
        let norm = (2.0 * std::f64::consts::PI).powf(0.5 * self.grid.dim() as f64);
        self.grid
            .sample(|x| (-((x[0] - s).powi(2) + x[1] * x[1]) / 2.0).exp() / norm)
    }
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn read_json(path: &Path) -> Option<Value> {
    let file = fs::File::open(path).ok()?;
    serde_json::from_reader(BufReader::new(file)).ok()
}

fn pass(v: Verdict) -> bool {
    v == Verdict::Pass
}

fn cmd_check_hypotheses(s: &Setup) -> Result<bool> {
    let report = HypothesisReport::compute(&s.field, &s.ctx, &s.samples, &s.hypothesis_options())?;
    let mut value = report.to_flat_json();
    value["all_pass"] = json!(report.all_pass());
    value["warnings"] = json!(s.warnings);
    write_json(&s.out.join("hypotheses.json"), &value)?;
    Ok(report.all_pass())
}

fn cmd_stationary(s: &Setup) -> Result<bool> {
    let op = s.operator()?;
    let tol = &s.config.tolerances;
    let st = stationary(&op, tol.stationary, tol.max_iter)?;
    let pos = strict_positivity_check(&st.g);
    st.g.write_csv(create(&s.out.join("G.csv"))?)?;
    op.write_matrix_market(create(&s.out.join("operator.mtx"))?)?;
    let mut value = st.summary_json();
    value["positivity"] = serde_json::to_value(&pos)?;
    value["tolerance"] = json!(tol.stationary);
    write_json(&s.out.join("stationary.json"), &value)?;
    Ok(pass(pos.verdict))
}

/// Stationary state from a previous `stationary` run in the same directory,
/// or computed inline.
fn load_or_compute_stationary(
    s: &Setup,
    op: &OperatorMatrix,
) -> Result<(GridFunction, &'static str)> {
    let path = s.out.join("G.csv");
    if let Ok(file) = fs::File::open(&path) {
        if let Ok(g) = GridFunction::read_csv(s.grid, BufReader::new(file)) {
            return Ok((g, "file"));
        }
    }
    let tol = &s.config.tolerances;
    Ok((stationary(op, tol.stationary, tol.max_iter)?.g, "inline"))
}

fn cmd_evolve(s: &Setup) -> Result<bool> {
    let op = s.operator()?;
    let (g, source) = load_or_compute_stationary(s, &op)?;
    let t = &s.config.time;
    let f0 = s.initial_datum();
    let obs = Observers::new(s.ctx.k, s.ctx.p)
        .with_stationary(&g)
        .sample_every(t.sample_every)
        .integrator(t.integrator);
    let traj = evolve(&op, &f0, t.t_end, t.dt, &obs)?;
    traj.write_csv(create(&s.out.join("trajectory.csv"))?)?;
    let fit = decay_fit(&traj, t.window_fraction)?;
    let lam_p = lambda0_p(&s.field, &s.ctx, &s.samples)?;
    let lp = lp_monitor(&traj, s.ctx.p, s.ctx.k, lam_p)?;
    let m0 = mass(&f0);
    let drift = traj.mass.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max) / m0.abs();
    let min = traj.min.iter().copied().fold(f64::INFINITY, f64::min);
    let ok = fit.omega > 0.0 && drift <= 1e-10 && min >= -1e-12;
    let mut value = serde_json::to_value(&fit)?;
    value["mass_drift"] = json!(drift);
    value["min"] = json!(min);
    value["lp"] = serde_json::to_value(&lp)?;
    value["stationary_source"] = json!(source);
    value["integrator"] = serde_json::to_value(t.integrator)?;
    value["verdict"] = json!(Verdict::from_bool(ok));
    write_json(&s.out.join("decay.json"), &value)?;
    Ok(ok)
}

fn cmd_spectrum(s: &Setup) -> Result<bool> {
    let op = s.operator()?;
    let sp = spectrum(&op)?;
    sp.write_csv(create(&s.out.join("spectrum.csv"))?)?;
    let ok = sp.principal.abs() <= 1e-8
        && sp.principal_vector_positive
        && sp.others_negative
        && sp.gap > 0.0;
    let mut value = serde_json::to_value(&sp)?;
    value["verdict"] = json!(Verdict::from_bool(ok));
    write_json(&s.out.join("spectrum.json"), &value)?;
    Ok(ok)
}

fn cmd_splitting(s: &Setup) -> Result<bool> {
    let op = s.operator()?;
    let cfg = &s.config.splitting;
    let n = match cfg.n_cutoff {
        Some(n) => n,
        None => h3_positive_radius(&s.field, &s.ctx, &s.samples)?.ok_or_else(|| {
            FpkError::Config(
                "H3 integrand is not eventually positive; set splitting.n_cutoff".into(),
            )
        })?,
    };
    let cutoff = build_cutoff(&s.grid, n, cfg.amplitude)?;
    let sp = split(&op, &cutoff)?;
    let radius = s.config.hypotheses.radius.unwrap_or(n);
    let h3 = check_h3(&s.field, &s.ctx, radius, &s.samples)?;
    let opts = DissipativityOptions {
        trials: cfg.trials,
        t_end: cfg.t_end,
        dt: cfg.dt,
        seed: s.seed,
        window_fraction: s.config.time.window_fraction,
        min_rate: cfg.min_rate,
    };
    let diss = dissipativity_fit(&sp, s.ctx.k, &opts)?;
    let f0 = s.initial_datum();
    let mut residuals = Vec::new();
    for dt in [cfg.dt, 0.5 * cfg.dt] {
        residuals.push((dt, duhamel_residual(&sp, &f0, s.ctx.k, cfg.duhamel_t, dt)?));
    }
    let ratio = residuals[0].1 / residuals[1].1;
    let bounds = par::map_range(cfg.bound_trials, |t| {
        let f =
            probes::random_smooth_nonnegative(&s.grid, &mut probes::trial_rng(s.seed, t as u64));
        convolution_bound_check(
            &sp,
            &f,
            s.ctx.k,
            diss.omega0,
            cfg.t_end,
            cfg.dt,
            cfg.bound_samples,
        )
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let violations: usize = bounds.iter().map(|b| b.violations).sum();
    let ok = pass(diss.verdict) && violations == 0;
    let value = json!({
        "M": cfg.amplitude,
        "n": n,
        "omega0": diss.omega0,
        "omega_star": h3.omega_star,
        "omega_star_radius": h3.radius,
        "duhamel_residuals": residuals,
        "duhamel_ratio": ratio,
        "bound_violations": violations,
        "bound_trials": cfg.bound_trials,
        "fits_in_box": cutoff.fits_in_box,
        "reassembly_error": sp.reassembly_error(),
        "dissipativity": diss,
        "verdict": Verdict::from_bool(ok),
    });
    write_json(&s.out.join("splitting.json"), &value)?;
    Ok(ok)
}

fn cmd_nash(s: &Setup) -> Result<bool> {
    let nc = &s.config.nash;
    let report = nash_check(
        &s.grid,
        &s.ctx,
        nc.family_size,
        (nc.width_min, nc.width_max),
    )?;
    report.write_csv(create(&s.out.join("nash.csv"))?)?;
    let op = s.operator()?;
    let h = HypothesisReport::compute(&s.field, &s.ctx, &s.samples, &s.hypothesis_options())?;
    let omega = pass(h.h3.verdict).then_some(h.h3.omega_star);
    let neg = negpart_coercivity_check(&op, &s.ctx, omega, nc.negpart_trials, s.seed);
    let ok = report.sup_ratio.is_finite() && report.sup_ratio > 0.0;
    let mut value = serde_json::to_value(&report)?;
    value["doubling_change"] = json!(report.doubling_change());
    value["negpart"] = serde_json::to_value(&neg)?;
    value["verdict"] = json!(Verdict::from_bool(ok));
    write_json(&s.out.join("nash.json"), &value)?;
    Ok(ok)
}

const REPORT_INPUTS: [(&str, &str); 6] = [
    ("hypotheses", "hypotheses.json"),
    ("stationary", "stationary.json"),
    ("evolve", "decay.json"),
    ("spectrum", "spectrum.json"),
    ("splitting", "splitting.json"),
    ("nash", "nash.json"),
];

/// Summary of whatever command outputs exist in `dir`. Returns `None` when
/// none do.
pub fn build_report(dir: &Path) -> Option<(Value, String)> {
    let inputs: Vec<(&str, Option<Value>)> = REPORT_INPUTS
        .iter()
        .map(|(name, file)| (*name, read_json(&dir.join(file))))
        .collect();
    if inputs.iter().all(|(_, v)| v.is_none()) {
        return None;
    }
    let get = |name: &str, key: &str| -> Value {
        inputs
            .iter()
            .find(|(n, _)| *n == name)
            .and_then(|(_, v)| v.as_ref())
            .map(|v| {
                v.get(key)
                    .cloned()
                    .unwrap_or(Value::String("MISSING".into()))
            })
            .unwrap_or(Value::String("MISSING".into()))
    };
    let constants = json!({
        "beta0": get("hypotheses", "beta0"),
        "lambda0": get("hypotheses", "lambda0"),
        "omega_star": get("hypotheses", "omega_star"),
        "b": get("hypotheses", "b"),
        "a_star": get("spectrum", "gap"),
        "omega": get("evolve", "omega"),
        "omega0": get("splitting", "omega0"),
    });
    let mut verdicts = serde_json::Map::new();
    for (name, value) in &inputs {
        let v = match value {
            None => Value::String("MISSING".into()),
            Some(v) if *name == "hypotheses" => v
                .get("verdicts")
                .cloned()
                .unwrap_or(Value::String("MISSING".into())),
            Some(v) if *name == "stationary" => v
                .pointer("/positivity/verdict")
                .cloned()
                .unwrap_or(Value::String("MISSING".into())),
            Some(v) => v
                .get("verdict")
                .cloned()
                .unwrap_or(Value::String("MISSING".into())),
        };
        verdicts.insert(name.to_string(), v);
    }
    let consistency = match (constants["omega"].as_f64(), constants["a_star"].as_f64()) {
        (Some(w), Some(a)) => json!({
            "omega_le_a_star_plus_5pct": w <= 1.05 * a,
            "relative_difference": (w - a).abs() / a,
        }),
        _ => Value::String("MISSING".into()),
    };
    let summary =
        json!({ "constants": constants, "verdicts": verdicts, "consistency": consistency });

    let mut text = String::from("fpk run summary\n\nconstants\n");
    for key in [
        "beta0",
        "lambda0",
        "omega_star",
        "b",
        "a_star",
        "omega",
        "omega0",
    ] {
        text.push_str(&format!("  {key:<11} {}\n", display(&constants[key])));
    }
    text.push_str("\nverdicts\n");
    for (name, v) in &verdicts {
        text.push_str(&format!("  {name:<11} {}\n", display(v)));
    }
    text.push_str("\nconsistency\n");
    match (constants["omega"].as_f64(), constants["a_star"].as_f64()) {
        (Some(w), Some(a)) => text.push_str(&format!(
            "  omega <= a* + 5%: {} (omega = {w}, a* = {a})\n",
            if w <= 1.05 * a { "yes" } else { "no" }
        )),
        _ => text.push_str("  omega <= a* + 5%: MISSING\n"),
    }
    Some((summary, text))
}

fn display(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn cmd_report(dir: &Path) -> Result<bool> {
    let (summary, text) = build_report(dir).ok_or_else(|| {
        FpkError::MissingInput(format!("no command outputs in {}", dir.display()))
    })?;
    write_json(&dir.join("summary.json"), &summary)?;
    fs::write(dir.join("summary.txt"), text)?;
    Ok(true)
}

fn write_manifest(s: &Setup, command: Command, seconds: f64, exit: i32) -> Result<()> {
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let value = json!({
        "command": command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "parallel": par::is_parallel(),
        "seed": s.seed,
        "config": s.config,
        "warnings": s.warnings,
        "wall_seconds": seconds,
        "timestamp": timestamp,
        "exit_code": exit,
    });
    write_json(
        &s.out.join(format!("manifest-{}.json", command.name())),
        &value,
    )
}

fn exit_code(e: &FpkError) -> i32 {
    match e {
        FpkError::MissingInput(_) => EXIT_MISSING,
        _ => EXIT_ERROR,
    }
}

fn threads_from_env() -> Option<usize> {
    std::env::var("FPK_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
}

/// Runs one command and returns its exit code; diagnostics go to `err`.
pub fn run_cli<W: Write>(cli: &Cli, err: &mut W) -> i32 {
    par::configure_threads(threads_from_env());
    if cli.command == Command::Report {
        let dir = match (&cli.out, &cli.config) {
            (Some(d), _) => d.clone(),
            (None, Some(c)) => match RunConfig::load(c) {
                Ok(cfg) => cfg.run.out.unwrap_or_else(|| PathBuf::from("fpk-out")),
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return EXIT_ERROR;
                }
            },
            (None, None) => PathBuf::from("fpk-out"),
        };
        return match cmd_report(&dir) {
            Ok(_) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                exit_code(&e)
            }
        };
    }
    let Some(path) = &cli.config else {
        let _ = writeln!(
            err,
            "error: --config is required for {}",
            cli.command.name()
        );
        return EXIT_ERROR;
    };
    let setup = match RunConfig::load(path).and_then(|c| Setup::new(c, cli.out.clone(), cli.seed)) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(&e);
        }
    };
    for w in &setup.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    if let Err(e) = fs::create_dir_all(&setup.out) {
        let _ = writeln!(err, "error: cannot create {}: {e}", setup.out.display());
        return EXIT_ERROR;
    }
    let start = Instant::now();
    let result = match cli.command {
        Command::CheckHypotheses => cmd_check_hypotheses(&setup),
        Command::Stationary => cmd_stationary(&setup),
        Command::Evolve => cmd_evolve(&setup),
        Command::Spectrum => cmd_spectrum(&setup),
        Command::Splitting => cmd_splitting(&setup),
        Command::Nash => cmd_nash(&setup),
        Command::Report => unreachable!(),
    };
    let code = match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAIL,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    };
    if let Err(e) = write_manifest(&setup, cli.command, start.elapsed().as_secs_f64(), code) {
        let _ = writeln!(err, "error: cannot write manifest: {e}");
        return EXIT_ERROR;
    }
    code
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run_cli(&cli, &mut std::io::stderr()),
        Err(e) => {
            let informational = !e.use_stderr();
            let _ = e.print();
            if informational {
                EXIT_OK
            } else {
                EXIT_ERROR
            }
        }
    }
}
