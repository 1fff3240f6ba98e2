//! Command-line front end: `synth`, `decompose`, `run`, `verify`, `report`.
//!
//! Every command is deterministic given its [`RunConfig`]. Exit codes: 0 ok,
//! 1 a check failed, 2 input or usage error, 3 numerical abort.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dataset::{synth, Dataset, MarginMatrix, SynthKind};
use crate::decompose::{validate, Decomposition};
use crate::error::{Error, Result};
use crate::gd::{GdTrace, LossKind, Schedule, PER_DECADE};
use crate::verify::{
    analyze, run_traced, verify_trace, CheckKind, CheckParams, CheckResult, CheckStatus,
    Structure, Tolerances, VerificationReport,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    CheckFailed = 1,
    InputError = 2,
    NumericAbort = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Exit status an error maps to.
pub fn exit_status(e: &Error) -> ExitStatus {
    match e {
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::Validation(_)
        | Error::Degenerate(_)
        | Error::Usage(_)
        | Error::Json(_)
        | Error::Csv(_) => ExitStatus::InputError,
        Error::NonConvergence { .. }
        | Error::Numerical(_)
        | Error::NumericAbort { .. }
        | Error::NotSeparable { .. } => ExitStatus::NumericAbort,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InputSpec {
    Csv(PathBuf),
    Synth {
        kind: SynthKind,
        n_per_class: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub input: InputSpec,
    pub loss: LossKind,
    pub schedule: Schedule,
    pub steps: usize,
    pub per_decade: usize,
    pub tolerances: Tolerances,
    pub out: PathBuf,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(input: InputSpec, out: impl Into<PathBuf>) -> Self {
        RunConfig {
            input,
            loss: LossKind::Logistic,
            schedule: Schedule::InvSqrt,
            steps: 10_000,
            per_decade: PER_DECADE,
            tolerances: Tolerances::default(),
            out: out.into(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Usage("--steps must be at least 1".into()));
        }
        if self.per_decade == 0 {
            return Err(Error::Usage("--per-decade must be at least 1".into()));
        }
        let t = self.tolerances;
        for (name, v) in [("margin", t.margin), ("scvx", t.scvx), ("ball", t.ball)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Usage(format!("--tol-{name} must be positive, got {v}")));
            }
        }
        if let InputSpec::Synth { n_per_class: 0, .. } = self.input {
            return Err(Error::Usage("--n-per-class must be at least 1".into()));
        }
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.input {
            InputSpec::Csv(path) => Dataset::load_csv(path),
            InputSpec::Synth { kind, n_per_class } => synth(*kind, *n_per_class, self.seed),
        }
    }

    fn margin_matrix(&self) -> Result<MarginMatrix> {
        Ok(self.load_dataset()?.to_margin_matrix())
    }

    fn params(&self) -> CheckParams {
        CheckParams {
            seed: self.seed,
            ..CheckParams::default()
        }
    }

    fn out_file(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))?;
        Ok(self.out.join(name))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn finish(result: Result<ExitStatus>) -> ExitStatus {
    match result {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::NumericAbort { last: Some(cp), .. } = &e {
                eprintln!("last valid checkpoint: t = {}, risk = {:.16e}", cp.t, cp.risk);
            }
            exit_status(&e)
        }
    }
}

/// Writes the dataset as `dataset.csv`.
pub fn cmd_synth(cfg: &RunConfig) -> ExitStatus {
    finish((|| {
        cfg.validate()?;
        let data = cfg.load_dataset()?;
        let path = cfg.out_file("dataset.csv")?;
        data.save_csv(&path)?;
        println!("wrote {} ({} rows, d = {})", path.display(), data.len(), data.dim());
        Ok(ExitStatus::Ok)
    })())
}

fn write_structure(cfg: &RunConfig, s: &Structure) -> Result<()> {
    write_json(&cfg.out_file("decomposition.json")?, &s.decomposition)?;
    if let Some(m) = &s.margin {
        write_json(&cfg.out_file("margin.json")?, m)?;
    }
    if s.s_nontrivial() {
        write_json(&cfg.out_file("scvx.json")?, &s.scvx)?;
    }
    Ok(())
}

/// Writes `decomposition.json`, plus `margin.json` and `scvx.json` when those parts exist.
pub fn cmd_decompose(cfg: &RunConfig) -> ExitStatus {
    finish((|| {
        cfg.validate()?;
        let a = cfg.margin_matrix()?;
        let s = analyze(&a, cfg.loss, &cfg.tolerances)?;
        write_structure(cfg, &s)?;
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "sep = {}", s.decomposition.sep_rows.len());
        let _ = writeln!(out, "sc = {}", s.decomposition.sc_rows.len());
        let _ = writeln!(out, "rank_s = {}", s.decomposition.basis_s.rank());
        match s.gamma() {
            Some(g) => {
                let _ = writeln!(out, "gamma = {g:.16e}");
            }
            None => {
                let _ = writeln!(out, "gamma = none");
            }
        }
        let _ = writeln!(out, "v_bar_norm = {:.16e}", s.v_bar_norm());
        let _ = writeln!(out, "risk_inf = {:.16e}", s.risk_inf);
        Ok(ExitStatus::Ok)
    })())
}

/// Writes `trace.csv` and `trace.json`.
pub fn cmd_run(cfg: &RunConfig) -> ExitStatus {
    finish((|| {
        cfg.validate()?;
        let a = cfg.margin_matrix()?;
        let s = analyze(&a, cfg.loss, &cfg.tolerances)?;
        let trace = match run_traced(&s, cfg.schedule, cfg.steps, cfg.per_decade, &cfg.params()) {
            Ok(t) => t,
            Err(e) => {
                if let Error::NumericAbort { last: Some(cp), .. } = &e {
                    write_json(&cfg.out_file("abort.json")?, cp)?;
                }
                return Err(e);
            }
        };
        trace.save_csv(cfg.out_file("trace.csv")?)?;
        trace.save_json(cfg.out_file("trace.json")?)?;
        let last = trace.last();
        println!(
            "T = {}: risk = {:.16e}, |w| = {:.16e}, checkpoints = {}",
            last.t,
            last.risk,
            last.norm_w,
            trace.checkpoints.len()
        );
        Ok(ExitStatus::Ok)
    })())
}

/// Checks a stored decomposition, if any, against the data.
fn stored_decomposition_check(cfg: &RunConfig, a: &MarginMatrix) -> Result<Option<CheckResult>> {
    let path = cfg.out.join("decomposition.json");
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let dec: Decomposition = serde_json::from_str(&text)?;
    if dec.n() != a.nrows() || dec.dim() != a.dim() {
        return Err(Error::Validation(format!(
            "{} does not match the input shape",
            path.display()
        )));
    }
    let v = validate(&dec, a);
    let failed: Vec<&str> = v
        .checks
        .iter()
        .filter(|c| !c.passed && !c.skipped)
        .map(|c| c.name.as_str())
        .collect();
    let worst = v
        .checks
        .iter()
        .filter(|c| !c.skipped)
        .map(|c| if c.passed { 0.0 } else { -c.residual.abs() })
        .fold(0.0, f64::min);
    Ok(Some(CheckResult {
        name: "decomposition".into(),
        holds: failed.is_empty(),
        worst_slack: Some(worst),
        location: None,
        status: if failed.is_empty() {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        kind: CheckKind::Theorem,
        evaluated: v.checks.iter().filter(|c| !c.skipped).count(),
        violations: failed.len(),
        note: if failed.is_empty() {
            "stored decomposition validated".into()
        } else {
            format!("stored decomposition fails {}", failed.join(", "))
        },
    }))
}

fn print_report(report: &VerificationReport) {
    let mut out = std::io::stdout().lock();
    for c in &report.checks {
        let status = match c.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::NotApplicable => "N/A ",
        };
        let slack = c.worst_slack.map_or("-".to_string(), |w| format!("{w:.16e}"));
        let _ = writeln!(out, "{status} {:<14} worst_slack = {slack} {}", c.name, c.note);
    }
    for f in &report.trends {
        let _ = writeln!(
            out,
            "trend {:<16} ~ {:.16e} * {} (slope {:.6}, rms {:.6})",
            f.name, f.coefficient, f.model, f.exponent, f.residual
        );
    }
}

fn report_status(report: &VerificationReport) -> ExitStatus {
    let failed = report.failed();
    if failed.is_empty() {
        ExitStatus::Ok
    } else {
        eprintln!("failed checks: {}", failed.join(", "));
        ExitStatus::CheckFailed
    }
}

/// Writes `report.json`. Uses `trace.json` from the output directory when
/// present (its loss and schedule take precedence), otherwise runs first.
pub fn cmd_verify(cfg: &RunConfig) -> ExitStatus {
    finish((|| {
        cfg.validate()?;
        let a = cfg.margin_matrix()?;
        let trace_path = cfg.out.join("trace.json");
        let stored = trace_path.exists();
        let trace = if stored {
            let t = GdTrace::load_json(&trace_path)?;
            if t.digest != a.digest() {
                return Err(Error::Validation(format!(
                    "{} was produced from different data",
                    trace_path.display()
                )));
            }
            Some(t)
        } else {
            None
        };
        let loss = trace.as_ref().map_or(cfg.loss, |t| t.loss);
        let s = analyze(&a, loss, &cfg.tolerances)?;
        let trace = match trace {
            Some(t) => t,
            None => {
                let t = run_traced(&s, cfg.schedule, cfg.steps, cfg.per_decade, &cfg.params())?;
                t.save_csv(cfg.out_file("trace.csv")?)?;
                t.save_json(cfg.out_file("trace.json")?)?;
                t
            }
        };
        let mut report = verify_trace(&s, &trace, &cfg.params())?;
        if let Some(d) = stored_decomposition_check(cfg, &a)? {
            report.checks.push(d);
        }
        report.save_json(cfg.out_file("report.json")?)?;
        print_report(&report);
        Ok(report_status(&report))
    })())
}

/// Prints a stored `report.json`; the exit status reflects its checks.
pub fn cmd_report(out: &Path) -> ExitStatus {
    finish((|| {
        let report = VerificationReport::load_json(out.join("report.json"))?;
        print_report(&report);
        Ok(report_status(&report))
    })())
}

#[derive(Debug, Parser)]
#[command(name = "implicit-ray", version, about = "Optimal-ray decomposition, gradient descent traces and bound checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset CSV.
    Synth(CommonArgs),
    /// Decompose the data and solve the margin and strongly convex problems.
    Decompose(CommonArgs),
    /// Run gradient descent and write the trace.
    Run(CommonArgs),
    /// Check every bound against the trace and write report.json.
    Verify(CommonArgs),
    /// Print a stored report.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Input CSV with header f1,...,fd,label.
    #[arg(long, conflicts_with = "kind")]
    pub input: Option<PathBuf>,
    /// Synthetic geometry: separable, overlap, touching or mixed.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub n_per_class: usize,
    #[arg(long, default_value = "logistic")]
    pub loss: String,
    #[arg(long, default_value = "inv_sqrt")]
    pub schedule: String,
    #[arg(long, default_value_t = 10_000)]
    pub steps: usize,
    #[arg(long, default_value_t = PER_DECADE)]
    pub per_decade: usize,
    #[arg(long, default_value_t = crate::margin::MARGIN_TOL)]
    pub tol_margin: f64,
    #[arg(long, default_value_t = crate::scvx::SCVX_TOL)]
    pub tol_scvx: f64,
    #[arg(long, default_value_t = crate::gd::BALL_TOL)]
    pub tol_ball: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl CommonArgs {
    pub fn to_config(&self) -> Result<RunConfig> {
        let input = match (&self.input, &self.kind) {
            (Some(p), None) => InputSpec::Csv(p.clone()),
            (None, Some(k)) => InputSpec::Synth {
                kind: k.parse()?,
                n_per_class: self.n_per_class,
            },
            (None, None) => return Err(Error::Usage("one of --input or --kind is required".into())),
            (Some(_), Some(_)) => {
                return Err(Error::Usage("--input and --kind are exclusive".into()))
            }
        };
        let cfg = RunConfig {
            input,
            loss: self.loss.parse()?,
            schedule: self.schedule.parse()?,
            steps: self.steps,
            per_decade: self.per_decade,
            tolerances: Tolerances {
                margin: self.tol_margin,
                scvx: self.tol_scvx,
                ball: self.tol_ball,
            },
            out: self.out.clone(),
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitStatus::InputError
            } else {
                ExitStatus::Ok
            };
        }
    };
    let with_config = |a: &CommonArgs, f: fn(&RunConfig) -> ExitStatus| match a.to_config() {
        Ok(cfg) => f(&cfg),
        Err(e) => finish(Err(e)),
    };
    match &cli.command {
        Command::Synth(a) => with_config(a, cmd_synth),
        Command::Decompose(a) => with_config(a, cmd_decompose),
        Command::Run(a) => with_config(a, cmd_run),
        Command::Verify(a) => with_config(a, cmd_verify),
        Command::Report { out } => cmd_report(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes() {
        assert_eq!(exit_status(&Error::Usage("x".into())), ExitStatus::InputError);
        assert_eq!(exit_status(&Error::Parse { row: 1, message: "x".into() }), ExitStatus::InputError);
        assert_eq!(
            exit_status(&Error::NumericAbort { step: 3, last: None }),
            ExitStatus::NumericAbort
        );
        assert_eq!(ExitStatus::CheckFailed.code(), 1);
    }

    #[test]
    fn config_validation() {
        let mut cfg = RunConfig::new(InputSpec::Synth { kind: SynthKind::Mixed, n_per_class: 5 }, "o");
        assert!(cfg.validate().is_ok());
        cfg.steps = 0;
        assert!(cfg.validate().is_err());
        cfg.steps = 1;
        cfg.tolerances.margin = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn argument_errors_are_input_errors() {
        assert_eq!(main_with(["implicit-ray", "run", "--loss", "hinge", "--kind", "mixed"]), ExitStatus::InputError);
        assert_eq!(main_with(["implicit-ray", "run"]), ExitStatus::InputError);
        assert_eq!(main_with(["implicit-ray", "frobnicate"]), ExitStatus::InputError);
        assert_eq!(main_with(["implicit-ray", "run", "--kind", "mixed", "--steps", "0"]), ExitStatus::InputError);
    }
}
