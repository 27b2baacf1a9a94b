//! Command dispatch and artifact writing.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use plap_core::constants::{
    calibrate_gradient_constant, constants_report, gradient_constant, m_window_with_floor, Calibration,
    ConstantsInput, ConstantsReport,
};
use plap_core::discretization::{read_field_file, write_field_file, Field, Grid, Interval};
use plap_core::fixed_point::{
    check_membership, iterate_t, lambda_sweep, write_sweep, write_trace, AdmissibleSet, MEMBERSHIP_TOL,
};
use plap_core::plap::solve_eigenpair;
use plap_core::singular::{solve_sublinear, solve_u0, write_stage_trace, ContinuationReport, ProblemSpec};
use plap_core::verification::{check_distance_bounds, check_residual, CheckResult};

use crate::config::{Command, Format, RawConfig, RunConfig};
use crate::error::CliError;

/// What a successful dispatch produced.
#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub checks: Vec<CheckResult>,
    pub artifacts: Vec<PathBuf>,
}

struct Writer<'a> {
    cfg: &'a RunConfig,
    dir: PathBuf,
    artifacts: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self, CliError> {
        let dir = cfg.output.directory.clone();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            cfg,
            dir,
            artifacts: Vec::new(),
        })
    }

    fn field(&mut self, name: &str, u: &Field) -> Result<(), CliError> {
        if self.cfg.writes(Format::Csv) {
            let path = self.dir.join(name);
            write_field_file(u, &path)?;
            self.artifacts.push(path);
        }
        Ok(())
    }

    fn csv(&mut self, name: &str, f: impl FnOnce(fs::File) -> plap_core::Result<()>) -> Result<(), CliError> {
        if self.cfg.writes(Format::Csv) {
            let path = self.dir.join(name);
            f(fs::File::create(&path)?)?;
            self.artifacts.push(path);
        }
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        if self.cfg.writes(Format::Json) {
            let path = self.dir.join(name);
            let mut text = serde_json::to_string_pretty(value)?;
            text.push('\n');
            fs::write(&path, text)?;
            self.artifacts.push(path);
        }
        Ok(())
    }

    fn report(&mut self, body: Value, checks: &[CheckResult]) -> Result<(), CliError> {
        let mut report = json!({
            "command": self.cfg.command.name(),
            "seed": self.cfg.seed,
            "config": self.cfg.flat,
            "checks": checks,
        });
        if let (Value::Object(dst), Value::Object(src)) = (&mut report, body) {
            dst.extend(src);
        }
        self.json("report.json", &report)
    }

    fn finish(self, checks: Vec<CheckResult>) -> Outcome {
        let exit_code = if checks.iter().all(|c| c.passed) { 0 } else { 4 };
        Outcome {
            exit_code,
            checks,
            artifacts: self.artifacts,
        }
    }
}

pub fn build_grid(cfg: &RunConfig) -> Result<Arc<Grid>, CliError> {
    let extent: Vec<Interval> = cfg.grid.extent.iter().map(|&(lo, hi)| Interval::new(lo, hi)).collect();
    Ok(Arc::new(Grid::new(&extent, &cfg.grid.n)?))
}

/// Boolean hard check as a [`CheckResult`] with margin `±1`.
fn flag(name: &str, ok: bool) -> CheckResult {
    CheckResult::new(name, if ok { 0.0 } else { -1.0 }, None, 0.0)
}

fn continuation_checks(rep: &ContinuationReport) -> Vec<CheckResult> {
    vec![
        flag("converged", rep.report.converged),
        CheckResult::new(
            "cauchy_increment",
            rep.cauchy_threshold - rep.cauchy_increment,
            None,
            0.0,
        )
        .detail("increment", rep.cauchy_increment)
        .detail("threshold", rep.cauchy_threshold),
    ]
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cfg.command {
        Command::SolveU0 => run_u0(cfg),
        Command::SolveSublinear => run_sublinear(cfg),
        Command::SolveSupercritical => run_supercritical(cfg),
        Command::Eigen => run_eigen(cfg),
        Command::Constants => run_constants(cfg),
        Command::SweepLambda => run_sweep(cfg),
        Command::Verify => run_verify(cfg),
    }
}

fn run_u0(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let grid = build_grid(cfg)?;
    let p = &cfg.problem;
    let (u0, rep) = solve_u0(grid, p.p, p.alpha, &cfg.schedule(), &cfg.core())?;
    let spec = ProblemSpec::singular(p.p, p.alpha, 1.0);
    let mut checks = continuation_checks(&rep);
    checks.push(check_residual(&spec, &u0)?);
    checks.push(check_distance_bounds(&u0).2);
    let mut w = Writer::new(cfg)?;
    w.field("u0.csv", &u0)?;
    w.csv("stages.csv", |f| write_stage_trace(&rep.stages, f))?;
    w.report(json!({ "continuation": rep }), &checks)?;
    Ok(w.finish(checks))
}

fn run_sublinear(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let grid = build_grid(cfg)?;
    let spec = cfg.spec(cfg.problem.lambda.unwrap_or(1.0));
    let (u, rep) = solve_sublinear(grid, &spec, &cfg.schedule(), &cfg.core())?;
    let mut checks = continuation_checks(&rep);
    checks.push(check_residual(&spec, &u)?);
    checks.push(check_distance_bounds(&u).2);
    let mut w = Writer::new(cfg)?;
    w.field("u.csv", &u)?;
    w.csv("stages.csv", |f| write_stage_trace(&rep.stages, f))?;
    w.report(json!({ "lambda": spec.lambda, "continuation": rep }), &checks)?;
    Ok(w.finish(checks))
}

/// `u₀` plus the constants of the supercritical argument. The gradient
/// constant is calibrated unless given.
struct Supercritical {
    u0: Option<Field>,
    input: ConstantsInput,
    report: ConstantsReport,
    calibration: Option<Calibration>,
}

fn supercritical(cfg: &RunConfig, need_u0: bool) -> Result<Supercritical, CliError> {
    let p = &cfg.problem;
    let need_field = need_u0 || p.u0_sup.is_none() || p.cp_hat.is_none();
    let u0 = if need_field {
        let grid = build_grid(cfg)?;
        Some(solve_u0(grid, p.p, p.alpha, &cfg.schedule(), &cfg.core())?.0)
    } else {
        None
    };
    let calibration = match (p.cp_hat, &u0) {
        (None, Some(_)) => Some(calibrate_gradient_constant(
            build_grid(cfg)?,
            p.p,
            cfg.q(),
            cfg.probes,
            cfg.seed,
            &cfg.core(),
        )?),
        _ => None,
    };
    let cp_hat = match (p.cp_hat, &calibration, &u0) {
        (Some(c), _, _) => c,
        (None, Some(cal), Some(u0)) => gradient_constant(cal, u0, p.p, p.alpha),
        _ => unreachable!("calibration runs whenever cp_hat is missing"),
    };
    let conv = cfg.convection();
    let input = ConstantsInput {
        p: p.p,
        alpha: p.alpha,
        a: conv.a,
        b: conv.b,
        r1: conv.r1,
        r2: conv.r2,
        u0_sup: p.u0_sup.unwrap_or_else(|| u0.as_ref().map(Field::sup).unwrap_or(f64::NAN)),
        q: cfg.q(),
        dim: cfg.grid.dim,
        cp_hat: Some(cp_hat),
        theta: p.theta,
    };
    let report = constants_report(&input, p.lambda)?;
    Ok(Supercritical {
        u0,
        input,
        report,
        calibration,
    })
}

fn run_constants(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let s = supercritical(cfg, false)?;
    let checks = vec![flag("feasible", s.report.feasible)];
    let mut w = Writer::new(cfg)?;
    w.report(
        json!({ "constants": s.report, "calibration": s.calibration }),
        &checks,
    )?;
    Ok(w.finish(checks))
}

fn membership_check(u: &Field, set: &AdmissibleSet) -> Result<CheckResult, CliError> {
    let m = check_membership(u, set)?;
    let worst = m.margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(
        CheckResult::new("membership", worst, None, MEMBERSHIP_TOL)
            .detail("margin_lower", m.margins[0])
            .detail("margin_upper", m.margins[1])
            .detail("margin_gradient", m.margins[2])
            .detail("lambda", set.lambda)
            .detail("M", set.m),
    )
}

fn run_supercritical(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let s = supercritical(cfg, true)?;
    let u0 = s.u0.expect("u0 requested");
    let spec = cfg.spec(s.report.lambda);
    let set = AdmissibleSet::new(u0.clone(), s.report.lambda, s.report.m)?;
    let out = iterate_t(&spec, &set, &cfg.core(), None)?;
    let checks = vec![
        flag("constants_feasible", s.report.feasible),
        membership_check(&out.u, &set)?,
        out.residual.clone(),
        check_distance_bounds(&out.u).2,
    ];
    let mut w = Writer::new(cfg)?;
    w.field("u0.csv", &u0)?;
    w.field("u.csv", &out.u)?;
    w.csv("trace.csv", |f| write_trace(&out.trace, f))?;
    w.report(
        json!({
            "lambda": s.report.lambda,
            "M": s.report.m,
            "constants": s.report,
            "calibration": s.calibration,
            "fixed_point": { "report": out.report, "membership": out.membership },
        }),
        &checks,
    )?;
    Ok(w.finish(checks))
}

fn run_eigen(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let grid = build_grid(cfg)?;
    let e = solve_eigenpair(grid, cfg.problem.p, &cfg.core())?;
    let checks = vec![check_distance_bounds(&e.phi1).2];
    let mut w = Writer::new(cfg)?;
    w.field("phi1.csv", &e.phi1)?;
    w.report(json!({ "lambda1": e.lambda1, "iterations": e.iterations }), &checks)?;
    Ok(w.finish(checks))
}

fn run_sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let s = supercritical(cfg, true)?;
    let u0 = s.u0.expect("u0 requested");
    if let Some(l) = cfg.lambdas.iter().find(|&&l| l >= s.report.a_star) {
        return Err(CliError::Config(format!(
            "sweep.lambdas: lambda = {l} is not below A* = {}",
            s.report.a_star
        )));
    }
    let cp = s.report.cp_hat;
    let input = s.input;
    let m_for = |l: f64| {
        m_window_with_floor(l, &input, cp)
            .map(|w| 0.5 * (w.lo + w.hi))
            .unwrap_or(f64::NAN)
    };
    let rows = lambda_sweep(&cfg.spec(1.0), &u0, &cfg.lambdas, &m_for, &cfg.core());
    let checks: Vec<CheckResult> = rows
        .iter()
        .map(|r| {
            flag(&format!("sweep_row_{:e}", r.lambda), r.error.is_none() && r.in_set)
                .detail("lambda", r.lambda)
                .detail("sup_u", r.sup_u)
                .detail("sup_grad", r.sup_grad)
        })
        .collect();
    let mut w = Writer::new(cfg)?;
    w.csv("sweep.csv", |f| write_sweep(&rows, f))?;
    w.report(json!({ "constants": s.report, "calibration": s.calibration, "rows": rows }), &checks)?;
    Ok(w.finish(checks))
}

/// Re-checks a finished solve directory from its `report.json` and field
/// CSVs, writing `checks.json`.
fn run_verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let input = cfg.verify_input.clone().unwrap_or_else(|| cfg.output.directory.clone());
    let report: Value = serde_json::from_str(&read(&input.join("report.json"))?)?;
    let flat = serde_json::from_value(report["config"].clone())?;
    let src = RunConfig::from_raw(&RawConfig::from_flat(&flat, "report.json")?)?;
    let grid = build_grid(&src)?;
    let field = |name: &str| -> Result<Field, CliError> { Ok(read_field_file(grid.clone(), input.join(name))?) };
    let number = |key: &str| -> Result<f64, CliError> {
        report[key]
            .as_f64()
            .ok_or_else(|| CliError::Verification(format!("report.json has no numeric `{key}`")))
    };
    let mut checks = Vec::new();
    match src.command {
        Command::SolveU0 => {
            let u0 = field("u0.csv")?;
            checks.push(check_residual(&ProblemSpec::singular(src.problem.p, src.problem.alpha, 1.0), &u0)?);
            checks.push(check_distance_bounds(&u0).2);
        }
        Command::SolveSublinear => {
            let u = field("u.csv")?;
            checks.push(check_residual(&src.spec(number("lambda")?), &u)?);
            checks.push(check_distance_bounds(&u).2);
        }
        Command::SolveSupercritical => {
            let (u0, u) = (field("u0.csv")?, field("u.csv")?);
            let lambda = number("lambda")?;
            let set = AdmissibleSet::new(u0, lambda, number("M")?)?;
            checks.push(membership_check(&u, &set)?);
            checks.push(check_residual(&src.spec(lambda), &u)?);
            checks.push(check_distance_bounds(&u).2);
        }
        Command::Eigen => checks.push(check_distance_bounds(&field("phi1.csv")?).2),
        other => {
            return Err(CliError::Config(format!(
                "verify needs the directory of a solve or eigen run, found `{other}`"
            )))
        }
    }
    let mut w = Writer::new(cfg)?;
    w.json("checks.json", &checks)?;
    Ok(w.finish(checks))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Verification(format!("cannot read {}: {e}", path.display())))
}
