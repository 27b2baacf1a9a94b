//! Supercritical regime: the map `T v = S(λ v^{−α} + f(·, v, ∇v))` on the
//! order interval `λu₀ ≤ v ≤ Mu₀` with gradient cap `M`, iterated to a fixed
//! point, and the `λ → 0` sweep.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::discretization::{gradient, Field};
use crate::error::{Error, Result};
use crate::plap::{solve_dirichlet_from, CoreConfig, SolveReport};
use crate::singular::{singular_rhs, ProblemSpec};
use crate::verification::{check_residual, CheckResult};

/// Slack of the precondition `v ≥ λu₀`.
const FLOOR_SLACK: f64 = 1e-12;

/// Slack of the membership test.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct AdmissibleSet {
    pub u0: Field,
    pub lambda: f64,
    pub m: f64,
}

impl AdmissibleSet {
    pub fn new(u0: Field, lambda: f64, m: f64) -> Result<Self> {
        if !(lambda > 0.0 && m > 0.0 && lambda.is_finite() && m.is_finite()) {
            return Err(Error::InvalidInput(format!("need lambda, M > 0, got {lambda}, {m}")));
        }
        if lambda > m {
            return Err(Error::InvalidInput(format!("empty set: lambda = {lambda} > M = {m}")));
        }
        if !u0.is_dirichlet() || u0.interior_min() <= 0.0 {
            return Err(Error::InvalidInput("u0 must be positive inside and zero on the boundary".into()));
        }
        Ok(Self { u0, lambda, m })
    }

    /// Lower envelope `λu₀`.
    pub fn lower(&self) -> Field {
        self.u0.scaled(self.lambda)
    }

    /// Upper envelope `Mu₀`.
    pub fn upper(&self) -> Field {
        self.u0.scaled(self.m)
    }
}

/// Margins `min(v − λu₀)`, `min(Mu₀ − v)` and `M − ‖∇v‖∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub member: bool,
    pub margins: [f64; 3],
}

pub fn check_membership(v: &Field, set: &AdmissibleSet) -> Result<Membership> {
    if !v.same_grid(&set.u0) {
        return Err(Error::GridMismatch);
    }
    let grid = v.grid();
    let (mut lo, mut hi) = (f64::INFINITY, f64::INFINITY);
    for i in grid.interior_nodes() {
        let (vi, ui) = (v.values()[i], set.u0.values()[i]);
        lo = lo.min(vi - set.lambda * ui);
        hi = hi.min(set.m * ui - vi);
    }
    let margins = [lo, hi, set.m - gradient(v).sup()];
    Ok(Membership {
        member: margins.iter().all(|&m| m >= -MEMBERSHIP_TOL),
        margins,
    })
}

fn inner_config(cfg: &CoreConfig) -> CoreConfig {
    cfg.with_tol((cfg.tol * 0.1).max(1e-14))
}

/// One application of `T`, warm-started from `v`.
pub fn apply_t(spec: &ProblemSpec, v: &Field, set: &AdmissibleSet, cfg: &CoreConfig) -> Result<(Field, SolveReport)> {
    if !v.same_grid(&set.u0) {
        return Err(Error::GridMismatch);
    }
    let grid = v.grid();
    for i in grid.interior_nodes() {
        let floor = set.lambda * set.u0.values()[i];
        let vi = v.values()[i];
        if !(vi >= floor - FLOOR_SLACK) || vi <= 0.0 {
            return Err(Error::IterateEscape(format!(
                "v = {vi:.6e} below lambda u0 = {floor:.6e} at node {i}"
            )));
        }
    }
    let g = singular_rhs(spec, v, 0.0, None);
    solve_dirichlet_from(&g, spec.p, &inner_config(cfg), Some(v))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// `‖T v_k − v_k‖∞`
    pub sup_diff: f64,
    pub damping: f64,
    pub margins: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct FixedPointOutcome {
    pub u: Field,
    pub report: SolveReport,
    pub trace: Vec<TraceRow>,
    pub membership: Membership,
    pub residual: CheckResult,
}

/// Picard iteration on `T` from `v_init` (default `λu₀`). Switches to
/// damping 0.5 after the first increase of the successive difference and
/// stops once `‖T v − v‖∞ ≤ tol ‖v‖∞`, returning `T v`.
pub fn iterate_t(
    spec: &ProblemSpec,
    set: &AdmissibleSet,
    cfg: &CoreConfig,
    v_init: Option<&Field>,
) -> Result<FixedPointOutcome> {
    spec.validate()?;
    cfg.validate()?;
    if !spec.is_supercritical() {
        return Err(Error::WrongRegime(format!(
            "fixed-point driver needs r1, r2 > p - 1 = {}",
            spec.p - 1.0
        )));
    }
    let mut v = match v_init {
        Some(v) => v.clone(),
        None => set.lower(),
    };
    let mut trace = Vec::new();
    let mut damping = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..=cfg.max_iter {
        let (t, rep) = apply_t(spec, &v, set, cfg)?;
        let diff = t.sup_distance(&v);
        if diff > prev {
            damping = 0.5;
        }
        trace.push(TraceRow {
            iteration: k,
            sup_diff: diff,
            damping,
            margins: check_membership(&t, set)?.margins,
        });
        if diff <= cfg.tol * v.sup() {
            let membership = check_membership(&t, set)?;
            let residual = check_residual(spec, &t)?;
            let report = SolveReport {
                iterations: k,
                converged: true,
                ..rep
            };
            return Ok(FixedPointOutcome {
                u: t,
                report,
                trace,
                membership,
                residual,
            });
        }
        prev = diff;
        v = if damping == 1.0 { t } else { v.add_scaled(damping, &t.add_scaled(-1.0, &v)) };
    }
    let report = SolveReport {
        iterations: cfg.max_iter,
        final_residual_sup: prev,
        energy: f64::NAN,
        sup_norm: v.sup(),
        grad_sup_norm: gradient(&v).sup(),
        converged: false,
    };
    Err(Error::NonConvergence {
        context: "fixed-point iteration".into(),
        report,
        best: Box::new(v),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub sup_u: f64,
    pub sup_grad: f64,
    pub iterations: usize,
    pub in_set: bool,
    pub residual_sup: f64,
    /// Failure message when the row did not converge.
    pub error: Option<String>,
}

/// Runs [`iterate_t`] for each `λ` in order, with `M = m_for(λ)`. Each row
/// starts from the previous solution scaled by `(λ/λ_prev)^{1/(p−1+α)}`;
/// the first from `λ^{1/(p−1+α)} u₀`. Failed rows are recorded and skipped.
pub fn lambda_sweep(
    template: &ProblemSpec,
    u0: &Field,
    lambdas: &[f64],
    m_for: &dyn Fn(f64) -> f64,
    cfg: &CoreConfig,
) -> Vec<SweepRow> {
    let s = template.scaling_exponent();
    let mut prev: Option<(f64, Field)> = None;
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let spec = ProblemSpec { lambda, ..*template };
        let init = match &prev {
            Some((l, u)) => u.scaled((lambda / l).powf(s)),
            None => u0.scaled(lambda.powf(s)),
        };
        let run = AdmissibleSet::new(u0.clone(), lambda, m_for(lambda))
            .and_then(|set| iterate_t(&spec, &set, cfg, Some(&init)));
        match run {
            Ok(out) => {
                rows.push(SweepRow {
                    lambda,
                    sup_u: out.u.sup(),
                    sup_grad: gradient(&out.u).sup(),
                    iterations: out.report.iterations,
                    in_set: out.membership.member,
                    residual_sup: out.residual.details["residual_sup"],
                    error: None,
                });
                prev = Some((lambda, out.u));
            }
            Err(e) => rows.push(SweepRow {
                lambda,
                sup_u: f64::NAN,
                sup_grad: f64::NAN,
                iterations: 0,
                in_set: false,
                residual_sup: f64::NAN,
                error: Some(e.to_string()),
            }),
        }
    }
    rows
}

/// Sweep CSV: `lambda,sup_u,sup_grad,iterations,in_set,residual_sup`.
pub fn write_sweep<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda", "sup_u", "sup_grad", "iterations", "in_set", "residual_sup"])?;
    for r in rows {
        w.write_record([
            format!("{:.16e}", r.lambda),
            format!("{:.16e}", r.sup_u),
            format!("{:.16e}", r.sup_grad),
            r.iterations.to_string(),
            r.in_set.to_string(),
            format!("{:.16e}", r.residual_sup),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Iteration trace CSV:
/// `iteration,sup_diff,damping,margin_lower,margin_upper,margin_gradient`.
pub fn write_trace<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "sup_diff", "damping", "margin_lower", "margin_upper", "margin_gradient"])?;
    for r in rows {
        w.write_record([
            r.iteration.to_string(),
            format!("{:.16e}", r.sup_diff),
            format!("{:.16e}", r.damping),
            format!("{:.16e}", r.margins[0]),
            format!("{:.16e}", r.margins[1]),
            format!("{:.16e}", r.margins[2]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::discretization::Grid;
    use crate::singular::{solve_u0, EpsSchedule};

    fn u0(n: usize) -> Field {
        let grid = Arc::new(Grid::interval(0.0, 1.0, n).unwrap());
        solve_u0(grid, 2.0, 0.25, &EpsSchedule::default(), &CoreConfig::default()).unwrap().0
    }

    #[test]
    fn membership_edges() {
        let u0 = u0(63);
        let set = AdmissibleSet::new(u0.clone(), 0.1, 0.8).unwrap();
        let m = check_membership(&set.lower(), &set).unwrap();
        assert!(m.member);
        assert_eq!(m.margins[0], 0.0);
        assert!(!check_membership(&u0.scaled(1.6), &set).unwrap().member);
        let mid = u0.scaled(0.45);
        assert!(gradient(&mid).sup() <= 0.8);
        assert!(check_membership(&mid, &set).unwrap().member);
    }

    #[test]
    fn escape_below_floor() {
        let u0 = u0(31);
        let set = AdmissibleSet::new(u0.clone(), 0.1, 0.8).unwrap();
        let spec = ProblemSpec::singular(2.0, 0.25, 0.1);
        let err = apply_t(&spec, &u0.scaled(0.05), &set, &CoreConfig::default()).unwrap_err();
        assert!(matches!(err, Error::IterateEscape(_)));
    }

    #[test]
    fn scaled_start_is_fixed_without_convection() {
        let u0 = u0(127);
        let lambda = 0.05;
        let spec = ProblemSpec::singular(2.0, 0.25, lambda);
        let set = AdmissibleSet::new(u0.clone(), lambda, 1.0).unwrap();
        let start = u0.scaled(lambda.powf(spec.scaling_exponent()));
        let cfg = CoreConfig::default().with_tol(1e-8);
        let out = iterate_t(&spec, &set, &cfg, Some(&start)).unwrap();
        assert!(out.report.iterations <= 2, "{:?}", out.trace);
        assert!(out.u.sup_distance(&start) <= 1e-7 * start.sup());
    }

    #[test]
    fn sublinear_rejected() {
        let u0 = u0(31);
        let mut spec = ProblemSpec::singular(2.0, 0.25, 0.1);
        spec.convection.a = 1.0;
        spec.convection.r1 = 0.5;
        let set = AdmissibleSet::new(u0, 0.1, 0.8).unwrap();
        assert!(matches!(
            iterate_t(&spec, &set, &CoreConfig::default(), None),
            Err(Error::WrongRegime(_))
        ));
    }

    #[test]
    fn empty_sweep() {
        let u0 = u0(15);
        let spec = ProblemSpec::singular(2.0, 0.25, 0.1);
        assert!(lambda_sweep(&spec, &u0, &[], &|_| 1.0, &CoreConfig::default()).is_empty());
    }
}
