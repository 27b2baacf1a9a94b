//! Singular problems `−Δ_p u = λ u^{−α} + f(x, u, ∇u)` through the
//! regularized family `λ (|u| + ε)^{−α} + f`, solved by damped Picard
//! iteration and continued in `ε`.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discretization::{gradient, Field, Grid};
use crate::error::{Error, Result};
use crate::plap::{check_exponent, discrete_energy, solve_dirichlet_from, CoreConfig, SolveReport};

/// Default Picard damping `u ← (1 − ω) u + ω S(u)`.
pub const PICARD_DAMPING: f64 = 0.7;

/// Growth-bounded convection `f(x, t, ξ) = a max(t, 0)^{r1} + b |ξ|^{r2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvectionSpec {
    pub a: f64,
    pub b: f64,
    pub r1: f64,
    pub r2: f64,
}

impl ConvectionSpec {
    /// `f ≡ 0`.
    pub fn none() -> Self {
        Self {
            a: 0.0,
            b: 0.0,
            r1: 1.0,
            r2: 1.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.a == 0.0 && self.b == 0.0
    }

    pub fn eval(&self, t: f64, grad_norm: f64) -> f64 {
        let mut f = 0.0;
        if self.a != 0.0 {
            f += self.a * t.max(0.0).powf(self.r1);
        }
        if self.b != 0.0 {
            f += self.b * grad_norm.abs().powf(self.r2);
        }
        f
    }

    /// Nodal values of `f(·, v, ∇v)`; boundary entries are zero.
    pub fn field(&self, v: &Field) -> Field {
        let grid = v.grid().clone();
        let grad = if self.b != 0.0 {
            gradient(v).nodal_magnitude()
        } else {
            vec![0.0; grid.node_count()]
        };
        let values = (0..grid.node_count())
            .map(|i| if grid.is_boundary(i) { 0.0 } else { self.eval(v.values()[i], grad[i]) })
            .collect();
        Field::new(grid, values).expect("convection of a finite field is finite")
    }
}

/// `(p, α, λ, f)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub p: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub convection: ConvectionSpec,
}

impl ProblemSpec {
    /// Pure singular problem `−Δ_p u = λ u^{−α}`.
    pub fn singular(p: f64, alpha: f64, lambda: f64) -> Self {
        Self {
            p,
            alpha,
            lambda,
            convection: ConvectionSpec::none(),
        }
    }

    /// Checks the standing hypotheses. An exponent is only constrained when
    /// its coefficient is nonzero.
    pub fn validate(&self) -> Result<()> {
        check_exponent(self.p)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be positive, got {}", self.lambda)));
        }
        let c = &self.convection;
        for (name, coef, r) in [("a", c.a, c.r1), ("b", c.b, c.r2)] {
            if !(coef >= 0.0 && coef.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be >= 0, got {coef}")));
            }
            let rname = if name == "a" { "r1" } else { "r2" };
            if coef > 0.0 {
                if !(r > 0.0 && r.is_finite()) {
                    return Err(Error::InvalidInput(format!("{rname} must be positive, got {r}")));
                }
                if r == self.p - 1.0 {
                    return Err(Error::InvalidInput(format!(
                        "{rname} = p - 1 = {r} is an excluded exponent"
                    )));
                }
            }
        }
        Ok(())
    }

    /// True when every active convection exponent is below `p − 1`.
    pub fn is_sublinear(&self) -> bool {
        let c = &self.convection;
        (c.a == 0.0 || c.r1 < self.p - 1.0) && (c.b == 0.0 || c.r2 < self.p - 1.0)
    }

    /// True when every active convection exponent is above `p − 1`.
    pub fn is_supercritical(&self) -> bool {
        let c = &self.convection;
        (c.a == 0.0 || c.r1 > self.p - 1.0) && (c.b == 0.0 || c.r2 > self.p - 1.0)
    }

    /// Scaling exponent `1/(p − 1 + α)` of the pure singular problem:
    /// `λ^{1/(p−1+α)} u₀` solves `−Δ_p w = λ w^{−α}`.
    pub fn scaling_exponent(&self) -> f64 {
        1.0 / (self.p - 1.0 + self.alpha)
    }
}

/// Geometric regularization schedule `ε_k = eps0 · factor^k` down to `floor`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsSchedule {
    pub eps0: f64,
    pub factor: f64,
    pub floor: f64,
    /// Warm-start each stage from the previous solution.
    pub transfer: bool,
}

impl Default for EpsSchedule {
    fn default() -> Self {
        Self {
            eps0: 1.0,
            factor: 0.1,
            floor: 1e-11,
            transfer: true,
        }
    }
}

impl EpsSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.floor > 0.0 && self.eps0 > self.floor && self.eps0.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "schedule needs eps0 > floor > 0, got eps0 = {}, floor = {}",
                self.eps0, self.floor
            )));
        }
        if !(self.factor > 0.0 && self.factor < 1.0) {
            return Err(Error::InvalidInput(format!("factor must lie in (0,1), got {}", self.factor)));
        }
        Ok(())
    }

    /// Stage values, ending exactly at `floor`.
    pub fn stages(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0;
        loop {
            let e = self.eps0 * self.factor.powi(k);
            if e <= self.floor * (1.0 + 1e-9) {
                break;
            }
            out.push(e);
            k += 1;
        }
        out.push(self.floor);
        out
    }

    /// Same schedule with every `ε` multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            eps0: self.eps0 * c,
            floor: self.floor * c,
            ..*self
        }
    }
}

/// One row of the stage trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub eps: f64,
    pub iterations: usize,
    pub residual_sup: f64,
    pub sup_norm: f64,
    pub grad_sup_norm: f64,
    /// Sup distance to the previous stage's solution.
    pub increment: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationReport {
    /// Report of the final stage; `iterations` counts all stages.
    pub report: SolveReport,
    pub stages: Vec<StageRecord>,
    /// Sup distance between the last two stage solutions.
    pub cauchy_increment: f64,
    /// `10 · tol · ‖u‖∞`.
    pub cauchy_threshold: f64,
    /// Increments of the last three stages strictly decrease.
    pub cauchy_decreasing: bool,
    /// `min u / d_Ω` over interior nodes.
    pub k1: f64,
    /// Stage solutions nondecreasing nodewise as `ε` decreases (slack 1e-10).
    pub eps_monotone: bool,
}

impl ContinuationReport {
    pub fn cauchy_ok(&self) -> bool {
        self.cauchy_increment <= self.cauchy_threshold
    }
}

/// Nodal right-hand side `λ (max(|v|, guard) + ε)^{−α} + f(·, v, ∇v)`.
pub(crate) fn singular_rhs(spec: &ProblemSpec, v: &Field, eps: f64, guard: Option<&[f64]>) -> Field {
    let grid = v.grid().clone();
    let conv = spec.convection.field(v);
    let values = (0..grid.node_count())
        .map(|i| {
            if grid.is_boundary(i) {
                return 0.0;
            }
            let mut s = v.values()[i].abs();
            if let Some(g) = guard {
                s = s.max(g[i]);
            }
            spec.lambda * (s + eps).powf(-spec.alpha) + conv.values()[i]
        })
        .collect();
    Field::from_raw(grid, values)
}

/// `min u/d` over interior nodes.
pub fn distance_ratio_min(u: &Field) -> f64 {
    let grid = u.grid();
    grid.interior_nodes()
        .map(|i| u.values()[i] / grid.dist()[i])
        .fold(f64::INFINITY, f64::min)
}

fn inner_config(cfg: &CoreConfig) -> CoreConfig {
    cfg.with_tol((cfg.tol * 0.1).max(1e-14))
}

struct Picard<'a> {
    spec: &'a ProblemSpec,
    cfg: &'a CoreConfig,
    inner: CoreConfig,
    guard: Option<Vec<f64>>,
}

impl<'a> Picard<'a> {
    fn new(spec: &'a ProblemSpec, cfg: &'a CoreConfig) -> Self {
        Self {
            spec,
            cfg,
            inner: inner_config(cfg),
            guard: None,
        }
    }

    fn apply(&self, v: &Field, eps: f64) -> Result<(Field, SolveReport)> {
        let rhs = singular_rhs(self.spec, v, eps, self.guard.as_deref());
        let init = if v.interior_min() > 0.0 { Some(v) } else { None };
        let (u, mut report) = solve_dirichlet_from(&rhs, self.spec.p, &self.inner, init)?;
        report.energy = discrete_energy(&u, &rhs, self.spec.p, 0.0);
        Ok((u, report))
    }

    /// Guard `10⁻³ k d_Ω` with `k = min u/d` of the first positive iterate.
    fn set_guard(&mut self, u: &Field) {
        if self.guard.is_some() {
            return;
        }
        let k = distance_ratio_min(u);
        if k > 0.0 && k.is_finite() {
            let d = u.grid().dist();
            self.guard = Some(d.iter().map(|d| 1e-3 * k * d).collect());
        }
    }

    fn solve(&mut self, eps: f64, init: &Field) -> Result<(Field, SolveReport)> {
        let mut v = init.with_zero_boundary();
        let mut omega = PICARD_DAMPING;
        let mut prev = f64::INFINITY;
        let mut scale = v.sup();
        let mut last = None;
        for k in 0..self.cfg.max_iter {
            let (u, report) = self.apply(&v, eps)?;
            self.set_guard(&u);
            if k == 0 {
                scale = scale.max(u.sup());
            }
            let limit = 1e6 * scale;
            if u.sup() > limit {
                return Err(Error::Divergence {
                    context: format!("Picard iteration at eps = {eps:e}"),
                    sup_norm: u.sup(),
                    limit,
                });
            }
            let res = u.sup_distance(&v);
            if res <= self.cfg.tol * (1.0 + v.sup()) {
                let report = SolveReport {
                    iterations: k + 1,
                    final_residual_sup: res,
                    energy: report.energy,
                    sup_norm: u.sup(),
                    grad_sup_norm: gradient(&u).sup(),
                    converged: true,
                };
                return Ok((u, report));
            }
            if res > prev {
                omega = (omega * 0.5).max(1.0 / 64.0);
            }
            prev = res;
            v = v.scaled(1.0 - omega).add_scaled(omega, &u);
            last = Some((res, report.energy));
        }
        let (res, energy) = last.unwrap_or((f64::NAN, f64::NAN));
        let report = SolveReport {
            iterations: self.cfg.max_iter,
            final_residual_sup: res,
            energy,
            sup_norm: v.sup(),
            grad_sup_norm: gradient(&v).sup(),
            converged: false,
        };
        Err(Error::NonConvergence {
            context: format!("Picard iteration at eps = {eps:e}"),
            report,
            best: Box::new(v),
        })
    }
}

/// Solves the regularized problem `−Δ_p u = λ (|u| + ε)^{−α} + f(x, u, ∇u)`
/// by damped Picard iteration from `init`.
pub fn solve_auxiliary(
    spec: &ProblemSpec,
    eps: f64,
    init: &Field,
    cfg: &CoreConfig,
) -> Result<(Field, SolveReport)> {
    spec.validate()?;
    cfg.validate()?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    Picard::new(spec, cfg).solve(eps, init)
}

/// Runs the `ε` continuation for any spec, without regime checks.
pub fn continuation(
    grid: Arc<Grid>,
    spec: &ProblemSpec,
    sched: &EpsSchedule,
    cfg: &CoreConfig,
) -> Result<(Field, ContinuationReport)> {
    spec.validate()?;
    sched.validate()?;
    cfg.validate()?;
    let mut picard = Picard::new(spec, cfg);
    let zero = Field::zeros(grid.clone());
    let mut u = zero.clone();
    let mut stages = Vec::new();
    let mut iterations = 0;
    let mut eps_monotone = true;
    let mut report = None;
    for (k, &eps) in sched.stages().iter().enumerate() {
        let init = if sched.transfer { &u } else { &zero };
        let (next, r) = picard.solve(eps, init)?;
        let increment = if k == 0 { f64::NAN } else { next.sup_distance(&u) };
        if k > 0 {
            eps_monotone &= next.values().iter().zip(u.values()).all(|(a, b)| *a >= b - 1e-10);
        }
        stages.push(StageRecord {
            eps,
            iterations: r.iterations,
            residual_sup: r.final_residual_sup,
            sup_norm: r.sup_norm,
            grad_sup_norm: r.grad_sup_norm,
            increment,
        });
        iterations += r.iterations;
        report = Some(r);
        u = next;
    }
    let mut report = report.expect("schedule has at least one stage");
    report.iterations = iterations;
    let n = stages.len();
    let cauchy_increment = stages[n - 1].increment;
    let cauchy_decreasing = n >= 4
        && stages[n - 3].increment > stages[n - 2].increment
        && stages[n - 2].increment > stages[n - 1].increment;
    let out = ContinuationReport {
        report,
        cauchy_increment,
        cauchy_threshold: 10.0 * cfg.tol * u.sup(),
        cauchy_decreasing,
        k1: distance_ratio_min(&u),
        eps_monotone,
        stages,
    };
    Ok((u, out))
}

/// Singular torsion `−Δ_p u₀ = u₀^{−α}` at the schedule's floor.
pub fn solve_u0(
    grid: Arc<Grid>,
    p: f64,
    alpha: f64,
    sched: &EpsSchedule,
    cfg: &CoreConfig,
) -> Result<(Field, ContinuationReport)> {
    continuation(grid, &ProblemSpec::singular(p, alpha, 1.0), sched, cfg)
}

/// Sublinear problem: every active convection exponent below `p − 1`.
pub fn solve_sublinear(
    grid: Arc<Grid>,
    spec: &ProblemSpec,
    sched: &EpsSchedule,
    cfg: &CoreConfig,
) -> Result<(Field, ContinuationReport)> {
    spec.validate()?;
    if !spec.is_sublinear() {
        return Err(Error::WrongRegime(format!(
            "sublinear solver needs r1, r2 < p - 1 = {}, got r1 = {}, r2 = {}",
            spec.p - 1.0,
            spec.convection.r1,
            spec.convection.r2
        )));
    }
    continuation(grid, spec, sched, cfg)
}

/// Stage trace CSV: `eps,iterations,residual_sup,sup_norm,grad_sup_norm`.
pub fn write_stage_trace<W: Write>(stages: &[StageRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["eps", "iterations", "residual_sup", "sup_norm", "grad_sup_norm"])?;
    for s in stages {
        w.write_record([
            format!("{:.16e}", s.eps),
            s.iterations.to_string(),
            format!("{:.16e}", s.residual_sup),
            format!("{:.16e}", s.sup_norm),
            format!("{:.16e}", s.grad_sup_norm),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Arc<Grid> {
        Arc::new(Grid::interval(0.0, 1.0, n).unwrap())
    }

    #[test]
    fn schedule_stages() {
        let s = EpsSchedule {
            eps0: 1.0,
            factor: 0.1,
            floor: 1e-8,
            transfer: true,
        };
        let st = s.stages();
        assert_eq!(st.len(), 9);
        assert_eq!(*st.last().unwrap(), 1e-8);
        assert!(EpsSchedule { floor: 2.0, ..s }.validate().is_err());
        assert!(EpsSchedule { factor: 1.0, ..s }.validate().is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(ProblemSpec::singular(2.0, 0.5, 1.0).validate().is_ok());
        assert!(ProblemSpec::singular(2.0, 1.5, 1.0).validate().is_err());
        assert!(ProblemSpec::singular(2.0, 0.5, 0.0).validate().is_err());
        let mut s = ProblemSpec::singular(2.0, 0.5, 1.0);
        s.convection = ConvectionSpec {
            a: 1.0,
            b: 0.0,
            r1: 1.0,
            r2: 3.0,
        };
        assert!(s.validate().is_err());
        s.convection.r1 = 0.5;
        assert!(s.validate().is_ok());
        assert!(s.is_sublinear());
        assert!(!s.is_supercritical());
    }

    #[test]
    fn convection_bound() {
        let c = ConvectionSpec {
            a: 0.3,
            b: 0.2,
            r1: 0.5,
            r2: 2.5,
        };
        for t in [-2.0, 0.0, 0.7, 3.0] {
            for xi in [0.0, 0.4, 2.0] {
                let f: f64 = c.eval(t, xi);
                assert!(f >= 0.0);
                assert!(f <= c.a * f64::abs(t).powf(c.r1) + c.b * f64::powf(xi, c.r2) + 1e-15);
            }
        }
    }

    #[test]
    fn large_eps_linearizes() {
        let spec = ProblemSpec::singular(2.0, 0.5, 1.0);
        let g = unit(255);
        let (u, r) = solve_auxiliary(&spec, 1e6, &Field::zeros(g), &CoreConfig::default()).unwrap();
        assert!(r.converged);
        assert!((u.sup() / 1.25e-4 - 1.0).abs() < 0.05);
    }

    #[test]
    fn zero_init_becomes_positive() {
        let spec = ProblemSpec::singular(3.0, 0.3, 2.0);
        let (u, _) = solve_auxiliary(&spec, 0.1, &Field::zeros(unit(63)), &CoreConfig::default()).unwrap();
        assert!(u.interior_min() > 0.0);
    }

    #[test]
    fn sublinear_rejects_supercritical() {
        let mut s = ProblemSpec::singular(2.0, 0.5, 1.0);
        s.convection = ConvectionSpec {
            a: 0.1,
            b: 0.0,
            r1: 2.0,
            r2: 1.0,
        };
        let r = solve_sublinear(unit(15), &s, &EpsSchedule::default(), &CoreConfig::default());
        assert!(matches!(r, Err(Error::WrongRegime(_))));
    }

    #[test]
    fn stage_trace_header() {
        let rec = StageRecord {
            eps: 0.1,
            iterations: 4,
            residual_sup: 1e-11,
            sup_norm: 0.3,
            grad_sup_norm: 1.2,
            increment: f64::NAN,
        };
        let mut buf = Vec::new();
        write_stage_trace(&[rec], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("eps,iterations,residual_sup,sup_norm,grad_sup_norm\n"));
        assert_eq!(text.lines().count(), 2);
    }
}
