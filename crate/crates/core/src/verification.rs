//! Checks of the inequalities behind the existence argument: comparison,
//! sub/super-solution defects, distance envelopes, scaling and residuals.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discretization::{Field, Grid};
use crate::error::{Error, Result};
use crate::plap::{apply_plap, CoreConfig};
use crate::singular::{continuation, solve_u0, EpsSchedule, ProblemSpec};

/// Absolute margin tolerance used when a check does not state one.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Relative residual tolerance of [`check_residual`].
pub const RESIDUAL_TOL: f64 = 1e-6;

/// Outcome of one check. `passed` holds exactly when
/// `worst_margin >= -details["tolerance"]`, except for the distance check,
/// which needs a strictly positive margin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub worst_margin: f64,
    pub worst_node: Option<usize>,
    pub details: BTreeMap<String, f64>,
}

impl CheckResult {
    pub fn new(name: &str, worst_margin: f64, worst_node: Option<usize>, tolerance: f64) -> Self {
        let mut details = BTreeMap::new();
        details.insert("tolerance".to_string(), tolerance);
        Self {
            name: name.to_string(),
            passed: worst_margin >= -tolerance,
            worst_margin,
            worst_node,
            details,
        }
    }

    pub fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }
}

/// Fixed-width text table, one row per check.
pub fn summary_table(checks: &[CheckResult]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(4).max(5);
    let mut out = format!("{:<width$}  {:<6}  {:>13}  {:>10}\n", "check", "result", "worst_margin", "node");
    for c in checks {
        let node = c.worst_node.map(|n| n.to_string()).unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<width$}  {:<6}  {:>13.5e}  {:>10}\n",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.worst_margin,
            node
        ));
    }
    out
}

/// Interior nodes at distance at least `2h` from the boundary.
fn far_interior(grid: &Grid) -> Vec<usize> {
    let cut = 2.0 * grid.h_max() * (1.0 - 1e-9);
    grid.interior_nodes().filter(|&i| grid.dist()[i] >= cut).collect()
}

/// `apply_plap(u) − λ u^{−α} − f(·, u, ∇u)` at the given nodes.
fn defect(spec: &ProblemSpec, u: &Field, nodes: &[usize]) -> Vec<f64> {
    let op = apply_plap(u, spec.p, 0.0);
    let conv = spec.convection.field(u);
    nodes
        .iter()
        .map(|&i| {
            let v = u.values()[i];
            op.values()[i] - spec.lambda * v.powf(-spec.alpha) - conv.values()[i]
        })
        .collect()
}

/// Checks `u ≥ v − tol` in the interior. The comparison hypotheses are
/// recorded, not enforced: `fu = −Δ_p u − f(u) ≥ −tol`,
/// `fv = −Δ_p v − f(v) ≤ tol` and `u ≥ v` on the boundary.
pub fn check_comparison(u: &Field, v: &Field, fu: &Field, fv: &Field, tol: f64) -> Result<CheckResult> {
    for other in [v, fu, fv] {
        if !u.same_grid(other) {
            return Err(Error::GridMismatch);
        }
    }
    let grid = u.grid();
    let (mut worst, mut node) = (f64::INFINITY, None);
    for i in grid.interior_nodes() {
        let m = u.values()[i] - v.values()[i];
        if m < worst {
            worst = m;
            node = Some(i);
        }
    }
    let fu_min = grid.interior_nodes().map(|i| fu.values()[i]).fold(f64::INFINITY, f64::min);
    let fv_max = grid.interior_nodes().map(|i| fv.values()[i]).fold(f64::NEG_INFINITY, f64::max);
    let boundary_min = (0..grid.node_count())
        .filter(|&i| grid.is_boundary(i))
        .map(|i| u.values()[i] - v.values()[i])
        .fold(f64::INFINITY, f64::min);
    let hypotheses = fu_min >= -tol && fv_max <= tol && boundary_min >= -tol;
    Ok(CheckResult::new("comparison", worst, node, tol)
        .detail("super_defect_min", fu_min)
        .detail("sub_defect_max", fv_max)
        .detail("boundary_margin", boundary_min)
        .detail("hypotheses_hold", f64::from(u8::from(hypotheses))))
}

/// Residual of the full equation with the singular term unregularized, over
/// interior nodes with `d_Ω ≥ 2h`. The margin is the negative relative
/// residual `−sup|r| / (λ min(u)^{−α})`.
pub fn check_residual(spec: &ProblemSpec, u: &Field) -> Result<CheckResult> {
    check_residual_with(spec, u, RESIDUAL_TOL)
}

pub fn check_residual_with(spec: &ProblemSpec, u: &Field, rel_tol: f64) -> Result<CheckResult> {
    spec.validate()?;
    let grid = u.grid();
    if let Some(i) = grid.interior_nodes().find(|&i| !(u.values()[i] > 0.0)) {
        return Err(Error::InvalidCandidate(format!(
            "u = {} at interior node {i}; the singular term needs u > 0",
            u.values()[i]
        )));
    }
    let nodes = far_interior(grid);
    if nodes.is_empty() {
        return Err(Error::InvalidInput("grid has no nodes with dist >= 2h".into()));
    }
    let r = defect(spec, u, &nodes);
    let (mut sup, mut node, mut l2) = (0.0f64, None, 0.0);
    for (k, &i) in nodes.iter().enumerate() {
        if r[k].abs() > sup || node.is_none() {
            sup = sup.max(r[k].abs());
            node = Some(i);
        }
        l2 += grid.node_weight(i) * r[k] * r[k];
    }
    let u_min = nodes.iter().map(|&i| u.values()[i]).fold(f64::INFINITY, f64::min);
    let scale = spec.lambda * u_min.powf(-spec.alpha);
    let dist = grid.dist();
    let surrogate = grid
        .interior_nodes()
        .map(|i| spec.lambda * u.values()[i].powf(-spec.alpha) * dist[i].powf(spec.alpha))
        .fold(0.0, f64::max);
    Ok(CheckResult::new("residual", -sup / scale, node, rel_tol)
        .detail("residual_sup", sup)
        .detail("residual_l2", l2.sqrt())
        .detail("scale", scale)
        .detail("singular_times_dist_alpha_max", surrogate)
        .detail("checked_nodes", nodes.len() as f64))
}

/// Best constants `c ≤ u/d_Ω ≤ K` over interior nodes; passes when `c > 0`.
pub fn check_distance_bounds(u: &Field) -> (f64, f64, CheckResult) {
    let grid = u.grid();
    let (mut c, mut k, mut node) = (f64::INFINITY, 0.0f64, None);
    for i in grid.interior_nodes() {
        let ratio = u.values()[i] / grid.dist()[i];
        if ratio < c {
            c = ratio;
            node = Some(i);
        }
        k = k.max(ratio);
    }
    let mut check = CheckResult::new("distance_bounds", c, node, 0.0)
        .detail("c_best", c)
        .detail("K_best", k);
    check.passed = c > 0.0;
    (c, k, check)
}

/// Which inequality [`check_supersolution`] tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// `−Δ_p u ≤ λ u^{−α} + f`, `u ≤ 0` on the boundary.
    Sub,
    /// `−Δ_p u ≥ λ u^{−α} + f`, `u ≥ 0` on the boundary.
    Super,
}

/// Nodewise sign of the defect `−Δ_p u − λ u^{−α} − f` on interior nodes
/// with `d_Ω ≥ 2h`, plus the boundary sign condition.
pub fn check_supersolution(u: &Field, spec: &ProblemSpec, side: Side, tol: f64) -> Result<CheckResult> {
    spec.validate()?;
    let grid = u.grid();
    let nodes = far_interior(grid);
    if let Some(&i) = nodes.iter().find(|&&i| !(u.values()[i] > 0.0)) {
        return Err(Error::InvalidCandidate(format!("u = {} at node {i}", u.values()[i])));
    }
    let sign = match side {
        Side::Sub => -1.0,
        Side::Super => 1.0,
    };
    let d = defect(spec, u, &nodes);
    let (mut worst, mut node) = (f64::INFINITY, None);
    for (k, &i) in nodes.iter().enumerate() {
        let m = sign * d[k];
        if m < worst {
            worst = m;
            node = Some(i);
        }
    }
    let boundary = (0..grid.node_count())
        .filter(|&i| grid.is_boundary(i))
        .map(|i| sign * u.values()[i])
        .fold(f64::INFINITY, f64::min);
    let name = match side {
        Side::Sub => "subsolution",
        Side::Super => "supersolution",
    };
    let mut check = CheckResult::new(name, worst, node, tol).detail("boundary_margin", boundary);
    check.passed &= boundary >= -tol;
    Ok(check)
}

/// Solves `−Δ_p w = λ w^{−α}` directly and compares it with
/// `λ^{1/(p−1+α)} u₀`. The direct solve runs the schedule and the energy
/// regularization rescaled by `c = λ^{1/(p−1+α)}`, under which the discrete
/// problems are exactly equivalent, so any mismatch is solver error. The
/// alternative exponent `1/(p−1−α)` is reported alongside.
pub fn check_scaling(
    grid: Arc<Grid>,
    p: f64,
    alpha: f64,
    lambda: f64,
    sched: &EpsSchedule,
    cfg: &CoreConfig,
) -> Result<CheckResult> {
    let spec = ProblemSpec::singular(p, alpha, lambda);
    spec.validate()?;
    let tight = cfg.with_tol((cfg.tol * 0.01).max(1e-14));
    let (u0, _) = solve_u0(grid.clone(), p, alpha, sched, &tight)?;
    check_scaling_against(&u0, &spec, sched, cfg)
}

/// As [`check_scaling`] with a precomputed `u₀` (solved on `sched`).
pub fn check_scaling_against(
    u0: &Field,
    spec: &ProblemSpec,
    sched: &EpsSchedule,
    cfg: &CoreConfig,
) -> Result<CheckResult> {
    let (p, alpha, lambda) = (spec.p, spec.alpha, spec.lambda);
    let c = lambda.powf(1.0 / (p - 1.0 + alpha));
    let tight = CoreConfig {
        delta_reg: cfg.delta_reg * c * c,
        ..cfg.with_tol((cfg.tol * 0.01).max(1e-14))
    };
    let (w, _) = continuation(u0.grid().clone(), spec, &sched.scaled(c), &tight)?;
    let w_sup = w.sup();
    let mismatch = w.sup_distance(&u0.scaled(c)) / w_sup;

    let denom = p - 1.0 - alpha;
    let c_alt = if denom == 0.0 {
        if lambda == 1.0 { 1.0 } else { f64::INFINITY }
    } else {
        lambda.powf(1.0 / denom)
    };
    let mismatch_alt = if c_alt.is_finite() {
        w.sup_distance(&u0.scaled(c_alt)) / w_sup
    } else {
        f64::INFINITY
    };
    Ok(CheckResult::new("scaling", -mismatch, None, 10.0 * cfg.tol)
        .detail("lambda", lambda)
        .detail("factor", c)
        .detail("relative_mismatch", mismatch)
        .detail("alternative_factor", c_alt)
        .detail("alternative_relative_mismatch", mismatch_alt)
        .detail("w_sup", w_sup))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plap::solve_dirichlet;

    fn unit(n: usize) -> Arc<Grid> {
        Arc::new(Grid::interval(0.0, 1.0, n).unwrap())
    }

    #[test]
    fn comparison_of_equal_fields() {
        let g = unit(15);
        let u = Field::dirichlet_from_fn(g.clone(), |x| x[0] * (1.0 - x[0]));
        let z = Field::zeros(g);
        let c = check_comparison(&u, &u, &z, &z, DEFAULT_TOL).unwrap();
        assert!(c.passed);
        assert_eq!(c.worst_margin, 0.0);
    }

    #[test]
    fn comparison_rejects_mismatched_grids() {
        let a = Field::zeros(unit(15));
        let b = Field::zeros(unit(16));
        assert!(matches!(check_comparison(&a, &b, &a, &a, 0.0), Err(Error::GridMismatch)));
    }

    #[test]
    fn linear_torsion_comparison() {
        let g = unit(127);
        let cfg = CoreConfig::default();
        let (u, _) = solve_dirichlet(&Field::dirichlet_from_fn(g.clone(), |_| 2.0), 2.0, &cfg).unwrap();
        let (v, _) = solve_dirichlet(&Field::dirichlet_from_fn(g.clone(), |_| 1.0), 2.0, &cfg).unwrap();
        assert!(u.sup_distance(&v.scaled(2.0)) < 1e-12);
        let z = Field::zeros(g);
        assert!(check_comparison(&u, &v, &z, &z, DEFAULT_TOL).unwrap().passed);
        assert!(!check_comparison(&v, &u, &z, &z, DEFAULT_TOL).unwrap().passed);
    }

    #[test]
    fn distance_bounds_of_torsion_and_distance() {
        let g = unit(255);
        let u = Field::dirichlet_from_fn(g.clone(), |x| x[0] * (1.0 - x[0]) / 2.0);
        let (c, k, check) = check_distance_bounds(&u);
        assert!(check.passed);
        // u/d = (1 − x)/2 on x ≤ 1/2
        assert!((c - 0.25).abs() < 1e-12);
        assert!((k - 0.5).abs() < 3e-3);
        let d = Field::new(g.clone(), g.dist().to_vec()).unwrap();
        let (c, k, _) = check_distance_bounds(&d);
        assert_eq!((c, k), (1.0, 1.0));
    }

    #[test]
    fn constant_interior_residual() {
        let g = unit(63);
        let u = Field::dirichlet_from_fn(g, |_| 1.0);
        let spec = ProblemSpec::singular(2.0, 0.5, 1.0);
        let r = check_residual(&spec, &u).unwrap();
        assert!((r.details["residual_sup"] - 1.0).abs() < 1e-12);
        assert!(!r.passed);
    }

    #[test]
    fn residual_rejects_nonpositive() {
        let u = Field::zeros(unit(15));
        let spec = ProblemSpec::singular(2.0, 0.5, 1.0);
        assert!(matches!(check_residual(&spec, &u), Err(Error::InvalidCandidate(_))));
    }

    #[test]
    fn scaling_at_unit_lambda_and_alternative_exponent() {
        let g = unit(63);
        let cfg = CoreConfig::default();
        let sched = EpsSchedule::default();
        let r = check_scaling(g.clone(), 2.0, 0.5, 1.0, &sched, &cfg).unwrap();
        assert!(r.passed);
        assert_eq!(r.details["alternative_factor"], 1.0);
        let r = check_scaling(g, 2.0, 0.5, 16.0, &sched, &cfg).unwrap();
        assert!(r.passed, "{r:?}");
        assert!((r.details["factor"] - 16f64.powf(2.0 / 3.0)).abs() < 1e-12);
        assert_eq!(r.details["alternative_factor"], 256.0);
        assert!(r.details["alternative_relative_mismatch"] > 10.0);
    }

    #[test]
    fn table_lists_every_check() {
        let (_, _, c) = check_distance_bounds(&Field::dirichlet_from_fn(unit(7), |_| 1.0));
        let t = summary_table(&[c.clone(), c]);
        assert_eq!(t.lines().count(), 3);
        assert!(t.contains("distance_bounds"));
    }
}
