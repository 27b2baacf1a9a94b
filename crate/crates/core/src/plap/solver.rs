//! Damped Newton minimization of the discrete energy.

use std::sync::Arc;

use crate::discretization::{gradient, Field, Grid};
use crate::error::{Error, Result};

use super::banded::BandedSpd;
use super::operator::{energy_gradient_parts, energy_hessian, gradient_energy, Quadrature};
use super::{check_exponent, CoreConfig, SolveReport};

/// Solves `−Δ_p u = g` with zero boundary values, starting from the
/// rescaled `p = 2` solution.
pub fn solve_dirichlet(g: &Field, p: f64, cfg: &CoreConfig) -> Result<(Field, SolveReport)> {
    solve_dirichlet_from(g, p, cfg, None)
}

/// As [`solve_dirichlet`], from a caller-supplied initial iterate. Boundary
/// values of `init` are ignored.
pub fn solve_dirichlet_from(
    g: &Field,
    p: f64,
    cfg: &CoreConfig,
    init: Option<&Field>,
) -> Result<(Field, SolveReport)> {
    check_exponent(p)?;
    cfg.validate()?;
    if let Some(f) = init {
        g.check_grid(f)?;
    }
    let prob = Problem::new(g, p);
    let gscale = 1.0 + prob.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    if prob.rhs.iter().all(|&v| v == 0.0) {
        let u = Field::zeros(prob.grid.clone());
        let report = prob.report(&u, 0, 0.0, 0.0, true);
        return Ok((u, report));
    }

    let mut u = match init {
        Some(f) => prob.ray_minimizer(f.with_zero_boundary().into_values()),
        None => prob.initial_iterate(),
    };

    // Continuation in δ from the scale of |∇u|² down to delta_reg: the
    // Newton model of the near-degenerate density is only trusted close
    // to the minimizer. For p > 2 a final polish on the exact energy
    // follows; for p < 2 the density is not twice differentiable at
    // ∇u = 0, so δ = delta_reg is kept.
    let mut deltas = Vec::new();
    if p != 2.0 && cfg.delta_reg > 0.0 {
        let full = Field::from_raw(prob.grid.clone(), u.clone());
        let mut d = gradient(&full).sup().powi(2) * 1e-2;
        while d > cfg.delta_reg {
            deltas.push(d);
            d *= 0.1;
        }
        deltas.push(cfg.delta_reg);
    }
    if p >= 2.0 || cfg.delta_reg == 0.0 {
        deltas.push(0.0);
    }

    let mut iterations = 0;
    let mut outcome = Outcome::default();
    let last = deltas.len() - 1;
    for (k, &delta) in deltas.iter().enumerate() {
        let stage_tol = if k == last { cfg.tol } else { cfg.tol.max(1e-6) };
        let budget = cfg.max_iter - iterations;
        outcome = prob.newton(&mut u, delta, cfg, stage_tol, gscale, budget);
        iterations += outcome.iterations;
        if iterations >= cfg.max_iter && k < last {
            outcome.converged = false;
            break;
        }
    }

    let field = Field::from_raw(prob.grid.clone(), u);
    let delta = deltas[last];
    let report = prob.report(&field, iterations, outcome.residual, delta, outcome.converged);
    if outcome.converged {
        Ok((field, report))
    } else {
        Err(Error::NonConvergence {
            context: format!("Dirichlet solve at p = {p}"),
            report,
            best: Box::new(field),
        })
    }
}

#[derive(Default)]
struct Outcome {
    iterations: usize,
    residual: f64,
    converged: bool,
}

struct Problem {
    grid: Arc<Grid>,
    quad: Quadrature,
    p: f64,
    /// interior nodes in unknown order
    nodes: Vec<usize>,
    weights: Vec<f64>,
    rhs: Vec<f64>,
}

impl Problem {
    fn new(g: &Field, p: f64) -> Self {
        let grid = g.grid().clone();
        let quad = Quadrature::new(&grid);
        let nodes: Vec<usize> = grid.interior_nodes().collect();
        let weights = nodes.iter().map(|&i| grid.node_weight(i)).collect();
        let rhs = nodes.iter().map(|&i| g.values()[i]).collect();
        Self {
            grid,
            quad,
            p,
            nodes,
            weights,
            rhs,
        }
    }

    fn laplacian(&self) -> BandedSpd {
        let zero = vec![0.0; self.grid.node_count()];
        energy_hessian(&self.quad, &self.grid, &zero, 2.0, 0.0)
            .factor()
            .expect("the discrete Laplacian is positive definite")
    }

    fn scatter(&self, x: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.grid.node_count()];
        for (k, &i) in self.nodes.iter().enumerate() {
            u[i] = x[k];
        }
        u
    }

    /// `p = 2` solution scaled to the energy minimizer on its ray.
    fn initial_iterate(&self) -> Vec<f64> {
        let mut x: Vec<f64> = self.rhs.iter().zip(&self.weights).map(|(g, w)| g * w).collect();
        self.laplacian().solve(&mut x);
        let u = self.scatter(&x);
        if self.p == 2.0 {
            return u;
        }
        self.ray_minimizer(u)
    }

    /// Rescales `u` to minimize the unregularized energy over `c u, c > 0`,
    /// keeping the input when that does not lower the energy.
    fn ray_minimizer(&self, u: Vec<f64>) -> Vec<f64> {
        let src: f64 = self.nodes.iter().zip(&self.rhs).zip(&self.weights).map(|((&i, g), w)| u[i] * g * w).sum();
        let grad = self.p * gradient_energy(&self.quad, &self.grid, &u, self.p, 0.0);
        if !(src > 0.0 && grad > 0.0) {
            return u;
        }
        let c = (src / grad).powf(1.0 / (self.p - 1.0));
        let scaled: Vec<f64> = u.iter().map(|v| c * v).collect();
        if self.energy(&scaled, 0.0) < self.energy(&u, 0.0) {
            scaled
        } else {
            u
        }
    }

    fn energy(&self, u: &[f64], delta: f64) -> f64 {
        let src: f64 = self
            .nodes
            .iter()
            .zip(&self.rhs)
            .zip(&self.weights)
            .map(|((&i, g), w)| w * g * u[i])
            .sum();
        gradient_energy(&self.quad, &self.grid, u, self.p, delta) - src
    }

    /// Energy gradient on the unknowns, its strong-form sup norm, and the
    /// level below which that norm is rounding noise.
    fn residual(&self, u: &[f64], delta: f64) -> (Vec<f64>, f64, f64) {
        let (full, mag) = energy_gradient_parts(&self.quad, &self.grid, u, self.p, delta, true);
        let mut sup = 0.0f64;
        let mut noise = 0.0f64;
        let r = self
            .nodes
            .iter()
            .enumerate()
            .map(|(k, &i)| {
                let src = self.weights[k] * self.rhs[k];
                let r = full[i] - src;
                sup = sup.max((r / self.weights[k]).abs());
                noise = noise.max((mag[i] + src.abs()) / self.weights[k]);
                r
            })
            .collect();
        (r, sup, 64.0 * f64::EPSILON * noise)
    }

    fn newton_direction(&self, u: &[f64], r: &[f64], delta: f64) -> Option<Vec<f64>> {
        let hess = energy_hessian(&self.quad, &self.grid, u, self.p, delta);
        let scale = hess.diagonal_max();
        let mut shift = 0.0;
        for _ in 0..6 {
            let mut h = hess.clone();
            if shift > 0.0 {
                h.shift_diagonal(shift);
            }
            if let Ok(f) = h.factor() {
                let mut d: Vec<f64> = r.iter().map(|v| -v).collect();
                f.solve(&mut d);
                if d.iter().all(|v| v.is_finite()) {
                    return Some(d);
                }
            }
            shift = if shift == 0.0 { 1e-12 * scale } else { shift * 100.0 };
        }
        None
    }

    fn newton(
        &self,
        u: &mut Vec<f64>,
        delta: f64,
        cfg: &CoreConfig,
        tol: f64,
        gscale: f64,
        budget: usize,
    ) -> Outcome {
        let mut lap: Option<BandedSpd> = None;
        let (mut r, mut res, mut noise) = self.residual(u, delta);
        let mut e = self.energy(u, delta);
        for k in 0..budget {
            if res <= (tol * gscale).max(noise) {
                return Outcome {
                    iterations: k,
                    residual: res,
                    converged: true,
                };
            }
            let mut newton = true;
            let mut d = self.newton_direction(u, &r, delta);
            let slope = d.as_ref().map(|d| dot(&r, d)).unwrap_or(f64::NAN);
            if !(slope < 0.0) {
                // preconditioned steepest descent
                newton = false;
                let l = lap.get_or_insert_with(|| self.laplacian());
                let mut g: Vec<f64> = r.iter().map(|v| -v).collect();
                l.solve(&mut g);
                d = Some(g);
            }
            let d = d.unwrap();
            let slope = dot(&r, &d);

            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial = self.step(u, &d, t);
                let et = self.energy(&trial, delta);
                // near the minimizer energy differences drown in roundoff,
                // so a full step that lowers the residual is also taken
                let ok = et <= e + cfg.armijo * t * slope
                    || (t == 1.0 && self.residual(&trial, delta).1 < res);
                if ok {
                    *u = trial;
                    e = et;
                    (r, res, noise) = self.residual(u, delta);
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            let step_sup = t * d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !accepted {
                // no decrease possible: u is a minimizer up to roundoff
                return Outcome {
                    iterations: k + 1,
                    residual: res,
                    converged: newton && step_sup <= tol * sup(u).max(f64::MIN_POSITIVE),
                };
            }
            let u_sup = sup(u);
            if newton && t == 1.0 && step_sup <= tol * u_sup {
                return Outcome {
                    iterations: k + 1,
                    residual: res,
                    converged: true,
                };
            }
        }
        Outcome {
            iterations: budget,
            residual: res,
            converged: res <= (tol * gscale).max(noise),
        }
    }

    fn step(&self, u: &[f64], d: &[f64], t: f64) -> Vec<f64> {
        let mut out = u.to_vec();
        for (k, &i) in self.nodes.iter().enumerate() {
            out[i] += t * d[k];
        }
        out
    }

    fn report(&self, u: &Field, iterations: usize, residual: f64, delta: f64, converged: bool) -> SolveReport {
        SolveReport {
            iterations,
            final_residual_sup: residual,
            energy: self.energy(u.values(), delta),
            sup_norm: u.sup(),
            grad_sup_norm: gradient(u).sup(),
            converged,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup(u: &[f64]) -> f64 {
    u.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
