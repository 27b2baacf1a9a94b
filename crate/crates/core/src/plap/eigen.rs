//! First eigenpair of the p-Laplacian by inverse iteration.

use std::sync::Arc;

use crate::discretization::{Field, Grid};
use crate::error::{Error, Result};

use super::operator::gradient_p_sum;
use super::{check_exponent, solve_dirichlet, solve_dirichlet_from, CoreConfig, SolveReport};

/// `(λ₁, φ₁)` with `φ₁ > 0` inside and `‖φ₁‖∞ = 1`.
#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub lambda1: f64,
    pub phi1: Field,
    pub iterations: usize,
}

/// Discrete Rayleigh quotient `Σ w_q |∇u|^p / Σ w_i |u_i|^p`, using the
/// same quadrature as the energy. For a discrete eigenfunction it returns
/// the eigenvalue exactly.
pub fn rayleigh_quotient(u: &Field, p: f64) -> f64 {
    let grid = u.grid();
    let num = gradient_p_sum(grid, u.values(), p);
    let den: f64 = grid
        .interior_nodes()
        .map(|i| grid.node_weight(i) * u.values()[i].abs().powf(p))
        .sum();
    num / den
}

/// Normalized inverse iteration started from the torsion function.
pub fn solve_eigenpair(grid: Arc<Grid>, p: f64, cfg: &CoreConfig) -> Result<Eigenpair> {
    check_exponent(p)?;
    cfg.validate()?;
    let one = Field::dirichlet_from_fn(grid.clone(), |_| 1.0);
    let (torsion, _) = solve_dirichlet(&one, p, cfg)?;
    let mut phi = torsion.scaled(1.0 / torsion.sup());
    let mut lambda = rayleigh_quotient(&phi, p);
    for k in 1..=cfg.max_iter {
        let rhs = phi.map(|v| v.max(0.0).powf(p - 1.0));
        // exact for an eigenfunction: −Δ_p(cφ) = φ^{p−1} at c = λ^{−1/(p−1)}
        let init = phi.scaled(lambda.powf(-1.0 / (p - 1.0)));
        let (u, _) = solve_dirichlet_from(&rhs, p, cfg, Some(&init))?;
        phi = u.scaled(1.0 / u.sup());
        let next = rayleigh_quotient(&phi, p);
        let change = (next - lambda).abs();
        lambda = next;
        if change <= cfg.tol * lambda {
            return Ok(Eigenpair {
                lambda1: lambda,
                phi1: phi,
                iterations: k,
            });
        }
    }
    Err(Error::NonConvergence {
        context: format!("inverse iteration at p = {p}"),
        report: SolveReport {
            iterations: cfg.max_iter,
            final_residual_sup: f64::NAN,
            energy: f64::NAN,
            sup_norm: phi.sup(),
            grad_sup_norm: f64::NAN,
            converged: false,
        },
        best: Box::new(phi),
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn laplacian_on_unit_interval() {
        let g = Arc::new(Grid::interval(0.0, 1.0, 511).unwrap());
        let e = solve_eigenpair(g.clone(), 2.0, &CoreConfig::default()).unwrap();
        assert!((e.lambda1 / (PI * PI) - 1.0).abs() < 5e-3);
        assert_eq!(e.phi1.sup(), 1.0);
        let sine = Field::from_fn(g, |x| (PI * x[0]).sin());
        assert!(e.phi1.sup_distance(&sine) < 1e-2);
    }

    #[test]
    fn domain_scaling() {
        let cfg = CoreConfig::default();
        let a = solve_eigenpair(Arc::new(Grid::interval(0.0, 1.0, 255).unwrap()), 2.0, &cfg).unwrap();
        let b = solve_eigenpair(Arc::new(Grid::interval(0.0, 2.0, 255).unwrap()), 2.0, &cfg).unwrap();
        assert!((b.lambda1 * 4.0 / a.lambda1 - 1.0).abs() < 1e-2);
    }

    #[test]
    fn nonlinear_eigenfunction_is_positive_and_normalized() {
        let g = Arc::new(Grid::rectangle((0.0, 1.0), (0.0, 1.0), 15, 15).unwrap());
        for p in [1.5, 3.0] {
            let e = solve_eigenpair(g.clone(), p, &CoreConfig::default()).unwrap();
            assert!(e.phi1.interior_min() > 0.0);
            assert_eq!(e.phi1.sup(), 1.0);
            assert!((rayleigh_quotient(&e.phi1, p) - e.lambda1).abs() <= 1e-9 * e.lambda1);
        }
    }
}
