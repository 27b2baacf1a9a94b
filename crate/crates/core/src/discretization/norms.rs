use crate::error::{Error, Result};

use super::field::{gradient, Field};

/// Which norm [`norm`] evaluates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormKind {
    Sup,
    Lp(f64),
    /// `‖∇u‖_p` with the midpoint rule on cell-centered gradients.
    W1pSeminorm(f64),
}

pub fn norm(u: &Field, kind: NormKind) -> Result<f64> {
    match kind {
        NormKind::Sup => Ok(u.sup()),
        NormKind::Lp(p) => {
            check_exponent(p)?;
            Ok(lp_norm(u, p))
        }
        NormKind::W1pSeminorm(p) => {
            check_exponent(p)?;
            let grad = gradient(u);
            let grid = u.grid();
            let s: f64 = (0..grid.cell_count())
                .map(|c| grad.magnitude(c).powf(p))
                .sum();
            Ok((s * grid.cell_measure()).powf(1.0 / p))
        }
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("norm exponent must be >= 1, got {p}")))
    }
}

/// Node-weighted `L^p` norm; each node carries its dual-cell measure.
pub(crate) fn lp_norm(u: &Field, p: f64) -> f64 {
    let grid = u.grid();
    let s: f64 = u
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| grid.node_weight(i) * v.abs().powf(p))
        .sum();
    s.powf(1.0 / p)
}

/// `L^q` norm of `g(u)` over interior nodes only.
///
/// Used for integrands that are singular on the boundary such as
/// `u^{-α}`, where the boundary nodes carry no mass in the limit.
pub fn interior_lq_norm(u: &Field, q: f64, g: impl Fn(f64) -> f64) -> f64 {
    let grid = u.grid();
    let s: f64 = grid
        .interior_nodes()
        .map(|i| grid.node_weight(i) * g(u.values()[i]).abs().powf(q))
        .sum();
    s.powf(1.0 / q)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::discretization::Grid;

    #[test]
    fn constant_field_lp() {
        let g = Arc::new(Grid::rectangle((0.0, 1.0), (0.0, 1.0), 9, 5).unwrap());
        let u = Field::constant(g, -2.5);
        for p in [1.0, 1.5, 2.0, 7.0] {
            assert!((norm(&u, NormKind::Lp(p)).unwrap() - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_l2() {
        let g = Arc::new(Grid::interval(0.0, 1.0, 511).unwrap());
        let u = Field::from_fn(g, |x| (PI * x[0]).sin());
        let n = norm(&u, NormKind::Lp(2.0)).unwrap();
        assert!((n - 0.5f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn sup_is_max_abs() {
        let g = Arc::new(Grid::interval(0.0, 1.0, 2).unwrap());
        let u = Field::new(g, vec![0.0, -3.0, 2.0, 0.0]).unwrap();
        assert_eq!(norm(&u, NormKind::Sup).unwrap(), 3.0);
    }

    #[test]
    fn seminorm_of_linear_profile() {
        // u = x on [0,1] sampled everywhere: gradient 1 in every cell
        let g = Arc::new(Grid::interval(0.0, 1.0, 10).unwrap());
        let u = Field::from_fn(g, |x| x[0]);
        let s = norm(&u, NormKind::W1pSeminorm(3.0)).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_exponent() {
        let g = Arc::new(Grid::interval(0.0, 1.0, 4).unwrap());
        let u = Field::zeros(g);
        assert!(norm(&u, NormKind::Lp(0.5)).is_err());
        assert!(norm(&u, NormKind::W1pSeminorm(0.99)).is_err());
    }
}
