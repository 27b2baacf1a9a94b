//! Lorentz norms through the decreasing rearrangement.
//!
//! A nodal field is read as a step function: node `i` contributes the value
//! `|u_i|` on a set of measure equal to its quadrature weight. Sorting the
//! steps by value gives the decreasing rearrangement `u*` on `[0, |Ω|]`,
//! and the Lorentz integral is integrated exactly step by step.

use crate::error::{Error, Result};

use super::field::Field;

/// One step of a decreasing rearrangement: `value` on `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub value: f64,
    pub start: f64,
    pub end: f64,
}

/// Decreasing rearrangement of `|u|`. Ties are ordered by node index.
pub fn decreasing_rearrangement(u: &Field) -> Vec<Step> {
    let grid = u.grid();
    let mut order: Vec<usize> = (0..grid.node_count()).collect();
    let abs: Vec<f64> = u.values().iter().map(|v| v.abs()).collect();
    order.sort_by(|&a, &b| abs[b].total_cmp(&abs[a]).then(a.cmp(&b)));
    let mut t = 0.0;
    order
        .into_iter()
        .map(|i| {
            let start = t;
            t += grid.node_weight(i);
            Step {
                value: abs[i],
                start,
                end: t,
            }
        })
        .collect()
}

/// `‖u‖_{p,q} = ( ∫_0^{|Ω|} t^{-1} [u*(t) t^{1/p}]^q dt )^{1/q}`.
pub fn lorentz_norm(u: &Field, p: f64, q: f64) -> Result<f64> {
    if q.is_infinite() {
        return Err(Error::InvalidInput(
            "weak Lorentz norms (second index infinite) are not supported".into(),
        ));
    }
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::InvalidInput(format!("Lorentz index must exceed 1, got {p}")));
    }
    if !(q.is_finite() && q >= 1.0) {
        return Err(Error::InvalidInput(format!(
            "Lorentz second index must be >= 1, got {q}"
        )));
    }
    let e = q / p;
    let s: f64 = decreasing_rearrangement(u)
        .iter()
        .filter(|s| s.value > 0.0)
        // ∫_a^b t^{q/p - 1} dt = (b^{q/p} - a^{q/p}) p / q
        .map(|s| s.value.powf(q) * (s.end.powf(e) - s.start.powf(e)) / e)
        .sum();
    Ok(s.powf(1.0 / q))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::discretization::{norm, Grid, NormKind};

    fn unit_square() -> Arc<Grid> {
        Arc::new(Grid::rectangle((0.0, 1.0), (0.0, 1.0), 8, 8).unwrap())
    }

    #[test]
    fn constant_matches_lq() {
        let g = Arc::new(Grid::interval(0.0, 3.0, 20).unwrap());
        let u = Field::constant(g, 1.7);
        for q in [1.5, 2.0, 3.0] {
            let l = lorentz_norm(&u, q, q).unwrap();
            assert!((l - 1.7 * 3f64.powf(1.0 / q)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_two_index_one() {
        let u = Field::constant(unit_square(), 2.0);
        assert!((lorentz_norm(&u, 2.0, 1.0).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_field() {
        let u = Field::zeros(unit_square());
        assert_eq!(lorentz_norm(&u, 2.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn rearrangement_is_decreasing_and_covers_domain() {
        let g = unit_square();
        let u = Field::from_fn(g.clone(), |x| (7.0 * x[0]).sin() - x[1]);
        let steps = decreasing_rearrangement(&u);
        assert!(steps.windows(2).all(|w| w[0].value >= w[1].value));
        assert!((steps.last().unwrap().end - g.measure()).abs() < 1e-12);
        let l2 = lorentz_norm(&u, 2.0, 2.0).unwrap();
        assert!((l2 - norm(&u, NormKind::Lp(2.0)).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_indices() {
        let u = Field::zeros(unit_square());
        assert!(lorentz_norm(&u, 2.0, f64::INFINITY).is_err());
        assert!(lorentz_norm(&u, 1.0, 2.0).is_err());
        assert!(lorentz_norm(&u, 2.0, 0.5).is_err());
    }
}
