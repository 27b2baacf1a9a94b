//! Explicit constants of the supercritical existence argument: the window
//! for `(λ, M)`, the thresholds `A` and `A*`, and an empirical surrogate
//! for the gradient-estimate constant.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretization::{gradient, interior_lq_norm, norm, Field, Grid, NormKind};
use crate::error::{Error, Result};
use crate::plap::{solve_dirichlet, CoreConfig};

/// Inputs of the constant formulas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsInput {
    pub p: f64,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub r1: f64,
    pub r2: f64,
    /// `‖u₀‖∞`
    pub u0_sup: f64,
    /// Integrability exponent of `u₀^{−α}`.
    pub q: f64,
    /// Space dimension used in the constraint `q > max(N, p')`.
    pub dim: usize,
    /// Calibrated gradient constant `C̃_p`; `None` until calibrated.
    pub cp_hat: Option<f64>,
    /// Boundary regularity exponent. Recorded, never used: rectangles take
    /// the convex-domain branch of the gradient estimate.
    pub theta: Option<f64>,
}

impl ConstantsInput {
    /// `D = α(1−α) + (p−1)(p−2)`, the exponent denominator of the third term.
    pub fn d_exponent(&self) -> f64 {
        self.alpha * (1.0 - self.alpha) + (self.p - 1.0) * (self.p - 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.p > 1.0 && self.p.is_finite()) {
            return bad(format!("p must exceed 1, got {}", self.p));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0,1), got {}", self.alpha));
        }
        if !(self.a >= 0.0 && self.b >= 0.0) {
            return bad("a and b must be >= 0".into());
        }
        if !(self.r1 > self.p - 1.0 && self.r2 > self.p - 1.0) {
            return bad(format!(
                "constant formulas need r1, r2 > p - 1 = {}, got r1 = {}, r2 = {}",
                self.p - 1.0,
                self.r1,
                self.r2
            ));
        }
        if !(self.u0_sup > 0.0 && self.u0_sup.is_finite()) {
            return bad(format!("u0_sup must be positive, got {}", self.u0_sup));
        }
        if self.d_exponent() <= 0.0 {
            return bad(format!(
                "alpha(1-alpha) + (p-1)(p-2) = {} must be positive for the third threshold",
                self.d_exponent()
            ));
        }
        if let Some(c) = self.cp_hat {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("cp_hat must be positive, got {c}"));
            }
        }
        Ok(())
    }

    /// `q > max(N, p/(p−1))` and `α q < 1`.
    pub fn validate_q(&self) -> Result<()> {
        let pp = self.p / (self.p - 1.0);
        let lower = (self.dim as f64).max(pp);
        if !(self.q > lower) {
            return Err(Error::InvalidInput(format!("q must exceed max(N, p') = {lower}, got {}", self.q)));
        }
        if !(self.alpha * self.q < 1.0) {
            return Err(Error::InvalidInput(format!(
                "alpha * q must be below 1, got {}",
                self.alpha * self.q
            )));
        }
        Ok(())
    }
}

/// Labeled candidate values of a minimum.
pub type Terms = BTreeMap<String, f64>;

fn min_of(terms: &Terms) -> f64 {
    terms.values().copied().fold(f64::INFINITY, f64::min)
}

/// `(2a‖u₀‖^{r1+α})` and `(2b‖u₀‖^α)`.
fn coefficients(inp: &ConstantsInput) -> (f64, f64) {
    (
        2.0 * inp.a * inp.u0_sup.powf(inp.r1 + inp.alpha),
        2.0 * inp.b * inp.u0_sup.powf(inp.alpha),
    )
}

/// Threshold of the `r` term with gradient factor `k` (`k = 2^{1/(p−1)}`
/// for `A`, `k = C̃_p 2^{1/(p−1)}` for `A*`). A zero coefficient gives `∞`.
fn growth_term(inp: &ConstantsInput, r: f64, coef: f64, k: f64) -> f64 {
    if coef == 0.0 {
        return f64::INFINITY;
    }
    let e = (1.0 - inp.alpha) * (r + 1.0 - inp.p);
    let pm1 = inp.p - 1.0;
    1.0 / (k.powf(r * pm1 / e) * coef.powf(pm1 / e))
}

fn degeneracy_term(inp: &ConstantsInput, k: f64) -> f64 {
    let pm1 = inp.p - 1.0;
    1.0 / k.powf(inp.alpha * pm1 / inp.d_exponent())
}

/// `A = min{t₁, t₂, t₃, 1}`.
pub fn compute_a(inp: &ConstantsInput) -> Result<(f64, Terms)> {
    inp.validate()?;
    let (c1, c2) = coefficients(inp);
    let k = 2f64.powf(1.0 / (inp.p - 1.0));
    let mut terms = Terms::new();
    terms.insert("A_term_1".into(), growth_term(inp, inp.r1, c1, k));
    terms.insert("A_term_2".into(), growth_term(inp, inp.r2, c2, k));
    terms.insert("A_term_3".into(), degeneracy_term(inp, k));
    terms.insert("A_term_cap".into(), 1.0);
    Ok((min_of(&terms), terms))
}

/// `A*`: the three terms of `A` and their analogues with `C̃_p 2^{1/(p−1)}`
/// in place of `2^{1/(p−1)}`, capped by 1.
pub fn compute_a_star(inp: &ConstantsInput) -> Result<(f64, Terms)> {
    inp.validate()?;
    let cp = inp
        .cp_hat
        .ok_or_else(|| Error::InvalidInput("A* needs the calibrated constant cp_hat".into()))?;
    let (c1, c2) = coefficients(inp);
    let two = 2f64.powf(1.0 / (inp.p - 1.0));
    let k = cp * two;
    let mut terms = Terms::new();
    terms.insert("Astar_term_1".into(), growth_term(inp, inp.r1, c1, two));
    terms.insert("Astar_term_2".into(), growth_term(inp, inp.r2, c2, two));
    terms.insert("Astar_term_3".into(), degeneracy_term(inp, two));
    terms.insert("Astar_term_4".into(), growth_term(inp, inp.r1, c1, k));
    terms.insert("Astar_term_5".into(), growth_term(inp, inp.r2, c2, k));
    terms.insert("Astar_term_6".into(), degeneracy_term(inp, k));
    terms.insert("Astar_term_cap".into(), 1.0);
    Ok((min_of(&terms), terms))
}

/// Left side minus right side of condition (i):
/// `a M^{r1} ‖u₀‖^{r1} + b M^{r2} − λ^{1−α}/‖u₀‖^α`.
fn condition_i(lambda: f64, m: f64, inp: &ConstantsInput) -> f64 {
    inp.a * m.powf(inp.r1) * inp.u0_sup.powf(inp.r1) + inp.b * m.powf(inp.r2)
        - lambda.powf(1.0 - inp.alpha) / inp.u0_sup.powf(inp.alpha)
}

/// Largest `M` satisfying (i), by bisection on the increasing left side.
fn condition_i_root(lambda: f64, inp: &ConstantsInput) -> f64 {
    let rhs = lambda.powf(1.0 - inp.alpha) / inp.u0_sup.powf(inp.alpha);
    let single = |coef: f64, r: f64| {
        if coef == 0.0 {
            f64::INFINITY
        } else {
            (rhs / coef).powf(1.0 / r)
        }
    };
    // each term alone reaching the full right side brackets from above
    let hi_a = single(inp.a * inp.u0_sup.powf(inp.r1), inp.r1);
    let hi_b = single(inp.b, inp.r2);
    let mut hi = hi_a.min(hi_b);
    if hi.is_infinite() {
        return f64::INFINITY;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if condition_i(lambda, mid, inp) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Admissible interval for `M` at a given `λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MWindow {
    pub lo: f64,
    pub hi: f64,
    pub feasible: bool,
    /// Upper end built from the two half-budget bounds, which is never above
    /// `hi`.
    pub hi_proof: f64,
    pub terms: Terms,
}

/// Window for conditions (i), (ii), (iii) of [`check_lem3`]. `hi` is the exact largest `M` satisfying (i),
/// capped by (iii), so the window is the full solution set.
pub fn m_window(lambda: f64, inp: &ConstantsInput) -> Result<MWindow> {
    m_window_with_floor(lambda, inp, 1.0)
}

/// As [`m_window`], with the lower end raised to
/// `max(1, k) 2^{1/(p−1)} λ^{(1−α)/(p−1)}`, the gradient requirement of the
/// invariant set when `k = C̃_p`.
pub fn m_window_with_floor(lambda: f64, inp: &ConstantsInput, k: f64) -> Result<MWindow> {
    inp.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    let pm1 = inp.p - 1.0;
    let base = 2f64.powf(1.0 / pm1) * lambda.powf((1.0 - inp.alpha) / pm1);
    let lo = base * k.max(1.0);
    let (c1, c2) = coefficients(inp);
    let b1 = if c1 == 0.0 {
        f64::INFINITY
    } else {
        lambda.powf((1.0 - inp.alpha) / inp.r1) / c1.powf(1.0 / inp.r1)
    };
    let b2 = if c2 == 0.0 {
        f64::INFINITY
    } else {
        lambda.powf((1.0 - inp.alpha) / inp.r2) / c2.powf(1.0 / inp.r2)
    };
    let b3 = lambda.powf((2.0 - inp.p) / inp.alpha);
    let root = condition_i_root(lambda, inp);
    let hi = root.min(b3);
    let hi_proof = b1.min(b2).min(b3);
    let mut terms = Terms::new();
    terms.insert("lem3_ii_lower".into(), base);
    terms.insert("gradient_lower".into(), base * k);
    terms.insert("lem3_r1_bound".into(), b1);
    terms.insert("lem3_r2_bound".into(), b2);
    terms.insert("lem3_iii_bound".into(), b3);
    terms.insert("lem3_i_exact_root".into(), root);
    Ok(MWindow {
        lo,
        hi,
        feasible: lo <= hi,
        hi_proof,
        terms,
    })
}

/// `(M_lo, M_hi)`; an error when `λ ≥ A` or the window is empty.
pub fn compute_m_window(lambda: f64, inp: &ConstantsInput) -> Result<(f64, f64)> {
    let (a, _) = compute_a(inp)?;
    let w = m_window(lambda, inp)?;
    if lambda >= a || !w.feasible {
        return Err(Error::InvalidInput(format!(
            "no admissible M at lambda = {lambda} (A = {a}, window [{}, {}])",
            w.lo, w.hi
        )));
    }
    Ok((w.lo, w.hi))
}

/// The three conditions on `(λ, M)`, evaluated literally:
///
/// ```text
/// (i)   a M^{r1} ‖u₀‖^{r1} + b M^{r2} ≤ λ^{1−α} / ‖u₀‖^α
/// (ii)  2^{1/(p−1)} λ^{(1−α)/(p−1)} ≤ M
/// (iii) M ≤ λ^{(2−p)/α}
/// ```
///
/// Each margin is right side minus left side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lem3Check {
    pub holds: [bool; 3],
    pub margins: [f64; 3],
}

impl Lem3Check {
    pub fn all(&self) -> bool {
        self.holds.iter().all(|&h| h)
    }
}

pub fn check_lem3(lambda: f64, m: f64, inp: &ConstantsInput) -> Lem3Check {
    let pm1 = inp.p - 1.0;
    let margins = [
        -condition_i(lambda, m, inp),
        m - 2f64.powf(1.0 / pm1) * lambda.powf((1.0 - inp.alpha) / pm1),
        lambda.powf((2.0 - inp.p) / inp.alpha) - m,
    ];
    Lem3Check {
        holds: margins.map(|x| x >= 0.0),
        margins,
    }
}

/// Explicit `p` factor of the convex-domain gradient estimate.
pub fn kappa(p: f64) -> f64 {
    if p < 2.0 {
        2f64.powf(p / (p - 1.0))
    } else {
        p.powf(2.5)
    }
}

/// One probe of the gradient-constant calibration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub label: String,
    pub ratio: f64,
}

/// Calibrated constant `C` of `‖∇u‖∞^{p−1} ≤ C κ(p) ‖g‖`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Twice the largest observed ratio.
    pub c_bound: f64,
    pub kappa: f64,
    pub q: f64,
    pub seed: u64,
    pub probes: Vec<Probe>,
}

/// `‖∇u‖∞^{p−1} / (κ(p) ‖g‖_q)` for the solution of `−Δ_p u = g`.
pub fn probe_ratio(g: &Field, p: f64, q: f64, cfg: &CoreConfig) -> Result<f64> {
    let (u, _) = solve_dirichlet(g, p, cfg)?;
    let grad = gradient(&u).sup();
    let gn = norm(g, NormKind::Lp(q))?;
    Ok(grad.powf(p - 1.0) / (kappa(p) * gn))
}

/// Probe right-hand sides: constant, torsion-shaped, then random positive
/// fields drawn from a seeded generator.
pub fn probe_fields(grid: &Arc<Grid>, count: usize, seed: u64) -> Vec<(String, Field)> {
    let mut out = vec![("constant".to_string(), Field::constant(grid.clone(), 1.0))];
    if count >= 2 {
        let ext = grid.extent().to_vec();
        let bump = Field::from_fn(grid.clone(), move |x| {
            x.iter()
                .zip(&ext)
                .map(|(&x, iv)| {
                    let t = (x - iv.lo) / iv.len();
                    4.0 * t * (1.0 - t)
                })
                .product()
        });
        out.push(("torsion_shaped".to_string(), bump));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 2..count {
        let values = (0..grid.node_count()).map(|_| rng.gen_range(0.1..1.0)).collect();
        let f = Field::new(grid.clone(), values).expect("finite samples");
        out.push((format!("random_{}", k - 1), f));
    }
    out
}

/// Empirical gradient constant with safety factor 2.
pub fn calibrate_gradient_constant(
    grid: Arc<Grid>,
    p: f64,
    q: f64,
    probe_count: usize,
    seed: u64,
    cfg: &CoreConfig,
) -> Result<Calibration> {
    if probe_count < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 probes, got {probe_count}")));
    }
    let mut probes = Vec::with_capacity(probe_count);
    for (label, g) in probe_fields(&grid, probe_count, seed) {
        let ratio = probe_ratio(&g, p, q, cfg)?;
        probes.push(Probe { label, ratio });
    }
    let max = probes.iter().map(|p| p.ratio).fold(0.0, f64::max);
    Ok(Calibration {
        c_bound: 2.0 * max,
        kappa: kappa(p),
        q,
        seed,
        probes,
    })
}

/// `C̃_p = (C κ(p) ‖u₀^{−α}‖_q)^{1/(p−1)}`, so that
/// `‖∇u‖∞ ≤ C̃_p 2^{1/(p−1)} λ^{(1−α)/(p−1)}` whenever the right-hand side
/// is bounded by `2 λ^{1−α} u₀^{−α}`.
pub fn gradient_constant(cal: &Calibration, u0: &Field, p: f64, alpha: f64) -> f64 {
    let n = interior_lq_norm(u0, cal.q, |v| v.powf(-alpha));
    (cal.c_bound * cal.kappa * n).powf(1.0 / (p - 1.0))
}

/// Everything the supercritical driver needs about `(λ, M)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "A_star")]
    pub a_star: f64,
    pub lambda: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "M_lo")]
    pub m_lo: f64,
    #[serde(rename = "M_hi")]
    pub m_hi: f64,
    #[serde(rename = "M_hi_proof")]
    pub m_hi_proof: f64,
    pub feasible: bool,
    pub u0_sup: f64,
    pub cp_hat: f64,
    pub q: f64,
    pub theta: Option<f64>,
    pub terms: Terms,
}

/// Evaluates `A`, `A*` and the invariant-set window. `lambda` defaults to
/// `A*/2` and `M` to the window midpoint.
pub fn constants_report(inp: &ConstantsInput, lambda: Option<f64>) -> Result<ConstantsReport> {
    let (a, mut terms) = compute_a(inp)?;
    let (a_star, t_star) = compute_a_star(inp)?;
    terms.extend(t_star);
    let lambda = lambda.unwrap_or(0.5 * a_star);
    let cp = inp.cp_hat.unwrap_or(1.0);
    let w = m_window_with_floor(lambda, inp, cp)?;
    terms.extend(w.terms.clone());
    let feasible = lambda < a_star && w.feasible;
    Ok(ConstantsReport {
        a,
        a_star,
        lambda,
        m: 0.5 * (w.lo + w.hi),
        m_lo: w.lo,
        m_hi: w.hi,
        m_hi_proof: w.hi_proof,
        feasible,
        u0_sup: inp.u0_sup,
        cp_hat: cp,
        q: inp.q,
        theta: inp.theta,
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> ConstantsInput {
        ConstantsInput {
            p: 2.0,
            alpha: 0.5,
            a: 1.0,
            b: 1.0,
            r1: 3.0,
            r2: 3.0,
            u0_sup: 1.0,
            q: 2.5,
            dim: 1,
            cp_hat: None,
            theta: None,
        }
    }

    #[test]
    fn worked_threshold() {
        let (a, t) = compute_a(&worked()).unwrap();
        assert!((a - 1.0 / 16.0).abs() < 1e-15);
        assert!((t["A_term_1"] - 1.0 / 16.0).abs() < 1e-15);
        assert!((t["A_term_2"] - 1.0 / 16.0).abs() < 1e-15);
        assert!((t["A_term_3"] - 0.25).abs() < 1e-15);
        assert_eq!(t["A_term_cap"], 1.0);
    }

    #[test]
    fn worked_window() {
        let (lo, hi) = compute_m_window(1.0 / 32.0, &worked()).unwrap();
        assert!((lo - 0.353553).abs() < 1e-5);
        assert!((hi - 0.445449).abs() < 1e-5);
        assert!(compute_m_window(1.0 / 16.0, &worked()).is_err());
    }

    #[test]
    fn rejects_subcritical_and_degenerate_exponents() {
        let mut i = worked();
        i.r1 = 1.0;
        assert!(compute_a(&i).is_err());
        let mut i = worked();
        i.p = 1.5;
        i.alpha = 0.1;
        i.r1 = 1.0;
        i.r2 = 1.0;
        assert!(i.d_exponent() < 0.0);
        assert!(compute_a(&i).is_err());
    }

    #[test]
    fn q_constraints() {
        let mut i = worked();
        i.alpha = 0.25;
        i.q = 3.0;
        assert!(i.validate_q().is_ok());
        i.q = 1.5;
        assert!(i.validate_q().is_err());
        i.q = 4.0;
        assert!(i.validate_q().is_err());
    }

    #[test]
    fn lem3_degenerate_and_literal_cases() {
        let c = check_lem3(0.01, 0.0, &worked());
        assert!(c.holds[0] && !c.holds[1]);
        let c = check_lem3(1.0, 1.5, &worked());
        assert!(!c.holds[2]);
        assert!((c.margins[2] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn star_threshold_cases() {
        let mut i = worked();
        i.cp_hat = Some(1.0);
        let (a, _) = compute_a(&i).unwrap();
        let (s, t) = compute_a_star(&i).unwrap();
        assert_eq!(a, s);
        assert_eq!(t["Astar_term_1"], t["Astar_term_4"]);
        i.cp_hat = Some(2.0);
        let (s, t) = compute_a_star(&i).unwrap();
        assert!((t["Astar_term_4"] - 1.0 / 128.0).abs() < 1e-15);
        assert!(s < a);
        assert!(s <= 1.0);
    }

    #[test]
    fn thresholds_nonincreasing_in_data() {
        let mut base = worked();
        base.alpha = 0.25;
        base.cp_hat = Some(1.7);
        let eval = |i: &ConstantsInput| (compute_a(i).unwrap().0, compute_a_star(i).unwrap().0);
        for k in 0..3 {
            let mut prev = (f64::INFINITY, f64::INFINITY);
            for step in 1..20 {
                let mut i = base;
                let t = 0.25 * step as f64;
                match k {
                    0 => i.a = t,
                    1 => i.b = t,
                    _ => i.u0_sup = t,
                }
                let cur = eval(&i);
                assert!(cur.0 <= prev.0 && cur.1 <= prev.1, "k = {k}, t = {t}");
                prev = cur;
            }
        }
    }

    #[test]
    fn kappa_branches() {
        assert_eq!(kappa(2.0), 2f64.powf(2.5));
        assert!((kappa(1.5) - 8.0).abs() < 1e-12);
    }
}
