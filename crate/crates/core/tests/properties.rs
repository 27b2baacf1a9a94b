use std::sync::Arc;

use proptest::prelude::*;

use plap_core::constants::{check_lem3, compute_a, m_window, ConstantsInput};
use plap_core::discretization::{lorentz_norm, norm, Field, Grid, NormKind};
use plap_core::plap::{apply_plap, discrete_energy, solve_dirichlet, CoreConfig};

fn grid_1d(n: usize) -> Arc<Grid> {
    Arc::new(Grid::interval(0.0, 1.0, n).unwrap())
}

fn grid_2d() -> Arc<Grid> {
    Arc::new(Grid::rectangle((0.0, 1.5), (0.0, 1.0), 6, 5).unwrap())
}

fn dirichlet(grid: &Arc<Grid>, vals: &[f64]) -> Field {
    let values = (0..grid.node_count())
        .map(|i| if grid.is_boundary(i) { 0.0 } else { vals[i % vals.len()] })
        .collect();
    Field::new(grid.clone(), values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operator_is_homogeneous(
        vals in prop::collection::vec(-2.0f64..2.0, 30),
        p in 1.2f64..5.0,
        c in 0.1f64..20.0,
        two_d in any::<bool>(),
    ) {
        let grid = if two_d { grid_2d() } else { grid_1d(29) };
        let u = dirichlet(&grid, &vals);
        let base = apply_plap(&u, p, 0.0);
        let scaled = apply_plap(&u.scaled(c), p, 0.0);
        let k = c.powf(p - 1.0);
        let err = scaled.sup_distance(&base.scaled(k)) / (k * base.sup().max(1e-300));
        prop_assert!(err <= 1e-12, "relative defect {err}");
    }

    #[test]
    fn operator_is_energy_gradient(
        vals in prop::collection::vec(-1.0f64..1.0, 30),
        p in 1.5f64..4.0,
        two_d in any::<bool>(),
        pick in 0usize..1000,
    ) {
        let grid = if two_d { grid_2d() } else { grid_1d(29) };
        let u = dirichlet(&grid, &vals);
        let delta = 1e-4;
        let zero = Field::zeros(grid.clone());
        let node = grid.interior_nodes().nth(pick % grid.interior_count()).unwrap();
        let h = 1e-5;
        let mut plus = u.clone();
        plus.values_mut()[node] += h;
        let mut minus = u.clone();
        minus.values_mut()[node] -= h;
        let fd = (discrete_energy(&plus, &zero, p, delta) - discrete_energy(&minus, &zero, p, delta)) / (2.0 * h);
        let an = grid.node_weight(node) * apply_plap(&u, p, delta).values()[node];
        let scale = an.abs().max(grid.node_weight(node));
        prop_assert!((fd - an).abs() <= 1e-6 * scale, "fd {fd} vs analytic {an}");
    }

    #[test]
    fn lorentz_diagonal_is_lebesgue(
        vals in prop::collection::vec(-5.0f64..5.0, 42),
        q in 1.1f64..6.0,
    ) {
        let grid = Arc::new(Grid::rectangle((0.0, 1.0), (0.0, 2.0), 5, 4).unwrap());
        let u = Field::new(grid, vals).unwrap();
        let l = lorentz_norm(&u, q, q).unwrap();
        let n = norm(&u, NormKind::Lp(q)).unwrap();
        prop_assert!((l - n).abs() <= 1e-10 * n.max(1e-300));
    }

    #[test]
    fn lorentz_decreases_in_second_index(
        vals in prop::collection::vec(-5.0f64..5.0, 31),
        p in 1.5f64..3.0,
        t in 0.0f64..1.0,
    ) {
        // monotone for second indices up to e·p with this normalization
        let grid = grid_1d(29);
        let u = Field::new(grid, vals).unwrap();
        let q1 = 1.0 + t * (p - 1.0);
        let q2 = p * (1.0 + t);
        let a = lorentz_norm(&u, p, 1.0).unwrap();
        let b = lorentz_norm(&u, p, q1).unwrap();
        let c = lorentz_norm(&u, p, p).unwrap();
        let d = lorentz_norm(&u, p, q2).unwrap();
        prop_assert!(a >= b * (1.0 - 1e-12));
        prop_assert!(b >= c * (1.0 - 1e-12));
        prop_assert!(c >= d * (1.0 - 1e-12));
    }

    #[test]
    fn linear_solution_is_monotone_in_data(
        base in prop::collection::vec(0.0f64..1.0, 20),
        extra in prop::collection::vec(0.0f64..1.0, 20),
    ) {
        let grid = grid_1d(39);
        let g2 = dirichlet(&grid, &base);
        let g1 = g2.add_scaled(1.0, &dirichlet(&grid, &extra));
        let cfg = CoreConfig::default();
        let (u1, _) = solve_dirichlet(&g1, 2.0, &cfg).unwrap();
        let (u2, _) = solve_dirichlet(&g2, 2.0, &cfg).unwrap();
        for (a, b) in u1.values().iter().zip(u2.values()) {
            prop_assert!(*a >= b - 1e-12);
        }
    }

    #[test]
    fn solver_respects_scaling(
        vals in prop::collection::vec(0.1f64..2.0, 10),
        p in 1.5f64..4.0,
        c in 0.2f64..5.0,
    ) {
        let grid = grid_1d(63);
        let g = dirichlet(&grid, &vals);
        let cfg = CoreConfig::default();
        let (u, _) = solve_dirichlet(&g, p, &cfg).unwrap();
        let (v, _) = solve_dirichlet(&g.scaled(c.powf(p - 1.0)), p, &cfg).unwrap();
        prop_assert!(v.sup_distance(&u.scaled(c)) <= 1e-6 * v.sup());
    }

    #[test]
    fn window_is_exact(
        p in 1.6f64..4.0,
        alpha in 0.05f64..0.95,
        a in 0.0f64..3.0,
        b in 0.0f64..3.0,
        dr1 in 0.05f64..3.0,
        dr2 in 0.05f64..3.0,
        u0_sup in 0.05f64..3.0,
        t in 0.0f64..1.0,
        s in 0.0f64..1.0,
    ) {
        let inp = ConstantsInput {
            p, alpha, a, b,
            r1: p - 1.0 + dr1,
            r2: p - 1.0 + dr2,
            u0_sup,
            q: 3.0,
            dim: 1,
            cp_hat: None,
            theta: None,
        };
        prop_assume!(inp.validate().is_ok());
        let (big_a, _) = compute_a(&inp).unwrap();
        let lambda = t * big_a;
        prop_assume!(lambda > 0.0);
        let w = m_window(lambda, &inp).unwrap();
        prop_assert!(w.feasible);
        prop_assert!(w.hi >= w.hi_proof);
        let m = w.lo + s * (w.hi - w.lo);
        prop_assert!(check_lem3(lambda, m, &inp).all());
        prop_assert!(!check_lem3(lambda, 0.99 * w.lo, &inp).all());
        prop_assert!(!check_lem3(lambda, 1.01 * w.hi, &inp).all());
    }
}
