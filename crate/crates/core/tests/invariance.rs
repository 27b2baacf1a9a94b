//! Discrete invariance of the admissible set under `T` and the f-free
//! reduction of the fixed-point driver.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use plap_core::constants::{calibrate_gradient_constant, constants_report, gradient_constant, ConstantsInput};
use plap_core::discretization::{Field, Grid};
use plap_core::fixed_point::{apply_t, check_membership, iterate_t, AdmissibleSet};
use plap_core::plap::CoreConfig;
use plap_core::singular::{solve_u0, ConvectionSpec, EpsSchedule, ProblemSpec};

struct Setup {
    spec: ProblemSpec,
    set: AdmissibleSet,
}

fn setup(n: usize) -> Setup {
    let (p, alpha, q) = (2.0, 0.25, 3.0);
    let cfg = CoreConfig::default();
    let grid = Arc::new(Grid::interval(0.0, 1.0, n).unwrap());
    let (u0, _) = solve_u0(grid.clone(), p, alpha, &EpsSchedule::default(), &cfg).unwrap();
    let cal = calibrate_gradient_constant(grid, p, q, 3, 42, &cfg).unwrap();
    let conv = ConvectionSpec {
        a: 0.05,
        b: 0.05,
        r1: 2.0,
        r2: 2.0,
    };
    let inp = ConstantsInput {
        p,
        alpha,
        a: conv.a,
        b: conv.b,
        r1: conv.r1,
        r2: conv.r2,
        u0_sup: u0.sup(),
        q,
        dim: 1,
        cp_hat: Some(gradient_constant(&cal, &u0, p, alpha)),
        theta: None,
    };
    let rep = constants_report(&inp, None).unwrap();
    assert!(rep.feasible);
    Setup {
        spec: ProblemSpec {
            p,
            alpha,
            lambda: rep.lambda,
            convection: conv,
        },
        set: AdmissibleSet::new(u0, rep.lambda, rep.m).unwrap(),
    }
}

/// `θλu₀ + (1−θ)Mu₀` with a smooth random `θ(x)`, damped until the gradient
/// cap holds.
fn random_member(set: &AdmissibleSet, rng: &mut ChaCha8Rng) -> Field {
    let theta0: f64 = rng.gen_range(0.1..0.9);
    let k = rng.gen_range(1..4) as f64;
    let phase = rng.gen_range(0.0..2.0 * PI);
    let mut amp = theta0.min(1.0 - theta0);
    loop {
        let theta = Field::from_fn(set.u0.grid().clone(), |x| theta0 + amp * (2.0 * PI * k * x[0] + phase).sin());
        let values = set
            .u0
            .values()
            .iter()
            .zip(theta.values())
            .map(|(u, t)| (t * set.lambda + (1.0 - t) * set.m) * u)
            .collect();
        let v = Field::new(set.u0.grid().clone(), values).unwrap();
        if check_membership(&v, set).unwrap().member {
            return v;
        }
        amp *= 0.5;
    }
}

#[test]
fn t_maps_the_set_into_itself() {
    let s = setup(511);
    let cfg = CoreConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let scale = s.set.m * s.set.u0.sup();
    for _ in 0..50 {
        let v = random_member(&s.set, &mut rng);
        let (t, _) = apply_t(&s.spec, &v, &s.set, &cfg).unwrap();
        let m = check_membership(&t, &s.set).unwrap();
        for margin in m.margins {
            assert!(margin >= -1e-8 * scale, "margins {:?}", m.margins);
        }
    }
}

#[test]
fn envelopes_map_inside() {
    let s = setup(511);
    let cfg = CoreConfig::default();
    let (lo, _) = apply_t(&s.spec, &s.set.upper(), &s.set, &cfg).unwrap();
    let (hi, _) = apply_t(&s.spec, &s.set.lower(), &s.set, &cfg).unwrap();
    let u0 = &s.set.u0;
    for i in u0.grid().interior_nodes() {
        assert!(lo.values()[i] >= s.set.lambda * u0.values()[i] - 1e-10);
        assert!(hi.values()[i] <= s.set.m * u0.values()[i] + 1e-10);
    }
}

#[test]
fn driver_reduces_to_scaled_torsion_without_convection() {
    let s = setup(255);
    let cfg = CoreConfig::default();
    let spec = ProblemSpec {
        convection: ConvectionSpec::none(),
        ..s.spec
    };
    let out = iterate_t(&spec, &s.set, &cfg, None).unwrap();
    let w = s.set.u0.scaled(spec.lambda.powf(spec.scaling_exponent()));
    assert!(out.u.sup_distance(&w) <= 1e-8 * w.sup(), "{}", out.u.sup_distance(&w));
    assert!(out.membership.member);
    assert!(out.residual.passed);
}

#[test]
fn limit_does_not_depend_on_start() {
    let s = setup(255);
    let cfg = CoreConfig::default();
    let mid = s.set.u0.scaled(0.5 * (s.set.lambda + s.set.m));
    let limits: Vec<Field> = [s.set.lower(), s.set.upper(), mid]
        .iter()
        .map(|v| iterate_t(&s.spec, &s.set, &cfg, Some(v)).unwrap().u)
        .collect();
    for u in &limits[1..] {
        assert!(u.sup_distance(&limits[0]) <= 10.0 * cfg.tol);
    }
}
