//! Discrete p-Dirichlet energy and its derivatives.
//!
//! The energy is
//!
//! ```text
//! J(u) = (1/p) Σ_cells Σ_q w_q (|∇u(x_q)|² + δ)^{p/2} − Σ_interior w_i g_i u_i
//! ```
//!
//! with the gradient of the piecewise-linear (1D) or bilinear (2D)
//! interpolant evaluated at the quadrature points: the cell midpoint in 1D
//! and the 2×2 Gauss points in 2D. The discrete operator is the exact
//! gradient of the first term divided by the node weight, so for `δ = 0`
//! it is exactly (p−1)-homogeneous.

use crate::discretization::{Field, Grid};

use super::banded::BandedSpd;

#[derive(Clone, Copy, Debug)]
struct QuadPoint {
    weight: f64,
    /// d(grad_x)/d(corner value)
    gx: [f64; 4],
    /// d(grad_y)/d(corner value)
    gy: [f64; 4],
}

/// Per-cell quadrature rule shared by all cells of a uniform grid.
#[derive(Clone, Debug)]
pub(crate) struct Quadrature {
    corners: usize,
    points: Vec<QuadPoint>,
}

impl Quadrature {
    pub(crate) fn new(grid: &Grid) -> Self {
        let h = grid.spacing();
        match grid.dim() {
            1 => Self {
                corners: 2,
                points: vec![QuadPoint {
                    weight: h[0],
                    gx: [-1.0 / h[0], 1.0 / h[0], 0.0, 0.0],
                    gy: [0.0; 4],
                }],
            },
            _ => {
                let (hx, hy) = (h[0], h[1]);
                let off = 0.5 / 3f64.sqrt();
                let gauss = [0.5 - off, 0.5 + off];
                let mut points = Vec::with_capacity(4);
                for &xi in &gauss {
                    for &eta in &gauss {
                        // corners: (0,0), (1,0), (0,1), (1,1)
                        points.push(QuadPoint {
                            weight: 0.25 * hx * hy,
                            gx: [
                                -(1.0 - eta) / hx,
                                (1.0 - eta) / hx,
                                -eta / hx,
                                eta / hx,
                            ],
                            gy: [
                                -(1.0 - xi) / hy,
                                -xi / hy,
                                (1.0 - xi) / hy,
                                xi / hy,
                            ],
                        });
                    }
                }
                Self { corners: 4, points }
            }
        }
    }
}

#[inline]
fn grad_at(q: &QuadPoint, local: &[f64; 4], corners: usize) -> (f64, f64) {
    let mut gx = 0.0;
    let mut gy = 0.0;
    for k in 0..corners {
        gx += q.gx[k] * local[k];
        gy += q.gy[k] * local[k];
    }
    (gx, gy)
}

/// `(s + δ)^{(p−2)/2}`, with the `0·∞` limit at a vanishing gradient
/// resolved to zero flux.
#[inline]
fn flux_coefficient(s: f64, p: f64, delta: f64) -> f64 {
    if p == 2.0 {
        return 1.0;
    }
    let t = s + delta;
    if t == 0.0 {
        0.0
    } else {
        t.powf(0.5 * (p - 2.0))
    }
}

/// Sum over cells of `Σ_q w_q (|∇u|² + δ)^{p/2} / p`.
pub(crate) fn gradient_energy(quad: &Quadrature, grid: &Grid, u: &[f64], p: f64, delta: f64) -> f64 {
    let mut total = 0.0;
    let mut local = [0.0; 4];
    for c in 0..grid.cell_count() {
        let nodes = grid.cell_corners(c);
        for k in 0..quad.corners {
            local[k] = u[nodes[k]];
        }
        for q in &quad.points {
            let (gx, gy) = grad_at(q, &local, quad.corners);
            let s = gx * gx + gy * gy + delta;
            total += q.weight * if p == 2.0 { s } else { s.powf(0.5 * p) };
        }
    }
    total / p
}

/// Sum over cells of `Σ_q w_q |∇u|^p` (no regularization).
pub(crate) fn gradient_p_sum(grid: &Grid, u: &[f64], p: f64) -> f64 {
    let quad = Quadrature::new(grid);
    p * gradient_energy(&quad, grid, u, p, 0.0)
}

/// Derivative of [`gradient_energy`] with respect to every nodal value,
/// boundary nodes included.
pub(crate) fn energy_gradient(quad: &Quadrature, grid: &Grid, u: &[f64], p: f64, delta: f64) -> Vec<f64> {
    energy_gradient_parts(quad, grid, u, p, delta, false).0
}

/// Energy gradient together with a per-node magnitude that bounds its
/// rounding error: absolute values are propagated through every sum,
/// including the nodal differences that form `∇u`.
pub(crate) fn energy_gradient_parts(
    quad: &Quadrature,
    grid: &Grid,
    u: &[f64],
    p: f64,
    delta: f64,
    with_magnitude: bool,
) -> (Vec<f64>, Vec<f64>) {
    let mut out = vec![0.0; grid.node_count()];
    let mut mag = if with_magnitude { vec![0.0; grid.node_count()] } else { Vec::new() };
    let mut local = [0.0; 4];
    for c in 0..grid.cell_count() {
        let nodes = grid.cell_corners(c);
        for k in 0..quad.corners {
            local[k] = u[nodes[k]];
        }
        for q in &quad.points {
            let (gx, gy) = grad_at(q, &local, quad.corners);
            let a = q.weight * flux_coefficient(gx * gx + gy * gy, p, delta);
            if a == 0.0 {
                continue;
            }
            let (fx, fy) = (a * gx, a * gy);
            for k in 0..quad.corners {
                out[nodes[k]] += fx * q.gx[k] + fy * q.gy[k];
            }
            if with_magnitude {
                let (mut ax, mut ay) = (0.0, 0.0);
                for k in 0..quad.corners {
                    ax += (q.gx[k] * local[k]).abs();
                    ay += (q.gy[k] * local[k]).abs();
                }
                let (ax, ay) = (a.abs() * ax, a.abs() * ay);
                for k in 0..quad.corners {
                    mag[nodes[k]] += ax * q.gx[k].abs() + ay * q.gy[k].abs();
                }
            }
        }
    }
    (out, mag)
}

/// Hessian of [`gradient_energy`] restricted to interior unknowns.
pub(crate) fn energy_hessian(quad: &Quadrature, grid: &Grid, u: &[f64], p: f64, delta: f64) -> BandedSpd {
    let n = grid.interior_count();
    let bw = match grid.dim() {
        1 => 1,
        _ => grid.interior_counts()[1] + 1,
    };
    let mut h = BandedSpd::zeros(n, bw);
    let mut local = [0.0; 4];
    let mut unk = [None; 4];
    for c in 0..grid.cell_count() {
        let nodes = grid.cell_corners(c);
        for k in 0..quad.corners {
            local[k] = u[nodes[k]];
            unk[k] = grid.unknown_index(nodes[k]);
        }
        for q in &quad.points {
            let (gx, gy) = grad_at(q, &local, quad.corners);
            let s = gx * gx + gy * gy;
            // A = φ I + (p−2)(s+δ)^{(p−4)/2} g gᵀ
            let (phi, beta) = if p == 2.0 {
                (1.0, 0.0)
            } else {
                let t = (s + delta).max(if p < 2.0 { 1e-300 } else { 0.0 });
                if t == 0.0 {
                    (0.0, 0.0)
                } else {
                    let phi = t.powf(0.5 * (p - 2.0));
                    (phi, (p - 2.0) * phi / t)
                }
            };
            let axx = q.weight * (phi + beta * gx * gx);
            let axy = q.weight * beta * gx * gy;
            let ayy = q.weight * (phi + beta * gy * gy);
            for a in 0..quad.corners {
                let Some(ia) = unk[a] else { continue };
                let (bxa, bya) = (q.gx[a], q.gy[a]);
                let ra = axx * bxa + axy * bya;
                let sa = axy * bxa + ayy * bya;
                for b in 0..quad.corners {
                    let Some(ib) = unk[b] else { continue };
                    if ib > ia {
                        continue;
                    }
                    h.add(ia, ib, ra * q.gx[b] + sa * q.gy[b]);
                }
            }
        }
    }
    h
}

/// Discrete energy `J(u)` for right-hand side `g`.
pub fn discrete_energy(u: &Field, g: &Field, p: f64, delta_reg: f64) -> f64 {
    let grid = u.grid();
    let quad = Quadrature::new(grid);
    let e = gradient_energy(&quad, grid, u.values(), p, delta_reg);
    let src: f64 = grid
        .interior_nodes()
        .map(|i| grid.node_weight(i) * g.values()[i] * u.values()[i])
        .sum();
    e - src
}

/// Discrete `−Δ_p u`: the energy gradient at interior nodes divided by the
/// node weight. Boundary entries of the result are zero.
pub fn apply_plap(u: &Field, p: f64, delta_reg: f64) -> Field {
    let grid = u.grid().clone();
    let quad = Quadrature::new(&grid);
    let mut d = energy_gradient(&quad, &grid, u.values(), p, delta_reg);
    for (i, v) in d.iter_mut().enumerate() {
        if grid.is_boundary(i) {
            *v = 0.0;
        } else {
            *v /= grid.node_weight(i);
        }
    }
    Field::from_raw(grid, d)
}

/// Energy derivative at boundary nodes, i.e. the discrete outward flux
/// weights. Together with the interior part they sum to zero.
pub fn boundary_flux(u: &Field, p: f64, delta_reg: f64) -> Vec<(usize, f64)> {
    let grid = u.grid();
    let quad = Quadrature::new(grid);
    let d = energy_gradient(&quad, grid, u.values(), p, delta_reg);
    (0..grid.node_count())
        .filter(|&i| grid.is_boundary(i))
        .map(|i| (i, d[i]))
        .collect()
}
