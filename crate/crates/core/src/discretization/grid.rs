use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]` along one axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Uniform tensor grid on an interval or an axis-aligned rectangle.
///
/// Nodes include the boundary. Along axis `k` there are `n[k]` interior
/// nodes and `n[k] + 2` nodes in total, with spacing
/// `h[k] = (hi - lo) / (n[k] + 1)`. Nodes are numbered lexicographically
/// with the first axis varying slowest.
#[derive(Clone, PartialEq)]
pub struct Grid {
    extent: Vec<Interval>,
    n: Vec<usize>,
    h: Vec<f64>,
    coords: Vec<f64>,
    boundary: Vec<bool>,
    dist: Vec<f64>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("extent", &self.extent)
            .field("n", &self.n)
            .field("h", &self.h)
            .finish_non_exhaustive()
    }
}

impl Grid {
    /// Builds a grid; `extent.len()` is the dimension (1 or 2) and `n`
    /// holds the interior node count per axis.
    pub fn new(extent: &[Interval], n: &[usize]) -> Result<Self> {
        let dim = extent.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidDomain(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if n.len() != dim {
            return Err(Error::InvalidDomain(format!(
                "{} node counts given for a {dim}-dimensional domain",
                n.len()
            )));
        }
        for (k, (iv, &nk)) in extent.iter().zip(n).enumerate() {
            if !(iv.lo.is_finite() && iv.hi.is_finite()) || iv.hi <= iv.lo {
                return Err(Error::InvalidDomain(format!(
                    "axis {k}: degenerate extent [{}, {}]",
                    iv.lo, iv.hi
                )));
            }
            if nk < 2 {
                return Err(Error::InvalidDomain(format!(
                    "axis {k}: need at least 2 interior nodes, got {nk}"
                )));
            }
        }

        let h: Vec<f64> = extent
            .iter()
            .zip(n)
            .map(|(iv, &nk)| iv.len() / (nk + 1) as f64)
            .collect();
        let shape: Vec<usize> = n.iter().map(|&nk| nk + 2).collect();
        let total: usize = shape.iter().product();

        let mut coords = Vec::with_capacity(total * dim);
        let mut boundary = Vec::with_capacity(total);
        let mut dist = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let mut on_boundary = false;
            let mut d = f64::INFINITY;
            for k in 0..dim {
                let iv = extent[k];
                let last = shape[k] - 1;
                let x = if idx[k] == last {
                    iv.hi
                } else {
                    iv.lo + iv.len() * idx[k] as f64 / last as f64
                };
                coords.push(x);
                if idx[k] == 0 || idx[k] == last {
                    on_boundary = true;
                }
                d = d.min(x - iv.lo).min(iv.hi - x);
            }
            boundary.push(on_boundary);
            dist.push(if on_boundary { 0.0 } else { d });
            // advance the multi-index, last axis fastest
            for k in (0..dim).rev() {
                idx[k] += 1;
                if idx[k] < shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }

        Ok(Self {
            extent: extent.to_vec(),
            n: n.to_vec(),
            h,
            coords,
            boundary,
            dist,
        })
    }

    /// Interval `(lo, hi)` with `n` interior nodes.
    pub fn interval(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(&[Interval::new(lo, hi)], &[n])
    }

    /// Rectangle `(x0, x1) x (y0, y1)` with `nx * ny` interior nodes.
    pub fn rectangle(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        Self::new(&[Interval::new(x.0, x.1), Interval::new(y.0, y.1)], &[nx, ny])
    }

    pub fn dim(&self) -> usize {
        self.extent.len()
    }

    pub fn extent(&self) -> &[Interval] {
        &self.extent
    }

    /// Interior node counts per axis.
    pub fn interior_counts(&self) -> &[usize] {
        &self.n
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h
    }

    /// Largest spacing over all axes.
    pub fn h_max(&self) -> f64 {
        self.h.iter().cloned().fold(0.0, f64::max)
    }

    /// Total node counts per axis (interior plus the two boundary nodes).
    pub fn shape(&self) -> Vec<usize> {
        self.n.iter().map(|&nk| nk + 2).collect()
    }

    pub fn node_count(&self) -> usize {
        self.boundary.len()
    }

    pub fn interior_count(&self) -> usize {
        self.n.iter().product()
    }

    pub fn measure(&self) -> f64 {
        self.extent.iter().map(Interval::len).product()
    }

    /// Volume of one grid cell.
    pub fn cell_measure(&self) -> f64 {
        self.h.iter().product()
    }

    pub fn cell_count(&self) -> usize {
        self.n.iter().map(|&nk| nk + 1).product()
    }

    pub fn coord(&self, node: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[node * d..(node + 1) * d]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    /// Distance to the boundary at every node.
    pub fn dist(&self) -> &[f64] {
        &self.dist
    }

    /// Node index from a multi-index.
    pub fn node_index(&self, idx: &[usize]) -> usize {
        match idx {
            [i] => *i,
            [i, j] => i * (self.n[1] + 2) + j,
            _ => unreachable!("grid dimension is 1 or 2"),
        }
    }

    /// Multi-index of a node (unused trailing entry is zero in 1D).
    pub fn multi_index(&self, node: usize) -> [usize; 2] {
        match self.dim() {
            1 => [node, 0],
            _ => {
                let s = self.n[1] + 2;
                [node / s, node % s]
            }
        }
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(move |&i| !self.boundary[i])
    }

    /// Position of an interior node among the unknowns, in node order.
    pub fn unknown_index(&self, node: usize) -> Option<usize> {
        if self.boundary[node] {
            return None;
        }
        let [i, j] = self.multi_index(node);
        Some(match self.dim() {
            1 => i - 1,
            _ => (i - 1) * self.n[1] + (j - 1),
        })
    }

    /// Quadrature weight of a node: the measure of its dual cell clipped to
    /// the domain. Interior nodes carry a full cell, boundary nodes a half
    /// (quarter at corners). The weights sum to the domain measure.
    pub fn node_weight(&self, node: usize) -> f64 {
        let idx = self.multi_index(node);
        let mut w = 1.0;
        for k in 0..self.dim() {
            let half = idx[k] == 0 || idx[k] == self.n[k] + 1;
            w *= if half { 0.5 * self.h[k] } else { self.h[k] };
        }
        w
    }

    /// Corner nodes of a cell, first corner at the lower-left.
    ///
    /// In 1D the order is `[left, right]`; in 2D it is
    /// `[(i,j), (i+1,j), (i,j+1), (i+1,j+1)]`.
    pub fn cell_corners(&self, cell: usize) -> [usize; 4] {
        match self.dim() {
            1 => [cell, cell + 1, 0, 0],
            _ => {
                let cy = self.n[1] + 1;
                let (i, j) = (cell / cy, cell % cy);
                let s = self.n[1] + 2;
                let n00 = i * s + j;
                [n00, n00 + s, n00 + 1, n00 + s + 1]
            }
        }
    }

    /// Center coordinates of a cell (unused trailing entry is zero in 1D).
    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let corners = self.cell_corners(cell);
        match self.dim() {
            1 => [0.5 * (self.coord(corners[0])[0] + self.coord(corners[1])[0]), 0.0],
            _ => {
                let a = self.coord(corners[0]);
                let b = self.coord(corners[3]);
                [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
            }
        }
    }

    /// Cells touching a node.
    pub fn cells_of_node(&self, node: usize) -> Vec<usize> {
        let idx = self.multi_index(node);
        match self.dim() {
            1 => {
                let i = idx[0];
                let mut out = Vec::with_capacity(2);
                if i > 0 {
                    out.push(i - 1);
                }
                if i <= self.n[0] {
                    out.push(i);
                }
                out
            }
            _ => {
                let cy = self.n[1] + 1;
                let mut out = Vec::with_capacity(4);
                for ci in [idx[0].wrapping_sub(1), idx[0]] {
                    if ci > self.n[0] {
                        continue;
                    }
                    for cj in [idx[1].wrapping_sub(1), idx[1]] {
                        if cj > self.n[1] {
                            continue;
                        }
                        out.push(ci * cy + cj);
                    }
                }
                out
            }
        }
    }
}
