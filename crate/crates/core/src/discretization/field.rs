use std::sync::Arc;

use crate::error::{Error, Result};

use super::grid::Grid;

/// Nodal scalar function on a [`Grid`], boundary nodes included.
#[derive(Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.grid)
            .field("sup", &self.sup())
            .finish_non_exhaustive()
    }
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidInput(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        Self { grid, values }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.node_count();
        Self::from_raw(grid, vec![0.0; n])
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let n = grid.node_count();
        Self::from_raw(grid, vec![c; n])
    }

    /// Samples `f` at every node, boundary included.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.node_count()).map(|i| f(grid.coord(i))).collect();
        Self::from_raw(grid, values)
    }

    /// Samples `f` at interior nodes and sets boundary nodes to zero.
    pub fn dirichlet_from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|i| if grid.is_boundary(i) { 0.0 } else { f(grid.coord(i)) })
            .collect();
        Self::from_raw(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// True when the field vanishes on every boundary node.
    pub fn is_dirichlet(&self) -> bool {
        self.grid
            .boundary_mask()
            .iter()
            .zip(&self.values)
            .all(|(&b, &v)| !b || v == 0.0)
    }

    /// Copy with boundary values forced to zero.
    pub fn with_zero_boundary(&self) -> Self {
        let mut out = self.clone();
        for (v, &b) in out.values.iter_mut().zip(self.grid.boundary_mask()) {
            if b {
                *v = 0.0;
            }
        }
        out
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub(crate) fn check_grid(&self, other: &Field) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c * other`
    pub fn add_scaled(&self, c: f64, other: &Field) -> Self {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        Self::from_raw(self.grid.clone(), values)
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup norm of `self - other`.
    pub fn sup_distance(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Minimum over interior nodes.
    pub fn interior_min(&self) -> f64 {
        self.grid
            .interior_nodes()
            .map(|i| self.values[i])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Cell-centered gradient of a nodal field.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    grid: Arc<Grid>,
    cell_values: Vec<f64>,
}

impl GradientField {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Flattened cell vectors, `dim` entries per cell.
    pub fn cell_values(&self) -> &[f64] {
        &self.cell_values
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        let d = self.grid.dim();
        &self.cell_values[c * d..(c + 1) * d]
    }

    pub fn magnitude(&self, c: usize) -> f64 {
        self.cell(c).iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Largest cell gradient magnitude.
    pub fn sup(&self) -> f64 {
        (0..self.grid.cell_count())
            .map(|c| self.magnitude(c))
            .fold(0.0, f64::max)
    }

    /// Gradient magnitude at every node: the length of the mean of the
    /// adjacent cell vectors. In 1D this is the central difference.
    pub fn nodal_magnitude(&self) -> Vec<f64> {
        let d = self.grid.dim();
        (0..self.grid.node_count())
            .map(|node| {
                let cells = self.grid.cells_of_node(node);
                let mut acc = [0.0; 2];
                for &c in &cells {
                    for (k, a) in acc.iter_mut().enumerate().take(d) {
                        *a += self.cell(c)[k];
                    }
                }
                let m = cells.len() as f64;
                acc.iter().take(d).map(|a| (a / m).powi(2)).sum::<f64>().sqrt()
            })
            .collect()
    }
}

/// Cell-centered gradient using the stored boundary values.
///
/// In 1D, cell `i` holds `(u[i+1] - u[i]) / h`. In 2D, each component is
/// the mean of the two edge differences along that axis, which is the
/// bilinear interpolant's gradient at the cell center.
pub fn gradient(u: &Field) -> GradientField {
    let grid = u.grid().clone();
    let v = u.values();
    let h = grid.spacing();
    let mut cell_values = Vec::with_capacity(grid.cell_count() * grid.dim());
    for c in 0..grid.cell_count() {
        let k = grid.cell_corners(c);
        match grid.dim() {
            1 => cell_values.push((v[k[1]] - v[k[0]]) / h[0]),
            _ => {
                let gx = 0.5 * ((v[k[1]] - v[k[0]]) + (v[k[3]] - v[k[2]])) / h[0];
                let gy = 0.5 * ((v[k[2]] - v[k[0]]) + (v[k[3]] - v[k[1]])) / h[1];
                cell_values.push(gx);
                cell_values.push(gy);
            }
        }
    }
    GradientField { grid, cell_values }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_has_zero_gradient() {
        let g = Arc::new(Grid::rectangle((0.0, 1.0), (0.0, 2.0), 5, 4).unwrap());
        let grad = gradient(&Field::zeros(g));
        assert!(grad.cell_values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn central_difference_of_torsion_profile() {
        let g = Arc::new(Grid::interval(0.0, 1.0, 255).unwrap());
        let h = g.spacing()[0];
        let u = Field::dirichlet_from_fn(g.clone(), |x| x[0] * (1.0 - x[0]) / 2.0);
        let grad = gradient(&u);
        let err = (0..g.cell_count())
            .map(|c| (grad.cell(c)[0] - (1.0 - 2.0 * g.cell_center(c)[0]) / 2.0).abs())
            .fold(0.0, f64::max);
        assert!(err <= h * h, "err = {err}");
    }

    #[test]
    fn affine_gradient_is_exact() {
        let g = Arc::new(Grid::rectangle((0.0, 1.0), (0.0, 1.0), 6, 9).unwrap());
        let u = Field::from_fn(g.clone(), |x| x[0] + x[1]);
        let grad = gradient(&u);
        for c in 0..g.cell_count() {
            assert!((grad.cell(c)[0] - 1.0).abs() < 1e-12);
            assert!((grad.cell(c)[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_flag() {
        let g = Arc::new(Grid::interval(0.0, 1.0, 4).unwrap());
        assert!(Field::dirichlet_from_fn(g.clone(), |_| 1.0).is_dirichlet());
        assert!(!Field::constant(g.clone(), 1.0).is_dirichlet());
        assert!(Field::new(g.clone(), vec![0.0; 3]).is_err());
        assert!(Field::new(g, vec![0.0, f64::NAN, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn nodal_magnitude_is_central_difference_in_1d() {
        let g = Arc::new(Grid::interval(0.0, 1.0, 7).unwrap());
        let u = Field::dirichlet_from_fn(g.clone(), |x| x[0] * x[0]);
        let m = gradient(&u).nodal_magnitude();
        let h = g.spacing()[0];
        for i in 2..7 {
            let v = u.values();
            let expect = ((v[i + 1] - v[i - 1]) / (2.0 * h)).abs();
            assert!((m[i] - expect).abs() < 1e-12);
        }
    }
}
