//! Grids, nodal fields, cell gradients and norms.

mod csv_io;
mod field;
mod grid;
mod lorentz;
mod norms;

pub use csv_io::{read_field, read_field_file, write_field, write_field_file};
pub use field::{gradient, Field, GradientField};
pub use grid::{Grid, Interval};
pub use lorentz::{decreasing_rearrangement, lorentz_norm, Step};
pub use norms::{interior_lq_norm, norm, NormKind};
