//! Field CSV format: header `x[,y],value`, one node per row in node order,
//! numbers written with 17 significant digits.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::field::Field;
use super::grid::Grid;

pub fn write_field<W: Write>(u: &Field, out: W) -> Result<()> {
    let grid = u.grid();
    let mut w = csv::Writer::from_writer(out);
    match grid.dim() {
        1 => w.write_record(["x", "value"])?,
        _ => w.write_record(["x", "y", "value"])?,
    }
    let mut row: Vec<String> = Vec::with_capacity(3);
    for (i, v) in u.values().iter().enumerate() {
        row.clear();
        row.extend(grid.coord(i).iter().map(|x| fmt_full(*x)));
        row.push(fmt_full(*v));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_field_file(u: &Field, path: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_field(u, std::io::BufWriter::new(f))
}

/// Reads a field onto `grid`; coordinates must match the grid's nodes.
pub fn read_field<R: Read>(grid: Arc<Grid>, input: R) -> Result<Field> {
    let mut r = csv::Reader::from_reader(input);
    let dim = grid.dim();
    let expected: &[&str] = if dim == 1 { &["x", "value"] } else { &["x", "y", "value"] };
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::InvalidInput(format!(
            "field csv header must be {}, found {}",
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut values = Vec::with_capacity(grid.node_count());
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let nums = rec
            .iter()
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| {
                    Error::InvalidInput(format!("row {}: bad number {s:?}: {e}", row + 2))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if nums.len() != dim + 1 {
            return Err(Error::InvalidInput(format!("row {}: expected {} columns", row + 2, dim + 1)));
        }
        let node = values.len();
        if node >= grid.node_count() {
            return Err(Error::InvalidInput("more rows than grid nodes".into()));
        }
        let c = grid.coord(node);
        let tol = 1e-12 * grid.extent().iter().map(|iv| iv.len()).fold(1.0, f64::max);
        if c.iter().zip(&nums[..dim]).any(|(a, b)| (a - b).abs() > tol) {
            return Err(Error::InvalidInput(format!(
                "row {}: coordinates do not match grid node {node}",
                row + 2
            )));
        }
        values.push(nums[dim]);
    }
    Field::new(grid, values)
}

pub fn read_field_file(grid: Arc<Grid>, path: impl AsRef<Path>) -> Result<Field> {
    let f = std::fs::File::open(path)?;
    read_field(grid, std::io::BufReader::new(f))
}

fn fmt_full(x: f64) -> String {
    format!("{x:.16e}")
}
