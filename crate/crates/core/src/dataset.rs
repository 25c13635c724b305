//! Paired DEER traces and distance distributions.

use alloc::format;
use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Noisy time-domain traces (one per column of `inputs`) with the distance
/// distributions that produced them (columns of `targets`).
#[derive(Debug, Clone, PartialEq)]
pub struct DeerDataset {
    /// Microseconds.
    pub time_grid: Vec<f64>,
    /// Nanometers.
    pub dist_grid: Vec<f64>,
    pub inputs: DenseMatrix,
    pub targets: DenseMatrix,
    pub seed: u64,
}

impl DeerDataset {
    pub fn new(
        time_grid: Vec<f64>,
        dist_grid: Vec<f64>,
        inputs: DenseMatrix,
        targets: DenseMatrix,
        seed: u64,
    ) -> Result<Self> {
        check_uniform("time", &time_grid)?;
        check_uniform("distance", &dist_grid)?;
        if inputs.rows() != time_grid.len() || targets.rows() != dist_grid.len() {
            return Err(Error::Shape(format!(
                "inputs {:?} / targets {:?} do not match grids of {} and {} points",
                inputs.shape(),
                targets.shape(),
                time_grid.len(),
                dist_grid.len()
            )));
        }
        if inputs.cols() != targets.cols() {
            return Err(Error::Shape(format!(
                "{} input traces but {} targets",
                inputs.cols(),
                targets.cols()
            )));
        }
        for j in 0..targets.cols() {
            let col = targets.col(j);
            if col.iter().any(|&v| v < 0.0) {
                return Err(Error::Domain(format!("target {j} has negative entries")));
            }
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!("target {j} sums to {sum}, expected 1")));
            }
        }
        Ok(Self { time_grid, dist_grid, inputs, targets, seed })
    }

    pub fn len(&self) -> usize {
        self.inputs.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Strictly increasing and uniformly spaced to a relative 1e-6 of the step.
pub fn check_uniform(name: &str, grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::Size(format!("{name} grid needs at least 2 points")));
    }
    let step = grid[1] - grid[0];
    if !(step > 0.0) {
        return Err(Error::Domain(format!("{name} grid is not increasing")));
    }
    for w in grid.windows(2) {
        if ((w[1] - w[0]) - step).abs() > 1e-6 * step {
            return Err(Error::Domain(format!("{name} grid is not uniformly spaced")));
        }
    }
    Ok(())
}

pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return alloc::vec![start];
    }
    let step = (end - start) / (n - 1) as f64;
    (0..n).map(|i| start + step * i as f64).collect()
}
