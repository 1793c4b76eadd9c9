//! Uniform cell-centred grids on `[-R, R]^d`, nodal grid functions and
//! weighted midpoint-rule norms.

mod operator;

pub use operator::{assemble_adjoint, assemble_operator, bernoulli, Face, OperatorMatrix};

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{FpkError, Result};
use crate::fields::{weight, Point};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    cells_per_dim: usize,
}

impl Grid {
    /// Cell count per dimension must be odd so that a cell centre sits at 0.
    pub fn new(dim: usize, half_width: f64, cells_per_dim: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(FpkError::Config(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(FpkError::Config(format!(
                "box half-width must be positive, got {half_width}"
            )));
        }
        if cells_per_dim < 3 || cells_per_dim.is_multiple_of(2) {
            return Err(FpkError::Config(format!(
                "cells per dimension must be odd and >= 3, got {cells_per_dim}"
            )));
        }
        Ok(Self {
            dim,
            half_width,
            cells_per_dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn cells_per_dim(&self) -> usize {
        self.cells_per_dim
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.cells_per_dim as f64
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_dim.pow(self.dim as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Centre of cell `i` along one axis. Exactly antisymmetric about the middle cell.
    pub fn coord(&self, i: usize) -> f64 {
        (2.0 * i as f64 + 1.0 - self.cells_per_dim as f64) * 0.5 * self.spacing()
    }

    /// Axis indices of a flat cell index (x varies fastest).
    pub fn multi_index(&self, idx: usize) -> (usize, usize) {
        (idx % self.cells_per_dim, idx / self.cells_per_dim)
    }

    pub fn flat_index(&self, i: usize, j: usize) -> usize {
        j * self.cells_per_dim + i
    }

    pub fn center(&self, idx: usize) -> Point {
        let (i, j) = self.multi_index(idx);
        if self.dim == 1 {
            [self.coord(i), 0.0]
        } else {
            [self.coord(i), self.coord(j)]
        }
    }

    pub fn centers(&self) -> Vec<Point> {
        (0..self.cell_count()).map(|i| self.center(i)).collect()
    }

    /// Flat index of the cell at the origin.
    pub fn origin_index(&self) -> usize {
        let m = self.cells_per_dim / 2;
        if self.dim == 1 {
            m
        } else {
            self.flat_index(m, m)
        }
    }

    pub fn total_volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    /// `<x_i>^k` at every cell centre.
    pub fn weights(&self, k: f64) -> Vec<f64> {
        par::map_range(self.cell_count(), |i| {
            let c = self.center(i);
            weight(&c[..self.dim], k)
        })
    }

    pub fn sample<F>(&self, f: F) -> GridFunction
    where
        F: Fn(&Point) -> f64 + Sync + Send,
    {
        GridFunction::new(
            *self,
            par::map_range(self.cell_count(), |i| f(&self.center(i))),
        )
        .expect("sampled length matches grid")
    }
}

/// Values at cell centres of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(FpkError::Config(format!(
                "grid function has {} values for {} cells",
                values.len(),
                grid.cell_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FpkError::Numeric(format!(
                "grid function value {} at cell {i}",
                values[i]
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.cell_count()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.cell_count()],
        }
    }

    pub fn indicator(grid: Grid, cell: usize) -> Self {
        let mut f = Self::zeros(grid);
        f.values[cell] = 1.0;
        f
    }

    pub fn grid(&self) -> &Grid {
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

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Positive part `max(f, 0)`.
    pub fn positive_part(&self) -> Self {
        self.map(|v| v.max(0.0))
    }

    /// Negative part `max(-f, 0)`, so that `f = f+ - f-`.
    pub fn negative_part(&self) -> Self {
        self.map(|v| (-v).max(0.0))
    }

    /// Discrete gradient: centred differences, one-sided in the boundary cells.
    pub fn gradient(&self) -> Vec<Point> {
        let g = &self.grid;
        let n = g.cells_per_dim;
        let h = g.spacing();
        let diff = |idx: usize, axis: usize| -> f64 {
            let (i, j) = g.multi_index(idx);
            let pos = if axis == 0 { i } else { j };
            let at = |p: usize| {
                if axis == 0 {
                    g.flat_index(p, j)
                } else {
                    g.flat_index(i, p)
                }
            };
            if pos == 0 {
                (self.values[at(1)] - self.values[at(0)]) / h
            } else if pos == n - 1 {
                (self.values[at(n - 1)] - self.values[at(n - 2)]) / h
            } else {
                (self.values[at(pos + 1)] - self.values[at(pos - 1)]) / (2.0 * h)
            }
        };
        par::map_range(g.cell_count(), |idx| {
            if g.dim == 1 {
                [diff(idx, 0), 0.0]
            } else {
                [diff(idx, 0), diff(idx, 1)]
            }
        })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        if self.grid.dim == 1 {
            writeln!(out, "index,x,value")?;
        } else {
            writeln!(out, "index,x,y,value")?;
        }
        for (i, v) in self.values.iter().enumerate() {
            let c = self.grid.center(i);
            if self.grid.dim == 1 {
                writeln!(out, "{i},{},{}", fmt17(c[0]), fmt17(*v))?;
            } else {
                writeln!(out, "{i},{},{},{}", fmt17(c[0]), fmt17(c[1]), fmt17(*v))?;
            }
        }
        Ok(())
    }

    /// Reads the CSV written by [`write_csv`](Self::write_csv) onto `grid`.
    /// Cell coordinates must match the grid to a relative `1e-12`.
    pub fn read_csv<R: BufRead>(grid: Grid, input: R) -> Result<Self> {
        let mut values = vec![f64::NAN; grid.cell_count()];
        let cols = grid.dim + 2;
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != cols {
                return Err(FpkError::Config(format!(
                    "line {}: expected {cols} columns",
                    lineno + 1
                )));
            }
            let bad = |what: &str| FpkError::Config(format!("line {}: bad {what}", lineno + 1));
            let idx: usize = parts[0].parse().map_err(|_| bad("index"))?;
            if idx >= values.len() {
                return Err(bad("index"));
            }
            let c = grid.center(idx);
            for axis in 0..grid.dim {
                let x: f64 = parts[1 + axis].parse().map_err(|_| bad("coordinate"))?;
                if (x - c[axis]).abs() > 1e-12 * grid.half_width {
                    return Err(FpkError::Config(format!(
                        "line {}: coordinate does not match grid",
                        lineno + 1
                    )));
                }
            }
            values[idx] = parts[cols - 1].parse().map_err(|_| bad("value"))?;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(FpkError::Config("CSV does not cover every cell".into()));
        }
        Self::new(grid, values)
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// `sum_i f_i h^d`.
pub fn mass(f: &GridFunction) -> f64 {
    par::pairwise_sum(f.values()) * f.grid().cell_volume()
}

/// `(sum_i |f_i|^p <x_i>^k h^d)^(1/p)`.
pub fn weighted_norm(f: &GridFunction, k: f64, p: f64) -> f64 {
    let g = f.grid();
    let vals = f.values();
    let s = par::sum_range(g.cell_count(), |i| {
        let c = g.center(i);
        vals[i].abs().powf(p) * weight(&c[..g.dim()], k)
    });
    (s * g.cell_volume()).powf(1.0 / p)
}

/// `sum_i f_i g_i <x_i>^k h^d`.
pub fn weighted_inner(f: &GridFunction, other: &GridFunction, k: f64) -> f64 {
    let g = f.grid();
    let (a, b) = (f.values(), other.values());
    par::sum_range(g.cell_count(), |i| {
        let c = g.center(i);
        a[i] * b[i] * weight(&c[..g.dim()], k)
    }) * g.cell_volume()
}

/// `(sum_i |grad_h f|_i^2 <x_i>^k h^d)^(1/2)`.
pub fn gradient_norm(f: &GridFunction, k: f64) -> f64 {
    let g = f.grid();
    let grad = f.gradient();
    let s = par::sum_range(g.cell_count(), |i| {
        let c = g.center(i);
        (grad[i][0] * grad[i][0] + grad[i][1] * grad[i][1]) * weight(&c[..g.dim()], k)
    });
    (s * g.cell_volume()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn build_grid_examples() {
        let g = Grid::new(1, 8.0, 401).unwrap();
        assert_eq!(g.spacing(), 16.0 / 401.0);
        assert_eq!(g.center(200), [0.0, 0.0]);
        assert_eq!(g.origin_index(), 200);
        let g2 = Grid::new(2, 6.0, 101).unwrap();
        assert_eq!(g2.cell_count(), 101 * 101);
        assert_eq!(g2.center(g2.origin_index()), [0.0, 0.0]);
        assert!(matches!(Grid::new(1, 8.0, 400), Err(FpkError::Config(_))));
        assert!(Grid::new(1, 8.0, 1).is_err());
        assert!(Grid::new(3, 8.0, 5).is_err());
        assert!(Grid::new(1, -1.0, 5).is_err());
    }

    #[test]
    fn centers_are_symmetric() {
        let g = Grid::new(1, 3.0, 31).unwrap();
        for i in 0..31 {
            assert_eq!(g.coord(i), -g.coord(30 - i));
        }
        assert_abs_diff_eq!(g.coord(0), -3.0 + g.spacing() / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn mass_examples() {
        let g = Grid::new(1, 8.0, 401).unwrap();
        assert_abs_diff_eq!(mass(&GridFunction::constant(g, 1.0)), 16.0, epsilon = 1e-12);
        assert_eq!(mass(&GridFunction::indicator(g, 17)), g.spacing());
        let g2 = Grid::new(2, 6.0, 21).unwrap();
        assert_eq!(mass(&GridFunction::indicator(g2, 5)), g2.cell_volume());
    }

    #[test]
    fn norms_of_zero() {
        let g = Grid::new(2, 2.0, 11).unwrap();
        let z = GridFunction::zeros(g);
        assert_eq!(weighted_norm(&z, 2.0, 2.0), 0.0);
        assert_eq!(weighted_inner(&z, &z, 2.0), 0.0);
        assert_eq!(gradient_norm(&z, 2.0), 0.0);
    }

    #[test]
    fn unweighted_norm_is_plain_sum() {
        let g = Grid::new(1, 4.0, 41).unwrap();
        let f = g.sample(|x| (x[0] * 1.3).sin());
        let direct: f64 = f.values().iter().map(|v| v * v).sum::<f64>() * g.spacing();
        assert_abs_diff_eq!(weighted_norm(&f, 0.0, 2.0).powi(2), direct, epsilon = 1e-13);
    }

    #[test]
    fn gradient_is_exact_for_linear_functions() {
        let g = Grid::new(2, 3.0, 9).unwrap();
        let f = g.sample(|x| 2.0 * x[0] - 0.5 * x[1]);
        for d in f.gradient() {
            assert_abs_diff_eq!(d[0], 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(d[1], -0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn parts_decompose() {
        let g = Grid::new(1, 2.0, 21).unwrap();
        let f = g.sample(|x| (3.0 * x[0]).sin());
        let (p, m) = (f.positive_part(), f.negative_part());
        for i in 0..f.values().len() {
            assert_eq!(p.values()[i] - m.values()[i], f.values()[i]);
            assert_eq!(p.values()[i] * m.values()[i], 0.0);
        }
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::new(2, 1.5, 5).unwrap();
        let f = g.sample(|x| (x[0] - 0.3 * x[1]).exp());
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = GridFunction::read_csv(g, buf.as_slice()).unwrap();
        assert_eq!(back, f);
        let other = Grid::new(2, 2.0, 5).unwrap();
        assert!(GridFunction::read_csv(other, buf.as_slice()).is_err());
    }

    #[test]
    fn rejects_wrong_length_and_nan() {
        let g = Grid::new(1, 1.0, 3).unwrap();
        assert!(GridFunction::new(g, vec![1.0; 4]).is_err());
        assert!(matches!(
            GridFunction::new(g, vec![1.0, f64::NAN, 0.0]),
            Err(FpkError::Numeric(_))
        ));
    }
}
