use std::io::Write;

use serde::Serialize;

use super::{fmt17, Grid, GridFunction};
use crate::error::{FpkError, Result};
use crate::fields::ForceField;
use crate::linalg::CsrMatrix;
use crate::par;

/// `B(s) = s / (e^s - 1)`, `B(0) = 1`. Series branch for `|s| < 1e-4`.
pub fn bernoulli(s: f64) -> f64 {
    if s.abs() < 1e-4 {
        let s2 = s * s;
        1.0 - 0.5 * s + s2 / 12.0 - s2 * s2 / 720.0
    } else if s > 0.0 {
        s * (-s).exp() / -(-s).exp_m1()
    } else {
        s / s.exp_m1()
    }
}

/// One interior face between cells `left` and `right` (`right` is the
/// neighbour in the positive direction of `axis`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Face {
    pub left: usize,
    pub right: usize,
    pub axis: usize,
    /// `h * E(face midpoint) . e_axis`.
    pub drift: f64,
    /// Transition rate from `left` into `right`: `B(drift) / h^2`.
    pub to_right: f64,
    /// Transition rate from `right` into `left`: `B(-drift) / h^2`.
    pub to_left: f64,
}

/// Sparse discrete generator in conservative flux form.
///
/// Column `j` holds the rates out of cell `j`, so columns sum to zero and
/// off-diagonals are nonnegative.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    grid: Grid,
    matrix: CsrMatrix,
    faces: Vec<Face>,
    label: String,
    adjoint: bool,
}

impl OperatorMatrix {
    /// Wraps an arbitrary matrix on `grid` (used for shifted and split operators).
    pub fn from_matrix(grid: Grid, matrix: CsrMatrix, label: impl Into<String>) -> Self {
        assert_eq!(matrix.nrows(), grid.cell_count());
        Self {
            grid,
            matrix,
            faces: Vec::new(),
            label: label.into(),
            adjoint: false,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_adjoint(&self) -> bool {
        self.adjoint
    }

    pub fn apply(&self, f: &GridFunction) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.matrix.matvec(f.values()),
        }
    }

    pub fn apply_values(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.matvec(v)
    }

    /// `self + shift * I`.
    pub fn shifted(&self, shift: f64) -> Self {
        Self {
            grid: self.grid,
            matrix: self.matrix.shifted_scaled(shift, 1.0),
            faces: Vec::new(),
            label: format!("{} + {shift} I", self.label),
            adjoint: self.adjoint,
        }
    }

    pub fn max_abs_column_sum(&self) -> f64 {
        self.matrix
            .column_sums()
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Smallest off-diagonal entry (0 when every off-diagonal is structurally zero).
    pub fn min_off_diagonal(&self) -> f64 {
        self.matrix
            .triplets()
            .filter(|(i, j, _)| i != j)
            .map(|t| t.2)
            .fold(0.0, f64::min)
    }

    /// Largest `|diag|`, the natural scale of the operator.
    pub fn scale(&self) -> f64 {
        self.matrix
            .diagonal()
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Matrix Market coordinate export, one-based indices.
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(
            out,
            "% {}{}",
            self.label,
            if self.adjoint { " (adjoint)" } else { "" }
        )?;
        writeln!(
            out,
            "{} {} {}",
            self.matrix.nrows(),
            self.matrix.ncols(),
            self.matrix.nnz()
        )?;
        for (i, j, v) in self.matrix.triplets() {
            writeln!(out, "{} {} {}", i + 1, j + 1, fmt17(v))?;
        }
        Ok(())
    }
}

fn interior_faces(grid: &Grid) -> Vec<(usize, usize, usize, [f64; 2])> {
    let n = grid.cells_per_dim();
    let h = grid.spacing();
    let face_coord = |i: usize| (2.0 * i as f64 + 2.0 - n as f64) * 0.5 * h;
    let mut faces = Vec::new();
    if grid.dim() == 1 {
        for i in 0..n - 1 {
            faces.push((i, i + 1, 0, [face_coord(i), 0.0]));
        }
        return faces;
    }
    for j in 0..n {
        for i in 0..n - 1 {
            faces.push((
                grid.flat_index(i, j),
                grid.flat_index(i + 1, j),
                0,
                [face_coord(i), grid.coord(j)],
            ));
        }
    }
    for j in 0..n - 1 {
        for i in 0..n {
            faces.push((
                grid.flat_index(i, j),
                grid.flat_index(i, j + 1),
                1,
                [grid.coord(i), face_coord(j)],
            ));
        }
    }
    faces
}

/// Assembles `L u = div(grad u + E u)` with exponentially fitted
/// (Scharfetter-Gummel / Chang-Cooper) fluxes and no-flux boundaries.
///
/// The flux from cell `i` to its neighbour `j` through their shared face is
/// `F = (B(-delta) u_j - B(delta) u_i) / h` with `delta = h E(face) . nu`, and
/// `(L u)_i` collects `F / h` over the faces of cell `i`.
pub fn assemble_operator(grid: &Grid, field: &ForceField) -> Result<OperatorMatrix> {
    if field.dim() != grid.dim() {
        return Err(FpkError::Config(format!(
            "field dimension {} does not match grid dimension {}",
            field.dim(),
            grid.dim()
        )));
    }
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let geometry = interior_faces(grid);
    let faces = par::map_slice(&geometry, |&(left, right, axis, mid)| {
        let drift = h * field.eval(&mid)[axis];
        Face {
            left,
            right,
            axis,
            drift,
            to_right: bernoulli(drift) * inv_h2,
            to_left: bernoulli(-drift) * inv_h2,
        }
    });
    if let Some(f) = faces.iter().find(|f| {
        !(f.to_right > 0.0 && f.to_left > 0.0 && f.to_right.is_finite() && f.to_left.is_finite())
    }) {
        return Err(FpkError::Numeric(format!(
            "Bernoulli weight out of range for face drift {} between cells {} and {}",
            f.drift, f.left, f.right
        )));
    }
    let mut triplets = Vec::with_capacity(4 * faces.len() + grid.cell_count());
    for c in 0..grid.cell_count() {
        triplets.push((c, c, 0.0));
    }
    for f in &faces {
        triplets.push((f.right, f.left, f.to_right));
        triplets.push((f.left, f.left, -f.to_right));
        triplets.push((f.left, f.right, f.to_left));
        triplets.push((f.right, f.right, -f.to_left));
    }
    let n = grid.cell_count();
    Ok(OperatorMatrix {
        grid: *grid,
        matrix: CsrMatrix::from_triplets(n, n, triplets),
        faces,
        label: format!("scharfetter_gummel[{}]", field.label()),
        adjoint: false,
    })
}

/// Transpose of the generator: the discrete `L* phi = Delta phi - E . grad phi`
/// in the unweighted inner product. Annihilates constants.
pub fn assemble_adjoint(op: &OperatorMatrix) -> OperatorMatrix {
    OperatorMatrix {
        grid: op.grid,
        matrix: op.matrix.transpose(),
        faces: op.faces.clone(),
        label: op.label.clone(),
        adjoint: !op.adjoint,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bernoulli_branches_agree() {
        assert_eq!(bernoulli(0.0), 1.0);
        for s in [1e-4_f64, -1e-4, 0.99e-4, -0.99e-4] {
            let direct = if s > 0.0 {
                s * (-s).exp() / -(-s).exp_m1()
            } else {
                s / s.exp_m1()
            };
            let series = 1.0 - 0.5 * s + s * s / 12.0;
            assert_abs_diff_eq!(direct, series, epsilon = 1e-14);
            assert_abs_diff_eq!(bernoulli(s), series, epsilon = 1e-14);
        }
        // B(-s) = B(s) + s
        for s in [0.3, 2.0, 17.0, 300.0] {
            assert_abs_diff_eq!(bernoulli(-s), bernoulli(s) + s, epsilon = 1e-12 * s);
        }
        assert!(bernoulli(800.0) == 0.0);
    }

    #[test]
    fn zero_field_is_neumann_laplacian() {
        let g = Grid::new(1, 1.0, 5).unwrap();
        let op = assemble_operator(&g, &ForceField::zero(1)).unwrap();
        let h2 = g.spacing().powi(2);
        let m = op.matrix();
        assert_abs_diff_eq!(m.get(0, 0) * h2, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.get(2, 2) * h2, -2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.get(2, 1) * h2, 1.0, epsilon = 1e-14);
        assert_eq!(m.get(0, 2), 0.0);
        assert!(op.max_abs_column_sum() < 1e-12);

        let g2 = Grid::new(2, 1.0, 5).unwrap();
        let op2 = assemble_operator(&g2, &ForceField::zero(2)).unwrap();
        let c = g2.origin_index();
        assert_abs_diff_eq!(
            op2.matrix().get(c, c) * g2.spacing().powi(2),
            -4.0,
            epsilon = 1e-13
        );
        assert_eq!(op2.matrix().row(c).count(), 5);
    }

    #[test]
    fn adjoint_involution_and_constants() {
        let g = Grid::new(2, 2.0, 7).unwrap();
        let f = ForceField::gradient_power_plus_rotation(2, 1.5, 1.0).unwrap();
        let op = assemble_operator(&g, &f).unwrap();
        let adj = assemble_adjoint(&op);
        assert!(adj.is_adjoint());
        assert_eq!(assemble_adjoint(&adj).matrix(), op.matrix());
        let ones = vec![1.0; g.cell_count()];
        assert!(adj.apply_values(&ones).iter().all(|v| v.abs() < 1e-12));

        let zero = assemble_operator(&g, &ForceField::zero(2)).unwrap();
        assert_eq!(assemble_adjoint(&zero).matrix(), zero.matrix());
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let g = Grid::new(2, 2.0, 7).unwrap();
        assert!(matches!(
            assemble_operator(&g, &ForceField::zero(1)),
            Err(FpkError::Config(_))
        ));
    }

    #[test]
    fn huge_drift_is_numeric_error() {
        let g = Grid::new(1, 1000.0, 3).unwrap();
        let f = ForceField::linear(1, 10.0);
        assert!(matches!(
            assemble_operator(&g, &f),
            Err(FpkError::Numeric(_))
        ));
    }

    #[test]
    fn matrix_market_header() {
        let g = Grid::new(1, 1.0, 3).unwrap();
        let op = assemble_operator(&g, &ForceField::linear(1, 1.0)).unwrap();
        let mut buf = Vec::new();
        op.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("%%MatrixMarket matrix coordinate real general")
        );
        assert!(lines.next().unwrap().starts_with('%'));
        assert_eq!(lines.next(), Some("3 3 7"));
        assert_eq!(lines.count(), 7);
    }
}
