//! Stationary state, principal eigenpair and discrete spectral gap.

use std::io::Write;

use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use crate::error::{FpkError, Result};
use crate::fields::{Verdict, WeightContext};
use crate::grid::{
    fmt17, gradient_norm, mass, weighted_inner, weighted_norm, GridFunction, OperatorMatrix,
};
use crate::linalg::{norm2, BandedLu};
use crate::probes;

/// Shift for inverse iteration on the singular generator.
pub const STATIONARY_SHIFT: f64 = 1e-8;
/// Largest cell count handled by dense eigendecomposition.
pub const DENSE_LIMIT: usize = 10_000;
/// Real parts closer than this count as a tie for the principal eigenvalue.
pub const SIMPLICITY_TOL: f64 = 1e-10;
/// Eigenvalues with modulus at or below this are treated as the zero mode.
pub const GAP_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct StationaryResult {
    pub g: GridFunction,
    /// `||L_h G||_2`.
    pub residual: f64,
    /// `||L_h G||_2 / ||G||_2`.
    pub relative_residual: f64,
    pub min: f64,
    pub mass: f64,
    pub iterations: usize,
}

impl StationaryResult {
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "residual": self.residual,
            "relative_residual": self.relative_residual,
            "min": self.min,
            "max": self.g.max(),
            "mass": self.mass,
            "iterations": self.iterations,
        })
    }
}

/// Unit-mass null vector of `op` by inverse iteration on `(eps I - L_h)^{-1}`
/// from the positive constant, renormalising to unit mass after each sweep.
pub fn stationary(op: &OperatorMatrix, tol: f64, max_iter: usize) -> Result<StationaryResult> {
    let grid = *op.grid();
    let lu = BandedLu::factor(&op.matrix().shifted_scaled(STATIONARY_SHIFT, -1.0))?;
    let mut v = GridFunction::constant(grid, 1.0 / grid.total_volume()).into_values();
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        lu.solve_in_place(&mut v);
        let m = mass(&GridFunction::new(grid, v.clone())?);
        if !(m.is_finite() && m != 0.0) {
            return Err(FpkError::Numeric(format!(
                "iterate mass {m} during stationary solve"
            )));
        }
        v.iter_mut().for_each(|x| *x /= m);
        residual = norm2(&op.apply_values(&v));
        let scale = norm2(&v);
        if residual <= tol * scale {
            if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| **x <= 0.0) {
                return Err(FpkError::Nonpositive { index, value });
            }
            let g = GridFunction::new(grid, v)?;
            return Ok(StationaryResult {
                min: g.min(),
                mass: mass(&g),
                relative_residual: residual / scale,
                residual,
                iterations: it,
                g,
            });
        }
    }
    Err(FpkError::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenPath {
    Dense,
    Iterative,
}

#[derive(Clone, Debug)]
pub struct PrincipalPair {
    pub eigenvalue: f64,
    /// Normalised to unit mass (and hence positive when one-signed).
    pub vector: GridFunction,
    pub one_signed: bool,
    /// Gap in real part to the next eigenvalue (dense path only).
    pub separation: Option<f64>,
    pub path: EigenPath,
}

fn dense_eigenvalues(op: &OperatorMatrix) -> Result<Vec<Complex<f64>>> {
    let cells = op.grid().cell_count();
    if cells > DENSE_LIMIT {
        return Err(FpkError::Size {
            cells,
            limit: DENSE_LIMIT,
        });
    }
    let mut eig: Vec<Complex<f64>> = op
        .matrix()
        .to_dense()
        .complex_eigenvalues()
        .iter()
        .copied()
        .collect();
    if eig.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(FpkError::Numeric("non-finite eigenvalue".into()));
    }
    eig.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    Ok(eig)
}

fn normalize_unit_mass(grid: crate::grid::Grid, v: Vec<f64>) -> Result<GridFunction> {
    let f = GridFunction::new(grid, v)?;
    let m = mass(&f);
    if m == 0.0 {
        return Err(FpkError::Numeric("eigenvector has zero mass".into()));
    }
    Ok(f.scaled(1.0 / m))
}

fn one_signed(f: &GridFunction) -> bool {
    f.values().iter().all(|&x| x > 0.0) || f.values().iter().all(|&x| x < 0.0)
}

/// Eigenvalue of largest real part with its eigenvector, from the dense
/// spectrum when the grid is small enough and by inverse iteration otherwise.
pub fn principal_eigen(op: &OperatorMatrix) -> Result<PrincipalPair> {
    if op.grid().cell_count() <= DENSE_LIMIT {
        principal_eigen_dense(op)
    } else {
        principal_eigen_iterative(op, 1e-12, 500)
    }
}

pub fn principal_eigen_dense(op: &OperatorMatrix) -> Result<PrincipalPair> {
    let eig = dense_eigenvalues(op)?;
    let lead = eig[0];
    let separation = eig.get(1).map(|z| lead.re - z.re);
    if let Some(sep) = separation {
        if sep <= SIMPLICITY_TOL {
            return Err(FpkError::Degenerate(lead.re, eig[1].re));
        }
    }
    // Eigenvector by inverse iteration just above the computed eigenvalue.
    let n = op.grid().cell_count();
    let sigma = lead.re + 1e-10 * op.scale().max(1.0);
    let shifted = DMatrix::identity(n, n) * sigma - op.matrix().to_dense();
    let lu = shifted.lu();
    let mut v = DVector::from_element(n, 1.0);
    for _ in 0..4 {
        v = lu.solve(&v).ok_or(FpkError::Singular(0))?;
        let s = v.amax();
        v /= s;
    }
    let vector = normalize_unit_mass(*op.grid(), v.iter().copied().collect())?;
    Ok(PrincipalPair {
        eigenvalue: lead.re,
        one_signed: one_signed(&vector),
        vector,
        separation,
        path: EigenPath::Dense,
    })
}

/// Power iteration on `(sigma I - L)^{-1}` with `sigma` just above the
/// largest column sum, an upper bound for the Perron root of a matrix with
/// nonnegative off-diagonals.
pub fn principal_eigen_iterative(
    op: &OperatorMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<PrincipalPair> {
    let grid = *op.grid();
    let col_max = op
        .matrix()
        .column_sums()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let sigma = col_max + STATIONARY_SHIFT * op.scale().max(1.0);
    let lu = BandedLu::factor(&op.matrix().shifted_scaled(sigma, -1.0))?;
    let mut v = vec![1.0; grid.cell_count()];
    let mut eigenvalue = f64::NAN;
    for it in 1..=max_iter {
        let before: f64 = v.iter().sum();
        lu.solve_in_place(&mut v);
        let after: f64 = v.iter().sum();
        let growth = after / before;
        let s = norm2(&v);
        v.iter_mut().for_each(|x| *x /= s);
        let estimate = sigma - 1.0 / growth;
        let lv = op.apply_values(&v);
        let res = norm2(
            &lv.iter()
                .zip(&v)
                .map(|(a, b)| a - estimate * b)
                .collect::<Vec<_>>(),
        );
        eigenvalue = estimate;
        if res <= tol * op.scale().max(1.0) {
            let vector = normalize_unit_mass(grid, v)?;
            return Ok(PrincipalPair {
                eigenvalue,
                one_signed: one_signed(&vector),
                vector,
                separation: None,
                path: EigenPath::Iterative,
            });
        }
        if it == max_iter {
            return Err(FpkError::NoConvergence {
                iterations: it,
                residual: res,
            });
        }
    }
    Err(FpkError::NoConvergence {
        iterations: max_iter,
        residual: eigenvalue,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumResult {
    #[serde(skip)]
    pub eigenvalues: Vec<Complex<f64>>,
    /// `a* = -max{Re z : |z| > GAP_TOL}`.
    pub gap: f64,
    pub principal: f64,
    pub principal_vector_positive: bool,
    /// Every eigenvalue other than the principal one has negative real part.
    pub others_negative: bool,
    pub size: usize,
}

impl SpectrumResult {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "re,im")?;
        for z in &self.eigenvalues {
            writeln!(out, "{},{}", fmt17(z.re), fmt17(z.im))?;
        }
        Ok(())
    }
}

/// Dense spectrum with the gap below the zero mode.
pub fn spectrum(op: &OperatorMatrix) -> Result<SpectrumResult> {
    let eig = dense_eigenvalues(op)?;
    let gap = -eig
        .iter()
        .filter(|z| z.norm() > GAP_TOL)
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let pair = principal_eigen_dense(op)?;
    Ok(SpectrumResult {
        principal: eig[0].re,
        others_negative: eig[1..].iter().all(|z| z.re < 0.0),
        principal_vector_positive: pair.one_signed,
        eigenvalues: eig,
        gap,
        size: op.grid().cell_count(),
    })
}

pub fn spectral_gap(op: &OperatorMatrix) -> Result<f64> {
    let eig = dense_eigenvalues(op)?;
    Ok(-eig
        .iter()
        .filter(|z| z.norm() > GAP_TOL)
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Clone, Debug, Serialize)]
pub struct CoercivityReport {
    pub trials: usize,
    /// Smallest `(-L_h phi|phi)_k - ||grad phi||^2_k + lambda0 ||phi||^2_k`
    /// over unit-norm test functions.
    pub min_residual: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// Slack constant `C` in the `C h ||phi||^2` tolerance of the discrete
/// coercivity and negative-part checks.
pub const COERCIVITY_SLACK: f64 = 1.0;

/// Coercivity residual for one test function, scaled by `||phi||^2_{L^2_k}`.
pub fn coercivity_residual(op: &OperatorMatrix, phi: &GridFunction, k: f64, lambda0: f64) -> f64 {
    let lphi = op.apply(phi);
    let norm2 = weighted_norm(phi, k, 2.0).powi(2);
    let grad2 = gradient_norm(phi, k).powi(2);
    (-weighted_inner(&lphi, phi, k) - grad2 + lambda0 * norm2) / norm2
}

/// Random Gaussian bumps (centres in `[-R/2, R/2]^d`, widths in `[0.2, 2]`).
pub fn coercivity_check(
    op: &OperatorMatrix,
    ctx: &WeightContext,
    lambda0: f64,
    trials: usize,
    seed: u64,
) -> CoercivityReport {
    let grid = *op.grid();
    let residuals = crate::par::map_range(trials, |t| {
        let mut rng = probes::trial_rng(seed, t as u64);
        let phi = probes::random_bump(&grid, &mut rng, (0.2, 2.0)).sample(&grid);
        coercivity_residual(op, &phi, ctx.k, lambda0)
    });
    let min_residual = residuals.iter().copied().fold(f64::INFINITY, f64::min);
    let tolerance = COERCIVITY_SLACK * grid.spacing();
    CoercivityReport {
        trials,
        min_residual,
        tolerance,
        verdict: Verdict::from_bool(min_residual >= -tolerance),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ForceField;
    use crate::grid::{assemble_operator, Grid};

    #[test]
    fn zero_field_stationary_is_uniform() {
        let g = Grid::new(1, 8.0, 41).unwrap();
        let op = assemble_operator(&g, &ForceField::zero(1)).unwrap();
        let s = stationary(&op, 1e-10, 50).unwrap();
        for v in s.g.values() {
            assert!((v - 1.0 / 16.0).abs() < 1e-12);
        }
        assert!((s.mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_field_principal_is_constant() {
        let g = Grid::new(1, 8.0, 21).unwrap();
        let op = assemble_operator(&g, &ForceField::zero(1)).unwrap();
        let p = principal_eigen(&op).unwrap();
        assert!(p.eigenvalue.abs() < 1e-12);
        assert!(p.one_signed);
        let v = p.vector.values();
        assert!(v.iter().all(|x| (x - v[0]).abs() < 1e-10));
    }

    #[test]
    fn shift_moves_principal_eigenvalue() {
        let g = Grid::new(1, 4.0, 31).unwrap();
        let op = assemble_operator(&g, &ForceField::linear(1, 1.0))
            .unwrap()
            .shifted(-1.0);
        let p = principal_eigen(&op).unwrap();
        assert!((p.eigenvalue + 1.0).abs() < 1e-10);
        let it = principal_eigen_iterative(&op, 1e-12, 200).unwrap();
        assert!((it.eigenvalue + 1.0).abs() < 1e-10);
    }

    #[test]
    fn size_limit() {
        let g = Grid::new(2, 6.0, 101).unwrap();
        let op = assemble_operator(&g, &ForceField::zero(2)).unwrap();
        assert!(matches!(spectral_gap(&op), Err(FpkError::Size { .. })));
    }

    #[test]
    fn decoupled_blocks_are_degenerate() {
        // Two disconnected two-state chains share the principal eigenvalue 0.
        let g = Grid::new(1, 1.0, 5).unwrap();
        let m = crate::linalg::CsrMatrix::from_triplets(
            5,
            5,
            vec![
                (0, 0, -1.0),
                (1, 0, 1.0),
                (0, 1, 1.0),
                (1, 1, -1.0),
                (2, 2, -5.0),
                (3, 3, -1.0),
                (4, 3, 1.0),
                (3, 4, 1.0),
                (4, 4, -1.0),
            ],
        );
        let op = OperatorMatrix::from_matrix(g, m, "blocks");
        assert!(matches!(
            principal_eigen_dense(&op),
            Err(FpkError::Degenerate(..))
        ));
    }
}
