//! Splitting `L_h = A + B` with `B = M zeta_n` a radial cutoff multiplier,
//! dissipativity of the `A` flow, and the discrete Duhamel identities.

use serde::Serialize;

use crate::error::{FpkError, Result};
use crate::evolution::{fit_exponential, Integrator, Stepper};
use crate::fields::Verdict;
use crate::grid::{weighted_norm, Grid, GridFunction, OperatorMatrix};
use crate::linalg::CsrMatrix;
use crate::par;
use crate::probes;

/// Profile `zeta0`: 1 on `[0, 1]`, 0 on `[2, inf)`, cubic smoothstep between.
pub fn zeta0(s: f64) -> f64 {
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        let u = s - 1.0;
        1.0 - u * u * (3.0 - 2.0 * u)
    }
}

/// `zeta0'(s) = -6 u (1 - u)` on `(1, 2)`, zero elsewhere; ranges over `[-1.5, 0]`.
pub fn zeta0_derivative(s: f64) -> f64 {
    if s <= 1.0 || s >= 2.0 {
        0.0
    } else {
        let u = s - 1.0;
        -6.0 * u * (1.0 - u)
    }
}

#[derive(Clone, Debug)]
pub struct CutoffSpec {
    /// Cutoff scale `n`: `zeta_n = 1` for `|x| <= n` and `0` for `|x| >= 2n`.
    pub scale: f64,
    /// Amplitude `M`.
    pub amplitude: f64,
    pub zeta: GridFunction,
    /// `2n < R_dom`, i.e. the cutoff vanishes inside the box.
    pub fits_in_box: bool,
}

/// `zeta_n(x) = zeta0(|x| / n)` sampled at cell centres.
pub fn build_cutoff(grid: &Grid, scale: f64, amplitude: f64) -> Result<CutoffSpec> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(FpkError::Config(format!(
            "cutoff scale must be positive, got {scale}"
        )));
    }
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(FpkError::Config(format!(
            "cutoff amplitude must be nonnegative, got {amplitude}"
        )));
    }
    let zeta = grid.sample(|x| zeta0((x[0] * x[0] + x[1] * x[1]).sqrt() / scale));
    Ok(CutoffSpec {
        scale,
        amplitude,
        zeta,
        fits_in_box: 2.0 * scale < grid.half_width(),
    })
}

#[derive(Clone, Debug)]
pub struct SplitOperator {
    /// `A = L_h - diag(M zeta_n)`.
    pub a: OperatorMatrix,
    /// Diagonal of `B = M zeta_n`.
    pub b: Vec<f64>,
    pub parent: OperatorMatrix,
}

impl SplitOperator {
    pub fn b_matrix(&self) -> CsrMatrix {
        CsrMatrix::diagonal_matrix(&self.b)
    }

    /// `max |(A + B) - L_h|` entrywise.
    pub fn reassembly_error(&self) -> f64 {
        self.a
            .matrix()
            .add(&self.b_matrix())
            .max_abs_diff(self.parent.matrix())
    }

    /// Operator norm of `B` (max of the diagonal).
    pub fn b_norm(&self) -> f64 {
        self.b.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    pub fn apply_b(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.b).map(|(x, b)| x * b).collect()
    }
}

pub fn split(op: &OperatorMatrix, cutoff: &CutoffSpec) -> Result<SplitOperator> {
    if cutoff.zeta.grid() != op.grid() {
        return Err(FpkError::Config(
            "cutoff and operator live on different grids".into(),
        ));
    }
    let b: Vec<f64> = cutoff
        .zeta
        .values()
        .iter()
        .map(|z| cutoff.amplitude * z)
        .collect();
    let neg_b: Vec<f64> = b.iter().map(|v| -v).collect();
    let a_matrix = op.matrix().add(&CsrMatrix::diagonal_matrix(&neg_b));
    let a = OperatorMatrix::from_matrix(*op.grid(), a_matrix, format!("{} - B", op.label()));
    Ok(SplitOperator {
        a,
        b,
        parent: op.clone(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DissipativityReport {
    /// Smallest fitted decay rate of `||S_A(t) f0||_{L^2_k}` across trials.
    pub omega0: f64,
    pub rates: Vec<f64>,
    pub min_rate: f64,
    pub verdict: Verdict,
}

/// Options for [`dissipativity_fit`].
#[derive(Clone, Copy, Debug)]
pub struct DissipativityOptions {
    pub trials: usize,
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
    pub window_fraction: f64,
    /// Fitted rates at or below this count as no decay.
    pub min_rate: f64,
}

impl Default for DissipativityOptions {
    fn default() -> Self {
        Self {
            trials: 50,
            t_end: 10.0,
            dt: 0.05,
            seed: 0,
            window_fraction: 0.1,
            min_rate: 1e-3,
        }
    }
}

/// Evolves `d/dt f = A f` from random nonnegative bump data and fits the
/// decay of the weighted norm. PASS when every trial decays at a rate above
/// `min_rate`.
pub fn dissipativity_fit(
    split: &SplitOperator,
    k: f64,
    opts: &DissipativityOptions,
) -> Result<DissipativityReport> {
    let stepper = Stepper::new(&split.a, opts.dt, Integrator::ImplicitEuler)?;
    let grid = *split.a.grid();
    let steps = (opts.t_end / opts.dt).round().max(1.0) as usize;
    let rates = par::map_range(opts.trials, |t| -> Result<f64> {
        let mut rng = probes::trial_rng(opts.seed, t as u64);
        let f0 = probes::random_smooth_nonnegative(&grid, &mut rng);
        let mut v = f0.values().to_vec();
        let mut times = vec![0.0];
        let mut norms = vec![weighted_norm(&f0, k, 2.0)];
        for s in 1..=steps {
            stepper.step_in_place(&mut v);
            times.push(s as f64 * opts.dt);
            norms.push(weighted_norm(&GridFunction::new(grid, v.clone())?, k, 2.0));
        }
        Ok(fit_exponential(&times, &norms, opts.window_fraction)?.omega)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let omega0 = rates.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DissipativityReport {
        omega0,
        verdict: Verdict::from_bool(omega0 > opts.min_rate),
        rates,
        min_rate: opts.min_rate,
    })
}

/// `(S_A * B S)(t_m) f0` by trapezoidal quadrature on the step grid, for all
/// `m`, where `inner` holds the states `S(t_j) f0`.
///
/// Uses `P_0 = g_0 / 2`, `P_m = S_A P_{m-1} + g_m` with `g_j = B inner_j`, so
/// that the quadrature equals `dt (P_m - g_m / 2)`.
fn convolution_series(
    split: &SplitOperator,
    stepper_a: &Stepper,
    inner: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let dt = stepper_a.dt();
    let mut out = Vec::with_capacity(inner.len());
    let mut p: Vec<f64> = split.apply_b(&inner[0]).iter().map(|x| 0.5 * x).collect();
    out.push(vec![0.0; p.len()]);
    for u in &inner[1..] {
        stepper_a.step_in_place(&mut p);
        let g = split.apply_b(u);
        p.iter_mut().zip(&g).for_each(|(pi, gi)| *pi += gi);
        out.push(
            p.iter()
                .zip(&g)
                .map(|(pi, gi)| dt * (pi - 0.5 * gi))
                .collect(),
        );
    }
    out
}

fn states(stepper: &Stepper, f0: &[f64], steps: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut v = f0.to_vec();
    out.push(v.clone());
    for _ in 0..steps {
        stepper.step_in_place(&mut v);
        out.push(v.clone());
    }
    out
}

/// `|| S_L(T) f0 - S_A(T) f0 - Quad(int_0^T S_A(T-s) B S_L(s) f0 ds) ||_{L^2_k}`
/// with implicit Euler propagators of step `dt`.
pub fn duhamel_residual(
    split: &SplitOperator,
    f0: &GridFunction,
    k: f64,
    t_end: f64,
    dt: f64,
) -> Result<f64> {
    let steps = (t_end / dt).round().max(1.0) as usize;
    let stepper_l = Stepper::new(&split.parent, dt, Integrator::ImplicitEuler)?;
    let stepper_a = Stepper::new(&split.a, dt, Integrator::ImplicitEuler)?;
    let sl = states(&stepper_l, f0.values(), steps);
    let conv = convolution_series(split, &stepper_a, &sl);
    let mut sa = f0.values().to_vec();
    for _ in 0..steps {
        stepper_a.step_in_place(&mut sa);
    }
    let r: Vec<f64> = (0..sa.len())
        .map(|i| sl[steps][i] - sa[i] - conv[steps][i])
        .collect();
    Ok(weighted_norm(&GridFunction::new(*f0.grid(), r)?, k, 2.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvolutionReport {
    /// `C = max_t ||S_A(t) f0|| / (e^{-omega0 t} ||f0||)`.
    pub c: f64,
    pub omega0: f64,
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub bound: Vec<f64>,
    pub violations: usize,
}

/// Compares `||(S_A * B S_A)(t) f0||` with `C^2 ||B|| t e^{-omega0 t} ||f0||`
/// at `samples` evenly spaced times in `(0, T]` (plus `t = 0`).
pub fn convolution_bound_check(
    split: &SplitOperator,
    f0: &GridFunction,
    k: f64,
    omega0: f64,
    t_end: f64,
    dt: f64,
    samples: usize,
) -> Result<ConvolutionReport> {
    let steps = (t_end / dt).round().max(1.0) as usize;
    let stepper_a = Stepper::new(&split.a, dt, Integrator::ImplicitEuler)?;
    let grid = *f0.grid();
    let sa = states(&stepper_a, f0.values(), steps);
    let norm = |v: &[f64]| -> Result<f64> {
        Ok(weighted_norm(&GridFunction::new(grid, v.to_vec())?, k, 2.0))
    };
    let n0 = norm(&sa[0])?;
    let mut c: f64 = 1.0;
    for (m, v) in sa.iter().enumerate() {
        let t = m as f64 * dt;
        c = c.max(norm(v)? / ((-omega0 * t).exp() * n0));
    }
    let conv = convolution_series(split, &stepper_a, &sa);
    let every = (steps / samples.max(1)).max(1);
    let (mut times, mut lhs, mut bound) = (Vec::new(), Vec::new(), Vec::new());
    let mut violations = 0;
    for m in (0..=steps).filter(|m| m % every == 0 || *m == steps) {
        let t = m as f64 * dt;
        let left = norm(&conv[m])?;
        let right = c * c * split.b_norm() * t * (-omega0 * t).exp() * n0;
        if left > right {
            violations += 1;
        }
        times.push(t);
        lhs.push(left);
        bound.push(right);
    }
    Ok(ConvolutionReport {
        c,
        omega0,
        times,
        lhs,
        bound,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ForceField;
    use crate::grid::assemble_operator;

    #[test]
    fn zeta_profile() {
        assert_eq!(zeta0(0.0), 1.0);
        assert_eq!(zeta0(1.0), 1.0);
        assert_eq!(zeta0(2.0), 0.0);
        assert_eq!(zeta0(1.5), 0.5);
        assert_eq!(zeta0_derivative(1.5), -1.5);
        // difference quotients stay inside [-2, 0]
        let h = 1e-3;
        for i in 0..3000 {
            let s = i as f64 * h;
            let q = (zeta0(s + h) - zeta0(s)) / h;
            assert!((-2.0..=0.0).contains(&q));
        }
    }

    #[test]
    fn cutoff_plateaus() {
        let g = Grid::new(1, 12.0, 241).unwrap();
        let c = build_cutoff(&g, 4.0, 10.0).unwrap();
        assert_eq!(c.zeta.values()[g.origin_index()], 1.0);
        for (i, x) in g.centers().iter().enumerate() {
            if x[0].abs() >= 8.0 {
                assert_eq!(c.zeta.values()[i], 0.0);
            }
        }
        assert!(c.fits_in_box);
        assert!(!build_cutoff(&g, 6.0, 1.0).unwrap().fits_in_box);
        assert!(build_cutoff(&g, 0.0, 1.0).is_err());
        assert!(build_cutoff(&g, 1.0, -1.0).is_err());
    }

    #[test]
    fn split_reassembles() {
        let g = Grid::new(1, 8.0, 81).unwrap();
        let op = assemble_operator(&g, &ForceField::linear(1, 1.0)).unwrap();
        let s = split(&op, &build_cutoff(&g, 2.0, 10.0).unwrap()).unwrap();
        assert!(s.reassembly_error() <= 1e-14);
        assert_eq!(s.b_norm(), 10.0);
        let ones = vec![1.0; g.cell_count()];
        let b1 = s.apply_b(&ones);
        let c = build_cutoff(&g, 2.0, 10.0).unwrap();
        for (b, z) in b1.iter().zip(c.zeta.values()) {
            assert_eq!(*b, 10.0 * z);
        }
        // A keeps nonnegative off-diagonals and nonpositive column sums.
        assert!(s.a.min_off_diagonal() >= 0.0);
        assert!(s.a.matrix().column_sums().iter().all(|c| *c <= 1e-12));

        let zero = split(&op, &build_cutoff(&g, 2.0, 0.0).unwrap()).unwrap();
        assert_eq!(zero.a.matrix(), op.matrix());
        assert!(zero.b.iter().all(|b| *b == 0.0));
    }

    #[test]
    fn duhamel_vanishes_without_multiplier() {
        let g = Grid::new(1, 8.0, 81).unwrap();
        let op = assemble_operator(&g, &ForceField::linear(1, 1.0)).unwrap();
        let s = split(&op, &build_cutoff(&g, 2.0, 0.0).unwrap()).unwrap();
        let f0 = g.sample(|x| (-(x[0] - 1.0).powi(2)).exp());
        assert_eq!(duhamel_residual(&s, &f0, 2.0, 1.0, 0.1).unwrap(), 0.0);
        let r = convolution_bound_check(&s, &f0, 2.0, 0.5, 1.0, 0.1, 5).unwrap();
        assert!(r.lhs.iter().all(|v| *v == 0.0));
        assert_eq!(r.violations, 0);
    }
}
