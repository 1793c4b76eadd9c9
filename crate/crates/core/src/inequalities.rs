//! Functional inequalities checked on grid functions: the weighted Nash
//! inequality, negative-part coercivity and strict positivity.

use std::io::Write;

use serde::Serialize;

use crate::error::{FpkError, Result};
use crate::fields::{Verdict, WeightContext};
use crate::grid::{
    fmt17, gradient_norm, weighted_inner, weighted_norm, Grid, GridFunction, OperatorMatrix,
};
use crate::par;
use crate::probes::{self, Bump};
use crate::spectral::COERCIVITY_SLACK;

/// `||f||^{2+4/d}_{L^2_k} / (||f||^{4/d}_{L^1_{k/2}} ||grad f||^2_{L^2_k})`.
///
/// Returns `None` when `f` or its discrete gradient vanishes.
pub fn nash_ratio(f: &GridFunction, k: f64) -> Option<f64> {
    let d = f.grid().dim() as f64;
    let l2 = weighted_norm(f, k, 2.0);
    let l1 = weighted_norm(f, 0.5 * k, 1.0);
    let grad = gradient_norm(f, k);
    if l2 == 0.0 || l1 == 0.0 || grad == 0.0 {
        return None;
    }
    // (l2 / l1)^{4/d} (l2 / grad)^2 keeps intermediate magnitudes moderate.
    let r = (l2 / l1).powf(4.0 / d) * (l2 / grad).powi(2);
    r.is_finite().then_some(r)
}

#[derive(Clone, Debug, Serialize)]
pub struct NashEntry {
    pub bump: Bump,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NashReport {
    pub k: f64,
    pub dim: usize,
    pub family_size: usize,
    pub widths: (f64, f64),
    /// Empirical lower bound on the Nash constant.
    pub sup_ratio: f64,
    pub argmax: usize,
    /// Sup over the first half of the family; the family is nested, so
    /// `sup_ratio / sup_half - 1` measures saturation under doubling.
    pub sup_half: f64,
    /// `d + k/2 - 2`, the margin used by the proof's sign argument.
    pub proof_margin: f64,
    #[serde(skip)]
    pub entries: Vec<NashEntry>,
}

impl NashReport {
    pub fn doubling_change(&self) -> f64 {
        (self.sup_ratio - self.sup_half).abs() / self.sup_half
    }

    /// CSV with header `center_x,center_y,width,ratio`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "center_x,center_y,width,ratio")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{}",
                fmt17(e.bump.center[0]),
                fmt17(e.bump.center[1]),
                fmt17(e.bump.width),
                fmt17(e.ratio)
            )?;
        }
        Ok(())
    }
}

/// Nash ratios over the first `family_size` members of the nested Halton
/// Gaussian family.
pub fn nash_check(
    grid: &Grid,
    ctx: &WeightContext,
    family_size: usize,
    widths: (f64, f64),
) -> Result<NashReport> {
    ctx.check_nash_precondition()?;
    if ctx.dim != grid.dim() {
        return Err(FpkError::Config(
            "weight context and grid dimensions differ".into(),
        ));
    }
    if family_size < 2 {
        return Err(FpkError::Config(
            "Nash family needs at least two members".into(),
        ));
    }
    let family = probes::halton_family(grid, family_size, widths);
    let ratios = par::map_slice(&family, |b| nash_ratio(&b.sample(grid), ctx.k));
    let mut entries = Vec::with_capacity(family.len());
    for (bump, ratio) in family.into_iter().zip(ratios) {
        let ratio = ratio.ok_or_else(|| {
            FpkError::Numeric(format!(
                "Nash ratio undefined for bump at {:?} width {}",
                bump.center, bump.width
            ))
        })?;
        entries.push(NashEntry { bump, ratio });
    }
    let values: Vec<f64> = entries.iter().map(|e| e.ratio).collect();
    let (argmax, sup_ratio) = par::argmax(&values).expect("nonempty family");
    let (_, sup_half) = par::argmax(&values[..family_size / 2]).expect("nonempty half");
    Ok(NashReport {
        k: ctx.k,
        dim: ctx.dim,
        family_size,
        widths,
        sup_ratio,
        argmax,
        sup_half,
        proof_margin: ctx.dim as f64 + 0.5 * ctx.k - 2.0,
        entries,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct NegpartReport {
    pub trials: usize,
    /// Smallest `(L_h f | f^-)_k - ||grad f^-||^2_k - (omega*/2) ||f^-||^2_k`,
    /// scaled by `||f^-||^2_k`.
    pub min_residual: Option<f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// Unscaled negative-part coercivity residual of one test function.
pub fn negpart_residual(op: &OperatorMatrix, f: &GridFunction, k: f64, omega_star: f64) -> f64 {
    let neg = f.negative_part();
    let lf = op.apply(f);
    weighted_inner(&lf, &neg, k)
        - gradient_norm(&neg, k).powi(2)
        - 0.5 * omega_star * weighted_norm(&neg, k, 2.0).powi(2)
}

/// Report-only check over random sign-changing data. `omega_star = None`
/// (H3 did not pass) yields SKIPPED.
pub fn negpart_coercivity_check(
    op: &OperatorMatrix,
    ctx: &WeightContext,
    omega_star: Option<f64>,
    trials: usize,
    seed: u64,
) -> NegpartReport {
    let grid = *op.grid();
    let tolerance = COERCIVITY_SLACK * grid.spacing();
    let Some(omega) = omega_star else {
        return NegpartReport {
            trials: 0,
            min_residual: None,
            tolerance,
            verdict: Verdict::Skipped,
        };
    };
    let residuals = par::map_range(trials, |t| {
        let mut rng = probes::trial_rng(seed, t as u64);
        let f = probes::random_sign_changing(&grid, &mut rng);
        let n2 = weighted_norm(&f.negative_part(), ctx.k, 2.0).powi(2);
        if n2 == 0.0 {
            0.0
        } else {
            negpart_residual(op, &f, ctx.k, omega) / n2
        }
    });
    let min = residuals.iter().copied().fold(f64::INFINITY, f64::min);
    let min = if trials == 0 { 0.0 } else { min };
    NegpartReport {
        trials,
        min_residual: Some(min),
        tolerance,
        verdict: Verdict::from_bool(min >= -tolerance),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PositivityReport {
    pub min: f64,
    pub argmin: usize,
    pub max: f64,
    /// `min / max` over cells with `|x|_inf <= R_dom / 2`; diagnostic only.
    pub inner_ratio: f64,
    pub verdict: Verdict,
}

/// PASS iff every cell value is strictly positive.
pub fn strict_positivity_check(g: &GridFunction) -> PositivityReport {
    let grid = g.grid();
    let v = g.values();
    let (argmin, min) = par::argmin(v).unwrap_or((0, f64::NAN));
    let inner: Vec<f64> = (0..v.len())
        .filter(|&i| {
            grid.center(i)
                .iter()
                .all(|c| c.abs() <= 0.5 * grid.half_width())
        })
        .map(|i| v[i])
        .collect();
    let inner_min = inner.iter().copied().fold(f64::INFINITY, f64::min);
    let inner_max = inner.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    PositivityReport {
        min,
        argmin,
        max: g.max(),
        inner_ratio: inner_min / inner_max,
        verdict: Verdict::from_bool(v.iter().all(|x| *x > 0.0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ForceField;
    use crate::grid::assemble_operator;
    use crate::spectral::stationary;

    #[test]
    fn ratio_is_scale_invariant() {
        let g = Grid::new(1, 8.0, 401).unwrap();
        let f = g.sample(|x| (-x[0] * x[0] / 2.0).exp());
        let r = nash_ratio(&f, 2.0).unwrap();
        for c in [1e-3, 0.5, 7.0, 1e4] {
            let rc = nash_ratio(&f.scaled(c), 2.0).unwrap();
            assert!((rc - r).abs() <= 1e-12 * r);
        }
        assert!(nash_ratio(&GridFunction::zeros(g), 2.0).is_none());
        assert!(nash_ratio(&GridFunction::constant(g, 1.0), 2.0).is_none());
    }

    #[test]
    fn nash_needs_precondition() {
        let g = Grid::new(1, 8.0, 41).unwrap();
        let ctx = WeightContext::new(1.0, 1, 2.0).unwrap();
        assert!(matches!(
            nash_check(&g, &ctx, 8, (0.2, 2.0)),
            Err(FpkError::Config(_))
        ));
    }

    #[test]
    fn nash_sup_is_monotone_in_family() {
        let g = Grid::new(1, 8.0, 201).unwrap();
        let ctx = WeightContext::new(2.0, 1, 2.0).unwrap();
        let mut last = 0.0;
        for size in [4, 8, 16, 32] {
            let r = nash_check(&g, &ctx, size, (0.2, 2.0)).unwrap();
            assert!(r.sup_ratio >= last);
            assert!(r.sup_ratio >= r.sup_half);
            last = r.sup_ratio;
        }
    }

    #[test]
    fn negpart_of_nonnegative_is_zero() {
        let g = Grid::new(1, 8.0, 81).unwrap();
        let op = assemble_operator(&g, &ForceField::linear(1, 1.0)).unwrap();
        let f = g.sample(|x| (-x[0] * x[0]).exp());
        assert_eq!(negpart_residual(&op, &f, 2.0, 0.6), 0.0);
        let ctx = WeightContext::new(2.0, 1, 2.0).unwrap();
        assert_eq!(
            negpart_coercivity_check(&op, &ctx, None, 10, 0).verdict,
            Verdict::Skipped
        );
    }

    #[test]
    fn positivity_of_stationary_states() {
        let g = Grid::new(1, 8.0, 401).unwrap();
        let ou = stationary(
            &assemble_operator(&g, &ForceField::linear(1, 1.0)).unwrap(),
            1e-10,
            50,
        )
        .unwrap();
        let r = strict_positivity_check(&ou.g);
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.min < 1e-12);
        let uniform = GridFunction::constant(g, 1.0 / 16.0);
        assert_eq!(strict_positivity_check(&uniform).verdict, Verdict::Pass);
        let mut bad = ou.g.clone();
        bad.values_mut()[200] = 0.0;
        let r = strict_positivity_check(&bad);
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.argmin, 200);
    }
}
