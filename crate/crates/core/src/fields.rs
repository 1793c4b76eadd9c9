//! Force fields, the polynomial weight `<x>^k = (1 + |x|^2)^(k/2)`, and
//! sampling-based verifiers for the confinement hypotheses on a field.
//!
//! The verifiers evaluate each hypothesis on a finite radial sweep. A PASS
//! verdict means the inequality held at every sampled point, nothing more.

use serde::{Deserialize, Serialize};

use crate::error::{FpkError, Result};
use crate::par;

/// A point in one or two dimensions; the second coordinate is zero when `d = 1`.
pub type Point = [f64; 2];

/// One monomial `coef * x^px * y^py` of a polynomial field component.
pub type PolyTerm = (f64, u32, u32);

/// Built-in field families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    /// `E(x) = x <x>^(gamma - 2)`, the gradient of `<x>^gamma / gamma`.
    GradientPower { gamma: f64 },
    /// `E(x) = scale * x`.
    Linear {
        #[serde(default = "one")]
        scale: f64,
    },
    /// Gradient power plus the divergence-free rotation
    /// `theta * (-x2, x1) / (1 + |x|^2)`, which is perpendicular to `x` and
    /// vanishes at infinity. In one dimension the rotation is absent.
    GradientPowerPlusRotation { gamma: f64, theta: f64 },
    /// One list of monomials per component.
    CustomPolynomial { components: Vec<Vec<PolyTerm>> },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceField {
    kind: FieldKind,
    dim: usize,
}

#[inline]
fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
fn norm_sq(x: &Point) -> f64 {
    x[0] * x[0] + x[1] * x[1]
}

fn monomial(x: &Point, px: u32, py: u32) -> f64 {
    x[0].powi(px as i32) * x[1].powi(py as i32)
}

impl ForceField {
    pub fn new(kind: FieldKind, dim: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(FpkError::Config(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        match &kind {
            FieldKind::GradientPower { gamma }
            | FieldKind::GradientPowerPlusRotation { gamma, .. } => {
                if !(*gamma > 1.0 && *gamma <= 2.0) {
                    return Err(FpkError::Config(format!(
                        "gamma must lie in (1, 2], got {gamma}"
                    )));
                }
            }
            FieldKind::CustomPolynomial { components } => {
                if components.len() != dim {
                    return Err(FpkError::Config(format!(
                        "custom polynomial needs {dim} components, got {}",
                        components.len()
                    )));
                }
                if dim == 1 && components[0].iter().any(|t| t.2 != 0) {
                    return Err(FpkError::Config(
                        "y-exponents must be 0 in one dimension".into(),
                    ));
                }
            }
            FieldKind::Linear { .. } => {}
        }
        let params_finite = match &kind {
            FieldKind::GradientPower { gamma } => gamma.is_finite(),
            FieldKind::Linear { scale } => scale.is_finite(),
            FieldKind::GradientPowerPlusRotation { gamma, theta } => {
                gamma.is_finite() && theta.is_finite()
            }
            FieldKind::CustomPolynomial { components } => {
                components.iter().flatten().all(|t| t.0.is_finite())
            }
        };
        if !params_finite {
            return Err(FpkError::Config("field parameters must be finite".into()));
        }
        Ok(Self { kind, dim })
    }

    pub fn zero(dim: usize) -> Self {
        Self::linear(dim, 0.0)
    }

    pub fn linear(dim: usize, scale: f64) -> Self {
        Self::new(FieldKind::Linear { scale }, dim).expect("valid linear field")
    }

    pub fn gradient_power(dim: usize, gamma: f64) -> Result<Self> {
        Self::new(FieldKind::GradientPower { gamma }, dim)
    }

    pub fn gradient_power_plus_rotation(dim: usize, gamma: f64, theta: f64) -> Result<Self> {
        Self::new(FieldKind::GradientPowerPlusRotation { gamma, theta }, dim)
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> String {
        match &self.kind {
            FieldKind::GradientPower { gamma } => format!("gradient_power(gamma={gamma})"),
            FieldKind::Linear { scale } => format!("linear(scale={scale})"),
            FieldKind::GradientPowerPlusRotation { gamma, theta } => {
                format!("gradient_power_plus_rotation(gamma={gamma},theta={theta})")
            }
            FieldKind::CustomPolynomial { .. } => "custom_polynomial".to_string(),
        }
    }

    /// Growth exponent used as the default `gamma` in the H1 check.
    pub fn natural_exponent(&self) -> f64 {
        match &self.kind {
            FieldKind::GradientPower { gamma }
            | FieldKind::GradientPowerPlusRotation { gamma, .. } => *gamma,
            _ => 2.0,
        }
    }

    /// The gradient part of the field, when the field splits as gradient plus
    /// perpendicular perturbation.
    pub fn gradient_part(&self) -> Option<ForceField> {
        match &self.kind {
            FieldKind::GradientPower { .. } | FieldKind::Linear { .. } => Some(self.clone()),
            FieldKind::GradientPowerPlusRotation { gamma, .. } => Some(Self {
                kind: FieldKind::GradientPower { gamma: *gamma },
                dim: self.dim,
            }),
            FieldKind::CustomPolynomial { .. } => None,
        }
    }

    /// Perturbation `E - gradient_part`, evaluated at `x`.
    pub fn perturbation(&self, x: &Point) -> Point {
        match &self.kind {
            FieldKind::GradientPowerPlusRotation { theta, .. } if self.dim == 2 => {
                let s = theta / (1.0 + norm_sq(x));
                [-s * x[1], s * x[0]]
            }
            _ => [0.0, 0.0],
        }
    }

    /// Potential `phi` with `E = grad phi`, when one is known in closed form.
    pub fn potential(&self, x: &Point) -> Option<f64> {
        match &self.kind {
            FieldKind::Linear { scale } => Some(0.5 * scale * norm_sq(x)),
            FieldKind::GradientPower { gamma } => {
                Some((1.0 + norm_sq(x)).powf(0.5 * gamma) / gamma)
            }
            FieldKind::GradientPowerPlusRotation { gamma, theta }
                if self.dim == 1 || *theta == 0.0 =>
            {
                Some((1.0 + norm_sq(x)).powf(0.5 * gamma) / gamma)
            }
            _ => None,
        }
    }

    pub fn eval(&self, x: &Point) -> Point {
        match &self.kind {
            FieldKind::GradientPower { gamma } => {
                let s = (1.0 + norm_sq(x)).powf(0.5 * (gamma - 2.0));
                [s * x[0], s * x[1]]
            }
            FieldKind::Linear { scale } => [scale * x[0], scale * x[1]],
            FieldKind::GradientPowerPlusRotation { gamma, .. } => {
                let s = (1.0 + norm_sq(x)).powf(0.5 * (gamma - 2.0));
                let r = self.perturbation(x);
                [s * x[0] + r[0], s * x[1] + r[1]]
            }
            FieldKind::CustomPolynomial { components } => {
                let mut out = [0.0; 2];
                for (c, terms) in components.iter().enumerate() {
                    out[c] = terms
                        .iter()
                        .map(|&(a, px, py)| a * monomial(x, px, py))
                        .sum();
                }
                out
            }
        }
    }

    /// Analytic divergence.
    pub fn divergence(&self, x: &Point) -> f64 {
        let d = self.dim as f64;
        match &self.kind {
            FieldKind::GradientPower { gamma }
            | FieldKind::GradientPowerPlusRotation { gamma, .. } => {
                let b2 = 1.0 + norm_sq(x);
                d * b2.powf(0.5 * (gamma - 2.0))
                    + (gamma - 2.0) * norm_sq(x) * b2.powf(0.5 * (gamma - 4.0))
            }
            FieldKind::Linear { scale } => scale * d,
            FieldKind::CustomPolynomial { components } => {
                let mut div = 0.0;
                for &(a, px, py) in &components[0] {
                    if px > 0 {
                        div += a * px as f64 * monomial(x, px - 1, py);
                    }
                }
                if self.dim == 2 {
                    for &(a, px, py) in &components[1] {
                        if py > 0 {
                            div += a * py as f64 * monomial(x, px, py - 1);
                        }
                    }
                }
                div
            }
        }
    }

    /// `x . E(x)`.
    pub fn radial_component(&self, x: &Point) -> f64 {
        dot(x, &self.eval(x))
    }
}

/// `<x>^k`.
pub fn weight(x: &[f64], k: f64) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (1.0 + r2).powf(0.5 * k)
}

/// `k x / (1 + |x|^2) <x>^k`.
pub fn grad_weight(x: &[f64], k: f64) -> Vec<f64> {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let s = k / (1.0 + r2) * weight(x, k);
    x.iter().map(|v| s * v).collect()
}

/// `(k d + k (k + d - 2) |x|^2) / (1 + |x|^2)^2 <x>^k` with `d = x.len()`.
pub fn laplace_weight(x: &[f64], k: f64) -> f64 {
    let d = x.len() as f64;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let b2 = 1.0 + r2;
    (k * d + k * (k + d - 2.0) * r2) / (b2 * b2) * weight(x, k)
}

/// Weight exponent `k`, dimension and Lebesgue exponent `p` for the weighted
/// spaces `L^p_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightContext {
    pub k: f64,
    pub dim: usize,
    pub p: f64,
}

impl WeightContext {
    pub fn new(k: f64, dim: usize, p: f64) -> Result<Self> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(FpkError::Config(format!(
                "weight exponent k must be >= 0, got {k}"
            )));
        }
        if !(dim == 1 || dim == 2) {
            return Err(FpkError::Config(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if !(p >= 2.0 && p.is_finite()) {
            return Err(FpkError::Config(format!(
                "Lebesgue exponent p must lie in [2, inf), got {p}"
            )));
        }
        Ok(Self { k, dim, p })
    }

    /// Conjugate exponent `p' = p / (p - 1)`.
    pub fn conjugate(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// `p / p' = p - 1`.
    pub fn p_over_conjugate(&self) -> f64 {
        self.p - 1.0
    }

    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(self.k, self.dim, p)
    }

    /// The weighted Nash inequality needs `k > 0` for `d >= 2` and `k >= 2` for `d = 1`.
    pub fn check_nash_precondition(&self) -> Result<()> {
        let ok = if self.dim == 1 {
            self.k >= 2.0
        } else {
            self.k > 0.0
        };
        if ok {
            Ok(())
        } else {
            Err(FpkError::Config(format!(
                "Nash inequality needs k >= 2 in d = 1 and k > 0 in d >= 2 (k = {}, d = {})",
                self.k, self.dim
            )))
        }
    }
}

/// `(k d + k (k + d - 2) |x|^2) / (1 + |x|^2)^2`, i.e. `Delta <x>^k / <x>^k`.
fn weight_laplacian_ratio(r2: f64, k: f64, d: f64) -> f64 {
    let b2 = 1.0 + r2;
    (k * d + k * (k + d - 2.0) * r2) / (b2 * b2)
}

/// Left-hand side of H2: `-(p/p') div E + k x.E / (1 + |x|^2)`.
pub fn h2_integrand(field: &ForceField, x: &Point, ctx: &WeightContext) -> f64 {
    -ctx.p_over_conjugate() * field.divergence(x)
        + ctx.k * field.radial_component(x) / (1.0 + norm_sq(x))
}

/// Left-hand side of H3: the H2 integrand minus `Delta <x>^k / <x>^k`.
pub fn h3_integrand(field: &ForceField, x: &Point, ctx: &WeightContext) -> f64 {
    -weight_laplacian_ratio(norm_sq(x), ctx.k, field.dim() as f64) + h2_integrand(field, x, ctx)
}

/// `Psi_k(x) / <x>^k = -Delta<x>^k/<x>^k - div E + k x.E / (1 + |x|^2)`,
/// the `p = 2` quotient that governs the weighted energy estimate.
pub fn psi_k_over_weight(field: &ForceField, x: &Point, k: f64) -> f64 {
    let b2 = 1.0 + norm_sq(x);
    -weight_laplacian_ratio(norm_sq(x), k, field.dim() as f64) - field.divergence(x)
        + k * field.radial_component(x) / b2
}

/// `L* psi / psi` for `psi = <x>^(-alpha0)`.
pub fn adjoint_ratio(field: &ForceField, x: &Point, alpha0: f64) -> f64 {
    let d = field.dim() as f64;
    let r2 = norm_sq(x);
    let b2 = 1.0 + r2;
    (alpha0 * (alpha0 + 2.0 - d) * r2 - alpha0 * d) / (b2 * b2)
        + alpha0 * field.radial_component(x) / b2
}

/// Radial sweep `|x| in [0, r_max]` times a set of directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub dim: usize,
    pub r_max: f64,
    pub radial: usize,
    pub angular: usize,
    #[serde(default)]
    pub extra_radii: Vec<f64>,
}

impl SampleSet {
    pub fn new(dim: usize, r_max: f64, radial: usize, angular: usize) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) || radial < 2 {
            return Err(FpkError::Config(format!(
                "sample sweep needs r_max > 0 and >= 2 radii (r_max = {r_max}, radial = {radial})"
            )));
        }
        if dim == 2 && angular == 0 {
            return Err(FpkError::Config(
                "two-dimensional sweep needs angular directions".into(),
            ));
        }
        Ok(Self {
            dim,
            r_max,
            radial,
            angular,
            extra_radii: Vec::new(),
        })
    }

    /// `r_max = 50`, `10^4` radii, 64 directions in two dimensions.
    pub fn standard(dim: usize) -> Self {
        Self::new(dim, 50.0, 10_000, 64).expect("valid default sweep")
    }

    pub fn with_radius(mut self, r: f64) -> Self {
        if r.is_finite() && r >= 0.0 && r <= self.r_max {
            self.extra_radii.push(r);
        }
        self
    }

    /// Same density over twice the range.
    pub fn doubled(&self) -> Self {
        Self {
            r_max: 2.0 * self.r_max,
            radial: 2 * self.radial - 1,
            ..self.clone()
        }
    }

    pub fn radii(&self) -> Vec<f64> {
        let step = self.r_max / (self.radial - 1) as f64;
        let mut radii: Vec<f64> = (0..self.radial).map(|i| i as f64 * step).collect();
        *radii.last_mut().unwrap() = self.r_max;
        radii.extend(self.extra_radii.iter().copied());
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        radii.dedup();
        radii
    }

    pub fn directions(&self) -> Vec<Point> {
        if self.dim == 1 {
            vec![[1.0, 0.0], [-1.0, 0.0]]
        } else {
            (0..self.angular)
                .map(|j| {
                    let t = std::f64::consts::TAU * j as f64 / self.angular as f64;
                    [t.cos(), t.sin()]
                })
                .collect()
        }
    }

    /// All sample points with their radii. The origin appears once.
    pub fn points(&self) -> Vec<(f64, Point)> {
        let dirs = self.directions();
        let mut pts = Vec::new();
        for r in self.radii() {
            if r == 0.0 {
                pts.push((0.0, [0.0, 0.0]));
                continue;
            }
            pts.extend(dirs.iter().map(|u| (r, [r * u[0], r * u[1]])));
        }
        pts
    }

    pub fn meta(&self) -> SamplingMeta {
        SamplingMeta {
            r_max: self.r_max,
            radial_samples: self.radial,
            angular_samples: if self.dim == 1 { 2 } else { self.angular },
            caveat: "verdicts hold on the sampled sweep only".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingMeta {
    pub r_max: f64,
    pub radial_samples: usize,
    pub angular_samples: usize,
    pub caveat: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skipped => "SKIPPED",
        })
    }
}

fn evaluate<F>(points: &[(f64, Point)], what: &str, f: F) -> Result<Vec<f64>>
where
    F: Fn(&Point) -> f64 + Sync + Send,
{
    let values = par::map_slice(points, |(_, x)| f(x));
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        let x = points[i].1;
        return Err(FpkError::Numeric(format!(
            "{what} is {} at x = ({}, {})",
            values[i], x[0], x[1]
        )));
    }
    Ok(values)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct H1Report {
    pub alpha: f64,
    pub beta: f64,
    pub alpha2: f64,
    pub beta2: f64,
    pub gamma: f64,
    pub gamma2: f64,
    pub verdict: Verdict,
}

/// Extracts constants for `alpha |x|^gamma - beta <= x.E <= alpha2 |x|^gamma2 + beta2`.
///
/// Lower pair: `beta` starts at `max(0, -min_{|x|<=1} x.E)`, `alpha` is the
/// smallest `(x.E + beta) / |x|^gamma` over `|x| >= 1`, then `beta` is raised
/// to the smallest value making the bound hold at every sample. Upper pair:
/// `alpha2` is the largest `x.E / |x|^gamma2` over `|x| >= 1`, then `beta2` is
/// the smallest nonnegative value validating the bound everywhere.
pub fn check_h1(
    field: &ForceField,
    gamma: f64,
    gamma2: f64,
    samples: &SampleSet,
) -> Result<H1Report> {
    if !(gamma > 1.0 && gamma <= gamma2 && gamma2 <= 2.0) {
        return Err(FpkError::Config(format!(
            "need 1 < gamma <= gamma2 <= 2, got {gamma}, {gamma2}"
        )));
    }
    if samples.r_max < 1.0 {
        return Err(FpkError::Config("H1 sweep must reach |x| = 1".into()));
    }
    let points = samples.points();
    let xe = evaluate(&points, "x.E", |x| field.radial_component(x))?;
    let radii: Vec<f64> = points.iter().map(|p| p.0).collect();

    let inner_min = radii
        .iter()
        .zip(&xe)
        .filter(|(r, _)| **r <= 1.0)
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    let beta_start = (-inner_min).max(0.0);

    let outer = || radii.iter().zip(&xe).filter(|(r, _)| **r >= 1.0);
    let alpha = outer()
        .map(|(r, v)| (v + beta_start) / r.powf(gamma))
        .fold(f64::INFINITY, f64::min);
    let alpha2 = outer()
        .map(|(r, v)| v / r.powf(gamma2))
        .fold(f64::NEG_INFINITY, f64::max);

    let beta = radii
        .iter()
        .zip(&xe)
        .map(|(r, v)| alpha * r.powf(gamma) - v)
        .fold(beta_start, f64::max);
    let beta2 = radii
        .iter()
        .zip(&xe)
        .map(|(r, v)| v - alpha2 * r.powf(gamma2))
        .fold(0.0, f64::max);

    let finite = [alpha, beta, alpha2, beta2].iter().all(|v| v.is_finite());
    Ok(H1Report {
        alpha,
        beta,
        alpha2,
        beta2,
        gamma,
        gamma2,
        verdict: Verdict::from_bool(finite && alpha > 0.0 && alpha2 > 0.0),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct H2Report {
    pub beta0: f64,
    pub argmin: Point,
    pub p: f64,
}

/// `beta0` = minimum of the H2 integrand over the sweep.
pub fn check_h2(field: &ForceField, ctx: &WeightContext, samples: &SampleSet) -> Result<H2Report> {
    let points = samples.points();
    let values = evaluate(&points, "H2 integrand", |x| h2_integrand(field, x, ctx))?;
    let (i, beta0) = par::argmin(&values).expect("non-empty sweep");
    Ok(H2Report {
        beta0,
        argmin: points[i].1,
        p: ctx.p,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct H3Report {
    pub omega_star: f64,
    pub radius: f64,
    pub argmin: Point,
    pub verdict: Verdict,
}

/// `omega*` = minimum of the H3 integrand over samples with `|x| >= R`. The
/// radius `R` itself is always sampled, so the reported value is the infimum
/// over the open exterior when the integrand is continuous.
pub fn check_h3(
    field: &ForceField,
    ctx: &WeightContext,
    radius: f64,
    samples: &SampleSet,
) -> Result<H3Report> {
    if !(radius > 0.0 && radius < samples.r_max) {
        return Err(FpkError::Config(format!(
            "H3 radius must lie in (0, r_max = {}), got {radius}",
            samples.r_max
        )));
    }
    let points: Vec<_> = samples
        .clone()
        .with_radius(radius)
        .points()
        .into_iter()
        .filter(|p| p.0 >= radius)
        .collect();
    let values = evaluate(&points, "H3 integrand", |x| h3_integrand(field, x, ctx))?;
    let (i, omega_star) = par::argmin(&values).expect("non-empty exterior sweep");
    Ok(H3Report {
        omega_star,
        radius,
        argmin: points[i].1,
        verdict: Verdict::from_bool(omega_star > 0.0),
    })
}

/// Smallest integer radius beyond which the H3 integrand is positive at every
/// sample, or `None` if it is nonpositive somewhere near `r_max`.
pub fn h3_positive_radius(
    field: &ForceField,
    ctx: &WeightContext,
    samples: &SampleSet,
) -> Result<Option<f64>> {
    let points = samples.points();
    let values = evaluate(&points, "H3 integrand", |x| h3_integrand(field, x, ctx))?;
    let last_bad = points
        .iter()
        .zip(&values)
        .filter(|(_, v)| **v <= 0.0)
        .map(|(p, _)| p.0)
        .fold(None, |acc: Option<f64>, r| {
            Some(acc.map_or(r, |a| a.max(r)))
        });
    let radius = match last_bad {
        None => 1.0,
        Some(r) => r.floor() + 1.0,
    };
    Ok((radius < samples.r_max).then_some(radius))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lambda0Report {
    /// The larger of the two forms below.
    pub lambda0: f64,
    /// With `k (k - 2) |x|^2` in the second term.
    pub lambda0_k_minus_2: f64,
    /// With `k (k + d - 2) |x|^2`, matching the weight Laplacian.
    pub lambda0_k_plus_d_minus_2: f64,
    pub forms_differ: bool,
}

/// Coercivity shift `max_x [k d / (1+|x|^2) + c |x|^2 / (1+|x|^2)^2] - beta0`,
/// evaluated for both `c = k (k - 2)` and `c = k (k + d - 2)`.
pub fn lambda0(beta0: f64, ctx: &WeightContext, samples: &SampleSet) -> Lambda0Report {
    let k = ctx.k;
    let d = ctx.dim as f64;
    let radii = samples.radii();
    let max_form = |c: f64| {
        radii
            .iter()
            .map(|r| {
                let r2 = r * r;
                let b2 = 1.0 + r2;
                k * d / b2 + c * r2 / (b2 * b2)
            })
            .fold(f64::NEG_INFINITY, f64::max)
            - beta0
    };
    let a = max_form(k * (k - 2.0));
    let b = max_form(k * (k + d - 2.0));
    Lambda0Report {
        lambda0: a.max(b),
        lambda0_k_minus_2: a,
        lambda0_k_plus_d_minus_2: b,
        forms_differ: (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0),
    }
}

/// Growth rate of `||f(t)||_{L^p_k}`: the energy identity gives
/// `d/dt ||f||_p^p <= -inf_x H3(x; p) ||f||_p^p`, so the rate is
/// `max_x(-H3(x; p)) / p` over the sweep.
pub fn lambda0_p(field: &ForceField, ctx: &WeightContext, samples: &SampleSet) -> Result<f64> {
    let points = samples.points();
    let values = evaluate(&points, "H3 integrand", |x| h3_integrand(field, x, ctx))?;
    let (_, min) = par::argmin(&values).expect("non-empty sweep");
    Ok(-min / ctx.p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjointReport {
    pub b: f64,
    pub alpha0: f64,
    pub argmin: Point,
    /// Minimum over the doubled sweep.
    pub b_doubled: f64,
    pub verdict: Verdict,
}

/// `b = inf L* psi / psi` for `psi = <x>^(-alpha0)`; PASS when the infimum
/// does not move when the sweep range is doubled.
pub fn adjoint_subeigen(
    field: &ForceField,
    alpha0: f64,
    samples: &SampleSet,
) -> Result<AdjointReport> {
    if !(alpha0 > 0.0) {
        return Err(FpkError::Config(format!(
            "alpha0 must be positive, got {alpha0}"
        )));
    }
    let run = |s: &SampleSet| -> Result<(f64, Point)> {
        let points = s.points();
        let values = evaluate(&points, "adjoint ratio", |x| {
            adjoint_ratio(field, x, alpha0)
        })?;
        let (i, b) = par::argmin(&values).expect("non-empty sweep");
        Ok((b, points[i].1))
    };
    let (b, argmin) = run(samples)?;
    let (b_doubled, _) = run(&samples.doubled())?;
    let stable = (b - b_doubled).abs() <= 1e-9 * b.abs().max(1.0);
    Ok(AdjointReport {
        b,
        alpha0,
        argmin,
        b_doubled,
        verdict: Verdict::from_bool(stable),
    })
}

/// All hypothesis checks for one field and weight context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub field: String,
    pub h1: H1Report,
    pub h2: H2Report,
    pub h3: H3Report,
    pub lambda0: Lambda0Report,
    pub adjoint: AdjointReport,
    pub sampling: SamplingMeta,
}

#[derive(Clone, Debug, Default)]
pub struct HypothesisOptions {
    pub gamma: Option<f64>,
    pub gamma2: Option<f64>,
    /// Exterior radius for H3; chosen automatically when absent.
    pub radius: Option<f64>,
    pub alpha0: Option<f64>,
}

impl HypothesisReport {
    pub fn compute(
        field: &ForceField,
        ctx: &WeightContext,
        samples: &SampleSet,
        opts: &HypothesisOptions,
    ) -> Result<Self> {
        let gamma = opts.gamma.unwrap_or_else(|| field.natural_exponent());
        let gamma2 = opts.gamma2.unwrap_or(gamma);
        let h1 = check_h1(field, gamma, gamma2, samples)?;
        let h2 = check_h2(field, ctx, samples)?;
        let radius = match opts.radius {
            Some(r) => r,
            None => h3_positive_radius(field, ctx, samples)?.unwrap_or(samples.r_max / 2.0),
        };
        let h3 = check_h3(field, ctx, radius, samples)?;
        let lambda0 = lambda0(h2.beta0, ctx, samples);
        let alpha0 = opts.alpha0.unwrap_or(ctx.dim as f64 + 2.0);
        let adjoint = adjoint_subeigen(field, alpha0, samples)?;
        Ok(Self {
            field: field.label(),
            h1,
            h2,
            h3,
            lambda0,
            adjoint,
            sampling: samples.meta(),
        })
    }

    pub fn all_pass(&self) -> bool {
        self.h1.verdict.is_pass() && self.h3.verdict.is_pass() && self.adjoint.verdict.is_pass()
    }

    /// Flat JSON object with the constants and verdicts.
    pub fn to_flat_json(&self) -> serde_json::Value {
        serde_json::json!({
            "field": self.field,
            "alpha": self.h1.alpha,
            "beta": self.h1.beta,
            "alpha2": self.h1.alpha2,
            "beta2": self.h1.beta2,
            "gamma": self.h1.gamma,
            "gamma2": self.h1.gamma2,
            "beta0": self.h2.beta0,
            "beta0_argmin": self.h2.argmin,
            "p": self.h2.p,
            "omega_star": self.h3.omega_star,
            "R": self.h3.radius,
            "omega_star_argmin": self.h3.argmin,
            "lambda0": self.lambda0.lambda0,
            "lambda0_k_minus_2": self.lambda0.lambda0_k_minus_2,
            "lambda0_k_plus_d_minus_2": self.lambda0.lambda0_k_plus_d_minus_2,
            "lambda0_forms_differ": self.lambda0.forms_differ,
            "b": self.adjoint.b,
            "alpha0": self.adjoint.alpha0,
            "verdicts": {
                "h1": self.h1.verdict,
                "h2": Verdict::Pass,
                "h3": self.h3.verdict,
                "b": self.adjoint.verdict,
            },
            "r_max": self.sampling.r_max,
            "radial_samples": self.sampling.radial_samples,
            "angular_samples": self.sampling.angular_samples,
            "sampling_caveat": self.sampling.caveat,
        })
    }
}
