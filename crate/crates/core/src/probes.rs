//! Seeded test functions: Gaussian bumps, random nonnegative data and the
//! nested low-discrepancy Gaussian family used by the Nash check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fields::Point;
use crate::grid::{Grid, GridFunction};

/// Independent stream for trial `index` under a base seed.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Isotropic Gaussian `amplitude * exp(-|x - center|^2 / (2 width^2))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Point,
    pub width: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn eval(&self, x: &Point) -> f64 {
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        self.amplitude * (-(dx * dx + dy * dy) / (2.0 * self.width * self.width)).exp()
    }

    pub fn sample(&self, grid: &Grid) -> GridFunction {
        grid.sample(|x| self.eval(x))
    }
}

/// Random bump with centre in `[-R/2, R/2]^d` and width in `[w_lo, w_hi]`.
pub fn random_bump<R: Rng>(grid: &Grid, rng: &mut R, widths: (f64, f64)) -> Bump {
    let half = 0.5 * grid.half_width();
    let mut center = [0.0; 2];
    for c in center.iter_mut().take(grid.dim()) {
        *c = rng.random_range(-half..=half);
    }
    Bump {
        center,
        width: rng.random_range(widths.0..=widths.1),
        amplitude: 1.0,
    }
}

/// Sum of one to three positive bumps.
pub fn random_smooth_nonnegative<R: Rng>(grid: &Grid, rng: &mut R) -> GridFunction {
    let count = rng.random_range(1..=3);
    let bumps: Vec<Bump> = (0..count)
        .map(|_| {
            let mut b = random_bump(grid, rng, (0.3, 1.5));
            b.amplitude = rng.random_range(0.1..=1.0);
            b
        })
        .collect();
    grid.sample(|x| bumps.iter().map(|b| b.eval(x)).sum())
}

/// Cellwise independent uniform values on a random subset of cells; rough data
/// that stresses positivity preservation.
pub fn random_rough_nonnegative<R: Rng>(grid: &Grid, rng: &mut R) -> GridFunction {
    let density: f64 = rng.random_range(0.05..=1.0);
    let values = (0..grid.cell_count())
        .map(|_| {
            if rng.random_bool(density) {
                rng.random_range(0.0..1.0)
            } else {
                0.0
            }
        })
        .collect();
    GridFunction::new(*grid, values).expect("finite values")
}

/// Smooth function of both signs: difference of two random bumps.
pub fn random_sign_changing<R: Rng>(grid: &Grid, rng: &mut R) -> GridFunction {
    let a = random_bump(grid, rng, (0.3, 2.0));
    let mut b = random_bump(grid, rng, (0.3, 2.0));
    b.amplitude = rng.random_range(0.3..=1.5);
    grid.sample(|x| a.eval(x) - b.eval(x))
}

/// `i`-th element (1-based) of the van der Corput sequence in `base`.
fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut out = 0.0;
    let mut scale = inv;
    while i > 0 {
        out += (i % base) as f64 * scale;
        i /= base;
        scale *= inv;
    }
    out
}

/// First `size` members of a nested Gaussian family with centres in
/// `[-R/2, R/2]^d` and widths in `widths`: the vertices of the parameter box
/// come first, then Halton points. Families of increasing size are nested, so
/// suprema over them are monotone in `size`.
pub fn halton_family(grid: &Grid, size: usize, widths: (f64, f64)) -> Vec<Bump> {
    let half = 0.5 * grid.half_width();
    let d = grid.dim();
    let vertices = (0..1usize << (d + 1)).map(|bits| {
        let mut center = [0.0; 2];
        for (a, c) in center.iter_mut().enumerate().take(d) {
            *c = if bits >> a & 1 == 0 { -half } else { half };
        }
        let width = if bits >> d & 1 == 0 {
            widths.0
        } else {
            widths.1
        };
        Bump {
            center,
            width,
            amplitude: 1.0,
        }
    });
    let bases: [u64; 3] = [2, 3, 5];
    let halton = (1..).map(move |i: u64| {
        let u0 = radical_inverse(i, bases[0]);
        let u1 = radical_inverse(i, bases[1]);
        let u2 = radical_inverse(i, bases[2]);
        let (center, wu) = if d == 1 {
            ([-half + 2.0 * half * u0, 0.0], u1)
        } else {
            ([-half + 2.0 * half * u0, -half + 2.0 * half * u1], u2)
        };
        Bump {
            center,
            width: widths.0 + (widths.1 - widths.0) * wu,
            amplitude: 1.0,
        }
    });
    vertices.chain(halton).take(size).collect()
}
