//! Time stepping of `d/dt f = L_h f`, resolvent solves, trajectory observers
//! and exponential decay fitting.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{FpkError, Result};
use crate::fields::Verdict;
use crate::grid::{fmt17, mass, weighted_norm, GridFunction, OperatorMatrix};
use crate::linalg::{BandedLu, CsrMatrix};

/// Distances at or below this are treated as underflow by [`decay_fit`].
pub const DISTANCE_FLOOR: f64 = 1e-14;

/// Solves `(lambda I - L_h) f = f0`. For `lambda > 0` the matrix is an
/// M-matrix, so `f0 >= 0` gives `f >= 0`.
pub fn resolvent_solve(
    op: &OperatorMatrix,
    lambda: f64,
    f0: &GridFunction,
) -> Result<GridFunction> {
    if !(lambda > 0.0) {
        return Err(FpkError::Singular(0));
    }
    let lu = BandedLu::factor(&op.matrix().shifted_scaled(lambda, -1.0))?;
    GridFunction::new(*op.grid(), lu.solve(f0.values()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// `(I - dt L) f' = f`. Positivity preserving for every `dt`.
    #[default]
    ImplicitEuler,
    /// `(I - dt/2 L) f' = (I + dt/2 L) f`. Second order, but positivity holds
    /// only while `dt * max|diag L| <= 2`.
    CrankNicolson,
}

/// Factorised one-step propagator for a fixed operator and step.
#[derive(Clone, Debug)]
pub struct Stepper {
    lu: BandedLu,
    explicit: Option<CsrMatrix>,
    dt: f64,
}

impl Stepper {
    pub fn new(op: &OperatorMatrix, dt: f64, integrator: Integrator) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(FpkError::Config(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let (lu, explicit) = match integrator {
            Integrator::ImplicitEuler => (
                BandedLu::factor(&op.matrix().shifted_scaled(1.0, -dt))?,
                None,
            ),
            Integrator::CrankNicolson => (
                BandedLu::factor(&op.matrix().shifted_scaled(1.0, -0.5 * dt))?,
                Some(op.matrix().shifted_scaled(1.0, 0.5 * dt)),
            ),
        };
        Ok(Self { lu, explicit, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step_in_place(&self, values: &mut Vec<f64>) {
        if let Some(m) = &self.explicit {
            *values = m.matvec(values);
        }
        self.lu.solve_in_place(values);
    }

    pub fn step(&self, f: &GridFunction) -> Result<GridFunction> {
        let mut v = f.values().to_vec();
        self.step_in_place(&mut v);
        GridFunction::new(*f.grid(), v)
    }
}

/// One implicit Euler step.
pub fn step_implicit_euler(op: &OperatorMatrix, f: &GridFunction, dt: f64) -> Result<GridFunction> {
    Stepper::new(op, dt, Integrator::ImplicitEuler)?.step(f)
}

/// What [`evolve`] records at each sample time.
#[derive(Clone, Debug)]
pub struct Observers<'a> {
    /// Unit-mass stationary state; enables the distance observable.
    pub stationary: Option<&'a GridFunction>,
    pub k: f64,
    pub p: f64,
    /// Record every this many steps (the initial and final states are always recorded).
    pub sample_every: usize,
    pub keep_snapshots: bool,
    pub integrator: Integrator,
}

impl<'a> Observers<'a> {
    pub fn new(k: f64, p: f64) -> Self {
        Self {
            stationary: None,
            k,
            p,
            sample_every: 1,
            keep_snapshots: false,
            integrator: Integrator::ImplicitEuler,
        }
    }

    pub fn with_stationary(mut self, g: &'a GridFunction) -> Self {
        self.stationary = Some(g);
        self
    }

    pub fn sample_every(mut self, n: usize) -> Self {
        self.sample_every = n.max(1);
        self
    }

    pub fn keep_snapshots(mut self) -> Self {
        self.keep_snapshots = true;
        self
    }

    pub fn integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub min: Vec<f64>,
    /// `||f(t) - M(f0) G||_{L^2_k}`, when a stationary state was supplied.
    pub dist_l2k: Option<Vec<f64>>,
    /// `||f(t)||_{L^p_k}` at the observer's `p`.
    pub norm_lpk: Vec<f64>,
    pub k: f64,
    pub p: f64,
    pub snapshots: Vec<GridFunction>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,mass,min,dist_l2k,norm_lpk")?;
        for i in 0..self.times.len() {
            let dist = self
                .dist_l2k
                .as_ref()
                .map(|d| fmt17(d[i]))
                .unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt17(self.times[i]),
                fmt17(self.mass[i]),
                fmt17(self.min[i]),
                dist,
                fmt17(self.norm_lpk[i])
            )?;
        }
        Ok(())
    }
}

/// Integrates `d/dt f = L_h f` on `[0, T]` with `round(T / dt)` steps.
pub fn evolve(
    op: &OperatorMatrix,
    f0: &GridFunction,
    t_end: f64,
    dt: f64,
    obs: &Observers,
) -> Result<Trajectory> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(FpkError::Config(format!(
            "final time must be positive, got {t_end}"
        )));
    }
    let stepper = Stepper::new(op, dt, obs.integrator)?;
    let steps = (t_end / dt).round().max(1.0) as usize;
    let grid = *op.grid();
    let m0 = mass(f0);
    let target = obs.stationary.map(|g| g.scaled(m0));
    let mut traj = Trajectory {
        dist_l2k: target.as_ref().map(|_| Vec::new()),
        k: obs.k,
        p: obs.p,
        ..Default::default()
    };
    let record = |t: f64, f: &GridFunction, traj: &mut Trajectory| {
        traj.times.push(t);
        traj.mass.push(mass(f));
        traj.min.push(f.min());
        traj.norm_lpk.push(weighted_norm(f, obs.k, obs.p));
        if let (Some(d), Some(target)) = (traj.dist_l2k.as_mut(), target.as_ref()) {
            d.push(weighted_norm(&f.axpy(-1.0, target), obs.k, 2.0));
        }
        if obs.keep_snapshots {
            traj.snapshots.push(f.clone());
        }
    };
    record(0.0, f0, &mut traj);
    let mut v = f0.values().to_vec();
    for s in 1..=steps {
        stepper.step_in_place(&mut v);
        if s % obs.sample_every == 0 || s == steps {
            let f = GridFunction::new(grid, v.clone())
                .map_err(|_| FpkError::Numeric(format!("non-finite state after step {s}")))?;
            record(s as f64 * dt, &f, &mut traj);
        }
    }
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub omega: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub t0: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    /// Largest `|log fit - log data|` inside the window.
    pub residual: f64,
    pub samples: usize,
    /// The window was cut short because distances reached the floor.
    pub underflow_shrunk: bool,
}

/// Least-squares fit of `log d(t) = log C - omega t` over `t >= window_fraction * T`.
pub fn decay_fit(traj: &Trajectory, window_fraction: f64) -> Result<DecayFit> {
    let dist = traj
        .dist_l2k
        .as_ref()
        .ok_or_else(|| FpkError::EmptyWindow("trajectory has no distance observable".into()))?;
    fit_exponential(&traj.times, dist, window_fraction)
}

/// Fits `values(t) ~ C exp(-omega t)` on the tail window of a series.
pub fn fit_exponential(times: &[f64], values: &[f64], window_fraction: f64) -> Result<DecayFit> {
    if !(0.0..1.0).contains(&window_fraction) {
        return Err(FpkError::Config(format!(
            "window fraction must lie in [0, 1), got {window_fraction}"
        )));
    }
    let t_final = times.last().copied().unwrap_or(0.0);
    let t0 = window_fraction * t_final;
    let mut window: Vec<(f64, f64)> = Vec::new();
    let mut shrunk = false;
    for (&t, &d) in times.iter().zip(values) {
        if t < t0 {
            continue;
        }
        if d <= DISTANCE_FLOOR {
            shrunk = true;
            break;
        }
        window.push((t, d.ln()));
    }
    if window.len() < 10 {
        let msg = format!("{} usable samples in [{t0}, {t_final}]", window.len());
        return Err(if shrunk {
            FpkError::Underflow(msg)
        } else {
            FpkError::EmptyWindow(msg)
        });
    }
    let n = window.len() as f64;
    let tm = window.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = window.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = window.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let sxx: f64 = window.iter().map(|p| (p.0 - tm) * (p.0 - tm)).sum();
    if sxx == 0.0 {
        return Err(FpkError::EmptyWindow("window spans a single time".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let residual = window
        .iter()
        .map(|p| (intercept + slope * p.0 - p.1).abs())
        .fold(0.0, f64::max);
    Ok(DecayFit {
        omega: -slope,
        c: intercept.exp(),
        t0,
        t_end: window.last().unwrap().0,
        residual,
        samples: window.len(),
        underflow_shrunk: shrunk,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LpReport {
    pub p: f64,
    pub k: f64,
    pub lambda0_p: f64,
    /// `max_t (||f(t)|| - e^{lambda0_p t} ||f0||) / ||f0||`.
    pub max_violation: f64,
    pub verdict: Verdict,
}

/// Checks `||f(t)||_{L^p_k} <= e^{lambda0_p t} ||f0||_{L^p_k}` along a trajectory.
/// Uses the recorded norms when `(p, k)` match the trajectory's observers and
/// the stored snapshots otherwise.
pub fn lp_monitor(traj: &Trajectory, p: f64, k: f64, lambda0_p: f64) -> Result<LpReport> {
    let norms: Vec<f64> = if p == traj.p && k == traj.k {
        traj.norm_lpk.clone()
    } else if traj.snapshots.len() == traj.times.len() && !traj.snapshots.is_empty() {
        traj.snapshots
            .iter()
            .map(|f| weighted_norm(f, k, p))
            .collect()
    } else {
        return Err(FpkError::Config(format!(
            "trajectory records L^{}_{} norms and no snapshots; cannot monitor L^{p}_{k}",
            traj.p, traj.k
        )));
    };
    let n0 = norms.first().copied().unwrap_or(0.0);
    let scale = if n0 > 0.0 { n0 } else { 1.0 };
    let max_violation = traj
        .times
        .iter()
        .zip(&norms)
        .map(|(t, n)| (n - (lambda0_p * t).exp() * n0) / scale)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(LpReport {
        p,
        k,
        lambda0_p,
        max_violation,
        verdict: Verdict::from_bool(max_violation <= 1e-12),
    })
}
