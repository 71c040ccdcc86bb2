//! Time integration of the one-dimensional equation on a growing periodic
//! domain.
//!
//! Each step is a Strang splitting: half a step of exact Fourier diffusion,
//! a full explicit-midpoint reaction step, and another half diffusion step.
//! The reaction is written as `g (<g, R*g> / int g - R*g)`, which equals the
//! unit-mass form and leaves the discrete mass invariant to roundoff.

use serde::{Deserialize, Serialize};

use crate::constants::THETA_CRIT;
use crate::convolve::Spectral;
use crate::diagnostics::{
    self, gaussian_tail_constant, holder_bounds, macros_with, young_maxima, HolderBound,
    MacroRecord, YoungMaxima,
};
use crate::error::{Error, Result};
use crate::grid::{resample, Field1D, Integrate, UniformGrid1D};
use crate::kernel::{Kernel, KernelSpec};

/// Negative values above this are roundoff and get clamped to zero.
pub const NEGATIVE_TOL: f64 = 1e-12;
/// Largest admissible mass change in one step.
pub const STEP_MASS_TOL: f64 = 1e-10;

/// Initial density, normalized to unit discrete mass on the starting grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialData {
    /// `1/(2a)` on `[-a, a]`, sampled by exact cell averages.
    Indicator { half_width: f64 },
    /// Centered normal density with the given variance.
    Gaussian { variance: f64 },
    /// Tabulated profile, linearly interpolated.
    Table { x: Vec<f64>, g: Vec<f64> },
}

impl InitialData {
    pub fn sample(&self, grid: &UniformGrid1D) -> Result<Field1D> {
        let dx = grid.dx();
        let mut f = match self {
            InitialData::Indicator { half_width: a } => {
                if !(*a > 0.0) {
                    return Err(Error::config("indicator half-width must be positive"));
                }
                Field1D::from_fn(*grid, |x| {
                    let lo = (x - 0.5 * dx).max(-a);
                    let hi = (x + 0.5 * dx).min(*a);
                    (hi - lo).max(0.0) / dx
                })
            }
            InitialData::Gaussian { variance } => {
                if !(*variance > 0.0) {
                    return Err(Error::config("gaussian variance must be positive"));
                }
                Field1D::from_fn(*grid, |x| (-x * x / (2.0 * variance)).exp())
            }
            InitialData::Table { x, g } => {
                if x.len() != g.len() || x.len() < 2 || x.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::config("initial table needs increasing x and matching g"));
                }
                if g.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::config("initial data must be finite and nonnegative"));
                }
                Field1D::from_fn(*grid, |t| {
                    if t < x[0] || t > x[x.len() - 1] {
                        return 0.0;
                    }
                    let k = x.partition_point(|&xi| xi <= t).clamp(1, x.len() - 1);
                    let u = (t - x[k - 1]) / (x[k] - x[k - 1]);
                    (1.0 - u) * g[k - 1] + u * g[k]
                })
            }
        };
        let mass = f.integral();
        if !(mass > 0.0) {
            return Err(Error::config("initial data has no mass on the grid"));
        }
        f.values.iter_mut().for_each(|v| *v /= mass);
        Ok(f)
    }
}

/// Declarative description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    pub g0: InitialData,
    pub kernel: KernelSpec,
    pub t0: f64,
    pub t_max: f64,
    pub dt_max: f64,
    pub cfl_reaction: f64,
    /// Initial half-extent: the domain is `[-l0, l0)`.
    pub l0: f64,
    pub n: usize,
    pub snapshots_per_decade: usize,
    pub nonlinearity: bool,
    pub regrid: bool,
    /// Values below `noise_floor * max g` are zeroed after each step.
    /// FFT roundoff ahead of the front would otherwise grow like
    /// `exp(int E dt)` and seed spurious mass far from the bulk.
    pub noise_floor: f64,
    /// Run the per-snapshot inequality audits.
    pub audit: bool,
    /// Times at which full fields are kept in the output.
    pub keep_fields: Vec<f64>,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            g0: InitialData::Indicator { half_width: 1.0 },
            kernel: KernelSpec::Delta,
            t0: 1.0,
            t_max: 1e3,
            dt_max: 5.0,
            cfl_reaction: 0.2,
            l0: 20.0,
            n: 1 << 15,
            snapshots_per_decade: 40,
            nonlinearity: true,
            regrid: true,
            noise_floor: 1e-13,
            audit: false,
            keep_fields: Vec::new(),
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive, got {v}")))
            }
        };
        pos("t0", self.t0)?;
        pos("dt_max", self.dt_max)?;
        pos("cfl_reaction", self.cfl_reaction)?;
        pos("l0", self.l0)?;
        if !(self.noise_floor >= 0.0 && self.noise_floor < 1e-6) {
            return Err(Error::config("noise_floor must lie in [0, 1e-6)"));
        }
        if !(self.t_max > self.t0) {
            return Err(Error::config("t_max must exceed t0"));
        }
        if self.snapshots_per_decade == 0 {
            return Err(Error::config("snapshots_per_decade must be positive"));
        }
        UniformGrid1D::symmetric(self.l0, self.n)?;
        Ok(())
    }

    /// Geometric schedule `t0 * 10^{k/per_decade}` capped by `t_max`.
    pub fn schedule(&self) -> Vec<f64> {
        let per = self.snapshots_per_decade as f64;
        let mut out = Vec::new();
        let mut k = 0u32;
        loop {
            let t = self.t0 * 10f64.powf(k as f64 / per);
            if t > self.t_max * (1.0 + 1e-12) {
                break;
            }
            out.push(t.min(self.t_max));
            k += 1;
        }
        if (out.last().copied().unwrap_or(0.0) - self.t_max).abs() > 1e-9 * self.t_max {
            out.push(self.t_max);
        }
        out
    }
}

/// Solver state: time, density, kernel sampled on the current grid, and the
/// number of regrids so far.
#[derive(Debug, Clone)]
pub struct EvolveState {
    pub t: f64,
    pub g: Field1D,
    pub kernel: Kernel,
    pub stage: usize,
}

/// Per-run extrema of the step-level invariants.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StepMonitor {
    pub steps: usize,
    pub max_step_mass_drift: f64,
    pub max_mass_drift: f64,
    pub max_e_increase: f64,
    pub max_m_increase: f64,
    pub m_sign_changes: usize,
    pub clamped_steps: usize,
    pub most_negative: f64,
    /// Total mass removed by the noise floor.
    pub floored_mass: f64,
}

/// One regrid event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegridEvent {
    pub t: f64,
    pub old_half_extent: f64,
    pub new_half_extent: f64,
    pub old_n: usize,
    pub new_n: usize,
    pub mass_before: f64,
    pub mass_after_interp: f64,
    pub e_before: f64,
    pub e_after: f64,
}

/// Inequality audits at one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotAudit {
    pub t: f64,
    pub young: (f64, f64, f64),
    pub young_ordered: bool,
    pub tail_constant: f64,
    pub nash_ratio: f64,
    /// `None` when the profile failed the symmetric-decreasing check.
    pub holder_ok: Option<bool>,
    pub holder_worst_margin: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Vec<MacroRecord>,
    pub audits: Vec<SnapshotAudit>,
    pub fields: Vec<(f64, Field1D)>,
    pub final_state: EvolveState,
    pub monitor: StepMonitor,
    pub regrids: Vec<RegridEvent>,
}

/// Stateful stepper owning the FFT workspace for the current grid.
pub struct Evolver {
    pub config: EvolveConfig,
    pub state: EvolveState,
    spectral: Spectral,
    pub monitor: StepMonitor,
    pub regrids: Vec<RegridEvent>,
    mass0: f64,
    last_e: f64,
    last_m: f64,
    last_dm_sign: i8,
    w: Vec<f64>,
    half: Vec<f64>,
    mid: Vec<f64>,
}

impl Evolver {
    pub fn new(config: EvolveConfig) -> Result<Self> {
        config.validate()?;
        let grid = UniformGrid1D::symmetric(config.l0, config.n)?;
        let g = config.g0.sample(&grid)?;
        if g.mass_outside(0.9 * config.l0) > 1e-12 {
            return Err(Error::overflow("initial data reaches the outer tenth of the domain"));
        }
        let kernel = config.kernel.build(&grid)?;
        let state = EvolveState {
            t: config.t0,
            g,
            kernel,
            stage: 0,
        };
        Self::from_state(config, state)
    }

    pub fn from_state(config: EvolveConfig, state: EvolveState) -> Result<Self> {
        let mut spectral = Spectral::new(state.g.grid, &state.kernel)?;
        let mac = macros_with(&mut spectral, &state.g.values);
        let n = state.g.grid.n;
        Ok(Self {
            mass0: state.g.integral(),
            last_e: mac.e,
            last_m: mac.m,
            last_dm_sign: 0,
            config,
            state,
            spectral,
            monitor: StepMonitor::default(),
            regrids: Vec::new(),
            w: vec![0.0; n],
            half: vec![0.0; n],
            mid: vec![0.0; n],
        })
    }

    /// Admissible step at the current state.
    pub fn max_dt(&self) -> f64 {
        let m = self.state.g.max();
        if self.config.nonlinearity && m > 0.0 {
            self.config.dt_max.min(self.config.cfl_reaction / m)
        } else {
            self.config.dt_max
        }
    }

    fn reaction_rhs(&mut self, g: &[f64], out: &mut [f64]) {
        let dx = self.spectral.grid().dx();
        self.spectral.apply_r(g, &mut self.w);
        let mass: f64 = g.iter().sum::<f64>() * dx;
        let e: f64 = g.iter().zip(&self.w).map(|(a, b)| a * b).sum::<f64>() * dx;
        let rate = e / mass;
        for ((o, gi), wi) in out.iter_mut().zip(g).zip(&self.w) {
            *o = gi * (rate - wi);
        }
    }

    /// Advance by `dt` with one Strang step.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0) || dt > self.max_dt() * (1.0 + 1e-12) {
            return Err(Error::numerical(format!(
                "step {dt} violates the bound {}",
                self.max_dt()
            )));
        }
        let dx = self.state.g.grid.dx();
        let mass_before = self.state.g.integral();
        let mut g = std::mem::take(&mut self.state.g.values);
        self.spectral.heat(&mut g, 0.5 * dt);
        if self.config.nonlinearity {
            let mut k = std::mem::take(&mut self.half);
            let mut mid = std::mem::take(&mut self.mid);
            self.reaction_rhs(&g, &mut k);
            for ((m, gi), ki) in mid.iter_mut().zip(&g).zip(&k) {
                *m = gi + 0.5 * dt * ki;
            }
            self.reaction_rhs(&mid, &mut k);
            for (gi, ki) in g.iter_mut().zip(&k) {
                *gi += dt * ki;
            }
            self.half = k;
            self.mid = mid;
        }
        self.spectral.heat(&mut g, 0.5 * dt);
        self.state.g.values = g;
        self.state.t += dt;

        let most_negative = self.state.g.values.iter().copied().fold(0.0, f64::min);
        self.monitor.most_negative = self.monitor.most_negative.min(most_negative);
        if most_negative < 0.0 {
            self.monitor.clamped_steps += 1;
        }
        self.state.g.clamp_density(NEGATIVE_TOL)?;
        if self.config.noise_floor > 0.0 {
            let cut = self.config.noise_floor * self.state.g.max();
            let mut removed = 0.0;
            for v in &mut self.state.g.values {
                if *v < cut {
                    removed += *v;
                    *v = 0.0;
                }
            }
            self.monitor.floored_mass += removed * dx;
        }

        let mass_after = self.state.g.values.iter().sum::<f64>() * dx;
        let drift = (mass_after - mass_before).abs();
        if !(drift <= STEP_MASS_TOL) {
            return Err(Error::numerical(format!(
                "mass changed by {drift:.3e} in one step at t = {}",
                self.state.t
            )));
        }
        self.monitor.steps += 1;
        self.monitor.max_step_mass_drift = self.monitor.max_step_mass_drift.max(drift);
        self.monitor.max_mass_drift = self.monitor.max_mass_drift.max((mass_after - self.mass0).abs());

        let mac = macros_with(&mut self.spectral, &self.state.g.values);
        self.monitor.max_e_increase = self.monitor.max_e_increase.max(mac.e - self.last_e);
        let dm = mac.m - self.last_m;
        self.monitor.max_m_increase = self.monitor.max_m_increase.max(dm);
        let sign = if dm > 1e-15 {
            1
        } else if dm < -1e-15 {
            -1
        } else {
            0
        };
        if sign != 0 && self.last_dm_sign != 0 && sign != self.last_dm_sign {
            self.monitor.m_sign_changes += 1;
        }
        if sign != 0 {
            self.last_dm_sign = sign;
        }
        self.last_e = mac.e;
        self.last_m = mac.m;
        Ok(())
    }

    /// Whether more than `1e-12` of mass sits in the outer tenth.
    pub fn frontier_fired(&self) -> bool {
        let half = 0.5 * self.state.g.grid.extent();
        self.state.g.mass_outside(0.9 * half) > 1e-12
    }

    /// Grow the domain to `max(L, 6 t^{2/3} + 10)` (or `1.5 L` if that is no
    /// growth), refining `n` if the spacing exceeds `max(0.05, t^{1/3}/16)`.
    pub fn regrid(&mut self) -> Result<()> {
        let old = self.state.g.grid;
        let t = self.state.t;
        let half = 0.5 * old.extent();
        let mut new_half = half.max(6.0 * t.powf(2.0 / 3.0) + 10.0);
        if new_half <= half * (1.0 + 1e-12) {
            new_half = 1.5 * half;
        }
        let dx_cap = 0.05f64.max(t.cbrt() / 16.0);
        let mut n = old.n;
        while 2.0 * new_half / n as f64 > dx_cap {
            n *= 2;
        }
        let grid = UniformGrid1D::symmetric(new_half, n)?;
        let mass_before = self.state.g.integral();
        let e_before = self.last_e;
        let mut g = resample(&self.state.g, grid)?;
        g.clamp_density(NEGATIVE_TOL)?;
        let mass_interp = g.integral();
        let scale = mass_before / mass_interp;
        g.values.iter_mut().for_each(|v| *v *= scale);
        let kernel = self.config.kernel.build(&grid)?;
        let mut spectral = Spectral::new(grid, &kernel)?;
        let mac = macros_with(&mut spectral, &g.values);
        self.regrids.push(RegridEvent {
            t,
            old_half_extent: half,
            new_half_extent: new_half,
            old_n: old.n,
            new_n: n,
            mass_before,
            mass_after_interp: mass_interp,
            e_before,
            e_after: mac.e,
        });
        self.state.g = g;
        self.state.kernel = kernel;
        self.state.stage += 1;
        self.spectral = spectral;
        self.last_e = mac.e;
        self.last_m = mac.m;
        self.w = vec![0.0; n];
        self.half = vec![0.0; n];
        self.mid = vec![0.0; n];
        Ok(())
    }

    /// Macroscopic record of the current state.
    pub fn record(&mut self) -> Result<MacroRecord> {
        let g = &self.state.g;
        let dx = g.grid.dx();
        let mac = macros_with(&mut self.spectral, &g.values);
        let mass = g.integral();
        let mom = diagnostics::moments(g, &[1.0, 2.0, 4.0])?;
        self.spectral.apply_r(&g.values, &mut self.w);
        let rate = mac.e / mass;
        let reaction_dissipation = if self.config.nonlinearity {
            g.values
                .iter()
                .zip(&self.w)
                .map(|(gi, wi)| gi * (wi - rate).powi(2))
                .sum::<f64>()
                * dx
        } else {
            0.0
        };
        let t = self.state.t;
        let level = 0.5 * THETA_CRIT * t.powf(-2.0 / 3.0);
        let (front_left, front_right) =
            crate::selfsim1d::crossing(&g.values, g.grid.x_min, dx, level)
                .unwrap_or((f64::NAN, f64::NAN));
        Ok(MacroRecord {
            t,
            tau: t.cbrt() - 1.0,
            mass,
            e: mac.e,
            d: mac.d,
            m: mac.m,
            l2sq: g.l2sq(),
            m1: mom[0],
            m2: mom[1],
            m4: mom[2],
            front_left,
            front_right,
            reaction_dissipation,
        })
    }

    /// Young maxima, Gaussian-tail constant, Nash ratio and stability bounds.
    pub fn audit(&mut self) -> SnapshotAudit {
        let g = &self.state.g;
        let t = self.state.t;
        let YoungMaxima { m_w, m_u, m_g } = young_maxima(&mut self.spectral, &g.values);
        let young_ordered = m_w <= m_u + 1e-12 && m_u <= m_g + 1e-12;
        let tail_constant = gaussian_tail_constant(g, t);
        let mac = macros_with(&mut self.spectral, &g.values);
        let l1: f64 = g.integral();
        let nash_ratio = mac.e.powi(3) / (l1.powi(4) * mac.d);
        let (holder_ok, holder_worst_margin) = holder_audit(g, mac.e);
        SnapshotAudit {
            t,
            young: (m_w, m_u, m_g),
            young_ordered,
            tail_constant,
            nash_ratio,
            holder_ok,
            holder_worst_margin,
        }
    }
}

/// Check both stability bounds for balls holding a quarter, half and three
/// quarters of the mass, with probes inside and outside each ball.
/// Returns `(verdict, worst margin relative to max f)`.
fn holder_audit(g: &Field1D, e: f64) -> (Option<bool>, f64) {
    if diagnostics::check_symmetric_decreasing(g, 1e-10).is_err() {
        return (None, f64::NAN);
    }
    let grid = g.grid;
    let dx = grid.dx();
    let j0 = grid.origin_index().expect("symmetric grid");
    let n = grid.n;
    let m = g.max();
    // Cumulative mass of B_r for r = k dx, matching the bound's quadrature.
    let mut cum = Vec::with_capacity(n / 2);
    let mut acc = g.values[j0] * dx;
    cum.push(acc);
    for k in 1..n / 2 {
        acc += (g.values[j0 + k] + g.values[(j0 + n - k) % n]) * dx;
        cum.push(acc);
    }
    let mut ok = true;
    let mut worst = f64::INFINITY;
    for target in [0.25, 0.5, 0.75] {
        let kr = cum.partition_point(|&c| c < target);
        if kr < 4 || 4 * kr >= n / 2 {
            continue;
        }
        let r = kr as f64 * dx + 0.5 * dx;
        for kp in [0, kr / 2, kr] {
            if let Ok(HolderBound::Lower(lo)) = holder_bounds(g, e, r, kp as f64 * dx) {
                let margin = (g.values[j0 + kp] - lo) / m;
                worst = worst.min(margin);
                ok &= margin >= -1e-9;
            }
        }
        for kp in [kr + 1, kr + kr / 2, 2 * kr] {
            if kp >= n / 2 {
                continue;
            }
            if let Ok(HolderBound::Upper(hi)) = holder_bounds(g, e, r, kp as f64 * dx) {
                let margin = (hi - g.values[j0 + kp]) / m;
                worst = worst.min(margin);
                ok &= margin >= -1e-9;
            }
        }
    }
    (Some(ok), worst)
}

/// Integrate from `t0` to `t_max`, recording at the geometric schedule and
/// regridding whenever the frontier criterion fires.
pub fn run(config: EvolveConfig) -> Result<RunOutput> {
    let schedule = config.schedule();
    let mut ev = Evolver::new(config)?;
    let mut trajectory = Vec::with_capacity(schedule.len());
    let mut audits = Vec::new();
    let mut fields = Vec::new();
    let keep = ev.config.keep_fields.clone();
    let do_audit = ev.config.audit;
    let mut snapshot = |ev: &mut Evolver| -> Result<()> {
        trajectory.push(ev.record()?);
        if do_audit {
            audits.push(ev.audit());
        }
        let t = ev.state.t;
        if keep.iter().any(|k| (k - t).abs() <= 1e-9 * t.max(1.0)) {
            fields.push((t, ev.state.g.clone()));
        }
        Ok(())
    };
    snapshot(&mut ev)?;
    for &target in &schedule[1..] {
        while ev.state.t < target * (1.0 - 1e-14) {
            let remaining = target - ev.state.t;
            let mut dt = ev.max_dt();
            if remaining <= dt * (1.0 + 1e-12) {
                dt = remaining;
            } else if remaining < 2.0 * dt {
                dt = 0.5 * remaining;
            }
            ev.step(dt)?;
            if ev.config.regrid && ev.frontier_fired() {
                ev.regrid()?;
            }
        }
        ev.state.t = target;
        snapshot(&mut ev)?;
    }
    if !ev.config.regrid && ev.frontier_fired() {
        return Err(Error::overflow("mass reached the outer tenth with regridding disabled"));
    }
    Ok(RunOutput {
        trajectory,
        audits,
        fields,
        monitor: ev.monitor.clone(),
        regrids: ev.regrids.clone(),
        final_state: ev.state,
    })
}
