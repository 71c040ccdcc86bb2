//! Rescaled frames `h`, `u_c` and `G`, a direct solver for the `h`-equation,
//! and front tracking.
//!
//! With `s = t^{1/3} = tau + 1`, `h(tau, y) = s^2 g(s^3, y s^2)` and
//! `u_c(tau, z) = h(tau, c + z / s)`.

use serde::{Deserialize, Serialize};

use crate::constants::THETA_CRIT;
use crate::diagnostics::linear_fit;
use crate::error::{Error, Result};
use crate::evolve1d::{InitialData, NEGATIVE_TOL};
use crate::grid::{cubic_at, Field1D, Integrate, RadialField, RadialGrid, UniformGrid1D};
use crate::tridiag;

/// Snapshot of the `h`-equation.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledFrame {
    pub tau: f64,
    pub h: Field1D,
}

impl RescaledFrame {
    pub fn s(&self) -> f64 {
        self.tau + 1.0
    }
}

/// Default `y`-grid `[-3, 3)` with 4096 nodes.
pub fn default_y_grid() -> UniformGrid1D {
    UniformGrid1D::symmetric(3.0, 4096).expect("static grid")
}

/// Sample `amp * g(lambda * y)` on `target` by cubic interpolation.
fn rescale_line(g: &Field1D, lambda: f64, amp: f64, target: UniformGrid1D) -> Result<Field1D> {
    g.check_finite()?;
    let src = g.grid;
    let dx = src.dx();
    let dy = target.dx();
    let (lo, hi) = (
        lambda * (target.x_min - 0.5 * dy),
        lambda * (target.x_max - 0.5 * dy),
    );
    let lost = (0..src.n)
        .filter(|&j| {
            let x = src.x(j);
            x < lo || x >= hi
        })
        .map(|j| g.values[j].abs())
        .sum::<f64>()
        * dx;
    if lost > 1e-10 {
        return Err(Error::overflow(format!(
            "rescaled grid misses mass {lost:.3e} of the source field"
        )));
    }
    let values = (0..target.n)
        .map(|j| amp * cubic_at(&g.values, (lambda * target.x(j) - src.x_min) / dx))
        .collect();
    let mut out = Field1D {
        grid: target,
        values,
    };
    clamp_roundoff(&mut out);
    Ok(out)
}

/// Interpolation can undershoot by roundoff relative to the peak.
fn clamp_roundoff(f: &mut Field1D) {
    let tol = 1e-12 * f.max().max(0.0);
    for v in &mut f.values {
        if *v < 0.0 && *v >= -tol {
            *v = 0.0;
        }
    }
}

/// `h(y) = s^2 g(y s^2)` with `s = t^{1/3}`, sampled on `y_grid`.
pub fn to_h(g: &Field1D, t: f64, y_grid: UniformGrid1D) -> Result<RescaledFrame> {
    if !(t >= 1.0) {
        return Err(Error::config(format!("to_h needs t >= 1, got {t}")));
    }
    let s = t.cbrt();
    let h = rescale_line(g, s * s, s * s, y_grid)?;
    Ok(RescaledFrame { tau: s - 1.0, h })
}

/// Inverse of [`to_h`]: `g(x) = s^{-2} h(x / s^2)` on `x_grid`.
pub fn from_h(frame: &RescaledFrame, x_grid: UniformGrid1D) -> Result<Field1D> {
    let s = frame.s();
    rescale_line(&frame.h, 1.0 / (s * s), 1.0 / (s * s), x_grid)
}

/// Zoom `u_c(z) = h(c + z / s)` on `z_grid`.
pub fn to_uc(frame: &RescaledFrame, c: f64, z_grid: UniformGrid1D) -> Result<Field1D> {
    let s = frame.s();
    let yg = frame.h.grid;
    let (a, b) = (c + z_grid.x_min / s, c + z_grid.x(z_grid.n - 1) / s);
    if a < yg.x_min || b > yg.x(yg.n - 1) {
        return Err(Error::overflow(format!(
            "zoom window [{a}, {b}] leaves the y-grid [{}, {})",
            yg.x_min, yg.x_max
        )));
    }
    let dy = yg.dx();
    Ok(Field1D::from_fn(z_grid, |z| {
        cubic_at(&frame.h.values, (c + z / s - yg.x_min) / dy)
    }))
}

/// Diffusive rescaling on the line, `G(y) = t^{1/2} g(t^{1/2} y)`, with
/// `tau = ln t`.
#[allow(non_snake_case)]
pub fn to_G(g: &Field1D, t: f64, y_grid: UniformGrid1D) -> Result<(f64, Field1D)> {
    if !(t >= 1.0) {
        return Err(Error::config(format!("to_G needs t >= 1, got {t}")));
    }
    let l = t.sqrt();
    Ok((t.ln(), rescale_line(g, l, l, y_grid)?))
}

/// Radial diffusive rescaling `G(r) = t^{d/2} g(t^{1/2} r)` on `target`.
#[allow(non_snake_case)]
pub fn to_G_radial(g: &RadialField, t: f64, target: RadialGrid) -> Result<(f64, RadialField)> {
    if !(t >= 1.0) {
        return Err(Error::config(format!("to_G needs t >= 1, got {t}")));
    }
    if target.dim != g.grid.dim {
        return Err(Error::config("radial rescaling cannot change dimension"));
    }
    let l = t.sqrt();
    let src = g.grid;
    let dr = src.dr();
    let reach = l * target.r_max;
    let lost: f64 = {
        let w = src.trapezoid_weights();
        (0..=src.n)
            .filter(|&j| src.r(j) > reach)
            .map(|j| w[j] * g.values[j].abs())
            .sum()
    };
    if lost > 1e-10 {
        return Err(Error::overflow(format!("rescaled radial grid misses mass {lost:.3e}")));
    }
    // Even extension through r = 0 for the interpolation stencil.
    let mut ext = Vec::with_capacity(src.n + 3);
    ext.push(g.values[1]);
    ext.extend_from_slice(&g.values);
    let amp = l.powi(src.dim as i32);
    Ok((
        t.ln(),
        RadialField::from_fn(target, |r| amp * cubic_at(&ext, l * r / dr + 1.0)),
    ))
}

/// Outermost crossings of `level` on a sampled line profile, refined by
/// linear interpolation. `None` if no node reaches `level`.
pub fn crossing(values: &[f64], x_min: f64, dx: f64, level: f64) -> Option<(f64, f64)> {
    let first = values.iter().position(|&v| v >= level)?;
    let last = values.iter().rposition(|&v| v >= level)?;
    let interp = |i: usize, j: usize| {
        let (a, b) = (values[i], values[j]);
        let u = if a == b { 0.0 } else { (level - a) / (b - a) };
        x_min + (i as f64 + u * (j as f64 - i as f64)) * dx
    };
    let left = if first == 0 { x_min } else { interp(first - 1, first) };
    let right = if last + 1 == values.len() {
        x_min + last as f64 * dx
    } else {
        interp(last, last + 1)
    };
    Some((left, right))
}

/// Left and right positions where `h` crosses `level`.
pub fn front_position(frame: &RescaledFrame, level: f64) -> Result<(f64, f64)> {
    let m = frame.h.max();
    if !(level > 0.0 && level < m) {
        return Err(Error::NotFound(format!(
            "level {level} is not attained (max h = {m})"
        )));
    }
    let g = frame.h.grid;
    crossing(&frame.h.values, g.x_min, g.dx(), level)
        .ok_or_else(|| Error::NotFound(format!("level {level} is not attained")))
}

/// Slope of `log u_c(z)` against `z` on the right tail where
/// `u in [lo, hi]`, evaluated from `h` with `z = s (y - c)`.
pub fn tail_slope(frame: &RescaledFrame, c: f64, lo: f64, hi: f64) -> Result<f64> {
    let g = frame.h.grid;
    let s = frame.s();
    let j_front = frame
        .h
        .values
        .iter()
        .rposition(|&v| v > hi)
        .ok_or_else(|| Error::NotFound("profile never exceeds the tail window".into()))?;
    let (mut zs, mut ls) = (Vec::new(), Vec::new());
    for j in j_front + 1..g.n {
        let v = frame.h.values[j];
        if v < lo {
            break;
        }
        if v <= hi {
            zs.push(s * (g.x(j) - c));
            ls.push(v.ln());
        }
    }
    if zs.len() < 5 {
        return Err(Error::NotFound(format!("only {} tail points in window", zs.len())));
    }
    Ok(linear_fit(&zs, &ls).slope)
}

/// Settings for the direct `h`-equation solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveHConfig {
    pub g0: InitialData,
    pub y_half_extent: f64,
    pub n: usize,
    pub tau_max: f64,
    /// Record spacing in `tau`.
    pub record_every: f64,
    pub cfl_advection: f64,
    pub cfl_reaction: f64,
    /// Minmod-limited second-order advection instead of first-order upwind.
    pub limiter: bool,
    /// Times at which full frames are kept.
    pub keep_frames: Vec<f64>,
}

impl Default for SolveHConfig {
    fn default() -> Self {
        Self {
            g0: InitialData::Indicator { half_width: 1.0 },
            y_half_extent: 3.0,
            n: 4096,
            tau_max: 9.0,
            record_every: 0.25,
            cfl_advection: 0.5,
            cfl_reaction: 0.2,
            limiter: false,
            keep_frames: Vec::new(),
        }
    }
}

/// Scalars recorded along an `h` run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HRecord {
    pub tau: f64,
    pub mass: f64,
    pub e_h: f64,
    pub m_h: f64,
    pub front_left: f64,
    pub front_right: f64,
}

#[derive(Debug, Clone)]
pub struct HRun {
    pub records: Vec<HRecord>,
    pub frames: Vec<RescaledFrame>,
    pub final_frame: RescaledFrame,
    pub steps: usize,
    pub max_step_mass_drift: f64,
}

struct HSolver {
    grid: UniformGrid1D,
    limiter: bool,
    flux: Vec<f64>,
    k1: Vec<f64>,
    k2: Vec<f64>,
    stage: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    scratch: Vec<f64>,
}

fn minmod(p: f64, q: f64) -> f64 {
    if p * q <= 0.0 {
        0.0
    } else if p.abs() < q.abs() {
        p
    } else {
        q
    }
}

impl HSolver {
    fn new(grid: UniformGrid1D, limiter: bool) -> Self {
        let n = grid.n;
        Self {
            grid,
            limiter,
            flux: vec![0.0; n + 1],
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            stage: vec![0.0; n],
            a: vec![0.0; n],
            b: vec![0.0; n],
            c: vec![0.0; n],
            scratch: vec![0.0; n],
        }
    }

    /// Advection plus reaction right-hand side at stretch factor `s`.
    fn rhs(&mut self, h: &[f64], s: f64, out: &mut [f64]) {
        let g = self.grid;
        let n = g.n;
        let dy = g.dx();
        let get = |k: isize| if (0..n as isize).contains(&k) { h[k as usize] } else { 0.0 };
        // flux[j] lives on the face between nodes j-1 and j.
        self.flux[0] = 0.0;
        self.flux[n] = 0.0;
        for j in 1..n {
            let yf = g.x(j) - 0.5 * dy;
            let v = -2.0 * yf / s;
            let (i, up) = (j as isize - 1, j as isize);
            let hf = if v >= 0.0 {
                let mut val = get(i);
                if self.limiter {
                    val += 0.5 * minmod(get(i + 1) - get(i), get(i) - get(i - 1));
                }
                val
            } else {
                let mut val = get(up);
                if self.limiter {
                    val -= 0.5 * minmod(get(up + 1) - get(up), get(up) - get(up - 1));
                }
                val
            };
            self.flux[j] = v * hf;
        }
        let mass: f64 = h.iter().sum::<f64>() * dy;
        let e: f64 = h.iter().map(|v| v * v).sum::<f64>() * dy;
        let rate = e / mass;
        for j in 0..n {
            out[j] = -(self.flux[j + 1] - self.flux[j]) / dy + 3.0 * h[j] * (rate - h[j]);
        }
    }

    /// Backward-Euler diffusion with coefficient `kappa` and no-flux ends.
    fn diffuse(&mut self, h: &mut [f64], kappa: f64, dt: f64) {
        let n = self.grid.n;
        let lam = kappa * dt / self.grid.dx().powi(2);
        for j in 0..n {
            let left = if j > 0 { lam } else { 0.0 };
            let right = if j + 1 < n { lam } else { 0.0 };
            self.a[j] = -left;
            self.c[j] = -right;
            self.b[j] = 1.0 + left + right;
        }
        tridiag::solve(&self.a, &self.b, &self.c, h, &mut self.scratch);
    }

    /// Heun step of advection and reaction.
    fn transport(&mut self, h: &mut [f64], s0: f64, dt: f64) {
        let mut k1 = std::mem::take(&mut self.k1);
        let mut k2 = std::mem::take(&mut self.k2);
        let mut stage = std::mem::take(&mut self.stage);
        self.rhs(h, s0, &mut k1);
        for ((st, hi), ki) in stage.iter_mut().zip(h.iter()).zip(&k1) {
            *st = hi + dt * ki;
        }
        self.rhs(&stage, s0 + dt, &mut k2);
        for ((hi, a), b) in h.iter_mut().zip(&k1).zip(&k2) {
            *hi += 0.5 * dt * (a + b);
        }
        self.k1 = k1;
        self.k2 = k2;
        self.stage = stage;
    }
}

fn h_record(frame: &RescaledFrame) -> HRecord {
    let h = &frame.h;
    let dy = h.grid.dx();
    let (front_left, front_right) =
        front_position(frame, 0.5 * THETA_CRIT).unwrap_or((f64::NAN, f64::NAN));
    HRecord {
        tau: frame.tau,
        mass: h.integral(),
        e_h: h.values.iter().map(|v| v * v).sum::<f64>() * dy,
        m_h: h.max(),
        front_left,
        front_right,
    }
}

/// Integrate the `h`-equation from `tau = 0`.
pub fn solve_h(config: &SolveHConfig) -> Result<HRun> {
    if !(config.tau_max > 0.0 && config.record_every > 0.0) {
        return Err(Error::config("tau_max and record_every must be positive"));
    }
    if !(config.cfl_advection > 0.0 && config.cfl_advection <= 1.0) {
        return Err(Error::config("cfl_advection must lie in (0, 1]"));
    }
    let grid = UniformGrid1D::symmetric(config.y_half_extent, config.n)?;
    let mut h = config.g0.sample(&grid)?;
    let dy = grid.dx();
    let y_max = config.y_half_extent;
    let mut solver = HSolver::new(grid, config.limiter);
    let mut tau = 0.0;
    let mut frames = Vec::new();
    let mut records = Vec::new();
    let keep = |tau: f64| config.keep_frames.iter().any(|k| (k - tau).abs() < 1e-9);
    let mut push = |tau: f64, h: &Field1D, records: &mut Vec<HRecord>| {
        let frame = RescaledFrame { tau, h: h.clone() };
        records.push(h_record(&frame));
        if keep(tau) {
            frames.push(frame);
        }
    };
    push(tau, &h, &mut records);
    let n_records = (config.tau_max / config.record_every).round() as usize;
    let mut steps = 0;
    let mut max_drift: f64 = 0.0;
    for k in 1..=n_records.max(1) {
        let target = (k as f64 * config.record_every).min(config.tau_max);
        while tau < target - 1e-13 {
            let s = tau + 1.0;
            let m = h.max();
            let dt_adv = config.cfl_advection * dy * s / (2.0 * y_max);
            let dt_rea = config.cfl_reaction / m;
            let mut dt = dt_adv.min(dt_rea);
            if target - tau < dt * (1.0 + 1e-12) {
                dt = target - tau;
            }
            let mass_before = h.integral();
            solver.diffuse(&mut h.values, 1.5 / (s * s), 0.5 * dt);
            solver.transport(&mut h.values, s, dt);
            let s1 = s + dt;
            solver.diffuse(&mut h.values, 1.5 / (s1 * s1), 0.5 * dt);
            h.clamp_density(NEGATIVE_TOL)?;
            let drift = (h.integral() - mass_before).abs();
            max_drift = max_drift.max(drift);
            if drift > 1e-10 {
                return Err(Error::numerical(format!(
                    "h-solver mass changed by {drift:.3e} at tau = {tau}"
                )));
            }
            tau += dt;
            steps += 1;
        }
        tau = target;
        push(tau, &h, &mut records);
    }
    Ok(HRun {
        records,
        frames,
        final_frame: RescaledFrame { tau, h },
        steps,
        max_step_mass_drift: max_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{C_CRIT, THETA_CRIT};
    use std::f64::consts::PI;

    fn linf(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn to_h_at_t_one_is_identity() {
        let g0 = UniformGrid1D::symmetric(3.0, 4096).unwrap();
        let f = Field1D::from_fn(g0, |x| (-x * x * 4.0).exp());
        let frame = to_h(&f, 1.0, default_y_grid()).unwrap();
        assert_eq!(frame.tau, 0.0);
        assert!(linf(&frame.h.values, &f.values) < 1e-15);
    }

    #[test]
    fn to_h_of_limit_profile() {
        let t: f64 = 1000.0;
        let scale = t.powf(2.0 / 3.0);
        let x = UniformGrid1D::symmetric(400.0, 1 << 16).unwrap();
        let g = Field1D::from_fn(x, |x| {
            if x.abs() <= C_CRIT * scale {
                THETA_CRIT / scale
            } else {
                0.0
            }
        });
        let frame = to_h(&g, t, default_y_grid()).unwrap();
        assert!((frame.tau - 9.0).abs() < 1e-12);
        let yg = frame.h.grid;
        for j in 0..yg.n {
            let y = yg.x(j);
            let expect = if y.abs() <= C_CRIT { THETA_CRIT } else { 0.0 };
            if (y.abs() - C_CRIT).abs() > 2.0 * yg.dx() {
                assert!((frame.h.values[j] - expect).abs() < 1e-9, "y = {y}");
            }
        }
        assert!((frame.h.integral() - g.integral()).abs() < 2.0 * yg.dx());
    }

    #[test]
    fn round_trip_through_h() {
        let x = UniformGrid1D::symmetric(40.0, 1024).unwrap();
        let g = Field1D::from_fn(x, |x| (-(x / 2.0).powi(2)).exp() / (2.0 * PI.sqrt()));
        let frame = to_h(&g, 8.0, default_y_grid()).unwrap();
        let back = from_h(&frame, x).unwrap();
        assert!(linf(&back.values, &g.values) < 1e-6);
    }

    #[test]
    fn to_h_detects_overflow() {
        let x = UniformGrid1D::symmetric(100.0, 1024).unwrap();
        let g = Field1D::from_fn(x, |x| if x.abs() < 50.0 { 0.01 } else { 0.0 });
        assert!(matches!(to_h(&g, 1.0, default_y_grid()), Err(Error::DomainOverflow(_))));
    }

    #[test]
    fn uc_zoom() {
        let h = Field1D::from_fn(default_y_grid(), |y| (-(y * y)).exp());
        let frame = RescaledFrame { tau: 0.0, h };
        let z = UniformGrid1D::symmetric(1.0, 256).unwrap();
        let u = to_uc(&frame, 0.5, z).unwrap();
        let j0 = z.origin_index().unwrap();
        assert!((u.values[j0] - (-0.25f64).exp()).abs() < 1e-12);
        for j in 0..z.n {
            assert!((u.values[j] - (-(0.5 + z.x(j)).powi(2)).exp()).abs() < 1e-9);
        }
        let far = UniformGrid1D::symmetric(10.0, 256).unwrap();
        assert!(to_uc(&frame, 0.5, far).is_err());
    }

    #[test]
    fn uc_magnifies_by_s() {
        let h = Field1D::from_fn(default_y_grid(), |y| (-(y * y)).exp());
        let frame = RescaledFrame { tau: 3.0, h };
        let z = UniformGrid1D::symmetric(4.0, 512).unwrap();
        let u = to_uc(&frame, 1.0, z).unwrap();
        for j in 0..z.n {
            assert!((u.values[j] - (-(1.0 + z.x(j) / 4.0).powi(2)).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn g_frame_of_heat_kernel() {
        let t = 50.0;
        let x = UniformGrid1D::symmetric(80.0, 8192).unwrap();
        let g = Field1D::from_fn(x, |x| (-x * x / (2.0 * t)).exp() / (2.0 * PI * t).sqrt());
        let y = UniformGrid1D::symmetric(10.0, 1024).unwrap();
        let (tau, big_g) = to_G(&g, t, y).unwrap();
        assert!((tau - t.ln()).abs() < 1e-15);
        for j in 0..y.n {
            let exact = (-y.x(j).powi(2) / 2.0).exp() / (2.0 * PI).sqrt();
            assert!((big_g.values[j] - exact).abs() < 1e-7);
        }
        assert!((big_g.integral() - g.integral()).abs() < 1e-8);
    }

    #[test]
    fn radial_g_frame_of_heat_kernel() {
        let t: f64 = 9.0;
        let src = RadialGrid::new(3, 40.0, 4000).unwrap();
        let g = RadialField::from_fn(src, |r| {
            (-r * r / (2.0 * t)).exp() / (2.0 * PI * t).powf(1.5)
        });
        let target = RadialGrid::new(3, 10.0, 1000).unwrap();
        let (_, big_g) = to_G_radial(&g, t, target).unwrap();
        for j in 0..=target.n {
            let r = target.r(j);
            let exact = (-r * r / 2.0).exp() / (2.0 * PI).powf(1.5);
            assert!((big_g.values[j] - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn front_of_step() {
        let yg = default_y_grid();
        let h = Field1D::from_fn(yg, |y| if y.abs() <= C_CRIT { THETA_CRIT } else { 0.0 });
        let frame = RescaledFrame { tau: 0.0, h };
        let (l, r) = front_position(&frame, 0.5 * THETA_CRIT).unwrap();
        assert!((l + C_CRIT).abs() < yg.dx());
        assert!((r - C_CRIT).abs() < yg.dx());
        assert!(matches!(front_position(&frame, THETA_CRIT * 1.01), Err(Error::NotFound(_))));
        assert!(matches!(front_position(&frame, THETA_CRIT), Err(Error::NotFound(_))));
    }

    #[test]
    fn tail_slope_of_exponential() {
        let yg = default_y_grid();
        let s = 10.0;
        let h = Field1D::from_fn(yg, |y| {
            if y <= 1.0 {
                0.4
            } else {
                0.4 * (-0.9 * s * (y - 1.0)).exp()
            }
        });
        let frame = RescaledFrame { tau: s - 1.0, h };
        let slope = tail_slope(&frame, 1.0, 1e-8, 1e-3).unwrap();
        assert!((slope + 0.9).abs() < 1e-9);
    }

    #[test]
    fn solve_h_conserves_mass_and_grows_slowly() {
        let cfg = SolveHConfig {
            tau_max: 1.0,
            n: 1024,
            ..Default::default()
        };
        let run = solve_h(&cfg).unwrap();
        assert!(run.max_step_mass_drift < 1e-12);
        let last = run.records.last().unwrap();
        assert!((last.mass - 1.0).abs() < 1e-10);
        for a in &run.records {
            for b in &run.records {
                if b.tau > a.tau {
                    let f = ((b.tau + 1.0) / (a.tau + 1.0)).powi(2);
                    assert!(b.e_h <= f * a.e_h * (1.0 + 1e-9));
                    assert!(b.m_h <= f * a.m_h * (1.0 + 1e-9));
                }
            }
        }
    }
}
