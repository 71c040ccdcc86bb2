//! Non-Gaussian radial steady state in two dimensions.
//!
//! For fixed `E` and ball radius `R` the localized problem
//!
//! ```text
//! (1/2) Laplacian G + (y/2) . grad G + (1 + E - G) G = 0 in B_R,  G = 0 on the sphere,
//! ```
//!
//! is solved by parabolic relaxation from a subsolution. Bisection on `E`
//! then selects the unit-mass solution, and a sweep in `R` tracks the gap
//! `|E - ||G||_2^2|` that vanishes in the whole-space limit.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::radial::{RadialProblem, Reaction, Scheme, Workspace};

/// Smallest ball radius accepted without the unsafe override.
pub const MIN_SAFE_RADIUS: f64 = 20.0;
const CUTOFF_SAMPLES: usize = 10_000;

/// `C^2` cutoff on `[0, R]`: one on `[0, R/3]`, a quintic join on
/// `[R/3, 2R/3]` and `(9/2)(R - r)^2 / R^2` on `[2R/3, R]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    radius: f64,
}

impl Cutoff {
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `(phi, phi', phi'')` at `r`.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        let big = self.radius;
        let third = big / 3.0;
        if r <= third {
            (1.0, 0.0, 0.0)
        } else if r <= 2.0 * third {
            let s = (r - third) / third;
            let (s2, s3) = (s * s, s * s * s);
            let v = 1.0 - 0.5 * s3 - 0.5 * s3 * s + 0.5 * s3 * s2;
            let dv = -1.5 * s2 - 2.0 * s3 + 2.5 * s2 * s2;
            let ddv = -3.0 * s - 6.0 * s2 + 10.0 * s3;
            (v, dv / third, ddv / (third * third))
        } else if r <= big {
            let u = big - r;
            let k = 4.5 / (big * big);
            (k * u * u, -2.0 * k * u, 2.0 * k)
        } else {
            (0.0, 0.0, 0.0)
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval(r).0
    }

    /// Checks the four cutoff constraints on evenly spaced samples.
    fn verify(&self) -> Result<()> {
        let big = self.radius;
        let r2 = big * big;
        let (v, dv, _) = self.eval(big);
        if v.abs() > 1e-14 || dv.abs() > 1e-14 {
            return Err(Error::config("cutoff does not vanish to first order at R"));
        }
        for k in 0..=CUTOFF_SAMPLES {
            let r = big * k as f64 / CUTOFF_SAMPLES as f64;
            let (v, dv, ddv) = self.eval(r);
            let fail = |what: &str| Err(Error::config(format!("cutoff violates {what} at r = {r}")));
            if !(-1e-15..=1.0 + 1e-15).contains(&v) {
                return fail("0 <= phi <= 1");
            }
            if r <= big / 3.0 && v != 1.0 {
                return fail("phi = 1 on the core");
            }
            let middle = r >= big / 3.0 && r <= 2.0 * big / 3.0;
            if middle && (ddv < -20.0 / r2 || dv < -10.0 / big || v < 0.5 - 1e-15) {
                return fail("the middle-third bounds");
            }
            if r >= 2.0 * big / 3.0 && (ddv < 2.0 / r2 || dv < -10.0 * (big - r) / r2 - 1e-15) {
                return fail("the outer-third bounds");
            }
        }
        Ok(())
    }
}

/// Builds and verifies the cutoff for a ball of radius `radius >= 4`.
pub fn build_cutoff(radius: f64) -> Result<Cutoff> {
    if !(radius >= 4.0) || !radius.is_finite() {
        return Err(Error::config(format!("cutoff radius must be at least 4, got {radius}")));
    }
    let c = Cutoff { radius };
    c.verify()?;
    Ok(c)
}

/// Numerical settings shared by relaxation, bisection and the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteadyConfig {
    /// Radial mesh width.
    pub dr: f64,
    /// Relaxation step as a fraction of `1 / (1 + E)`.
    pub dt_fraction: f64,
    pub max_steps: usize,
    /// Stop when `||H(t + dt) - H(t)||_inf / dt` falls below this.
    pub rate_tol: f64,
    /// and the elliptic residual falls below this.
    pub residual_tol: f64,
    pub mass_tol: f64,
    pub bracket: [f64; 2],
    pub bracket_limit: [f64; 2],
    pub max_bisections: usize,
    /// Allow balls smaller than [`MIN_SAFE_RADIUS`].
    pub unsafe_small_r: bool,
}

impl Default for SteadyConfig {
    fn default() -> Self {
        Self {
            dr: 0.01,
            dt_fraction: 0.5,
            max_steps: 1_000_000,
            rate_tol: 1e-10,
            residual_tol: 1e-8,
            mass_tol: 1e-8,
            bracket: [0.05, 3.0],
            bracket_limit: [0.005, 30.0],
            max_bisections: 200,
            unsafe_small_r: false,
        }
    }
}

impl SteadyConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dr > 0.0
            && self.dt_fraction > 0.0
            && self.dt_fraction < 1.0
            && self.max_steps > 0
            && self.rate_tol > 0.0
            && self.residual_tol > 0.0
            && self.mass_tol > 0.0
            && self.bracket[0] > 0.0
            && self.bracket[0] < self.bracket[1]
            && self.bracket_limit[0] > 0.0
            && self.bracket_limit[0] <= self.bracket[0]
            && self.bracket_limit[1] >= self.bracket[1];
        if ok {
            Ok(())
        } else {
            Err(Error::config("invalid steady2d settings"))
        }
    }

    /// Grid for a ball of radius `radius`.
    pub fn grid(&self, radius: f64) -> Result<RadialGrid> {
        if radius < MIN_SAFE_RADIUS && !self.unsafe_small_r {
            return Err(Error::config(format!(
                "R = {radius} is below {MIN_SAFE_RADIUS}; pass the unsafe-small-R override to explore it"
            )));
        }
        let n = (radius / self.dr).round() as usize;
        RadialGrid::new(2, radius, n)
    }
}

/// `(E/2) e^{-r^2/2} phi(r)` on `grid`, whose outer radius is the ball
/// radius. Requires `R >= max(4, 20/sqrt(E))` unless `unsafe_small_r`.
pub fn build_subsolution(e: f64, grid: RadialGrid, unsafe_small_r: bool) -> Result<RadialField> {
    if !(e > 0.0) || !e.is_finite() {
        return Err(Error::config(format!("E must be positive, got {e}")));
    }
    let big = grid.r_max;
    let needed = 4f64.max(20.0 / e.sqrt());
    if big < needed && !unsafe_small_r {
        return Err(Error::config(format!("R = {big} is below max(4, 20/sqrt(E)) = {needed}")));
    }
    let cutoff = build_cutoff(big)?;
    let mut f = RadialField::from_fn(grid, |r| 0.5 * e * (-0.5 * r * r).exp() * cutoff.value(r));
    f.values[grid.n] = 0.0;
    Ok(f)
}

/// Smallest value of `(A u + (1 + E - u) u) / u` over nodes where `u > 0`;
/// nonnegative for a discrete subsolution.
pub fn subsolution_defect(e: f64, u: &RadialField) -> Result<f64> {
    let p = RadialProblem::new(u.grid, 0.0, Reaction::FrozenE { e }, Scheme::SemiImplicitEuler)?;
    let res = p.residual(&u.values, 0.0);
    Ok(res[..u.grid.n]
        .iter()
        .zip(&u.values)
        .filter(|(_, v)| **v > 0.0)
        .map(|(r, v)| r / v)
        .fold(f64::INFINITY, f64::min))
}

/// A converged steady state of the localized problem.
#[derive(Debug, Clone, Serialize)]
pub struct SteadyOutcome {
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(skip)]
    pub g: RadialField,
    /// `2 pi int G r dr` with exact annulus volumes.
    pub mass: f64,
    /// `2 pi int G^2 r dr` with the same volumes.
    pub l2sq: f64,
    /// `-pi R G'(R)`, the outward flux of the discrete operator.
    pub boundary_flux: f64,
    pub gap: f64,
    /// Sup norm of the elliptic residual.
    pub residual: f64,
    pub steps: usize,
    /// Smallest discrete time derivative seen during relaxation.
    pub min_rate: f64,
}

impl SteadyOutcome {
    /// `E mass - l2sq - boundary_flux`, zero up to the residual.
    pub fn boundary_identity_defect(&self) -> f64 {
        self.e * self.mass - self.l2sq - self.boundary_flux
    }

    /// Largest violation of `G <= (1+E) e^{4(1+E) - r^2/4}` for
    /// `r >= 4 sqrt(1+E)`; nonpositive when the envelope holds.
    pub fn envelope_violation(&self) -> f64 {
        let a = 1.0 + self.e;
        let grid = self.g.grid;
        (0..=grid.n)
            .filter(|&j| grid.r(j) >= 4.0 * a.sqrt())
            .map(|j| {
                let r = grid.r(j);
                self.g.values[j] - a * (4.0 * a - 0.25 * r * r).exp()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Relaxes `H_t = (1/2) Laplacian H + (y/2) . grad H + (1 + E - H) H` from
/// `init` to its steady state.
pub fn relax(e: f64, init: &RadialField, cfg: &SteadyConfig) -> Result<SteadyOutcome> {
    let grid = init.grid;
    if init.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::config("relaxation needs finite nonnegative initial data"));
    }
    if init.values[grid.n] != 0.0 {
        return Err(Error::config("initial data must vanish on the boundary"));
    }
    let p = RadialProblem::new(grid, 0.0, Reaction::FrozenE { e }, Scheme::SemiImplicitEuler)?;
    let dt = cfg.dt_fraction / (1.0 + e);
    let mut ws = Workspace::new(&grid);
    let mut state = init.clone();
    let mut prev = state.values.clone();
    let mut min_rate = f64::INFINITY;
    for step in 1..=cfg.max_steps {
        prev.copy_from_slice(&state.values);
        p.step(&mut state, 0.0, dt, &mut ws)?;
        let mut rate_sup = 0.0f64;
        for (a, b) in state.values.iter().zip(&prev) {
            let rate = (a - b) / dt;
            rate_sup = rate_sup.max(rate.abs());
            min_rate = min_rate.min(rate);
        }
        if rate_sup < cfg.rate_tol {
            let residual = sup_abs(&p.residual(&state.values, 0.0));
            if residual < cfg.residual_tol {
                let mass = p.mass(&state.values);
                let l2sq = p.l2sq(&state.values);
                return Ok(SteadyOutcome {
                    radius: grid.r_max,
                    e,
                    mass,
                    l2sq,
                    boundary_flux: p.boundary_outflow(&state.values),
                    gap: (e - l2sq).abs(),
                    residual,
                    steps: step,
                    min_rate,
                    g: state,
                });
            }
        }
    }
    Err(Error::Convergence(format!(
        "relaxation at E = {e}, R = {} did not settle within {} steps",
        grid.r_max, cfg.max_steps
    )))
}

fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Bookkeeping of one `find_e` call.
#[derive(Debug, Clone, Serialize)]
pub struct BisectionLog {
    /// `(E, mass)` for every relaxation performed.
    pub evaluations: Vec<(f64, f64)>,
    /// Final bracket.
    pub bracket: [f64; 2],
}

/// Bisection on `E` for `mass(relax(E, R)) = 1`. Relaxations are warm
/// started from the steady state at the lower bracket end, which is a
/// subsolution for every larger `E`. The first relaxation starts from the
/// cutoff profile even where `R < 20/sqrt(E)`: the steady state is unique,
/// and the monotonicity of the relaxation is recorded in `min_rate`.
pub fn find_e(radius: f64, cfg: &SteadyConfig) -> Result<(f64, SteadyOutcome, BisectionLog)> {
    cfg.validate()?;
    let grid = cfg.grid(radius)?;
    let mut log = BisectionLog {
        evaluations: Vec::new(),
        bracket: cfg.bracket,
    };
    let eval = |e: f64, init: &RadialField, log: &mut BisectionLog| -> Result<SteadyOutcome> {
        let out = relax(e, init, cfg)?;
        log.evaluations.push((e, out.mass));
        Ok(out)
    };

    let mut e_lo = cfg.bracket[0];
    let mut lo = loop {
        let init = build_subsolution(e_lo, grid, true)?;
        let out = eval(e_lo, &init, &mut log)?;
        if out.mass < 1.0 {
            break out;
        }
        if e_lo / 2.0 < cfg.bracket_limit[0] {
            return Err(Error::Bracket(format!(
                "mass at E = {e_lo} is already {} >= 1",
                out.mass
            )));
        }
        e_lo /= 2.0;
    };
    let mut e_hi = cfg.bracket[1];
    let mut hi = loop {
        let out = eval(e_hi, &lo.g, &mut log)?;
        if out.mass >= 1.0 {
            break out;
        }
        if e_hi * 2.0 > cfg.bracket_limit[1] {
            return Err(Error::Bracket(format!("mass at E = {e_hi} is only {} < 1", out.mass)));
        }
        e_hi *= 2.0;
    };

    for _ in 0..cfg.max_bisections {
        let best = if (lo.mass - 1.0).abs() < (hi.mass - 1.0).abs() { &lo } else { &hi };
        if (best.mass - 1.0).abs() < cfg.mass_tol {
            break;
        }
        let e_mid = 0.5 * (e_lo + e_hi);
        if e_mid <= e_lo || e_mid >= e_hi {
            break;
        }
        let mid = eval(e_mid, &lo.g, &mut log)?;
        if !(lo.mass < 1.0 && hi.mass >= 1.0) {
            return Err(Error::Bracket("mass lost its sign change during bisection".into()));
        }
        if mid.mass < 1.0 {
            e_lo = e_mid;
            lo = mid;
        } else {
            e_hi = e_mid;
            hi = mid;
        }
    }
    log.bracket = [e_lo, e_hi];
    let out = if (lo.mass - 1.0).abs() < (hi.mass - 1.0).abs() { lo } else { hi };
    if (out.mass - 1.0).abs() >= cfg.mass_tol {
        return Err(Error::Convergence(format!(
            "bisection stalled with |mass - 1| = {}",
            (out.mass - 1.0).abs()
        )));
    }
    Ok((out.e, out, log))
}

/// Result of [`r_sweep`].
#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub outcomes: Vec<SteadyOutcome>,
    /// `||G_{R_{i+1}} - G_{R_i}||_inf` on `[0, R_i / 2]`.
    pub cauchy: Vec<f64>,
    pub gap_decreasing: bool,
    pub flux_decreasing: bool,
}

/// Runs [`find_e`] for every radius in parallel.
pub fn r_sweep(radii: &[f64], cfg: &SteadyConfig) -> Result<SweepReport> {
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("sweep radii must be increasing"));
    }
    if radii.iter().any(|&r| r < MIN_SAFE_RADIUS) && !cfg.unsafe_small_r {
        return Err(Error::config(format!("sweep radii must be at least {MIN_SAFE_RADIUS}")));
    }
    let outcomes = radii
        .par_iter()
        .map(|&r| find_e(r, cfg).map(|(_, out, _)| out))
        .collect::<Result<Vec<_>>>()?;
    let cauchy = outcomes
        .windows(2)
        .map(|w| profile_distance(&w[0].g, &w[1].g, 0.5 * w[0].radius))
        .collect();
    let strictly = |f: fn(&SteadyOutcome) -> f64| outcomes.windows(2).all(|w| f(&w[1]) < f(&w[0]));
    Ok(SweepReport {
        gap_decreasing: strictly(|o| o.gap),
        flux_decreasing: strictly(|o| o.boundary_flux),
        cauchy,
        outcomes,
    })
}

/// Sup distance on `[0, r_cap]`, evaluating `b` by linear interpolation at
/// the nodes of `a`.
pub fn profile_distance(a: &RadialField, b: &RadialField, r_cap: f64) -> f64 {
    let (ga, gb) = (a.grid, b.grid);
    (0..=ga.n)
        .take_while(|&j| ga.r(j) <= r_cap + 1e-12)
        .map(|j| {
            let r = ga.r(j);
            let s = (r / gb.dr()).min(gb.n as f64);
            let k = (s.floor() as usize).min(gb.n.saturating_sub(1));
            let u = s - k as f64;
            let vb = (1.0 - u) * gb_val(b, k) + u * gb_val(b, k + 1);
            (a.values[j] - vb).abs()
        })
        .fold(0.0, f64::max)
}

fn gb_val(b: &RadialField, k: usize) -> f64 {
    b.values.get(k).copied().unwrap_or(0.0)
}

/// Closest centered planar Gaussian density in relative sup distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianDistance {
    pub sigma: f64,
    pub rel_dist: f64,
}

/// Golden-section search over `sigma^2 in [0.1, 10]` for the minimizer of
/// `||G - e^{-r^2/(2 sigma^2)}/(2 pi sigma^2)||_inf / ||G||_inf`.
pub fn gaussian_distance(g: &RadialField) -> GaussianDistance {
    let nodes = g.grid.nodes();
    let gmax = g.max();
    let dist = |var: f64| {
        nodes
            .iter()
            .zip(&g.values)
            .map(|(r, v)| (v - (-r * r / (2.0 * var)).exp() / (2.0 * PI * var)).abs())
            .fold(0.0, f64::max)
            / gmax
    };
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.1f64, 10.0f64);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (dist(c), dist(d));
    while b - a > 1e-12 * b {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = dist(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = dist(d);
        }
    }
    let var = 0.5 * (a + b);
    GaussianDistance {
        sigma: var.sqrt(),
        rel_dist: dist(var),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_reference_values() {
        let c = build_cutoff(12.0).unwrap();
        assert_eq!(c.value(0.0), 1.0);
        assert_eq!(c.value(4.0), 1.0);
        assert!((c.value(8.0) - 0.5).abs() < 1e-14);
        assert_eq!(c.value(12.0), 0.0);
        let mut min_mid = f64::INFINITY;
        let mut min_curv = f64::INFINITY;
        for k in 0..=1000 {
            let r = 4.0 + 4.0 * k as f64 / 1000.0;
            let (v, _, dd) = c.eval(r);
            min_mid = min_mid.min(v);
            min_curv = min_curv.min(dd);
        }
        assert!(min_mid >= 0.5 - 1e-15);
        assert!(min_curv >= -20.0 / 144.0);
        for k in 0..=1000 {
            let r = 8.0 + 4.0 * k as f64 / 1000.0;
            assert!(c.eval(r).2 >= 2.0 / 144.0 - 1e-15);
        }
    }

    #[test]
    fn cutoff_is_c2_at_the_joins() {
        let c = build_cutoff(30.0).unwrap();
        for r in [10.0, 20.0] {
            let (a, b) = (c.eval(r - 1e-9), c.eval(r + 1e-9));
            assert!((a.0 - b.0).abs() < 1e-8);
            assert!((a.1 - b.1).abs() < 1e-8);
            assert!((a.2 - b.2).abs() < 1e-6);
        }
    }

    #[test]
    fn cutoff_rejects_small_radius() {
        assert!(build_cutoff(3.9).is_err());
    }

    #[test]
    fn subsolution_values_and_mass() {
        let grid = RadialGrid::new(2, 20.0, 4000).unwrap();
        let u = build_subsolution(1.0, grid, false).unwrap();
        assert_eq!(u.values[0], 0.5);
        assert_eq!(u.values[grid.n], 0.0);
        assert!(u.values.iter().all(|v| (0.0..=0.5).contains(v)));
        // Quadrature oracle of the core lower bound pi (1 - e^{-(R/3)^2/2}).
        let core = PI * (1.0 - (-(20.0f64 / 3.0).powi(2) / 2.0).exp());
        let mass = u.volume_integral();
        assert!(mass >= core - 1e-6);
        assert!((mass - core).abs() < 1e-3);
        assert!(subsolution_defect(1.0, &u).unwrap() >= 0.0);
    }

    #[test]
    fn subsolution_enforces_the_radius_condition() {
        let grid = RadialGrid::new(2, 20.0, 2000).unwrap();
        assert!(build_subsolution(0.5, grid, false).is_err());
        assert!(build_subsolution(0.5, grid, true).is_ok());
        assert!(build_subsolution(-1.0, grid, true).is_err());
    }

    #[test]
    fn gaussian_distance_recovers_exact_gaussians() {
        for sigma in [1.0f64, 2.0] {
            let grid = RadialGrid::new(2, 20.0, 4000).unwrap();
            let var = sigma * sigma;
            let g = RadialField::from_fn(grid, |r| (-r * r / (2.0 * var)).exp() / (2.0 * PI * var));
            let out = gaussian_distance(&g);
            assert!(out.rel_dist < 1e-8, "{out:?}");
            assert!((out.sigma - sigma).abs() < 1e-6, "{out:?}");
        }
    }

    #[test]
    fn small_radius_needs_override() {
        let cfg = SteadyConfig::default();
        assert!(cfg.grid(12.0).is_err());
        let cfg = SteadyConfig {
            unsafe_small_r: true,
            ..cfg
        };
        assert!(cfg.grid(12.0).is_ok());
    }
}
