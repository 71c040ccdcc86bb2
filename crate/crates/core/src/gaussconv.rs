//! Relaxation of the self-similar profile towards the Gaussian.
//!
//! In the variables `G(tau, y) = e^{d tau / 2} g(e^tau, e^{tau/2} y)` the
//! equation reads `G_tau = F G + e^{-(d-2) tau / 2} G (||G||_2^2 - G)` with
//! the Fokker-Planck operator `F`, whose steady state is `psi0^2`,
//! `psi0 = Z^{-1} e^{-|y|^2/4}`. Writing `W = G / psi0` turns `F` into
//! `-M`, `M = -Laplacian/2 + |y|^2/8 - d/4`, with eigenvalues `|alpha|/2`.
//! The distance to the Gaussian is measured by `||W_perp||_2`, the part of
//! `W` orthogonal to `psi0`.
//!
//! Inner products use the finite-volume cell volumes of the radial solver,
//! so the discrete mass it conserves equals `<W, psi0>` exactly. `psi0` is
//! normalized in the same quadrature.

use serde::{Deserialize, Serialize};

use crate::diagnostics::linear_fit;
use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::radial::{radial_laplacian, RadialProblem, Reaction, Scheme, Workspace};

/// `w_decompose` requires `|G| e^{r^2/4}` below this at every node.
pub const TAIL_LIMIT: f64 = 1e10;
/// Admissible deviation of the mass from one.
pub const MASS_TOL: f64 = 1e-6;
/// Exponent of the Gaussian weight in the secondary sup-norm metric.
pub const WEIGHT_EXPONENT: f64 = 0.125;

/// `sum V_j a_j b_j`.
pub fn inner(a: &RadialField, b: &RadialField) -> f64 {
    a.grid
        .cell_volumes()
        .iter()
        .zip(a.values.iter().zip(&b.values))
        .map(|(v, (x, y))| v * x * y)
        .sum()
}

/// Ground state `e^{-r^2/4}` normalized to unit discrete `L^2` norm. The
/// normalization agrees with `(2 pi)^{d/4}` to `O(dr^2)`.
pub fn psi0(grid: RadialGrid) -> RadialField {
    let mut f = RadialField::from_fn(grid, |r| (-0.25 * r * r).exp());
    let z = inner(&f, &f).sqrt();
    f.values.iter_mut().for_each(|v| *v /= z);
    f
}

/// `W = G / psi0` split along `psi0`.
#[derive(Debug, Clone)]
pub struct HermiteFrame {
    pub d: usize,
    pub psi0: RadialField,
    pub w: RadialField,
    pub w_perp: RadialField,
    /// `<W, psi0>`, equal to the mass of `G`.
    pub projection: f64,
    pub w_perp_norm: f64,
    /// `sup e^{r^2/8} |G - projection * psi0^2|`.
    pub w_perp_weighted_linf: f64,
}

pub fn w_decompose(g: &RadialField) -> Result<HermiteFrame> {
    let grid = g.grid;
    for (j, v) in g.values.iter().enumerate() {
        let r = grid.r(j);
        if !v.is_finite() || v.abs() * (0.25 * r * r).exp() >= TAIL_LIMIT {
            return Err(Error::Precondition(format!(
                "G = {v} at r = {r} decays too slowly for W = G / psi0"
            )));
        }
    }
    let mass = g.volume_integral();
    if (mass - 1.0).abs() > MASS_TOL {
        return Err(Error::Precondition(format!("mass {mass} is not one")));
    }
    let psi0 = psi0(grid);
    let w = RadialField {
        grid,
        values: g.values.iter().zip(&psi0.values).map(|(a, b)| a / b).collect(),
    };
    let projection = inner(&w, &psi0);
    let w_perp = RadialField {
        grid,
        values: w
            .values
            .iter()
            .zip(&psi0.values)
            .map(|(a, b)| a - projection * b)
            .collect(),
    };
    let w_perp_norm = inner(&w_perp, &w_perp).sqrt();
    let w_perp_weighted_linf = (0..=grid.n)
        .map(|j| {
            let r = grid.r(j);
            (WEIGHT_EXPONENT * r * r).exp() * (w_perp.values[j] * psi0.values[j]).abs()
        })
        .fold(0.0, f64::max);
    Ok(HermiteFrame {
        d: grid.dim,
        psi0,
        w,
        w_perp,
        projection,
        w_perp_norm,
        w_perp_weighted_linf,
    })
}

/// `M f = -Laplacian f / 2 + (r^2/8 - d/4) f`.
pub fn ou_operator(f: &RadialField) -> Result<RadialField> {
    let lap = radial_laplacian(f)?;
    let d = f.grid.dim as f64;
    let values = (0..=f.grid.n)
        .map(|j| {
            let r = f.grid.r(j);
            -0.5 * lap.values[j] + (r * r / 8.0 - d / 4.0) * f.values[j]
        })
        .collect();
    Ok(RadialField {
        grid: f.grid,
        values,
    })
}

/// `<M f, f> / <f, f>`.
pub fn rayleigh_quotient(f: &RadialField) -> Result<f64> {
    let mf = ou_operator(f)?;
    Ok(inner(&mf, f) / inner(f, f))
}

/// Outcome of [`hermite_eigencheck`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HermiteReport {
    pub d: usize,
    pub alpha_total: usize,
    pub eigenvalue: f64,
    pub rayleigh: f64,
    /// `||M psi - lambda psi||_inf / ||psi||_inf`.
    pub max_rel_residual: f64,
}

/// Applies the discrete `M` to the Hermite function of total degree
/// `alpha_total`. Even degrees use the radial combination
/// `sum_i He_{alpha}(y_i)`; odd degrees, which have no radial
/// representative, use the one-dimensional section along an axis.
pub fn hermite_eigencheck(d: usize, alpha_total: usize, r_max: f64, n: usize) -> Result<HermiteReport> {
    let eigenvalue = alpha_total as f64 / 2.0;
    match alpha_total {
        0 | 2 => {
            let grid = RadialGrid::new(d, r_max, n)?;
            let dd = d as f64;
            let psi = RadialField::from_fn(grid, |r| {
                let p = if alpha_total == 0 { 1.0 } else { r * r - dd };
                p * (-0.25 * r * r).exp()
            });
            let mpsi = ou_operator(&psi)?;
            let scale = psi.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let max_rel_residual = mpsi
                .values
                .iter()
                .zip(&psi.values)
                .map(|(a, b)| (a - eigenvalue * b).abs())
                .fold(0.0, f64::max)
                / scale;
            Ok(HermiteReport {
                d,
                alpha_total,
                eigenvalue,
                rayleigh: inner(&mpsi, &psi) / inner(&psi, &psi),
                max_rel_residual,
            })
        }
        1 | 3 => {
            // Hermite functions separate, so M acts on the section through
            // the one-dimensional operator -f''/2 + (x^2/8 - 1/4) f.
            let h = r_max / n as f64;
            let he = |x: f64| if alpha_total == 1 { x } else { x * x * x - 3.0 * x };
            let psi: Vec<f64> = (0..=2 * n)
                .map(|k| {
                    let x = -r_max + k as f64 * h;
                    he(x) * (-0.25 * x * x).exp()
                })
                .collect();
            let scale = psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let (mut num, mut den, mut worst) = (0.0, 0.0, 0.0f64);
            for k in 1..2 * n {
                let x = -r_max + k as f64 * h;
                let lap = (psi[k + 1] - 2.0 * psi[k] + psi[k - 1]) / (h * h);
                let m = -0.5 * lap + (x * x / 8.0 - 0.25) * psi[k];
                num += m * psi[k];
                den += psi[k] * psi[k];
                worst = worst.max((m - eigenvalue * psi[k]).abs());
            }
            Ok(HermiteReport {
                d,
                alpha_total,
                eigenvalue,
                rayleigh: num / den,
                max_rel_residual: worst / scale,
            })
        }
        _ => Err(Error::config(format!("alpha_total must be 0..=3, got {alpha_total}"))),
    }
}

/// Radial initial profile, normalized to unit mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialProfile {
    /// Centered Gaussian with covariance `variance * I`.
    Gaussian { variance: f64 },
    /// `(1 - (r/radius)^2)^3` on the ball.
    Bump { radius: f64 },
}

impl InitialProfile {
    pub fn sample(&self, grid: RadialGrid) -> Result<RadialField> {
        let mut f = match *self {
            InitialProfile::Gaussian { variance } if variance > 0.0 => {
                RadialField::from_fn(grid, |r| (-r * r / (2.0 * variance)).exp())
            }
            InitialProfile::Bump { radius } if radius > 0.0 => {
                RadialField::from_fn(grid, |r| (1.0 - (r / radius).powi(2)).max(0.0).powi(3))
            }
            _ => return Err(Error::config("initial profile parameters must be positive")),
        };
        f.values[grid.n] = 0.0;
        let m = f.volume_integral();
        f.values.iter_mut().for_each(|v| *v /= m);
        Ok(f)
    }
}

/// Settings of one radial `G` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    pub d: usize,
    pub tau_max: f64,
    pub g0: InitialProfile,
    pub r_max: f64,
    pub dr: f64,
    pub dt: f64,
    pub record_every: f64,
    /// Length of the final window used for the rate fit.
    pub fit_window: f64,
    pub nonlinearity: bool,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            d: 3,
            tau_max: 15.0,
            g0: InitialProfile::Gaussian { variance: 1.3 },
            r_max: 12.0,
            dr: 0.01,
            dt: 0.01,
            record_every: 0.05,
            fit_window: 5.0,
            nonlinearity: true,
        }
    }
}

impl DecayConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.d >= 2
            && self.tau_max > 0.0
            && self.r_max > 0.0
            && self.dr > 0.0
            && self.dt > 0.0
            && self.record_every >= self.dt
            && self.fit_window > 0.0
            && self.fit_window <= self.tau_max;
        if ok {
            Ok(())
        } else {
            Err(Error::config("invalid gaussconv settings"))
        }
    }
}

/// The rate from the convergence proof: `(tau + 1) e^{-tau/2}` for
/// `d = 3`, `e^{-tau/2}` for `d >= 4`; undefined for `d = 2`.
pub fn proof_rate(d: usize, tau: f64) -> Option<f64> {
    match d {
        3 => Some((tau + 1.0) * (-0.5 * tau).exp()),
        d if d >= 4 => Some((-0.5 * tau).exp()),
        _ => None,
    }
}

/// One row of the decay table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayRecord {
    pub tau: f64,
    pub mass: f64,
    /// `max G`, which is `t^{d/2} ||g(t)||_inf`.
    pub max: f64,
    /// `int |y|^2 G dy`, which is `m_2(t) / t`.
    pub m2: f64,
    pub w_perp_l2: f64,
    pub w_perp_weighted_linf: f64,
    /// `||W_perp|| / proof_rate`, `NaN` where the rate is undefined.
    pub bound_ratio: f64,
    /// `sup G e^{r^2/2}` over nodes with `r <= r_max / 2`.
    pub envelope: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub d: usize,
    pub records: Vec<DecayRecord>,
    /// Slope of `log ||W_perp||_2` against `tau` on the final window.
    pub rate: f64,
    pub rate_stderr: f64,
    pub sup_bound_ratio: f64,
    /// Envelope constant `A` of the initial data.
    pub initial_envelope: f64,
    pub max_envelope: f64,
    #[serde(skip)]
    pub final_state: RadialField,
}

impl DecayReport {
    /// Records inside the fit window.
    pub fn window(&self, window: f64) -> impl Iterator<Item = &DecayRecord> {
        let tau_max = self.records.last().map_or(0.0, |r| r.tau);
        self.records.iter().filter(move |r| r.tau >= tau_max - window - 1e-9)
    }

    /// `||W_perp||` is nonincreasing from `tau_from` on.
    pub fn eventually_decreasing(&self, tau_from: f64) -> bool {
        let tail: Vec<_> = self.records.iter().filter(|r| r.tau >= tau_from).collect();
        tail.windows(2).all(|w| w[1].w_perp_l2 <= w[0].w_perp_l2)
    }
}

fn envelope(g: &RadialField) -> f64 {
    let grid = g.grid;
    (0..=grid.n)
        .take_while(|&j| grid.r(j) <= 0.5 * grid.r_max)
        .map(|j| g.values[j] * (0.5 * grid.r(j).powi(2)).exp())
        .fold(0.0, f64::max)
}

/// Evolves the radial `G` equation with Crank-Nicolson splitting and
/// records the Hermite decomposition every `record_every`.
pub fn run_decay(cfg: &DecayConfig) -> Result<DecayReport> {
    cfg.validate()?;
    let n = (cfg.r_max / cfg.dr).round() as usize;
    let grid = RadialGrid::new(cfg.d, cfg.r_max, n)?;
    let reaction = if cfg.nonlinearity { Reaction::Coupled } else { Reaction::None };
    let problem = RadialProblem::new(grid, 0.5 * cfg.d as f64, reaction, Scheme::StrangCrankNicolson)?;
    let mut state = cfg.g0.sample(grid)?;
    let initial_envelope = envelope(&state);
    let mut ws = Workspace::new(&grid);
    let nodes = grid.nodes();
    let weights = grid.cell_volumes();
    let record = |tau: f64, g: &RadialField| -> Result<DecayRecord> {
        let frame = w_decompose(g)?;
        let m2 = weights
            .iter()
            .zip(&nodes)
            .zip(&g.values)
            .map(|((v, r), f)| v * r * r * f)
            .sum();
        Ok(DecayRecord {
            tau,
            mass: frame.projection,
            max: g.max(),
            m2,
            w_perp_l2: frame.w_perp_norm,
            w_perp_weighted_linf: frame.w_perp_weighted_linf,
            bound_ratio: proof_rate(cfg.d, tau).map_or(f64::NAN, |r| frame.w_perp_norm / r),
            envelope: envelope(g),
        })
    };
    let mut records = vec![record(0.0, &state)?];
    let steps_per_record = (cfg.record_every / cfg.dt).round().max(1.0) as usize;
    let dt = cfg.record_every / steps_per_record as f64;
    let n_records = (cfg.tau_max / cfg.record_every).round() as usize;
    let mut tau = 0.0;
    for k in 1..=n_records {
        for _ in 0..steps_per_record {
            problem.step(&mut state, tau, dt, &mut ws)?;
            tau += dt;
        }
        tau = k as f64 * cfg.record_every;
        records.push(record(tau, &state)?);
    }
    let tau_end = tau;
    let (xs, ys): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter(|r| r.tau >= tau_end - cfg.fit_window - 1e-9 && r.w_perp_l2 > 0.0)
        .map(|r| (r.tau, r.w_perp_l2.ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::numerical("too few positive samples in the fit window"));
    }
    let fit = linear_fit(&xs, &ys);
    let sup_bound_ratio = records.iter().map(|r| r.bound_ratio).fold(f64::NAN, f64::max);
    let max_envelope = records.iter().map(|r| r.envelope).fold(0.0, f64::max);
    Ok(DecayReport {
        d: cfg.d,
        records,
        rate: fit.slope,
        rate_stderr: fit.stderr,
        sup_bound_ratio,
        initial_envelope,
        max_envelope,
        final_state: state,
    })
}
