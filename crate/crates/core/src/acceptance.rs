//! Acceptance suite: every criterion evaluates to one PASS/FAIL line.
//!
//! The expensive one-dimensional runs are computed once per process and
//! shared between criteria.

use std::fmt;
use std::sync::OnceLock;
use std::time::Instant;

use serde::Serialize;

use crate::constants::{C_CRIT, THETA_CRIT};
use crate::diagnostics::{energy_identity_residual, fit_exponent, slow_growth_violation, MacroRecord};
use crate::evolve1d::{run, EvolveConfig, InitialData, RunOutput};
use crate::gaussconv::{run_decay, DecayConfig, DecayReport, InitialProfile};
use crate::kernel::KernelSpec;
use crate::selfsim1d::{default_y_grid, front_position, to_h};
use crate::steady2d::{build_subsolution, gaussian_distance, r_sweep, relax, SteadyConfig};

/// Largest Nash ratio seen along the validated delta, tophat and Gaussian
/// runs (0.16825), rounded up to a frozen envelope.
pub const NASH_ENVELOPE: f64 = 0.17;
/// Relative distance of the converged planar steady state to the nearest
/// Gaussian, frozen from the validated pipeline.
pub const GOLDEN_GAUSS_REL_DIST: f64 = 0.003_734;
/// Unit-mass energy of the planar steady state at `dr = 0.01`.
pub const GOLDEN_E_STAR: f64 = 0.076_146_92;

/// Outcome of one criterion.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:>2} {:<28} {} [{:.1} s]",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

type Shared<T> = OnceLock<Result<T, String>>;

fn shared<T>(cell: &'static Shared<T>, f: impl FnOnce() -> crate::Result<T>) -> Result<&'static T, String> {
    cell.get_or_init(|| f().map_err(|e| e.to_string())).as_ref().map_err(Clone::clone)
}

fn one_d(kernel: KernelSpec, t_max: f64) -> EvolveConfig {
    EvolveConfig {
        g0: InitialData::Indicator { half_width: 1.0 },
        kernel,
        t_max,
        audit: true,
        keep_fields: vec![t_max],
        ..EvolveConfig::default()
    }
}

/// Delta kernel, indicator data, `t in [1, 1e5]`, `n = 2^15`.
pub fn delta_run() -> Result<&'static RunOutput, String> {
    static CELL: Shared<RunOutput> = OnceLock::new();
    shared(&CELL, || run(one_d(KernelSpec::Delta, 1e5)))
}

/// Tophat mollifier of width 1 up to `t = 1e4`.
pub fn tophat_run() -> Result<&'static RunOutput, String> {
    static CELL: Shared<RunOutput> = OnceLock::new();
    shared(&CELL, || run(one_d(KernelSpec::Tophat { width: 1.0 }, 1e4)))
}

/// Gaussian mollifier with `sigma = 0.5` up to `t = 1e4`.
pub fn gaussian_run() -> Result<&'static RunOutput, String> {
    static CELL: Shared<RunOutput> = OnceLock::new();
    shared(&CELL, || run(one_d(KernelSpec::Gaussian { sigma: 0.5 }, 1e4)))
}

/// `m_2(1e3)` with the default resolution and with `dt` and `dx` halved.
pub fn self_convergence_runs() -> Result<&'static (f64, f64), String> {
    static CELL: Shared<(f64, f64)> = OnceLock::new();
    shared(&CELL, || {
        let base = EvolveConfig {
            t_max: 1e3,
            ..EvolveConfig::default()
        };
        let fine = EvolveConfig {
            n: 2 * base.n,
            dt_max: 0.5 * base.dt_max,
            cfl_reaction: 0.5 * base.cfl_reaction,
            ..base.clone()
        };
        let (a, b) = rayon::join(|| run(base), || run(fine));
        let m2 = |r: RunOutput| r.trajectory.last().map(|x| x.m2).unwrap_or(f64::NAN);
        Ok((m2(a?), m2(b?)))
    })
}

fn timed(id: u32, name: &'static str, f: impl FnOnce() -> Result<(bool, String), String>) -> Verdict {
    let start = Instant::now();
    let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    Verdict {
        id,
        name,
        pass,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn moment_slopes(traj: &[MacroRecord], window: (f64, f64)) -> Result<[f64; 3], String> {
    let t: Vec<f64> = traj.iter().map(|r| r.t).collect();
    let mut out = [0.0; 3];
    for (k, p) in [1.0f64, 2.0, 4.0].iter().enumerate() {
        let y: Vec<f64> = traj
            .iter()
            .map(|r| [r.m1, r.m2, r.m4][k].powf(1.0 / p))
            .collect();
        out[k] = fit_exponent(&t, &y, window).map_err(|e| e.to_string())?.slope;
    }
    Ok(out)
}

fn scaled(r: &MacroRecord) -> (f64, f64) {
    let s2 = r.t.powf(2.0 / 3.0);
    (s2 * r.l2sq, s2 * r.m)
}

fn within(v: f64, target: f64, tol: f64) -> bool {
    (v - target).abs() <= tol
}

/// 1. Moments spread like `t^{2/3}` for the delta kernel.
pub fn criterion_1() -> Verdict {
    timed(1, "KPZ exponent (delta)", || {
        let r = delta_run()?;
        let s = moment_slopes(&r.trajectory, (1e3, 1e5))?;
        let pass = s.iter().all(|v| within(*v, 2.0 / 3.0, 0.03));
        Ok((pass, format!("slopes p=1,2,4: {:.4} {:.4} {:.4} (2/3 +- 0.03)", s[0], s[1], s[2])))
    })
}

/// 2. The same exponent for continuous kernels.
pub fn criterion_2() -> Verdict {
    timed(2, "universality (tophat, gauss)", || {
        let mut pass = true;
        let mut parts = Vec::new();
        for (label, r) in [("tophat", tophat_run()?), ("gauss", gaussian_run()?)] {
            let s = moment_slopes(&r.trajectory, (1e2, 1e4))?;
            pass &= s.iter().all(|v| within(*v, 2.0 / 3.0, 0.05));
            parts.push(format!("{label} {:.4} {:.4} {:.4}", s[0], s[1], s[2]));
        }
        Ok((pass, format!("{} (2/3 +- 0.05)", parts.join("; "))))
    })
}

/// 3. `t^{2/3} ||g||_2^2` and `t^{2/3} M` approach `theta_crit`.
pub fn criterion_3() -> Verdict {
    timed(3, "amplitude constants", || {
        let r = delta_run()?;
        let last = r.trajectory.last().ok_or("empty trajectory")?;
        let (l2, m) = scaled(last);
        let pass = within(l2, THETA_CRIT, 0.1 * THETA_CRIT)
            && within(m, THETA_CRIT, 0.1 * THETA_CRIT)
            && (m - l2).abs() < 0.05;
        Ok((
            pass,
            format!(
                "t={:.0e}: t^2/3 l2sq {:.5} ({:+.1}%), t^2/3 M {:.5} ({:+.1}%), |diff| {:.4}",
                last.t,
                l2,
                100.0 * (l2 / THETA_CRIT - 1.0),
                m,
                100.0 * (m / THETA_CRIT - 1.0),
                (m - l2).abs()
            ),
        ))
    })
}

/// 4. The rescaled profile approaches `theta_crit` on `[-c_crit, c_crit]`.
pub fn criterion_4() -> Verdict {
    timed(4, "profile limit", || {
        let r = delta_run()?;
        let (t, g) = r.fields.last().ok_or("final field was not kept")?;
        let frame = to_h(g, *t, default_y_grid()).map_err(|e| e.to_string())?;
        let grid = frame.h.grid;
        let inner = (0..grid.n)
            .filter(|&j| grid.x(j).abs() <= 0.9 * C_CRIT)
            .map(|j| (frame.h.values[j] - THETA_CRIT).abs())
            .fold(0.0, f64::max);
        let at = |y: f64| {
            let s = (y - grid.x_min) / grid.dx();
            let k = s.floor() as usize;
            let u = s - k as f64;
            (1.0 - u) * frame.h.values[k] + u * frame.h.values[k + 1]
        };
        let outer = at(1.1 * C_CRIT).max(at(-1.1 * C_CRIT));
        let (left, right) = front_position(&frame, 0.5 * THETA_CRIT).map_err(|e| e.to_string())?;
        let pass = inner < 0.05 * THETA_CRIT
            && outer < 0.05 * THETA_CRIT
            && within(right, C_CRIT, 0.05 * C_CRIT)
            && within(-left, C_CRIT, 0.05 * C_CRIT);
        Ok((
            pass,
            format!(
                "sup|h-theta|/theta {:.3} (<0.05), h(1.1c)/theta {:.2e}, front {:.4} {:.4} (1.310 +- 5%)",
                inner / THETA_CRIT,
                outer / THETA_CRIT,
                left,
                right
            ),
        ))
    })
}

/// 5. The weak bounds bracket `theta_crit` late in the run.
pub fn criterion_5() -> Verdict {
    timed(5, "weak bounds bracketing", || {
        let r = delta_run()?;
        let vals: Vec<f64> = r.trajectory.iter().filter(|x| x.tau >= 20.0).map(|x| scaled(x).0).collect();
        if vals.is_empty() {
            return Err("no snapshots with tau >= 20".into());
        }
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pass = lo <= 1.1 * THETA_CRIT && hi >= 0.9 * THETA_CRIT;
        Ok((pass, format!("t^2/3 l2sq over tau>=20: min {lo:.5} max {hi:.5} ({} snapshots)", vals.len())))
    })
}

/// 6. Energy identity residual and monotone energy.
pub fn criterion_6() -> Verdict {
    timed(6, "energy identity", || {
        let mut pass = true;
        let mut parts = Vec::new();
        for (label, r) in [("delta", delta_run()?), ("tophat", tophat_run()?)] {
            let traj: Vec<MacroRecord> = r.trajectory.iter().filter(|x| x.t <= 1e4 * (1.0 + 1e-9)).cloned().collect();
            let res = energy_identity_residual(&traj).map_err(|e| e.to_string())?;
            let worst = res.iter().filter(|(t, _)| *t >= 2.0).map(|(_, v)| v.abs()).fold(0.0, f64::max);
            let monotone = r.monitor.max_e_increase <= 0.0
                && r.trajectory.windows(2).all(|w| w[1].e <= w[0].e);
            pass &= worst < 0.02 && monotone;
            parts.push(format!("{label} residual {worst:.2e} monotone {monotone}"));
        }
        Ok((pass, parts.join("; ")))
    })
}

fn radial_bump(d: usize) -> crate::Result<DecayReport> {
    run_decay(&DecayConfig {
        d,
        tau_max: 1e4f64.ln(),
        g0: InitialProfile::Bump { radius: 1.0 },
        ..DecayConfig::default()
    })
}

/// 7. Radial moments and decay of the maximum in `d = 2, 3`.
pub fn criterion_7() -> Verdict {
    timed(7, "higher-d moments", || {
        let mut pass = true;
        let mut parts = Vec::new();
        for d in [2usize, 3] {
            let rep = radial_bump(d).map_err(|e| e.to_string())?;
            let t: Vec<f64> = rep.records.iter().map(|r| r.tau.exp()).collect();
            let root_m2: Vec<f64> = rep.records.iter().map(|r| (r.tau.exp() * r.m2).sqrt()).collect();
            let slope = fit_exponent(&t, &root_m2, (1e2, 1e4)).map_err(|e| e.to_string())?.slope;
            let maxima: Vec<f64> = rep.records.iter().filter(|r| r.tau.exp() >= 1e2 * (1.0 - 1e-9)).map(|r| r.max).collect();
            let lo = maxima.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = maxima.iter().copied().fold(0.0, f64::max);
            let ok = within(slope, 0.5, 0.03) && lo >= 0.2 && hi <= 5.0;
            pass &= ok;
            parts.push(format!("d={d}: slope {slope:.4}, t^(d/2) M in [{lo:.4}, {hi:.4}]"));
        }
        Ok((pass, format!("{} (need slope 1/2 +- 0.03, range within [1/5, 5])", parts.join("; "))))
    })
}

/// 8. Gaussian convergence rates in `d = 4` and `d = 3`.
pub fn criterion_8() -> Verdict {
    timed(8, "gaussian convergence d>=3", || {
        let base = DecayConfig::default();
        let d4 = run_decay(&DecayConfig { d: 4, ..base.clone() }).map_err(|e| e.to_string())?;
        let d3 = run_decay(&DecayConfig { d: 3, ..base.clone() }).map_err(|e| e.to_string())?;
        let rate_ok = within(d4.rate, -0.5, 0.05);
        // Best bounding constant up to each time, compared across the window.
        let mut running = f64::NEG_INFINITY;
        let mut c_start = f64::NAN;
        let mut ratios = (f64::INFINITY, f64::NEG_INFINITY);
        let window_start = base.tau_max - base.fit_window - 1e-9;
        for r in &d3.records {
            running = running.max(r.bound_ratio);
            if r.tau >= window_start {
                if c_start.is_nan() {
                    c_start = running;
                }
                ratios = (ratios.0.min(r.bound_ratio), ratios.1.max(r.bound_ratio));
            }
        }
        let c_end = running;
        let variation = c_end / c_start - 1.0;
        let pass = rate_ok && variation.abs() < 0.2;
        Ok((
            pass,
            format!(
                "d=4 rate {:.4} (-0.5 +- 0.05); d=3 bounding constant {:.4} -> {:.4} ({:+.1}%), pointwise ratio in [{:.2e}, {:.2e}]",
                d4.rate,
                c_start,
                c_end,
                100.0 * variation,
                ratios.0,
                ratios.1
            ),
        ))
    })
}

/// 9. Planar steady state: unit mass, vanishing gap, non-Gaussian profile.
pub fn criterion_9() -> Verdict {
    timed(9, "2D steady state", || {
        let cfg = SteadyConfig::default();
        let rep = r_sweep(&[20.0, 24.0, 28.0], &cfg).map_err(|e| e.to_string())?;
        let last = rep.outcomes.last().ok_or("empty sweep")?;
        let mass_ok = rep.outcomes.iter().all(|o| (o.mass - 1.0).abs() < 1e-8);
        let envelope_ok = rep.outcomes.iter().all(|o| o.envelope_violation() <= 0.0);
        let monotone_ok = rep.outcomes.iter().all(|o| o.min_rate >= -1e-12);
        let grid = last.g.grid;
        let from_sub = relax(last.e, &build_subsolution(last.e, grid, true).map_err(|e| e.to_string())?, &cfg)
            .map_err(|e| e.to_string())?;
        let mut scaled = last.g.clone();
        scaled.values.iter_mut().for_each(|v| *v *= 0.9);
        let from_scaled = relax(last.e, &scaled, &cfg).map_err(|e| e.to_string())?;
        let unique = from_sub
            .g
            .values
            .iter()
            .zip(&from_scaled.g.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let gd = gaussian_distance(&last.g);
        let gaps: Vec<String> = rep.outcomes.iter().map(|o| format!("{:.3e}", o.gap)).collect();
        let fluxes: Vec<String> = rep.outcomes.iter().map(|o| format!("{:.1e}", o.boundary_flux)).collect();
        let pass = mass_ok
            && rep.gap_decreasing
            && last.gap < 1e-3
            && rep.flux_decreasing
            && envelope_ok
            && monotone_ok
            && unique < 1e-6
            && gd.rel_dist > 0.01;
        Ok((
            pass,
            format!(
                "E* {:.8}, mass ok {mass_ok}, gaps [{}] decreasing {}, flux [{}] decreasing {}, envelope {envelope_ok}, monotone {monotone_ok}, uniqueness {unique:.1e}, gauss_rel_dist {:.5} (> 0.01)",
                last.e,
                gaps.join(", "),
                rep.gap_decreasing,
                fluxes.join(", "),
                rep.flux_decreasing,
                gd.rel_dist
            ),
        ))
    })
}

/// 10. Invariants monitored along the validated runs.
pub fn criterion_10() -> Verdict {
    timed(10, "property suite", || {
        let runs = [delta_run()?, tophat_run()?, gaussian_run()?];
        let drift = runs.iter().map(|r| r.monitor.max_mass_drift).fold(0.0, f64::max);
        let most_negative = runs.iter().map(|r| r.monitor.most_negative).fold(0.0, f64::min);
        let audits = runs.iter().flat_map(|r| r.audits.iter());
        let (mut young, mut holder_checked, mut holder_failed, mut nash) = (true, 0usize, 0usize, 0.0f64);
        for a in audits {
            young &= a.young_ordered;
            match a.holder_ok {
                Some(true) => holder_checked += 1,
                Some(false) => {
                    holder_checked += 1;
                    holder_failed += 1;
                }
                None => {}
            }
            nash = nash.max(a.nash_ratio);
        }
        let growth = runs.iter().map(|r| slow_growth_violation(&r.trajectory)).fold(f64::NEG_INFINITY, f64::max);
        let (m2_base, m2_fine) = *self_convergence_runs()?;
        let selfconv = (m2_fine / m2_base - 1.0).abs();
        let pass = drift < 1e-6
            && most_negative >= -crate::evolve1d::NEGATIVE_TOL
            && young
            && holder_failed == 0
            && holder_checked > 0
            && nash <= NASH_ENVELOPE
            && growth <= 1e-12
            && selfconv < 5e-3;
        Ok((
            pass,
            format!(
                "mass drift {drift:.1e}, min value {most_negative:.1e}, young {young}, holder {}/{} ok, nash max {nash:.5} (<= {NASH_ENVELOPE}), slow growth {growth:.1e}, m2(1e3) self-convergence {:.2e}",
                holder_checked - holder_failed,
                holder_checked,
                selfconv
            ),
        ))
    })
}

/// Every criterion in order.
pub fn run_all() -> Vec<Verdict> {
    // Warm the shared runs concurrently; the criteria then only read them.
    rayon::scope(|s| {
        s.spawn(|_| drop(delta_run()));
        s.spawn(|_| drop(tophat_run()));
        s.spawn(|_| drop(gaussian_run()));
        s.spawn(|_| drop(self_convergence_runs()));
    });
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ]
}
