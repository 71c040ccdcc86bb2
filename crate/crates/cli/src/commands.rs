//! One function per subcommand. Each returns the echoed configuration so
//! the caller can write the manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use polyfront::acceptance::{run_all, Verdict};
use polyfront::constants::THETA_CRIT;
use polyfront::diagnostics::fit_exponent;
use polyfront::evolve1d::{run, EvolveConfig};
use polyfront::gaussconv::{run_decay, DecayConfig};
use polyfront::selfsim1d::{front_position, solve_h, RescaledFrame, SolveHConfig};
use polyfront::steady2d::{gaussian_distance, r_sweep, SteadyConfig, SteadyOutcome};

use crate::config::load;
use crate::error::{CliError, Result};
use crate::output::Output;

fn echo<T: Serialize>(cfg: &T) -> Value {
    serde_json::to_value(cfg).unwrap_or(Value::Null)
}

/// Fit window for summary slopes: the last two decades of the run.
fn late_window(t0: f64, t_max: f64) -> (f64, f64) {
    ((t_max / 100.0).max(t0), t_max)
}

pub fn simulate1d(config: Option<&Path>, out_dir: &Path) -> Result<(Value, Output)> {
    let cfg: EvolveConfig = load(config)?;
    cfg.validate()?;
    let res = run(cfg.clone())?;
    let mut out = Output::create(out_dir)?;
    let rows: Vec<[f64; 11]> = res
        .trajectory
        .iter()
        .map(|r| [r.t, r.mass, r.e, r.d, r.m, r.l2sq, r.m1, r.m2, r.m4, r.front_left, r.front_right])
        .collect();
    out.csv(
        "trajectory.csv",
        &["t", "mass", "E", "D", "M", "l2sq", "m1", "m2", "m4", "front_left", "front_right"],
        rows.iter().map(|r| r.as_slice()),
    )?;
    for (t, g) in &res.fields {
        let grid = g.grid;
        out.field(&format!("snapshot_t{t:.6e}.csv"), ["x", "value"], (0..grid.n).map(|j| grid.x(j)), &g.values)?;
    }
    let t: Vec<f64> = res.trajectory.iter().map(|r| r.t).collect();
    let window = late_window(cfg.t0, cfg.t_max);
    let slope = |f: &dyn Fn(&polyfront::diagnostics::MacroRecord) -> f64| -> Result<f64> {
        let y: Vec<f64> = res.trajectory.iter().map(f).collect();
        Ok(fit_exponent(&t, &y, window)?.slope)
    };
    let last = res.trajectory.last().ok_or_else(|| CliError::Config("empty trajectory".into()))?;
    let s2 = last.t.powf(2.0 / 3.0);
    let summary = json!({
        "t_max": last.t,
        "fit_window": [window.0, window.1],
        "slope_m1": slope(&|r| r.m1)?,
        "slope_m2": slope(&|r| r.m2.sqrt())?,
        "slope_m4": slope(&|r| r.m4.powf(0.25))?,
        "theta_inf_est": s2 * last.m,
        "theta_l2_est": s2 * last.l2sq,
        "theta_crit": THETA_CRIT,
        "mass_drift": res.monitor.max_mass_drift,
        "max_e_increase": res.monitor.max_e_increase,
        "floored_mass": res.monitor.floored_mass,
        "steps": res.monitor.steps,
        "regrids": res.regrids.len(),
        "final_half_extent": 0.5 * res.final_state.g.grid.extent(),
    });
    out.json("summary.json", &summary)?;
    if !res.audits.is_empty() {
        let rows: Vec<[f64; 5]> = res
            .audits
            .iter()
            .map(|a| {
                let holder = match a.holder_ok {
                    Some(true) => 1.0,
                    Some(false) => 0.0,
                    None => f64::NAN,
                };
                [a.t, a.nash_ratio, a.tail_constant, if a.young_ordered { 1.0 } else { 0.0 }, holder]
            })
            .collect();
        out.csv(
            "audit.csv",
            &["t", "nash_ratio", "tail_constant", "young_ordered", "holder_ok"],
            rows.iter().map(|r| r.as_slice()),
        )?;
    }
    Ok((echo(&cfg), out))
}

#[derive(Serialize)]
struct FrameSidecar {
    tau: f64,
    #[serde(rename = "E_h")]
    e_h: f64,
    #[serde(rename = "M_h")]
    m_h: f64,
    front_left: f64,
    front_right: f64,
}

fn write_frame(out: &mut Output, name: &str, frame: &RescaledFrame) -> Result<()> {
    let grid = frame.h.grid;
    out.field(&format!("{name}.csv"), ["y", "h"], (0..grid.n).map(|j| grid.x(j)), &frame.h.values)?;
    let (front_left, front_right) =
        front_position(frame, 0.5 * THETA_CRIT).unwrap_or((f64::NAN, f64::NAN));
    let side = FrameSidecar {
        tau: frame.tau,
        e_h: frame.h.l2sq(),
        m_h: frame.h.max(),
        front_left,
        front_right,
    };
    out.json(&format!("{name}.json"), &side)
}

pub fn rescaled(config: Option<&Path>, out_dir: &Path) -> Result<(Value, Output)> {
    let cfg: SolveHConfig = load(config)?;
    let res = solve_h(&cfg)?;
    let mut out = Output::create(out_dir)?;
    let rows: Vec<[f64; 6]> = res
        .records
        .iter()
        .map(|r| [r.tau, r.mass, r.e_h, r.m_h, r.front_left, r.front_right])
        .collect();
    out.csv(
        "h_records.csv",
        &["tau", "mass", "E_h", "M_h", "front_left", "front_right"],
        rows.iter().map(|r| r.as_slice()),
    )?;
    for f in &res.frames {
        write_frame(&mut out, &format!("frame_tau{:.6e}", f.tau), f)?;
    }
    write_frame(&mut out, "frame_final", &res.final_frame)?;
    let last = res.records.last().ok_or_else(|| CliError::Config("no records".into()))?;
    out.json(
        "summary.json",
        &json!({
            "tau": last.tau,
            "E_h": last.e_h,
            "M_h": last.m_h,
            "front_left": last.front_left,
            "front_right": last.front_right,
            "theta_crit": THETA_CRIT,
            "steps": res.steps,
            "max_step_mass_drift": res.max_step_mass_drift,
        }),
    )?;
    Ok((echo(&cfg), out))
}

/// `steady2d` configuration: the radii to sweep and the solver settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Steady2dConfig {
    pub radii: Vec<f64>,
    pub solver: SteadyConfig,
}

impl Default for Steady2dConfig {
    fn default() -> Self {
        Self {
            radii: vec![20.0, 24.0, 28.0],
            solver: SteadyConfig::default(),
        }
    }
}

fn steady_summary(o: &SteadyOutcome) -> Value {
    let gd = gaussian_distance(&o.g);
    json!({
        "R": o.radius,
        "E_star": o.e,
        "mass": o.mass,
        "l2sq": o.l2sq,
        "gap": o.gap,
        "boundary_flux": o.boundary_flux,
        "sigma_star": gd.sigma,
        "gauss_rel_dist": gd.rel_dist,
        "residual": o.residual,
        "steps": o.steps,
        "min_rate": o.min_rate,
        "envelope_violation": o.envelope_violation(),
    })
}

pub fn steady2d(config: Option<&Path>, out_dir: &Path, unsafe_small_r: bool) -> Result<(Value, Output)> {
    let mut cfg: Steady2dConfig = load(config)?;
    cfg.solver.unsafe_small_r |= unsafe_small_r;
    cfg.solver.validate()?;
    if cfg.radii.is_empty() {
        return Err(CliError::Config("radii must not be empty".into()));
    }
    for &r in &cfg.radii {
        cfg.solver.grid(r)?;
    }
    let rep = r_sweep(&cfg.radii, &cfg.solver)?;
    let mut out = Output::create(out_dir)?;
    for o in &rep.outcomes {
        let grid = o.g.grid;
        out.field(&format!("profile_R{}.csv", o.radius), ["r", "G"], (0..=grid.n).map(|j| grid.r(j)), &o.g.values)?;
    }
    let sweep: Vec<Value> = rep.outcomes.iter().map(steady_summary).collect();
    let mut summary = sweep.last().cloned().unwrap_or(Value::Null);
    if let Value::Object(m) = &mut summary {
        m.insert("sweep".into(), Value::from(sweep.clone()));
        m.insert("cauchy".into(), json!(rep.cauchy));
        m.insert("gap_decreasing".into(), json!(rep.gap_decreasing));
        m.insert("flux_decreasing".into(), json!(rep.flux_decreasing));
    }
    out.json("summary.json", &summary)?;
    Ok((echo(&cfg), out))
}

pub fn gaussconv(config: Option<&Path>, out_dir: &Path) -> Result<(Value, Output)> {
    let cfg: DecayConfig = load(config)?;
    cfg.validate()?;
    let rep = run_decay(&cfg)?;
    let mut out = Output::create(out_dir)?;
    let rows: Vec<[f64; 4]> = rep
        .records
        .iter()
        .map(|r| [r.tau, r.w_perp_l2, r.w_perp_weighted_linf, r.bound_ratio])
        .collect();
    out.csv(
        "decay.csv",
        &["tau", "w_perp_l2", "w_perp_weighted_linf", "bound_ratio"],
        rows.iter().map(|r| r.as_slice()),
    )?;
    let rows: Vec<[f64; 5]> = rep
        .records
        .iter()
        .map(|r| [r.tau, r.mass, r.max, r.m2, r.envelope])
        .collect();
    out.csv("moments.csv", &["tau", "mass", "max", "m2", "envelope"], rows.iter().map(|r| r.as_slice()))?;
    let g = &rep.final_state;
    out.field("profile_final.csv", ["r", "G"], (0..=g.grid.n).map(|j| g.grid.r(j)), &g.values)?;
    out.json(
        "summary.json",
        &json!({
            "d": rep.d,
            "rate": rep.rate,
            "rate_stderr": rep.rate_stderr,
            "sup_bound_ratio": rep.sup_bound_ratio,
            "initial_envelope": rep.initial_envelope,
            "max_envelope": rep.max_envelope,
            "eventually_decreasing": rep.eventually_decreasing(2.0),
        }),
    )?;
    Ok((echo(&cfg), out))
}

/// `fit` configuration: a log-log fit of one CSV column against another.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub input: PathBuf,
    pub x: String,
    pub y: String,
    /// The fitted quantity is `y^power`.
    pub power: f64,
    pub window: [f64; 2],
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            x: "t".into(),
            y: "m2".into(),
            power: 0.5,
            window: [0.0, f64::INFINITY],
        }
    }
}

fn read_columns(path: &Path, names: [&str; 2]) -> Result<[Vec<f64>; 2]> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').map(str::trim).collect();
    let idx = names.map(|n| header.iter().position(|h| *h == n));
    let [Some(a), Some(b)] = idx else {
        return Err(CliError::Config(format!("{}: missing column {names:?}", path.display())));
    };
    let mut cols = [Vec::new(), Vec::new()];
    for (k, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        for (c, &i) in [a, b].iter().enumerate() {
            let v: f64 = cells
                .get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| CliError::Config(format!("{}: bad row {}", path.display(), k + 2)))?;
            cols[c].push(v);
        }
    }
    Ok(cols)
}

pub fn fit(config: Option<&Path>, out_dir: &Path) -> Result<(Value, Output)> {
    let mut cfg: FitConfig = load(config)?;
    if cfg.input.as_os_str().is_empty() {
        return Err(CliError::Config("fit needs `input`".into()));
    }
    if let (Some(base), true) = (config.and_then(Path::parent), cfg.input.is_relative()) {
        cfg.input = base.join(&cfg.input);
    }
    let [x, y] = read_columns(&cfg.input, [&cfg.x, &cfg.y])?;
    let y: Vec<f64> = y.iter().map(|v| v.powf(cfg.power)).collect();
    let f = fit_exponent(&x, &y, (cfg.window[0], cfg.window[1]))?;
    let mut out = Output::create(out_dir)?;
    out.json(
        "summary.json",
        &json!({ "slope": f.slope, "stderr": f.stderr, "points": f.points, "x": cfg.x, "y": cfg.y, "power": cfg.power }),
    )?;
    Ok((echo(&cfg), out))
}

pub fn accept(suite: &str, out_dir: &Path) -> Result<(Value, Output, Vec<Verdict>)> {
    if suite != "primary" {
        return Err(CliError::Config(format!("unknown suite `{suite}`")));
    }
    let verdicts = run_all();
    let mut out = Output::create(out_dir)?;
    out.json("acceptance.json", &verdicts)?;
    Ok((json!({ "suite": suite }), out, verdicts))
}
