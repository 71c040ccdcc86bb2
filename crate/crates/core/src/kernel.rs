//! Interaction kernels `R = phi * phi`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field1D, UniformGrid1D};

/// Mollifier sampled on a solver grid, or the delta kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Delta,
    Mollifier { phi: Field1D, half_width: f64 },
}

/// Grid-independent kernel description, rebuilt whenever the grid changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum KernelSpec {
    Delta,
    /// Normalized indicator of `[-width/2, width/2]`.
    Tophat { width: f64 },
    /// Centered normal density with standard deviation `sigma`.
    Gaussian { sigma: f64 },
    /// Tabulated `phi` on increasing abscissae, linearly interpolated.
    Table { x: Vec<f64>, phi: Vec<f64> },
}

/// Gaussian mollifiers are truncated at this many standard deviations.
pub const GAUSSIAN_CUTOFF: f64 = 8.5;

impl KernelSpec {
    pub fn half_width(&self) -> f64 {
        match self {
            KernelSpec::Delta => 0.0,
            KernelSpec::Tophat { width } => 0.5 * width,
            KernelSpec::Gaussian { sigma } => GAUSSIAN_CUTOFF * sigma,
            // Linear interpolation reaches zero only at the next abscissa.
            KernelSpec::Table { x, phi } => (0..phi.len())
                .filter(|&i| phi[i] > 0.0)
                .flat_map(|i| [x[i.saturating_sub(1)], x[(i + 1).min(x.len() - 1)]])
                .map(f64::abs)
                .fold(0.0, f64::max),
        }
    }

    /// Sample onto `grid`. Tophats use exact cell averages, Gaussians use
    /// point values; both are rescaled to unit discrete mass.
    pub fn build(&self, grid: &UniformGrid1D) -> Result<Kernel> {
        let raw = match self {
            KernelSpec::Delta => return Ok(Kernel::Delta),
            KernelSpec::Tophat { width } => {
                positive("tophat width", *width)?;
                let (a, b) = (-0.5 * width, 0.5 * width);
                let dx = grid.dx();
                Field1D::from_fn(*grid, |x| {
                    let lo = (x - 0.5 * dx).max(a);
                    let hi = (x + 0.5 * dx).min(b);
                    (hi - lo).max(0.0) / dx
                })
            }
            KernelSpec::Gaussian { sigma } => {
                positive("gaussian sigma", *sigma)?;
                let cut = GAUSSIAN_CUTOFF * sigma;
                Field1D::from_fn(*grid, |x| {
                    if x.abs() > cut {
                        0.0
                    } else {
                        (-0.5 * (x / sigma).powi(2)).exp()
                    }
                })
            }
            KernelSpec::Table { x, phi } => {
                if x.len() != phi.len() || x.len() < 2 {
                    return Err(Error::config("kernel table needs matching x and phi columns"));
                }
                if x.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::config("kernel table abscissae must increase"));
                }
                if phi.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(Error::config("kernel table values must be finite and >= 0"));
                }
                Field1D::from_fn(*grid, |t| table_lookup(x, phi, t))
            }
        };
        let half_width = match self {
            // Cell averages leak into the cell straddling each edge.
            KernelSpec::Tophat { .. } => self.half_width() + grid.dx(),
            _ => self.half_width(),
        };
        Kernel::mollifier(raw, half_width)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be positive, got {v}")))
    }
}

fn table_lookup(x: &[f64], phi: &[f64], t: f64) -> f64 {
    if t < x[0] || t > x[x.len() - 1] {
        return 0.0;
    }
    let k = x.partition_point(|&xi| xi <= t).clamp(1, x.len() - 1);
    let (x0, x1) = (x[k - 1], x[k]);
    let u = (t - x0) / (x1 - x0);
    (1.0 - u) * phi[k - 1] + u * phi[k]
}

impl Kernel {
    /// Normalize `phi` to unit mass and validate the mollifier invariants.
    pub fn mollifier(mut phi: Field1D, half_width: f64) -> Result<Kernel> {
        let grid = phi.grid;
        let j0 = grid
            .origin_index()
            .ok_or_else(|| Error::config("kernel grid must contain the node x = 0"))?;
        if phi.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::config("mollifier must be finite and nonnegative"));
        }
        let mass: f64 = phi.values.iter().sum::<f64>() * grid.dx();
        if mass <= 0.0 {
            return Err(Error::config(
                "mollifier has zero mass on this grid (width below grid spacing?)",
            ));
        }
        for v in &mut phi.values {
            *v /= mass;
        }
        let peak = phi.max();
        let n = grid.n;
        for k in 1..n / 2 {
            let (a, b) = (phi.values[(j0 + k) % n], phi.values[(j0 + n - k) % n]);
            if (a - b).abs() > 1e-12 * peak {
                return Err(Error::config("mollifier must be even about x = 0"));
            }
        }
        for j in 0..n {
            if grid.x(j).abs() > half_width + 1e-12 && phi.values[j] > 1e-14 {
                return Err(Error::config(format!(
                    "mollifier exceeds its declared half-width {half_width} at x = {}",
                    grid.x(j)
                )));
            }
        }
        Ok(Kernel::Mollifier { phi, half_width })
    }

    pub fn is_delta(&self) -> bool {
        matches!(self, Kernel::Delta)
    }

    pub fn half_width(&self) -> f64 {
        match self {
            Kernel::Delta => 0.0,
            Kernel::Mollifier { half_width, .. } => *half_width,
        }
    }
}
