//! Periodic FFT convolution with the mollifier `phi` and with `R = phi * phi`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Field1D, UniformGrid1D};
use crate::kernel::Kernel;

/// FFT workspace for one grid. Caches plans, wavenumbers and the kernel
/// transforms; rebuild it after any regrid.
pub struct Spectral {
    grid: UniformGrid1D,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
    kappa2: Vec<f64>,
    phi_hat: Option<Vec<f64>>,
    r_hat: Option<Vec<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: UniformGrid1D, kernel: &Kernel) -> Result<Self> {
        let n = grid.n;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        let two_pi_over_l = 2.0 * std::f64::consts::PI / grid.extent();
        let kappa2 = (0..n)
            .map(|k| {
                let m = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
                (m * two_pi_over_l).powi(2)
            })
            .collect();
        let mut s = Self {
            grid,
            fwd,
            inv,
            buf: vec![Complex64::default(); n],
            scratch: vec![Complex64::default(); scratch_len],
            kappa2,
            phi_hat: None,
            r_hat: None,
        };
        if let Kernel::Mollifier { phi, half_width } = kernel {
            if phi.grid != grid {
                return Err(Error::config("kernel and field live on different grids"));
            }
            check_wrap(&grid, *half_width)?;
            let j0 = grid
                .origin_index()
                .ok_or_else(|| Error::config("grid must contain the node x = 0"))?;
            let dx = grid.dx();
            for (m, b) in s.buf.iter_mut().enumerate() {
                *b = Complex64::new(phi.values[(j0 + m) % n] * dx, 0.0);
            }
            s.fwd.process_with_scratch(&mut s.buf, &mut s.scratch);
            let ph: Vec<f64> = s.buf.iter().map(|c| c.re).collect();
            s.r_hat = Some(ph.iter().map(|p| p * p).collect());
            s.phi_hat = Some(ph);
        }
        Ok(s)
    }

    pub fn grid(&self) -> &UniformGrid1D {
        &self.grid
    }

    fn load(&mut self, f: &[f64]) {
        for (b, v) in self.buf.iter_mut().zip(f) {
            *b = Complex64::new(*v, 0.0);
        }
        self.fwd.process_with_scratch(&mut self.buf, &mut self.scratch);
    }

    fn unload(&mut self, out: &mut [f64]) {
        self.inv.process_with_scratch(&mut self.buf, &mut self.scratch);
        let inv_n = 1.0 / self.grid.n as f64;
        for (o, b) in out.iter_mut().zip(&self.buf) {
            *o = b.re * inv_n;
        }
    }

    fn apply(&mut self, f: &[f64], out: &mut [f64], which: Which) {
        let mult = match which {
            Which::Phi => self.phi_hat.take(),
            Which::R => self.r_hat.take(),
        };
        match mult {
            None => out.copy_from_slice(f),
            Some(m) => {
                self.load(f);
                for (b, w) in self.buf.iter_mut().zip(&m) {
                    *b *= *w;
                }
                self.unload(out);
                match which {
                    Which::Phi => self.phi_hat = Some(m),
                    Which::R => self.r_hat = Some(m),
                }
            }
        }
    }

    /// `out = R * f` (identity for the delta kernel).
    pub fn apply_r(&mut self, f: &[f64], out: &mut [f64]) {
        self.apply(f, out, Which::R)
    }

    /// `out = phi * f` (identity for the delta kernel).
    pub fn apply_phi(&mut self, f: &[f64], out: &mut [f64]) {
        self.apply(f, out, Which::Phi)
    }

    /// Exact heat flow `f <- exp(time/2 * Laplacian) f` in Fourier space.
    pub fn heat(&mut self, f: &mut [f64], time: f64) {
        self.load(f);
        for (b, k2) in self.buf.iter_mut().zip(&self.kappa2) {
            *b *= (-0.5 * k2 * time).exp();
        }
        self.unload(f);
    }

    /// `D_f = <f', (R*f)'>` through Parseval: `(dx/n) sum kappa^2 R^ |f^|^2`.
    pub fn dissipation(&mut self, f: &[f64]) -> f64 {
        self.load(f);
        let r_hat = self.r_hat.as_deref();
        let sum: f64 = self
            .buf
            .iter()
            .enumerate()
            .map(|(k, c)| self.kappa2[k] * r_hat.map_or(1.0, |r| r[k]) * c.norm_sqr())
            .sum();
        sum * self.grid.dx() / self.grid.n as f64
    }
}

#[derive(Clone, Copy)]
enum Which {
    Phi,
    R,
}

fn check_wrap(grid: &UniformGrid1D, half_width: f64) -> Result<()> {
    if half_width > grid.extent() / 4.0 {
        return Err(Error::config(format!(
            "kernel half-width {half_width} exceeds a quarter of the domain extent {}",
            grid.extent()
        )));
    }
    Ok(())
}

/// Periodic convolution `phi * f`; the delta kernel returns `f` unchanged.
pub fn convolve(f: &Field1D, k: &Kernel) -> Result<Field1D> {
    if k.is_delta() {
        return Ok(f.clone());
    }
    f.check_finite()?;
    let mut s = Spectral::new(f.grid, k)?;
    let mut out = vec![0.0; f.grid.n];
    s.apply_phi(&f.values, &mut out);
    Ok(Field1D {
        grid: f.grid,
        values: out,
    })
}

/// Sampled `R = phi * phi` on the grid of `phi`.
#[allow(non_snake_case)]
pub fn make_R(phi: &Field1D) -> Result<Field1D> {
    let grid = phi.grid;
    let half_width = (0..grid.n)
        .filter(|&j| phi.values[j] > 1e-14)
        .map(|j| grid.x(j).abs())
        .fold(0.0, f64::max);
    let mass: f64 = phi.values.iter().sum::<f64>() * grid.dx();
    if (mass - 1.0).abs() > 1e-12 {
        return Err(Error::config(format!("phi must have unit mass, got {mass}")));
    }
    let k = Kernel::mollifier(phi.clone(), half_width)?;
    let mut s = Spectral::new(grid, &k)?;
    let mut out = vec![0.0; grid.n];
    s.apply_phi(&phi.values, &mut out);
    Ok(Field1D { grid, values: out })
}
