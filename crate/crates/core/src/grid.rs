//! Grids, sampled fields, quadrature and resampling.
//!
//! Line grids are node-centered and periodic: node `j` sits at
//! `x_min + j * dx` and `x_max` is identified with `x_min`. Radial grids
//! store both `r = 0` and `r = r_max`.

use crate::error::{Error, Result};

/// Periodic uniform grid on `[x_min, x_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl UniformGrid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::config(format!(
                "grid bounds must satisfy x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::config(format!(
                "grid size must be a power of two >= 64, got {n}"
            )));
        }
        Ok(Self { x_min, x_max, n })
    }

    /// Grid on `[-half_extent, half_extent)`; node `n/2` sits at 0.
    pub fn symmetric(half_extent: f64, n: usize) -> Result<Self> {
        Self::new(-half_extent, half_extent, n)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }

    pub fn extent(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Index of the node nearest to `x = 0`, if it lies on the grid.
    pub fn origin_index(&self) -> Option<usize> {
        let s = -self.x_min / self.dx();
        let j = s.round();
        ((s - j).abs() < 1e-9 && j >= 0.0 && (j as usize) < self.n).then_some(j as usize)
    }
}

/// Sampled real field on a periodic line grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field1D {
    pub grid: UniformGrid1D,
    pub values: Vec<f64>,
}

impl Field1D {
    pub fn new(grid: UniformGrid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::config(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.n
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: UniformGrid1D, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n).map(|j| f(grid.x(j))).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: UniformGrid1D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n],
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `sum(values^2) * dx`.
    pub fn l2sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.dx()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(j) => Err(Error::numerical(format!(
                "non-finite value {} at x = {}",
                self.values[j],
                self.grid.x(j)
            ))),
            None => Ok(()),
        }
    }

    /// Clamp roundoff negatives in `[-tol, 0)` to zero; fail below `-tol`.
    pub fn clamp_density(&mut self, tol: f64) -> Result<()> {
        for (j, v) in self.values.iter_mut().enumerate() {
            if !v.is_finite() || *v < -tol {
                return Err(Error::numerical(format!(
                    "density value {v} at x = {} violates positivity",
                    self.grid.x(j)
                )));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(())
    }

    /// Rectangle-rule mass of the nodes with `|x| > r`.
    pub fn mass_outside(&self, r: f64) -> f64 {
        let dx = self.grid.dx();
        (0..self.grid.n)
            .filter(|&j| self.grid.x(j).abs() > r)
            .map(|j| self.values[j].abs())
            .sum::<f64>()
            * dx
    }
}

/// Quadrature over a sampled field.
pub trait Integrate {
    fn integral(&self) -> f64;
}

impl Integrate for Field1D {
    fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }
}

impl Integrate for RadialField {
    fn integral(&self) -> f64 {
        let w = self.grid.trapezoid_weights();
        w.iter().zip(&self.values).map(|(w, v)| w * v).sum()
    }
}

/// Periodic rectangle rule on line fields, `sigma_d r^{d-1}` trapezoid on
/// radial fields. Fails on non-finite input.
pub fn integrate<F: Integrate + Finite>(f: &F) -> Result<f64> {
    f.ensure_finite()?;
    Ok(f.integral())
}

pub trait Finite {
    fn ensure_finite(&self) -> Result<()>;
}

impl Finite for Field1D {
    fn ensure_finite(&self) -> Result<()> {
        self.check_finite()
    }
}

impl Finite for RadialField {
    fn ensure_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(j) => Err(Error::numerical(format!(
                "non-finite value at r = {}",
                self.grid.r(j)
            ))),
            None => Ok(()),
        }
    }
}

/// Surface area of the unit sphere in `R^d`: `2 pi^{d/2} / Gamma(d/2)`.
pub fn sphere_area(d: usize) -> f64 {
    use std::f64::consts::PI;
    // Gamma(d/2) by recursion from Gamma(1) = 1, Gamma(1/2) = sqrt(pi).
    let mut gamma = if d.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut a = if d.is_multiple_of(2) { 1.0 } else { 0.5 };
    while a < d as f64 / 2.0 - 1e-12 {
        gamma *= a;
        a += 1.0;
    }
    2.0 * PI.powf(d as f64 / 2.0) / gamma
}

/// Radial grid with nodes `r_j = j * dr`, `j = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    pub dim: usize,
    pub r_max: f64,
    pub n: usize,
}

impl RadialGrid {
    pub fn new(dim: usize, r_max: f64, n: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::config(format!("radial dimension must be >= 2, got {dim}")));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::config(format!("r_max must be positive, got {r_max}")));
        }
        if n < 64 {
            return Err(Error::config(format!("radial grid needs n >= 64, got {n}")));
        }
        Ok(Self { dim, r_max, n })
    }

    pub fn dr(&self) -> f64 {
        self.r_max / self.n as f64
    }

    pub fn r(&self, j: usize) -> f64 {
        j as f64 * self.dr()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|j| self.r(j)).collect()
    }

    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.dim)
    }

    /// Trapezoid weights for `int f(r) sigma_d r^{d-1} dr`.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let dr = self.dr();
        let s = self.sphere_area();
        let d = self.dim as i32;
        (0..=self.n)
            .map(|j| {
                let w = s * self.r(j).powi(d - 1) * dr;
                if j == self.n {
                    0.5 * w
                } else {
                    w
                }
            })
            .collect()
    }

    /// Exact shell volumes of the finite-volume cells
    /// `[r_{j-1/2}, r_{j+1/2}]` (cell 0 is the ball of radius `dr/2`).
    /// The Dirichlet node `n` gets zero volume.
    pub fn cell_volumes(&self) -> Vec<f64> {
        let dr = self.dr();
        let s = self.sphere_area();
        let d = self.dim as i32;
        let ball = |r: f64| s * r.powi(d) / d as f64;
        (0..=self.n)
            .map(|j| {
                if j == self.n {
                    0.0
                } else if j == 0 {
                    ball(0.5 * dr)
                } else {
                    ball((j as f64 + 0.5) * dr) - ball((j as f64 - 0.5) * dr)
                }
            })
            .collect()
    }

    /// Face areas `sigma_d r_{j+1/2}^{d-1}` for faces `j = 0..n-1`.
    pub fn face_areas(&self) -> Vec<f64> {
        let dr = self.dr();
        let s = self.sphere_area();
        (0..self.n)
            .map(|j| s * ((j as f64 + 0.5) * dr).powi(self.dim as i32 - 1))
            .collect()
    }
}

/// Sampled radial profile, `n + 1` values including both endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    pub grid: RadialGrid,
    pub values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n + 1 {
            return Err(Error::config(format!(
                "radial field has {} values for {} nodes",
                values.len(),
                grid.n + 1
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..=grid.n).map(|j| f(grid.r(j))).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n + 1],
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Finite-volume mass `sum V_j f_j`.
    pub fn volume_integral(&self) -> f64 {
        self.grid
            .cell_volumes()
            .iter()
            .zip(&self.values)
            .map(|(v, f)| v * f)
            .sum()
    }
}

/// Four-point Lagrange interpolation of node data at fractional index `s`,
/// treating nodes outside `0..n` as zero.
pub(crate) fn cubic_at(values: &[f64], s: f64) -> f64 {
    let n = values.len() as isize;
    let i = s.floor() as isize;
    let u = s - i as f64;
    let get = |k: isize| if (0..n).contains(&k) { values[k as usize] } else { 0.0 };
    let (f0, f1, f2, f3) = (get(i - 1), get(i), get(i + 1), get(i + 2));
    let w0 = -u * (u - 1.0) * (u - 2.0) / 6.0;
    let w1 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
    let w2 = -(u + 1.0) * u * (u - 2.0) / 2.0;
    let w3 = (u + 1.0) * u * (u - 1.0) / 6.0;
    w0 * f0 + w1 * f1 + w2 * f2 + w3 * f3
}


/// Cubic interpolation of `f` onto `new_grid`, zero-padded outside the
/// source domain. Fails if more than `1e-10` of `|f|` lies outside the new
/// domain.
pub fn resample(f: &Field1D, new_grid: UniformGrid1D) -> Result<Field1D> {
    f.check_finite()?;
    let g = f.grid;
    let dx = g.dx();
    let lost: f64 = (0..g.n)
        .filter(|&j| {
            let x = g.x(j);
            x < new_grid.x_min || x >= new_grid.x_max
        })
        .map(|j| f.values[j].abs())
        .sum::<f64>()
        * dx;
    // The periodic seam of the source also has to be empty: mass there has
    // no unambiguous position after the domain changes.
    let seam = (f.values[0].abs() + f.values[g.n - 1].abs()) * dx;
    if lost > 1e-10 || seam > 1e-10 {
        return Err(Error::overflow(format!(
            "resample would drop mass {:.3e} (seam {:.3e}) outside [{}, {})",
            lost, seam, new_grid.x_min, new_grid.x_max
        )));
    }
    let values = (0..new_grid.n)
        .map(|j| cubic_at(&f.values, (new_grid.x(j) - g.x_min) / dx))
        .collect();
    Ok(Field1D {
        grid: new_grid,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gauss(x: f64) -> f64 {
        (-x * x / 2.0).exp() / (2.0 * PI).sqrt()
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(UniformGrid1D::new(-1.0, 1.0, 100).is_err());
        assert!(UniformGrid1D::new(-1.0, 1.0, 32).is_err());
        assert!(UniformGrid1D::new(1.0, -1.0, 128).is_err());
        assert!(RadialGrid::new(1, 1.0, 128).is_err());
    }

    #[test]
    fn symmetric_grid_has_origin_node() {
        let g = UniformGrid1D::symmetric(20.0, 1024).unwrap();
        assert_eq!(g.origin_index(), Some(512));
        assert_eq!(g.x(512), 0.0);
    }

    #[test]
    fn integrate_constant_line() {
        let g = UniformGrid1D::new(-1.0, 1.0, 128).unwrap();
        let f = Field1D::from_fn(g, |_| 1.0);
        assert_eq!(integrate(&f).unwrap(), 2.0);
    }

    #[test]
    fn integrate_unit_disk() {
        let g = RadialGrid::new(2, 1.0, 128).unwrap();
        let f = RadialField::from_fn(g, |_| 1.0);
        assert!((integrate(&f).unwrap() - PI).abs() < 1e-6);
    }

    #[test]
    fn integrate_gaussian_matches_double_resolution() {
        let coarse = UniformGrid1D::symmetric(20.0, 1024).unwrap();
        let fine = UniformGrid1D::symmetric(20.0, 2048).unwrap();
        let a = integrate(&Field1D::from_fn(coarse, gauss)).unwrap();
        let b = integrate(&Field1D::from_fn(fine, gauss)).unwrap();
        assert!((a - b).abs() < 1e-13);
        assert!((a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integrate_rejects_nan() {
        let g = UniformGrid1D::new(-1.0, 1.0, 64).unwrap();
        let mut f = Field1D::zeros(g);
        f.values[3] = f64::NAN;
        assert!(matches!(integrate(&f), Err(Error::Numerical(_))));
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn cell_volumes_tile_the_ball() {
        for d in 2..=4 {
            let g = RadialGrid::new(d, 3.0, 300).unwrap();
            let total: f64 = g.cell_volumes().iter().sum();
            let r = 3.0 - 0.5 * g.dr();
            let ball = sphere_area(d) * r.powi(d as i32) / d as f64;
            assert!((total - ball).abs() < 1e-10 * ball);
        }
    }

    #[test]
    fn radial_trapezoid_is_accurate_for_gaussians_in_odd_d() {
        let g = RadialGrid::new(3, 12.0, 2400).unwrap();
        let f = RadialField::from_fn(g, |r| (-r * r / 2.0).exp() / (2.0 * PI).powf(1.5));
        assert!((integrate(&f).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn resample_embedding_preserves_mass() {
        let a = UniformGrid1D::symmetric(10.0, 256).unwrap();
        let b = UniformGrid1D::symmetric(20.0, 512).unwrap();
        let f = Field1D::from_fn(a, |x| (-x * x).exp());
        let g = resample(&f, b).unwrap();
        let (ma, mb) = (f.integral(), g.integral());
        assert!((ma - mb).abs() < 1e-9 * ma);
    }

    #[test]
    fn resample_coarsening_is_fourth_order() {
        let mut errs = Vec::new();
        for n in [512usize, 1024] {
            let a = UniformGrid1D::symmetric(10.0, n).unwrap();
            // Shifted target so that nodes do not coincide.
            let b = UniformGrid1D::new(-10.0 + 0.3 * 20.0 / n as f64, 10.0, n / 2).unwrap();
            let f = Field1D::from_fn(a, gauss);
            let g = resample(&f, b).unwrap();
            let err = (0..b.n)
                .map(|j| (g.values[j] - gauss(b.x(j))).abs())
                .fold(0.0, f64::max);
            let dx = a.dx();
            assert!(err < 0.1 * dx.powi(4), "err {err} dx {dx}");
            errs.push(err);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 3.5, "observed order {order}");
    }

    #[test]
    fn resample_round_trip_is_close() {
        let a = UniformGrid1D::symmetric(10.0, 1024).unwrap();
        let b = UniformGrid1D::new(-12.3, 11.7, 2048).unwrap();
        let f = Field1D::from_fn(a, gauss);
        let back = resample(&resample(&f, b).unwrap(), a).unwrap();
        let err = f
            .values
            .iter()
            .zip(&back.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6);
    }

    #[test]
    fn resample_detects_overflow() {
        let a = UniformGrid1D::symmetric(10.0, 256).unwrap();
        let f = Field1D::from_fn(a, |_| 0.05);
        let b = UniformGrid1D::symmetric(5.0, 256).unwrap();
        assert!(matches!(resample(&f, b), Err(Error::DomainOverflow(_))));
        let c = UniformGrid1D::symmetric(20.0, 512).unwrap();
        assert!(matches!(resample(&f, c), Err(Error::DomainOverflow(_))));
    }

    #[test]
    fn clamp_policy() {
        let g = UniformGrid1D::new(0.0, 1.0, 64).unwrap();
        let mut f = Field1D::zeros(g);
        f.values[1] = -1e-13;
        f.clamp_density(1e-12).unwrap();
        assert_eq!(f.values[1], 0.0);
        f.values[2] = -1e-11;
        assert!(f.clamp_density(1e-12).is_err());
    }
}
