//! Radially symmetric parabolic stepping in `d >= 2`.
//!
//! The linear operator is `A f = (1/2) Laplacian f + div(y f / 2) + (kappa - d/2) f`,
//! which is `(1/2) Laplacian + (y/2) . grad` for `kappa = 0` and the
//! Fokker-Planck operator of the self-similar `G`-equation for
//! `kappa = d/2`. It is discretized by finite volumes on the cells
//! `[r_{j-1/2}, r_{j+1/2}]` with exponentially fitted face fluxes
//!
//! ```text
//! F_{j+1/2} = a_{j+1/2} / (2 dr) * (e^{delta/4} f_{j+1} - e^{-delta/4} f_j),
//! delta = r_{j+1}^2 - r_j^2,
//! ```
//!
//! so that the Gaussian `e^{-r^2/2}` carries exactly zero flux and the
//! matrix is an M-matrix for every `dr`. The last node is a homogeneous
//! Dirichlet node.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::tridiag;

/// Zeroth-order nonlinearity written as `c(G, tau) * G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Reaction {
    None,
    /// `c = 1 + E - H`.
    FrozenE { e: f64 },
    /// `c = e^{-(d-2) tau / 2} (||G||_2^2 / int G - G)`.
    Coupled,
}

/// Time discretization of one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Crank-Nicolson half step, explicit-midpoint reaction, Crank-Nicolson
    /// half step.
    StrangCrankNicolson,
    /// Backward Euler for the linear part with the reaction linearized as
    /// `(a - b G^n) G^{n+1}`; monotone for `dt * a < 1`.
    SemiImplicitEuler,
}

/// Tridiagonal coefficients of `A` acting on the unknowns `0..n`.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    /// Coefficient of `f_{n-1}` in the outward flux through the last face.
    pub outflow: f64,
}

impl LinearOperator {
    pub fn new(grid: &RadialGrid, kappa: f64) -> Self {
        let n = grid.n;
        let dr = grid.dr();
        let vol = grid.cell_volumes();
        let area = grid.face_areas();
        let d = grid.dim as f64;
        let delta = |j: usize| grid.r(j + 1).powi(2) - grid.r(j).powi(2);
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for j in 0..n {
            let right = area[j] / (2.0 * dr * vol[j]);
            let dp = delta(j);
            upper[j] = right * (0.25 * dp).exp();
            diag[j] = -right * (-0.25 * dp).exp() + kappa - 0.5 * d;
            if j > 0 {
                let left = area[j - 1] / (2.0 * dr * vol[j]);
                let dm = delta(j - 1);
                lower[j] = left * (-0.25 * dm).exp();
                diag[j] -= left * (0.25 * dm).exp();
            }
        }
        // The Dirichlet node carries zero, so the outflow is
        // -F_{n-1/2} = a e^{-delta/4} f_{n-1} / (2 dr).
        let outflow = area[n - 1] * (-0.25 * delta(n - 1)).exp() / (2.0 * dr);
        upper[n - 1] = 0.0;
        Self {
            lower,
            diag,
            upper,
            outflow,
        }
    }

    /// `A f` on the unknowns; the Dirichlet entry of the result is zero.
    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        let n = self.diag.len();
        for j in 0..n {
            let mut v = self.diag[j] * f[j];
            if j > 0 {
                v += self.lower[j] * f[j - 1];
            }
            if j + 1 < n {
                v += self.upper[j] * f[j + 1];
            }
            out[j] = v;
        }
        if out.len() > n {
            out[n] = 0.0;
        }
    }

    /// Off-diagonals nonnegative: the matrix `-A` is a Z-matrix.
    pub fn is_m_matrix(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|v| *v >= 0.0)
    }
}

/// Finite-volume Laplacian with exact shell volumes. The origin row is
/// `2d (f_1 - f_0) / dr^2`; the last node uses a quadratic ghost value.
pub fn radial_laplacian(f: &RadialField) -> Result<RadialField> {
    let g = f.grid;
    let n = g.n;
    if f.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite radial field"));
    }
    let dr = g.dr();
    let s = g.sphere_area();
    let d = g.dim as i32;
    let ball = |r: f64| s * r.max(0.0).powi(d) / d as f64;
    let face = |j: f64| s * (j * dr).powi(d - 1);
    let v = &f.values;
    let ghost = 3.0 * v[n] - 3.0 * v[n - 1] + v[n - 2];
    let out = (0..=n)
        .map(|j| {
            let jf = j as f64;
            let right = if j < n { v[j + 1] } else { ghost };
            let vol = ball((jf + 0.5) * dr) - ball((jf - 0.5) * dr);
            let mut flux = face(jf + 0.5) * (right - v[j]) / dr;
            if j > 0 {
                flux -= face(jf - 0.5) * (v[j] - v[j - 1]) / dr;
            }
            flux / vol
        })
        .collect();
    Ok(RadialField {
        grid: g,
        values: out,
    })
}

/// A radial evolution problem with fixed grid, linear part and reaction.
#[derive(Debug, Clone)]
pub struct RadialProblem {
    pub grid: RadialGrid,
    pub kappa: f64,
    pub reaction: Reaction,
    pub scheme: Scheme,
    op: LinearOperator,
    volumes: Vec<f64>,
}

impl RadialProblem {
    pub fn new(grid: RadialGrid, kappa: f64, reaction: Reaction, scheme: Scheme) -> Result<Self> {
        let op = LinearOperator::new(&grid, kappa);
        if !op.is_m_matrix() {
            return Err(Error::Precondition("radial operator lost the M-matrix sign pattern".into()));
        }
        Ok(Self {
            volumes: grid.cell_volumes(),
            grid,
            kappa,
            reaction,
            scheme,
            op,
        })
    }

    pub fn operator(&self) -> &LinearOperator {
        &self.op
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Finite-volume mass `sum V_j G_j`.
    pub fn mass(&self, g: &[f64]) -> f64 {
        self.volumes.iter().zip(g).map(|(v, f)| v * f).sum()
    }

    /// `sum V_j G_j^2`.
    pub fn l2sq(&self, g: &[f64]) -> f64 {
        self.volumes.iter().zip(g).map(|(v, f)| v * f * f).sum()
    }

    /// Reaction as `c = a - b G` at time `tau`.
    pub fn reaction_parts(&self, g: &[f64], tau: f64) -> (f64, f64) {
        match self.reaction {
            Reaction::None => (0.0, 0.0),
            Reaction::FrozenE { e } => (1.0 + e, 1.0),
            Reaction::Coupled => {
                let p = (-(self.grid.dim as f64 - 2.0) * tau / 2.0).exp();
                let m = self.mass(g);
                let a = if m > 0.0 { p * self.l2sq(g) / m } else { 0.0 };
                (a, p)
            }
        }
    }

    /// Sup norm of the reaction coefficient.
    pub fn reaction_bound(&self, g: &[f64], tau: f64) -> f64 {
        let (a, b) = self.reaction_parts(g, tau);
        let gmax = g.iter().copied().fold(0.0, f64::max);
        a.abs().max((a - b * gmax).abs())
    }

    /// Elliptic residual `A G + c(G) G` at every unknown.
    pub fn residual(&self, g: &[f64], tau: f64) -> Vec<f64> {
        let mut out = vec![0.0; g.len()];
        self.op.apply(g, &mut out);
        let (a, b) = self.reaction_parts(g, tau);
        for j in 0..self.grid.n {
            out[j] += (a - b * g[j]) * g[j];
        }
        out
    }

    /// Outward flux of `G` through the Dirichlet face, `-F_{n-1/2}`.
    pub fn boundary_outflow(&self, g: &[f64]) -> f64 {
        self.op.outflow * g[self.grid.n - 1]
    }

    /// Advance `state` from `tau` by `dt`.
    pub fn step(&self, state: &mut RadialField, tau: f64, dt: f64, ws: &mut Workspace) -> Result<()> {
        if state.grid != self.grid {
            return Err(Error::config("state and problem grids differ"));
        }
        let n = self.grid.n;
        match self.scheme {
            Scheme::StrangCrankNicolson => {
                let bound = self.reaction_bound(&state.values, tau);
                if dt * bound > 0.2 * (1.0 + 1e-12) {
                    return Err(Error::Precondition(format!(
                        "dt = {dt} exceeds 0.2 / {bound} for the explicit reaction"
                    )));
                }
                self.crank_nicolson(&mut state.values, 0.5 * dt, ws);
                if self.reaction != Reaction::None {
                    let (a, b) = self.reaction_parts(&state.values, tau);
                    for j in 0..n {
                        let g = state.values[j];
                        ws.mid[j] = g + 0.5 * dt * (a - b * g) * g;
                    }
                    ws.mid[n] = 0.0;
                    let (a, b) = self.reaction_parts(&ws.mid, tau + 0.5 * dt);
                    for j in 0..n {
                        let m = ws.mid[j];
                        state.values[j] += dt * (a - b * m) * m;
                    }
                }
                self.crank_nicolson(&mut state.values, 0.5 * dt, ws);
            }
            Scheme::SemiImplicitEuler => {
                let (a, b) = self.reaction_parts(&state.values, tau + dt);
                if dt * a >= 1.0 {
                    return Err(Error::Precondition(format!(
                        "dt = {dt} breaks diagonal dominance (need dt * {a} < 1)"
                    )));
                }
                for j in 0..n {
                    ws.a[j] = -dt * self.op.lower[j];
                    ws.c[j] = -dt * self.op.upper[j];
                    ws.b[j] = 1.0 - dt * self.op.diag[j] - dt * a + dt * b * state.values[j];
                }
                tridiag::solve(&ws.a, &ws.b, &ws.c, &mut state.values[..n], &mut ws.scratch);
            }
        }
        state.values[n] = 0.0;
        for (j, v) in state.values.iter_mut().enumerate() {
            if !v.is_finite() || *v < -1e-12 {
                return Err(Error::numerical(format!(
                    "radial value {v} at r = {} violates positivity",
                    self.grid.r(j)
                )));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(())
    }

    fn crank_nicolson(&self, f: &mut [f64], h: f64, ws: &mut Workspace) {
        let n = self.grid.n;
        self.op.apply(f, &mut ws.rhs);
        for (j, fj) in f[..n].iter().enumerate() {
            ws.rhs[j] = fj + 0.5 * h * ws.rhs[j];
            ws.a[j] = -0.5 * h * self.op.lower[j];
            ws.c[j] = -0.5 * h * self.op.upper[j];
            ws.b[j] = 1.0 - 0.5 * h * self.op.diag[j];
        }
        tridiag::solve(&ws.a, &ws.b, &ws.c, &mut ws.rhs[..n], &mut ws.scratch);
        f[..n].copy_from_slice(&ws.rhs[..n]);
    }
}

/// Scratch buffers for [`RadialProblem::step`].
#[derive(Debug, Clone)]
pub struct Workspace {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    rhs: Vec<f64>,
    mid: Vec<f64>,
    scratch: Vec<f64>,
}

impl Workspace {
    pub fn new(grid: &RadialGrid) -> Self {
        let n = grid.n;
        Self {
            a: vec![0.0; n],
            b: vec![0.0; n],
            c: vec![0.0; n],
            rhs: vec![0.0; n + 1],
            mid: vec![0.0; n + 1],
            scratch: vec![0.0; n],
        }
    }
}

/// Convenience wrapper matching the one-shot stepping signature.
pub fn step_radial(
    problem: &RadialProblem,
    state: &RadialField,
    tau: f64,
    dt: f64,
) -> Result<RadialField> {
    let mut out = state.clone();
    let mut ws = Workspace::new(&problem.grid);
    problem.step(&mut out, tau, dt, &mut ws)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn laplacian_of_r_squared() {
        for d in [2usize, 3, 4] {
            let g = RadialGrid::new(d, 5.0, 200).unwrap();
            let f = RadialField::from_fn(g, |r| r * r);
            let lap = radial_laplacian(&f).unwrap();
            for v in &lap.values {
                assert!((v - 2.0 * d as f64).abs() < 1e-8, "d = {d}: {v}");
            }
        }
    }

    #[test]
    fn laplacian_of_gaussian_at_origin() {
        let g = RadialGrid::new(2, 6.0, 6000).unwrap();
        let f = RadialField::from_fn(g, |r| (-r * r / 2.0).exp());
        let lap = radial_laplacian(&f).unwrap();
        assert!((lap.values[0] + 2.0).abs() < 1e-6);
        // Interior: (r^2 - 2) e^{-r^2/2} up to O(dr^2).
        for j in [100, 1000, 3000] {
            let r = g.r(j);
            assert!((lap.values[j] - (r * r - 2.0) * (-r * r / 2.0).exp()).abs() < 1e-5);
        }
    }

    #[test]
    fn laplacian_of_constant() {
        let g = RadialGrid::new(3, 2.0, 64).unwrap();
        let lap = radial_laplacian(&RadialField::from_fn(g, |_| 3.5)).unwrap();
        assert!(lap.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn gaussian_is_in_the_kernel_of_the_fokker_planck_operator() {
        let g = RadialGrid::new(3, 10.0, 500).unwrap();
        let op = LinearOperator::new(&g, 1.5);
        let f: Vec<f64> = (0..=g.n).map(|j| (-g.r(j).powi(2) / 2.0).exp()).collect();
        let mut out = vec![0.0; g.n + 1];
        op.apply(&f, &mut out);
        // Only the last unknown feels the truncated face.
        for v in &out[..g.n - 1] {
            assert!(v.abs() < 1e-10);
        }
    }

    #[test]
    fn operator_is_m_matrix_for_coarse_grids() {
        let g = RadialGrid::new(2, 40.0, 64).unwrap();
        assert!(LinearOperator::new(&g, 0.0).is_m_matrix());
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let g = RadialGrid::new(2, 10.0, 200).unwrap();
        for scheme in [Scheme::StrangCrankNicolson, Scheme::SemiImplicitEuler] {
            let p = RadialProblem::new(g, 0.0, Reaction::FrozenE { e: 1.0 }, scheme).unwrap();
            let z = RadialField::zeros(g);
            let out = step_radial(&p, &z, 0.0, 0.1).unwrap();
            assert!(out.values.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn linear_fokker_planck_keeps_its_steady_state() {
        let d = 3;
        let g = RadialGrid::new(d, 12.0, 1200).unwrap();
        let p = RadialProblem::new(g, 1.5, Reaction::None, Scheme::StrangCrankNicolson).unwrap();
        let psi0_sq = |r: f64| (-r * r / 2.0).exp() / (2.0 * PI).powf(1.5);
        let mut state = RadialField::from_fn(g, psi0_sq);
        state.values[g.n] = 0.0;
        let start = state.clone();
        let mut ws = Workspace::new(&g);
        let mut tau = 0.0;
        while tau < 1.0 - 1e-12 {
            p.step(&mut state, tau, 0.01, &mut ws).unwrap();
            tau += 0.01;
        }
        let err = state
            .values
            .iter()
            .zip(&start.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn coupled_reaction_conserves_mass() {
        let g = RadialGrid::new(3, 12.0, 1200).unwrap();
        let p = RadialProblem::new(g, 1.5, Reaction::Coupled, Scheme::StrangCrankNicolson).unwrap();
        let mut state = RadialField::from_fn(g, |r| (1.0 - r * r / 4.0).max(0.0).powi(3));
        let m0 = p.mass(&state.values);
        let mut ws = Workspace::new(&g);
        for k in 0..100 {
            let before = p.mass(&state.values);
            p.step(&mut state, k as f64 * 0.01, 0.01, &mut ws).unwrap();
            let after = p.mass(&state.values);
            assert!((after - before).abs() < 1e-10 * m0);
        }
    }

    #[test]
    fn strang_step_rejects_large_dt() {
        let g = RadialGrid::new(2, 10.0, 200).unwrap();
        let p = RadialProblem::new(g, 0.0, Reaction::FrozenE { e: 1.0 }, Scheme::StrangCrankNicolson)
            .unwrap();
        let s = RadialField::from_fn(g, |r| (-r * r).exp());
        assert!(step_radial(&p, &s, 0.0, 1.0).is_err());
    }
}
