//! Soliton-gas hydrodynamics: effective velocities, the kinetic equation,
//! microscopic trajectories and empirical densities.
//!
//! The density of states `ρ(χ, x, t)` obeys the continuity equation
//! `∂ₜρ + ∂ₓ(v_eff ρ) = 0` where the effective velocity solves, per x-cell,
//! the linear integral equation
//!
//! ```text
//!   v(χ) = 4χ² + ∫ ρ(χ') φ(χ,χ') (v(χ') − v(χ)) dχ' .
//! ```
//!
//! The χ-integral uses trapezoid weights; the diagonal node of the kernel
//! carries the exact cell integral of the log singularity. Space stepping is
//! first-order upwind finite volume on a periodic grid, which telescopes the
//! fluxes and conserves mass per χ-node to rounding.

use crate::effective::scan_effective;
use crate::linalg::Matrix;
use crate::model::{phase_shift, RegularizedSign, SolitonConfig};
use crate::{Error, Result};
use serde::Serialize;

pub const CFL: f64 = 0.9;

/// Phase-space density on a (χ-nodes × x-cells) grid, row-major in χ.
#[derive(Debug, Clone, Serialize)]
pub struct DensityField {
    pub chi_grid: Vec<f64>,
    pub x_min: f64,
    pub dx: f64,
    pub n_cells: usize,
    rho: Vec<f64>,
    pub time: f64,
}

impl DensityField {
    pub fn new(
        chi_grid: Vec<f64>,
        x_min: f64,
        dx: f64,
        n_cells: usize,
        rho: Vec<f64>,
    ) -> Result<Self> {
        if chi_grid.is_empty() || n_cells == 0 {
            return Err(Error::InvalidParameter("empty density grid".into()));
        }
        if chi_grid.windows(2).any(|w| w[1] <= w[0]) || chi_grid[0] <= 0.0 {
            return Err(Error::OrderingViolation("chi grid must be ordered positive".into()));
        }
        if !(dx > 0.0) {
            return Err(Error::InvalidParameter("dx must be positive".into()));
        }
        if rho.len() != chi_grid.len() * n_cells {
            return Err(Error::LengthMismatch {
                expected: chi_grid.len() * n_cells,
                got: rho.len(),
            });
        }
        if rho.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("density must be finite and >= 0".into()));
        }
        Ok(DensityField { chi_grid, x_min, dx, n_cells, rho, time: 0.0 })
    }

    pub fn zeros(chi_grid: Vec<f64>, x_min: f64, dx: f64, n_cells: usize) -> Result<Self> {
        let len = chi_grid.len() * n_cells;
        Self::new(chi_grid, x_min, dx, n_cells, vec![0.0; len])
    }

    #[inline]
    pub fn rho(&self, ci: usize, xi: usize) -> f64 {
        self.rho[ci * self.n_cells + xi]
    }

    #[inline]
    pub fn set_rho(&mut self, ci: usize, xi: usize, v: f64) {
        self.rho[ci * self.n_cells + xi] = v;
    }

    pub fn cell_centre(&self, xi: usize) -> f64 {
        self.x_min + (xi as f64 + 0.5) * self.dx
    }

    pub fn n_chi(&self) -> usize {
        self.chi_grid.len()
    }

    /// `Σ_x ρ·dx` for one χ-node.
    pub fn mass_per_chi(&self, ci: usize) -> f64 {
        (0..self.n_cells).map(|xi| self.rho(ci, xi)).sum::<f64>() * self.dx
    }

    /// `∫∫ ρ dχ dx` with trapezoid χ-weights.
    pub fn total_mass(&self) -> f64 {
        let w = trapezoid_weights(&self.chi_grid);
        (0..self.n_chi()).map(|ci| w[ci] * self.mass_per_chi(ci)).sum()
    }
}

/// Effective velocities aligned with a [`DensityField`] grid.
#[derive(Debug, Clone, Serialize)]
pub struct VelocityField {
    pub chi_grid: Vec<f64>,
    pub n_cells: usize,
    v: Vec<f64>,
    /// Sup-norm defect of the discretised velocity equation.
    pub residual: f64,
}

impl VelocityField {
    #[inline]
    pub fn v(&self, ci: usize, xi: usize) -> f64 {
        self.v[ci * self.n_cells + xi]
    }

    pub fn max_abs(&self) -> f64 {
        self.v.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let m = grid.len();
    if m == 1 {
        return vec![0.0];
    }
    let mut w = vec![0.0; m];
    for i in 0..m - 1 {
        let h = grid[i + 1] - grid[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

/// Interaction kernel `φ(χᵢ,χⱼ)` on the grid. The diagonal carries the
/// exact integral of `(1/χ)log(|χ−χ'|/(χ+χ'))` over one cell divided by the
/// node weight, restoring first-order accuracy at the log singularity:
/// `∫_cell = (Δχ/χ)(log(Δχ/(4χ)) − 1)`.
fn kernel(grid: &[f64], weights: &[f64]) -> Vec<Vec<f64>> {
    let m = grid.len();
    let mut k = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                k[i][j] = phase_shift(grid[i], grid[j]).expect("grid ordered");
            } else if m > 1 && weights[i] > 0.0 {
                let dchi = if i == 0 {
                    grid[1] - grid[0]
                } else if i == m - 1 {
                    grid[m - 1] - grid[m - 2]
                } else {
                    0.5 * (grid[i + 1] - grid[i - 1])
                };
                let cell =
                    dchi / grid[i] * ((dchi / (4.0 * grid[i])).ln() - 1.0);
                k[i][j] = cell / weights[i];
            }
        }
    }
    k
}

/// Solve the dressed-velocity linear system per x-cell.
pub fn effective_velocity(rho: &DensityField) -> Result<VelocityField> {
    let m = rho.n_chi();
    let grid = &rho.chi_grid;
    let w = trapezoid_weights(grid);
    let kern = kernel(grid, &w);
    let bare: Vec<f64> = grid.iter().map(|c| 4.0 * c * c).collect();
    let mut v = vec![0.0; m * rho.n_cells];
    let mut residual: f64 = 0.0;
    for xi in 0..rho.n_cells {
        // A v = b with A = I + diag(Σⱼ wⱼρⱼφᵢⱼ) − [wⱼρⱼφᵢⱼ].
        let mut a = Matrix::zeros(m);
        for i in 0..m {
            let mut row_sum = 0.0;
            for j in 0..m {
                let coup = w[j] * rho.rho(j, xi) * kern[i][j];
                row_sum += coup;
                if i != j {
                    a.set(i, j, -coup);
                }
            }
            a.set(i, i, 1.0 + row_sum - w[i] * rho.rho(i, xi) * kern[i][i]);
        }
        let sol = a
            .solve(&bare)
            .map_err(|_| Error::SingularSystem(format!("velocity system at cell {xi}")))?;
        // Defect of the fixed-point form.
        for i in 0..m {
            let mut dress = 0.0;
            for j in 0..m {
                dress += w[j] * rho.rho(j, xi) * kern[i][j] * (sol[j] - sol[i]);
            }
            residual = residual.max((sol[i] - bare[i] - dress).abs());
        }
        for i in 0..m {
            v[i * rho.n_cells + xi] = sol[i];
        }
    }
    Ok(VelocityField { chi_grid: grid.clone(), n_cells: rho.n_cells, v, residual })
}

/// One first-order upwind step on the periodic x-grid; velocities
/// recomputed from the current density. Errors when `dt` violates the CFL
/// condition `dt ≤ CFL·dx/max|v|`.
pub fn ghd_step(rho: &DensityField, dt: f64) -> Result<DensityField> {
    let vel = effective_velocity(rho)?;
    ghd_step_with(rho, &vel, dt)
}

fn ghd_step_with(rho: &DensityField, vel: &VelocityField, dt: f64) -> Result<DensityField> {
    let vmax = vel.max_abs();
    if vmax > 0.0 {
        let limit = CFL * rho.dx / vmax;
        if dt > limit {
            return Err(Error::CflViolation { dt, limit });
        }
    }
    let nc = rho.n_cells;
    let mut out = rho.clone();
    for ci in 0..rho.n_chi() {
        // Interface flux between cell xi and xi+1 (periodic).
        let flux = |xi: usize| -> f64 {
            let xr = (xi + 1) % nc;
            let v_face = 0.5 * (vel.v(ci, xi) + vel.v(ci, xr));
            if v_face >= 0.0 {
                v_face * rho.rho(ci, xi)
            } else {
                v_face * rho.rho(ci, xr)
            }
        };
        for xi in 0..nc {
            let xl = (xi + nc - 1) % nc;
            let new = rho.rho(ci, xi) - dt / rho.dx * (flux(xi) - flux(xl));
            out.set_rho(ci, xi, new);
        }
    }
    out.time = rho.time + dt;
    Ok(out)
}

/// Evolve to `t_end` with CFL-limited uniform steps. Returns the final
/// density and the number of steps taken.
pub fn ghd_evolve(rho: &DensityField, t_end: f64) -> Result<(DensityField, usize)> {
    if t_end <= 0.0 {
        return Ok((rho.clone(), 0));
    }
    let vel = effective_velocity(rho)?;
    let vmax = vel.max_abs().max(1e-12);
    let dt_max = CFL * rho.dx / vmax;
    let steps = (t_end / dt_max).ceil().max(1.0) as usize;
    let dt = t_end / steps as f64;
    let mut current = rho.clone();
    for _ in 0..steps {
        current = ghd_step(&current, dt)?;
    }
    Ok((current, steps))
}

/// Effective-position trajectories: evolve impact parameters, rescan.
pub fn microscopic_trajectories(
    cfg: &SolitonConfig,
    times: &[f64],
    delta_x_scale: f64,
    sgn: RegularizedSign,
) -> Result<Vec<Vec<f64>>> {
    times
        .iter()
        .map(|&t| Ok(scan_effective(&cfg.evolved(t), delta_x_scale, sgn)?.x_eff))
        .collect()
}

/// Uniform bin specification.
#[derive(Debug, Clone, Copy)]
pub struct Bins {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Bins {
    fn index(&self, v: f64) -> Option<usize> {
        if v < self.lo || v > self.hi {
            return None;
        }
        let w = (self.hi - self.lo) / self.count as f64;
        Some((((v - self.lo) / w) as usize).min(self.count - 1))
    }

    fn width(&self) -> f64 {
        (self.hi - self.lo) / self.count as f64
    }
}

/// Histogram of `(χᵢ, xᵢ/N^Λ)` normalised to `counts/(N·bin area)`, so the
/// binned mass sums to 1 up to overflow.
#[derive(Debug, Clone)]
pub struct EmpiricalDensity {
    pub field: DensityField,
    pub overflow: usize,
}

pub fn empirical_density(
    positions: &[f64],
    chi: &[f64],
    chi_bins: Bins,
    x_bins: Bins,
    lambda_scale: f64,
) -> Result<EmpiricalDensity> {
    if positions.len() != chi.len() {
        return Err(Error::LengthMismatch { expected: chi.len(), got: positions.len() });
    }
    let n = positions.len().max(1);
    let scale = (n as f64).powf(lambda_scale);
    let chi_grid: Vec<f64> = (0..chi_bins.count)
        .map(|k| chi_bins.lo + (k as f64 + 0.5) * chi_bins.width())
        .collect();
    let mut field = DensityField::zeros(chi_grid, x_bins.lo, x_bins.width(), x_bins.count)?;
    let mut overflow = 0usize;
    let area = chi_bins.width() * x_bins.width();
    for (&x, &c) in positions.iter().zip(chi) {
        match (chi_bins.index(c), x_bins.index(x / scale)) {
            (Some(ci), Some(xi)) => {
                let v = field.rho(ci, xi) + 1.0 / (n as f64 * area);
                field.set_rho(ci, xi, v);
            }
            _ => overflow += 1,
        }
    }
    Ok(EmpiricalDensity { field, overflow })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_chi_field(chi: f64, amp: f64) -> DensityField {
        let n_cells = 200;
        let mut f = DensityField::zeros(vec![chi], 0.0, 0.5, n_cells).unwrap();
        for xi in 0..n_cells {
            let x = f.cell_centre(xi);
            f.set_rho(0, xi, amp * (-((x - 20.0) / 3.0).powi(2)).exp());
        }
        f
    }

    #[test]
    fn zero_density_velocity_is_bare() {
        let f = DensityField::zeros(vec![0.5, 1.0, 1.5, 2.0], 0.0, 1.0, 4).unwrap();
        let v = effective_velocity(&f).unwrap();
        for (ci, c) in f.chi_grid.iter().enumerate() {
            for xi in 0..f.n_cells {
                assert_eq!(v.v(ci, xi), 4.0 * c * c);
            }
        }
        assert!(v.residual < 1e-14);
    }

    #[test]
    fn point_mass_self_interaction_cancels() {
        // Only one chi-node occupied: v at that node is bare.
        let mut f = DensityField::zeros(vec![1.0, 2.0], 0.0, 1.0, 1).unwrap();
        f.set_rho(1, 0, 3.0);
        let v = effective_velocity(&f).unwrap();
        assert!((v.v(1, 0) - 16.0).abs() < 1e-12);
        assert!(v.residual < 1e-10);
    }

    #[test]
    fn two_node_velocity_matches_hand_solve() {
        let mut f = DensityField::zeros(vec![1.0, 2.0], 0.0, 1.0, 1).unwrap();
        let (r1, r2) = (0.15, 0.25);
        f.set_rho(0, 0, r1);
        f.set_rho(1, 0, r2);
        let v = effective_velocity(&f).unwrap();
        // Independent 2×2 solve by Cramer's rule:
        //   v1 = 4 + w2 r2 φ12 (v2 − v1),  v2 = 16 + w1 r1 φ21 (v1 − v2)
        let w = 0.5;
        let p12 = phase_shift(1.0, 2.0).unwrap();
        let p21 = phase_shift(2.0, 1.0).unwrap();
        let a = w * r2 * p12;
        let b = w * r1 * p21;
        // (1 + a) v1 − a v2 = 4 ;  −b v1 + (1 + b) v2 = 16
        let det = (1.0 + a) * (1.0 + b) - a * b;
        let v1 = (4.0 * (1.0 + b) + 16.0 * a) / det;
        let v2 = ((1.0 + a) * 16.0 + b * 4.0) / det;
        assert!((v.v(0, 0) - v1).abs() < 1e-12, "{} vs {v1}", v.v(0, 0));
        assert!((v.v(1, 0) - v2).abs() < 1e-12);
        assert!(v.residual < 1e-10);
    }

    #[test]
    fn uniform_density_is_steady() {
        let mut f = DensityField::zeros(vec![1.0, 1.5], 0.0, 1.0, 32).unwrap();
        for ci in 0..2 {
            for xi in 0..32 {
                f.set_rho(ci, xi, 0.3 + 0.1 * ci as f64);
            }
        }
        let stepped = ghd_step(&f, 0.01).unwrap();
        for ci in 0..2 {
            for xi in 0..32 {
                assert!((stepped.rho(ci, xi) - f.rho(ci, xi)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn free_streaming_peak_advects() {
        // Single chi-node: self-interaction cancels, velocity is exactly 4.
        let f = single_chi_field(1.0, 1e-3);
        let dt = CFL * f.dx / 4.0;
        let mut g = f.clone();
        for _ in 0..100 {
            g = ghd_step(&g, dt).unwrap();
        }
        let peak = (0..g.n_cells)
            .max_by(|&a, &b| g.rho(0, a).partial_cmp(&g.rho(0, b)).unwrap())
            .unwrap();
        let expected = 20.0 + 4.0 * g.time;
        assert!(
            (g.cell_centre(peak) - expected).abs() <= g.dx,
            "peak at {} expected {expected}",
            g.cell_centre(peak)
        );
    }

    #[test]
    fn mass_per_chi_conserved() {
        let mut f = DensityField::zeros(vec![0.8, 1.3], 0.0, 0.5, 64).unwrap();
        for xi in 0..64 {
            let x = f.cell_centre(xi);
            f.set_rho(0, xi, 0.2 * (-((x - 10.0) / 2.0).powi(2)).exp());
            f.set_rho(1, xi, 0.1 * (-((x - 20.0) / 4.0).powi(2)).exp());
        }
        let m0: Vec<f64> = (0..2).map(|ci| f.mass_per_chi(ci)).collect();
        let mut g = f.clone();
        let dt = 0.01;
        for _ in 0..1000 {
            g = ghd_step(&g, dt).unwrap();
        }
        for ci in 0..2 {
            assert!(
                (g.mass_per_chi(ci) - m0[ci]).abs() < 1e-9,
                "chi node {ci}: {} vs {}",
                g.mass_per_chi(ci),
                m0[ci]
            );
        }
    }

    #[test]
    fn cfl_violation_rejected() {
        let f = single_chi_field(1.0, 0.1);
        let too_big = 2.0 * CFL * f.dx / 4.0;
        assert!(matches!(
            ghd_step(&f, too_big),
            Err(Error::CflViolation { .. })
        ));
    }

    #[test]
    fn trajectories_single_soliton_free_motion() {
        let cfg = SolitonConfig::new(vec![1.0], vec![0.0]).unwrap();
        let sgn = RegularizedSign::default();
        let times = [0.0, 0.5, 1.0];
        let traj = microscopic_trajectories(&cfg, &times, 0.1, sgn).unwrap();
        for (k, t) in times.iter().enumerate() {
            assert!((traj[k][0] - 4.0 * t).abs() < 1e-4, "t = {t}");
        }
    }

    #[test]
    fn fastest_soliton_trajectory_monotone_once_separated() {
        let cfg = SolitonConfig::new(vec![1.0, 2.0], vec![0.0, 0.0]).unwrap();
        let sgn = RegularizedSign::default();
        // After the collision the fast soliton's drift dominates.
        let times = [1.0, 2.0, 4.0, 8.0];
        let traj = microscopic_trajectories(&cfg, &times, 0.3, sgn).unwrap();
        for w in traj.windows(2) {
            assert!(w[1][1] > w[0][1]);
        }
    }

    #[test]
    fn empirical_histogram_normalisation() {
        let chi = [1.0, 1.5, 1.9];
        let pos = [-5.0, 0.0, 5.0];
        let e = empirical_density(
            &pos,
            &chi,
            Bins { lo: 0.5, hi: 2.0, count: 3 },
            Bins { lo: -10.0, hi: 10.0, count: 8 },
            0.0,
        )
        .unwrap();
        assert_eq!(e.overflow, 0);
        // Binned mass sums to one.
        let area = e.field.dx * 0.5;
        let mass: f64 = (0..3)
            .flat_map(|ci| (0..8).map(move |xi| (ci, xi)))
            .map(|(ci, xi)| e.field.rho(ci, xi) * area)
            .sum();
        assert!((mass - 1.0).abs() < 1e-12);
        // Single point: one occupied bin of mass 1/N = 1.
        let single = empirical_density(
            &[0.0],
            &[1.0],
            Bins { lo: 0.5, hi: 2.0, count: 2 },
            Bins { lo: -1.0, hi: 1.0, count: 2 },
            0.0,
        )
        .unwrap();
        let occupied: Vec<f64> = (0..2)
            .flat_map(|ci| (0..2).map(move |xi| (ci, xi)))
            .map(|(ci, xi)| single.field.rho(ci, xi))
            .filter(|v| *v > 0.0)
            .collect();
        assert_eq!(occupied.len(), 1);
        // Out-of-range points land in the overflow count.
        let ovf = empirical_density(
            &[100.0],
            &[1.0],
            Bins { lo: 0.5, hi: 2.0, count: 2 },
            Bins { lo: -1.0, hi: 1.0, count: 2 },
            0.0,
        )
        .unwrap();
        assert_eq!(ovf.overflow, 1);
    }
}
