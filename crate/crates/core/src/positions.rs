//! Magnifying-glass positions of solitons relative to an observation point.
//!
//! For an observation point `x*`, the positions `Xᵢ` solve the piecewise-
//! linear system
//!
//! ```text
//!   yᵢ = Xᵢ − ½ Σ_{j≠i} sgn_ε(Xⱼ − x*) φᵢⱼ ,
//! ```
//!
//! written in displacements `dᵢ = Xᵢ − x*` as `C_χ(d) = y − x*·1`. The
//! contraction map `C_χ` is evaluated in closed form; the expansion map
//! `E_χ` (a chosen right-inverse) is realised by continuation: start at an
//! observation point left of the core, where the unique solution is the
//! left-extremal vector `X⁻`, and sweep `x*` rightwards tracking the branch.
//! The inner solver is an active-set iteration: each sign pattern
//! (below/band/above per soliton) makes `sgn_ε` affine, so the system is
//! linear; solve, verify the pattern, update. A damped fixed point serves as
//! a fallback. Multiple solutions are not an error — any residual-zero
//! solution is accepted, the continuation branch being the canonical choice.

use crate::linalg::Matrix;
use crate::model::{RegularizedSign, ScatteringTable, SolitonConfig};
use crate::{Error, Result};
use serde::Serialize;

/// Success threshold for the sup-norm defect of the position equations.
pub const RESIDUAL_TOL: f64 = 1e-10;

const MAX_PATTERN_ITERS: usize = 64;
const MAX_FP_ITERS: usize = 10_000;

/// Sign-pattern region of one displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// `d < −ε`
    Below,
    /// `|d| ≤ ε` (affine segment of `sgn_ε`)
    Band,
    /// `d > ε`
    Above,
}

#[inline]
fn region_of(d: f64, eps: f64) -> Region {
    if d < -eps {
        Region::Below
    } else if d > eps {
        Region::Above
    } else {
        Region::Band
    }
}

/// A solved set of magnifying-glass positions.
#[derive(Debug, Clone, Serialize)]
pub struct PositionSolution {
    pub x_star: f64,
    /// `Xᵢ`
    pub positions: Vec<f64>,
    /// `dᵢ = Xᵢ − x*`
    pub displacements: Vec<f64>,
    pub sign_pattern: Vec<Region>,
    /// Sup-norm defect of the position equations at the solution.
    pub residual: f64,
    /// Cumulative inner-solver iterations spent producing this solution.
    pub iterations: usize,
}

/// Extremal positions and the core interval `[min Xᵢ⁻, max Xᵢ⁺]`.
#[derive(Debug, Clone, Serialize)]
pub struct CoreInterval {
    pub x_minus: f64,
    pub x_plus: f64,
    /// `Xᵢ⁻ = yᵢ + ½ Σ_{j≠i} φᵢⱼ`
    pub extremal_minus: Vec<f64>,
    /// `Xᵢ⁺ = yᵢ − ½ Σ_{j≠i} φᵢⱼ`
    pub extremal_plus: Vec<f64>,
}

impl CoreInterval {
    pub fn width(&self) -> f64 {
        self.x_plus - self.x_minus
    }
}

/// Contraction map on positions: `yᵢ = Xᵢ − ½ Σ_{j≠i} sgn_ε(Xⱼ−x*) φᵢⱼ`.
pub fn contract(
    chi: &[f64],
    x_star: f64,
    positions: &[f64],
    sgn: RegularizedSign,
) -> Result<Vec<f64>> {
    if chi.len() != positions.len() {
        return Err(Error::LengthMismatch { expected: chi.len(), got: positions.len() });
    }
    let table = ScatteringTable::new(chi)?;
    let d: Vec<f64> = positions.iter().map(|x| x - x_star).collect();
    let mut out = vec![0.0; chi.len()];
    contract_d(&table, sgn, &d, &mut out);
    for v in out.iter_mut() {
        *v += x_star;
    }
    Ok(out)
}

/// Contraction map on displacements: `C_χ(d)ᵢ = dᵢ − ½ Σ_{j≠i} sgn_ε(dⱼ) φᵢⱼ`.
pub fn contract_displacements(
    chi: &[f64],
    d: &[f64],
    sgn: RegularizedSign,
) -> Result<Vec<f64>> {
    if chi.len() != d.len() {
        return Err(Error::LengthMismatch { expected: chi.len(), got: d.len() });
    }
    let table = ScatteringTable::new(chi)?;
    let mut out = vec![0.0; chi.len()];
    contract_d(&table, sgn, d, &mut out);
    Ok(out)
}

fn contract_d(table: &ScatteringTable, sgn: RegularizedSign, d: &[f64], out: &mut [f64]) {
    let n = d.len();
    let signs: Vec<f64> = d.iter().map(|&v| sgn.eval(v)).collect();
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            if j != i {
                s += signs[j] * table.phi(i, j);
            }
        }
        out[i] = d[i] - 0.5 * s;
    }
}

/// Closed-form extremal positions and the core interval.
pub fn extremal_and_core(cfg: &SolitonConfig) -> Result<CoreInterval> {
    if cfg.is_empty() {
        return Err(Error::EmptyConfig);
    }
    let table = ScatteringTable::new(cfg.chi())?;
    let n = cfg.n();
    let mut minus = Vec::with_capacity(n);
    let mut plus = Vec::with_capacity(n);
    for i in 0..n {
        let half = 0.5 * table.row_sum(i);
        minus.push(cfg.y()[i] + half);
        plus.push(cfg.y()[i] - half);
    }
    let x_minus = minus.iter().cloned().fold(f64::INFINITY, f64::min);
    let x_plus = plus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(CoreInterval { x_minus, x_plus, extremal_minus: minus, extremal_plus: plus })
}

/// Closed-form displacements when the separation condition holds for the set
/// marked by `below` (those solitons end up at `d ≤ −ε`, the rest at
/// `d ≥ +ε`). Returns `None` when the condition fails.
pub fn separated_displacements(
    chi: &[f64],
    z: &[f64],
    below: &[bool],
    sgn: RegularizedSign,
) -> Result<Option<Vec<f64>>> {
    if chi.len() != z.len() || chi.len() != below.len() {
        return Err(Error::LengthMismatch { expected: chi.len(), got: z.len() });
    }
    let table = ScatteringTable::new(chi)?;
    let eps = sgn.epsilon();
    let n = chi.len();
    for i in 0..n {
        let half = 0.5 * table.row_sum(i);
        let ok = if below[i] { z[i] <= half - eps } else { z[i] >= -half + eps };
        if !ok {
            return Ok(None);
        }
    }
    let mut d = Vec::with_capacity(n);
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            if j != i {
                let sg = if below[j] { 1.0 } else { -1.0 };
                s += sg * table.phi(i, j);
            }
        }
        d.push(z[i] - 0.5 * s);
    }
    Ok(Some(d))
}

struct SolveOutcome {
    iterations: usize,
    /// Number of active-set pattern updates performed (0 = first guess held).
    pattern_changes: usize,
    residual: f64,
}

/// Inner solver for `C_χ(d) = z` at fixed `x*`.
struct ActiveSet<'a> {
    table: &'a ScatteringTable,
    sgn: RegularizedSign,
}

impl ActiveSet<'_> {
    fn residual(&self, z: &[f64], d: &[f64], scratch: &mut Vec<f64>) -> f64 {
        scratch.resize(d.len(), 0.0);
        contract_d(self.table, self.sgn, d, scratch);
        scratch
            .iter()
            .zip(z)
            .map(|(c, zi)| (c - zi).abs())
            .fold(0.0, f64::max)
    }

    /// Linear solve for a fixed sign pattern. `sgn_ε` is constant off-band and
    /// affine (`d/ε`) in-band, so the system is exactly linear.
    fn solve_pattern(&self, z: &[f64], pattern: &[Region]) -> Result<Vec<f64>> {
        let n = z.len();
        let eps = self.sgn.epsilon();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                match pattern[j] {
                    Region::Below => s -= self.table.phi(i, j),
                    Region::Above => s += self.table.phi(i, j),
                    Region::Band => {}
                }
            }
            rhs[i] = z[i] + 0.5 * s;
        }
        if pattern.iter().all(|r| *r != Region::Band) {
            return Ok(rhs);
        }
        let mut a = Matrix::zeros(n);
        for i in 0..n {
            a.set(i, i, 1.0);
            for j in 0..n {
                if j != i && pattern[j] == Region::Band {
                    a.set(i, j, -0.5 * self.table.phi(i, j) / eps);
                }
            }
        }
        a.solve(&rhs)
    }

    fn solve(&self, z: &[f64], d: &mut Vec<f64>) -> Result<SolveOutcome> {
        let eps = self.sgn.epsilon();
        let mut scratch = Vec::new();
        let mut pattern: Vec<Region> = d.iter().map(|&v| region_of(v, eps)).collect();
        let mut visited: Vec<Vec<Region>> = Vec::new();
        let mut iterations = 0;
        for changes in 0..MAX_PATTERN_ITERS {
            iterations += 1;
            let cand = match self.solve_pattern(z, &pattern) {
                Ok(c) => c,
                Err(_) => break, // singular band system; fall back
            };
            let newpat: Vec<Region> = cand.iter().map(|&v| region_of(v, eps)).collect();
            if newpat == pattern {
                *d = cand;
                let res = self.residual(z, d, &mut scratch);
                if res <= RESIDUAL_TOL {
                    return Ok(SolveOutcome { iterations, pattern_changes: changes, residual: res });
                }
                break;
            }
            if visited.iter().any(|p| p == &newpat) {
                break; // cycling between patterns
            }
            visited.push(std::mem::replace(&mut pattern, newpat));
            *d = cand;
        }
        self.fixed_point(z, d, iterations)
    }

    /// Damped fixed point `d ← (1−ϑ)d + ϑ(z + ½Σ sgn_ε(d)φ)`, ϑ halved on
    /// residual increase, followed by one active-set polish.
    fn fixed_point(&self, z: &[f64], d: &mut Vec<f64>, base_iters: usize) -> Result<SolveOutcome> {
        let n = z.len();
        let eps = self.sgn.epsilon();
        let mut scratch = Vec::new();
        let mut theta: f64 = 0.5;
        let mut res = self.residual(z, d, &mut scratch);
        let mut best = d.clone();
        let mut best_res = res;
        let mut iterations = base_iters;
        for _ in 0..MAX_FP_ITERS {
            if res <= RESIDUAL_TOL * 1e-2 {
                break;
            }
            iterations += 1;
            let signs: Vec<f64> = d.iter().map(|&v| self.sgn.eval(v)).collect();
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    if j != i {
                        s += signs[j] * self.table.phi(i, j);
                    }
                }
                let target = z[i] + 0.5 * s;
                d[i] = (1.0 - theta) * d[i] + theta * target;
            }
            let new_res = self.residual(z, d, &mut scratch);
            if new_res > res {
                theta = (theta * 0.5).max(1e-3);
            }
            res = new_res;
            if res < best_res {
                best_res = res;
                best.copy_from_slice(d);
            }
        }
        if best_res < res {
            d.copy_from_slice(&best);
            res = best_res;
        }
        // Polish: the fixed point usually lands in the right pattern basin.
        let pattern: Vec<Region> = d.iter().map(|&v| region_of(v, eps)).collect();
        if let Ok(cand) = self.solve_pattern(z, &pattern) {
            let newpat: Vec<Region> = cand.iter().map(|&v| region_of(v, eps)).collect();
            if newpat == pattern {
                let cand_res = self.residual(z, &cand, &mut scratch);
                if cand_res < res {
                    *d = cand;
                    res = cand_res;
                }
            }
        }
        if res <= RESIDUAL_TOL {
            Ok(SolveOutcome { iterations, pattern_changes: 0, residual: res })
        } else {
            Err(Error::SolverFailure { x_star: f64::NAN, residual: res, iterations })
        }
    }
}

/// Continuation driver: sweeps the observation point left to right along the
/// canonical solution branch, warm-starting each step.
pub struct ContinuationScanner {
    y: Vec<f64>,
    table: ScatteringTable,
    sgn: RegularizedSign,
    base_step: f64,
    x_star: f64,
    d: Vec<f64>,
    residual: f64,
    iterations: usize,
    rearrangements: usize,
}

impl ContinuationScanner {
    /// Starts at `x₋ − ε` (left-extremal regime) where the solution is exact.
    pub fn new(cfg: &SolitonConfig, sgn: RegularizedSign) -> Result<Self> {
        Self::starting_at(cfg, sgn, f64::INFINITY)
    }

    /// Starts at `min(x_start, x₋ − ε)`; any point left of the core works
    /// since the solution there is the constant left-extremal vector.
    pub fn starting_at(cfg: &SolitonConfig, sgn: RegularizedSign, x_start: f64) -> Result<Self> {
        if cfg.is_empty() {
            return Err(Error::EmptyConfig);
        }
        let core = extremal_and_core(cfg)?;
        let table = ScatteringTable::new(cfg.chi())?;
        let chi_max = *cfg.chi().last().expect("nonempty");
        let base_step = (sgn.epsilon() / 2.0).min(0.1 / chi_max);
        let x0 = (core.x_minus - sgn.epsilon()).min(x_start);
        let d = core.extremal_minus.iter().map(|x| x - x0).collect();
        Ok(ContinuationScanner {
            y: cfg.y().to_vec(),
            table,
            sgn,
            base_step,
            x_star: x0,
            d,
            residual: 0.0,
            iterations: 0,
            rearrangements: 0,
        })
    }

    /// Rebuilds a scanner from a known on-branch state `(x*, d)`, e.g. saved
    /// during a previous sweep, so refinement can probe nearby points.
    pub fn resume(
        cfg: &SolitonConfig,
        sgn: RegularizedSign,
        x_star: f64,
        d: Vec<f64>,
    ) -> Result<Self> {
        if d.len() != cfg.n() {
            return Err(Error::LengthMismatch { expected: cfg.n(), got: d.len() });
        }
        let mut scanner = Self::starting_at(cfg, sgn, x_star)?;
        scanner.x_star = x_star;
        scanner.d = d;
        Ok(scanner)
    }

    pub fn x_star(&self) -> f64 {
        self.x_star
    }

    pub fn displacements(&self) -> &[f64] {
        &self.d
    }

    pub fn positions(&self) -> Vec<f64> {
        self.d.iter().map(|d| d + self.x_star).collect()
    }

    pub fn base_step(&self) -> f64 {
        self.base_step
    }

    pub fn rearrangements(&self) -> usize {
        self.rearrangements
    }

    /// Solve at an arbitrary point warm-started from the current state,
    /// without moving the scanner. Intended for refinement inside one step.
    pub fn probe(&self, x: f64) -> Result<Vec<f64>> {
        let solver = ActiveSet { table: &self.table, sgn: self.sgn };
        let z: Vec<f64> = self.y.iter().map(|yi| yi - x).collect();
        let shift = x - self.x_star;
        let mut d: Vec<f64> = self.d.iter().map(|di| di - shift).collect();
        solver.solve(&z, &mut d).map_err(|e| match e {
            Error::SolverFailure { residual, iterations, .. } => {
                Error::SolverFailure { x_star: x, residual, iterations }
            }
            other => other,
        })?;
        Ok(d)
    }

    /// Advance the sweep to `target` (must not move backwards).
    pub fn advance_to(&mut self, target: f64) -> Result<()> {
        if target < self.x_star {
            return Err(Error::InvalidParameter(format!(
                "continuation cannot move backwards ({} -> {target})",
                self.x_star
            )));
        }
        let eps = self.sgn.epsilon();
        while self.x_star < target {
            let mut step = self.base_step;
            // Off-band the branch is exactly linear in x* (slope −1 per
            // component), so jump to the next band-entry event directly.
            let in_band = self.d.iter().any(|&v| region_of(v, eps) == Region::Band);
            if !in_band {
                let mut dist = f64::INFINITY;
                for &di in &self.d {
                    if di > eps {
                        dist = dist.min(di - eps);
                    }
                }
                if dist > self.base_step {
                    step = dist;
                }
            }
            step = step.min(target - self.x_star);
            self.step_once(step)?;
        }
        Ok(())
    }

    fn step_once(&mut self, step: f64) -> Result<()> {
        let solver = ActiveSet { table: &self.table, sgn: self.sgn };
        let min_step = self.base_step / 64.0;
        let mut h = step;
        loop {
            let xn = self.x_star + h;
            let z: Vec<f64> = self.y.iter().map(|yi| yi - xn).collect();
            // Warm start keeping positions fixed: d shifts by −h.
            let mut d: Vec<f64> = self.d.iter().map(|di| di - h).collect();
            match solver.solve(&z, &mut d) {
                Ok(out) => {
                    if out.pattern_changes > 1 && h > min_step {
                        // Rearrangement: several solitons changed region in
                        // one step; resolve by halving.
                        self.rearrangements += 1;
                        h *= 0.5;
                        continue;
                    }
                    self.x_star = xn;
                    self.d = d;
                    self.residual = out.residual;
                    self.iterations += out.iterations;
                    return Ok(());
                }
                Err(Error::SolverFailure { residual, iterations, .. }) => {
                    if h > min_step {
                        h *= 0.5;
                        continue;
                    }
                    self.iterations += iterations;
                    return Err(Error::SolverFailure { x_star: xn, residual, iterations });
                }
                Err(e) => return Err(e),
            }
        }
    }

    pub fn solution(&self) -> PositionSolution {
        let eps = self.sgn.epsilon();
        PositionSolution {
            x_star: self.x_star,
            positions: self.positions(),
            displacements: self.d.clone(),
            sign_pattern: self.d.iter().map(|&v| region_of(v, eps)).collect(),
            residual: self.residual,
            iterations: self.iterations,
        }
    }
}

/// Expansion map `E_χ`: solve the position equations at `x*`.
///
/// Exterior observation points use the closed-form extremal solutions (the
/// unique-solution regime); interior points run the continuation sweep from
/// the left, which is the canonical branch.
pub fn expand(cfg: &SolitonConfig, x_star: f64, sgn: RegularizedSign) -> Result<PositionSolution> {
    if cfg.is_empty() {
        return Ok(PositionSolution {
            x_star,
            positions: Vec::new(),
            displacements: Vec::new(),
            sign_pattern: Vec::new(),
            residual: 0.0,
            iterations: 0,
        });
    }
    let eps = sgn.epsilon();
    let core = extremal_and_core(cfg)?;
    let closed = if x_star <= core.x_minus - eps {
        Some(core.extremal_minus.clone())
    } else if x_star >= core.x_plus + eps {
        Some(core.extremal_plus.clone())
    } else {
        None
    };
    if let Some(positions) = closed {
        let d: Vec<f64> = positions.iter().map(|x| x - x_star).collect();
        let table = ScatteringTable::new(cfg.chi())?;
        let mut c = vec![0.0; cfg.n()];
        contract_d(&table, sgn, &d, &mut c);
        let residual = c
            .iter()
            .zip(cfg.y())
            .map(|(ci, yi)| (ci + x_star - yi).abs())
            .fold(0.0, f64::max);
        return Ok(PositionSolution {
            x_star,
            sign_pattern: d.iter().map(|&v| region_of(v, eps)).collect(),
            positions,
            displacements: d,
            residual,
            iterations: 0,
        });
    }
    let mut scanner = ContinuationScanner::new(cfg, sgn)?;
    scanner.advance_to(x_star)?;
    Ok(scanner.solution())
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN3: f64 = 1.0986122886681098;

    fn cfg12() -> SolitonConfig {
        SolitonConfig::new(vec![1.0, 2.0], vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn contract_closed_form_values() {
        let sgn = RegularizedSign::default();
        let y = contract(&[1.0, 2.0], 0.0, &[-5.0, 5.0], sgn).unwrap();
        assert!((y[0] - (-5.0 + LN3 / 2.0)).abs() < 1e-12, "y0 = {}", y[0]);
        assert!((y[1] - (5.0 - LN3 / 4.0)).abs() < 1e-12, "y1 = {}", y[1]);
        // n = 1: empty interaction sum.
        let y1 = contract(&[1.3], 2.0, &[0.4], sgn).unwrap();
        assert!((y1[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn extremal_and_core_two_soliton() {
        let core = extremal_and_core(&cfg12()).unwrap();
        assert!((core.extremal_minus[0] + LN3 / 2.0).abs() < 1e-14);
        assert!((core.extremal_minus[1] + LN3 / 4.0).abs() < 1e-14);
        assert!((core.x_minus + LN3 / 2.0).abs() < 1e-14);
        assert!((core.x_plus - LN3 / 2.0).abs() < 1e-14);
        // n = 1 degenerate core.
        let single = SolitonConfig::new(vec![1.0], vec![0.3]).unwrap();
        let c1 = extremal_and_core(&single).unwrap();
        assert_eq!(c1.x_minus, 0.3);
        assert_eq!(c1.x_plus, 0.3);
    }

    #[test]
    fn core_widens_as_spectra_approach() {
        // Pushing chi values together grows |φ| and widens the core.
        let w1 = extremal_and_core(
            &SolitonConfig::new(vec![1.0, 2.0], vec![0.0, 0.0]).unwrap(),
        )
        .unwrap()
        .width();
        let w2 = extremal_and_core(
            &SolitonConfig::new(vec![1.0, 1.2], vec![0.0, 0.0]).unwrap(),
        )
        .unwrap()
        .width();
        assert!(w2 > w1);
    }

    #[test]
    fn expand_far_left_and_right_hits_extremals() {
        let cfg = cfg12();
        let sgn = RegularizedSign::default();
        let sol = expand(&cfg, -50.0, sgn).unwrap();
        assert!((sol.positions[0] + LN3 / 2.0).abs() < 1e-12);
        assert!((sol.positions[1] + LN3 / 4.0).abs() < 1e-12);
        let sol = expand(&cfg, 50.0, sgn).unwrap();
        assert!((sol.positions[0] - LN3 / 2.0).abs() < 1e-12);
        assert!((sol.positions[1] - LN3 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn expand_single_soliton_everywhere() {
        let cfg = SolitonConfig::new(vec![1.5], vec![0.7]).unwrap();
        let sgn = RegularizedSign::default();
        for x_star in [-10.0, 0.0, 0.7, 0.7004, 3.0] {
            let sol = expand(&cfg, x_star, sgn).unwrap();
            assert!((sol.positions[0] - 0.7).abs() < 1e-10, "at {x_star}");
            assert!(sol.residual <= RESIDUAL_TOL);
        }
    }

    #[test]
    fn expand_interior_round_trip() {
        let cfg = SolitonConfig::new(vec![0.9, 1.4, 2.1], vec![-1.0, 0.2, 1.1]).unwrap();
        let sgn = RegularizedSign::default();
        let core = extremal_and_core(&cfg).unwrap();
        for frac in [0.1, 0.35, 0.5, 0.62, 0.9] {
            let x_star = core.x_minus + frac * core.width();
            let sol = expand(&cfg, x_star, sgn).unwrap();
            assert!(sol.residual <= RESIDUAL_TOL, "residual {}", sol.residual);
            let back = contract(cfg.chi(), x_star, &sol.positions, sgn).unwrap();
            for (b, yi) in back.iter().zip(cfg.y()) {
                assert!((b - yi).abs() <= RESIDUAL_TOL);
            }
        }
    }

    #[test]
    fn separated_shortcut_matches_solver() {
        // Well-separated pair: soliton 0 far left of x*, soliton 1 far right.
        let cfg = SolitonConfig::new(vec![1.0, 2.0], vec![-8.0, 8.0]).unwrap();
        let sgn = RegularizedSign::default();
        let x_star = 0.0;
        let z: Vec<f64> = cfg.y().iter().map(|y| y - x_star).collect();
        let d = separated_displacements(cfg.chi(), &z, &[true, false], sgn)
            .unwrap()
            .expect("condition holds");
        let sol = expand(&cfg, x_star, sgn).unwrap();
        for (a, b) in d.iter().zip(&sol.displacements) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn empty_config_expands_trivially() {
        let sol = expand(&SolitonConfig::empty(), 1.0, RegularizedSign::default()).unwrap();
        assert!(sol.positions.is_empty());
        assert!(extremal_and_core(&SolitonConfig::empty()).is_err());
    }
}
