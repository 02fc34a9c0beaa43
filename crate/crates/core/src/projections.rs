//! Removing solitons from a field: limit shifts, extraction, local and
//! fluid-cell projections.
//!
//! Sending soliton `j` to `+∞` (resp. `−∞`) leaves an (N−1)-soliton field
//! whose impact parameters acquire the half-shift `+½φᵢⱼ` (resp. `−½φᵢⱼ`).
//! Extraction instead works through the position maps: expand at `x*`, keep
//! a subset of the magnifying-glass positions, contract back. For subsets
//! separated by `x*` the two routes agree exactly.

use crate::effective::{scan_effective, EffectiveSolution};
use crate::model::{RegularizedSign, ScatteringTable, SolitonConfig};
use crate::positions::{contract, expand, extremal_and_core};
use crate::{Error, Result};
use serde::Serialize;

/// How a projection was produced.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMethod {
    LimitShift,
    Extraction { x_star: f64 },
    FluidCell { i_minus: f64, i_plus: f64, delta_x_scale: f64 },
}

/// A projected configuration together with the removal bookkeeping.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectionResult {
    /// Indices kept, in increasing order (indices refer to the input config).
    pub kept: Vec<usize>,
    /// Indices sent to +∞.
    pub removed_right: Vec<usize>,
    /// Indices sent to −∞.
    pub removed_left: Vec<usize>,
    pub config_out: SolitonConfig,
    pub method: ProjectionMethod,
}

fn check_disjoint_sorted(n: usize, s_plus: &[usize], s_minus: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in s_plus.iter().chain(s_minus) {
        if i >= n {
            return Err(Error::InvalidParameter(format!("index {i} out of range")));
        }
        if seen[i] {
            return Err(Error::OverlappingSubsets(i));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Closed-form removal: solitons in `s_plus` go to +∞, `s_minus` to −∞;
/// the rest keep their spectra and get `yᵢ + ½Σ_{j∈s₊}φᵢⱼ − ½Σ_{j∈s₋}φᵢⱼ`.
pub fn project_out(
    cfg: &SolitonConfig,
    s_plus: &[usize],
    s_minus: &[usize],
) -> Result<ProjectionResult> {
    let n = cfg.n();
    check_disjoint_sorted(n, s_plus, s_minus)?;
    let table = ScatteringTable::new(cfg.chi())?;
    let removed: Vec<bool> = {
        let mut r = vec![false; n];
        for &i in s_plus.iter().chain(s_minus) {
            r[i] = true;
        }
        r
    };
    let kept: Vec<usize> = (0..n).filter(|&i| !removed[i]).collect();
    let mut y_out = Vec::with_capacity(kept.len());
    for &i in &kept {
        let mut shift = 0.0;
        for &j in s_plus {
            shift += table.phi(i, j);
        }
        for &j in s_minus {
            shift -= table.phi(i, j);
        }
        y_out.push(cfg.y()[i] + 0.5 * shift);
    }
    let config_out = cfg.restrict(&kept)?.with_impacts(y_out)?;
    Ok(ProjectionResult {
        kept,
        removed_right: {
            let mut v = s_plus.to_vec();
            v.sort_unstable();
            v
        },
        removed_left: {
            let mut v = s_minus.to_vec();
            v.sort_unstable();
            v
        },
        config_out,
        method: ProjectionMethod::LimitShift,
    })
}

/// Extraction of subset `s` with respect to `x*`:
/// `y' = C_{χ_s, x*}( E_{χ, x*}(y)_s )`.
pub fn extract(
    cfg: &SolitonConfig,
    s: &[usize],
    x_star: f64,
    sgn: RegularizedSign,
) -> Result<ProjectionResult> {
    let n = cfg.n();
    let mut kept = s.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.iter().any(|&i| i >= n) {
        return Err(Error::InvalidParameter("subset index out of range".into()));
    }
    let sol = expand(cfg, x_star, sgn)?;
    let sub = cfg.restrict(&kept)?;
    let x_sub: Vec<f64> = kept.iter().map(|&i| sol.positions[i]).collect();
    let y_out = contract(sub.chi(), x_star, &x_sub, sgn)?;
    let (removed_right, removed_left) = {
        let mut right = Vec::new();
        let mut left = Vec::new();
        for i in 0..n {
            if !kept.contains(&i) {
                if sol.displacements[i] >= 0.0 {
                    right.push(i);
                } else {
                    left.push(i);
                }
            }
        }
        (right, left)
    };
    Ok(ProjectionResult {
        kept,
        removed_right,
        removed_left,
        config_out: sub.with_impacts(y_out)?,
        method: ProjectionMethod::Extraction { x_star },
    })
}

/// Full local projection with respect to the cell `[x*−L/2, x*+L/2]`:
/// keeps exactly the solitons with `|dᵢ| ≤ L/2`.
pub fn local_projection(
    cfg: &SolitonConfig,
    x_star: f64,
    cell_length: f64,
    sgn: RegularizedSign,
) -> Result<ProjectionResult> {
    if cell_length < 2.0 * sgn.epsilon() {
        return Err(Error::InvalidParameter(format!(
            "cell length {cell_length} below 2*epsilon"
        )));
    }
    let sol = expand(cfg, x_star, sgn)?;
    let half = cell_length / 2.0;
    let kept: Vec<usize> = (0..cfg.n())
        .filter(|&i| sol.displacements[i].abs() <= half)
        .collect();
    extract(cfg, &kept, x_star, sgn)
}

/// Fluid-cell projection checks performed when the cell is wide enough
/// (`I₋ + Δx < I₊ − Δx`).
#[derive(Debug, Clone, Serialize)]
pub struct FluidCellChecks {
    /// Sup-norm difference between the closed-form impact parameters and the
    /// extraction route at the cell centre.
    pub extract_agreement: f64,
    /// Whether core(projected) ⊆ [I₋−Δx, I₊+Δx].
    pub core_bound_ok: bool,
    pub core_out: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FluidCellProjection {
    pub result: ProjectionResult,
    pub effective: EffectiveSolution,
    /// Present when the interior of the cell is nonempty after shrinking by Δx.
    pub checks: Option<FluidCellChecks>,
}

/// Fluid-cell projection onto `[i_minus, i_plus]` at local scale `ΔX`:
/// removes every soliton whose effective position lies outside the cell
/// (boundary ties are kept inside, consistent with `sgn(0) = +1`).
pub fn fluid_cell_projection(
    cfg: &SolitonConfig,
    i_minus: f64,
    i_plus: f64,
    delta_x_scale: f64,
    sgn: RegularizedSign,
) -> Result<FluidCellProjection> {
    if !(i_plus >= i_minus) {
        return Err(Error::InvalidParameter(format!(
            "empty fluid cell [{i_minus}, {i_plus}]"
        )));
    }
    let eff = scan_effective(cfg, delta_x_scale, sgn)?;
    let mut s_plus = Vec::new();
    let mut s_minus = Vec::new();
    for (i, &x) in eff.x_eff.iter().enumerate() {
        if x > i_plus {
            s_plus.push(i);
        } else if x < i_minus {
            s_minus.push(i);
        }
    }
    let mut result = project_out(cfg, &s_plus, &s_minus)?;
    result.method = ProjectionMethod::FluidCell { i_minus, i_plus, delta_x_scale };

    let checks = if i_minus + eff.delta_x < i_plus - eff.delta_x {
        let centre = 0.5 * (i_minus + i_plus);
        let via_extract = extract(cfg, &result.kept, centre, sgn)?;
        let agreement = result
            .config_out
            .y()
            .iter()
            .zip(via_extract.config_out.y())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let (core_bound_ok, core_out) = if result.config_out.is_empty() {
            (true, None)
        } else {
            let core = extremal_and_core(&result.config_out)?;
            let tol = 1e-9;
            (
                core.x_minus >= i_minus - eff.delta_x - tol
                    && core.x_plus <= i_plus + eff.delta_x + tol,
                Some((core.x_minus, core.x_plus)),
            )
        };
        Some(FluidCellChecks { extract_agreement: agreement, core_bound_ok, core_out })
    } else {
        None
    };
    Ok(FluidCellProjection { result, effective: eff, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tau::FieldEvaluator;

    const LN3: f64 = 1.0986122886681098;

    #[test]
    fn identity_projection() {
        let cfg = SolitonConfig::new(vec![1.0, 2.0], vec![0.3, -0.2]).unwrap();
        let p = project_out(&cfg, &[], &[]).unwrap();
        assert_eq!(p.config_out, cfg);
        assert_eq!(p.kept, vec![0, 1]);
    }

    #[test]
    fn remove_rightwards_shifts_half_phase() {
        let cfg = SolitonConfig::new(vec![1.0, 2.0], vec![0.0, 0.0]).unwrap();
        let p = project_out(&cfg, &[1], &[]).unwrap();
        assert_eq!(p.config_out.n(), 1);
        assert!((p.config_out.y()[0] + LN3 / 2.0).abs() < 1e-14);
        assert_eq!(p.config_out.chi(), &[1.0]);
    }

    #[test]
    fn overlap_rejected() {
        let cfg = SolitonConfig::new(vec![1.0, 2.0], vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            project_out(&cfg, &[1], &[1]),
            Err(Error::OverlappingSubsets(1))
        ));
    }

    #[test]
    fn order_of_limits_is_immaterial() {
        let cfg =
            SolitonConfig::new(vec![0.8, 1.3, 2.0], vec![-1.0, 0.5, 2.0]).unwrap();
        let both = project_out(&cfg, &[2], &[0]).unwrap();
        // Right first, then left (indices shift after the first removal).
        let right_first = project_out(&cfg, &[2], &[]).unwrap();
        let then_left = project_out(&right_first.config_out, &[], &[0]).unwrap();
        // Left first, then right.
        let left_first = project_out(&cfg, &[], &[0]).unwrap();
        let then_right = project_out(&left_first.config_out, &[1], &[]).unwrap();
        // The closed form is order-free; sequential composition only differs
        // by summation rounding.
        for seq in [&then_left, &then_right] {
            assert_eq!(both.config_out.chi(), seq.config_out.chi());
            for (a, b) in both.config_out.y().iter().zip(seq.config_out.y()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn limit_shift_matches_large_displacement_field() {
        // Push soliton 2 far right physically and compare fields.
        let cfg = SolitonConfig::new(vec![1.0, 2.0], vec![0.0, 0.0]).unwrap();
        let z = 60.0;
        let shifted = cfg.with_impacts(vec![0.0, z]).unwrap();
        let projected = project_out(&cfg, &[1], &[]).unwrap().config_out;
        let full = FieldEvaluator::new(&shifted, 0).unwrap();
        let proj = FieldEvaluator::new(&projected, 0).unwrap();
        for k in 0..=100 {
            let x = -5.0 + 10.0 * k as f64 / 100.0;
            let a = full.eval(x).unwrap().u();
            let b = proj.eval(x).unwrap().u();
            assert!((a - b).abs() < 1e-8, "x = {x}: {a} vs {b}");
        }
    }

    #[test]
    fn extract_full_set_is_identity() {
        let cfg = SolitonConfig::new(vec![0.9, 1.5], vec![-0.4, 0.8]).unwrap();
        let sgn = RegularizedSign::default();
        for x_star in [-3.0, 0.1, 2.5] {
            let p = extract(&cfg, &[0, 1], x_star, sgn).unwrap();
            for (a, b) in p.config_out.y().iter().zip(cfg.y()) {
                assert!((a - b).abs() < 1e-10, "x* = {x_star}");
            }
        }
    }

    #[test]
    fn separated_extraction_matches_limit_shift() {
        // Soliton 0 far left, soliton 1 far right of x* = 0: the pair
        // (s₊, s₋) = ({1}, {0}) is separated by 0, so extraction of the
        // middle (empty or singleton) set agrees with the closed form.
        let cfg =
            SolitonConfig::new(vec![0.8, 1.4, 2.0], vec![-9.0, 0.2, 9.0]).unwrap();
        let sgn = RegularizedSign::default();
        let closed = project_out(&cfg, &[2], &[0]).unwrap();
        for x_star in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let ex = extract(&cfg, &[1], x_star, sgn).unwrap();
            let diff = (ex.config_out.y()[0] - closed.config_out.y()[0]).abs();
            assert!(diff < 1e-10, "x* = {x_star}: diff = {diff}");
        }
    }

    #[test]
    fn local_projection_keeps_near_solitons() {
        let cfg =
            SolitonConfig::new(vec![0.8, 1.4, 2.0], vec![-9.0, 0.2, 9.0]).unwrap();
        let sgn = RegularizedSign::default();
        let p = local_projection(&cfg, 0.0, 4.0, sgn).unwrap();
        assert_eq!(p.kept, vec![1]);
        // Large enough cell keeps everything: identity config.
        let p_all = local_projection(&cfg, 0.0, 100.0, sgn).unwrap();
        assert_eq!(p_all.kept, vec![0, 1, 2]);
        for (a, b) in p_all.config_out.y().iter().zip(cfg.y()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn fluid_cell_projection_two_soliton() {
        let cfg = SolitonConfig::new(vec![1.0, 2.0], vec![-4.0, 4.0]).unwrap();
        let sgn = RegularizedSign::default();
        let fc = fluid_cell_projection(&cfg, -6.0, 0.0, 0.2, sgn).unwrap();
        // Only soliton 0 lies in the cell; soliton 1 goes right.
        assert_eq!(fc.result.kept, vec![0]);
        assert_eq!(fc.result.removed_right, vec![1]);
        let expected = cfg.y()[0] + 0.5 * crate::model::phase_shift(1.0, 2.0).unwrap();
        assert!((fc.result.config_out.y()[0] - expected).abs() < 1e-12);
        let checks = fc.checks.expect("wide cell");
        assert!(checks.extract_agreement < 1e-8, "agree {}", checks.extract_agreement);
        assert!(checks.core_bound_ok);
        // Cell covering all effective positions: identity.
        let fc_all = fluid_cell_projection(&cfg, -20.0, 20.0, 0.2, sgn).unwrap();
        assert_eq!(fc_all.result.kept, vec![0, 1]);
        for (a, b) in fc_all.result.config_out.y().iter().zip(cfg.y()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_subset_property() {
        let cfg =
            SolitonConfig::new(vec![0.7, 1.1, 1.8, 2.4], vec![-3.0, -1.0, 1.0, 3.0]).unwrap();
        let p = project_out(&cfg, &[3], &[0]).unwrap();
        for c in p.config_out.chi() {
            assert!(cfg.chi().contains(c));
        }
    }
}
