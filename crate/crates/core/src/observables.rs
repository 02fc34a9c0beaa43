//! Conserved densities of the KdV hierarchy and their integrals.
//!
//! The first three densities, normalised so that the full-line integral of
//! the k-th density over an N-soliton field is `Σᵢ χᵢ^{2k+1}`:
//!
//! ```text
//!   P₀ = u/4,   P₁ = 3u²/16,   P₂ = (5/64)(2u³ − (∂ₓu)²).
//! ```
//!
//! Degrees (with deg ∂ₓᵏu = k+2): 2, 4, 6.

use crate::positions::extremal_and_core;
use crate::quad::adaptive_gk;
use crate::tau::{FieldEvaluator, FieldJet};
use crate::{Error, Result};
use crate::model::SolitonConfig;

/// Quadrature tolerances and subdivision limit.
const QUAD_ABS_TOL: f64 = 1e-9;
const QUAD_REL_TOL: f64 = 1e-9;
const QUAD_MAX_INTERVALS: usize = 2000;

/// Full-line integrals are truncated this many soliton widths past the core.
const TRUNCATION_WIDTHS: f64 = 40.0;

/// One of the implemented conserved densities (k = 0, 1, 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConservedDensity {
    k: usize,
}

impl ConservedDensity {
    pub fn new(k: usize) -> Result<Self> {
        if k > 2 {
            return Err(Error::UnsupportedChargeIndex(k));
        }
        Ok(ConservedDensity { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Polynomial degree with the grading deg ∂ₓᵏu = k+2.
    pub fn degree(&self) -> usize {
        match self.k {
            0 => 2,
            1 => 4,
            _ => 6,
        }
    }

    /// Minimum jet order required to evaluate the density.
    pub fn min_jet_order(&self) -> usize {
        if self.k == 2 {
            1
        } else {
            0
        }
    }

    /// Evaluate the density polynomial on a field jet.
    pub fn eval(&self, jet: &FieldJet) -> Result<f64> {
        if jet.order < self.min_jet_order() {
            return Err(Error::InsufficientJetOrder {
                need: self.min_jet_order(),
                got: jet.order,
            });
        }
        let u = jet.u();
        Ok(match self.k {
            0 => 0.25 * u,
            1 => 3.0 * u * u / 16.0,
            _ => {
                let ux = jet.du(1);
                5.0 / 64.0 * (2.0 * u * u * u - ux * ux)
            }
        })
    }

    /// Full-line total on an N-soliton field: `Σᵢ χᵢ^{2k+1}`.
    pub fn total_charge(&self, cfg: &SolitonConfig) -> f64 {
        cfg.chi().iter().map(|c| c.powi(2 * self.k as i32 + 1)).sum()
    }
}

/// Evaluate density k on a jet.
pub fn density_at(jet: &FieldJet, k: usize) -> Result<f64> {
    ConservedDensity::new(k)?.eval(jet)
}

/// Integration domain for density integrals.
#[derive(Debug, Clone, Copy)]
pub enum Interval {
    /// Auto-truncated at core ± 40/χ_min.
    FullLine,
    Bounded(f64, f64),
}

fn full_line_bounds(cfg: &SolitonConfig) -> Result<(f64, f64)> {
    let core = extremal_and_core(cfg)?;
    let chi_min = cfg.chi()[0];
    let pad = TRUNCATION_WIDTHS / chi_min;
    Ok((core.x_minus - pad, core.x_plus + pad))
}

// Initial panels must resolve the narrowest soliton, width ~ 1/chi_max.
fn seed_panels(cfg: &SolitonConfig, a: f64, b: f64) -> usize {
    let chi_max = cfg.chi().last().copied().unwrap_or(1.0);
    (((b - a) * chi_max).ceil() as usize).clamp(8, 512)
}

/// Adaptive Gauss–Kronrod integral of the k-th density over the interval.
pub fn integrate_density(cfg: &SolitonConfig, k: usize, interval: Interval) -> Result<f64> {
    let density = ConservedDensity::new(k)?;
    if cfg.is_empty() {
        return Ok(0.0);
    }
    let (a, b) = match interval {
        Interval::FullLine => full_line_bounds(cfg)?,
        Interval::Bounded(a, b) => (a, b),
    };
    let ev = FieldEvaluator::new(cfg, density.min_jet_order())?;
    let f = |x: f64| {
        let jet = ev.eval(x).expect("field evaluation");
        density.eval(&jet).expect("jet order checked")
    };
    let seed = seed_panels(cfg, a, b);
    let r = adaptive_gk(f, a, b, QUAD_ABS_TOL, QUAD_REL_TOL, QUAD_MAX_INTERVALS.max(2 * seed), seed)?;
    Ok(r.value)
}

/// Fluid-cell mean `(1/|I|) ∫_I 𝔓ₖ[u]`.
pub fn fluid_cell_mean(cfg: &SolitonConfig, k: usize, a: f64, b: f64) -> Result<f64> {
    if !(b > a) {
        return Err(Error::InvalidParameter(format!("degenerate cell [{a}, {b}]")));
    }
    Ok(integrate_density(cfg, k, Interval::Bounded(a, b))? / (b - a))
}

/// Fluid-cell mean of a general local observable of the field jet.
pub fn fluid_cell_mean_fn<F>(
    cfg: &SolitonConfig,
    order: usize,
    observable: F,
    a: f64,
    b: f64,
) -> Result<f64>
where
    F: Fn(&FieldJet) -> f64,
{
    if !(b > a) {
        return Err(Error::InvalidParameter(format!("degenerate cell [{a}, {b}]")));
    }
    if cfg.is_empty() {
        return Ok(0.0);
    }
    let ev = FieldEvaluator::new(cfg, order)?;
    let f = |x: f64| observable(&ev.eval(x).expect("field evaluation"));
    let seed = seed_panels(cfg, a, b);
    let r = adaptive_gk(f, a, b, QUAD_ABS_TOL, QUAD_REL_TOL, QUAD_MAX_INTERVALS.max(2 * seed), seed)?;
    Ok(r.value / (b - a))
}
