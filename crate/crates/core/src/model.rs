//! Spectral/impact parameter algebra of the KdV N-soliton field.
//!
//! A configuration is `(χ, y)` with strictly ordered spectral parameters
//! `0 < χ₁ < … < χ_N` and real impact parameters `y`. Soliton `i` has
//! amplitude `2χᵢ²`, width `1/χᵢ` and velocity `vᵢ = 4χᵢ²`; time evolution is
//! the linear shift `yᵢ ↦ yᵢ + vᵢ t`. Pairwise collisions displace solitons
//! by the two-body scattering shift
//!
//! ```text
//!   φᵢⱼ = (1/χᵢ) · log|(χᵢ − χⱼ)/(χᵢ + χⱼ)|  < 0,
//! ```
//!
//! and the asymptotic (in/out) impact parameters accumulate half-shifts with
//! signs fixed by the velocity ordering.

use crate::linalg::Matrix;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Sign convention with `sgn(0) = +1`. Used everywhere a hard sign appears.
#[inline]
pub fn sign_plus(a: f64) -> f64 {
    if a >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Default width of the regularised sign band, in impact-parameter length
/// units. Far below typical soliton widths `1/χ`, yet wide enough to avoid
/// sign chatter in the position solvers.
pub const DEFAULT_EPSILON: f64 = 1e-3;

/// Continuous piecewise-linear regularisation of the sign function:
/// `-1` below `-ε`, `d/ε` inside the band, `+1` above `+ε`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegularizedSign {
    epsilon: f64,
}

impl Default for RegularizedSign {
    fn default() -> Self {
        RegularizedSign { epsilon: DEFAULT_EPSILON }
    }
}

impl RegularizedSign {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "regularisation width must be finite and positive, got {epsilon}"
            )));
        }
        Ok(RegularizedSign { epsilon })
    }

    #[inline]
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    #[inline]
    pub fn eval(&self, d: f64) -> f64 {
        if d < -self.epsilon {
            -1.0
        } else if d > self.epsilon {
            1.0
        } else {
            d / self.epsilon
        }
    }

    /// True when `|d| <= ε`, i.e. on the affine segment.
    #[inline]
    pub fn in_band(&self, d: f64) -> bool {
        d.abs() <= self.epsilon
    }
}

/// Two-body scattering shift `φᵢⱼ = (1/χᵢ) log|(χᵢ−χⱼ)/(χᵢ+χⱼ)|`.
///
/// Strictly negative; diverges logarithmically as the spectral parameters
/// coincide, which is rejected.
pub fn phase_shift(chi_i: f64, chi_j: f64) -> Result<f64> {
    if !(chi_i > 0.0 && chi_j > 0.0) {
        return Err(Error::OrderingViolation(format!(
            "spectral parameters must be positive: ({chi_i}, {chi_j})"
        )));
    }
    if chi_i == chi_j {
        return Err(Error::CoincidentSpectralParameters(chi_i));
    }
    Ok(((chi_i - chi_j).abs() / (chi_i + chi_j)).ln() / chi_i)
}

/// One N-soliton field: ordered positive spectral parameters and impact
/// parameters. `n = 0` denotes the zero field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolitonConfig {
    chi: Vec<f64>,
    y: Vec<f64>,
}

#[derive(Deserialize)]
struct ConfigData {
    chi: Vec<f64>,
    y: Vec<f64>,
}

impl<'de> Deserialize<'de> for SolitonConfig {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let data = ConfigData::deserialize(deserializer)?;
        SolitonConfig::new(data.chi, data.y).map_err(serde::de::Error::custom)
    }
}

impl SolitonConfig {
    /// Validates ordering (strict, exact comparison) and positivity.
    pub fn new(chi: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if chi.len() != y.len() {
            return Err(Error::LengthMismatch { expected: chi.len(), got: y.len() });
        }
        for (i, &c) in chi.iter().enumerate() {
            if !c.is_finite() || c <= 0.0 {
                return Err(Error::OrderingViolation(format!("chi[{i}] = {c}")));
            }
            if i > 0 && c <= chi[i - 1] {
                return Err(Error::OrderingViolation(format!(
                    "chi[{}] = {} >= chi[{}] = {}",
                    i - 1,
                    chi[i - 1],
                    i,
                    c
                )));
            }
        }
        if let Some((i, &v)) = y.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("y[{i}] = {v}")));
        }
        Ok(SolitonConfig { chi, y })
    }

    pub fn empty() -> Self {
        SolitonConfig { chi: Vec::new(), y: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.chi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chi.is_empty()
    }

    pub fn chi(&self) -> &[f64] {
        &self.chi
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Soliton velocities `vᵢ = 4χᵢ²`.
    pub fn velocities(&self) -> Vec<f64> {
        self.chi.iter().map(|c| 4.0 * c * c).collect()
    }

    /// Time evolution: `yᵢ ↦ yᵢ + 4χᵢ² t`, spectral parameters unchanged.
    pub fn evolved(&self, t: f64) -> SolitonConfig {
        let y = self
            .y
            .iter()
            .zip(&self.chi)
            .map(|(&yi, &c)| yi + 4.0 * c * c * t)
            .collect();
        SolitonConfig { chi: self.chi.clone(), y }
    }

    /// Restriction to a subset of soliton indices (kept in order). The subset
    /// must be strictly increasing.
    pub fn restrict(&self, kept: &[usize]) -> Result<SolitonConfig> {
        let mut chi = Vec::with_capacity(kept.len());
        let mut y = Vec::with_capacity(kept.len());
        let mut last: Option<usize> = None;
        for &i in kept {
            if i >= self.n() || last.is_some_and(|l| i <= l) {
                return Err(Error::InvalidParameter(format!("bad subset index {i}")));
            }
            last = Some(i);
            chi.push(self.chi[i]);
            y.push(self.y[i]);
        }
        Ok(SolitonConfig { chi, y })
    }

    /// Replace impact parameters, keeping the spectral data.
    pub fn with_impacts(&self, y: Vec<f64>) -> Result<SolitonConfig> {
        SolitonConfig::new(self.chi.clone(), y)
    }

    /// Naive impact parameters `aᵢ = yᵢ − ½ Σ_{j≠i} φᵢⱼ`.
    pub fn naive_impacts(&self) -> Vec<f64> {
        let table = ScatteringTable::new(&self.chi).expect("config invariants hold");
        (0..self.n())
            .map(|i| self.y[i] - 0.5 * table.row_sum(i))
            .collect()
    }

    /// Outgoing/incoming asymptotic impact parameters
    /// `xᵢ± = yᵢ ± ½ Σ_{j≠i} sgn(j−i) φᵢⱼ`.
    pub fn asymptotic_impacts(&self) -> AsymptoticImpacts {
        let table = ScatteringTable::new(&self.chi).expect("config invariants hold");
        let n = self.n();
        let mut outgoing = Vec::with_capacity(n);
        let mut incoming = Vec::with_capacity(n);
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                if j != i {
                    s += sign_plus((j as f64) - (i as f64)) * table.phi(i, j);
                }
            }
            outgoing.push(self.y[i] + 0.5 * s);
            incoming.push(self.y[i] - 0.5 * s);
        }
        AsymptoticImpacts { outgoing, incoming }
    }

    /// Separated-profile impact parameters for an arbitrary velocity vector:
    /// `x̃ᵢ = yᵢ + ½ Σ_{j≠i} sgn(wⱼ−wᵢ) φᵢⱼ`.
    pub fn impacts_for_velocities(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.n() {
            return Err(Error::LengthMismatch { expected: self.n(), got: w.len() });
        }
        let table = ScatteringTable::new(&self.chi)?;
        Ok((0..self.n())
            .map(|i| {
                let mut s = 0.0;
                for j in 0..self.n() {
                    if j != i {
                        s += sign_plus(w[j] - w[i]) * table.phi(i, j);
                    }
                }
                self.y[i] + 0.5 * s
            })
            .collect())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s)
            .map_err(|e| Error::InvalidParameter(format!("config JSON: {e}")))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

/// Inverse of [`SolitonConfig::naive_impacts`]: `yᵢ = aᵢ + ½ Σ_{j≠i} φᵢⱼ`.
pub fn impacts_from_naive(chi: &[f64], a: &[f64]) -> Result<Vec<f64>> {
    if chi.len() != a.len() {
        return Err(Error::LengthMismatch { expected: chi.len(), got: a.len() });
    }
    let table = ScatteringTable::new(chi)?;
    Ok((0..chi.len())
        .map(|i| a[i] + 0.5 * table.row_sum(i))
        .collect())
}

/// Asymptotic impact parameters of the in/out 1-soliton decompositions.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticImpacts {
    /// `xᵢ⁺`, the outgoing (t → +∞) impact parameters.
    pub outgoing: Vec<f64>,
    /// `xᵢ⁻`, the incoming (t → −∞) impact parameters.
    pub incoming: Vec<f64>,
}

/// Precomputed pairwise data for a spectral vector:
/// shifts `φᵢⱼ`, ratios `Sᵢⱼ = (χᵢ−χⱼ)/(χᵢ+χⱼ)` and the Cauchy-type matrix
/// `ωᵢⱼ = 2√(χᵢχⱼ)/(χᵢ+χⱼ)` entering the tau determinant.
#[derive(Debug, Clone)]
pub struct ScatteringTable {
    n: usize,
    phi: Matrix,
    s_ratio: Matrix,
    omega: Matrix,
}

impl ScatteringTable {
    pub fn new(chi: &[f64]) -> Result<Self> {
        for (i, &c) in chi.iter().enumerate() {
            if !(c > 0.0) || (i > 0 && c <= chi[i - 1]) {
                return Err(Error::OrderingViolation(format!("chi[{i}] = {c}")));
            }
        }
        let n = chi.len();
        let mut phi = Matrix::zeros(n);
        let mut s_ratio = Matrix::zeros(n);
        let mut omega = Matrix::zeros(n);
        for i in 0..n {
            omega.set(i, i, 1.0);
            for j in 0..n {
                if i == j {
                    continue;
                }
                phi.set(i, j, phase_shift(chi[i], chi[j])?);
                s_ratio.set(i, j, (chi[i] - chi[j]) / (chi[i] + chi[j]));
                omega.set(i, j, 2.0 * (chi[i] * chi[j]).sqrt() / (chi[i] + chi[j]));
            }
        }
        Ok(ScatteringTable { n, phi, s_ratio, omega })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn phi(&self, i: usize, j: usize) -> f64 {
        self.phi.get(i, j)
    }

    #[inline]
    pub fn s_ratio(&self, i: usize, j: usize) -> f64 {
        self.s_ratio.get(i, j)
    }

    #[inline]
    pub fn omega(&self, i: usize, j: usize) -> f64 {
        self.omega.get(i, j)
    }

    /// `Σ_{j≠i} φᵢⱼ` (the ½-weighted version appears throughout).
    pub fn row_sum(&self, i: usize) -> f64 {
        (0..self.n).filter(|&j| j != i).map(|j| self.phi(i, j)).sum()
    }

    /// `log|Sᵢⱼ|`, also equal to `χᵢ φᵢⱼ`.
    #[inline]
    pub fn log_s_abs(&self, i: usize, j: usize) -> f64 {
        self.s_ratio(i, j).abs().ln()
    }

    /// Closed-form determinant `det ω = Π_{i<j} Sᵢⱼ²`.
    pub fn det_omega_closed_form(&self) -> f64 {
        let mut p = 1.0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                p *= self.s_ratio(i, j) * self.s_ratio(i, j);
            }
        }
        p
    }

    /// `det ω` by LU, for cross-validation against the closed form.
    pub fn det_omega_lu(&self) -> Result<f64> {
        let (sign, log_abs) = self.omega.log_det()?;
        Ok(sign * log_abs.exp())
    }
}
