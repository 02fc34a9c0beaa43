//! Soliton-gas generators and regularity/density assumption checkers.
//!
//! The ultra-dilute construction takes spectra distributed regularly over
//! `[χ*, C]` and impact parameters with spacing `R·N^{1+ϵ}`, far larger
//! than any accumulated scattering shift. In that regime a sweep of the
//! observation point crosses one soliton at a time, and the positions admit
//! an exact piecewise description which doubles as an oracle for the
//! general solver: starting from the left-extremal values, repeatedly find
//! the next soliton to be crossed, and shift every other soliton by its full
//! pairwise scattering shift across the crossing band.

use crate::model::{RegularizedSign, ScatteringTable, SolitonConfig};
use crate::positions::extremal_and_core;
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Parameters of the ultra-dilute construction.
#[derive(Debug, Clone, Copy)]
pub struct UltraDiluteParams {
    pub n: usize,
    /// Spacing scale R: impact spacing is `R·n^{1+exponent}`.
    pub spacing_scale: f64,
    /// Dilution exponent ϵ > 0.
    pub exponent: f64,
    /// Lower spectral bound χ*.
    pub chi_star: f64,
    /// Upper spectral bound C (χ_n = C).
    pub chi_max: f64,
}

impl UltraDiluteParams {
    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::EmptyConfig);
        }
        if !(self.spacing_scale > 0.0 && self.exponent > 0.0) {
            return Err(Error::InvalidParameter("need R > 0 and exponent > 0".into()));
        }
        if !(self.chi_max > self.chi_star && self.chi_star > 0.0) {
            return Err(Error::InvalidParameter("need 0 < chi_star < chi_max".into()));
        }
        Ok(())
    }
}

/// `χᵢ = χ* + (C−χ*)·i/N` for `i = 1..N`, `yᵢ = R·(i − N/2)·N^{1+ϵ}`.
pub fn generate_ultra_dilute(
    params: UltraDiluteParams,
) -> Result<(SolitonConfig, UltraDiluteOracle)> {
    params.validate()?;
    let n = params.n;
    let nf = n as f64;
    let spacing = params.spacing_scale * nf.powf(1.0 + params.exponent);
    let chi: Vec<f64> = (1..=n)
        .map(|i| params.chi_star + (params.chi_max - params.chi_star) * i as f64 / nf)
        .collect();
    let y: Vec<f64> = (1..=n).map(|i| (i as f64 - nf / 2.0) * spacing).collect();
    let cfg = SolitonConfig::new(chi, y)?;
    let oracle = UltraDiluteOracle::build(&cfg, RegularizedSign::default())?;
    Ok((cfg, oracle))
}

/// One segment of the piecewise position table: valid on
/// `[start, next segment start)`, positions given by `base` with the
/// crossing soliton's band interpolation applied.
#[derive(Debug, Clone)]
struct Segment {
    start: f64,
    base: Vec<f64>,
    crossing: Option<usize>,
}

/// Exact piecewise solution of the position equations for ultra-dilute
/// configurations, built by the sequential crossing procedure. Valid only in
/// the ultra-dilute regime; used as a test oracle for the general solver.
#[derive(Debug, Clone)]
pub struct UltraDiluteOracle {
    segments: Vec<Segment>,
    phi: Vec<Vec<f64>>,
    sgn: RegularizedSign,
    /// Positions at which each soliton is crossed by the sweep.
    soliton_positions: Vec<f64>,
}

impl UltraDiluteOracle {
    pub fn build(cfg: &SolitonConfig, sgn: RegularizedSign) -> Result<Self> {
        let n = cfg.n();
        if n == 0 {
            return Err(Error::EmptyConfig);
        }
        let table = ScatteringTable::new(cfg.chi())?;
        let phi: Vec<Vec<f64>> =
            (0..n).map(|i| (0..n).map(|j| table.phi(i, j)).collect()).collect();
        let core = extremal_and_core(cfg)?;
        let eps = sgn.epsilon();
        let mut segments = Vec::with_capacity(n + 1);
        let mut x_now = core.x_minus - eps - 1.0;
        let mut base = core.extremal_minus.clone();
        let mut soliton_positions = vec![f64::NAN; n];
        let mut crossed = vec![false; n];
        loop {
            // Next crossing: the uncrossed soliton with minimal position at
            // least eps to the right of the current observation point.
            let next = (0..n)
                .filter(|&j| !crossed[j] && base[j] >= x_now + eps)
                .min_by(|&a, &b| base[a].partial_cmp(&base[b]).unwrap());
            match next {
                None => {
                    segments.push(Segment {
                        start: x_now,
                        base: base.clone(),
                        crossing: None,
                    });
                    break;
                }
                Some(i) => {
                    segments.push(Segment {
                        start: x_now,
                        base: base.clone(),
                        crossing: Some(i),
                    });
                    soliton_positions[i] = base[i];
                    crossed[i] = true;
                    let x_next = base[i] + eps;
                    // Positions at the segment end: full shift −φ_ji applied.
                    let snapshot = base.clone();
                    for j in 0..n {
                        if j != i {
                            base[j] = snapshot[j] - phi[j][i];
                        }
                    }
                    x_now = x_next;
                }
            }
        }
        segments[0].start = f64::NEG_INFINITY;
        Ok(UltraDiluteOracle { segments, phi, sgn, soliton_positions })
    }

    /// Exact positions `X(x*)`.
    pub fn positions(&self, x_star: f64) -> Vec<f64> {
        let idx = match self
            .segments
            .binary_search_by(|s| s.start.partial_cmp(&x_star).unwrap())
        {
            Ok(k) => k,
            Err(k) => k.saturating_sub(1),
        };
        let seg = &self.segments[idx];
        let mut x = seg.base.clone();
        if let Some(i) = seg.crossing {
            let band = 1.0 - self.sgn.eval(seg.base[i] - x_star);
            for (j, xj) in x.iter_mut().enumerate() {
                if j != i {
                    *xj = seg.base[j] - 0.5 * self.phi[j][i] * band;
                }
            }
        }
        x
    }

    /// The crossing position of each soliton; in the ultra-dilute regime
    /// these are the (scale-independent) effective positions.
    pub fn soliton_positions(&self) -> &[f64] {
        &self.soliton_positions
    }

    /// Breakpoints of the piecewise description (segment starts).
    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.start).collect()
    }
}

/// Parameters for the homogeneous random gas.
#[derive(Debug, Clone, Copy)]
pub struct UniformGasParams {
    pub n: usize,
    /// Impact parameters i.i.d. uniform on `[−ell/2, ell/2]`.
    pub ell: f64,
    /// Spectral parameters i.i.d. uniform on this range, then sorted.
    pub chi_range: (f64, f64),
    pub seed: u64,
}

/// Deterministic (seeded) homogeneous gas.
pub fn generate_uniform(params: UniformGasParams) -> Result<SolitonConfig> {
    if params.n == 0 {
        return Ok(SolitonConfig::empty());
    }
    if !(params.ell > 0.0) {
        return Err(Error::InvalidParameter("ell must be positive".into()));
    }
    let (lo, hi) = params.chi_range;
    if !(hi > lo && lo > 0.0) {
        return Err(Error::InvalidParameter("bad spectral range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut chi: Vec<f64> = (0..params.n).map(|_| rng.gen_range(lo..hi)).collect();
    chi.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Exact duplicates have probability zero but would break the strict
    // ordering invariant; nudge by one ulp if they ever occur.
    for i in 1..chi.len() {
        if chi[i] <= chi[i - 1] {
            chi[i] = f64::from_bits(chi[i - 1].to_bits() + 1);
        }
    }
    let y: Vec<f64> = (0..params.n)
        .map(|_| rng.gen_range(-params.ell / 2.0..params.ell / 2.0))
        .collect();
    SolitonConfig::new(chi, y)
}

/// Exponents entering the regularity/density hypotheses.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AssumptionExponents {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    pub mu: f64,
    pub nu: f64,
    /// Local-scale exponent: ΔX = N^gamma for the variation check.
    pub gamma: f64,
    /// Slack exponent in the variation bound Δx ≤ G·N^{gamma+epsilon}.
    pub epsilon: f64,
    /// Density threshold exponent eta: the density bound applies for
    /// d ≥ B·N^{eta+mu}.
    pub eta: f64,
}

/// Constants entering the hypotheses (user-supplied, not fitted).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AssumptionConstants {
    pub chi_star: f64,
    /// Spectral-gap constant A: min gap ≥ exp(−A·N^{alpha/2}).
    pub a: f64,
    /// Spectral ceiling: max χ ≤ C·N^beta.
    pub c: f64,
    /// Density threshold coefficient B.
    pub b: f64,
    /// Density ceiling D: ρ_d(d) ≤ D·N^nu.
    pub d: f64,
    /// Accumulation ceiling U: #{|dᵢ| < ε} ≤ U·N^{sigma/2}.
    pub u: f64,
    /// Variation ceiling G: Δx ≤ G·N^{gamma+epsilon}.
    pub g: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralCheck {
    pub min_chi: f64,
    pub min_gap: f64,
    pub max_chi: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DensitySample {
    pub d: f64,
    pub rho: f64,
}

/// Measured quantities vs the supplied hypothesis constants. All numbers are
/// reproducible from the configuration and the scan grid; the exponent
/// conditions are verified only at the sampled scales.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub n: usize,
    pub exponents: AssumptionExponents,
    pub constants: AssumptionConstants,
    pub spectral: SpectralCheck,
    /// Worst accumulation count `#{i : |dᵢ| < ε}` over the x*-grid.
    pub max_accumulation: usize,
    pub accumulation_bound: f64,
    pub accumulation_ok: bool,
    /// Density profile at the worst x*, sampled at log-spaced radii.
    pub density_profile: Vec<DensitySample>,
    pub density_bound: f64,
    pub density_threshold: f64,
    pub density_ok: bool,
    /// Effective imprecision at ΔX = N^gamma vs G·N^{gamma+epsilon}.
    pub delta_x: f64,
    pub variation_bound: f64,
    pub variation_ok: bool,
    pub worst_x_star: f64,
    pub solver_failures: usize,
    pub pass: bool,
}

/// Evaluate the hypothesis checks over an observation-point grid.
pub fn check_assumptions(
    cfg: &SolitonConfig,
    exponents: AssumptionExponents,
    constants: AssumptionConstants,
    x_star_grid: &[f64],
    sgn: RegularizedSign,
) -> Result<AssumptionReport> {
    if cfg.is_empty() {
        return Err(Error::EmptyConfig);
    }
    let n = cfg.n();
    let nf = n as f64;
    let eps = sgn.epsilon();

    let min_chi = cfg.chi()[0];
    let max_chi = *cfg.chi().last().unwrap();
    let min_gap = cfg
        .chi()
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let gap_floor = (-constants.a * nf.powf(exponents.alpha / 2.0)).exp();
    let spectral = SpectralCheck {
        min_chi,
        min_gap,
        max_chi,
        ok: min_chi >= constants.chi_star
            && (n == 1 || min_gap >= gap_floor)
            && max_chi <= constants.c * nf.powf(exponents.beta),
    };

    let accumulation_bound = constants.u * nf.powf(exponents.sigma / 2.0);
    let density_bound = constants.d * nf.powf(exponents.nu);
    let density_threshold = constants.b * nf.powf(exponents.eta + exponents.mu);

    let mut max_accumulation = 0usize;
    let mut worst_profile: Vec<DensitySample> = Vec::new();
    let mut density_ok = true;
    let mut worst_x_star = f64::NAN;
    let mut solver_failures = 0usize;
    let mut worst_rho = f64::NEG_INFINITY;
    for &x_star in x_star_grid {
        let sol = match crate::positions::expand(cfg, x_star, sgn) {
            Ok(s) => s,
            Err(Error::SolverFailure { .. }) => {
                solver_failures += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let acc = sol.displacements.iter().filter(|d| d.abs() < eps).count();
        max_accumulation = max_accumulation.max(acc);
        // ρ_d(d) at log-spaced radii from the threshold upwards.
        let d_max = sol
            .displacements
            .iter()
            .map(|d| d.abs())
            .fold(0.0, f64::max)
            .max(density_threshold * 2.0);
        let mut profile = Vec::new();
        let mut point_ok = true;
        let samples = 24;
        for k in 0..samples {
            let d = density_threshold
                * (d_max * 2.0 / density_threshold).powf(k as f64 / (samples - 1) as f64);
            let count = sol.displacements.iter().filter(|v| v.abs() <= d).count();
            let rho = count as f64 / (2.0 * d);
            if rho > density_bound {
                point_ok = false;
            }
            profile.push(DensitySample { d, rho });
        }
        let peak = profile.iter().map(|s| s.rho).fold(0.0, f64::max);
        if peak > worst_rho {
            worst_rho = peak;
            worst_profile = profile;
            worst_x_star = x_star;
        }
        if !point_ok {
            density_ok = false;
        }
    }
    let accumulation_ok = (max_accumulation as f64) <= accumulation_bound;

    let delta_x_scale = nf.powf(exponents.gamma).max(eps);
    let eff = crate::effective::scan_effective(cfg, delta_x_scale, sgn)?;
    let variation_bound = constants.g * nf.powf(exponents.gamma + exponents.epsilon);
    let variation_ok = eff.delta_x <= variation_bound;

    let pass = spectral.ok && accumulation_ok && density_ok && variation_ok
        && solver_failures == 0;
    Ok(AssumptionReport {
        n,
        exponents,
        constants,
        spectral,
        max_accumulation,
        accumulation_bound,
        accumulation_ok,
        density_profile: worst_profile,
        density_bound,
        density_threshold,
        density_ok,
        delta_x: eff.delta_x,
        variation_bound,
        variation_ok,
        worst_x_star,
        solver_failures,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::positions::{contract, expand};

    fn ultra(n: usize) -> (SolitonConfig, UltraDiluteOracle) {
        generate_ultra_dilute(UltraDiluteParams {
            n,
            spacing_scale: 1.0,
            exponent: 0.1,
            chi_star: 1.0,
            chi_max: 2.0,
        })
        .unwrap()
    }

    #[test]
    fn ultra_dilute_layout() {
        let (cfg, _) = ultra(4);
        // y_i = (i − 2)·4^{1.1}
        let s = 4f64.powf(1.1);
        for (i, y) in cfg.y().iter().enumerate() {
            let expected = ((i + 1) as f64 - 2.0) * s;
            assert!((y - expected).abs() < 1e-12);
        }
        let min_space = cfg.y().windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        assert!((min_space - s).abs() < 1e-12);
        assert!((s - 4.594793419988).abs() < 1e-9);
        // Spectral gap (C − χ*)/N = 0.25.
        let gap = cfg.chi().windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        assert!((gap - 0.25).abs() < 1e-12);
    }

    #[test]
    fn oracle_satisfies_position_equations() {
        let (cfg, oracle) = ultra(4);
        let sgn = RegularizedSign::default();
        let core = extremal_and_core(&cfg).unwrap();
        let span = core.x_plus - core.x_minus;
        for k in 0..=400 {
            let x_star = core.x_minus - 1.0 + (span + 2.0) * k as f64 / 400.0;
            let x = oracle.positions(x_star);
            let back = contract(cfg.chi(), x_star, &x, sgn).unwrap();
            for (b, yi) in back.iter().zip(cfg.y()) {
                assert!((b - yi).abs() < 1e-9, "x* = {x_star}: {b} vs {yi}");
            }
        }
    }

    #[test]
    fn oracle_matches_general_solver() {
        let (cfg, oracle) = ultra(3);
        let sgn = RegularizedSign::default();
        let core = extremal_and_core(&cfg).unwrap();
        for k in 0..=60 {
            let x_star = core.x_minus - 0.5 + (core.x_plus - core.x_minus + 1.0) * k as f64 / 60.0;
            let solver = expand(&cfg, x_star, sgn).unwrap();
            let orc = oracle.positions(x_star);
            for (a, b) in solver.positions.iter().zip(&orc) {
                assert!((a - b).abs() < 1e-9, "x* = {x_star}");
            }
        }
    }

    #[test]
    fn uniform_gas_is_deterministic() {
        let p = UniformGasParams { n: 12, ell: 30.0, chi_range: (0.5, 2.0), seed: 42 };
        let a = generate_uniform(p).unwrap();
        let b = generate_uniform(p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n(), 12);
        assert!(generate_uniform(UniformGasParams { n: 0, ..p }).unwrap().is_empty());
    }

    #[test]
    fn uniform_gas_density_within_binomial_noise() {
        // ell = n/rho0 gives empirical density ≈ rho0 in a window.
        let rho0 = 0.5;
        let n = 400;
        let ell = n as f64 / rho0;
        let cfg = generate_uniform(UniformGasParams {
            n,
            ell,
            chi_range: (0.5, 2.0),
            seed: 7,
        })
        .unwrap();
        let window = 100.0;
        let count = cfg.y().iter().filter(|y| y.abs() <= window / 2.0).count() as f64;
        let p = window / ell;
        let expected = n as f64 * p;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((count - expected).abs() <= 3.0 * sigma, "count {count}, expected {expected}");
    }

    #[test]
    fn ultra_dilute_passes_assumptions() {
        let (cfg, oracle) = ultra(4);
        let grid: Vec<f64> = oracle
            .soliton_positions()
            .iter()
            .flat_map(|&x| [x - 1.0, x, x + 1.0])
            .collect();
        let exponents = AssumptionExponents {
            alpha: 0.5,
            beta: 0.0,
            sigma: 0.0,
            mu: 0.0,
            nu: 0.0,
            gamma: 0.5,
            epsilon: 0.1,
            eta: 0.25,
        };
        let constants = AssumptionConstants {
            chi_star: 1.0,
            a: 3.0,
            c: 2.0,
            b: 1.0,
            d: 1.0,
            u: 1.0,
            g: 1.0,
        };
        let sgn = RegularizedSign::default();
        let report = check_assumptions(&cfg, exponents, constants, &grid, sgn).unwrap();
        assert!(report.spectral.ok);
        assert!(report.accumulation_ok, "max acc {}", report.max_accumulation);
        assert!(report.density_ok);
        assert!(report.variation_ok, "dx {} vs {}", report.delta_x, report.variation_bound);
        assert!(report.pass);
    }

    #[test]
    fn duplicate_spectra_fail_the_gap_check() {
        // Construct a nearly-duplicated pair; the gap check must fail.
        let cfg = SolitonConfig::new(vec![1.0, 1.0 + 1e-15, 2.0], vec![-5.0, 0.0, 5.0]).unwrap();
        let exponents = AssumptionExponents {
            alpha: 0.5,
            beta: 0.0,
            sigma: 0.0,
            mu: 0.0,
            nu: 0.0,
            gamma: 0.5,
            epsilon: 0.1,
            eta: 0.25,
        };
        let constants = AssumptionConstants {
            chi_star: 1.0,
            a: 3.0,
            c: 2.0,
            b: 1.0,
            d: 1.0,
            u: 1.0,
            g: 10.0,
        };
        let report = check_assumptions(
            &cfg,
            exponents,
            constants,
            &[0.0],
            RegularizedSign::default(),
        )
        .unwrap();
        assert!(!report.spectral.ok);
        assert!(!report.pass);
    }

    #[test]
    fn single_soliton_passes_vacuously() {
        let cfg = SolitonConfig::new(vec![1.5], vec![0.0]).unwrap();
        let exponents = AssumptionExponents {
            alpha: 0.5,
            beta: 0.0,
            sigma: 0.0,
            mu: 0.0,
            nu: 0.0,
            gamma: 0.5,
            epsilon: 0.1,
            eta: 0.25,
        };
        let constants = AssumptionConstants {
            chi_star: 1.0,
            a: 3.0,
            c: 2.0,
            b: 1.0,
            d: 1.0,
            u: 1.0,
            g: 2.0,
        };
        let report = check_assumptions(
            &cfg,
            exponents,
            constants,
            &[-1.0, 0.0, 1.0],
            RegularizedSign::default(),
        )
        .unwrap();
        assert!(report.pass);
    }
}
