//! Pressure and entropy-density estimators at finite volume.
//!
//! Pressure: `g(λ) = (1/V) log Z(λ) = ∫_0^λ α(x)/x dx`, integrated over a
//! log-spaced fugacity grid with the ideal-gas closure `∫_0^{λ0} α/x ≈ λ0`.
//!
//! Entropy density: `f = (1/t) log P`, where `P = Ẑ(t) t! / V^t` is the
//! probability that `t` independent uniform points form a packing.

use serde::{Deserialize, Serialize};

use crate::constants::{compute_constant_chain, entropy_bound_formula, pressure_bound_formula};
use crate::error::{Error, Result};
use crate::gibbs::{estimate_alpha_curve, packing_probability, ChainOptions, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThermoKind {
    Pressure,
    Entropy,
}

/// Whether an estimate could be formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateStatus {
    Ok,
    /// Fewer than the required successes; the value is unreliable.
    InsufficientSuccesses,
    /// No successes at all; only an upper bound is available.
    Undefined,
}

/// Pressure or entropy estimate with its reference formula value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoResult {
    pub kind: ThermoKind,
    pub status: EstimateStatus,
    pub value: Option<f64>,
    /// Zero when `value` is undefined.
    pub se: f64,
    /// One-sided bound reported when `value` is undefined.
    pub upper_bound: Option<f64>,
    pub fugacity: Option<f64>,
    /// `t / V` for entropy estimates.
    pub density: Option<f64>,
    pub volume: f64,
    pub t: Option<usize>,
    pub successes: Option<u64>,
    pub samples: Option<u64>,
    /// Asymptotic formula value for the same parameters; for context only.
    pub lower_bound_ref: Option<f64>,
}

/// Settings of [`pressure_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureOptions {
    pub grid_size: usize,
    /// `λ0 = λ · lambda0_ratio`.
    pub lambda0_ratio: f64,
    pub chain: ChainOptions,
}

impl Default for PressureOptions {
    fn default() -> Self {
        PressureOptions {
            grid_size: 32,
            lambda0_ratio: 1e-4,
            chain: ChainOptions::default(),
        }
    }
}

/// Log-spaced grid from `λ0` to `λ` inclusive.
pub fn log_grid(lambda0: f64, lambda: f64, size: usize) -> Vec<f64> {
    let (a, b) = (lambda0.ln(), lambda.ln());
    (0..size)
        .map(|i| {
            if i + 1 == size {
                lambda
            } else {
                (a + (b - a) * i as f64 / (size - 1) as f64).exp()
            }
        })
        .collect()
}

/// Pressure by thermodynamic integration of chain estimates of `α`.
pub fn pressure_estimate(params: &ModelParams, lambda: f64, opts: &PressureOptions, seed: u64) -> Result<ThermoResult> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::input(format!("fugacity must be positive, got {lambda}")));
    }
    if opts.grid_size < 2 {
        return Err(Error::input("pressure grid needs at least 2 points"));
    }
    if !(opts.lambda0_ratio > 0.0 && opts.lambda0_ratio < 1.0) {
        return Err(Error::input("lambda0 ratio must lie in (0, 1)"));
    }
    let lambda0 = lambda * opts.lambda0_ratio;
    let grid = log_grid(lambda0, lambda, opts.grid_size);
    let curve = estimate_alpha_curve(params, &grid, &opts.chain, seed)?;
    // trapezoid in u = log x: ∫ α(e^u) du
    let mut weights = vec![0.0; grid.len()];
    for i in 0..grid.len() - 1 {
        let du = (grid[i + 1] / grid[i]).ln();
        weights[i] += 0.5 * du;
        weights[i + 1] += 0.5 * du;
    }
    let value = lambda0
        + weights
            .iter()
            .zip(&curve)
            .map(|(w, (_, e))| w * e.alpha_hat)
            .sum::<f64>();
    let se = weights
        .iter()
        .zip(&curve)
        .map(|(w, (_, e))| (w * e.alpha_se).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(ThermoResult {
        kind: ThermoKind::Pressure,
        status: EstimateStatus::Ok,
        value: Some(value),
        se,
        upper_bound: None,
        fugacity: Some(lambda),
        density: None,
        volume: params.volume(),
        t: None,
        successes: None,
        samples: None,
        lower_bound_ref: Some(pressure_bound_formula(params.dim() as u32, lambda)),
    })
}

/// Successes required before an entropy estimate is reported as reliable.
pub const MIN_SUCCESSES: u64 = 10;

/// `f̂ = (1/t) log P̂` with delta-method standard error
/// `sqrt((1 − P̂)/(samples · P̂)) / t`.
pub fn entropy_estimate(params: &ModelParams, t: usize, samples: u64, seed: u64) -> Result<ThermoResult> {
    if t == 0 {
        return Err(Error::input("entropy estimate needs t ≥ 1"));
    }
    if samples == 0 {
        return Err(Error::input("entropy estimate needs samples > 0"));
    }
    let v = params.volume();
    let p = params.space.p();
    let lower_bound_ref = if p > 1.0 && p <= 2.0 {
        Some(entropy_bound_formula(params.dim() as u32, &compute_constant_chain(p)?))
    } else {
        None
    };
    let base = ThermoResult {
        kind: ThermoKind::Entropy,
        status: EstimateStatus::Ok,
        value: Some(0.0),
        se: 0.0,
        upper_bound: None,
        fugacity: None,
        density: Some(t as f64 / v),
        volume: v,
        t: Some(t),
        successes: Some(samples),
        samples: Some(samples),
        lower_bound_ref,
    };
    if t == 1 {
        return Ok(base);
    }
    let prob = packing_probability(t, params, samples, seed);
    let tf = t as f64;
    if prob.successes == 0 {
        return Ok(ThermoResult {
            status: EstimateStatus::Undefined,
            value: None,
            se: 0.0,
            upper_bound: Some((1.0 / samples as f64).ln() / tf),
            successes: Some(0),
            ..base
        });
    }
    let ph = prob.probability;
    Ok(ThermoResult {
        status: if prob.successes < MIN_SUCCESSES {
            EstimateStatus::InsufficientSuccesses
        } else {
            EstimateStatus::Ok
        },
        value: Some(ph.ln() / tf),
        se: ((1.0 - ph) / (samples as f64 * ph)).sqrt() / tf,
        successes: Some(prob.successes),
        ..base
    })
}

/// One adjacent comparison in [`entropy_monotonicity_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityPair {
    pub t_small: usize,
    pub t_large: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub estimates: Vec<ThermoResult>,
    pub pairs: Vec<MonotonicityPair>,
    pub passed: bool,
    /// Finite-volume surrogate; not a proof of the limiting statement.
    pub advisory: bool,
}

/// Checks `f̂(t1) ≥ f̂(t2) − 3(SE1 + SE2)` for consecutive entries of an
/// increasing `t` list at fixed volume. An undefined `f̂(t2)` is compared
/// through its upper bound.
pub fn entropy_monotonicity_check(
    params: &ModelParams,
    ts: &[usize],
    samples: u64,
    seed: u64,
) -> Result<MonotonicityReport> {
    if ts.is_empty() || ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::input("t list must be nonempty and strictly increasing"));
    }
    let estimates = ts
        .iter()
        .enumerate()
        .map(|(i, &t)| entropy_estimate(params, t, samples, crate::seed::derive_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<MonotonicityPair> = estimates
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let passed = match (a.value, b.value, b.upper_bound) {
                (Some(fa), Some(fb), _) => fa >= fb - 3.0 * (a.se + b.se),
                (Some(fa), None, Some(ub)) => fa >= ub - 3.0 * a.se,
                (None, None, _) => true,
                _ => false,
            };
            MonotonicityPair {
                t_small: a.t.unwrap_or(0),
                t_large: b.t.unwrap_or(0),
                passed,
            }
        })
        .collect();
    Ok(MonotonicityReport {
        passed: pairs.iter().all(|p| p.passed),
        estimates,
        pairs,
        advisory: true,
    })
}
