//! Uniform convexity of the mixed norm and the `c_p` constant chain.
//!
//! For `1 < p ≤ 2` the chain is
//!
//! ```text
//! x_p   smallest x in (1.5, 2) with h(x) ≥ 3^{-q}
//! ε_p   = 1 + x_p/2 − 2/x_p
//! c'_p  = max{ (x_p + 2)/2, 2 − (2 δ_p(ε_p) − (2 − x_p)/2) }
//! c_p   = max{ x_p, c'_p }
//! ```
//!
//! and the resulting density bound is `log(2/c_p) · n / 2^n`.
//!
//! As `p → 1` both `2 − x_p` and `2 − c_p` shrink far below the spacing of
//! doubles near 2, so the chain is evaluated in terms of the gaps
//! `2 − x_p` and `2 − c_p`, which keep full relative precision.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{conjugate_exponent, SpaceParams};

fn check_p_range(p: f64) -> Result<()> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::input(format!("p must lie in (1, 2], got {p}")));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 2.0) {
        return Err(Error::input(format!("eps must lie in (0, 2], got {eps}")));
    }
    Ok(())
}

/// `1 − (1 − (ε/2)^r)^{1/r}` evaluated without cancellation.
fn modulus_with_exponent(eps: f64, r: f64) -> f64 {
    let a = (eps / 2.0).powf(r);
    if a >= 1.0 {
        return 1.0;
    }
    -((-a).ln_1p() / r).exp_m1()
}

/// Modulus of convexity `δ_p(ε) = 1 − (1 − (ε/2)^q)^{1/q}` for `1 < p ≤ 2`.
pub fn delta_p(eps: f64, p: f64) -> Result<f64> {
    check_eps(eps)?;
    check_p_range(p)?;
    Ok(modulus_with_exponent(eps, conjugate_exponent(p)))
}

/// Convexity modulus for any `p > 1`: the `q`-form for `p ≤ 2`, the `p`-form
/// `1 − (1 − (ε/2)^p)^{1/p}` above 2.
pub fn convexity_modulus(eps: f64, p: f64) -> Result<f64> {
    check_eps(eps)?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::input(format!("uniform convexity needs p > 1, got {p}")));
    }
    let r = if p <= 2.0 { conjugate_exponent(p) } else { p };
    Ok(modulus_with_exponent(eps, r))
}

/// Which way the Clarkson inequalities point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClarksonDirection {
    /// `p ≥ 2`.
    Stated,
    /// `1 < p ≤ 2`.
    Reversed,
}

impl ClarksonDirection {
    pub fn for_exponent(p: f64) -> Self {
        if p <= 2.0 {
            ClarksonDirection::Reversed
        } else {
            ClarksonDirection::Stated
        }
    }
}

/// One asserted inequality `smaller ≤ larger`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub smaller: f64,
    pub larger: f64,
}

impl InequalityCheck {
    fn new(smaller: f64, larger: f64) -> Self {
        InequalityCheck { smaller, larger }
    }

    fn oriented(lhs: f64, rhs: f64, dir: ClarksonDirection) -> Self {
        match dir {
            ClarksonDirection::Stated => InequalityCheck::new(lhs, rhs),
            ClarksonDirection::Reversed => InequalityCheck::new(rhs, lhs),
        }
    }

    /// Satisfied side minus violated side; negative means violated.
    pub fn residual(&self) -> f64 {
        self.larger - self.smaller
    }

    pub fn scale(&self) -> f64 {
        self.smaller.abs().max(self.larger.abs())
    }

    pub fn holds(&self, rel_tol: f64) -> bool {
        self.residual() >= -rel_tol * self.scale()
    }
}

/// Both sides of the three Clarkson-type inequalities for one pair `(x, y)`.
/// The two-sided inequality is split into its lower and upper halves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClarksonReport {
    pub direction: ClarksonDirection,
    /// `2(‖x‖^p + ‖y‖^p)` vs `‖x+y‖^p + ‖x−y‖^p`.
    pub parallelogram_lower: InequalityCheck,
    /// `‖x+y‖^p + ‖x−y‖^p` vs `2^{p−1}(‖x‖^p + ‖y‖^p)`.
    pub parallelogram_upper: InequalityCheck,
    /// `2(‖x‖^p + ‖y‖^p)^{q−1}` vs `‖x+y‖^q + ‖x−y‖^q`.
    pub conjugate_lower: InequalityCheck,
    /// `‖x+y‖^p + ‖x−y‖^p` vs `2(‖x‖^q + ‖y‖^q)^{p−1}`.
    pub conjugate_upper: InequalityCheck,
}

impl ClarksonReport {
    /// One signed residual per inequality, relative to its larger side.
    /// The two-sided one reports its worse half.
    pub fn residuals(&self) -> [f64; 3] {
        let rel = |c: &InequalityCheck| {
            let s = c.scale();
            if s == 0.0 {
                0.0
            } else {
                c.residual() / s
            }
        };
        [
            rel(&self.parallelogram_lower).min(rel(&self.parallelogram_upper)),
            rel(&self.conjugate_lower),
            rel(&self.conjugate_upper),
        ]
    }

    pub fn checks(&self) -> [&InequalityCheck; 4] {
        [
            &self.parallelogram_lower,
            &self.parallelogram_upper,
            &self.conjugate_lower,
            &self.conjugate_upper,
        ]
    }

    pub fn holds(&self, rel_tol: f64) -> bool {
        self.checks().iter().all(|c| c.holds(rel_tol))
    }
}

/// Evaluates the Clarkson inequalities in the direction implied by `p`.
pub fn clarkson_check(x: &[f64], y: &[f64], space: &SpaceParams) -> Result<ClarksonReport> {
    clarkson_check_with(x, y, space, ClarksonDirection::for_exponent(space.p()))
}

/// Same as [`clarkson_check`] with an explicit direction (both hold at `p = 2`).
pub fn clarkson_check_with(
    x: &[f64],
    y: &[f64],
    space: &SpaceParams,
    direction: ClarksonDirection,
) -> Result<ClarksonReport> {
    check_dim(space.dim(), x.len(), "x")?;
    check_dim(space.dim(), y.len(), "y")?;
    let p = space.p();
    if p <= 1.0 {
        return Err(Error::input("Clarkson inequalities need p > 1"));
    }
    let q = space.q();
    let sum: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let nx = space.norm_raw(x);
    let ny = space.norm_raw(y);
    let ns = space.norm_raw(&sum);
    let nd = space.norm_raw(&diff);

    let pow_p = nx.powf(p) + ny.powf(p);
    let pow_q = nx.powf(q) + ny.powf(q);
    let mixed_p = ns.powf(p) + nd.powf(p);
    let mixed_q = ns.powf(q) + nd.powf(q);

    Ok(ClarksonReport {
        direction,
        parallelogram_lower: InequalityCheck::oriented(2.0 * pow_p, mixed_p, direction),
        parallelogram_upper: InequalityCheck::oriented(
            mixed_p,
            2f64.powf(p - 1.0) * pow_p,
            direction,
        ),
        conjugate_lower: InequalityCheck::oriented(
            2.0 * pow_p.powf(q - 1.0),
            mixed_q,
            direction,
        ),
        conjugate_upper: InequalityCheck::oriented(
            mixed_p,
            2.0 * pow_q.powf(p - 1.0),
            direction,
        ),
    })
}

/// Checks `‖(x+y)/2‖ ≤ 1 − δ(ε) + 1e−12` for unit vectors at distance `≥ ε`.
pub fn uniform_convexity_check(x: &[f64], y: &[f64], eps: f64, space: &SpaceParams) -> Result<bool> {
    Ok(convexity_margin(x, y, eps, space)? >= -1e-12)
}

/// `1 − δ(ε) − ‖(x+y)/2‖`; nonnegative when the convexity bound holds.
pub fn convexity_margin(x: &[f64], y: &[f64], eps: f64, space: &SpaceParams) -> Result<f64> {
    check_dim(space.dim(), x.len(), "x")?;
    check_dim(space.dim(), y.len(), "y")?;
    let delta = convexity_modulus(eps, space.p())?;
    let nx = space.norm_raw(x);
    let ny = space.norm_raw(y);
    if (nx - 1.0).abs() > 1e-9 || (ny - 1.0).abs() > 1e-9 {
        return Err(Error::input(format!(
            "uniform convexity needs unit vectors, got norms {nx} and {ny}"
        )));
    }
    let sep = space.flat_distance_raw(x, y);
    if sep < eps {
        return Err(Error::input(format!(
            "points are {sep} apart, closer than eps = {eps}"
        )));
    }
    let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(1.0 - delta - space.norm_raw(&mid))
}

/// `h(x) = (x/4 + 1/2 − 1/x)^q + ((x+2)/4)^q − 1`.
pub fn h(x: f64, q: f64) -> f64 {
    (x / 4.0 + 0.5 - 1.0 / x).powf(q) + ((x + 2.0) / 4.0).powf(q) - 1.0
}

/// `h(2 − s) − 3^{−q}` written so that small `s` keeps its relative precision.
fn h_excess_at_gap(s: f64, q: f64) -> f64 {
    // x/4 + 1/2 − 1/x at x = 2 − s
    let a = 0.5 - 0.25 * s - s / (4.0 - 2.0 * s);
    let b_minus_one = (q * (-0.25 * s).ln_1p()).exp_m1();
    (a.powf(q) - 3f64.powf(-q)) + b_minus_one
}

/// `2 − x_p`: the gap below 2 of the smallest admissible `x_p`.
fn solve_x_gap(p: f64) -> Result<f64> {
    check_p_range(p)?;
    let q = conjugate_exponent(p);
    // h is increasing on [1.5, 2], so h(2−s) − 3^{−q} decreases in s.
    let mut s_pos = f64::MIN_POSITIVE;
    let mut s_neg = 0.5;
    if h_excess_at_gap(s_neg, q) >= 0.0 {
        return Err(Error::computation(format!(
            "h(1.5) already exceeds 3^-q for p = {p}; no sign change on (1.5, 2)"
        )));
    }
    if h_excess_at_gap(s_pos, q) <= 0.0 {
        return Err(Error::computation(format!(
            "p = {p} is too close to 1: the root of h(x) = 3^-q is not representable in double precision"
        )));
    }
    loop {
        let mid = if s_neg > 4.0 * s_pos {
            (s_pos * s_neg).sqrt()
        } else {
            0.5 * (s_pos + s_neg)
        };
        if mid <= s_pos || mid >= s_neg {
            break;
        }
        if h_excess_at_gap(mid, q) >= 0.0 {
            s_pos = mid;
        } else {
            s_neg = mid;
        }
    }
    // Nudge towards 2 so the inequality is strict at the endpoint. The nudge
    // is 1e-9 unless the gap itself is tiny.
    let s = s_pos - (1e-9f64).min(1e-3 * s_pos);

    let excess = h_excess_at_gap(s, q);
    if !(0.0..=1e-8).contains(&excess) {
        return Err(Error::computation(format!(
            "x_p residual h(x_p) - 3^-q = {excess:e} outside [0, 1e-8]"
        )));
    }
    const GRID: usize = 10_000;
    for i in 0..=GRID {
        let t = s * (i as f64) / GRID as f64;
        if h_excess_at_gap(t, q) < 0.0 {
            return Err(Error::computation(format!(
                "h drops below 3^-q at x = {} inside [x_p, 2]",
                2.0 - t
            )));
        }
    }
    Ok(s)
}

/// Smallest `x_p ∈ (1.5, 2)` with `h ≥ 3^{−q}` on `[x_p, 2]`, nudged inward.
pub fn solve_x_p(p: f64) -> Result<f64> {
    Ok(2.0 - solve_x_gap(p)?)
}

/// The full constant chain for one exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantChain {
    pub p: f64,
    pub q: f64,
    pub x_p: f64,
    /// `2 − x_p`, exact even where `x_p` rounds to 2.
    pub x_gap: f64,
    /// Uniform lower bound `1 + x_p/2 − 2/x_p` on the separation `ε_p`.
    pub eps_p: f64,
    pub delta_at_eps: f64,
    /// `2 δ_p(ε_p) − (2 − x_p)/2`, which must be positive.
    pub convexity_gap: f64,
    pub c_prime: f64,
    pub c_p: f64,
    /// `2 − c_p`.
    pub c_gap: f64,
    /// `log(2 / c_p)`.
    pub log_ratio: f64,
    /// `|h(x_p) − 3^{−q}|`.
    pub residual_h: f64,
}

impl ConstantChain {
    /// `c_p^n`, via logs.
    pub fn c_pow(&self, n: u32) -> f64 {
        (n as f64 * (std::f64::consts::LN_2 - self.log_ratio)).exp()
    }
}

pub fn compute_constant_chain(p: f64) -> Result<ConstantChain> {
    let s = solve_x_gap(p)?;
    let q = conjugate_exponent(p);
    let x_p = 2.0 - s;
    // 1 + x/2 − 2/x at x = 2 − s
    let u = 0.5 * s;
    let eps_p = 1.0 - u - u / (1.0 - u);
    let delta_at_eps = delta_p(eps_p, p)?;
    let convexity_gap = 2.0 * delta_at_eps - 0.5 * s;
    if !(convexity_gap > 0.0) {
        return Err(Error::computation(format!(
            "2 delta_p(eps_p) - (2 - x_p)/2 = {convexity_gap:e} is not positive"
        )));
    }
    // c'_p = 2 − min(s/2, gap) and c_p = max(x_p, c'_p) = c'_p since s/2 < s.
    let c_gap = u.min(convexity_gap);
    let c_prime = 2.0 - c_gap;
    let c_p = c_prime.max(x_p);
    if !(c_gap > 0.0 && c_gap < s) {
        return Err(Error::computation(format!(
            "c_p gap {c_gap:e} not inside (0, 2 - x_p)"
        )));
    }
    Ok(ConstantChain {
        p,
        q,
        x_p,
        x_gap: s,
        eps_p,
        delta_at_eps,
        convexity_gap,
        c_prime,
        c_p,
        c_gap,
        log_ratio: -(-0.5 * c_gap).ln_1p(),
        residual_h: h_excess_at_gap(s, q).abs(),
    })
}

/// Principal branch of Lambert W on `(0, ∞)`.
pub fn lambert_w(x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::input(format!("lambert_w needs a finite x > 0, got {x}")));
    }
    if x > std::f64::consts::E {
        return Ok(lambert_w_of_ln(x.ln()));
    }
    // Halley on w e^w − x from a log-based start.
    let mut w = x.ln_1p();
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w.abs() {
            break;
        }
    }
    Ok(w)
}

/// `W(e^{ln_x})` for `ln_x ≥ 1`, solving `w + ln w = ln_x` so that huge
/// arguments never overflow.
pub fn lambert_w_of_ln(ln_x: f64) -> f64 {
    debug_assert!(ln_x >= 1.0);
    let mut w = if ln_x > 3.0 { ln_x - ln_x.ln() } else { 0.5 + 0.5 * ln_x };
    for _ in 0..100 {
        let g = w + w.ln() - ln_x;
        let step = g / (1.0 + 1.0 / w);
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w {
            break;
        }
    }
    w
}

/// `log(2/c_p) · n / 2^n` together with the fugacity from which it applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityBound {
    pub n: u32,
    pub p: f64,
    pub c_p: f64,
    pub c_gap: f64,
    pub log_ratio: f64,
    pub bound: f64,
    /// `n^{-1} c_p^{-n}`.
    pub fugacity_threshold: f64,
}

/// Free-energy balance at a given fugacity: `z* = W(λ 2^n e^{2λ c_p^n})` and
/// the implied `α ≥ λ e^{−z*}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FugacityBound {
    pub fugacity: f64,
    pub z_star: f64,
    pub alpha_lower: f64,
}

impl DensityBound {
    pub fn at_fugacity(&self, lambda: f64) -> Result<FugacityBound> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::input(format!("fugacity must be positive, got {lambda}")));
        }
        let n = self.n as f64;
        let ln2 = std::f64::consts::LN_2;
        let c_pow_n = (n * (ln2 - self.log_ratio)).exp();
        let ln_arg = lambda.ln() + n * ln2 + 2.0 * lambda * c_pow_n;
        let z_star = if ln_arg >= 1.0 {
            lambert_w_of_ln(ln_arg)
        } else {
            lambert_w(ln_arg.exp())?
        };
        Ok(FugacityBound {
            fugacity: lambda,
            z_star,
            alpha_lower: lambda * (-z_star).exp(),
        })
    }
}

pub fn density_lower_bound(n: u32, p: f64) -> Result<DensityBound> {
    if n == 0 {
        return Err(Error::input("dimension n must be at least 1"));
    }
    let chain = compute_constant_chain(p)?;
    Ok(density_bound_from_chain(n, &chain))
}

pub fn density_bound_from_chain(n: u32, chain: &ConstantChain) -> DensityBound {
    let nf = n as f64;
    let ln2 = std::f64::consts::LN_2;
    DensityBound {
        n,
        p: chain.p,
        c_p: chain.c_p,
        c_gap: chain.c_gap,
        log_ratio: chain.log_ratio,
        bound: chain.log_ratio * nf * (-nf * ln2).exp(),
        fugacity_threshold: (-nf * (ln2 - chain.log_ratio)).exp() / nf,
    }
}

/// Pressure lower-bound formula `((log 2 + log(λ)/n)^2 / 2) · n^2 / 2^n`
/// (asymptotic; reported for context only).
pub fn pressure_bound_formula(n: u32, lambda: f64) -> f64 {
    let nf = n as f64;
    let t = std::f64::consts::LN_2 + lambda.ln() / nf;
    0.5 * t * t * nf * nf * (-nf * std::f64::consts::LN_2).exp()
}

/// Entropy-density reference `−log(2/c_p) · n`.
pub fn entropy_bound_formula(n: u32, chain: &ConstantChain) -> f64 {
    -chain.log_ratio * n as f64
}
