//! Grand canonical hard superball model.
//!
//! Configurations are finite sets of centers in a [`Region`] with pairwise
//! distance at least `2r`. The grand canonical weight of a `t`-point
//! configuration is `λ^t` with respect to Lebesgue measure, so
//! `Z = Σ_t λ^t Ẑ(t)` with `Ẑ(t) = (1/t!) ∫_{S^t} 1{packing}`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::constants::ConstantChain;
use crate::error::{Error, Result};
use crate::geometry::{BallSampler, Region, RegionSampler, SpaceParams};
use crate::seed::{derive_seed, rng_from_seed};

/// Space, region, fugacity and hard-core radius of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub space: SpaceParams,
    pub region: Region,
    pub fugacity: f64,
    /// Superball radius `r`; centers must be at least `2r` apart.
    pub radius: f64,
}

impl ModelParams {
    /// Model with the unit-volume radius `r_unit`.
    pub fn new(space: SpaceParams, region: Region, fugacity: f64) -> Result<Self> {
        let radius = space.r_unit();
        ModelParams::with_radius(space, region, fugacity, radius)
    }

    pub fn with_radius(space: SpaceParams, region: Region, fugacity: f64, radius: f64) -> Result<Self> {
        region.validate()?;
        if !(fugacity.is_finite() && fugacity > 0.0) {
            return Err(Error::input(format!("fugacity must be positive, got {fugacity}")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::input(format!("radius must be positive, got {radius}")));
        }
        let params = ModelParams { space, region, fugacity, radius };
        let v = params.volume();
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::input(format!("region volume must be positive and finite, got {v}")));
        }
        Ok(params)
    }

    pub fn at_fugacity(&self, fugacity: f64) -> Result<Self> {
        ModelParams::with_radius(self.space.clone(), self.region, fugacity, self.radius)
    }

    pub fn volume(&self) -> f64 {
        self.region.volume(&self.space)
    }

    pub fn exclusion(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// True when no two points of the region can be `2r` apart.
    pub fn holds_at_most_one(&self) -> bool {
        self.region.diameter(&self.space) < self.exclusion()
    }

    #[inline]
    fn conflict(&self, x: &[f64], y: &[f64]) -> bool {
        self.region.distance_raw(&self.space, x, y) < self.exclusion()
    }
}

/// A finite set of centers stored row-major.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Configuration {
    dim: usize,
    coords: Vec<f64>,
}

impl Configuration {
    pub fn new(dim: usize) -> Self {
        Configuration { dim, coords: Vec::new() }
    }

    pub fn from_centers(dim: usize, centers: &[Vec<f64>]) -> Result<Self> {
        let mut c = Configuration::new(dim);
        for x in centers {
            crate::error::check_dim(dim, x.len(), "center")?;
            c.coords.extend_from_slice(x);
        }
        Ok(c)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.coords.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centers(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim.max(1))
    }

    /// Smallest pairwise distance, `None` for fewer than two centers.
    pub fn min_pairwise_distance(&self, params: &ModelParams) -> Option<f64> {
        let t = self.len();
        let mut best: Option<f64> = None;
        for i in 0..t {
            for j in i + 1..t {
                let d = params.region.distance_raw(&params.space, self.center(i), self.center(j));
                best = Some(best.map_or(d, |b| b.min(d)));
            }
        }
        best
    }

    /// Exhaustive hard-core and membership check.
    pub fn is_packing(&self, params: &ModelParams) -> bool {
        self.centers().all(|x| params.region.contains_point(&params.space, x))
            && self
                .min_pairwise_distance(params)
                .is_none_or(|d| d >= params.exclusion())
    }
}

/// Uniform cell grid with cell side at least `2r`, so every conflicting
/// center sits in one of the `3^n` surrounding cells.
#[derive(Debug, Clone)]
struct CellGrid {
    dim: usize,
    per_dim: usize,
    width: f64,
    origin: f64,
    wrap: bool,
    cells: Vec<Vec<u32>>,
    offsets: Vec<i64>,
    num_offsets: usize,
}

const MAX_CELLS: usize = 1 << 22;

impl CellGrid {
    fn new(params: &ModelParams) -> Option<Self> {
        let n = params.dim();
        let (span, origin, wrap) = match params.region {
            Region::Torus { side } => (side, 0.0, true),
            Region::Ball { radius } => (2.0 * radius, -radius, false),
        };
        let mut per_dim = (span / params.exclusion()).floor() as usize;
        let cap = (MAX_CELLS as f64).powf(1.0 / n as f64).floor() as usize;
        per_dim = per_dim.min(cap);
        if per_dim < 3 || n > 12 {
            return None;
        }
        let total = per_dim.checked_pow(n as u32)?;
        let num_offsets = 3usize.pow(n as u32);
        let mut offsets = Vec::with_capacity(num_offsets * n);
        for k in 0..num_offsets {
            let mut rem = k;
            for _ in 0..n {
                offsets.push((rem % 3) as i64 - 1);
                rem /= 3;
            }
        }
        Some(CellGrid {
            dim: n,
            per_dim,
            width: span / per_dim as f64,
            origin,
            wrap,
            cells: vec![Vec::new(); total],
            offsets,
            num_offsets,
        })
    }

    fn coord(&self, x: f64) -> usize {
        let k = ((x - self.origin) / self.width).floor();
        if k < 0.0 {
            0
        } else {
            (k as usize).min(self.per_dim - 1)
        }
    }

    fn index_of(&self, x: &[f64]) -> usize {
        x.iter().rev().fold(0, |acc, &c| acc * self.per_dim + self.coord(c))
    }

    /// Calls `f` with every cell adjacent to (or equal to) the cell of `x`.
    /// Stops early when `f` returns true.
    fn any_neighbor_cell(&self, x: &[f64], mut f: impl FnMut(&[u32]) -> bool) -> bool {
        let m = self.per_dim as i64;
        let base: Vec<i64> = x.iter().map(|&c| self.coord(c) as i64).collect();
        'outer: for k in 0..self.num_offsets {
            let off = &self.offsets[k * self.dim..(k + 1) * self.dim];
            let mut idx = 0i64;
            for d in (0..self.dim).rev() {
                let mut c = base[d] + off[d];
                if self.wrap {
                    c = c.rem_euclid(m);
                } else if c < 0 || c >= m {
                    continue 'outer;
                }
                idx = idx * m + c;
            }
            if f(&self.cells[idx as usize]) {
                return true;
            }
        }
        false
    }
}

/// Mutable hard-core configuration with O(1) insert/remove and a cell list.
#[derive(Debug, Clone)]
struct HardCoreState {
    dim: usize,
    coords: Vec<f64>,
    cell: Vec<usize>,
    slot: Vec<usize>,
    grid: Option<CellGrid>,
}

impl HardCoreState {
    fn new(params: &ModelParams) -> Self {
        HardCoreState {
            dim: params.dim(),
            coords: Vec::new(),
            cell: Vec::new(),
            slot: Vec::new(),
            grid: CellGrid::new(params),
        }
    }

    fn len(&self) -> usize {
        self.cell.len()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn conflicts_brute(&self, params: &ModelParams, x: &[f64]) -> bool {
        (0..self.len()).any(|i| params.conflict(self.point(i), x))
    }

    fn conflicts(&self, params: &ModelParams, x: &[f64]) -> bool {
        match &self.grid {
            Some(grid) if self.len() > grid.num_offsets => grid.any_neighbor_cell(x, |members| {
                members
                    .iter()
                    .any(|&i| params.conflict(self.point(i as usize), x))
            }),
            _ => self.conflicts_brute(params, x),
        }
    }

    fn insert(&mut self, x: &[f64]) {
        let id = self.len();
        self.coords.extend_from_slice(x);
        match &mut self.grid {
            Some(grid) => {
                let c = grid.index_of(x);
                self.cell.push(c);
                self.slot.push(grid.cells[c].len());
                grid.cells[c].push(id as u32);
            }
            None => {
                self.cell.push(0);
                self.slot.push(0);
            }
        }
    }

    fn remove(&mut self, i: usize) {
        let last = self.len() - 1;
        if let Some(grid) = &mut self.grid {
            let (c, s) = (self.cell[i], self.slot[i]);
            grid.cells[c].swap_remove(s);
            if let Some(&moved) = grid.cells[c].get(s) {
                self.slot[moved as usize] = s;
            }
            if i != last {
                let (lc, ls) = (self.cell[last], self.slot[last]);
                grid.cells[lc][ls] = i as u32;
            }
        }
        if i != last {
            let (head, tail) = self.coords.split_at_mut(last * self.dim);
            head[i * self.dim..(i + 1) * self.dim].copy_from_slice(&tail[..self.dim]);
        }
        self.coords.truncate(last * self.dim);
        self.cell.swap_remove(i);
        self.slot.swap_remove(i);
    }

    fn to_configuration(&self) -> Configuration {
        Configuration { dim: self.dim, coords: self.coords.clone() }
    }
}

/// Run-length and estimator settings of one chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainOptions {
    pub steps: u64,
    pub burn_in: u64,
    /// Free-volume probes drawn per recorded sample.
    pub fv_probes: u32,
    /// Steps between free-volume samples.
    pub sample_interval: u64,
    pub batches: usize,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            steps: 100_000,
            burn_in: 10_000,
            fv_probes: 64,
            sample_interval: 10,
            batches: 32,
        }
    }
}

impl ChainOptions {
    pub fn validate(&self) -> Result<()> {
        if self.steps <= self.burn_in {
            return Err(Error::input(format!(
                "steps ({}) must exceed burn-in ({})",
                self.steps, self.burn_in
            )));
        }
        if self.sample_interval == 0 || self.fv_probes == 0 || self.batches < 2 {
            return Err(Error::input(
                "sample interval and probe count must be positive, batches at least 2",
            ));
        }
        Ok(())
    }
}

/// Monte Carlo outputs of one chain or of merged replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainEstimate {
    pub fugacity: f64,
    pub volume: f64,
    pub alpha_hat: f64,
    pub alpha_se: f64,
    pub fv_hat: f64,
    pub fv_se: f64,
    /// Mean of `|X|/V − λ·FV` over the free-volume samples.
    pub identity_residual: f64,
    /// Batch-means standard error of `identity_residual`.
    pub identity_se: f64,
    pub mean_count: f64,
    pub var_count: f64,
    pub var_count_se: f64,
    pub steps: u64,
    pub burn_in: u64,
    pub accepted_births: u64,
    pub accepted_deaths: u64,
    pub rejected: u64,
    pub final_count: usize,
    pub seed: u64,
    pub replicas: usize,
}

/// Streaming mean with batch-means standard error.
#[derive(Debug, Clone)]
struct BatchMeans {
    batch_size: u64,
    max_batches: usize,
    cur_sum: f64,
    cur_n: u64,
    means: Vec<f64>,
    sum: f64,
    sum_sq: f64,
    n: u64,
}

impl BatchMeans {
    fn new(total: u64, batches: usize) -> Self {
        BatchMeans {
            batch_size: (total / batches as u64).max(1),
            max_batches: batches,
            cur_sum: 0.0,
            cur_n: 0,
            means: Vec::with_capacity(batches),
            sum: 0.0,
            sum_sq: 0.0,
            n: 0,
        }
    }

    fn push(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
        self.n += 1;
        if self.means.len() < self.max_batches {
            self.cur_sum += x;
            self.cur_n += 1;
            if self.cur_n == self.batch_size {
                self.means.push(self.cur_sum / self.batch_size as f64);
                self.cur_sum = 0.0;
                self.cur_n = 0;
            }
        }
    }

    fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    fn variance(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let m = self.mean();
        (self.sum_sq / self.n as f64 - m * m).max(0.0)
    }

    fn se(&self) -> f64 {
        let k = self.means.len();
        if k >= 2 {
            let m = self.means.iter().sum::<f64>() / k as f64;
            let v = self.means.iter().map(|b| (b - m).powi(2)).sum::<f64>() / (k - 1) as f64;
            (v / k as f64).sqrt()
        } else if self.n >= 2 {
            (self.variance() / (self.n - 1) as f64).sqrt()
        } else {
            0.0
        }
    }
}

/// One recorded sample of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: u64,
    pub count: usize,
    pub fv_probe_hits: u32,
    pub probes: u32,
    pub birth: bool,
    pub accepted: bool,
}

/// Birth–death Metropolis chain; see [`run_chain_traced`].
pub fn run_chain(params: &ModelParams, opts: &ChainOptions, seed: u64) -> Result<ChainEstimate> {
    run_chain_traced(params, opts, seed, |_| {})
}

/// Runs the chain and hands every free-volume sample row to `trace`.
///
/// Each step proposes, with probability 1/2, a birth at a uniform point of
/// the region (accepted with probability `min(1, λV/(t+1))` when it respects
/// the hard core) and otherwise the death of a uniform existing center
/// (accepted with probability `min(1, t/(λV))`).
pub fn run_chain_traced(
    params: &ModelParams,
    opts: &ChainOptions,
    seed: u64,
    mut trace: impl FnMut(&TraceRow),
) -> Result<ChainEstimate> {
    Ok(run_chain_inner(params, opts, seed, &mut trace)?.0)
}

/// Runs the chain and also returns the final configuration.
pub fn run_chain_with_state(
    params: &ModelParams,
    opts: &ChainOptions,
    seed: u64,
) -> Result<(ChainEstimate, Configuration)> {
    run_chain_inner(params, opts, seed, &mut |_| {})
}

fn run_chain_inner(
    params: &ModelParams,
    opts: &ChainOptions,
    seed: u64,
    trace: &mut dyn FnMut(&TraceRow),
) -> Result<(ChainEstimate, Configuration)> {
    opts.validate()?;
    let n = params.dim();
    let lv = params.fugacity * params.volume();
    let sampler = RegionSampler::new(&params.space, params.region);
    let mut rng = rng_from_seed(seed);
    let mut state = HardCoreState::new(params);
    let mut x = vec![0.0; n];

    let recorded = opts.steps - opts.burn_in;
    let mut counts = BatchMeans::new(recorded, opts.batches);
    let mut counts_sq = BatchMeans::new(recorded, opts.batches);
    let mut fv = BatchMeans::new(recorded / opts.sample_interval, opts.batches);
    // paired with the count at the same step, so the correlation is kept
    let mut residual = BatchMeans::new(recorded / opts.sample_interval, opts.batches);
    let volume = params.volume();
    let (mut births, mut deaths, mut rejected) = (0u64, 0u64, 0u64);

    for step in 0..opts.steps {
        let birth = rng.random::<bool>();
        let u: f64 = rng.random();
        let t = state.len();
        let accepted = if birth {
            sampler.sample_into(&mut rng, &mut x);
            let ok = u * (t as f64 + 1.0) < lv && !state.conflicts(params, &x);
            if ok {
                debug_assert!(!state.conflicts_brute(params, &x), "cell list missed a conflict");
                state.insert(&x);
            }
            ok
        } else if t > 0 {
            let i = rng.random_range(0..t);
            let ok = u * lv < t as f64;
            if ok {
                state.remove(i);
            }
            ok
        } else {
            false
        };
        match (accepted, birth) {
            (true, true) => births += 1,
            (true, false) => deaths += 1,
            (false, _) => rejected += 1,
        }
        if step < opts.burn_in {
            continue;
        }
        let c = state.len() as f64;
        counts.push(c);
        counts_sq.push(c * c);
        let since = step - opts.burn_in + 1;
        if since.is_multiple_of(opts.sample_interval) {
            let mut hits = 0u32;
            for _ in 0..opts.fv_probes {
                sampler.sample_into(&mut rng, &mut x);
                if !state.conflicts(params, &x) {
                    hits += 1;
                }
            }
            let f = hits as f64 / opts.fv_probes as f64;
            fv.push(f);
            residual.push(c / volume - params.fugacity * f);
            trace(&TraceRow {
                step,
                count: state.len(),
                fv_probe_hits: hits,
                probes: opts.fv_probes,
                birth,
                accepted,
            });
        }
    }

    let mean = counts.mean();
    let estimate = ChainEstimate {
        fugacity: params.fugacity,
        volume,
        alpha_hat: mean / volume,
        alpha_se: counts.se() / volume,
        fv_hat: fv.mean(),
        fv_se: fv.se(),
        identity_residual: residual.mean(),
        identity_se: residual.se(),
        mean_count: mean,
        var_count: counts.variance(),
        var_count_se: counts_sq.se().hypot(2.0 * mean * counts.se()),
        steps: opts.steps,
        burn_in: opts.burn_in,
        accepted_births: births,
        accepted_deaths: deaths,
        rejected,
        final_count: state.len(),
        seed,
        replicas: 1,
    };
    Ok((estimate, state.to_configuration()))
}

/// Equal-weight merge of independent replicas at the same parameters.
pub fn merge_estimates(parts: &[ChainEstimate]) -> Result<ChainEstimate> {
    let first = parts
        .first()
        .ok_or_else(|| Error::input("cannot merge an empty list of estimates"))?;
    let k = parts.len() as f64;
    let avg = |f: fn(&ChainEstimate) -> f64| parts.iter().map(f).sum::<f64>() / k;
    let pooled = |f: fn(&ChainEstimate) -> f64| parts.iter().map(|e| f(e).powi(2)).sum::<f64>().sqrt() / k;
    Ok(ChainEstimate {
        fugacity: first.fugacity,
        volume: first.volume,
        alpha_hat: avg(|e| e.alpha_hat),
        alpha_se: pooled(|e| e.alpha_se),
        fv_hat: avg(|e| e.fv_hat),
        fv_se: pooled(|e| e.fv_se),
        identity_residual: avg(|e| e.identity_residual),
        identity_se: pooled(|e| e.identity_se),
        mean_count: avg(|e| e.mean_count),
        var_count: avg(|e| e.var_count),
        var_count_se: pooled(|e| e.var_count_se),
        steps: parts.iter().map(|e| e.steps).sum(),
        burn_in: parts.iter().map(|e| e.burn_in).sum(),
        accepted_births: parts.iter().map(|e| e.accepted_births).sum(),
        accepted_deaths: parts.iter().map(|e| e.accepted_deaths).sum(),
        rejected: parts.iter().map(|e| e.rejected).sum(),
        final_count: first.final_count,
        seed: first.seed,
        replicas: parts.iter().map(|e| e.replicas).sum(),
    })
}

/// Runs `replicas` chains with seeds derived from `base_seed`, in parallel.
/// Returns the per-replica estimates in replica order.
pub fn run_replicas(
    params: &ModelParams,
    opts: &ChainOptions,
    base_seed: u64,
    replicas: usize,
) -> Result<Vec<ChainEstimate>> {
    if replicas == 0 {
        return Err(Error::input("need at least one replica"));
    }
    if replicas == 1 {
        return Ok(vec![run_chain(params, opts, base_seed)?]);
    }
    (0..replicas)
        .into_par_iter()
        .map(|i| run_chain(params, opts, derive_seed(base_seed, i as u64)))
        .collect()
}

/// Independent chains along an increasing fugacity grid.
pub fn estimate_alpha_curve(
    params: &ModelParams,
    fugacities: &[f64],
    opts: &ChainOptions,
    seed: u64,
) -> Result<Vec<(f64, ChainEstimate)>> {
    if fugacities.is_empty() {
        return Err(Error::input("fugacity grid is empty"));
    }
    if fugacities.windows(2).any(|w| !(w[1] > w[0])) || !(fugacities[0] > 0.0) {
        return Err(Error::input("fugacity grid must be positive and strictly increasing"));
    }
    fugacities
        .par_iter()
        .enumerate()
        .map(|(i, &lam)| {
            let p = params.at_fugacity(lam)?;
            Ok((lam, run_chain(&p, opts, derive_seed(seed, i as u64))?))
        })
        .collect()
}

/// Largest statistically significant decrease along an α curve:
/// `max_i (α̂_i − α̂_{i+1}) / (3·(SE_i + SE_{i+1}))`. Values ≤ 1 mean the
/// curve is nondecreasing within noise.
pub fn monotonicity_excess(curve: &[(f64, ChainEstimate)]) -> f64 {
    curve
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0].1, &w[1].1);
            let tol = 3.0 * (a.alpha_se + b.alpha_se);
            if tol > 0.0 {
                (a.alpha_hat - b.alpha_hat) / tol
            } else if a.alpha_hat > b.alpha_hat {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Finite-difference check of `λ V dα/dλ = Var(|X|)` between consecutive
/// grid points: `(slope-based variance, mean of var_count, combined SE)`.
pub fn variance_identity(curve: &[(f64, ChainEstimate)]) -> Vec<(f64, f64, f64)> {
    curve
        .windows(2)
        .map(|w| {
            let ((l1, a), (l2, b)) = (&w[0], &w[1]);
            let ln_step = (l2 / l1).ln();
            // dα/d(log λ) · V = Var(|X|); the log-step centred difference
            let slope = (b.alpha_hat - a.alpha_hat) / ln_step * a.volume;
            let slope_se = a.alpha_se.hypot(b.alpha_se) / ln_step * a.volume;
            let var = 0.5 * (a.var_count + b.var_count);
            let var_se = 0.5 * a.var_count_se.hypot(b.var_count_se);
            (slope, var, slope_se.hypot(var_se))
        })
        .collect()
}

/// How a partition-function value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMethod {
    Exact,
    Quadrature,
    MonteCarlo,
}

/// `Ẑ(t)` with its uncertainty. `ln_value` stays finite where `value` would
/// overflow; it is `-inf` when `Ẑ(t) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionValue {
    pub t: usize,
    pub value: f64,
    pub ln_value: f64,
    pub se: f64,
    pub method: PartitionMethod,
}

impl PartitionValue {
    fn exact_ln(t: usize, ln_value: f64) -> Self {
        PartitionValue {
            t,
            value: ln_value.exp(),
            ln_value,
            se: 0.0,
            method: PartitionMethod::Exact,
        }
    }
}

/// Settings for the non-closed-form regimes of [`canonical_partition`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionOptions {
    pub mc_samples: u64,
    pub seed: u64,
    /// Rough number of grid tuples the quadrature may visit.
    pub quadrature_budget: f64,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        PartitionOptions { mc_samples: 1_000_000, seed: 0, quadrature_budget: 5e7 }
    }
}

fn ln_factorial(t: usize) -> f64 {
    ln_gamma(t as f64 + 1.0)
}

/// Closed-form `ln Ẑ(t)` for one-dimensional models.
fn ln_z_1d(t: usize, params: &ModelParams) -> f64 {
    let sigma = params.exclusion();
    match params.region {
        // interval of length L: (L − (t−1)σ)_+^t / t!
        Region::Ball { radius } => {
            let free = 2.0 * radius - (t as f64 - 1.0) * sigma;
            if t == 0 {
                0.0
            } else if free <= 0.0 {
                f64::NEG_INFINITY
            } else {
                t as f64 * free.ln() - ln_factorial(t)
            }
        }
        // ring of length L: L (L − tσ)_+^{t−1} / t!
        Region::Torus { side } => match t {
            0 => 0.0,
            1 => side.ln(),
            _ => {
                let free = side - t as f64 * sigma;
                if free < 0.0 || (free == 0.0 && t > 1) {
                    f64::NEG_INFINITY
                } else {
                    side.ln() + (t as f64 - 1.0) * free.ln() - ln_factorial(t)
                }
            }
        },
    }
}

/// Largest `t` with `Ẑ(t) > 0`, when it is known exactly.
fn max_packable(params: &ModelParams) -> Option<usize> {
    if params.holds_at_most_one() {
        return Some(1);
    }
    if params.dim() != 1 {
        return None;
    }
    let sigma = params.exclusion();
    Some(match params.region {
        Region::Ball { radius } => ((2.0 * radius) / sigma).floor() as usize + 1,
        Region::Torus { side } => {
            let m = (side / sigma).floor() as usize;
            // t = m with zero slack is a null set
            if (m as f64) * sigma == side { m.saturating_sub(1).max(1) } else { m }
        }
    })
}

/// `Ẑ(t)`, the canonical partition function.
///
/// Exact for `t ≤ 1`, for regions too small to hold two centers, for one
/// dimension (hard rods on an interval or ring) and for `t = 2` on a torus
/// wide enough that `B(x, 2r)` does not wrap. Otherwise midpoint quadrature
/// when `n ≤ 2` and `t ≤ 4`, else the Monte Carlo packing-probability
/// estimator `P̂ · V^t / t!`.
pub fn canonical_partition(t: usize, params: &ModelParams, opts: &PartitionOptions) -> Result<PartitionValue> {
    let v = params.volume();
    if t == 0 {
        return Ok(PartitionValue::exact_ln(0, 0.0));
    }
    if t == 1 {
        return Ok(PartitionValue::exact_ln(1, v.ln()));
    }
    if params.holds_at_most_one() {
        return Ok(PartitionValue::exact_ln(t, f64::NEG_INFINITY));
    }
    if params.dim() == 1 {
        return Ok(PartitionValue::exact_ln(t, ln_z_1d(t, params)));
    }
    if let (2, Region::Torus { side }) = (t, params.region) {
        if 4.0 * params.radius <= side {
            let excluded = params.space.ball_volume(params.exclusion());
            return Ok(PartitionValue::exact_ln(2, v.ln() + (v - excluded).ln() - 2f64.ln()));
        }
    }
    if params.dim() <= 2 && t <= 4 {
        return Ok(quadrature_partition(t, params, opts.quadrature_budget));
    }
    mc_partition(t, params, opts)
}

fn mc_partition(t: usize, params: &ModelParams, opts: &PartitionOptions) -> Result<PartitionValue> {
    if opts.mc_samples == 0 {
        return Err(Error::input("Monte Carlo partition estimate needs samples > 0"));
    }
    let p = packing_probability(t, params, opts.mc_samples, opts.seed);
    let ln_scale = t as f64 * params.volume().ln() - ln_factorial(t);
    let scale = ln_scale.exp();
    Ok(PartitionValue {
        t,
        value: p.probability * scale,
        ln_value: p.probability.ln() + ln_scale,
        se: p.se * scale,
        method: PartitionMethod::MonteCarlo,
    })
}

fn quadrature_partition(t: usize, params: &ModelParams, budget: f64) -> PartitionValue {
    let n = params.dim();
    let torus = matches!(params.region, Region::Torus { .. });
    // On a torus the first center is pinned at the origin by translation invariance.
    let free = if torus { t - 1 } else { t };
    let k_fact = (1..=free).product::<usize>() as f64;
    let grid = ((budget * k_fact).powf(1.0 / (n * free) as f64).floor() as usize).clamp(4, 4096);
    let (lo, span) = match params.region {
        Region::Torus { side } => (0.0, side),
        Region::Ball { radius } => (-radius, 2.0 * radius),
    };
    let h = span / grid as f64;
    let cell_vol = h.powi(n as i32);
    let mut pts: Vec<Vec<f64>> = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let x: Vec<f64> = idx.iter().map(|&i| lo + (i as f64 + 0.5) * h).collect();
        if params.region.contains_point(&params.space, &x) {
            pts.push(x);
        }
        let mut d = 0;
        while d < n {
            idx[d] += 1;
            if idx[d] < grid {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == n {
            break;
        }
    }
    let origin = vec![0.0; n];
    let mut chosen: Vec<usize> = Vec::with_capacity(free);
    fn count(
        start: usize,
        left: usize,
        pts: &[Vec<f64>],
        chosen: &mut Vec<usize>,
        anchor: Option<&[f64]>,
        params: &ModelParams,
    ) -> u64 {
        if left == 0 {
            return 1;
        }
        let mut total = 0;
        for i in start..pts.len() {
            let x = &pts[i];
            if anchor.is_some_and(|a| params.conflict(a, x)) {
                continue;
            }
            if chosen.iter().any(|&j| params.conflict(&pts[j], x)) {
                continue;
            }
            chosen.push(i);
            total += count(i + 1, left - 1, pts, chosen, anchor, params);
            chosen.pop();
        }
        total
    }
    let anchor = if torus { Some(origin.as_slice()) } else { None };
    let unordered = count(0, free, &pts, &mut chosen, anchor, params) as f64;
    // (1/t!)·(ordered tuples)·cell_vol^free, with an extra factor V when pinned
    let ln_value = if unordered == 0.0 {
        f64::NEG_INFINITY
    } else if torus {
        params.volume().ln() + unordered.ln() + free as f64 * cell_vol.ln() - (t as f64).ln()
    } else {
        unordered.ln() + free as f64 * cell_vol.ln()
    };
    PartitionValue {
        t,
        value: ln_value.exp(),
        ln_value,
        se: f64::NAN,
        method: PartitionMethod::Quadrature,
    }
}

/// Probability that `t` i.i.d. uniform points of the region form a packing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PackingProbability {
    pub t: usize,
    pub samples: u64,
    pub successes: u64,
    pub probability: f64,
    pub se: f64,
}

const PROBABILITY_CHUNKS: u64 = 64;

/// Monte Carlo packing probability, `Ẑ(t) t! / V^t`. The sample budget is
/// split into fixed chunks with derived seeds so the result does not depend
/// on the thread count.
pub fn packing_probability(t: usize, params: &ModelParams, samples: u64, seed: u64) -> PackingProbability {
    let n = params.dim();
    let chunk = samples.div_ceil(PROBABILITY_CHUNKS);
    let successes: u64 = (0..PROBABILITY_CHUNKS)
        .into_par_iter()
        .map(|c| {
            let lo = c * chunk;
            let hi = ((c + 1) * chunk).min(samples);
            if lo >= hi {
                return 0;
            }
            let sampler = RegionSampler::new(&params.space, params.region);
            let mut rng = rng_from_seed(derive_seed(seed, c));
            let mut pts = vec![0.0; t * n];
            let mut hits = 0;
            for _ in lo..hi {
                let mut ok = true;
                for i in 0..t {
                    let (head, tail) = pts.split_at_mut(i * n);
                    let x = &mut tail[..n];
                    sampler.sample_into(&mut rng, x);
                    if head.chunks_exact(n).any(|y| params.conflict(y, x)) {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let p = successes as f64 / samples as f64;
    PackingProbability {
        t,
        samples,
        successes,
        probability: p,
        se: (p * (1.0 - p) / samples as f64).sqrt(),
    }
}

/// `Z` together with the exact count moments it implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrandPartition {
    pub fugacity: f64,
    pub volume: f64,
    pub t_max: usize,
    pub ln_z: f64,
    /// True when every term came from a closed form.
    pub exact: bool,
    pub mean_count: f64,
    pub var_count: f64,
    /// `E|X| / V`.
    pub density: f64,
}

/// `Z = Σ_{t ≤ t_max} λ^t Ẑ(t)` in log space.
///
/// Terms beyond `t_max` must vanish (known packing limit) or be negligible:
/// the bound `λ^t V^t / t!` at `t_max + 1` has to be below `1e−15` with a
/// geometric ratio below 1/2.
pub fn grand_partition(params: &ModelParams, t_max: usize, opts: &PartitionOptions) -> Result<GrandPartition> {
    let lam = params.fugacity;
    let v = params.volume();
    let limit = max_packable(params);
    let covered = limit.is_some_and(|m| m <= t_max);
    if !covered {
        let t1 = (t_max + 1) as f64;
        let ln_tail = t1 * (lam * v).ln() - ln_gamma(t1 + 1.0);
        if ln_tail >= (1e-15f64).ln() || lam * v / (t1 + 1.0) >= 0.5 {
            return Err(Error::computation(format!(
                "tail of the grand partition sum is not negligible at t_max = {t_max}; increase t_max"
            )));
        }
    }
    let top = limit.map_or(t_max, |m| m.min(t_max));
    let mut ln_terms = Vec::with_capacity(top + 1);
    let mut exact = true;
    for t in 0..=top {
        let z = canonical_partition(t, params, &PartitionOptions { seed: derive_seed(opts.seed, t as u64), ..*opts })?;
        exact &= z.method == PartitionMethod::Exact;
        ln_terms.push(t as f64 * lam.ln() + z.ln_value);
    }
    let peak = ln_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (t, &lt) in ln_terms.iter().enumerate() {
        let w = (lt - peak).exp();
        s0 += w;
        s1 += t as f64 * w;
        s2 += (t * t) as f64 * w;
    }
    let mean = s1 / s0;
    Ok(GrandPartition {
        fugacity: lam,
        volume: v,
        t_max: top,
        ln_z: peak + s0.ln(),
        exact,
        mean_count: mean,
        var_count: (s2 / s0 - mean * mean).max(0.0),
        density: mean / v,
    })
}

/// Exact grand partition when a closed form covers every term.
pub fn exact_grand_partition(params: &ModelParams) -> Result<GrandPartition> {
    let limit = max_packable(params).ok_or_else(|| {
        Error::input("no closed form: exact grand partition needs n = 1 or a region holding at most one center")
    })?;
    grand_partition(params, limit, &PartitionOptions::default())
}

/// One sampled `u` in the intersection-volume check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectionCase {
    /// `‖u‖ / r`.
    pub u_norm: f64,
    /// Estimated `vol(B(u, 2r) ∩ B(0, ‖u‖))` in units of `vol(B(0, r))`.
    pub estimate: f64,
    pub se: f64,
    pub bound: f64,
    pub passed: bool,
    /// Whether the containment in `B(u/2, c'_p r)` was tested (`‖u‖ ≥ x_p r`).
    pub containment_checked: bool,
    pub containment_violations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionReport {
    pub p: f64,
    pub n: usize,
    pub c_p_pow_n: f64,
    pub samples_per_u: u64,
    pub cases: Vec<IntersectionCase>,
    pub all_passed: bool,
    pub max_excess: f64,
}

/// Monte Carlo check of `vol(B(u, 2r) ∩ B(0, ‖u‖)) ≤ c_p^n` (volumes in
/// units of `vol(B(0, r))`) for `trials` uniform `u ∈ B(0, 2r)`, plus the
/// containment of the intersection in `B(u/2, c'_p r)` when `‖u‖ ≥ x_p r`.
/// A case passes when the estimate is at most `c_p^n + 3·SE`.
pub fn intersection_volume_check(
    space: &SpaceParams,
    chain: &ConstantChain,
    trials: usize,
    samples_per_u: u64,
    seed: u64,
) -> Result<IntersectionReport> {
    let n = space.dim();
    if n > 8 {
        return Err(Error::input(format!("intersection check supports n ≤ 8, got {n}")));
    }
    if samples_per_u == 0 || trials == 0 {
        return Err(Error::input("trials and samples per u must be positive"));
    }
    if (chain.p - space.p()).abs() > 1e-15 {
        return Err(Error::input("constant chain was computed for a different p"));
    }
    let r = 1.0;
    let bound = chain.c_pow(n as u32);
    let ball_2r = 2f64.powi(n as i32);
    let sampler = BallSampler::new(space);
    let origin = vec![0.0; n];
    let cases: Vec<IntersectionCase> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(derive_seed(seed, k as u64));
            let mut u = vec![0.0; n];
            sampler.sample_into(&mut rng, &origin, 2.0 * r, &mut u);
            let un = space.norm_raw(&u);
            let check_containment = un >= chain.x_p * r;
            let half: Vec<f64> = u.iter().map(|c| 0.5 * c).collect();
            let reach = chain.c_prime * r * (1.0 + 1e-12);
            let mut x = vec![0.0; n];
            let mut hits = 0u64;
            let mut violations = 0u64;
            for _ in 0..samples_per_u {
                sampler.sample_into(&mut rng, &u, 2.0 * r, &mut x);
                if space.norm_raw(&x) <= un {
                    hits += 1;
                    if check_containment && space.flat_distance_raw(&x, &half) > reach {
                        violations += 1;
                    }
                }
            }
            let f = hits as f64 / samples_per_u as f64;
            let estimate = ball_2r * f;
            let se = ball_2r * (f * (1.0 - f) / samples_per_u as f64).sqrt();
            IntersectionCase {
                u_norm: un / r,
                estimate,
                se,
                bound,
                passed: estimate <= bound + 3.0 * se && violations == 0,
                containment_checked: check_containment,
                containment_violations: violations,
            }
        })
        .collect();
    let all_passed = cases.iter().all(|c| c.passed);
    let max_excess = cases
        .iter()
        .map(|c| c.estimate - c.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(IntersectionReport {
        p: space.p(),
        n,
        c_p_pow_n: bound,
        samples_per_u,
        cases,
        all_passed,
        max_excess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BlockSpec;

    fn line(p: f64) -> SpaceParams {
        SpaceParams::new(p, BlockSpec::euclidean(1).unwrap()).unwrap()
    }

    #[test]
    fn state_insert_remove_keeps_cells_consistent() {
        use rand::SeedableRng;
        let space = SpaceParams::from_cuts(1.5, vec![0, 1, 2]).unwrap();
        let params = ModelParams::with_radius(space, Region::Torus { side: 10.0 }, 1.0, 0.5).unwrap();
        let mut st = HardCoreState::new(&params);
        assert!(st.grid.is_some());
        for i in 0..5 {
            for j in 0..5 {
                let p = [0.3 + 2.0 * i as f64, 9.7 - 2.0 * j as f64];
                assert!(!st.conflicts(&params, &p));
                st.insert(&p);
            }
        }
        // (0.3, 9.7) and (8.3, 9.7) are 2 apart only through the wrap
        assert!(st.conflicts(&params, &[9.6, 9.9]));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for k in 0..2000 {
            if k % 97 == 0 && st.len() > 12 {
                let i = rng.random_range(0..st.len());
                st.remove(i);
            }
            let x = [rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0];
            assert_eq!(st.conflicts(&params, &x), st.conflicts_brute(&params, &x));
        }
        let grid = st.grid.as_ref().unwrap();
        for (i, (&c, &s)) in st.cell.iter().zip(&st.slot).enumerate() {
            assert_eq!(grid.cells[c][s] as usize, i);
            assert_eq!(grid.index_of(st.point(i)), c);
        }
        assert_eq!(grid.cells.iter().map(Vec::len).sum::<usize>(), st.len());
    }

    #[test]
    fn tonks_closed_forms() {
        let params = ModelParams::with_radius(line(2.0), Region::Ball { radius: 5.0 }, 1.0, 0.5).unwrap();
        let z3 = canonical_partition(3, &params, &PartitionOptions::default()).unwrap();
        assert!((z3.value - 512.0 / 6.0).abs() < 1e-10);
        assert_eq!(z3.method, PartitionMethod::Exact);
        let z0 = canonical_partition(0, &params, &PartitionOptions::default()).unwrap();
        assert_eq!(z0.value, 1.0);
        let z1 = canonical_partition(1, &params, &PartitionOptions::default()).unwrap();
        assert!((z1.value - 10.0).abs() < 1e-12);
        let z12 = canonical_partition(12, &params, &PartitionOptions::default()).unwrap();
        assert_eq!(z12.value, 0.0);

        let g = exact_grand_partition(&params).unwrap();
        let direct: f64 = (0..=11)
            .map(|t| {
                let free: f64 = 10.0 - (t as f64 - 1.0);
                if t == 0 {
                    1.0
                } else {
                    free.powi(t) / (1..=t as usize).product::<usize>() as f64
                }
            })
            .sum();
        assert!((g.ln_z - direct.ln()).abs() < 1e-12);
        assert!(g.ln_z <= 10.0);
    }

    #[test]
    fn ring_closed_form_matches_monte_carlo() {
        let params = ModelParams::with_radius(line(2.0), Region::Torus { side: 6.0 }, 1.0, 0.5).unwrap();
        let exact = canonical_partition(3, &params, &PartitionOptions::default()).unwrap();
        assert!((exact.value - 6.0 * 9.0 / 6.0).abs() < 1e-12);
        let mc = mc_partition(3, &params, &PartitionOptions { mc_samples: 400_000, ..Default::default() }).unwrap();
        assert!((mc.value - exact.value).abs() < 4.0 * mc.se, "{} vs {}", mc.value, exact.value);
    }

    #[test]
    fn tiny_region_partition() {
        let space = SpaceParams::from_cuts(1.5, vec![0, 1, 2]).unwrap();
        let params = ModelParams::with_radius(space, Region::Torus { side: 1.0 }, 0.7, 1.0).unwrap();
        assert!(params.holds_at_most_one());
        let g = exact_grand_partition(&params).unwrap();
        assert!((g.ln_z - (1.0f64 + 0.7).ln()).abs() < 1e-15);
    }

    #[test]
    fn torus_pair_formula_matches_quadrature_and_mc() {
        let space = SpaceParams::from_cuts(1.5, vec![0, 1, 2]).unwrap();
        let r = space.r_unit();
        let params = ModelParams::new(space, Region::Torus { side: 5.0 * r }, 1.0).unwrap();
        let exact = canonical_partition(2, &params, &PartitionOptions::default()).unwrap();
        assert_eq!(exact.method, PartitionMethod::Exact);
        let quad = quadrature_partition(2, &params, 1e6);
        assert!((quad.value / exact.value - 1.0).abs() < 0.02, "{} vs {}", quad.value, exact.value);
        let mc = mc_partition(2, &params, &PartitionOptions { mc_samples: 200_000, ..Default::default() }).unwrap();
        assert!((mc.value - exact.value).abs() < 4.0 * mc.se);
    }

    #[test]
    fn quadrature_three_points_agrees_with_mc() {
        let space = SpaceParams::from_cuts(2.0, vec![0, 2]).unwrap();
        let r = space.r_unit();
        let params = ModelParams::new(space, Region::Ball { radius: 4.0 * r }, 1.0).unwrap();
        let quad = canonical_partition(3, &params, &PartitionOptions { quadrature_budget: 2e7, ..Default::default() }).unwrap();
        assert_eq!(quad.method, PartitionMethod::Quadrature);
        let mc = mc_partition(3, &params, &PartitionOptions { mc_samples: 400_000, ..Default::default() }).unwrap();
        assert!((quad.value / mc.value - 1.0).abs() < 0.05, "{} vs {}", quad.value, mc.value);
    }

    #[test]
    fn chain_is_reproducible_and_counters_add_up() {
        let params = ModelParams::with_radius(line(2.0), Region::Torus { side: 20.0 }, 1.0, 0.5).unwrap();
        let opts = ChainOptions { steps: 20_000, burn_in: 1_000, ..Default::default() };
        let a = run_chain(&params, &opts, 9).unwrap();
        let b = run_chain(&params, &opts, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.accepted_births + a.accepted_deaths + a.rejected, a.steps);
        assert_eq!(a.accepted_births - a.accepted_deaths, a.final_count as u64);
        assert!(a.fv_hat >= 0.0 && a.fv_hat <= 1.0 && a.alpha_hat >= 0.0);
        let c = run_chain(&params, &opts, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn final_state_is_a_packing() {
        let space = SpaceParams::from_cuts(1.5, vec![0, 1, 3]).unwrap();
        let r = space.r_unit();
        for region in [Region::Torus { side: 8.0 * r }, Region::Ball { radius: 5.0 * r }] {
            let params = ModelParams::new(space.clone(), region, 3.0).unwrap();
            let opts = ChainOptions { steps: 30_000, burn_in: 0, ..Default::default() };
            let (est, cfg) = run_chain_with_state(&params, &opts, 4).unwrap();
            assert_eq!(cfg.len(), est.final_count);
            assert!(cfg.is_packing(&params));
            assert!(est.final_count > 5);
        }
    }

    #[test]
    fn two_state_chain_matches_poisson_weights() {
        // ring too short for two rods: states are {0, 1}
        let params = ModelParams::with_radius(line(2.0), Region::Torus { side: 1.5 }, 0.8, 0.5).unwrap();
        assert!(params.holds_at_most_one());
        let opts = ChainOptions { steps: 400_000, burn_in: 1_000, ..Default::default() };
        let est = run_chain(&params, &opts, 3).unwrap();
        let lv = 0.8 * 1.5;
        let p1 = lv / (1.0 + lv);
        let se = est.alpha_se * params.volume();
        assert!((est.mean_count - p1).abs() < 3.0 * se, "{} vs {p1} (se {se})", est.mean_count);
    }

    #[test]
    fn low_fugacity_is_nearly_empty() {
        let params = ModelParams::with_radius(line(2.0), Region::Torus { side: 4.0 }, 1e-6, 0.5).unwrap();
        let est = run_chain(&params, &ChainOptions::default(), 1).unwrap();
        assert!(est.alpha_hat < 1e-3);
        assert!(est.fv_hat > 0.99);
    }

    #[test]
    fn merge_averages() {
        let params = ModelParams::with_radius(line(2.0), Region::Torus { side: 20.0 }, 1.0, 0.5).unwrap();
        let opts = ChainOptions { steps: 5_000, burn_in: 500, ..Default::default() };
        let reps = run_replicas(&params, &opts, 1, 4).unwrap();
        let m = merge_estimates(&reps).unwrap();
        let avg = reps.iter().map(|e| e.alpha_hat).sum::<f64>() / 4.0;
        assert!((m.alpha_hat - avg).abs() < 1e-15);
        assert_eq!(m.replicas, 4);
        assert_eq!(m.steps, 20_000);
        assert!(m.alpha_se < reps.iter().map(|e| e.alpha_se).fold(0.0, f64::max));
    }

    #[test]
    fn option_validation() {
        let params = ModelParams::with_radius(line(2.0), Region::Torus { side: 20.0 }, 1.0, 0.5).unwrap();
        let bad = ChainOptions { steps: 10, burn_in: 10, ..Default::default() };
        assert!(matches!(run_chain(&params, &bad, 0), Err(Error::InvalidInput(_))));
        assert!(ModelParams::with_radius(line(2.0), Region::Torus { side: 0.0 }, 1.0, 0.5).is_err());
        assert!(ModelParams::with_radius(line(2.0), Region::Torus { side: 2.0 }, -1.0, 0.5).is_err());
    }
}
