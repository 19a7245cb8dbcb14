//! Mixed `ℓ_{p,k}` geometry.
//!
//! A [`BlockSpec`] cuts `R^n` into consecutive coordinate blocks. The norm of
//! a vector is the `ℓ_p` combination of the Euclidean norms of its blocks:
//!
//! ```text
//! ‖x‖ = ( Σ_j ‖x_j‖_2^p )^{1/p}
//! ```
//!
//! With a single block this is the Euclidean norm, with singleton blocks it
//! is the ordinary `ℓ_p` norm. The norm is monotone in every `|x_i|`, which is
//! what makes minimum-image torus distances, sup-norm cell lists and the
//! farthest-corner cube test exact.

use std::fmt;
use std::ops::{Deref, Range};

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{check_dim, Error, Result};

/// Strictly increasing cut sequence `0 = k_1 < k_2 < … < k_{m+1} = n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct BlockSpec {
    cuts: Vec<usize>,
}

impl BlockSpec {
    pub fn new(cuts: Vec<usize>) -> Result<Self> {
        if cuts.len() < 2 {
            return Err(Error::input("cuts need at least two entries (0 and n)"));
        }
        if cuts[0] != 0 {
            return Err(Error::input(format!("cuts must start at 0, got {}", cuts[0])));
        }
        if let Some(w) = cuts.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::input(format!(
                "cuts must be strictly increasing, found {} then {}",
                w[0], w[1]
            )));
        }
        Ok(BlockSpec { cuts })
    }

    /// One Euclidean block covering all of `R^n`.
    pub fn euclidean(n: usize) -> Result<Self> {
        BlockSpec::new(vec![0, n])
    }

    /// `n` singleton blocks, i.e. the plain `ℓ_p` norm.
    pub fn singletons(n: usize) -> Result<Self> {
        BlockSpec::new((0..=n).collect())
    }

    pub fn cuts(&self) -> &[usize] {
        &self.cuts
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        *self.cuts.last().expect("validated non-empty")
    }

    pub fn num_blocks(&self) -> usize {
        self.cuts.len() - 1
    }

    pub fn block_dims(&self) -> impl Iterator<Item = usize> + '_ {
        self.cuts.windows(2).map(|w| w[1] - w[0])
    }

    pub fn blocks(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.cuts.windows(2).map(|w| w[0]..w[1])
    }
}

impl TryFrom<Vec<usize>> for BlockSpec {
    type Error = Error;

    fn try_from(cuts: Vec<usize>) -> Result<Self> {
        BlockSpec::new(cuts)
    }
}

impl From<BlockSpec> for Vec<usize> {
    fn from(b: BlockSpec) -> Self {
        b.cuts
    }
}

impl fmt::Display for BlockSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.cuts.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// A point of `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn origin(n: usize) -> Self {
        Point(vec![0.0; n])
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

/// Exponent, blocks and the derived unit-volume radius of one superball family.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceParams {
    p: f64,
    q: f64,
    blocks: BlockSpec,
    unit_volume: f64,
    r_unit: f64,
}

impl SpaceParams {
    /// Accepts any `p ≥ 1`. Values above 2 are allowed for evaluation but are
    /// flagged by [`SpaceParams::exceeds_two`].
    pub fn new(p: f64, blocks: BlockSpec) -> Result<Self> {
        let unit_volume = unit_ball_volume(p, &blocks)?;
        let n = blocks.dim() as f64;
        let r_unit = (-unit_volume.ln() / n).exp();
        Ok(SpaceParams {
            p,
            q: conjugate_exponent(p),
            blocks,
            unit_volume,
            r_unit,
        })
    }

    pub fn from_cuts(p: f64, cuts: Vec<usize>) -> Result<Self> {
        SpaceParams::new(p, BlockSpec::new(cuts)?)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Conjugate exponent `p/(p-1)`; infinite for `p = 1`.
    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn blocks(&self) -> &BlockSpec {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.blocks.dim()
    }

    /// Volume of the radius-1 superball.
    pub fn unit_ball_volume(&self) -> f64 {
        self.unit_volume
    }

    /// Radius whose superball has volume 1.
    pub fn r_unit(&self) -> f64 {
        self.r_unit
    }

    /// `vol(B(R)) = (R / r_unit)^n`.
    pub fn ball_volume(&self, radius: f64) -> f64 {
        (radius / self.r_unit).powi(self.dim() as i32)
    }

    pub fn exceeds_two(&self) -> bool {
        self.p > 2.0
    }

    /// Mixed norm of the vector whose `i`-th coordinate is `coord(i)`.
    #[inline]
    fn mixed_norm(&self, coord: impl Fn(usize) -> f64) -> f64 {
        let p = self.p;
        if p == 2.0 {
            let n = self.dim();
            return (0..n).map(|i| coord(i) * coord(i)).sum::<f64>().sqrt();
        }
        let mut acc = 0.0;
        for block in self.blocks.blocks() {
            if block.len() == 1 {
                acc += coord(block.start).abs().powf(p);
            } else {
                let s: f64 = block.map(|i| coord(i) * coord(i)).sum();
                acc += if p == 1.0 { s.sqrt() } else { s.powf(0.5 * p) };
            }
        }
        if p == 1.0 {
            acc
        } else {
            acc.powf(1.0 / p)
        }
    }

    /// Norm without the length check. Callers guarantee `x.len() == n`.
    #[inline]
    pub(crate) fn norm_raw(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        self.mixed_norm(|i| x[i])
    }

    #[inline]
    pub(crate) fn flat_distance_raw(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mixed_norm(|i| y[i] - x[i])
    }

    #[inline]
    pub(crate) fn torus_distance_raw(&self, x: &[f64], y: &[f64], side: f64) -> f64 {
        self.mixed_norm(|i| minimum_image(y[i] - x[i], side))
    }

    /// Norm of `x`; errors when `x` does not live in `R^n`.
    pub fn norm(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len(), "point")?;
        Ok(self.norm_raw(x))
    }
}

/// `|d|` reduced to the minimum image on a circle of circumference `side`.
#[inline]
pub fn minimum_image(d: f64, side: f64) -> f64 {
    let a = d.abs() % side;
    a.min(side - a)
}

pub fn conjugate_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

/// Simulation / packing domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Region {
    /// The superball `B(0, radius)` of the ambient norm.
    Ball { radius: f64 },
    /// The periodic cube `[0, side)^n`.
    Torus { side: f64 },
}

impl Region {
    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            Region::Ball { radius } => radius,
            Region::Torus { side } => side,
        };
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::input(format!("region size must be positive, got {v}")));
        }
        Ok(())
    }

    pub fn volume(&self, space: &SpaceParams) -> f64 {
        match *self {
            Region::Ball { radius } => space.ball_volume(radius),
            Region::Torus { side } => side.powi(space.dim() as i32),
        }
    }

    /// Membership of a point. Torus points are expected in canonical `[0, side)` form.
    pub fn contains_point(&self, space: &SpaceParams, x: &[f64]) -> bool {
        match *self {
            Region::Ball { radius } => space.norm_raw(x) <= radius,
            Region::Torus { side } => x.iter().all(|&c| (0.0..side).contains(&c)),
        }
    }

    #[inline]
    pub(crate) fn distance_raw(&self, space: &SpaceParams, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Region::Ball { .. } => space.flat_distance_raw(x, y),
            Region::Torus { side } => space.torus_distance_raw(x, y, side),
        }
    }

    /// Largest possible distance between two points of the region.
    pub fn diameter(&self, space: &SpaceParams) -> f64 {
        match *self {
            Region::Ball { radius } => 2.0 * radius,
            Region::Torus { side } => {
                let half = vec![0.5 * side; space.dim()];
                space.norm_raw(&half)
            }
        }
    }
}

/// Norm of `x` in `space`.
pub fn norm(x: &[f64], space: &SpaceParams) -> Result<f64> {
    space.norm(x)
}

/// Distance `‖y − x‖`, with minimum-image reduction on a torus.
pub fn distance(x: &[f64], y: &[f64], space: &SpaceParams, region: &Region) -> Result<f64> {
    check_dim(space.dim(), x.len(), "first point")?;
    check_dim(space.dim(), y.len(), "second point")?;
    Ok(region.distance_raw(space, x, y))
}

/// Closed superball membership: `distance(center, y) ≤ r`.
pub fn contains(
    center: &[f64],
    r: f64,
    y: &[f64],
    space: &SpaceParams,
    region: &Region,
) -> Result<bool> {
    Ok(distance(center, y, space, region)? <= r)
}

/// Volume of the radius-1 superball,
/// `Π_j V_{d_j} Γ(d_j/p + 1) / Γ(n/p + 1)` with `V_d = π^{d/2} / Γ(d/2 + 1)`.
pub fn unit_ball_volume(p: f64, blocks: &BlockSpec) -> Result<f64> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::input(format!("exponent p must be a finite value ≥ 1, got {p}")));
    }
    let ln_pi = std::f64::consts::PI.ln();
    let mut ln_vol = 0.0;
    for d in blocks.block_dims() {
        let d = d as f64;
        let ln_euclid = 0.5 * d * ln_pi - ln_gamma(0.5 * d + 1.0);
        ln_vol += ln_euclid + ln_gamma(d / p + 1.0);
    }
    ln_vol -= ln_gamma(blocks.dim() as f64 / p + 1.0);
    Ok(ln_vol.exp())
}

/// Radius of the volume-1 superball.
pub fn r_unit(p: f64, blocks: &BlockSpec) -> Result<f64> {
    let v = unit_ball_volume(p, blocks)?;
    Ok((-v.ln() / blocks.dim() as f64).exp())
}

/// Exact uniform sampler for superballs.
///
/// Each block gets a uniform direction and a radial part `ρ` with
/// `ρ^p ~ Gamma(d/p)`, giving a vector with density `∝ exp(-‖x‖^p)`. Dividing
/// by `(‖x‖^p + E)^{1/p}` with `E ~ Exp(1)` lands uniformly in the unit ball.
#[derive(Debug, Clone)]
pub struct BallSampler {
    p: f64,
    blocks: Vec<(Range<usize>, Gamma<f64>)>,
}

impl BallSampler {
    pub fn new(space: &SpaceParams) -> Self {
        let p = space.p();
        let blocks = space
            .blocks()
            .blocks()
            .map(|b| {
                let shape = b.len() as f64 / p;
                (b, Gamma::new(shape, 1.0).expect("positive gamma shape"))
            })
            .collect();
        BallSampler { p, blocks }
    }

    /// Writes a uniform point of `B(center, radius)` into `out`.
    pub fn sample_into<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        center: &[f64],
        radius: f64,
        out: &mut [f64],
    ) {
        let mut total = 0.0;
        for (block, gamma) in &self.blocks {
            let g: f64 = gamma.sample(rng);
            let rho = g.powf(1.0 / self.p);
            let mut sq = 0.0;
            for i in block.clone() {
                let z: f64 = StandardNormal.sample(rng);
                out[i] = z;
                sq += z * z;
            }
            let scale = rho / sq.sqrt();
            for i in block.clone() {
                out[i] *= scale;
            }
            total += g;
        }
        let e: f64 = Exp1.sample(rng);
        let shrink = radius * (total + e).powf(-1.0 / self.p);
        for (o, c) in out.iter_mut().zip(center) {
            *o = c + *o * shrink;
        }
    }
}

/// Uniform sampler over a [`Region`].
#[derive(Debug, Clone)]
pub struct RegionSampler {
    region: Region,
    ball: Option<BallSampler>,
    origin: Vec<f64>,
}

impl RegionSampler {
    pub fn new(space: &SpaceParams, region: Region) -> Self {
        let ball = match region {
            Region::Ball { .. } => Some(BallSampler::new(space)),
            Region::Torus { .. } => None,
        };
        RegionSampler {
            region,
            ball,
            origin: vec![0.0; space.dim()],
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self.region {
            Region::Ball { radius } => {
                let ball = self.ball.as_ref().expect("ball sampler");
                ball.sample_into(rng, &self.origin, radius, out);
            }
            Region::Torus { side } => {
                for o in out.iter_mut() {
                    *o = rng.random::<f64>() * side;
                }
            }
        }
    }
}

/// Rejection-sampling estimate of the unit-ball volume from the cube
/// `[−1, 1]^n`, with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub samples: u64,
    pub hits: u64,
    pub estimate: f64,
    pub se: f64,
}

pub fn mc_unit_ball_volume(space: &SpaceParams, samples: u64, seed: u64) -> Result<VolumeEstimate> {
    use rayon::prelude::*;
    if samples == 0 {
        return Err(Error::input("volume oracle needs samples > 0"));
    }
    let n = space.dim();
    let chunks = 64u64;
    let per = samples.div_ceil(chunks);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let todo = per.min(samples.saturating_sub(c * per));
            let mut rng = crate::seed::rng_from_seed(crate::seed::derive_seed(seed, c));
            let mut x = vec![0.0; n];
            let mut hits = 0;
            for _ in 0..todo {
                for v in x.iter_mut() {
                    *v = rng.random_range(-1.0..=1.0);
                }
                if space.norm_raw(&x) <= 1.0 {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let f = hits as f64 / samples as f64;
    let cube = 2f64.powi(n as i32);
    Ok(VolumeEstimate {
        samples,
        hits,
        estimate: cube * f,
        se: cube * (f * (1.0 - f) / samples as f64).sqrt(),
    })
}
