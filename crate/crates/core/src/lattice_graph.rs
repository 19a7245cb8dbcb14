//! Cube tiling of `B(R)`, the auxiliary geometric graph on the cubes, greedy
//! independent sets and certified packings.
//!
//! Cubes are `εk + [0, ε]^n` for integer vectors `k`; the lattice keeps the
//! ones lying entirely inside `B(0, R)`. Two cubes are adjacent when their
//! representatives are closer than `2r`, so an independent set of the graph
//! yields a packing of radius-`r` superballs centred in `B(0, R)`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::ConstantChain;
use crate::error::{Error, Result};
use crate::geometry::{BallSampler, BlockSpec, SpaceParams};
use crate::seed::{derive_seed, rng_from_seed};

/// Hard limit on undirected edges.
pub const DEFAULT_EDGE_CAP: u64 = 10_000_000;

const DENSE_INDEX_LIMIT: u64 = 50_000_000;

/// `n^{(p+2)/(2p)}`.
fn margin_factor(space: &SpaceParams) -> f64 {
    let n = space.dim() as f64;
    n.powf((space.p() + 2.0) / (2.0 * space.p()))
}

/// Largest `ε` satisfying the smallness rule `n^{(p+2)/(2p)} ε / r_unit < n^{−2}`.
pub fn eps_threshold(space: &SpaceParams) -> f64 {
    let n = space.dim() as f64;
    space.r_unit() / (margin_factor(space) * n * n)
}

/// Lookup from integer cube coordinates to vertex ids.
#[derive(Debug, Clone)]
enum CubeIndex {
    Dense { lo: i64, width: i64, slots: Vec<u32> },
    Sparse(HashMap<Vec<i64>, u32>),
}

impl CubeIndex {
    fn get(&self, k: &[i64]) -> Option<u32> {
        match self {
            CubeIndex::Dense { lo, width, slots } => {
                let mut idx = 0i64;
                for &c in k.iter().rev() {
                    let c = c - lo;
                    if c < 0 || c >= *width {
                        return None;
                    }
                    idx = idx * width + c;
                }
                let v = slots[idx as usize];
                (v != u32::MAX).then_some(v)
            }
            CubeIndex::Sparse(map) => map.get(k).copied(),
        }
    }
}

/// The tiling of `B(0, R)` by `ε`-cubes.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub space: SpaceParams,
    pub big_r: f64,
    pub eps: f64,
    /// `2 n^{(p+2)/(2p)} ε`.
    pub margin: f64,
    /// Integer corners `k` of the inside cubes, row-major, lexicographic.
    cubes: Vec<i64>,
    index: CubeIndex,
    pub warnings: Vec<String>,
}

/// Summary of a lattice, including the two-sided count bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSummary {
    pub n: usize,
    pub p: f64,
    pub big_r: f64,
    pub eps: f64,
    pub margin: f64,
    pub eps_threshold: f64,
    pub cubes: usize,
    /// `((R − margin)/(ε r_unit))^n`, or 0 when `R ≤ margin`.
    pub count_lower: f64,
    /// `(R/(ε r_unit))^n`.
    pub count_upper: f64,
    pub warnings: Vec<String>,
}

impl Lattice {
    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn len(&self) -> usize {
        self.cubes.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn cube(&self, i: usize) -> &[i64] {
        let n = self.dim();
        &self.cubes[i * n..(i + 1) * n]
    }

    /// Vertex id of the cube containing `x` (cubes are half-open on the
    /// upper faces for this purpose).
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let k: Vec<i64> = x.iter().map(|&c| (c / self.eps).floor() as i64).collect();
        self.index.get(&k).map(|v| v as usize)
    }

    pub fn summary(&self) -> LatticeSummary {
        let n = self.dim() as i32;
        let scale = self.eps * self.space.r_unit();
        LatticeSummary {
            n: self.dim(),
            p: self.space.p(),
            big_r: self.big_r,
            eps: self.eps,
            margin: self.margin,
            eps_threshold: eps_threshold(&self.space),
            cubes: self.len(),
            count_lower: ((self.big_r - self.margin).max(0.0) / scale).powi(n),
            count_upper: (self.big_r / scale).powi(n),
            warnings: self.warnings.clone(),
        }
    }

    /// Whether the cube count lies within its two-sided bound (up to
    /// rounding in the bounds themselves).
    pub fn count_within_bounds(&self) -> bool {
        let s = self.summary();
        let c = s.cubes as f64;
        c <= s.count_upper * (1.0 + 1e-9) && c >= s.count_lower * (1.0 - 1e-9)
    }
}

fn corner_norm(space: &SpaceParams, k: &[i64], eps: f64, far: &mut [f64]) -> f64 {
    for (f, &c) in far.iter_mut().zip(k) {
        let a = (eps * c as f64).abs();
        let b = (eps * (c + 1) as f64).abs();
        *f = a.max(b);
    }
    space.norm_raw(far)
}

/// Enumerates the cubes `εk + [0, ε]^n` contained in `B(0, R)`.
///
/// Containment is decided on the corner maximizing every `|coordinate|`,
/// which is exact because the norm is monotone in absolute coordinates.
pub fn build_lattice(big_r: f64, eps: f64, space: &SpaceParams) -> Result<Lattice> {
    if !(big_r.is_finite() && big_r > 0.0) {
        return Err(Error::input(format!("R must be positive, got {big_r}")));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::input(format!("eps must be positive, got {eps}")));
    }
    let r_unit = space.r_unit();
    if eps >= r_unit {
        return Err(Error::input(format!(
            "eps = {eps} must be smaller than the unit radius {r_unit}"
        )));
    }
    let margin = 2.0 * margin_factor(space) * eps;
    if big_r <= margin {
        return Err(Error::input(format!("R = {big_r} must exceed the margin {margin}")));
    }
    let mut warnings = Vec::new();
    let threshold = eps_threshold(space);
    if eps >= threshold {
        warnings.push(format!(
            "eps = {eps} is not below the smallness threshold {threshold}; cover and degree guarantees may not apply"
        ));
    }
    let n = space.dim();
    let half = (big_r / eps).ceil() as i64;
    let width = 2 * half;
    let cells = (width as f64).powi(n as i32);
    if cells > 1e12 {
        return Err(Error::input(format!(
            "the tiling has about {cells:e} candidate cubes; use a larger eps or smaller R"
        )));
    }
    // parallel over the first coordinate, then lexicographic within
    let slabs: Vec<Vec<i64>> = (-half..half)
        .into_par_iter()
        .map(|k0| {
            let mut out = Vec::new();
            let mut k = vec![-half; n];
            k[0] = k0;
            let mut far = vec![0.0; n];
            loop {
                if corner_norm(space, &k, eps, &mut far) <= big_r {
                    out.extend_from_slice(&k);
                }
                let mut d = n - 1;
                loop {
                    if d == 0 {
                        return out;
                    }
                    k[d] += 1;
                    if k[d] < half {
                        break;
                    }
                    k[d] = -half;
                    d -= 1;
                }
            }
        })
        .collect();
    let cubes: Vec<i64> = slabs.into_iter().flatten().collect();
    let count = cubes.len() / n;
    if count >= u32::MAX as usize {
        return Err(Error::input("too many cubes for 32-bit vertex ids"));
    }
    let index = if (width as u64).checked_pow(n as u32).is_some_and(|c| c <= DENSE_INDEX_LIMIT) {
        let mut slots = vec![u32::MAX; (width as usize).pow(n as u32)];
        for (i, k) in cubes.chunks_exact(n).enumerate() {
            let idx = k.iter().rev().fold(0i64, |acc, &c| acc * width + (c + half));
            slots[idx as usize] = i as u32;
        }
        CubeIndex::Dense { lo: -half, width, slots }
    } else {
        CubeIndex::Sparse(
            cubes
                .chunks_exact(n)
                .enumerate()
                .map(|(i, k)| (k.to_vec(), i as u32))
                .collect(),
        )
    };
    Ok(Lattice {
        space: space.clone(),
        big_r,
        eps,
        margin,
        cubes,
        index,
        warnings,
    })
}

/// How a representative point is picked inside each cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representative {
    #[default]
    Center,
    LowerCorner,
}

impl Representative {
    fn offset(self) -> f64 {
        match self {
            Representative::Center => 0.5,
            Representative::LowerCorner => 0.0,
        }
    }
}

/// Undirected graph in compressed sparse row form with sorted neighbor lists.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoGraph {
    row: Vec<u64>,
    nbrs: Vec<u32>,
    /// Representative points, row-major (empty for abstract graphs).
    reps: Vec<f64>,
    dim: usize,
    pub radius: f64,
}

impl GeoGraph {
    /// Abstract graph from an edge list (self loops and duplicates dropped).
    pub fn from_edges(vertices: usize, edges: &[(u32, u32)]) -> Result<Self> {
        let mut lists = vec![Vec::new(); vertices];
        for &(a, b) in edges {
            let (a, b) = (a as usize, b as usize);
            if a >= vertices || b >= vertices {
                return Err(Error::input(format!("edge ({a}, {b}) out of range")));
            }
            if a != b {
                lists[a].push(b as u32);
                lists[b].push(a as u32);
            }
        }
        for l in &mut lists {
            l.sort_unstable();
            l.dedup();
        }
        Ok(GeoGraph::from_lists(lists, Vec::new(), 0, 0.0))
    }

    fn from_lists(lists: Vec<Vec<u32>>, reps: Vec<f64>, dim: usize, radius: f64) -> Self {
        let mut row = Vec::with_capacity(lists.len() + 1);
        row.push(0u64);
        let mut acc = 0u64;
        for l in &lists {
            acc += l.len() as u64;
            row.push(acc);
        }
        let nbrs = lists.into_iter().flatten().collect();
        GeoGraph { row, nbrs, reps, dim, radius }
    }

    pub fn num_vertices(&self) -> usize {
        self.row.len() - 1
    }

    pub fn num_edges(&self) -> u64 {
        self.nbrs.len() as u64 / 2
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.nbrs[self.row[v] as usize..self.row[v + 1] as usize]
    }

    pub fn degree(&self, v: usize) -> usize {
        (self.row[v + 1] - self.row[v]) as usize
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_vertices()).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors(a).binary_search(&(b as u32)).is_ok()
    }

    pub fn representative(&self, v: usize) -> &[f64] {
        &self.reps[v * self.dim..(v + 1) * self.dim]
    }

    /// Checks symmetry, sortedness and absence of self loops.
    pub fn is_well_formed(&self) -> bool {
        (0..self.num_vertices()).all(|v| {
            let l = self.neighbors(v);
            l.windows(2).all(|w| w[0] < w[1])
                && l.iter().all(|&u| u as usize != v && self.has_edge(u as usize, v))
        })
    }
}

/// Builds the auxiliary graph: vertices are the lattice cubes, represented by
/// one point each, and `i ~ j` iff `‖v_i − v_j‖ < 2r`.
///
/// Representatives are translates of each other, so candidate neighbors come
/// from a fixed list of integer offsets; each candidate is then confirmed by
/// the exact distance of the two representatives.
pub fn build_graph(
    lattice: &Lattice,
    rule: Representative,
    radius: f64,
    edge_cap: u64,
) -> Result<GeoGraph> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::input(format!("radius must be positive, got {radius}")));
    }
    let n = lattice.dim();
    let space = &lattice.space;
    let eps = lattice.eps;
    let reach = (2.0 * radius / eps).ceil() as i64;
    let box_size = (2 * reach + 1) as f64;
    if box_size.powi(n as i32) > 5e7 {
        return Err(Error::input(format!(
            "neighbor offset box of side {box_size} in dimension {n} is too large; increase eps"
        )));
    }
    let excl = 2.0 * radius;
    let mut offsets: Vec<i64> = Vec::new();
    let mut o = vec![-reach; n];
    let mut diff = vec![0.0; n];
    loop {
        if o.iter().any(|&c| c != 0) {
            for (d, &c) in diff.iter_mut().zip(&o) {
                *d = eps * c as f64;
            }
            // generous filter; exact distances decide below
            if space.norm_raw(&diff) < excl * (1.0 + 1e-9) {
                offsets.extend_from_slice(&o);
            }
        }
        let mut d = 0;
        while d < n {
            o[d] += 1;
            if o[d] <= reach {
                break;
            }
            o[d] = -reach;
            d += 1;
        }
        if d == n {
            break;
        }
    }

    let shift = rule.offset();
    let count = lattice.len();
    let reps: Vec<f64> = lattice
        .cubes
        .iter()
        .map(|&k| eps * (k as f64 + shift))
        .collect();
    let rep = |v: usize| &reps[v * n..(v + 1) * n];

    let neighbors_of = |v: usize, out: &mut Vec<u32>| {
        out.clear();
        let k = lattice.cube(v);
        let mut kk = vec![0i64; n];
        for off in offsets.chunks_exact(n) {
            for ((t, &a), &b) in kk.iter_mut().zip(k).zip(off) {
                *t = a + b;
            }
            if let Some(u) = lattice.index.get(&kk) {
                if space.flat_distance_raw(rep(v), rep(u as usize)) < excl {
                    out.push(u);
                }
            }
        }
    };

    let degrees: Vec<u64> = (0..count)
        .into_par_iter()
        .map_init(Vec::new, |buf, v| {
            neighbors_of(v, buf);
            buf.len() as u64
        })
        .collect();
    let total: u64 = degrees.iter().sum();
    if total / 2 > edge_cap {
        return Err(Error::input(format!(
            "graph would have {} edges, above the cap of {edge_cap}; increase eps",
            total / 2
        )));
    }
    let lists: Vec<Vec<u32>> = (0..count)
        .into_par_iter()
        .map(|v| {
            let mut l = Vec::new();
            neighbors_of(v, &mut l);
            l.sort_unstable();
            l
        })
        .collect();
    Ok(GeoGraph::from_lists(lists, reps, n, radius))
}

/// `|N[x]| ≤ ((2r + margin)/(ε r_unit))^n`, counting the vertex itself.
pub fn degree_bound(lattice: &Lattice, radius: f64) -> f64 {
    ((2.0 * radius + lattice.margin) / (lattice.eps * lattice.space.r_unit())).powi(lattice.dim() as i32)
}

/// Average degree inside neighborhoods, compared against `D/K` with
/// `K = (2/c_p)^n / 10`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalSparsityReport {
    pub vertices_examined: usize,
    pub total_vertices: usize,
    pub max_degree: usize,
    pub max_neighborhood_avg_degree: f64,
    pub mean_neighborhood_avg_degree: f64,
    pub k_reference: f64,
    pub d_over_k: f64,
    /// The reference is asymptotic; at small `n` exceeding it is expected.
    pub within_reference: bool,
}

fn sorted_intersection(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// Average degree of `G[N(x)]` for every vertex, or for an evenly strided
/// sample of at most `max_vertices` vertices.
pub fn local_sparsity_stats(
    graph: &GeoGraph,
    chain: &ConstantChain,
    n: usize,
    max_vertices: Option<usize>,
) -> LocalSparsityReport {
    let total = graph.num_vertices();
    let stride = match max_vertices {
        Some(m) if m > 0 && total > m => total.div_ceil(m),
        _ => 1,
    };
    let sample: Vec<usize> = (0..total).step_by(stride).collect();
    let avgs: Vec<f64> = sample
        .par_iter()
        .map(|&v| {
            let nb = graph.neighbors(v);
            if nb.is_empty() {
                return 0.0;
            }
            let twice_edges: usize = nb
                .iter()
                .map(|&u| sorted_intersection(graph.neighbors(u as usize), nb))
                .sum();
            twice_edges as f64 / nb.len() as f64
        })
        .collect();
    let max_avg = avgs.iter().copied().fold(0.0, f64::max);
    let mean_avg = if avgs.is_empty() {
        0.0
    } else {
        avgs.iter().sum::<f64>() / avgs.len() as f64
    };
    let d = graph.max_degree();
    let k_ref = 0.1 * (n as f64 * chain.log_ratio).exp();
    let d_over_k = d as f64 / k_ref;
    LocalSparsityReport {
        vertices_examined: sample.len(),
        total_vertices: total,
        max_degree: d,
        max_neighborhood_avg_degree: max_avg,
        mean_neighborhood_avg_degree: mean_avg,
        k_reference: k_ref,
        d_over_k,
        within_reference: max_avg <= d_over_k,
    }
}

/// Vertex order used by [`greedy_independent_set`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OrderRule {
    /// Repeatedly take a vertex of minimum degree in the remaining graph.
    #[default]
    Mindeg,
    /// Scan vertices in index order.
    Lex,
}

/// Greedy maximal independent set, checked for independence and for the
/// guarantee `|I| ≥ N / (Δ + 1)`. Returned ids are sorted.
pub fn greedy_independent_set(graph: &GeoGraph, rule: OrderRule) -> Result<Vec<usize>> {
    let nv = graph.num_vertices();
    let mut removed = vec![false; nv];
    let mut chosen = Vec::new();
    match rule {
        OrderRule::Lex => {
            for v in 0..nv {
                if !removed[v] {
                    chosen.push(v);
                    removed[v] = true;
                    for &u in graph.neighbors(v) {
                        removed[u as usize] = true;
                    }
                }
            }
        }
        OrderRule::Mindeg => {
            let mut deg: Vec<usize> = (0..nv).map(|v| graph.degree(v)).collect();
            let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
                (0..nv).map(|v| Reverse((deg[v], v))).collect();
            while let Some(Reverse((d, v))) = heap.pop() {
                if removed[v] || d != deg[v] {
                    continue;
                }
                chosen.push(v);
                removed[v] = true;
                let dropped: Vec<usize> = graph
                    .neighbors(v)
                    .iter()
                    .map(|&u| u as usize)
                    .filter(|&u| !removed[u])
                    .collect();
                for &u in &dropped {
                    removed[u] = true;
                }
                for &u in &dropped {
                    for &w in graph.neighbors(u) {
                        let w = w as usize;
                        if !removed[w] {
                            deg[w] -= 1;
                            heap.push(Reverse((deg[w], w)));
                        }
                    }
                }
            }
        }
    }
    chosen.sort_unstable();
    if !is_independent(graph, &chosen) {
        return Err(Error::computation("greedy selection is not independent"));
    }
    let guarantee = nv as f64 / (graph.max_degree() as f64 + 1.0);
    if (chosen.len() as f64) < guarantee {
        return Err(Error::computation(format!(
            "independent set of size {} is below N/(D+1) = {guarantee}",
            chosen.len()
        )));
    }
    Ok(chosen)
}

/// True when no two listed vertices are adjacent.
pub fn is_independent(graph: &GeoGraph, set: &[usize]) -> bool {
    let mut inside = vec![false; graph.num_vertices()];
    for &v in set {
        if v >= inside.len() || inside[v] {
            return false;
        }
        inside[v] = true;
    }
    set.iter()
        .all(|&v| graph.neighbors(v).iter().all(|&u| !inside[u as usize]))
}

/// A packing of superballs of radius `radius` centred in `B(0, R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackingCertificate {
    pub p: f64,
    pub cuts: Vec<usize>,
    pub radius: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub centers: Vec<Vec<f64>>,
    /// `null` for fewer than two centers.
    pub min_pairwise_distance: Option<f64>,
    /// `count · vol(B(radius)) / vol(B(R))`.
    pub density: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

/// Result of re-checking a certificate from scratch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingVerification {
    pub valid: bool,
    pub count: usize,
    pub min_pairwise_distance: Option<f64>,
    pub all_inside: bool,
    pub density: f64,
    /// Whether the recorded distance and density match the recomputed ones.
    pub recorded_values_match: bool,
}

fn min_distance(space: &SpaceParams, centers: &[Vec<f64>]) -> Option<f64> {
    if centers.len() < 2 {
        return None;
    }
    (0..centers.len())
        .into_par_iter()
        .map(|i| {
            centers[i + 1..]
                .iter()
                .map(|c| space.flat_distance_raw(&centers[i], c))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min)
        .into()
}

fn packing_density(space: &SpaceParams, count: usize, radius: f64, big_r: f64) -> f64 {
    count as f64 * ((radius / big_r).ln() * space.dim() as f64).exp()
}

/// Certificate for an independent set, with the minimum distance recomputed
/// over all pairs rather than read off the graph.
pub fn emit_packing(set: &[usize], lattice: &Lattice, graph: &GeoGraph) -> Result<PackingCertificate> {
    if graph.reps.is_empty() || graph.num_vertices() != lattice.len() {
        return Err(Error::input("graph was not built from this lattice"));
    }
    let space = &lattice.space;
    let centers: Vec<Vec<f64>> = set
        .iter()
        .map(|&v| {
            if v >= graph.num_vertices() {
                Err(Error::input(format!("vertex {v} out of range")))
            } else {
                Ok(graph.representative(v).to_vec())
            }
        })
        .collect::<Result<_>>()?;
    let md = min_distance(space, &centers);
    if let Some(d) = md {
        if d < 2.0 * graph.radius {
            return Err(Error::computation(format!(
                "recomputed minimum distance {d} is below 2r = {}",
                2.0 * graph.radius
            )));
        }
    }
    Ok(PackingCertificate {
        p: space.p(),
        cuts: space.blocks().cuts().to_vec(),
        radius: graph.radius,
        big_r: lattice.big_r,
        density: packing_density(space, centers.len(), graph.radius, lattice.big_r),
        centers,
        min_pairwise_distance: md,
        meta: None,
    })
}

/// Recomputes every pairwise distance and every membership in `B(0, R)`.
pub fn verify_packing(cert: &PackingCertificate) -> Result<PackingVerification> {
    let blocks = BlockSpec::new(cert.cuts.clone())?;
    let space = SpaceParams::new(cert.p, blocks)?;
    if !(cert.radius > 0.0 && cert.radius.is_finite() && cert.big_r > 0.0 && cert.big_r.is_finite()) {
        return Err(Error::input("radius and R must be positive and finite"));
    }
    for c in &cert.centers {
        crate::error::check_dim(space.dim(), c.len(), "center")?;
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("center coordinates must be finite"));
        }
    }
    let md = min_distance(&space, &cert.centers);
    let all_inside = cert.centers.iter().all(|c| space.norm_raw(c) <= cert.big_r);
    let density = packing_density(&space, cert.centers.len(), cert.radius, cert.big_r);
    let recorded_values_match = md == cert.min_pairwise_distance
        && (density - cert.density).abs() <= 1e-12 * density.abs().max(1.0);
    Ok(PackingVerification {
        valid: all_inside && md.is_none_or(|d| d >= 2.0 * cert.radius),
        count: cert.centers.len(),
        min_pairwise_distance: md,
        all_inside,
        density,
        recorded_values_match,
    })
}

/// Outcome of the random-probe cover test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub probes: u64,
    pub misses: u64,
}

/// Draws uniform probes in `B(0, R − margin)` and counts those not in any
/// listed cube.
pub fn cover_check(lattice: &Lattice, probes: u64, seed: u64) -> CoverReport {
    let inner = lattice.big_r - lattice.margin;
    let n = lattice.dim();
    let chunks = 64u64;
    let per = probes.div_ceil(chunks);
    let misses = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let todo = per.min(probes.saturating_sub(c * per));
            let sampler = BallSampler::new(&lattice.space);
            let mut rng = rng_from_seed(derive_seed(seed, c));
            let origin = vec![0.0; n];
            let mut x = vec![0.0; n];
            let mut miss = 0;
            for _ in 0..todo {
                sampler.sample_into(&mut rng, &origin, inner, &mut x);
                if lattice.locate(&x).is_none() {
                    miss += 1;
                }
            }
            miss
        })
        .sum();
    CoverReport { probes, misses }
}

/// Outcome of the neighborhood sandwich test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub vertices: usize,
    pub probes: u64,
    /// Probes of `B(x, 2r − margin) ∩ B(0, R − margin)` outside `∪_{N[x]} C_i`.
    pub inner_misses: u64,
    /// Neighbor cubes reaching beyond `B(x, 2r + margin)`.
    pub outer_violations: u64,
}

/// Checks `B(x, 2r − m) ∩ B(0, R − m) ⊆ ∪_{v_i ∈ N[x]} C_i ⊆ B(x, 2r + m)`
/// for `vertices` evenly spaced vertices `x` (with `m` the margin).
pub fn sandwich_check(
    lattice: &Lattice,
    graph: &GeoGraph,
    vertices: usize,
    probes_per_vertex: u64,
    seed: u64,
) -> Result<SandwichReport> {
    let r = graph.radius;
    let m = lattice.margin;
    if 2.0 * r <= m {
        return Err(Error::input("margin exceeds 2r; the inner ball is empty"));
    }
    let nv = graph.num_vertices();
    let n = lattice.dim();
    let stride = nv.div_ceil(vertices.max(1)).max(1);
    let chosen: Vec<usize> = (0..nv).step_by(stride).collect();
    let space = &lattice.space;
    let eps = lattice.eps;
    let (inner, outer, probes) = chosen
        .par_iter()
        .map(|&v| {
            let x = graph.representative(v);
            let mut rng = rng_from_seed(derive_seed(seed, v as u64));
            let sampler = BallSampler::new(space);
            let mut y = vec![0.0; n];
            let mut inner = 0u64;
            let mut tried = 0u64;
            for _ in 0..probes_per_vertex {
                sampler.sample_into(&mut rng, x, 2.0 * r - m, &mut y);
                if space.norm_raw(&y) > lattice.big_r - m {
                    continue;
                }
                tried += 1;
                match lattice.locate(&y) {
                    Some(u) if u == v || graph.has_edge(v, u) => {}
                    _ => inner += 1,
                }
            }
            let mut outer = 0u64;
            let mut far = vec![0.0; n];
            for &u in graph.neighbors(v) {
                let k = lattice.cube(u as usize);
                for ((f, &c), &xc) in far.iter_mut().zip(k).zip(x) {
                    let lo = eps * c as f64 - xc;
                    let hi = eps * (c + 1) as f64 - xc;
                    *f = lo.abs().max(hi.abs());
                }
                if space.norm_raw(&far) > 2.0 * r + m {
                    outer += 1;
                }
            }
            (inner, outer, tried)
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    Ok(SandwichReport {
        vertices: chosen.len(),
        probes,
        inner_misses: inner,
        outer_violations: outer,
    })
}

/// Settings for [`pack`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PackOptions {
    pub order: OrderRule,
    pub representative: Representative,
    pub edge_cap: u64,
    /// Vertices examined by the local sparsity statistic (`None`: all).
    pub sparsity_sample: Option<usize>,
}

impl Default for PackOptions {
    fn default() -> Self {
        PackOptions {
            order: OrderRule::Mindeg,
            representative: Representative::Center,
            edge_cap: DEFAULT_EDGE_CAP,
            sparsity_sample: Some(2000),
        }
    }
}

/// Statistics of one run of the packing pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackReport {
    pub lattice: LatticeSummary,
    pub edges: u64,
    pub max_degree: usize,
    /// Bound on `|N[x]|`, i.e. on `max_degree + 1`.
    pub degree_bound: f64,
    pub independent_set: usize,
    pub greedy_guarantee: f64,
    pub local_sparsity: Option<LocalSparsityReport>,
    pub verification: PackingVerification,
}

/// Lattice, graph, greedy independent set and certificate in one call, with
/// the radius fixed to `r_unit`.
pub fn pack(
    space: &SpaceParams,
    big_r: f64,
    eps: f64,
    opts: &PackOptions,
) -> Result<(PackingCertificate, PackReport)> {
    let lattice = build_lattice(big_r, eps, space)?;
    let radius = space.r_unit();
    let graph = build_graph(&lattice, opts.representative, radius, opts.edge_cap)?;
    let set = greedy_independent_set(&graph, opts.order)?;
    let cert = emit_packing(&set, &lattice, &graph)?;
    let verification = verify_packing(&cert)?;
    if !verification.valid {
        return Err(Error::computation("emitted packing failed independent verification"));
    }
    let local_sparsity = if space.p() > 1.0 && space.p() <= 2.0 {
        let chain = crate::constants::compute_constant_chain(space.p())?;
        Some(local_sparsity_stats(&graph, &chain, space.dim(), opts.sparsity_sample))
    } else {
        None
    };
    let max_degree = graph.max_degree();
    let report = PackReport {
        lattice: lattice.summary(),
        edges: graph.num_edges(),
        max_degree,
        degree_bound: degree_bound(&lattice, radius),
        independent_set: set.len(),
        greedy_guarantee: graph.num_vertices() as f64 / (max_degree as f64 + 1.0),
        local_sparsity,
        verification,
    };
    Ok((cert, report))
}

/// Moves center `i` a distance `step` toward its nearest other center.
pub fn nudge_toward_nearest(cert: &mut PackingCertificate, i: usize, step: f64) -> Result<()> {
    let space = SpaceParams::from_cuts(cert.p, cert.cuts.clone())?;
    let xi = cert.centers.get(i).ok_or_else(|| Error::input("center index out of range"))?.clone();
    let (j, d) = cert
        .centers
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, c)| (j, space.flat_distance_raw(&xi, c)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::input("need at least two centers"))?;
    let target = cert.centers[j].clone();
    for (c, t) in cert.centers[i].iter_mut().zip(target) {
        *c += (t - *c) * step / d;
    }
    Ok(())
}
