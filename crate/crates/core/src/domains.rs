//! Chains for classical domains: cubes, open sets, simplices and polyhedral
//! chains, curves, the Koch snowflake, and cones.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{point, ChainError, ChainTerm, DiffChain, Point};
use crate::multivector::{wedge, KVector, MultiIndex, MultivectorError};
use crate::numeric::dist;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cell has {got} vertices, expected {expected}")]
    VertexCount { expected: usize, got: usize },
    #[error("vertex dimension {got} does not match {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate simplex")]
    Degenerate,
    #[error("cube budget of {budget} exceeded; set may be unbounded")]
    BudgetExceeded { budget: usize },
    #[error("polyhedral chain is not closed")]
    NotClosed,
    #[error("cone point lies on an edge")]
    PointOnEdge,
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Multivector(#[from] MultivectorError),
}

pub type Result<T> = std::result::Result<T, DomainError>;

fn orientation_blade(dim: usize, side: f64) -> KVector {
    let idx = MultiIndex::full(dim);
    KVector::from_pairs(dim, dim, [(idx, side)]).expect("full blade")
}

/// Order-`k` binary subdivision of the cube of the given center and side:
/// `2^{nk}` terms `(barycenter; 2^{−nk} side^n e_{1…n})`.
pub fn cube_chain(center: &[f64], side: f64, level: u32) -> Result<DiffChain> {
    let n = center.len();
    if n == 0 || !(side > 0.0) || !side.is_finite() {
        return Err(DomainError::InvalidParameter("cube needs positive side and dimension".into()));
    }
    if (n as u32) * level > 40 {
        return Err(DomainError::InvalidParameter(format!("level {level} too fine in dimension {n}")));
    }
    let m = 1usize << level;
    let h = side / m as f64;
    let alpha = orientation_blade(n, h.powi(n as i32));
    let total = m.pow(n as u32);
    let lo: Vec<f64> = center.iter().map(|c| c - side / 2.0).collect();
    let coords: Vec<Vec<f64>> = lo
        .iter()
        .map(|a| (0..m).map(|i| a + (i as f64 + 0.5) * h).collect())
        .collect();
    let mut terms = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        let p: Point = (0..n).map(|i| coords[i][idx[i]]).collect();
        terms.push(ChainTerm::pointed(point(&p), alpha.clone()));
        for i in (0..n).rev() {
            idx[i] += 1;
            if idx[i] < m {
                break;
            }
            idx[i] = 0;
        }
    }
    Ok(DiffChain::from_sorted_unchecked(n, n, terms))
}

/// `side^n · √n · side · 2^{−(k+1)}`, the order-1 distance between cube levels `k` and `k−1`.
pub fn cube_error_bound(dim: usize, side: f64, level: u32) -> f64 {
    side.powi(dim as i32) * (dim as f64).sqrt() * side * (-((level + 1) as f64)).exp2()
}

/// A sequence of chains with certified order-1 distances between consecutive levels.
pub struct ChainApproximant {
    generator: Box<dyn Fn(u32) -> Result<DiffChain> + Send + Sync>,
    error: Box<dyn Fn(u32) -> f64 + Send + Sync>,
}

impl ChainApproximant {
    pub fn new<G, E>(generator: G, error: E) -> Self
    where
        G: Fn(u32) -> Result<DiffChain> + Send + Sync + 'static,
        E: Fn(u32) -> f64 + Send + Sync + 'static,
    {
        ChainApproximant {
            generator: Box::new(generator),
            error: Box::new(error),
        }
    }

    pub fn cube(center: Vec<f64>, side: f64) -> Self {
        let n = center.len();
        ChainApproximant::new(
            move |k| cube_chain(&center, side, k),
            move |k| cube_error_bound(n, side, k),
        )
    }

    pub fn chain(&self, level: u32) -> Result<DiffChain> {
        (self.generator)(level)
    }

    /// Bound on `‖A_level − A_{level−1}‖_{B^1}`.
    pub fn error_bound(&self, level: u32) -> f64 {
        (self.error)(level)
    }

    /// Sum of the bounds past `level`; bounds the distance to the limit.
    pub fn tail_bound(&self, level: u32) -> f64 {
        (level + 1..level + 64).map(|l| self.error_bound(l)).sum()
    }
}

/// An open set given by signed distance to its boundary (positive inside).
pub trait OpenSet: Sync {
    fn dim(&self) -> usize;
    fn signed_distance(&self, p: &[f64]) -> f64;
    /// Points meeting every component.
    fn seeds(&self) -> Vec<Vec<f64>>;
}

#[derive(Clone, Debug)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl OpenSet for Ball {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn signed_distance(&self, p: &[f64]) -> f64 {
        self.radius - dist(p, &self.center)
    }
    fn seeds(&self) -> Vec<Vec<f64>> {
        vec![self.center.clone()]
    }
}

#[derive(Clone, Debug)]
pub struct Annulus {
    pub center: [f64; 2],
    pub inner: f64,
    pub outer: f64,
}

impl OpenSet for Annulus {
    fn dim(&self) -> usize {
        2
    }
    fn signed_distance(&self, p: &[f64]) -> f64 {
        let r = dist(p, &self.center);
        (self.outer - r).min(r - self.inner)
    }
    fn seeds(&self) -> Vec<Vec<f64>> {
        let r = 0.5 * (self.inner + self.outer);
        vec![vec![self.center[0] + r, self.center[1]]]
    }
}

#[derive(Clone, Debug)]
pub struct OpenBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl OpenSet for OpenBox {
    fn dim(&self) -> usize {
        self.lo.len()
    }
    fn signed_distance(&self, p: &[f64]) -> f64 {
        let mut inside = f64::INFINITY;
        let mut outside = 0.0f64;
        for ((x, a), b) in p.iter().zip(&self.lo).zip(&self.hi) {
            inside = inside.min(x - a).min(b - x);
            let o = (a - x).max(x - b).max(0.0);
            outside += o * o;
        }
        if inside > 0.0 {
            inside
        } else if outside > 0.0 {
            -outside.sqrt()
        } else {
            inside
        }
    }
    fn seeds(&self) -> Vec<Vec<f64>> {
        vec![self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()]
    }
}

/// `{x : x_axis > offset}`; unbounded.
#[derive(Clone, Debug)]
pub struct HalfSpace {
    pub dim: usize,
    pub axis: usize,
    pub offset: f64,
}

impl OpenSet for HalfSpace {
    fn dim(&self) -> usize {
        self.dim
    }
    fn signed_distance(&self, p: &[f64]) -> f64 {
        p[self.axis] - self.offset
    }
    fn seeds(&self) -> Vec<Vec<f64>> {
        let mut p = vec![0.0; self.dim];
        p[self.axis] = self.offset + 1.0;
        vec![p]
    }
}

/// Union of open sets.
pub struct Union(pub Vec<Box<dyn OpenSet + Send>>);

impl OpenSet for Union {
    fn dim(&self) -> usize {
        self.0.first().map(|s| s.dim()).unwrap_or(0)
    }
    fn signed_distance(&self, p: &[f64]) -> f64 {
        self.0
            .iter()
            .map(|s| s.signed_distance(p))
            .fold(f64::NEG_INFINITY, f64::max)
    }
    fn seeds(&self) -> Vec<Vec<f64>> {
        self.0.iter().flat_map(|s| s.seeds()).collect()
    }
}

pub const DEFAULT_CUBE_BUDGET: usize = 1 << 24;

/// Dyadic cubes below unit-grid roots. A cube `Q` is kept whole once
/// `dist(Q, ∂U) ≥ diam Q`; at the finest level every cube inside `U` is
/// kept as well. All cubes carry the orientation `e_{1…n}`.
pub fn whitney_chain(set: &dyn OpenSet, level: u32, budget: usize) -> Result<DiffChain> {
    let n = set.dim();
    if n == 0 {
        return Err(DomainError::InvalidParameter("set of dimension 0".into()));
    }
    let root_half = 0.5 * (n as f64).sqrt();
    let mut seen: BTreeMap<Vec<i64>, ()> = BTreeMap::new();
    let mut frontier: Vec<Vec<i64>> = Vec::new();
    for s in set.seeds() {
        if s.len() != n {
            return Err(DomainError::DimensionMismatch { expected: n, got: s.len() });
        }
        let c: Vec<i64> = s.iter().map(|x| x.floor() as i64).collect();
        if seen.insert(c.clone(), ()).is_none() {
            frontier.push(c);
        }
    }
    let mut roots = Vec::new();
    let mut work = 0usize;
    while let Some(c) = frontier.pop() {
        work += 1;
        if work > budget {
            return Err(DomainError::BudgetExceeded { budget });
        }
        let center: Vec<f64> = c.iter().map(|&i| i as f64 + 0.5).collect();
        if set.signed_distance(&center) <= -root_half {
            continue;
        }
        roots.push(center);
        for axis in 0..n {
            for d in [-1i64, 1] {
                let mut nb = c.clone();
                nb[axis] += d;
                if !seen.contains_key(&nb) {
                    seen.insert(nb.clone(), ());
                    frontier.push(nb);
                }
            }
        }
    }
    let sqrt_n = (n as f64).sqrt();
    let mut terms = Vec::new();
    let mut stack: Vec<(Vec<f64>, f64, u32)> = roots.into_iter().map(|c| (c, 1.0, 0)).collect();
    while let Some((c, s, l)) = stack.pop() {
        work += 1;
        if work > budget {
            return Err(DomainError::BudgetExceeded { budget });
        }
        let d = set.signed_distance(&c);
        let diam = s * sqrt_n;
        let half = 0.5 * diam;
        if d - half >= diam || (l == level && d - half >= 0.0) {
            terms.push(ChainTerm::pointed(point(&c), orientation_blade(n, s.powi(n as i32))));
            continue;
        }
        if d + half <= 0.0 || l == level {
            continue;
        }
        let q = s / 4.0;
        for mask in 0usize..(1 << n) {
            let child: Vec<f64> = c
                .iter()
                .enumerate()
                .map(|(i, x)| if mask & (1 << i) != 0 { x + q } else { x - q })
                .collect();
            stack.push((child, s / 2.0, l + 1));
        }
    }
    Ok(DiffChain::from_terms(n, n, terms)?)
}

/// Weighted oriented simplices `Σ w_i [v_0 … v_k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyhedralChain {
    pub dim: usize,
    pub grade: usize,
    pub cells: Vec<Cell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub weight: f64,
    pub vertices: Vec<Vec<f64>>,
}

fn cmp_vertex(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match (x + 0.0).total_cmp(&(y + 0.0)) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Edge vectors wedged together, unscaled.
fn simplex_blade(vertices: &[Vec<f64>]) -> Result<KVector> {
    let n = vertices[0].len();
    let mut b = KVector::scalar(n, 1.0)?;
    for v in &vertices[1..] {
        let e: Vec<f64> = v.iter().zip(&vertices[0]).map(|(x, y)| x - y).collect();
        b = wedge(&b, &KVector::vector(&e)?)?;
    }
    Ok(b)
}

impl PolyhedralChain {
    pub fn new(dim: usize, grade: usize, cells: Vec<Cell>) -> Result<Self> {
        if grade > dim {
            return Err(DomainError::InvalidParameter(format!("grade {grade} in dimension {dim}")));
        }
        for c in &cells {
            if c.vertices.len() != grade + 1 {
                return Err(DomainError::VertexCount {
                    expected: grade + 1,
                    got: c.vertices.len(),
                });
            }
            for v in &c.vertices {
                if v.len() != dim {
                    return Err(DomainError::DimensionMismatch { expected: dim, got: v.len() });
                }
            }
        }
        Ok(PolyhedralChain { dim, grade, cells })
    }

    pub fn zero(dim: usize, grade: usize) -> Self {
        PolyhedralChain {
            dim,
            grade,
            cells: Vec::new(),
        }
    }

    /// Closed polygon `v_0 → v_1 → … → v_0` as unit-weight edges.
    pub fn polygon(vertices: &[Vec<f64>]) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(DomainError::InvalidParameter("polygon needs two vertices".into()));
        }
        let dim = vertices[0].len();
        let cells = (0..vertices.len())
            .map(|i| Cell {
                weight: 1.0,
                vertices: vec![vertices[i].clone(), vertices[(i + 1) % vertices.len()].clone()],
            })
            .collect();
        PolyhedralChain::new(dim, 1, cells)
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Sorted vertices with parity-adjusted weights; equal cells merged;
    /// zero weights, repeated vertices and zero-volume cells dropped.
    pub fn canonicalize(&self) -> PolyhedralChain {
        let mut merged: BTreeMap<Vec<OrdPoint>, f64> = BTreeMap::new();
        for c in &self.cells {
            let mut order: Vec<usize> = (0..c.vertices.len()).collect();
            order.sort_by(|&a, &b| cmp_vertex(&c.vertices[a], &c.vertices[b]));
            let mut inv = 0;
            for i in 0..order.len() {
                for j in i + 1..order.len() {
                    if order[i] > order[j] {
                        inv += 1;
                    }
                }
            }
            let sorted: Vec<Vec<f64>> = order.iter().map(|&i| c.vertices[i].iter().map(|x| x + 0.0).collect()).collect();
            if sorted.windows(2).any(|w| cmp_vertex(&w[0], &w[1]) == Ordering::Equal) {
                continue;
            }
            if self.grade > 0 && simplex_blade(&sorted).map(|b| b.is_zero()).unwrap_or(true) {
                continue;
            }
            let w = if inv % 2 == 0 { c.weight } else { -c.weight };
            *merged.entry(sorted.into_iter().map(OrdPoint).collect()).or_insert(0.0) += w;
        }
        let cells = merged
            .into_iter()
            .filter(|(_, w)| *w != 0.0)
            .map(|(v, weight)| Cell {
                weight,
                vertices: v.into_iter().map(|p| p.0).collect(),
            })
            .collect();
        PolyhedralChain {
            dim: self.dim,
            grade: self.grade,
            cells,
        }
    }

    pub fn add(&self, other: &PolyhedralChain) -> Result<PolyhedralChain> {
        if self.dim != other.dim || self.grade != other.grade {
            return Err(DomainError::InvalidParameter("adding polyhedral chains of different shape".into()));
        }
        let mut cells = self.cells.clone();
        cells.extend(other.cells.iter().cloned());
        Ok(PolyhedralChain {
            dim: self.dim,
            grade: self.grade,
            cells,
        }
        .canonicalize())
    }

    pub fn scale(&self, s: f64) -> PolyhedralChain {
        PolyhedralChain {
            dim: self.dim,
            grade: self.grade,
            cells: self
                .cells
                .iter()
                .map(|c| Cell {
                    weight: c.weight * s,
                    vertices: c.vertices.clone(),
                })
                .collect(),
        }
    }

    /// Σ |weight| · volume.
    pub fn mass(&self) -> Result<f64> {
        let mut fact = 1.0;
        for i in 2..=self.grade {
            fact *= i as f64;
        }
        let mut m = 0.0;
        for c in &self.cells {
            m += c.weight.abs() * simplex_blade(&c.vertices)?.euclidean_norm() / fact;
        }
        Ok(m)
    }

    pub fn is_closed(&self) -> bool {
        self.grade == 0 || polyhedral_boundary(self).map(|b| b.is_empty()).unwrap_or(false)
    }
}

#[derive(Clone, Debug, PartialEq)]
struct OrdPoint(Vec<f64>);

impl Eq for OrdPoint {}

impl PartialOrd for OrdPoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdPoint {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_vertex(&self.0, &other.0)
    }
}

/// Alternating-face boundary, canonicalized.
pub fn polyhedral_boundary(p: &PolyhedralChain) -> Result<PolyhedralChain> {
    if p.grade == 0 {
        return Err(DomainError::InvalidParameter("boundary of a 0-chain".into()));
    }
    let mut cells = Vec::with_capacity(p.cells.len() * (p.grade + 1));
    for c in &p.cells {
        for i in 0..c.vertices.len() {
            let mut v = c.vertices.clone();
            v.remove(i);
            cells.push(Cell {
                weight: if i % 2 == 0 { c.weight } else { -c.weight },
                vertices: v,
            });
        }
    }
    Ok(PolyhedralChain {
        dim: p.dim,
        grade: p.grade - 1,
        cells,
    }
    .canonicalize())
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// Freudenthal refinement of a simplex into `2^{Lk}` congruent pieces, each
/// represented by `(barycenter; blade / 2^{Lk})`.
pub fn simplex_chain(vertices: &[Vec<f64>], level: u32) -> Result<DiffChain> {
    if vertices.is_empty() {
        return Err(DomainError::VertexCount { expected: 1, got: 0 });
    }
    let n = vertices[0].len();
    let k = vertices.len() - 1;
    if k > n {
        return Err(DomainError::VertexCount { expected: n + 1, got: vertices.len() });
    }
    for v in vertices {
        if v.len() != n {
            return Err(DomainError::DimensionMismatch { expected: n, got: v.len() });
        }
    }
    if k == 0 {
        return Ok(DiffChain::pointed(&vertices[0], KVector::scalar(n, 1.0)?)?);
    }
    let blade = simplex_blade(vertices)?;
    if blade.is_zero() {
        return Err(DomainError::Degenerate);
    }
    if (k as u32) * level > 36 {
        return Err(DomainError::InvalidParameter(format!("level {level} too fine")));
    }
    let mut fact = 1.0;
    for i in 2..=k {
        fact *= i as f64;
    }
    let m = 1usize << level;
    let pieces = m.pow(k as u32);
    let alpha = blade.scale(1.0 / (fact * pieces as f64));
    let steps: Vec<Vec<f64>> = (1..=k)
        .map(|i| vertices[i].iter().zip(&vertices[i - 1]).map(|(a, b)| a - b).collect())
        .collect();
    let perms = permutations(k);
    let mut terms = Vec::with_capacity(pieces);
    let mut a = vec![0usize; k];
    let mut rank = vec![0usize; k];
    loop {
        if a.windows(2).all(|w| w[0] >= w[1]) {
            for pi in &perms {
                for (t, &i) in pi.iter().enumerate() {
                    rank[i] = t;
                }
                let inside = (0..k).all(|i| (i + 1..k).all(|j| a[i] > a[j] || rank[i] < rank[j]));
                if !inside {
                    continue;
                }
                let mut p: Vec<f64> = vertices[0].clone();
                for (i, step) in steps.iter().enumerate() {
                    let frac = (k - rank[i]) as f64 / (k + 1) as f64;
                    let x = (a[i] as f64 + frac) / m as f64;
                    for (c, s) in p.iter_mut().zip(step) {
                        *c += x * s;
                    }
                }
                terms.push(ChainTerm::pointed(point(&p), alpha.clone()));
            }
        }
        let mut i = 0;
        while i < k {
            a[i] += 1;
            if a[i] < m {
                break;
            }
            a[i] = 0;
            i += 1;
        }
        if i == k {
            break;
        }
    }
    Ok(DiffChain::from_terms(n, k, terms)?)
}

pub fn polyhedral_to_pointed(p: &PolyhedralChain, level: u32) -> Result<DiffChain> {
    let mut out = DiffChain::zero(p.dim, p.grade)?;
    for c in &p.cells {
        out.add_assign(simplex_chain(&c.vertices, level)?.scale(c.weight))?;
    }
    Ok(out)
}

/// Knots `γ(i/N)`; a curve whose end is within rounding of its start is
/// closed exactly.
fn knots<F>(gamma: &F, n_segments: usize) -> Vec<Vec<f64>>
where
    F: Fn(f64) -> Vec<f64>,
{
    let mut k: Vec<Vec<f64>> = (0..=n_segments).map(|i| gamma(i as f64 / n_segments as f64)).collect();
    let scale = k.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    if dist(&k[0], &k[n_segments]) <= 1e-13 * (1.0 + scale) {
        k[n_segments] = k[0].clone();
    }
    k
}

/// `Σ_i (γ(t_i^mid); γ(t_{i+1}) − γ(t_i))` over `N` equal parameter steps of `[0,1]`.
pub fn curve_chain<F>(gamma: F, n_segments: usize) -> Result<DiffChain>
where
    F: Fn(f64) -> Vec<f64>,
{
    if n_segments == 0 {
        return Err(DomainError::InvalidParameter("curve needs at least one segment".into()));
    }
    let n = n_segments as f64;
    let knots = knots(&gamma, n_segments);
    let dim = knots[0].len();
    let mut terms = Vec::with_capacity(n_segments);
    for i in 0..n_segments {
        let mid = gamma((i as f64 + 0.5) / n);
        if mid.len() != dim || knots[i + 1].len() != dim {
            return Err(DomainError::DimensionMismatch { expected: dim, got: mid.len() });
        }
        let chord: Vec<f64> = knots[i + 1].iter().zip(&knots[i]).map(|(a, b)| a - b).collect();
        terms.push(ChainTerm::pointed(point(&mid), KVector::vector(&chord)?));
    }
    Ok(DiffChain::from_terms(dim, 1, terms)?)
}

/// The polyline through `γ(i/N)` as a polyhedral 1-chain.
pub fn curve_polyline<F>(gamma: F, n_segments: usize) -> Result<PolyhedralChain>
where
    F: Fn(f64) -> Vec<f64>,
{
    if n_segments == 0 {
        return Err(DomainError::InvalidParameter("curve needs at least one segment".into()));
    }
    let knots = knots(&gamma, n_segments);
    let cells = knots
        .windows(2)
        .map(|w| Cell {
            weight: 1.0,
            vertices: vec![w[0].clone(), w[1].clone()],
        })
        .collect();
    PolyhedralChain::new(knots[0].len(), 1, cells)
}

/// Unit circle about `center` with radius `radius`, counterclockwise.
pub fn circle(center: [f64; 2], radius: f64) -> impl Fn(f64) -> Vec<f64> {
    move |t| {
        let a = std::f64::consts::TAU * t;
        vec![center[0] + radius * a.cos(), center[1] + radius * a.sin()]
    }
}

/// Closed polygon with each edge split into `per_edge` equal segments,
/// each `(segment midpoint; segment chord)`.
pub fn polygon_chain(vertices: &[Vec<f64>], per_edge: usize) -> Result<DiffChain> {
    if vertices.len() < 2 || per_edge == 0 {
        return Err(DomainError::InvalidParameter("polygon needs two vertices and one segment per edge".into()));
    }
    let dim = vertices[0].len();
    let mut terms = Vec::with_capacity(vertices.len() * per_edge);
    let n = per_edge as f64;
    for i in 0..vertices.len() {
        let a = &vertices[i];
        let b = &vertices[(i + 1) % vertices.len()];
        if a.len() != dim || b.len() != dim {
            return Err(DomainError::DimensionMismatch { expected: dim, got: b.len() });
        }
        let at = |t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };
        for s in 0..per_edge {
            let p0 = at(s as f64 / n);
            let p1 = at((s + 1) as f64 / n);
            let mid = at((s as f64 + 0.5) / n);
            let chord: Vec<f64> = p1.iter().zip(&p0).map(|(x, y)| x - y).collect();
            terms.push(ChainTerm::pointed(point(&mid), KVector::vector(&chord)?));
        }
    }
    Ok(DiffChain::from_terms(dim, 1, terms)?)
}

/// Counterclockwise square `[c−s/2, c+s/2]^2`.
pub fn square_vertices(center: [f64; 2], side: f64) -> Vec<Vec<f64>> {
    let h = side / 2.0;
    vec![
        vec![center[0] - h, center[1] - h],
        vec![center[0] + h, center[1] - h],
        vec![center[0] + h, center[1] + h],
        vec![center[0] - h, center[1] + h],
    ]
}

/// Koch snowflake vertices after `L` refinements of the counterclockwise
/// unit triangle with outward bumps; `3·4^L` edges.
pub fn koch_vertices(level: u32) -> Vec<Vec<f64>> {
    let mut pts: Vec<[f64; 2]> = vec![[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]];
    let (s, c) = (-std::f64::consts::FRAC_PI_3).sin_cos();
    for _ in 0..level {
        let mut next = Vec::with_capacity(pts.len() * 4);
        for i in 0..pts.len() {
            let a = pts[i];
            let b = pts[(i + 1) % pts.len()];
            let d = [(b[0] - a[0]) / 3.0, (b[1] - a[1]) / 3.0];
            let p1 = [a[0] + d[0], a[1] + d[1]];
            let p3 = [a[0] + 2.0 * d[0], a[1] + 2.0 * d[1]];
            let peak = [p1[0] + c * d[0] - s * d[1], p1[1] + s * d[0] + c * d[1]];
            next.extend_from_slice(&[a, p1, peak, p3]);
        }
        pts = next;
    }
    pts.into_iter().map(|p| p.to_vec()).collect()
}

pub fn koch_centroid() -> [f64; 2] {
    [0.5, 3f64.sqrt() / 6.0]
}

/// Koch boundary as a closed polyhedral chain and as a midpoint–chord chain.
pub fn koch_boundary(level: u32) -> Result<(PolyhedralChain, DiffChain)> {
    let v = koch_vertices(level);
    Ok((PolyhedralChain::polygon(&v)?, polygon_chain(&v, 1)?))
}

fn point_on_segment(z: &[f64], a: &[f64], b: &[f64]) -> bool {
    let ab: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let az: Vec<f64> = z.iter().zip(a).map(|(x, y)| x - y).collect();
    let l2: f64 = ab.iter().map(|x| x * x).sum();
    if l2 == 0.0 {
        return dist(z, a) == 0.0;
    }
    let t = (ab.iter().zip(&az).map(|(x, y)| x * y).sum::<f64>() / l2).clamp(0.0, 1.0);
    let proj: Vec<f64> = a.iter().zip(&ab).map(|(x, d)| x + t * d).collect();
    let scale = l2.sqrt().max(dist(z, a)).max(1e-300);
    dist(z, &proj) <= 1e-12 * scale
}

/// Cone over a closed polyhedral 1-chain: cells `(z, a_i, b_i)` with the edge weights.
pub fn cone_at(z: &[f64], p: &PolyhedralChain) -> Result<PolyhedralChain> {
    if p.grade != 1 {
        return Err(DomainError::InvalidParameter("cone_at needs a 1-chain".into()));
    }
    if z.len() != p.dim {
        return Err(DomainError::DimensionMismatch { expected: p.dim, got: z.len() });
    }
    if !p.is_closed() {
        return Err(DomainError::NotClosed);
    }
    let mut cells = Vec::with_capacity(p.cells.len());
    for c in &p.cells {
        if point_on_segment(z, &c.vertices[0], &c.vertices[1]) {
            return Err(DomainError::PointOnEdge);
        }
        cells.push(Cell {
            weight: c.weight,
            vertices: vec![z.to_vec(), c.vertices[0].clone(), c.vertices[1].clone()],
        });
    }
    PolyhedralChain::new(p.dim, 2, cells)
}

/// Oriented area of a planar polyhedral 2-chain (`Σ w · signed area`).
pub fn signed_area(p: &PolyhedralChain) -> f64 {
    p.cells
        .iter()
        .map(|c| {
            let (a, b, d) = (&c.vertices[0], &c.vertices[1], &c.vertices[2]);
            c.weight * 0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0]))
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::form::{evaluate, FormSpec};
    use crate::field::ScalarField;

    #[test]
    fn cube_examples() {
        let c0 = cube_chain(&[0.5, 0.5], 1.0, 0).unwrap();
        assert_eq!(c0.len(), 1);
        assert_eq!(c0.terms()[0].point(), &[0.5, 0.5]);
        let c1 = cube_chain(&[0.5, 0.5], 1.0, 1).unwrap();
        assert_eq!(c1.len(), 4);
        assert!(c1.terms().iter().all(|t| t.alpha().coeff(MultiIndex::full(2)) == 0.25));
        let area = FormSpec::basis(2, &[0, 1]).unwrap();
        for k in 0..6 {
            let c = cube_chain(&[0.5, 0.5], 1.0, k).unwrap();
            assert_eq!(evaluate(&area, &c).unwrap(), 1.0);
            let resorted = DiffChain::from_terms(2, 2, c.terms().to_vec()).unwrap();
            assert_eq!(resorted, c);
        }
    }

    #[test]
    fn simplex_examples() {
        let s = simplex_chain(&[vec![0.0, 1.0], vec![2.0, 5.0]], 0).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.terms()[0].point(), &[1.0, 3.0]);
        assert_eq!(s.terms()[0].alpha().to_vector(), vec![2.0, 4.0]);
        let dx = FormSpec::basis(2, &[0]).unwrap();
        for l in 0..5 {
            let s = simplex_chain(&[vec![0.0, 1.0], vec![2.0, 5.0]], l).unwrap();
            assert!((evaluate(&dx, &s).unwrap() - 2.0).abs() < 1e-14);
            let tri = simplex_chain(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]], l).unwrap();
            assert!((tri.mass() - 0.5).abs() < 1e-14);
            assert_eq!(tri.len(), 1 << (2 * l));
        }
    }

    #[test]
    fn simplex_pieces_integrate_linear_functions() {
        let tri = vec![vec![0.1, 0.2], vec![1.3, -0.4], vec![0.7, 0.9]];
        let xdy = FormSpec::top(ScalarField::coordinate(2, 0));
        let blade = simplex_blade(&tri).unwrap().coeff(MultiIndex::full(2)) / 2.0;
        let centroid_x = (0.1 + 1.3 + 0.7) / 3.0;
        for l in 0..4 {
            let s = simplex_chain(&tri, l).unwrap();
            assert!((evaluate(&xdy, &s).unwrap() - blade * centroid_x).abs() < 1e-13);
        }
    }

    #[test]
    fn boundary_examples() {
        let seg = PolyhedralChain::new(1, 1, vec![Cell { weight: 1.0, vertices: vec![vec![0.0], vec![2.0]] }]).unwrap();
        let b = polyhedral_boundary(&seg).unwrap();
        assert_eq!(b.cells.len(), 2);
        assert_eq!(b.cells[0], Cell { weight: -1.0, vertices: vec![vec![0.0]] });
        assert_eq!(b.cells[1], Cell { weight: 1.0, vertices: vec![vec![2.0]] });
        let tri = PolyhedralChain::new(
            2,
            2,
            vec![Cell { weight: 1.0, vertices: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]] }],
        )
        .unwrap();
        let edges = polyhedral_boundary(&tri).unwrap();
        assert_eq!(edges.cells.len(), 3);
        assert!(polyhedral_boundary(&edges).unwrap().is_empty());
    }

    #[test]
    fn whitney_disk_and_errors() {
        let disk = Ball { center: vec![0.0, 0.0], radius: 1.0 };
        let mut prev = 0.0;
        for l in 3..=8 {
            let m = whitney_chain(&disk, l, DEFAULT_CUBE_BUDGET).unwrap().mass();
            assert!(m >= prev);
            assert!(m <= 4.0);
            prev = m;
        }
        assert!((prev / std::f64::consts::PI - 1.0).abs() < 0.01, "{prev}");
        let half = HalfSpace { dim: 2, axis: 0, offset: 0.0 };
        assert!(matches!(whitney_chain(&half, 4, 10_000), Err(DomainError::BudgetExceeded { .. })));
    }

    #[test]
    fn curve_examples() {
        let c = curve_chain(circle([0.0, 0.0], 1.0), 1 << 10).unwrap();
        let w = FormSpec::one_form(vec![ScalarField::coordinate(2, 1).scale(-1.0), ScalarField::coordinate(2, 0)]).unwrap();
        let v = evaluate(&w, &c).unwrap();
        assert!((v - std::f64::consts::TAU).abs() < 1e-5, "{v}");
        let poly = curve_polyline(circle([0.0, 0.0], 1.0), 64).unwrap();
        assert!(polyhedral_boundary(&poly).unwrap().is_empty());
    }

    #[test]
    fn koch_examples() {
        assert_eq!(koch_vertices(0).len(), 3);
        let v = koch_vertices(1);
        assert_eq!(v.len(), 12);
        let len: f64 = (0..12).map(|i| dist(&v[i], &v[(i + 1) % 12])).sum();
        assert!((len - 4.0).abs() < 1e-12);
        assert_eq!(koch_vertices(3).len(), 3 * 64);
    }

    #[test]
    fn cone_examples() {
        let sq = PolyhedralChain::polygon(&square_vertices([0.5, 0.5], 1.0)).unwrap();
        let cone = cone_at(&[0.5, 0.5], &sq).unwrap();
        assert_eq!(cone.cells.len(), 4);
        assert!((signed_area(&cone) - 1.0).abs() < 1e-15);
        let outside = cone_at(&[3.0, -2.0], &sq).unwrap();
        assert!((signed_area(&outside) - 1.0).abs() < 1e-14);
        assert_eq!(polyhedral_boundary(&cone).unwrap(), sq.canonicalize());
        assert_eq!(cone_at(&[0.5, 0.0], &sq), Err(DomainError::PointOnEdge));
        let open = PolyhedralChain::new(2, 1, vec![sq.cells[0].clone()]).unwrap();
        assert_eq!(cone_at(&[0.5, 0.5], &open), Err(DomainError::NotClosed));
    }
}
