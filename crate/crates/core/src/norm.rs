//! Order-r norm bounds for chains: decomposition certificates from above,
//! dual form probes from below.

use std::collections::BTreeMap;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use smallvec::SmallVec;
use thiserror::Error;

use crate::chain::{point, ChainError, ChainTerm, DiffChain, Point};
use crate::field::ScalarField;
use crate::form::{evaluate, FormError, FormSpec, Region};
use crate::jet::Jet;
use crate::multivector::{basis, mass_upper, KVector};
use crate::numeric::{dist, neumaier_sum, norm};

/// Pairs farther apart than this are cheaper as two mass terms.
pub const PAIRING_CUTOFF: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("chain has derivative markers; no finite-order certificate is available")]
    MarkedTerms,
    #[error("order must be at least {min}, got {got}")]
    InvalidOrder { min: usize, got: usize },
    #[error("probe {index} has no declared bound at order {order}")]
    MissingDeclaredBound { index: usize, order: usize },
    #[error("chain support leaves the probe region")]
    OutsideRegion,
    #[error("bracket inverted: lower {lower} > upper {upper}")]
    BracketInverted { lower: f64, upper: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Form(#[from] FormError),
}

pub type Result<T> = std::result::Result<T, NormError>;

/// `Δ_U(p; α)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub point: Point,
    pub alpha: KVector,
    pub vectors: SmallVec<[Point; 1]>,
}

impl Generator {
    pub fn mass(point: Point, alpha: KVector) -> Self {
        Generator {
            point,
            alpha,
            vectors: SmallVec::new(),
        }
    }

    pub fn order(&self) -> usize {
        self.vectors.len()
    }

    /// `‖u_1‖…‖u_j‖·mass_upper(α)`.
    pub fn cost(&self) -> f64 {
        self.vectors.iter().fold(mass_upper(&self.alpha), |c, u| c * norm(u))
    }

    fn push_terms(&self, out: &mut Vec<ChainTerm>) {
        let j = self.vectors.len();
        for mask in 0usize..(1 << j) {
            let mut p = self.point.clone();
            for (b, u) in self.vectors.iter().enumerate() {
                if mask & (1 << b) != 0 {
                    for (x, d) in p.iter_mut().zip(u) {
                        *x += d;
                    }
                }
            }
            let neg = (j - mask.count_ones() as usize) % 2 == 1;
            let a = if neg { self.alpha.neg() } else { self.alpha.clone() };
            out.push(ChainTerm::pointed(p, a));
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionCertificate {
    pub order: usize,
    pub dim: usize,
    pub grade: usize,
    pub generators: Vec<Generator>,
    pub cost: f64,
}

/// Result of expanding a certificate against its target.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    /// Expansion minus target cancelled term by term with no rounding residue.
    pub exact: bool,
    pub residual_terms: usize,
    pub residual_mass: f64,
}

impl DecompositionCertificate {
    fn from_generators(order: usize, dim: usize, grade: usize, generators: Vec<Generator>) -> Self {
        let cost = neumaier_sum(generators.iter().map(Generator::cost));
        DecompositionCertificate {
            order,
            dim,
            grade,
            generators,
            cost,
        }
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn expand(&self) -> Result<DiffChain> {
        let mut terms = Vec::new();
        for g in &self.generators {
            g.push_terms(&mut terms);
        }
        Ok(DiffChain::from_terms(self.dim, self.grade, terms)?)
    }

    /// Expands and subtracts `target`. Terms left over after exact merging
    /// are grouped at a relative `1e-10` point scale to separate rounding
    /// strays from genuine mismatch.
    pub fn verify(&self, target: &DiffChain) -> Result<Witness> {
        let mut r = self.expand()?;
        r.add_assign(target.neg())?;
        if r.is_empty() {
            return Ok(Witness {
                exact: true,
                residual_terms: 0,
                residual_mass: 0.0,
            });
        }
        let scale = r
            .terms()
            .iter()
            .flat_map(|t| t.point().iter().map(|x| x.abs()))
            .fold(0.0f64, f64::max);
        let q = 1e-10 * (1.0 + scale);
        let mut groups: BTreeMap<Vec<i64>, KVector> = BTreeMap::new();
        for t in r.terms() {
            let key: Vec<i64> = t.point().iter().map(|x| (x / q).round() as i64).collect();
            match groups.get_mut(&key) {
                Some(a) => a.add_assign(t.alpha()).map_err(ChainError::from)?,
                None => {
                    groups.insert(key, t.alpha().clone());
                }
            }
        }
        let scale_alpha = target.terms().iter().map(|t| t.alpha().max_abs()).fold(0.0, f64::max);
        let left: Vec<f64> = groups
            .values()
            .map(mass_upper)
            .filter(|m| *m > 1e-12 * scale_alpha)
            .collect();
        Ok(Witness {
            exact: false,
            residual_terms: left.len(),
            residual_mass: neumaier_sum(left),
        })
    }
}

fn ensure_marker_free(a: &DiffChain) -> Result<()> {
    if a.is_marker_free() {
        Ok(())
    } else {
        Err(NormError::MarkedTerms)
    }
}

/// Every term as an order-0 generator; cost is the mass.
pub fn certify_trivial(a: &DiffChain, r: usize) -> Result<DecompositionCertificate> {
    ensure_marker_free(a)?;
    let gens = a
        .terms()
        .iter()
        .map(|t| Generator::mass(point(t.point()), t.alpha().clone()))
        .collect();
    Ok(DecompositionCertificate::from_generators(r, a.dim(), a.grade(), gens))
}

/// Uniform grid over a point set supporting nearest-active queries and removal.
struct NearestGrid {
    dim: usize,
    coords: Vec<f64>,
    lo: Vec<f64>,
    h: f64,
    shape: Vec<usize>,
    start: Vec<usize>,
    count: Vec<u32>,
    items: Vec<u32>,
    slot: Vec<u32>,
    cell_of: Vec<u32>,
    active: usize,
}

impl NearestGrid {
    fn new(dim: usize, coords: Vec<f64>) -> Self {
        let n = coords.len() / dim.max(1);
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for p in coords.chunks(dim) {
            for i in 0..dim {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        let extent = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0f64, f64::max);
        let per_axis = (n as f64).powf(1.0 / dim as f64).ceil().max(1.0);
        let h = if extent > 0.0 { extent / per_axis } else { 1.0 };
        let shape: Vec<usize> = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| (((b - a) / h).floor() as usize + 1).min(1 << 20))
            .collect();
        let cells: usize = shape.iter().product();
        let mut g = NearestGrid {
            dim,
            coords,
            lo,
            h,
            shape,
            start: vec![0; cells + 1],
            count: vec![0; cells],
            items: vec![0; n],
            slot: vec![0; n],
            cell_of: vec![0; n],
            active: n,
        };
        for k in 0..n {
            let c = g.flat(&g.cell(&g.coords[k * dim..(k + 1) * dim]));
            g.cell_of[k] = c as u32;
            g.count[c] += 1;
        }
        for c in 0..cells {
            g.start[c + 1] = g.start[c] + g.count[c] as usize;
        }
        let mut fill = g.start.clone();
        for k in 0..n {
            let c = g.cell_of[k] as usize;
            g.items[fill[c]] = k as u32;
            g.slot[k] = fill[c] as u32;
            fill[c] += 1;
        }
        g
    }

    fn cell(&self, p: &[f64]) -> Vec<i64> {
        p.iter()
            .zip(&self.lo)
            .map(|(x, a)| ((x - a) / self.h).floor() as i64)
            .collect()
    }

    fn flat(&self, c: &[i64]) -> usize {
        let mut idx = 0usize;
        for i in (0..self.dim).rev() {
            let ci = c[i].clamp(0, self.shape[i] as i64 - 1) as usize;
            idx = idx * self.shape[i] + ci;
        }
        idx
    }

    fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    fn remove(&mut self, k: usize) {
        let c = self.cell_of[k] as usize;
        let last = self.start[c] + self.count[c] as usize - 1;
        let s = self.slot[k] as usize;
        let other = self.items[last] as usize;
        self.items.swap(s, last);
        self.slot[other] = s as u32;
        self.slot[k] = last as u32;
        self.count[c] -= 1;
        self.active -= 1;
    }

    /// Nearest active point at distance `< cutoff`; ties go to the lower index.
    fn nearest(&self, q: &[f64], cutoff: f64) -> Option<(usize, f64)> {
        if self.active == 0 {
            return None;
        }
        let qc = self.cell(q);
        let mut best: Option<(usize, f64)> = None;
        let mut lo = vec![0i64; self.dim];
        let mut hi = vec![0i64; self.dim];
        let mut cur = vec![0i64; self.dim];
        for r in 0i64.. {
            let reach = (r - 1).max(0) as f64 * self.h;
            if reach >= cutoff || best.map(|(_, d)| d <= reach).unwrap_or(false) {
                break;
            }
            let mut covers_all = true;
            let mut empty = false;
            for i in 0..self.dim {
                let top = self.shape[i] as i64 - 1;
                lo[i] = (qc[i] - r).max(0);
                hi[i] = (qc[i] + r).min(top);
                if lo[i] > hi[i] {
                    empty = true;
                }
                if qc[i] - r > 0 || qc[i] + r < top {
                    covers_all = false;
                }
            }
            if !empty {
                cur.copy_from_slice(&lo);
                loop {
                    let cheb = cur.iter().zip(&qc).map(|(a, b)| (a - b).abs()).max().unwrap_or(0);
                    if cheb == r {
                        let c = self.flat(&cur);
                        let s = self.start[c];
                        for &k in &self.items[s..s + self.count[c] as usize] {
                            let k = k as usize;
                            let d = dist(q, self.point(k));
                            if d < cutoff {
                                let better = match best {
                                    None => true,
                                    Some((bk, bd)) => d < bd || (d == bd && k < bk),
                                };
                                if better {
                                    best = Some((k, d));
                                }
                            }
                        }
                    }
                    let mut i = 0;
                    loop {
                        if i == self.dim {
                            break;
                        }
                        if cur[i] < hi[i] {
                            cur[i] += 1;
                            break;
                        }
                        cur[i] = lo[i];
                        i += 1;
                    }
                    if i == self.dim {
                        break;
                    }
                }
            }
            if covers_all {
                break;
            }
        }
        best
    }
}

type DirKey = SmallVec<[(u32, i64); 4]>;

/// Sign-normalized unit direction, quantized, plus sign and Euclidean magnitude.
fn direction_key(a: &KVector) -> (DirKey, f64, f64) {
    let m = a.euclidean_norm();
    let first = a.terms().next().map(|(_, c)| c).unwrap_or(1.0);
    let s = if first < 0.0 { -1.0 } else { 1.0 };
    let key = a
        .terms()
        .map(|(i, c)| (i.bits(), (s * c / m * 1e12).round() as i64))
        .collect();
    (key, s, m)
}

fn part_of(alpha: &KVector, amount: f64, whole: f64) -> KVector {
    if amount == whole {
        alpha.clone()
    } else {
        alpha.scale(amount / whole)
    }
}

struct Dipole {
    base: Point,
    tip: Point,
    alpha: KVector,
}

/// Greedy nearest-opposite matching of translates into `Δ_u` generators,
/// followed for `r ≥ 2` by matching opposite equal-`u` dipoles into `Δ_wΔ_u`.
pub fn certify_pairing(a: &DiffChain, r: usize) -> Result<DecompositionCertificate> {
    if r == 0 {
        return Err(NormError::InvalidOrder { min: 1, got: 0 });
    }
    ensure_marker_free(a)?;
    let dim = a.dim();
    let terms = a.terms();
    let mut groups: BTreeMap<DirKey, (Vec<(u32, f64)>, Vec<(u32, f64)>)> = BTreeMap::new();
    for (idx, t) in terms.iter().enumerate() {
        let (key, s, m) = direction_key(t.alpha());
        let e = groups.entry(key).or_default();
        if s > 0.0 {
            e.0.push((idx as u32, m));
        } else {
            e.1.push((idx as u32, m));
        }
    }
    let mut gens: Vec<Generator> = Vec::with_capacity(terms.len());
    let mut dipoles: Vec<Dipole> = Vec::new();
    for (_, (pos, neg)) in groups {
        if neg.is_empty() || pos.is_empty() {
            for (i, _) in pos.iter().chain(&neg) {
                let t = &terms[*i as usize];
                gens.push(Generator::mass(point(t.point()), t.alpha().clone()));
            }
            continue;
        }
        let mut coords = Vec::with_capacity(neg.len() * dim);
        for (i, _) in &neg {
            coords.extend_from_slice(terms[*i as usize].point());
        }
        let mut grid = NearestGrid::new(dim, coords);
        let mut rem_neg: Vec<f64> = neg.iter().map(|(_, m)| *m).collect();
        for &(pi, m_pos) in &pos {
            let tp = &terms[pi as usize];
            let mut rem = m_pos;
            while rem > 0.0 {
                let Some((k, _)) = grid.nearest(tp.point(), PAIRING_CUTOFF) else {
                    break;
                };
                let tn = &terms[neg[k].0 as usize];
                let t = rem.min(rem_neg[k]);
                let beta = part_of(tp.alpha(), t, m_pos);
                let u: Point = tp.point().iter().zip(tn.point()).map(|(x, y)| x - y).collect();
                if r >= 2 {
                    dipoles.push(Dipole {
                        base: point(tn.point()),
                        tip: point(tp.point()),
                        alpha: beta,
                    });
                } else {
                    let mut vectors = SmallVec::new();
                    vectors.push(u);
                    gens.push(Generator {
                        point: point(tn.point()),
                        alpha: beta,
                        vectors,
                    });
                }
                rem = if t == rem { 0.0 } else { rem - t };
                rem_neg[k] = if t == rem_neg[k] { 0.0 } else { rem_neg[k] - t };
                if rem_neg[k] == 0.0 {
                    grid.remove(k);
                }
            }
            if rem > 0.0 {
                gens.push(Generator::mass(point(tp.point()), part_of(tp.alpha(), rem, m_pos)));
            }
        }
        for (k, &(ni, m_neg)) in neg.iter().enumerate() {
            if rem_neg[k] > 0.0 {
                let tn = &terms[ni as usize];
                gens.push(Generator::mass(point(tn.point()), part_of(tn.alpha(), rem_neg[k], m_neg)));
            }
        }
    }
    if r >= 2 {
        pair_dipoles(dim, dipoles, &mut gens);
    }
    Ok(DecompositionCertificate::from_generators(r, dim, a.grade(), gens))
}

fn lex_negative(u: &[f64]) -> bool {
    u.iter().find(|x| **x != 0.0).map(|x| *x < 0.0).unwrap_or(false)
}

fn dipole_generator(base: Point, tip: &[f64], alpha: KVector) -> Generator {
    let u: Point = tip.iter().zip(&base).map(|(x, y)| x - y).collect();
    let mut vectors = SmallVec::new();
    vectors.push(u);
    Generator {
        point: base,
        alpha,
        vectors,
    }
}

fn pair_dipoles(dim: usize, dipoles: Vec<Dipole>, gens: &mut Vec<Generator>) {
    // Orient so that u is lex-positive; Δ_u(q; β) = Δ_{−u}(q+u; −β).
    let dipoles: Vec<Dipole> = dipoles
        .into_iter()
        .map(|d| {
            let u: Vec<f64> = d.tip.iter().zip(&d.base).map(|(x, y)| x - y).collect();
            if lex_negative(&u) {
                Dipole {
                    base: d.tip,
                    tip: d.base,
                    alpha: d.alpha.neg(),
                }
            } else {
                d
            }
        })
        .collect();
    let mut groups: BTreeMap<(Vec<i64>, DirKey, i64), (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, d) in dipoles.iter().enumerate() {
        let u: Vec<i64> = d
            .tip
            .iter()
            .zip(&d.base)
            .map(|(x, y)| ((x - y) * 1e12).round() as i64)
            .collect();
        let (key, s, m) = direction_key(&d.alpha);
        let e = groups.entry((u, key, (m * 1e12).round() as i64)).or_default();
        if s > 0.0 {
            e.0.push(i);
        } else {
            e.1.push(i);
        }
    }
    let mut used = vec![false; dipoles.len()];
    for (_, (pos, neg)) in groups {
        if pos.is_empty() || neg.is_empty() {
            continue;
        }
        let mut coords = Vec::with_capacity(neg.len() * dim);
        for &i in &neg {
            coords.extend_from_slice(&dipoles[i].base);
        }
        let mut grid = NearestGrid::new(dim, coords);
        for &i in &pos {
            if let Some((k, _)) = grid.nearest(&dipoles[i].base, PAIRING_CUTOFF) {
                grid.remove(k);
                let j = neg[k];
                used[i] = true;
                used[j] = true;
                // Δ_u(q1; β) + Δ_u(q2; −β) = Δ_w Δ_u(q2; β), w = q1 − q2.
                let (p1, p2) = (&dipoles[i], &dipoles[j]);
                let u: Point = p1.tip.iter().zip(&p1.base).map(|(x, y)| x - y).collect();
                let w: Point = p1.base.iter().zip(&p2.base).map(|(x, y)| x - y).collect();
                let mut vectors = SmallVec::new();
                vectors.push(w);
                vectors.push(u);
                gens.push(Generator {
                    point: p2.base.clone(),
                    alpha: p1.alpha.clone(),
                    vectors,
                });
            }
        }
    }
    for (d, u) in dipoles.into_iter().zip(used) {
        if !u {
            gens.push(dipole_generator(d.base, &d.tip, d.alpha));
        }
    }
}

/// Cheapest available certificate at order `r`.
pub fn best_certificate(a: &DiffChain, r: usize) -> Result<DecompositionCertificate> {
    let trivial = certify_trivial(a, r)?;
    if r == 0 {
        return Ok(trivial);
    }
    let paired = certify_pairing(a, r)?;
    Ok(if paired.cost <= trivial.cost { paired } else { trivial })
}

/// `Δ_{2^{-i}v}(p; 2^i α) − Δ_{2^{-(i+j)}v}(p; 2^{i+j} α)`.
pub fn dipole_difference(p: &[f64], alpha: &KVector, v: &[f64], i: u32, j: u32) -> Result<DiffChain> {
    let mut terms = Vec::new();
    for (l, sign) in [(i, 1.0), (i + j, -1.0)] {
        let s = (-(l as f64)).exp2();
        let w = (l as f64).exp2() * sign;
        let tip: Point = p.iter().zip(v).map(|(x, y)| x + s * y).collect();
        terms.push(ChainTerm::pointed(tip, alpha.scale(w)));
        terms.push(ChainTerm::pointed(point(p), alpha.scale(-w)));
    }
    Ok(DiffChain::from_terms(p.len(), alpha.grade(), terms)?)
}

/// Telescoping certificate for [`dipole_difference`]: the sum over
/// `m = 2..2^j` of `Δ_{(m−1)sv} Δ_{sv}(p; 2^i α)` with `s = 2^{-(i+j)}`.
pub fn certify_dipole_telescoping(
    p: &[f64],
    alpha: &KVector,
    v: &[f64],
    i: u32,
    j: u32,
) -> Result<DecompositionCertificate> {
    if p.len() != v.len() || p.len() != alpha.dim() {
        return Err(ChainError::DimensionMismatch {
            left: p.len(),
            right: alpha.dim(),
        }
        .into());
    }
    if j > 30 || i > 60 {
        return Err(NormError::InvalidParameter("telescoping level too large".into()));
    }
    let s = (-((i + j) as f64)).exp2();
    let beta = alpha.scale((i as f64).exp2());
    let sv: Point = v.iter().map(|x| x * s).collect();
    let mut gens = Vec::with_capacity(1 << j);
    for m in 2u64..=(1u64 << j) {
        let k = (m - 1) as f64 * s;
        let w: Point = v.iter().map(|x| x * k).collect();
        let mut vectors = SmallVec::new();
        vectors.push(w);
        vectors.push(sv.clone());
        gens.push(Generator {
            point: point(p),
            alpha: beta.clone(),
            vectors,
        });
    }
    Ok(DecompositionCertificate::from_generators(2, p.len(), alpha.grade(), gens))
}

/// A dual lower bound and the probe attaining it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBound {
    pub value: f64,
    pub probe: Option<usize>,
}

/// `max_ω |∮_A ω| / ‖ω‖_{B^r}` over probes with declared bounds. When a
/// region is given the chain support must lie inside it, since the
/// declared bounds hold there.
pub fn lower_bound_dual(
    a: &DiffChain,
    r: usize,
    probes: &[FormSpec],
    region: Option<&Region>,
) -> Result<LowerBound> {
    for (index, w) in probes.iter().enumerate() {
        if w.declared_bound(r).is_none() {
            return Err(NormError::MissingDeclaredBound { index, order: r });
        }
    }
    if let Some(reg) = region {
        if a.terms().iter().any(|t| !reg.contains(t.point())) {
            return Err(NormError::OutsideRegion);
        }
    }
    let vals: Vec<f64> = probes
        .par_iter()
        .map(|w| -> Result<f64> {
            let b = w.declared_bound(r).expect("checked above");
            if !(b > 0.0) {
                return Ok(0.0);
            }
            Ok(evaluate(w, a)?.abs() / b)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = LowerBound { value: 0.0, probe: None };
    for (i, v) in vals.into_iter().enumerate() {
        if v > best.value {
            best = LowerBound { value: v, probe: Some(i) };
        }
    }
    Ok(best)
}

/// Coordinate forms `dx_I` (bound 1) and oscillating forms
/// `sin(k x_a + φ) dx_I` (bound `max(1,k)^r`) for `k = 2^0..2^{levels−1}`.
/// In the plane with grade 1 the rotation form `−y dx + x dy` is added with
/// its bound over `region`.
pub fn probe_library(dim: usize, grade: usize, r: usize, levels: u32, region: Option<&Region>) -> Result<Vec<FormSpec>> {
    if grade > dim || dim == 0 {
        return Err(NormError::InvalidParameter(format!("grade {grade} in dimension {dim}")));
    }
    let mut out = Vec::new();
    let blades = basis(dim, grade);
    for &idx in &blades {
        out.push(FormSpec::constant(dim, grade, &[(idx, 1.0)])?);
    }
    for l in 0..levels {
        let k = (l as f64).exp2();
        let bound = k.max(1.0).powi(r as i32);
        for axis in 0..dim {
            for phase in [0.0, std::f64::consts::FRAC_PI_2] {
                for &idx in &blades {
                    let f = ScalarField::analytic(dim, move |p: &[Jet]| (&p[axis] * k + phase).sin());
                    out.push(FormSpec::new(dim, grade, vec![(idx, f)])?.with_bound(r, bound));
                }
            }
        }
    }
    if dim == 2 && grade == 1 {
        if let Some(reg) = region {
            let rmax = [(reg.lo[0], reg.lo[1]), (reg.lo[0], reg.hi[1]), (reg.hi[0], reg.lo[1]), (reg.hi[0], reg.hi[1])]
                .iter()
                .map(|(x, y)| x.hypot(*y))
                .fold(0.0f64, f64::max);
            let bound = if r == 0 { rmax } else { rmax.max(1.0) };
            let w = FormSpec::one_form(vec![
                ScalarField::coordinate(2, 1).scale(-1.0),
                ScalarField::coordinate(2, 0),
            ])?;
            out.push(w.with_bound(r, bound));
        }
    }
    Ok(out)
}

/// Lower and upper bounds on the order-`r` norm.
#[derive(Clone, Debug, PartialEq)]
pub struct NormBracket {
    pub order: usize,
    pub lower: f64,
    /// Infinite when no finite certificate exists (marked chains).
    pub upper: f64,
    pub certificate_size: usize,
    pub lower_probe: Option<usize>,
}

impl Serialize for NormBracket {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            order: usize,
            lower: f64,
            upper: Option<f64>,
            certificate_size: usize,
            lower_probe: Option<usize>,
        }
        Repr {
            order: self.order,
            lower: self.lower,
            upper: self.upper.is_finite().then_some(self.upper),
            certificate_size: self.certificate_size,
            lower_probe: self.lower_probe,
        }
        .serialize(s)
    }
}

pub fn bracket(a: &DiffChain, r: usize, probes: &[FormSpec], region: Option<&Region>) -> Result<NormBracket> {
    let lower = lower_bound_dual(a, r, probes, region)?;
    let (upper, size) = if a.is_marker_free() {
        let c = best_certificate(a, r)?;
        (c.cost, c.len())
    } else {
        (f64::INFINITY, 0)
    };
    let slack = 1e-12 * (1.0 + upper.abs());
    if lower.value > upper + slack {
        return Err(NormError::BracketInverted {
            lower: lower.value,
            upper,
        });
    }
    Ok(NormBracket {
        order: r,
        lower: lower.value,
        upper,
        certificate_size: size,
        lower_probe: lower.probe,
    })
}

/// Aggregate cost of generators grouped by order.
pub fn cost_by_order(c: &DecompositionCertificate) -> HashMap<usize, f64> {
    let mut out: HashMap<usize, f64> = HashMap::new();
    for g in &c.generators {
        *out.entry(g.order()).or_default() += g.cost();
    }
    out
}
