//! Differential chains: finite sums of pointed terms carrying derivative markers.
//!
//! A term `(p; α; [v_1..v_j])` stands for `P_{v_1}∘…∘P_{v_j}(p; α)`. Chains
//! are kept in canonical form: terms sorted by `(point, markers)`, equal keys
//! merged, zero k-vectors dropped.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::field::{ScalarField, SmoothMap, VectorField};
use crate::jet::{seed_point, Jet};
use crate::multivector::{
    contract, contract_axis, hodge_complement, mass_upper, wedge, KVector, MultivectorError,
};

pub type Point = SmallVec<[f64; 3]>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("grade mismatch: {left} vs {right}")]
    GradeMismatch { left: usize, right: usize },
    #[error("operation needs grade >= 1")]
    GradeZero,
    #[error("grade {grade} out of range for dimension {dim}")]
    GradeOutOfRange { grade: usize, dim: usize },
    #[error("chain has derivative markers; operation needs a marker-free chain")]
    MarkedTerms,
    #[error("non-finite coordinate in chain term")]
    NonFinite,
    #[error(transparent)]
    Multivector(#[from] MultivectorError),
}

pub type Result<T> = std::result::Result<T, ChainError>;

pub fn point(xs: &[f64]) -> Point {
    xs.iter().map(|&x| x + 0.0).collect()
}

/// Unit basis vector `e_i` in R^n.
pub fn unit(dim: usize, i: usize) -> Point {
    let mut p: Point = SmallVec::from_elem(0.0, dim);
    p[i] = 1.0;
    p
}

fn cmp_exact(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round()
}

/// Marker order: lexicographic on 12-digit rounded components, exact tie-break.
pub fn marker_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match round12(*x).total_cmp(&round12(*y)) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    cmp_exact(a, b)
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ChainTerm {
    point: Point,
    alpha: KVector,
    markers: Box<[Point]>,
}

impl ChainTerm {
    pub fn new(point: Point, alpha: KVector, markers: Vec<Point>) -> Self {
        let mut point = point;
        for x in point.iter_mut() {
            *x += 0.0;
        }
        let mut markers = markers;
        for m in markers.iter_mut() {
            for x in m.iter_mut() {
                *x += 0.0;
            }
        }
        markers.sort_by(|a, b| marker_cmp(a, b));
        ChainTerm {
            point,
            alpha,
            markers: markers.into_boxed_slice(),
        }
    }

    pub fn pointed(point: Point, alpha: KVector) -> Self {
        ChainTerm::new(point, alpha, Vec::new())
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn alpha(&self) -> &KVector {
        &self.alpha
    }

    pub fn markers(&self) -> &[Point] {
        &self.markers
    }

    pub fn depth(&self) -> usize {
        self.markers.len()
    }

    /// Canonical key comparison on `(point, markers)`.
    pub fn key_cmp(&self, other: &ChainTerm) -> Ordering {
        match cmp_exact(&self.point, &other.point) {
            Ordering::Equal => {}
            o => return o,
        }
        match self.markers.len().cmp(&other.markers.len()) {
            Ordering::Equal => {}
            o => return o,
        }
        for (a, b) in self.markers.iter().zip(other.markers.iter()) {
            match marker_cmp(a, b) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }

    fn check(&self, dim: usize, grade: usize) -> Result<()> {
        if self.point.len() != dim || self.alpha.dim() != dim {
            return Err(ChainError::DimensionMismatch {
                left: self.point.len().max(self.alpha.dim()),
                right: dim,
            });
        }
        if self.alpha.grade() != grade {
            return Err(ChainError::GradeMismatch {
                left: self.alpha.grade(),
                right: grade,
            });
        }
        if self.point.iter().any(|x| !x.is_finite()) {
            return Err(ChainError::NonFinite);
        }
        for m in self.markers.iter() {
            if m.len() != dim {
                return Err(ChainError::DimensionMismatch { left: m.len(), right: dim });
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(ChainError::NonFinite);
            }
        }
        Ok(())
    }

    /// Jet coordinates `p + Σ ε_j v_j` for this term's markers.
    pub fn seeded_point(&self) -> Vec<Jet> {
        let dirs: Vec<&[f64]> = self.markers.iter().map(|m| m.as_slice()).collect();
        seed_point(&self.point, &dirs)
    }

    fn markers_without(&self, mask: usize) -> Vec<Point> {
        self.markers
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) == 0)
            .map(|(_, m)| m.clone())
            .collect()
    }
}

/// A finite differential chain in canonical form.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffChain {
    dim: usize,
    grade: usize,
    terms: Vec<ChainTerm>,
}

fn merge_sorted(terms: &mut Vec<ChainTerm>) {
    if terms.is_empty() {
        return;
    }
    let mut w = 0usize;
    for r in 1..terms.len() {
        if terms[w].key_cmp(&terms[r]) == Ordering::Equal {
            let t = std::mem::take(&mut terms[r]);
            terms[w].alpha.add_scaled_unchecked(&t.alpha, 1.0);
        } else {
            w += 1;
            if w != r {
                terms.swap(w, r);
            }
        }
    }
    terms.truncate(w + 1);
    terms.retain(|t| !t.alpha.is_zero());
}

impl DiffChain {
    pub fn zero(dim: usize, grade: usize) -> Result<Self> {
        if dim == 0 || grade > dim {
            return Err(ChainError::GradeOutOfRange { grade, dim });
        }
        Ok(DiffChain {
            dim,
            grade,
            terms: Vec::new(),
        })
    }

    /// Validates shapes and canonicalizes.
    pub fn from_terms(dim: usize, grade: usize, terms: Vec<ChainTerm>) -> Result<Self> {
        let mut out = DiffChain::zero(dim, grade)?;
        for t in &terms {
            t.check(dim, grade)?;
        }
        out.terms = terms;
        out.canonicalize();
        Ok(out)
    }

    /// Terms must already be valid, sorted and distinct.
    pub(crate) fn from_sorted_unchecked(dim: usize, grade: usize, terms: Vec<ChainTerm>) -> Self {
        debug_assert!(terms.windows(2).all(|w| w[0].key_cmp(&w[1]) == Ordering::Less));
        DiffChain { dim, grade, terms }
    }

    /// Single pointed term `(p; α)`.
    pub fn pointed(p: &[f64], alpha: KVector) -> Result<Self> {
        let (dim, grade) = (alpha.dim(), alpha.grade());
        DiffChain::from_terms(dim, grade, vec![ChainTerm::pointed(point(p), alpha)])
    }

    pub fn single(term: ChainTerm) -> Result<Self> {
        let (dim, grade) = (term.alpha.dim(), term.alpha.grade());
        DiffChain::from_terms(dim, grade, vec![term])
    }

    fn canonicalize(&mut self) {
        self.terms.sort_unstable_by(|a, b| a.key_cmp(b));
        merge_sorted(&mut self.terms);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grade(&self) -> usize {
        self.grade
    }

    pub fn terms(&self) -> &[ChainTerm] {
        &self.terms
    }

    pub fn into_terms(self) -> Vec<ChainTerm> {
        self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_depth(&self) -> usize {
        self.terms.iter().map(|t| t.depth()).max().unwrap_or(0)
    }

    pub fn is_marker_free(&self) -> bool {
        self.terms.iter().all(|t| t.markers.is_empty())
    }

    /// Sum of `mass_upper` over terms (the mass norm bound of a pointed chain).
    pub fn mass(&self) -> f64 {
        crate::numeric::neumaier_sum(self.terms.iter().map(|t| mass_upper(&t.alpha)))
    }

    fn check_same(&self, other: &DiffChain) -> Result<()> {
        if self.dim != other.dim {
            return Err(ChainError::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        if self.grade != other.grade {
            return Err(ChainError::GradeMismatch {
                left: self.grade,
                right: other.grade,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &DiffChain) -> Result<DiffChain> {
        let mut out = self.clone();
        out.add_assign(other.clone())?;
        Ok(out)
    }

    pub fn sub(&self, other: &DiffChain) -> Result<DiffChain> {
        let mut out = self.clone();
        out.add_assign(other.scale(-1.0))?;
        Ok(out)
    }

    /// In-place canonical sum; merges the two sorted term lists from the back.
    pub fn add_assign(&mut self, other: DiffChain) -> Result<()> {
        self.check_same(&other)?;
        let n1 = self.terms.len();
        let n2 = other.terms.len();
        if n2 == 0 {
            return Ok(());
        }
        if n1 == 0 {
            self.terms = other.terms;
            return Ok(());
        }
        let mut other = other.terms;
        self.terms.reserve_exact(n2);
        self.terms.resize_with(n1 + n2, ChainTerm::default);
        let mut i = n1 as isize - 1;
        let mut j = n2 as isize - 1;
        let mut k = (n1 + n2) as isize - 1;
        while j >= 0 {
            if i < 0 {
                self.terms[k as usize] = std::mem::take(&mut other[j as usize]);
                j -= 1;
            } else {
                match self.terms[i as usize].key_cmp(&other[j as usize]) {
                    Ordering::Greater => {
                        let t = std::mem::take(&mut self.terms[i as usize]);
                        self.terms[k as usize] = t;
                        i -= 1;
                    }
                    Ordering::Less => {
                        self.terms[k as usize] = std::mem::take(&mut other[j as usize]);
                        j -= 1;
                    }
                    Ordering::Equal => {
                        let mut t = std::mem::take(&mut self.terms[i as usize]);
                        let o = std::mem::take(&mut other[j as usize]);
                        t.alpha.add_scaled_unchecked(&o.alpha, 1.0);
                        self.terms[k as usize] = t;
                        i -= 1;
                        j -= 1;
                    }
                }
            }
            k -= 1;
        }
        drop(other);
        let gap = (k - i) as usize;
        if gap > 0 {
            let mut idx = i;
            while idx >= 0 {
                let t = std::mem::take(&mut self.terms[idx as usize]);
                self.terms[idx as usize + gap] = t;
                idx -= 1;
            }
            self.terms.drain(0..gap);
        }
        self.terms.retain(|t| !t.alpha.is_zero());
        Ok(())
    }

    pub fn scale(&self, s: f64) -> DiffChain {
        let mut out = self.clone();
        out.scale_mut(s);
        out
    }

    pub fn scale_mut(&mut self, s: f64) {
        for t in self.terms.iter_mut() {
            t.alpha.scale_mut(s);
        }
        self.terms.retain(|t| !t.alpha.is_zero());
    }

    pub fn neg(&self) -> DiffChain {
        self.scale(-1.0)
    }

    fn rebuild(&self, grade: usize, terms: Vec<ChainTerm>) -> Result<DiffChain> {
        DiffChain::from_terms(self.dim, grade, terms)
    }

    fn check_vector(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(ChainError::DimensionMismatch {
                left: v.len(),
                right: self.dim,
            });
        }
        Ok(())
    }

    /// `T_u A`: every point shifted by `u`.
    pub fn translate(&self, u: &[f64]) -> Result<DiffChain> {
        self.check_vector(u)?;
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let p: Point = t.point.iter().zip(u).map(|(x, d)| x + d).collect();
                ChainTerm {
                    point: p,
                    ..t.clone()
                }
            })
            .collect();
        self.rebuild(self.grade, terms)
    }

    /// `Δ_U A`, expanded into `2^j` signed translates.
    pub fn difference(&self, u: &[Vec<f64>]) -> Result<DiffChain> {
        for v in u {
            self.check_vector(v)?;
        }
        let j = u.len();
        let mut terms = Vec::with_capacity(self.terms.len() << j);
        for mask in 0usize..(1 << j) {
            let mut shift = vec![0.0; self.dim];
            for (b, v) in u.iter().enumerate() {
                if mask & (1 << b) != 0 {
                    for (s, x) in shift.iter_mut().zip(v) {
                        *s += x;
                    }
                }
            }
            let sign = if (j - mask.count_ones() as usize) % 2 == 0 { 1.0 } else { -1.0 };
            for t in &self.terms {
                let p: Point = t.point.iter().zip(&shift).map(|(x, d)| x + d).collect();
                terms.push(ChainTerm {
                    point: p,
                    alpha: t.alpha.scale(sign),
                    markers: t.markers.clone(),
                });
            }
        }
        self.rebuild(self.grade, terms)
    }

    /// Applies a per-subset rule: for each term and each subset `S` of its
    /// markers, `rule(D_S coefficients, α)` gives the new k-vector.
    fn leibniz<F>(&self, fields: &[ScalarField], grade: usize, rule: F) -> Result<DiffChain>
    where
        F: Fn(&[f64], &KVector) -> Result<KVector>,
    {
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let x = t.seeded_point();
            let jets: Vec<Jet> = fields.iter().map(|f| f.eval_jet(&x)).collect();
            let masks = 1usize << t.depth();
            let mut vals = vec![0.0; fields.len()];
            for mask in 0..masks {
                let mut any = false;
                for (v, j) in vals.iter_mut().zip(&jets) {
                    *v = j.coeff(mask);
                    any |= *v != 0.0;
                }
                if !any {
                    continue;
                }
                let alpha = rule(&vals, &t.alpha)?;
                if alpha.is_zero() {
                    continue;
                }
                let markers = if mask == 0 {
                    t.markers.to_vec()
                } else {
                    t.markers_without(mask)
                };
                terms.push(ChainTerm::new(t.point.clone(), alpha, markers));
            }
        }
        self.rebuild(grade, terms)
    }

    /// `m_f A` with the Leibniz expansion over marker subsets.
    pub fn multiply_function(&self, f: &ScalarField) -> Result<DiffChain> {
        self.check_field_dim(f.dim())?;
        self.leibniz(std::slice::from_ref(f), self.grade, |c, a| Ok(a.scale(c[0])))
    }

    fn check_field_dim(&self, d: usize) -> Result<()> {
        if d != self.dim {
            return Err(ChainError::DimensionMismatch {
                left: d,
                right: self.dim,
            });
        }
        Ok(())
    }

    /// `E_X A`: `(p; X(p) ∧ α)` on pointed terms.
    pub fn extrude(&self, x: &VectorField) -> Result<DiffChain> {
        self.check_field_dim(x.dim())?;
        if self.grade + 1 > self.dim {
            return Err(ChainError::GradeOutOfRange {
                grade: self.grade + 1,
                dim: self.dim,
            });
        }
        if let Some(v) = x.as_constant() {
            let vk = KVector::vector(v)?;
            let terms = self
                .terms
                .iter()
                .map(|t| Ok(ChainTerm { alpha: wedge(&vk, &t.alpha)?, ..t.clone() }))
                .collect::<Result<Vec<_>>>()?;
            return self.rebuild(self.grade + 1, terms);
        }
        self.leibniz(x.components(), self.grade + 1, |c, a| {
            Ok(wedge(&KVector::vector(c)?, a)?)
        })
    }

    /// `E†_X A`: `(p; X(p) ⌟ α)` on pointed terms.
    pub fn retract(&self, x: &VectorField) -> Result<DiffChain> {
        self.check_field_dim(x.dim())?;
        if self.grade == 0 {
            return Err(ChainError::GradeZero);
        }
        if let Some(v) = x.as_constant() {
            let terms = self
                .terms
                .iter()
                .map(|t| Ok(ChainTerm { alpha: contract(v, &t.alpha)?, ..t.clone() }))
                .collect::<Result<Vec<_>>>()?;
            return self.rebuild(self.grade - 1, terms);
        }
        self.leibniz(x.components(), self.grade - 1, |c, a| Ok(contract(c, a)?))
    }

    /// `P_v A`: appends the marker `v` to every term.
    pub fn prederivative(&self, v: &[f64]) -> Result<DiffChain> {
        self.check_vector(v)?;
        if v.iter().all(|&x| x == 0.0) {
            return DiffChain::zero(self.dim, self.grade);
        }
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut m = t.markers.to_vec();
                m.push(point(v));
                ChainTerm::new(t.point.clone(), t.alpha.clone(), m)
            })
            .collect();
        self.rebuild(self.grade, terms)
    }

    /// `∂ = Σ_i P_{e_i} E†_{e_i}`.
    pub fn boundary(&self) -> Result<DiffChain> {
        if self.grade == 0 {
            return Err(ChainError::GradeZero);
        }
        let mut terms = Vec::with_capacity(self.terms.len() * self.grade);
        for t in &self.terms {
            for i in 0..self.dim {
                let a = contract_axis(i, &t.alpha)?;
                if a.is_zero() {
                    continue;
                }
                let mut m = t.markers.to_vec();
                m.push(unit(self.dim, i));
                terms.push(ChainTerm::new(t.point.clone(), a, m));
            }
        }
        self.rebuild(self.grade - 1, terms)
    }

    /// `⊥`: complement of every k-vector.
    pub fn perp(&self) -> DiffChain {
        let terms = self
            .terms
            .iter()
            .map(|t| ChainTerm {
                alpha: hodge_complement(&t.alpha),
                ..t.clone()
            })
            .collect();
        self.rebuild(self.dim - self.grade, terms)
            .expect("perp preserves validity")
    }

    /// `◇ = ⊥∂⊥`, raising the grade by one.
    pub fn diamond(&self) -> Result<DiffChain> {
        if self.grade >= self.dim {
            return Err(ChainError::GradeOutOfRange {
                grade: self.grade + 1,
                dim: self.dim,
            });
        }
        Ok(self.perp().boundary()?.perp())
    }

    /// `□ = ◇∂ + ∂◇`; a summand is zero where its grade range is empty.
    pub fn box_op(&self) -> Result<DiffChain> {
        let mut out = DiffChain::zero(self.dim, self.grade)?;
        if self.grade >= 1 {
            out.add_assign(self.boundary()?.diamond()?)?;
        }
        if self.grade < self.dim {
            out.add_assign(self.diamond()?.boundary()?)?;
        }
        Ok(out)
    }

    /// `F_* A` on marker-free chains: `(F(p); Λ^k DF_p α)`.
    pub fn pushforward(&self, f: &SmoothMap) -> Result<DiffChain> {
        if !self.is_marker_free() {
            return Err(ChainError::MarkedTerms);
        }
        self.check_field_dim(f.dim_in())?;
        let out_dim = f.dim_out();
        if self.grade > out_dim {
            return Err(ChainError::GradeOutOfRange {
                grade: self.grade,
                dim: out_dim,
            });
        }
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let q = point(&f.eval(&t.point));
                let cols = f.jacobian_columns(&t.point);
                Ok(ChainTerm::pointed(q, t.alpha.apply_linear(&cols)?))
            })
            .collect::<Result<Vec<_>>>()?;
        DiffChain::from_terms(out_dim, self.grade, terms)
    }

    /// Distinct points carrying nonzero terms.
    pub fn support(&self) -> Vec<Point> {
        let mut out: Vec<Point> = Vec::new();
        for t in &self.terms {
            if out.last().map(|p| p.as_slice() != t.point.as_slice()).unwrap_or(true) {
                out.push(t.point.clone());
            }
        }
        out
    }

    /// Axis-aligned bounds of the support.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let first = self.terms.first()?;
        let mut lo = first.point.to_vec();
        let mut hi = first.point.to_vec();
        for t in &self.terms {
            for (i, &x) in t.point.iter().enumerate() {
                lo[i] = lo[i].min(x);
                hi[i] = hi[i].max(x);
            }
        }
        Some((lo, hi))
    }

    /// Diagonal of the support's bounding box.
    pub fn diameter(&self) -> f64 {
        match self.bounding_box() {
            None => 0.0,
            Some((lo, hi)) => lo.iter().zip(&hi).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    point: Vec<f64>,
    alpha: BTreeMap<String, f64>,
    #[serde(default)]
    markers: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ChainRepr {
    dim: usize,
    grade: usize,
    terms: Vec<TermRepr>,
}

impl Serialize for DiffChain {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ChainRepr {
            dim: self.dim,
            grade: self.grade,
            terms: self
                .terms
                .iter()
                .map(|t| TermRepr {
                    point: t.point.to_vec(),
                    alpha: t.alpha.coeff_map(),
                    markers: t.markers.iter().map(|m| m.to_vec()).collect(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiffChain {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = ChainRepr::deserialize(d)?;
        let terms = r
            .terms
            .into_iter()
            .map(|t| {
                let alpha = KVector::from_coeff_map(r.dim, r.grade, &t.alpha).map_err(D::Error::custom)?;
                Ok(ChainTerm::new(
                    point(&t.point),
                    alpha,
                    t.markers.iter().map(|m| point(m)).collect(),
                ))
            })
            .collect::<std::result::Result<Vec<_>, D::Error>>()?;
        DiffChain::from_terms(r.dim, r.grade, terms).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(dim: usize, axes: &[usize]) -> KVector {
        KVector::blade(dim, axes, 1.0).unwrap()
    }

    fn pt(p: &[f64], a: KVector) -> DiffChain {
        DiffChain::pointed(p, a).unwrap()
    }

    #[test]
    fn linear_structure() {
        let a = pt(&[0.5, 1.0], e(2, &[0]));
        assert!(a.add(&a.neg()).unwrap().is_empty());
        assert_eq!(a.scale(2.0), pt(&[0.5, 1.0], e(2, &[0]).scale(2.0)));
        let b = pt(&[2.0, 0.0], e(2, &[1]));
        let s = a.add(&b).unwrap().add(&a).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s, a.scale(2.0).add(&b).unwrap());
        assert!(a.add(&pt(&[0.0, 0.0], e(2, &[0, 1]))).is_err());
    }

    #[test]
    fn add_assign_handles_interleaving_and_cancellation() {
        let mk = |pts: &[(f64, f64)]| {
            DiffChain::from_terms(
                1,
                1,
                pts.iter()
                    .map(|&(x, c)| ChainTerm::pointed(point(&[x]), KVector::vector(&[c]).unwrap()))
                    .collect(),
            )
            .unwrap()
        };
        let mut a = mk(&[(0.0, 1.0), (2.0, 1.0), (4.0, 1.0), (6.0, 1.0)]);
        let b = mk(&[(1.0, 1.0), (2.0, -1.0), (4.0, 2.0), (7.0, 1.0)]);
        a.add_assign(b).unwrap();
        assert_eq!(a, mk(&[(0.0, 1.0), (1.0, 1.0), (4.0, 3.0), (6.0, 1.0), (7.0, 1.0)]));
    }

    #[test]
    fn translation_and_difference() {
        let a = pt(&[0.0, 0.0], e(2, &[0]));
        let u = [0.25, 0.5];
        assert_eq!(a.translate(&u).unwrap(), pt(&u, e(2, &[0])));
        assert_eq!(a.translate(&[0.0, 0.0]).unwrap(), a);
        let d = a.difference(&[u.to_vec(), u.to_vec()]).unwrap();
        let expect = pt(&[0.5, 1.0], e(2, &[0]))
            .sub(&pt(&u, e(2, &[0])).scale(2.0))
            .unwrap()
            .add(&a)
            .unwrap();
        assert_eq!(d, expect);
        assert_eq!(a.difference(&[]).unwrap(), a);
    }

    #[test]
    fn boundary_of_blade() {
        let a = pt(&[0.0, 0.0], e(2, &[0, 1]));
        let b = a.boundary().unwrap();
        let expect = DiffChain::from_terms(
            2,
            1,
            vec![
                ChainTerm::new(point(&[0.0, 0.0]), e(2, &[1]), vec![unit(2, 0)]),
                ChainTerm::new(point(&[0.0, 0.0]), e(2, &[0]).neg(), vec![unit(2, 1)]),
            ],
        )
        .unwrap();
        assert_eq!(b, expect);
        assert!(b.boundary().unwrap().is_empty());
        assert!(matches!(
            pt(&[0.0, 0.0], KVector::scalar(2, 1.0).unwrap()).boundary(),
            Err(ChainError::GradeZero)
        ));
    }

    #[test]
    fn perp_examples() {
        assert_eq!(pt(&[1.0, 2.0], e(2, &[0])).perp(), pt(&[1.0, 2.0], e(2, &[1])));
        assert_eq!(pt(&[0.0; 3], e(3, &[0, 1])).perp(), pt(&[0.0; 3], e(3, &[2])));
    }

    #[test]
    fn extrude_retract_constant() {
        let p = [0.3, 0.1];
        let a = pt(&p, e(2, &[1]));
        let x = VectorField::constant(&[1.0, 0.0]);
        assert_eq!(a.extrude(&x).unwrap(), pt(&p, e(2, &[0, 1])));
        assert!(pt(&p, e(2, &[0])).extrude(&x).unwrap().is_empty());
        let b = pt(&p, e(2, &[0, 1]));
        assert_eq!(b.retract(&x).unwrap(), pt(&p, e(2, &[1])));
        assert_eq!(
            b.retract(&VectorField::constant(&[0.0, 1.0])).unwrap(),
            pt(&p, e(2, &[0]).neg())
        );
    }

    #[test]
    fn multiply_function_leibniz_example() {
        let f = ScalarField::coordinate(2, 0);
        let t = ChainTerm::new(point(&[0.0, 0.0]), e(2, &[1]), vec![unit(2, 0)]);
        let a = DiffChain::single(t).unwrap();
        assert_eq!(a.multiply_function(&f).unwrap(), pt(&[0.0, 0.0], e(2, &[1])));
        let c = ScalarField::constant(2, 3.0);
        assert_eq!(a.multiply_function(&c).unwrap(), a.scale(3.0));
    }

    #[test]
    fn prederivative_zero_and_commuting() {
        let a = pt(&[0.0, 1.0], e(2, &[0]));
        assert!(a.prederivative(&[0.0, 0.0]).unwrap().is_empty());
        let (u, v) = ([1.0, 0.5], [-0.25, 2.0]);
        assert_eq!(
            a.prederivative(&u).unwrap().prederivative(&v).unwrap(),
            a.prederivative(&v).unwrap().prederivative(&u).unwrap()
        );
    }

    #[test]
    fn pushforward_scaling() {
        let f = SmoothMap::affine(vec![vec![2.0, 0.0], vec![0.0, 2.0]], vec![0.0, 0.0]);
        let a = pt(&[0.5, 0.25], e(2, &[0, 1]));
        assert_eq!(a.pushforward(&f).unwrap(), pt(&[1.0, 0.5], e(2, &[0, 1]).scale(4.0)));
        assert_eq!(a.pushforward(&SmoothMap::identity(2)).unwrap(), a);
        assert!(matches!(
            a.prederivative(&[1.0, 0.0]).unwrap().pushforward(&f),
            Err(ChainError::MarkedTerms)
        ));
    }

    #[test]
    fn support_examples() {
        let a = pt(&[0.0, 0.0], e(2, &[0]));
        let b = pt(&[1.0, 0.0], e(2, &[1]));
        assert_eq!(a.add(&b).unwrap().support().len(), 2);
        assert!(a.add(&a.neg()).unwrap().support().is_empty());
    }

    #[test]
    fn json_roundtrip() {
        let t = ChainTerm::new(point(&[0.0, 1.0]), e(2, &[1]), vec![unit(2, 0)]);
        let a = DiffChain::single(t).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        let b: DiffChain = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
    }
}
