//! Exterior algebra over R^n with the standard inner product.
//!
//! A [`KVector`] stores its coefficients over basis blades `e_I`, where `I`
//! is a [`MultiIndex`] held as a bitmask. Blades are kept in lexicographic
//! order of their axis sequences and every sign comes from transposition
//! parity, so cancellations between identical products are exact.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use smallvec::SmallVec;
use thiserror::Error;

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultivectorError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("grade {grade} exceeds dimension {dim}")]
    GradeOverflow { grade: usize, dim: usize },
    #[error("operation needs grade >= 1")]
    GradeZero,
    #[error("grade mismatch: {left} vs {right}")]
    GradeMismatch { left: usize, right: usize },
    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("axes must be strictly increasing")]
    NotIncreasing,
    #[error("dimension {0} unsupported (1..=32)")]
    UnsupportedDimension(usize),
    #[error("factors do not reproduce the blade (residual {residual:.3e})")]
    FactorMismatch { residual: f64 },
    #[error("bad multi-index key {0:?}")]
    BadKey(String),
}

pub type Result<T> = std::result::Result<T, MultivectorError>;

/// Strictly increasing axis labels, stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct MultiIndex(u32);

impl MultiIndex {
    pub const EMPTY: MultiIndex = MultiIndex(0);

    pub fn from_axes(axes: &[usize], dim: usize) -> Result<Self> {
        let mut bits = 0u32;
        let mut last: Option<usize> = None;
        for &a in axes {
            if a >= dim {
                return Err(MultivectorError::AxisOutOfRange { axis: a, dim });
            }
            if let Some(l) = last {
                if a <= l {
                    return Err(MultivectorError::NotIncreasing);
                }
            }
            last = Some(a);
            bits |= 1 << a;
        }
        Ok(MultiIndex(bits))
    }

    /// Single axis `e_i`.
    pub fn axis(i: usize) -> Self {
        MultiIndex(1 << i)
    }

    /// `e_0 ∧ … ∧ e_{n-1}`.
    pub fn full(dim: usize) -> Self {
        if dim >= 32 {
            MultiIndex(u32::MAX)
        } else {
            MultiIndex((1u32 << dim) - 1)
        }
    }

    pub fn from_bits(bits: u32) -> Self {
        MultiIndex(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn grade(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, axis: usize) -> bool {
        self.0 & (1 << axis) != 0
    }

    pub fn max_axis(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(31 - self.0.leading_zeros() as usize)
        }
    }

    pub fn axes(self) -> impl Iterator<Item = usize> {
        let mut b = self.0;
        std::iter::from_fn(move || {
            if b == 0 {
                None
            } else {
                let i = b.trailing_zeros() as usize;
                b &= b - 1;
                Some(i)
            }
        })
    }

    pub fn complement(self, dim: usize) -> Self {
        MultiIndex(!self.0 & MultiIndex::full(dim).0)
    }

    pub fn key(self) -> String {
        let parts: Vec<String> = self.axes().map(|a| a.to_string()).collect();
        parts.join(",")
    }

    pub fn parse_key(key: &str, dim: usize) -> Result<Self> {
        let key = key.trim();
        if key.is_empty() {
            return Ok(MultiIndex::EMPTY);
        }
        let mut axes = Vec::new();
        for part in key.split(',') {
            let a: usize = part
                .trim()
                .parse()
                .map_err(|_| MultivectorError::BadKey(key.to_string()))?;
            axes.push(a);
        }
        MultiIndex::from_axes(&axes, dim)
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e[{}]", self.key())
    }
}

impl Ord for MultiIndex {
    /// Lexicographic order of the sorted axis sequences.
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.0, other.0);
        if a == b {
            return Ordering::Equal;
        }
        let d = (a ^ b).trailing_zeros();
        if a & (1 << d) != 0 {
            if (b >> d) == 0 {
                Ordering::Greater
            } else {
                Ordering::Less
            }
        } else if (a >> d) == 0 {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sign of `e_I ∧ e_J` relative to `e_{I∪J}`; zero when the blades share an axis.
pub fn wedge_sign(i: MultiIndex, j: MultiIndex) -> f64 {
    if i.0 & j.0 != 0 {
        return 0.0;
    }
    let mut swaps = 0u32;
    for b in j.axes() {
        let above = if b >= 31 { 0 } else { i.0 >> (b + 1) };
        swaps += above.count_ones();
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

type Coeffs = SmallVec<[(MultiIndex, f64); 1]>;

/// An element of Λ^k R^n.
#[derive(Clone, PartialEq, Default)]
pub struct KVector {
    dim: u16,
    grade: u16,
    coeffs: Coeffs,
}

impl fmt::Debug for KVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KVector(n={}, k={}, ", self.dim, self.grade)?;
        f.debug_map()
            .entries(self.coeffs.iter().map(|(i, c)| (i, c)))
            .finish()?;
        write!(f, ")")
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        Err(MultivectorError::UnsupportedDimension(dim))
    } else {
        Ok(())
    }
}

impl KVector {
    pub fn zero(dim: usize, grade: usize) -> Result<Self> {
        check_dim(dim)?;
        if grade > dim {
            return Err(MultivectorError::GradeOverflow { grade, dim });
        }
        Ok(KVector {
            dim: dim as u16,
            grade: grade as u16,
            coeffs: SmallVec::new(),
        })
    }

    pub fn scalar(dim: usize, c: f64) -> Result<Self> {
        Self::from_pairs(dim, 0, [(MultiIndex::EMPTY, c)])
    }

    /// `c · e_I`.
    pub fn blade(dim: usize, axes: &[usize], c: f64) -> Result<Self> {
        let idx = MultiIndex::from_axes(axes, dim)?;
        Self::from_pairs(dim, axes.len(), [(idx, c)])
    }

    /// Grade-1 element with the given components.
    pub fn vector(v: &[f64]) -> Result<Self> {
        let dim = v.len();
        Self::from_pairs(
            dim,
            1,
            v.iter().enumerate().map(|(i, &c)| (MultiIndex::axis(i), c)),
        )
    }

    /// Builds from (index, coefficient) pairs, summing repeated indices.
    pub fn from_pairs<I>(dim: usize, grade: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut out = Self::zero(dim, grade)?;
        let mut raw: Coeffs = SmallVec::new();
        for (idx, c) in pairs {
            if idx.grade() != grade {
                return Err(MultivectorError::GradeMismatch {
                    left: idx.grade(),
                    right: grade,
                });
            }
            if let Some(m) = idx.max_axis() {
                if m >= dim {
                    return Err(MultivectorError::AxisOutOfRange { axis: m, dim });
                }
            }
            raw.push((idx, c));
        }
        out.coeffs = raw;
        out.normalize();
        Ok(out)
    }

    fn normalize(&mut self) {
        if self.coeffs.len() > 1 {
            self.coeffs.sort_by(|a, b| a.0.cmp(&b.0));
            let mut w = 0usize;
            for r in 0..self.coeffs.len() {
                if w > 0 && self.coeffs[w - 1].0 == self.coeffs[r].0 {
                    self.coeffs[w - 1].1 += self.coeffs[r].1;
                } else {
                    self.coeffs[w] = self.coeffs[r];
                    w += 1;
                }
            }
            self.coeffs.truncate(w);
        }
        self.coeffs.retain(|(_, c)| *c != 0.0);
    }

    /// Drops coefficients with magnitude at or below `threshold`.
    pub fn canonicalize_with(&mut self, threshold: f64) {
        self.coeffs.retain(|(_, c)| c.abs() > threshold);
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn grade(&self) -> usize {
        self.grade as usize
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (MultiIndex, f64)> + '_ {
        self.coeffs.iter().copied()
    }

    pub fn coeff(&self, idx: MultiIndex) -> f64 {
        self.coeffs
            .binary_search_by(|(i, _)| i.cmp(&idx))
            .map(|k| self.coeffs[k].1)
            .unwrap_or(0.0)
    }

    /// Dense grade-1 components; zeros for other grades.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        if self.grade == 1 {
            for (i, c) in self.terms() {
                v[i.bits().trailing_zeros() as usize] = c;
            }
        }
        v
    }

    pub fn scale(&self, s: f64) -> KVector {
        let mut out = self.clone();
        out.scale_mut(s);
        out
    }

    pub fn scale_mut(&mut self, s: f64) {
        for (_, c) in self.coeffs.iter_mut() {
            *c *= s;
        }
        self.coeffs.retain(|(_, c)| *c != 0.0);
    }

    pub fn neg(&self) -> KVector {
        self.scale(-1.0)
    }

    fn check_same(&self, other: &KVector) -> Result<()> {
        if self.dim != other.dim {
            return Err(MultivectorError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        if self.grade != other.grade {
            return Err(MultivectorError::GradeMismatch {
                left: self.grade(),
                right: other.grade(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &KVector) -> Result<KVector> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &KVector) -> Result<()> {
        self.check_same(other)?;
        self.add_scaled_unchecked(other, 1.0);
        Ok(())
    }

    /// `self += s·other`, skipping the shape check.
    pub(crate) fn add_scaled_unchecked(&mut self, other: &KVector, s: f64) {
        if other.coeffs.is_empty() {
            return;
        }
        if self.coeffs.is_empty() {
            self.coeffs = other.coeffs.iter().map(|&(i, c)| (i, c * s)).collect();
            self.coeffs.retain(|(_, c)| *c != 0.0);
            return;
        }
        if self.coeffs.len() == 1 && other.coeffs.len() == 1 && self.coeffs[0].0 == other.coeffs[0].0 {
            self.coeffs[0].1 += other.coeffs[0].1 * s;
            if self.coeffs[0].1 == 0.0 {
                self.coeffs.clear();
            }
            return;
        }
        let mut merged: Coeffs = SmallVec::with_capacity(self.coeffs.len() + other.coeffs.len());
        let (mut i, mut j) = (0, 0);
        while i < self.coeffs.len() || j < other.coeffs.len() {
            let take = if i == self.coeffs.len() {
                Ordering::Greater
            } else if j == other.coeffs.len() {
                Ordering::Less
            } else {
                self.coeffs[i].0.cmp(&other.coeffs[j].0)
            };
            match take {
                Ordering::Less => {
                    merged.push(self.coeffs[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    merged.push((other.coeffs[j].0, other.coeffs[j].1 * s));
                    j += 1;
                }
                Ordering::Equal => {
                    merged.push((self.coeffs[i].0, self.coeffs[i].1 + other.coeffs[j].1 * s));
                    i += 1;
                    j += 1;
                }
            }
        }
        merged.retain(|(_, c)| *c != 0.0);
        self.coeffs = merged;
    }

    pub fn sub(&self, other: &KVector) -> Result<KVector> {
        self.check_same(other)?;
        let mut out = self.clone();
        out.add_scaled_unchecked(other, -1.0);
        Ok(out)
    }

    /// Sum of squared coefficients, square-rooted.
    pub fn euclidean_norm(&self) -> f64 {
        self.coeffs.iter().map(|(_, c)| c * c).sum::<f64>().sqrt()
    }

    /// Sum of absolute coefficients.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|(_, c)| c.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, (_, c)| m.max(c.abs()))
    }

    /// Image under the linear map whose columns are `cols[i] = M e_i`.
    pub fn apply_linear(&self, cols: &[Vec<f64>]) -> Result<KVector> {
        if cols.len() != self.dim() {
            return Err(MultivectorError::DimensionMismatch {
                left: cols.len(),
                right: self.dim(),
            });
        }
        let out_dim = cols.first().map(|c| c.len()).unwrap_or(self.dim());
        let mut acc = KVector::zero(out_dim, self.grade())?;
        let images: Vec<KVector> = cols
            .iter()
            .map(|c| KVector::vector(c))
            .collect::<Result<_>>()?;
        for (idx, c) in self.terms() {
            let mut blade = KVector::scalar(out_dim, c)?;
            for a in idx.axes() {
                blade = wedge(&blade, &images[a])?;
            }
            acc.add_scaled_unchecked(&blade, 1.0);
        }
        Ok(acc)
    }
}

/// `a ∧ b`.
pub fn wedge(a: &KVector, b: &KVector) -> Result<KVector> {
    if a.dim != b.dim {
        return Err(MultivectorError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let grade = a.grade() + b.grade();
    if grade > a.dim() {
        return Err(MultivectorError::GradeOverflow {
            grade,
            dim: a.dim(),
        });
    }
    let mut out = KVector::zero(a.dim(), grade)?;
    let mut raw: Coeffs = SmallVec::new();
    for (i, ca) in a.terms() {
        for (j, cb) in b.terms() {
            let s = wedge_sign(i, j);
            if s != 0.0 {
                raw.push((MultiIndex(i.0 | j.0), s * ca * cb));
            }
        }
    }
    out.coeffs = raw;
    out.normalize();
    Ok(out)
}

/// Interior product of a vector into a k-vector:
/// `v ⌟ (v_1∧…∧v_k) = Σ (−1)^{i+1} ⟨v, v_i⟩ v_1∧…v̂_i…∧v_k`.
pub fn contract(v: &[f64], a: &KVector) -> Result<KVector> {
    if v.len() != a.dim() {
        return Err(MultivectorError::DimensionMismatch {
            left: v.len(),
            right: a.dim(),
        });
    }
    if a.grade() == 0 {
        return Err(MultivectorError::GradeZero);
    }
    let mut out = KVector::zero(a.dim(), a.grade() - 1)?;
    let mut raw: Coeffs = SmallVec::new();
    for (idx, c) in a.terms() {
        for (pos, ax) in idx.axes().enumerate() {
            let vi = v[ax];
            if vi == 0.0 {
                continue;
            }
            let s = if pos % 2 == 0 { 1.0 } else { -1.0 };
            raw.push((MultiIndex(idx.0 & !(1 << ax)), s * vi * c));
        }
    }
    out.coeffs = raw;
    out.normalize();
    Ok(out)
}

/// Contraction by the basis vector `e_axis`; exact sign flips only.
pub fn contract_axis(axis: usize, a: &KVector) -> Result<KVector> {
    if axis >= a.dim() {
        return Err(MultivectorError::AxisOutOfRange {
            axis,
            dim: a.dim(),
        });
    }
    if a.grade() == 0 {
        return Err(MultivectorError::GradeZero);
    }
    let mut out = KVector::zero(a.dim(), a.grade() - 1)?;
    let mut raw: Coeffs = SmallVec::new();
    for (idx, c) in a.terms() {
        if idx.contains(axis) {
            let below = (idx.0 & ((1u32 << axis) - 1)).count_ones();
            let s = if below % 2 == 0 { 1.0 } else { -1.0 };
            raw.push((MultiIndex(idx.0 & !(1 << axis)), s * c));
        }
    }
    out.coeffs = raw;
    out.normalize();
    Ok(out)
}

/// Complement `e_I ↦ sign(I, I^c) e_{I^c}`.
pub fn hodge_complement(a: &KVector) -> KVector {
    let n = a.dim();
    let mut out = KVector::zero(n, n - a.grade()).expect("valid shape");
    let mut raw: Coeffs = SmallVec::new();
    for (idx, c) in a.terms() {
        let comp = idx.complement(n);
        raw.push((comp, wedge_sign(idx, comp) * c));
    }
    out.coeffs = raw;
    out.normalize();
    out
}

/// Mass of a simple k-vector given its factors: `sqrt(det Gram)`.
pub fn mass_simple(a: &KVector, factors: &[Vec<f64>]) -> Result<f64> {
    if factors.len() != a.grade() {
        return Err(MultivectorError::GradeMismatch {
            left: factors.len(),
            right: a.grade(),
        });
    }
    let mut blade = KVector::scalar(a.dim(), 1.0)?;
    for f in factors {
        if f.len() != a.dim() {
            return Err(MultivectorError::DimensionMismatch {
                left: f.len(),
                right: a.dim(),
            });
        }
        blade = wedge(&blade, &KVector::vector(f)?)?;
    }
    let diff = blade.sub(a)?;
    let scale = a.max_abs().max(1.0);
    let residual = diff.max_abs() / scale;
    if residual > 1e-9 {
        return Err(MultivectorError::FactorMismatch { residual });
    }
    let k = factors.len();
    let mut gram = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            gram[i][j] = factors[i].iter().zip(&factors[j]).map(|(x, y)| x * y).sum();
        }
    }
    Ok(determinant(gram).max(0.0).sqrt())
}

fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))
            .unwrap_or(c);
        if m[piv][c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            m.swap(piv, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    det
}

/// Upper bound on the mass norm: Euclidean in grades 0, 1, n−1, n, blade sum otherwise.
pub fn mass_upper(a: &KVector) -> f64 {
    let (k, n) = (a.grade(), a.dim());
    if k <= 1 || k + 1 >= n {
        if a.len() == 1 {
            a.coeffs[0].1.abs()
        } else {
            a.euclidean_norm()
        }
    } else {
        a.l1_norm()
    }
}

/// All blades of grade `k` in dimension `n`, in lexicographic order.
pub fn basis(dim: usize, grade: usize) -> Vec<MultiIndex> {
    let mut out: Vec<MultiIndex> = (0u64..(1u64 << dim))
        .map(|b| MultiIndex(b as u32))
        .filter(|i| i.grade() == grade)
        .collect();
    out.sort();
    out
}

#[derive(Serialize, Deserialize)]
struct KVectorRepr {
    dim: usize,
    grade: usize,
    coeffs: BTreeMap<String, f64>,
}

impl KVector {
    /// Coefficient map keyed by comma-joined axes.
    pub fn coeff_map(&self) -> BTreeMap<String, f64> {
        self.terms().map(|(i, c)| (i.key(), c)).collect()
    }

    pub fn from_coeff_map(dim: usize, grade: usize, map: &BTreeMap<String, f64>) -> Result<Self> {
        let pairs = map
            .iter()
            .map(|(k, &c)| MultiIndex::parse_key(k, dim).map(|i| (i, c)))
            .collect::<Result<Vec<_>>>()?;
        KVector::from_pairs(dim, grade, pairs)
    }
}

impl Serialize for KVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        KVectorRepr {
            dim: self.dim(),
            grade: self.grade(),
            coeffs: self.coeff_map(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for KVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = KVectorRepr::deserialize(d)?;
        KVector::from_coeff_map(r.dim, r.grade, &r.coeffs).map_err(serde::de::Error::custom)
    }
}
