//! Differential forms, the integral pairing with chains, dual operators,
//! sampled norm probes and mollification.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::chain::{ChainError, ChainTerm, DiffChain};
use crate::field::{FiniteDifference, ScalarField, SmoothMap, VectorField};
use crate::jet::{constants, Jet};
use crate::multivector::{basis, wedge, wedge_sign, KVector, MultiIndex, MultivectorError};
use crate::numeric::{neumaier_sum, GAUSS_LEGENDRE_8};

pub const DEFAULT_ANALYTIC_DEPTH: usize = 8;
const PROBE_SEED: u64 = 0x00c0_ffee_5eed;
const PAR_THRESHOLD: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormError {
    #[error("dimension mismatch: form {form} vs {other}")]
    DimensionMismatch { form: usize, other: usize },
    #[error("grade mismatch: form {form} vs chain {chain}")]
    GradeMismatch { form: usize, chain: usize },
    #[error("marker depth {needed} exceeds derivative depth {available}")]
    DepthShortfall { needed: usize, available: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Multivector(#[from] MultivectorError),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

pub type Result<T> = std::result::Result<T, FormError>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DerivativeMode {
    Analytic { depth: usize },
    FiniteDifference(FiniteDifference),
}

/// Axis-aligned box.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(FormError::InvalidParameter("region bounds must share a positive dimension".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(FormError::InvalidParameter("region must be a bounded nondegenerate box".into()));
        }
        Ok(Region { lo, hi })
    }

    pub fn unit(dim: usize) -> Self {
        Region {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn diameter(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (a, b))| *x >= *a && *x <= *b)
    }

    pub fn dilate(&self, eta: f64) -> Region {
        Region {
            lo: self.lo.iter().map(|x| x - eta).collect(),
            hi: self.hi.iter().map(|x| x + eta).collect(),
        }
    }

    /// Uniform interior point, with some mass on faces and corners.
    fn sample_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let kind: f64 = rng.random();
        let mut p: Vec<f64> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| a + (b - a) * rng.random::<f64>())
            .collect();
        let axis = rng.random_range(0..self.dim());
        let side: bool = rng.random();
        if kind < 0.05 {
            for (i, x) in p.iter_mut().enumerate() {
                *x = if (i + axis) % 2 == usize::from(side) { self.lo[i] } else { self.hi[i] };
            }
        } else if kind < 0.15 {
            p[axis] = if side { self.hi[axis] } else { self.lo[axis] };
        }
        p
    }
}

#[derive(Clone)]
pub struct FormSpec {
    dim: usize,
    grade: usize,
    coeffs: Vec<(MultiIndex, ScalarField)>,
    mode: DerivativeMode,
    bounds: BTreeMap<usize, f64>,
}

impl fmt::Debug for FormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let keys: Vec<String> = self.coeffs.iter().map(|(i, _)| i.key()).collect();
        write!(
            f,
            "FormSpec(n={}, k={}, coeffs={:?}, mode={:?}, bounds={:?})",
            self.dim, self.grade, keys, self.mode, self.bounds
        )
    }
}

fn mode_for(fields: &[&ScalarField], fallback: DerivativeMode) -> DerivativeMode {
    if fields.iter().all(|f| f.is_analytic()) {
        match fallback {
            DerivativeMode::Analytic { .. } => fallback,
            DerivativeMode::FiniteDifference(_) => DerivativeMode::Analytic {
                depth: DEFAULT_ANALYTIC_DEPTH,
            },
        }
    } else {
        let fd = fields
            .iter()
            .find_map(|f| f.finite_difference())
            .unwrap_or_default();
        match fallback {
            DerivativeMode::FiniteDifference(fd0) => DerivativeMode::FiniteDifference(fd0),
            DerivativeMode::Analytic { .. } => DerivativeMode::FiniteDifference(fd),
        }
    }
}

impl FormSpec {
    pub fn new(dim: usize, grade: usize, coeffs: Vec<(MultiIndex, ScalarField)>) -> Result<Self> {
        if dim == 0 || grade > dim {
            return Err(FormError::InvalidParameter(format!("grade {grade} in dimension {dim}")));
        }
        let mut merged: BTreeMap<MultiIndex, ScalarField> = BTreeMap::new();
        for (idx, f) in coeffs {
            if idx.grade() != grade || idx.max_axis().map(|m| m >= dim).unwrap_or(false) {
                return Err(FormError::InvalidParameter(format!("index {} invalid for grade {grade}", idx.key())));
            }
            if f.dim() != dim {
                return Err(FormError::DimensionMismatch { form: dim, other: f.dim() });
            }
            let f = match merged.remove(&idx) {
                Some(g) => g.add(&f),
                None => f,
            };
            merged.insert(idx, f);
        }
        let coeffs: Vec<(MultiIndex, ScalarField)> = merged.into_iter().collect();
        let fields: Vec<&ScalarField> = coeffs.iter().map(|(_, f)| f).collect();
        let mode = mode_for(&fields, DerivativeMode::Analytic { depth: DEFAULT_ANALYTIC_DEPTH });
        Ok(FormSpec {
            dim,
            grade,
            coeffs,
            mode,
            bounds: BTreeMap::new(),
        })
    }

    /// Constant-coefficient form; its norm at every order is bounded by the
    /// Euclidean coefficient norm.
    pub fn constant(dim: usize, grade: usize, pairs: &[(MultiIndex, f64)]) -> Result<Self> {
        let k = KVector::from_pairs(dim, grade, pairs.iter().copied())?;
        let fields = k.terms().map(|(i, c)| (i, ScalarField::constant(dim, c))).collect();
        let b = k.euclidean_norm();
        Ok(FormSpec::new(dim, grade, fields)?.with_bound_all_orders(b))
    }

    /// `dx_I` for the given axes.
    pub fn basis(dim: usize, axes: &[usize]) -> Result<Self> {
        let idx = MultiIndex::from_axes(axes, dim)?;
        FormSpec::constant(dim, axes.len(), &[(idx, 1.0)])
    }

    /// A 0-form.
    pub fn function(f: ScalarField) -> Self {
        let dim = f.dim();
        FormSpec::new(dim, 0, vec![(MultiIndex::EMPTY, f)]).expect("valid 0-form")
    }

    /// `Σ f_i dx_i`.
    pub fn one_form(comps: Vec<ScalarField>) -> Result<Self> {
        let dim = comps.len();
        FormSpec::new(dim, 1, comps.into_iter().enumerate().map(|(i, f)| (MultiIndex::axis(i), f)).collect())
    }

    /// `f dx_0 ∧ … ∧ dx_{n−1}`.
    pub fn top(f: ScalarField) -> Self {
        let dim = f.dim();
        FormSpec::new(dim, dim, vec![(MultiIndex::full(dim), f)]).expect("valid top form")
    }

    /// Exterior derivative of a 0-form given by `f`.
    pub fn exact(f: ScalarField) -> Self {
        FormSpec::function(f).d().expect("0-form has a derivative")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grade(&self) -> usize {
        self.grade
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn coefficients(&self) -> &[(MultiIndex, ScalarField)] {
        &self.coeffs
    }

    pub fn coefficient(&self, idx: MultiIndex) -> Option<&ScalarField> {
        self.coeffs
            .binary_search_by(|(i, _)| i.cmp(&idx))
            .ok()
            .map(|k| &self.coeffs[k].1)
    }

    pub fn with_bound(mut self, r: usize, bound: f64) -> Self {
        self.bounds.insert(r, bound);
        self
    }

    pub fn with_bound_all_orders(mut self, bound: f64) -> Self {
        self.bounds.insert(usize::MAX, bound);
        self
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        if let DerivativeMode::Analytic { .. } = self.mode {
            self.mode = DerivativeMode::Analytic { depth };
        }
        self
    }

    /// Declared upper bound on the order-`r` norm. A bound declared at a
    /// higher order also bounds every lower order.
    pub fn declared_bound(&self, r: usize) -> Option<f64> {
        self.bounds.range(r..).next().map(|(_, &b)| b)
    }

    pub fn declared_bounds(&self) -> &BTreeMap<usize, f64> {
        &self.bounds
    }

    /// Replaces every coefficient by a sampled field differenced with `fd`.
    pub fn to_finite_difference(&self, fd: FiniteDifference) -> FormSpec {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(i, f)| {
                let g = f.clone();
                (*i, ScalarField::sampled(self.dim, move |p| g.eval(p), fd))
            })
            .collect();
        FormSpec {
            dim: self.dim,
            grade: self.grade,
            coeffs,
            mode: DerivativeMode::FiniteDifference(fd),
            bounds: self.bounds.clone(),
        }
    }

    fn derived(&self, grade: usize, coeffs: Vec<(MultiIndex, ScalarField)>) -> FormSpec {
        let coeffs: Vec<(MultiIndex, ScalarField)> = {
            let mut m: BTreeMap<MultiIndex, ScalarField> = BTreeMap::new();
            for (i, f) in coeffs {
                let f = match m.remove(&i) {
                    Some(g) => g.add(&f),
                    None => f,
                };
                m.insert(i, f);
            }
            m.into_iter().collect()
        };
        let fields: Vec<&ScalarField> = coeffs.iter().map(|(_, f)| f).collect();
        FormSpec {
            dim: self.dim,
            grade,
            mode: mode_for(&fields, self.mode),
            coeffs,
            bounds: BTreeMap::new(),
        }
    }

    /// `ω_p(α)`.
    pub fn at(&self, p: &[f64], alpha: &KVector) -> f64 {
        let mut acc = 0.0;
        for (i, c) in alpha.terms() {
            if let Some(f) = self.coefficient(i) {
                acc += c * f.eval(p);
            }
        }
        acc
    }

    /// Coefficients at `p`, differentiated along `dirs`.
    fn covector(&self, p: &[f64], dirs: &[&[f64]]) -> Vec<f64> {
        if dirs.is_empty() {
            let q = constants(p);
            return self.coeffs.iter().map(|(_, f)| f.eval_jet(&q).value()).collect();
        }
        let q = crate::jet::seed_point(p, dirs);
        let top = (1usize << dirs.len()) - 1;
        self.coeffs.iter().map(|(_, f)| f.eval_jet(&q).coeff(top)).collect()
    }

    fn eval_term(&self, t: &ChainTerm) -> f64 {
        let alpha = t.alpha();
        if t.depth() == 0 {
            let q = constants(t.point());
            let mut acc = 0.0;
            for (i, c) in alpha.terms() {
                if let Some(f) = self.coefficient(i) {
                    acc += c * f.eval_jet(&q).value();
                }
            }
            acc
        } else {
            let x = t.seeded_point();
            let top = (1usize << t.depth()) - 1;
            let mut acc = 0.0;
            for (i, c) in alpha.terms() {
                if let Some(f) = self.coefficient(i) {
                    acc += c * f.eval_jet(&x).coeff(top);
                }
            }
            acc
        }
    }

    fn check_chain(&self, a: &DiffChain) -> Result<()> {
        if a.dim() != self.dim {
            return Err(FormError::DimensionMismatch { form: self.dim, other: a.dim() });
        }
        if a.grade() != self.grade {
            return Err(FormError::GradeMismatch { form: self.grade, chain: a.grade() });
        }
        if let DerivativeMode::Analytic { depth } = self.mode {
            let needed = a.max_depth();
            if needed > depth {
                return Err(FormError::DepthShortfall { needed, available: depth });
            }
        }
        Ok(())
    }

    /// `d`: `(dω)_J = Σ_t (−1)^t ∂_{j_t} ω_{J∖j_t}`.
    pub fn d(&self) -> Result<FormSpec> {
        if self.grade >= self.dim {
            return Err(FormError::InvalidParameter("d of a top-degree form".into()));
        }
        let mut out = Vec::new();
        for j in basis(self.dim, self.grade + 1) {
            for (t, ax) in j.axes().enumerate() {
                let rest = MultiIndex::from_bits(j.bits() & !(1 << ax));
                if let Some(f) = self.coefficient(rest) {
                    let g = f.partial(ax);
                    out.push((j, if t % 2 == 0 { g } else { g.scale(-1.0) }));
                }
            }
        }
        Ok(self.derived(self.grade + 1, out))
    }

    /// Star dual to the chain complement: `(⋆ω)_J = sign(J, J^c) ω_{J^c}`.
    pub fn hodge(&self) -> FormSpec {
        let k = self.dim - self.grade;
        let mut out = Vec::new();
        for j in basis(self.dim, k) {
            let jc = j.complement(self.dim);
            if let Some(f) = self.coefficient(jc) {
                let s = wedge_sign(j, jc);
                out.push((j, if s > 0.0 { f.clone() } else { f.scale(-1.0) }));
            }
        }
        self.derived(k, out)
    }

    /// `ι_X ω`: `(ι_X ω)(α) = ω(X ∧ α)`.
    pub fn interior(&self, x: &VectorField) -> Result<FormSpec> {
        self.check_field(x.dim())?;
        if self.grade == 0 {
            return Err(FormError::InvalidParameter("interior product of a 0-form".into()));
        }
        let mut out = Vec::new();
        for j in basis(self.dim, self.grade - 1) {
            for (i, xi) in x.components().iter().enumerate() {
                if j.contains(i) {
                    continue;
                }
                let full = MultiIndex::from_bits(j.bits() | (1 << i));
                if let Some(f) = self.coefficient(full) {
                    let s = wedge_sign(MultiIndex::axis(i), j);
                    out.push((j, xi.mul(f).scale(s)));
                }
            }
        }
        Ok(self.derived(self.grade - 1, out))
    }

    /// `X♭ ∧ ω`: `(X♭∧ω)(α) = ω(X ⌟ α)`.
    pub fn flat_wedge(&self, x: &VectorField) -> Result<FormSpec> {
        self.check_field(x.dim())?;
        if self.grade >= self.dim {
            return Err(FormError::InvalidParameter("wedge would exceed the dimension".into()));
        }
        let mut out = Vec::new();
        for j in basis(self.dim, self.grade + 1) {
            for (t, ax) in j.axes().enumerate() {
                let rest = MultiIndex::from_bits(j.bits() & !(1 << ax));
                if let Some(f) = self.coefficient(rest) {
                    let s = if t % 2 == 0 { 1.0 } else { -1.0 };
                    out.push((j, x.components()[ax].mul(f).scale(s)));
                }
            }
        }
        Ok(self.derived(self.grade + 1, out))
    }

    /// Lie derivative along a constant direction.
    pub fn lie(&self, v: &[f64]) -> Result<FormSpec> {
        self.check_field(v.len())?;
        let out = self.coeffs.iter().map(|(i, f)| (*i, f.derivative(v))).collect();
        Ok(self.derived(self.grade, out))
    }

    /// `f ω`.
    pub fn multiply(&self, f: &ScalarField) -> Result<FormSpec> {
        self.check_field(f.dim())?;
        let out = self.coeffs.iter().map(|(i, g)| (*i, f.mul(g))).collect();
        Ok(self.derived(self.grade, out))
    }

    pub fn add(&self, other: &FormSpec) -> Result<FormSpec> {
        self.check_field(other.dim)?;
        if self.grade != other.grade {
            return Err(FormError::GradeMismatch { form: self.grade, chain: other.grade });
        }
        let mut all = self.coeffs.clone();
        all.extend(other.coeffs.iter().cloned());
        let mut out = self.derived(self.grade, all);
        if let (Some(a), Some(b)) = (self.declared_bound(usize::MAX), other.declared_bound(usize::MAX)) {
            out.bounds.insert(usize::MAX, a + b);
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> FormSpec {
        let out = self.coeffs.iter().map(|(i, f)| (*i, f.scale(s))).collect();
        let mut f = self.derived(self.grade, out);
        f.bounds = self.bounds.iter().map(|(&r, &b)| (r, b * s.abs())).collect();
        f
    }

    fn check_field(&self, d: usize) -> Result<()> {
        if d != self.dim {
            return Err(FormError::DimensionMismatch { form: self.dim, other: d });
        }
        Ok(())
    }

    /// `F^*ω` for `F: R^m → R^n`: `(F^*ω)_J = Σ_I (ω_I∘F) det(DF[I, J])`.
    pub fn pullback(&self, map: &SmoothMap) -> Result<FormSpec> {
        if map.dim_out() != self.dim {
            return Err(FormError::DimensionMismatch { form: self.dim, other: map.dim_out() });
        }
        let m = map.dim_in();
        if self.grade > m {
            return Err(FormError::InvalidParameter("pullback grade exceeds source dimension".into()));
        }
        let jac: Vec<Vec<ScalarField>> = map
            .components()
            .iter()
            .map(|fi| (0..m).map(|j| fi.partial(j)).collect())
            .collect();
        let mut out = Vec::new();
        for jdx in basis(m, self.grade) {
            let cols: Vec<usize> = jdx.axes().collect();
            let mut terms = Vec::new();
            for (idx, w) in &self.coeffs {
                let rows: Vec<usize> = idx.axes().collect();
                let det = minor_det(&jac, &rows, &cols, m);
                terms.push(w.compose(map).mul(&det));
            }
            out.push((jdx, ScalarField::sum(m, terms)));
        }
        let mut f = FormSpec {
            dim: m,
            grade: self.grade,
            coeffs: Vec::new(),
            mode: self.mode,
            bounds: BTreeMap::new(),
        };
        f = f.derived(self.grade, out);
        Ok(f)
    }

    /// Smoothing by a normalized radial bump of radius `eta`.
    pub fn mollify(&self, eta: f64) -> Result<FormSpec> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(FormError::InvalidParameter(format!("mollifier radius must be positive, got {eta}")));
        }
        let nodes = mollifier_nodes(self.dim, eta);
        let out = self
            .coeffs
            .iter()
            .map(|(i, f)| (*i, mollify_field(f, &nodes)))
            .collect();
        let mut g = self.derived(self.grade, out);
        g.bounds = self.bounds.clone();
        Ok(g)
    }
}

fn minor_det(jac: &[Vec<ScalarField>], rows: &[usize], cols: &[usize], dim: usize) -> ScalarField {
    let k = rows.len();
    if k == 0 {
        return ScalarField::constant(dim, 1.0);
    }
    let mut terms = Vec::new();
    for perm in permutations(k) {
        let sign = permutation_sign(&perm);
        let mut prod = jac[rows[0]][cols[perm[0]]].clone();
        for (r, &p) in perm.iter().enumerate().skip(1) {
            prod = prod.mul(&jac[rows[r]][cols[p]]);
        }
        terms.push(if sign > 0.0 { prod } else { prod.scale(-1.0) });
    }
    ScalarField::sum(dim, terms)
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
    out
}

fn permutation_sign(p: &[usize]) -> f64 {
    let mut inv = 0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Radial bump `exp(−1/(1−t²))` on the unit ball.
fn bump(t: f64) -> f64 {
    if t >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// Product Gauss–Legendre nodes over `[−η, η]^n` weighted by the normalized kernel.
pub fn mollifier_nodes(dim: usize, eta: f64) -> Vec<(Vec<f64>, f64)> {
    let mut nodes = Vec::new();
    let total = GAUSS_LEGENDRE_8.len().pow(dim as u32);
    for flat in 0..total {
        let mut rem = flat;
        let mut x = Vec::with_capacity(dim);
        let mut w = 1.0;
        for _ in 0..dim {
            let (xi, wi) = GAUSS_LEGENDRE_8[rem % 8];
            rem /= 8;
            x.push(xi);
            w *= wi;
        }
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let k = bump(r);
        if k > 0.0 {
            nodes.push((x.into_iter().map(|v| v * eta).collect(), w * k));
        }
    }
    let s: f64 = nodes.iter().map(|(_, w)| w).sum();
    for (_, w) in nodes.iter_mut() {
        *w /= s;
    }
    nodes
}

fn mollify_field(f: &ScalarField, nodes: &[(Vec<f64>, f64)]) -> ScalarField {
    let dim = f.dim();
    let nodes = nodes.to_vec();
    let g = f.clone();
    if f.is_analytic() {
        ScalarField::analytic(dim, move |p| {
            let mut acc = Jet::constant(0.0);
            for (v, w) in &nodes {
                let q: Vec<Jet> = p.iter().zip(v).map(|(x, d)| x + *d).collect();
                acc += g.eval_jet(&q) * *w;
            }
            acc
        })
    } else {
        let fd = f.finite_difference().unwrap_or_default();
        ScalarField::sampled(
            dim,
            move |p| {
                let mut acc = 0.0;
                for (v, w) in &nodes {
                    let q: Vec<f64> = p.iter().zip(v).map(|(x, d)| x + d).collect();
                    acc += w * g.eval(&q);
                }
                acc
            },
            fd,
        )
    }
}

/// The integral pairing `∮_A ω = Σ (L_{v_1}…L_{v_j} ω)(p; α)`.
pub fn evaluate(omega: &FormSpec, a: &DiffChain) -> Result<f64> {
    omega.check_chain(a)?;
    let terms = a.terms();
    if terms.len() >= PAR_THRESHOLD {
        let parts: Vec<f64> = terms.par_iter().map(|t| omega.eval_term(t)).collect();
        Ok(neumaier_sum(parts))
    } else {
        Ok(neumaier_sum(terms.iter().map(|t| omega.eval_term(t))))
    }
}

/// Pullback by `F`; dual to pushforward.
pub fn pullback(map: &SmoothMap, omega: &FormSpec) -> Result<FormSpec> {
    omega.pullback(map)
}

pub fn mollify(omega: &FormSpec, eta: f64) -> Result<FormSpec> {
    omega.mollify(eta)
}

fn exact_comass_grade(dim: usize, grade: usize) -> bool {
    grade <= 1 || grade + 1 >= dim
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    if dim == 1 || rng.random::<f64>() < 0.25 {
        let mut v = vec![0.0; dim];
        let i = rng.random_range(0..dim);
        v[i] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return v;
    }
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = crate::numeric::norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Random unit simple k-vector from an orthonormalized Gaussian frame.
fn random_unit_blade(rng: &mut ChaCha8Rng, dim: usize, grade: usize) -> KVector {
    let mut frame: Vec<Vec<f64>> = Vec::new();
    while frame.len() < grade {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for f in &frame {
            let d: f64 = v.iter().zip(f).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(f) {
                *x -= d * y;
            }
        }
        let n = crate::numeric::norm(&v);
        if n > 1e-9 {
            frame.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    let mut b = KVector::scalar(dim, 1.0).expect("valid dimension");
    for f in &frame {
        b = wedge(&b, &KVector::vector(f).expect("valid vector")).expect("grade fits");
    }
    b
}

const BLADE_DRAWS: usize = 4;

impl FormSpec {
    /// Comass of a coefficient vector (exact in grades 0, 1, n−1, n; sampled otherwise).
    fn comass(&self, cov: &[f64], rng: &mut ChaCha8Rng) -> f64 {
        if exact_comass_grade(self.dim, self.grade) {
            return cov.iter().map(|c| c * c).sum::<f64>().sqrt();
        }
        let mut best = 0.0f64;
        for _ in 0..BLADE_DRAWS {
            let b = random_unit_blade(rng, self.dim, self.grade);
            let mut s = 0.0;
            for ((i, _), c) in self.coeffs.iter().zip(cov) {
                s += c * b.coeff(*i);
            }
            best = best.max(s.abs());
        }
        best
    }
}

fn log_scale(rng: &mut ChaCha8Rng, diam: f64) -> f64 {
    diam * 10f64.powf(-4.0 * rng.random::<f64>())
}

/// Lower bound on the order-`r` norm over `region` from pointwise derivative
/// samples and Lipschitz quotients of the top derivative.
pub fn form_norm_estimate(omega: &FormSpec, r: usize, region: &Region, samples: usize) -> Result<f64> {
    if region.dim() != omega.dim {
        return Err(FormError::DimensionMismatch { form: omega.dim, other: region.dim() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let diam = region.diameter();
    let mut best = 0.0f64;
    for s in 0..samples {
        let kind = s % (r + 1);
        let p = region.sample_point(&mut rng);
        if kind < r || r == 0 {
            let dirs: Vec<Vec<f64>> = (0..kind).map(|_| random_unit(&mut rng, omega.dim)).collect();
            let refs: Vec<&[f64]> = dirs.iter().map(|d| d.as_slice()).collect();
            let cov = omega.covector(&p, &refs);
            best = best.max(omega.comass(&cov, &mut rng));
        } else {
            let dirs: Vec<Vec<f64>> = (0..r - 1).map(|_| random_unit(&mut rng, omega.dim)).collect();
            let w = random_unit(&mut rng, omega.dim);
            let h = log_scale(&mut rng, diam);
            let q: Vec<f64> = p
                .iter()
                .zip(&w)
                .enumerate()
                .map(|(i, (a, b))| (a + h * b).clamp(region.lo[i], region.hi[i]))
                .collect();
            let step = crate::numeric::dist(&p, &q);
            let q = (step > 1e-3 * h).then_some(q);
            let refs: Vec<&[f64]> = dirs.iter().map(|d| d.as_slice()).collect();
            match q {
                Some(q) => {
                    let a = omega.covector(&p, &refs);
                    let b = omega.covector(&q, &refs);
                    let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| y - x).collect();
                    best = best.max(omega.comass(&diff, &mut rng) / step);
                }
                None => {
                    omega.comass(&[], &mut rng);
                }
            }
        }
    }
    Ok(best)
}

/// Lower bound on the order-`r` norm from difference chains `Δ_U^j(p; α)`, `j ≤ r`.
pub fn difference_norm_probe(omega: &FormSpec, r: usize, region: &Region, samples: usize) -> Result<f64> {
    if region.dim() != omega.dim {
        return Err(FormError::DimensionMismatch { form: omega.dim, other: region.dim() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED ^ 0xd1ff);
    let diam = region.diameter();
    let n = omega.dim;
    let mut best = 0.0f64;
    for s in 0..samples {
        let j = s % (r + 1);
        let dirs: Vec<Vec<f64>> = (0..j).map(|_| random_unit(&mut rng, n)).collect();
        let mut scales: Vec<f64> = (0..j).map(|_| log_scale(&mut rng, diam)).collect();
        let corner: f64 = rng.random();
        let unif: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let mut placed = None;
        for _ in 0..40 {
            let mut lo_shift = vec![0.0; n];
            let mut hi_shift = vec![0.0; n];
            for (d, &h) in dirs.iter().zip(&scales) {
                for i in 0..n {
                    let x = d[i] * h;
                    lo_shift[i] += x.min(0.0);
                    hi_shift[i] += x.max(0.0);
                }
            }
            let mut p = Vec::with_capacity(n);
            let mut ok = true;
            for i in 0..n {
                let a = region.lo[i] - lo_shift[i];
                let b = region.hi[i] - hi_shift[i];
                if a > b {
                    ok = false;
                    break;
                }
                let t = if corner < 0.1 {
                    if unif[i] < 0.5 { 0.0 } else { 1.0 }
                } else {
                    unif[i]
                };
                p.push(a + (b - a) * t);
            }
            if ok {
                placed = Some(p);
                break;
            }
            for h in scales.iter_mut() {
                *h *= 0.5;
            }
        }
        let Some(p) = placed else {
            continue;
        };
        let mut cov = vec![0.0; omega.coeffs.len()];
        for mask in 0usize..(1 << j) {
            let mut q = p.clone();
            for (b, (d, &h)) in dirs.iter().zip(&scales).enumerate() {
                if mask & (1 << b) != 0 {
                    for (x, y) in q.iter_mut().zip(d) {
                        *x += h * y;
                    }
                }
            }
            let sign = if (j - mask.count_ones() as usize) % 2 == 0 { 1.0 } else { -1.0 };
            for (c, v) in cov.iter_mut().zip(omega.covector(&q, &[])) {
                *c += sign * v;
            }
        }
        let denom: f64 = scales.iter().product();
        best = best.max(omega.comass(&cov, &mut rng) / denom);
    }
    Ok(best)
}

/// Forms over `[0,1]^2` used to cross-check the two norm probes.
pub fn smooth_form_bank() -> Vec<(&'static str, FormSpec)> {
    let n = 2;
    let f = |g: fn(&[Jet]) -> Jet| ScalarField::analytic(n, g);
    vec![
        ("dx", FormSpec::basis(2, &[0]).expect("basis form")),
        (
            "half_sin_3x_plus_y_dx",
            FormSpec::one_form(vec![
                f(|p| (&p[0] * 3.0 + &p[1]).sin() * 0.5),
                ScalarField::constant(n, 0.0),
            ])
            .expect("one-form"),
        ),
        (
            "gauss_dy",
            FormSpec::one_form(vec![
                ScalarField::constant(n, 0.0),
                f(|p| (-(&p[0] * &p[0] + &p[1] * &p[1])).exp()),
            ])
            .expect("one-form"),
        ),
        (
            "poly_pair",
            FormSpec::one_form(vec![f(|p| &p[0] * &p[0] - &p[1]), f(|p| &p[0] * &p[1])]).expect("one-form"),
        ),
        (
            "cos_area",
            FormSpec::top(f(|p| (&p[0] * 2.0).cos() * p[1].cos())),
        ),
        ("sin_cos_function", FormSpec::function(f(|p| p[0].sin() * (&p[1] * 2.0).cos()))),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{point, unit};

    fn e(dim: usize, axes: &[usize]) -> KVector {
        KVector::blade(dim, axes, 1.0).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let dx = FormSpec::basis(2, &[0]).unwrap();
        let a = DiffChain::pointed(&[0.3, 0.4], e(2, &[0])).unwrap();
        assert_eq!(evaluate(&dx, &a).unwrap(), 1.0);
        let f = ScalarField::analytic(2, |p| (&p[0] * &p[1]).sin() + &p[0] * &p[0]);
        let df = FormSpec::exact(f);
        let t = ChainTerm::new(point(&[0.2, 0.7]), e(2, &[1]), vec![unit(2, 0)]);
        let v = evaluate(&df, &DiffChain::single(t).unwrap()).unwrap();
        let (x, y) = (0.2f64, 0.7f64);
        let exact = (x * y).cos() - x * y * (x * y).sin();
        assert!((v - exact).abs() < 1e-14);
    }

    #[test]
    fn depth_and_shape_errors() {
        let dx = FormSpec::basis(2, &[0]).unwrap().with_depth(1);
        let a = DiffChain::pointed(&[0.0, 0.0], e(2, &[0]))
            .unwrap()
            .prederivative(&[1.0, 0.0])
            .unwrap()
            .prederivative(&[0.0, 1.0])
            .unwrap();
        assert!(matches!(evaluate(&dx, &a), Err(FormError::DepthShortfall { needed: 2, available: 1 })));
        let b = DiffChain::pointed(&[0.0, 0.0], e(2, &[0, 1])).unwrap();
        assert!(matches!(evaluate(&dx, &b), Err(FormError::GradeMismatch { .. })));
    }

    #[test]
    fn x_dy_has_derivative_area() {
        let w = FormSpec::one_form(vec![ScalarField::constant(2, 0.0), ScalarField::coordinate(2, 0)]).unwrap();
        let a = DiffChain::pointed(&[0.0, 0.0], e(2, &[0, 1])).unwrap();
        let lhs = evaluate(&w, &a.boundary().unwrap()).unwrap();
        let rhs = evaluate(&w.d().unwrap(), &a).unwrap();
        assert_eq!(lhs, 1.0);
        assert_eq!(rhs, 1.0);
    }

    #[test]
    fn pullback_examples() {
        let circle = SmoothMap::new(
            1,
            vec![ScalarField::analytic(1, |p| p[0].cos()), ScalarField::analytic(1, |p| p[0].sin())],
        );
        let w = FormSpec::one_form(vec![
            ScalarField::coordinate(2, 1).scale(-1.0),
            ScalarField::coordinate(2, 0),
        ])
        .unwrap();
        let pb = w.pullback(&circle).unwrap();
        for t in [0.0, 0.7, 2.5] {
            assert!((pb.at(&[t], &e(1, &[0])) - 1.0).abs() < 1e-14);
        }
        let scale2 = SmoothMap::affine(vec![vec![2.0, 0.0], vec![0.0, 2.0]], vec![0.0, 0.0]);
        let area = FormSpec::basis(2, &[0, 1]).unwrap();
        assert_eq!(area.pullback(&scale2).unwrap().at(&[0.1, 0.2], &e(2, &[0, 1])), 4.0);
        let id = area.pullback(&SmoothMap::identity(2)).unwrap();
        assert_eq!(id.at(&[0.3, 0.3], &e(2, &[0, 1])), 1.0);
    }

    #[test]
    fn sin_norm_on_period() {
        let w = FormSpec::one_form(vec![ScalarField::analytic(1, |p| p[0].sin())]).unwrap();
        let region = Region::new(vec![0.0], vec![2.0 * std::f64::consts::PI]).unwrap();
        let est = form_norm_estimate(&w, 1, &region, 20_000).unwrap();
        assert!((est - 1.0).abs() < 1e-3, "{est}");
        let dx = FormSpec::basis(2, &[0]).unwrap();
        for r in 0..3 {
            let est = form_norm_estimate(&dx, r, &Region::unit(2), 500).unwrap();
            assert!((est - 1.0).abs() < 1e-12);
            assert!(est <= dx.declared_bound(r).unwrap());
            let dp = difference_norm_probe(&dx, r, &Region::unit(2), 500).unwrap();
            assert!((dp - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn kink_slope_recovered() {
        let w = FormSpec::one_form(vec![ScalarField::analytic(1, |p| (&p[0] - 0.5).abs())]).unwrap();
        let est = difference_norm_probe(&w, 1, &Region::unit(1), 20_000).unwrap();
        assert!((est - 1.0).abs() < 0.05, "{est}");
    }

    #[test]
    fn estimates_are_monotone_in_budget() {
        let (_, w) = &smooth_form_bank()[1];
        let a = form_norm_estimate(w, 2, &Region::unit(2), 300).unwrap();
        let b = form_norm_estimate(w, 2, &Region::unit(2), 3000).unwrap();
        assert!(a <= b);
        let a = difference_norm_probe(w, 2, &Region::unit(2), 300).unwrap();
        let b = difference_norm_probe(w, 2, &Region::unit(2), 3000).unwrap();
        assert!(a <= b);
    }

    #[test]
    fn mollify_preserves_constants() {
        let w = FormSpec::constant(2, 1, &[(MultiIndex::axis(0), 2.5), (MultiIndex::axis(1), -1.0)]).unwrap();
        let m = w.mollify(0.1).unwrap();
        for p in [[0.0, 0.0], [0.3, -0.7]] {
            assert!((m.at(&p, &e(2, &[0])) - 2.5).abs() < 1e-8);
            assert!((m.at(&p, &e(2, &[1])) + 1.0).abs() < 1e-8);
        }
        assert!(matches!(w.mollify(0.0), Err(FormError::InvalidParameter(_))));
    }

    #[test]
    fn finite_difference_mode_agrees() {
        let f = ScalarField::analytic(2, |p| (&p[0] * 2.0).sin() * p[1].exp());
        let w = FormSpec::exact(f);
        let fdw = w.to_finite_difference(FiniteDifference::default());
        assert!(matches!(fdw.mode(), DerivativeMode::FiniteDifference(_)));
        let t = ChainTerm::new(point(&[0.3, 0.2]), e(2, &[0]), vec![unit(2, 1)]);
        let a = DiffChain::single(t).unwrap();
        let (x, y) = (evaluate(&w, &a).unwrap(), evaluate(&fdw, &a).unwrap());
        assert!((x - y).abs() < 1e-7, "{x} {y}");
    }
}
