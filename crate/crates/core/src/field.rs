//! Scalar fields, vector fields and smooth maps with derivative access.
//!
//! Analytic fields are closures over [`Jet`]s and give exact mixed
//! directional derivatives. Sampled fields only evaluate at points and take
//! derivatives by central differences.

use std::fmt;
use std::sync::Arc;

use smallvec::SmallVec;

use crate::jet::{constants, Jet};

pub type JetFn = dyn Fn(&[Jet]) -> Jet + Send + Sync;
pub type PlainFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Central-difference settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiniteDifference {
    pub step: f64,
    /// Number of Richardson extrapolation levels.
    pub richardson: u8,
}

impl Default for FiniteDifference {
    fn default() -> Self {
        FiniteDifference {
            step: 1e-4,
            richardson: 1,
        }
    }
}

#[derive(Clone)]
enum Repr {
    Analytic(Arc<JetFn>),
    Sampled {
        f: Arc<PlainFn>,
        dirs: Vec<Vec<f64>>,
        fd: FiniteDifference,
    },
}

#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    repr: Repr,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Analytic(_) => write!(f, "ScalarField(analytic, n={})", self.dim),
            Repr::Sampled { dirs, fd, .. } => write!(
                f,
                "ScalarField(sampled, n={}, pending={}, h={})",
                self.dim,
                dirs.len(),
                fd.step
            ),
        }
    }
}

/// Multilinear evaluation of jet coordinates at real infinitesimal values.
fn realize(x: &[Jet], eps: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|j| {
            let mut s = 0.0;
            for (mask, &c) in j.coeffs().iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let mut w = c;
                let mut b = mask;
                while b != 0 {
                    let t = b.trailing_zeros() as usize;
                    w *= eps.get(t).copied().unwrap_or(0.0);
                    b &= b - 1;
                }
                s += w;
            }
            s
        })
        .collect()
}

/// Mixed central difference of `g` over the variables in `vars`, step `h`.
fn mixed_difference(g: &dyn Fn(&[f64]) -> f64, nvars: usize, vars: &[usize], h: f64) -> f64 {
    let j = vars.len();
    let mut acc = 0.0;
    let mut eps = vec![0.0; nvars];
    for signs in 0u32..(1u32 << j) {
        let mut sgn = 1.0;
        for (b, &v) in vars.iter().enumerate() {
            if signs & (1 << b) != 0 {
                eps[v] = h;
            } else {
                eps[v] = -h;
                sgn = -sgn;
            }
        }
        acc += sgn * g(&eps);
    }
    acc / (2.0 * h).powi(j as i32)
}

fn richardson(g: &dyn Fn(&[f64]) -> f64, nvars: usize, vars: &[usize], fd: FiniteDifference) -> f64 {
    if vars.is_empty() {
        return g(&vec![0.0; nvars]);
    }
    let levels = fd.richardson as usize;
    let mut row: Vec<f64> = (0..=levels)
        .map(|l| mixed_difference(g, nvars, vars, fd.step / f64::powi(2.0, l as i32)))
        .collect();
    let mut factor = 4.0;
    for _ in 0..levels {
        row = row
            .windows(2)
            .map(|w| (factor * w[1] - w[0]) / (factor - 1.0))
            .collect();
        factor *= 4.0;
    }
    row[0]
}

impl ScalarField {
    pub fn analytic<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[Jet]) -> Jet + Send + Sync + 'static,
    {
        ScalarField {
            dim,
            repr: Repr::Analytic(Arc::new(f)),
        }
    }

    pub fn sampled<F>(dim: usize, f: F, fd: FiniteDifference) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ScalarField {
            dim,
            repr: Repr::Sampled {
                f: Arc::new(f),
                dirs: Vec::new(),
                fd,
            },
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        ScalarField::analytic(dim, move |_| Jet::constant(c))
    }

    pub fn coordinate(dim: usize, i: usize) -> Self {
        assert!(i < dim, "coordinate index out of range");
        ScalarField::analytic(dim, move |p| p[i].clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self.repr, Repr::Analytic(_))
    }

    /// Finite-difference settings of a sampled field.
    pub fn finite_difference(&self) -> Option<FiniteDifference> {
        match &self.repr {
            Repr::Analytic(_) => None,
            Repr::Sampled { fd, .. } => Some(*fd),
        }
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        match &self.repr {
            Repr::Analytic(f) => f(&constants(p)).value(),
            Repr::Sampled { f, dirs, fd } => {
                if dirs.is_empty() {
                    f(p)
                } else {
                    self.eval_sampled(f, dirs, *fd, &constants(p)).value()
                }
            }
        }
    }

    /// Evaluates at jet coordinates. Sampled fields difference in infinitesimal space.
    pub fn eval_jet(&self, p: &[Jet]) -> Jet {
        match &self.repr {
            Repr::Analytic(f) => f(p),
            Repr::Sampled { f, dirs, fd } => self.eval_sampled(f, dirs, *fd, p),
        }
    }

    fn eval_sampled(&self, f: &Arc<PlainFn>, dirs: &[Vec<f64>], fd: FiniteDifference, p: &[Jet]) -> Jet {
        let m = p.iter().map(|j| j.order()).max().unwrap_or(0);
        let nd = dirs.len();
        let nvars = m + nd;
        let g = |eps: &[f64]| -> f64 {
            let mut x = realize(p, &eps[..m]);
            for (d, dir) in dirs.iter().enumerate() {
                let e = eps[m + d];
                if e != 0.0 {
                    for (xi, di) in x.iter_mut().zip(dir) {
                        *xi += e * di;
                    }
                }
            }
            f(&x)
        };
        let len = 1usize << m;
        let mut out = vec![0.0; len];
        for (mask, o) in out.iter_mut().enumerate() {
            let mut vars: SmallVec<[usize; 8]> = (0..m).filter(|b| mask & (1 << b) != 0).collect();
            vars.extend(m..nvars);
            *o = richardson(&g, nvars, &vars, fd);
        }
        Jet::from_coeffs(&out)
    }

    /// Directional derivative field `D_v f`.
    pub fn derivative(&self, v: &[f64]) -> ScalarField {
        assert_eq!(v.len(), self.dim, "direction dimension mismatch");
        match &self.repr {
            Repr::Analytic(f) => {
                let f = f.clone();
                let v = v.to_vec();
                ScalarField::analytic(self.dim, move |p| {
                    let m = p.iter().map(|j| j.order()).max().unwrap_or(0);
                    let q: Vec<Jet> = p.iter().zip(&v).map(|(x, &d)| x.extend(m, d)).collect();
                    f(&q).split_top(m)
                })
            }
            Repr::Sampled { f, dirs, fd } => {
                let mut dirs = dirs.clone();
                dirs.push(v.to_vec());
                ScalarField {
                    dim: self.dim,
                    repr: Repr::Sampled {
                        f: f.clone(),
                        dirs,
                        fd: *fd,
                    },
                }
            }
        }
    }

    pub fn partial(&self, axis: usize) -> ScalarField {
        let mut v = vec![0.0; self.dim];
        v[axis] = 1.0;
        self.derivative(&v)
    }

    fn combine(&self, other: &ScalarField, op: fn(&Jet, &Jet) -> Jet, plain: fn(f64, f64) -> f64) -> ScalarField {
        assert_eq!(self.dim, other.dim, "field dimension mismatch");
        match (&self.repr, &other.repr) {
            (Repr::Analytic(a), Repr::Analytic(b)) => {
                let (a, b) = (a.clone(), b.clone());
                ScalarField::analytic(self.dim, move |p| op(&a(p), &b(p)))
            }
            _ => {
                let fd = self
                    .finite_difference()
                    .or(other.finite_difference())
                    .unwrap_or_default();
                let (a, b) = (self.clone(), other.clone());
                ScalarField::sampled(self.dim, move |p| plain(a.eval(p), b.eval(p)), fd)
            }
        }
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.combine(other, |a, b| a + b, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.combine(other, |a, b| a - b, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        self.combine(other, |a, b| a * b, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        self.mul(&ScalarField::constant(self.dim, s))
    }

    /// `f ∘ F` for a map `F` whose output dimension matches this field.
    pub fn compose(&self, map: &SmoothMap) -> ScalarField {
        assert_eq!(map.dim_out(), self.dim, "composition dimension mismatch");
        if self.is_analytic() && map.is_analytic() {
            let f = self.clone();
            let map = map.clone();
            ScalarField::analytic(map.dim_in(), move |p| f.eval_jet(&map.eval_jet(p)))
        } else {
            let fd = self
                .finite_difference()
                .or(map.finite_difference())
                .unwrap_or_default();
            let f = self.clone();
            let map = map.clone();
            ScalarField::sampled(map.dim_in(), move |p| f.eval(&map.eval(p)), fd)
        }
    }

    /// Sum of terms, or the zero field.
    pub fn sum(dim: usize, terms: impl IntoIterator<Item = ScalarField>) -> ScalarField {
        let terms: Vec<ScalarField> = terms.into_iter().collect();
        if terms.is_empty() {
            return ScalarField::constant(dim, 0.0);
        }
        if terms.iter().all(|t| t.is_analytic()) {
            let fs: Vec<Arc<JetFn>> = terms
                .iter()
                .map(|t| match &t.repr {
                    Repr::Analytic(f) => f.clone(),
                    Repr::Sampled { .. } => unreachable!(),
                })
                .collect();
            ScalarField::analytic(dim, move |p| {
                let mut acc = fs[0](p);
                for f in &fs[1..] {
                    acc += f(p);
                }
                acc
            })
        } else {
            let mut acc = terms[0].clone();
            for t in &terms[1..] {
                acc = acc.add(t);
            }
            acc
        }
    }
}

/// A vector field on R^n given by its coordinate functions.
#[derive(Clone, Debug)]
pub struct VectorField {
    comps: Vec<ScalarField>,
    constant: Option<Vec<f64>>,
}

impl VectorField {
    pub fn new(comps: Vec<ScalarField>) -> Self {
        let n = comps.len();
        assert!(comps.iter().all(|c| c.dim() == n), "vector field components must live on R^n");
        VectorField { comps, constant: None }
    }

    pub fn constant(v: &[f64]) -> Self {
        let n = v.len();
        VectorField {
            comps: v.iter().map(|&c| ScalarField::constant(n, c)).collect(),
            constant: Some(v.to_vec()),
        }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn as_constant(&self) -> Option<&[f64]> {
        self.constant.as_deref()
    }

    pub fn is_analytic(&self) -> bool {
        self.comps.iter().all(|c| c.is_analytic())
    }

    pub fn eval(&self, p: &[f64]) -> Vec<f64> {
        if let Some(c) = &self.constant {
            return c.clone();
        }
        self.comps.iter().map(|c| c.eval(p)).collect()
    }

    pub fn eval_into(&self, p: &[f64], out: &mut [f64]) {
        if let Some(c) = &self.constant {
            out.copy_from_slice(c);
            return;
        }
        let q = constants(p);
        for (o, c) in out.iter_mut().zip(&self.comps) {
            *o = match &c.repr {
                Repr::Analytic(f) => f(&q).value(),
                Repr::Sampled { .. } => c.eval(p),
            };
        }
    }

    pub fn eval_jet(&self, p: &[Jet]) -> Vec<Jet> {
        self.comps.iter().map(|c| c.eval_jet(p)).collect()
    }
}

/// A smooth map R^m → R^k with Jacobian access.
#[derive(Clone, Debug)]
pub struct SmoothMap {
    dim_in: usize,
    comps: Vec<ScalarField>,
}

impl SmoothMap {
    pub fn new(dim_in: usize, comps: Vec<ScalarField>) -> Self {
        assert!(comps.iter().all(|c| c.dim() == dim_in), "map components must share the domain");
        SmoothMap { dim_in, comps }
    }

    pub fn identity(dim: usize) -> Self {
        SmoothMap::new(dim, (0..dim).map(|i| ScalarField::coordinate(dim, i)).collect())
    }

    /// `x ↦ A x + b`, with `a` given row-major as `rows[i][j]`.
    pub fn affine(rows: Vec<Vec<f64>>, b: Vec<f64>) -> Self {
        let dim_in = rows.first().map(|r| r.len()).unwrap_or(0);
        let comps = rows
            .into_iter()
            .zip(b)
            .map(|(row, bi)| {
                ScalarField::analytic(dim_in, move |p| {
                    let mut acc = Jet::constant(bi);
                    for (x, &a) in p.iter().zip(&row) {
                        if a != 0.0 {
                            acc += x * a;
                        }
                    }
                    acc
                })
            })
            .collect();
        SmoothMap::new(dim_in, comps)
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.comps.len()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn is_analytic(&self) -> bool {
        self.comps.iter().all(|c| c.is_analytic())
    }

    fn finite_difference(&self) -> Option<FiniteDifference> {
        self.comps.iter().find_map(|c| c.finite_difference())
    }

    pub fn eval(&self, p: &[f64]) -> Vec<f64> {
        self.comps.iter().map(|c| c.eval(p)).collect()
    }

    pub fn eval_jet(&self, p: &[Jet]) -> Vec<Jet> {
        self.comps.iter().map(|c| c.eval_jet(p)).collect()
    }

    /// Columns `DF_p e_i`.
    pub fn jacobian_columns(&self, p: &[f64]) -> Vec<Vec<f64>> {
        (0..self.dim_in)
            .map(|i| {
                let q: Vec<Jet> = p
                    .iter()
                    .enumerate()
                    .map(|(k, &x)| Jet::seed(x, &[if k == i { 1.0 } else { 0.0 }]))
                    .collect();
                self.comps.iter().map(|c| c.eval_jet(&q).coeff(1)).collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_derivative_nests() {
        let f = ScalarField::analytic(2, |p| (&p[0] * &p[1]).sin());
        let fxy = f.partial(0).partial(1);
        let (x, y) = (0.4f64, 0.7f64);
        let exact = (x * y).cos() - x * y * (x * y).sin();
        assert!((fxy.eval(&[x, y]) - exact).abs() < 1e-14);
    }

    #[test]
    fn sampled_derivative_is_second_order() {
        let fd = FiniteDifference { step: 1e-3, richardson: 0 };
        let f = ScalarField::sampled(1, |p| p[0].exp(), fd);
        let e1 = (f.partial(0).eval(&[0.0]) - 1.0).abs();
        let f2 = ScalarField::sampled(1, |p| p[0].exp(), FiniteDifference { step: 5e-4, richardson: 0 });
        let e2 = (f2.partial(0).eval(&[0.0]) - 1.0).abs();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn sampled_jet_matches_analytic() {
        let fa = ScalarField::analytic(2, |p| (&p[0] * &p[1]).cos());
        let fs = ScalarField::sampled(2, |p| (p[0] * p[1]).cos(), FiniteDifference::default());
        let q = crate::jet::seed_point(&[0.3, -0.2], &[&[1.0, 0.5], &[0.0, 1.0]]);
        let (a, s) = (fa.eval_jet(&q), fs.eval_jet(&q));
        for m in 0..4 {
            assert!((a.coeff(m) - s.coeff(m)).abs() < 1e-7, "mask {m}");
        }
    }

    #[test]
    fn jacobian_of_affine() {
        let f = SmoothMap::affine(vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![0.5, -0.5]);
        assert_eq!(f.eval(&[1.0, 1.0]), vec![3.5, 6.5]);
        assert_eq!(f.jacobian_columns(&[0.0, 0.0]), vec![vec![1.0, 3.0], vec![2.0, 4.0]]);
    }
}
