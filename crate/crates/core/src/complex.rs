//! Contour integrals of complex functions against 1-chains in the plane:
//! winding numbers, the Cauchy formula, residues, signed density and the
//! polygonal closing construction.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::chain::{ChainError, DiffChain};
use crate::domains::{circle, curve_chain, Cell, DomainError, PolyhedralChain};
use crate::field::{FiniteDifference, ScalarField};
use crate::jet::seed_point;
use crate::numeric::ComplexNeumaier;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComplexError {
    #[error("expected a 1-chain in the plane, got grade {grade} in dimension {dim}")]
    NotPlanarCurve { dim: usize, grade: usize },
    #[error("chain point ({x}, {y}) lies in the disk of the pole at ({px}, {py})")]
    PoleIntersection { x: f64, y: f64, px: f64, py: f64 },
    #[error("point is {distance} from the chain support, below the clearance {required}")]
    Clearance { distance: f64, required: f64 },
    #[error("pole disks around ({ax}, {ay}) and ({bx}, {by}) overlap")]
    OverlappingPoles { ax: f64, ay: f64, bx: f64, by: f64 },
    #[error("point lies on a cell edge; perturb it")]
    PointOnEdge,
    #[error("segment subtends too wide an angle at the projection center")]
    SegmentTooLong,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

pub type Result<T> = std::result::Result<T, ComplexError>;

/// Truncated complex Taylor series `Σ a_k (w − z)^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct CJet {
    c: Vec<Complex64>,
}

impl CJet {
    pub fn constant(c: Complex64, order: usize) -> Self {
        let mut v = vec![Complex64::new(0.0, 0.0); order + 1];
        v[0] = c;
        CJet { c: v }
    }

    /// The identity function expanded at `z`.
    pub fn variable(z: Complex64, order: usize) -> Self {
        let mut j = CJet::constant(z, order);
        if order >= 1 {
            j.c[1] = Complex64::new(1.0, 0.0);
        }
        j
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn value(&self) -> Complex64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.c
    }

    /// `f^{(k)}(z)`.
    pub fn derivative(&self, k: usize) -> Complex64 {
        let mut f = 1.0;
        for i in 2..=k {
            f *= i as f64;
        }
        self.c.get(k).copied().unwrap_or_default() * f
    }

    fn zip(&self, o: &CJet, f: impl Fn(Complex64, Complex64) -> Complex64) -> CJet {
        let n = self.c.len().min(o.c.len());
        CJet {
            c: (0..n).map(|i| f(self.c[i], o.c[i])).collect(),
        }
    }

    fn map_const(&self, f: impl Fn(Complex64) -> Complex64) -> CJet {
        let mut c = self.c.clone();
        c[0] = f(c[0]);
        CJet { c }
    }

    fn scale(&self, s: Complex64) -> CJet {
        CJet {
            c: self.c.iter().map(|x| x * s).collect(),
        }
    }

    pub fn recip(&self) -> CJet {
        let n = self.c.len();
        let mut b = vec![Complex64::new(0.0, 0.0); n];
        let inv = self.c[0].inv();
        b[0] = inv;
        for k in 1..n {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 1..=k {
                s += self.c[j] * b[k - j];
            }
            b[k] = -s * inv;
        }
        CJet { c: b }
    }

    pub fn exp(&self) -> CJet {
        let n = self.c.len();
        let mut b = vec![Complex64::new(0.0, 0.0); n];
        b[0] = self.c[0].exp();
        for k in 1..n {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 1..=k {
                s += self.c[j] * b[k - j] * j as f64;
            }
            b[k] = s / k as f64;
        }
        CJet { c: b }
    }

    pub fn ln(&self) -> CJet {
        let n = self.c.len();
        let mut b = vec![Complex64::new(0.0, 0.0); n];
        b[0] = self.c[0].ln();
        for k in 1..n {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 1..k {
                s += b[j] * self.c[k - j] * j as f64;
            }
            b[k] = (self.c[k] - s / k as f64) / self.c[0];
        }
        CJet { c: b }
    }

    fn sin_cos(&self) -> (CJet, CJet) {
        let n = self.c.len();
        let mut s = vec![Complex64::new(0.0, 0.0); n];
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        s[0] = self.c[0].sin();
        c[0] = self.c[0].cos();
        for k in 1..n {
            let mut ss = Complex64::new(0.0, 0.0);
            let mut cc = Complex64::new(0.0, 0.0);
            for j in 1..=k {
                let a = self.c[j] * j as f64;
                ss += a * c[k - j];
                cc += a * s[k - j];
            }
            s[k] = ss / k as f64;
            c[k] = -cc / k as f64;
        }
        (CJet { c: s }, CJet { c })
    }

    pub fn sin(&self) -> CJet {
        self.sin_cos().0
    }

    pub fn cos(&self) -> CJet {
        self.sin_cos().1
    }

    pub fn powi(&self, p: i32) -> CJet {
        if p < 0 {
            return self.powi(-p).recip();
        }
        let mut out = CJet::constant(Complex64::new(1.0, 0.0), self.order());
        let mut base = self.clone();
        let mut e = p as u32;
        while e > 0 {
            if e & 1 == 1 {
                out = &out * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        out
    }

    pub fn sqrt(&self) -> CJet {
        (self.ln() * 0.5).exp()
    }
}

impl Add<&CJet> for &CJet {
    type Output = CJet;
    fn add(self, o: &CJet) -> CJet {
        self.zip(o, |a, b| a + b)
    }
}

impl Sub<&CJet> for &CJet {
    type Output = CJet;
    fn sub(self, o: &CJet) -> CJet {
        self.zip(o, |a, b| a - b)
    }
}

impl Mul<&CJet> for &CJet {
    type Output = CJet;
    fn mul(self, o: &CJet) -> CJet {
        let n = self.c.len().min(o.c.len());
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n - i {
                c[i + j] += self.c[i] * o.c[j];
            }
        }
        CJet { c }
    }
}

impl Div<&CJet> for &CJet {
    type Output = CJet;
    fn div(self, o: &CJet) -> CJet {
        self * &o.recip()
    }
}

impl Neg for &CJet {
    type Output = CJet;
    fn neg(self) -> CJet {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Neg for CJet {
    type Output = CJet;
    fn neg(self) -> CJet {
        -&self
    }
}

macro_rules! cjet_ops {
    ($tr:ident, $m:ident) => {
        impl $tr<CJet> for CJet {
            type Output = CJet;
            fn $m(self, o: CJet) -> CJet {
                (&self).$m(&o)
            }
        }
        impl $tr<&CJet> for CJet {
            type Output = CJet;
            fn $m(self, o: &CJet) -> CJet {
                (&self).$m(o)
            }
        }
        impl $tr<CJet> for &CJet {
            type Output = CJet;
            fn $m(self, o: CJet) -> CJet {
                self.$m(&o)
            }
        }
    };
}

cjet_ops!(Add, add);
cjet_ops!(Sub, sub);
cjet_ops!(Mul, mul);
cjet_ops!(Div, div);

macro_rules! cjet_scalar_ops {
    ($s:ty, $conv:expr) => {
        impl Add<$s> for &CJet {
            type Output = CJet;
            fn add(self, o: $s) -> CJet {
                let o: Complex64 = $conv(o);
                self.map_const(|a| a + o)
            }
        }
        impl Add<$s> for CJet {
            type Output = CJet;
            fn add(self, o: $s) -> CJet {
                &self + o
            }
        }
        impl Sub<$s> for &CJet {
            type Output = CJet;
            fn sub(self, o: $s) -> CJet {
                let o: Complex64 = $conv(o);
                self.map_const(|a| a - o)
            }
        }
        impl Sub<$s> for CJet {
            type Output = CJet;
            fn sub(self, o: $s) -> CJet {
                &self - o
            }
        }
        impl Mul<$s> for &CJet {
            type Output = CJet;
            fn mul(self, o: $s) -> CJet {
                self.scale($conv(o))
            }
        }
        impl Mul<$s> for CJet {
            type Output = CJet;
            fn mul(self, o: $s) -> CJet {
                &self * o
            }
        }
        impl Div<$s> for &CJet {
            type Output = CJet;
            fn div(self, o: $s) -> CJet {
                let o: Complex64 = $conv(o);
                self.scale(o.inv())
            }
        }
        impl Div<$s> for CJet {
            type Output = CJet;
            fn div(self, o: $s) -> CJet {
                &self / o
            }
        }
    };
}

cjet_scalar_ops!(f64, |x: f64| Complex64::new(x, 0.0));
cjet_scalar_ops!(Complex64, |x: Complex64| x);

pub type CJetFn = dyn Fn(&CJet) -> CJet + Send + Sync;
pub type ComplexFn = dyn Fn(Complex64) -> Complex64 + Send + Sync;

/// Declared isolated singularity with the radius of a punctured disk on
/// which the function is holomorphic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct Pole {
    pub at: [f64; 2],
    pub radius: f64,
}

impl Pole {
    pub fn new(x: f64, y: f64, radius: f64) -> Self {
        Pole { at: [x, y], radius }
    }

    fn z(&self) -> Complex64 {
        Complex64::new(self.at[0], self.at[1])
    }
}

#[derive(Clone)]
enum Repr {
    Analytic(Arc<CJetFn>),
    Sampled {
        f: Arc<ComplexFn>,
        re: ScalarField,
        im: ScalarField,
    },
}

/// A complex function on a planar region with declared poles.
#[derive(Clone)]
pub struct HolomorphicSpec {
    repr: Repr,
    poles: Vec<Pole>,
}

impl fmt::Debug for HolomorphicSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.repr {
            Repr::Analytic(_) => "analytic",
            Repr::Sampled { .. } => "sampled",
        };
        write!(f, "HolomorphicSpec({kind}, poles={:?})", self.poles)
    }
}

impl HolomorphicSpec {
    /// Function given on truncated Taylor series; derivatives are exact.
    pub fn analytic<F>(f: F) -> Self
    where
        F: Fn(&CJet) -> CJet + Send + Sync + 'static,
    {
        HolomorphicSpec {
            repr: Repr::Analytic(Arc::new(f)),
            poles: Vec::new(),
        }
    }

    /// Function given by values; derivatives by finite differences of its
    /// real and imaginary parts.
    pub fn sampled<F>(f: F, fd: FiniteDifference) -> Self
    where
        F: Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    {
        let f: Arc<ComplexFn> = Arc::new(f);
        let (a, b) = (f.clone(), f.clone());
        HolomorphicSpec {
            repr: Repr::Sampled {
                f,
                re: ScalarField::sampled(2, move |p| a(Complex64::new(p[0], p[1])).re, fd),
                im: ScalarField::sampled(2, move |p| b(Complex64::new(p[0], p[1])).im, fd),
            },
            poles: Vec::new(),
        }
    }

    pub fn with_pole(mut self, pole: Pole) -> Self {
        self.poles.push(pole);
        self
    }

    pub fn with_poles(mut self, poles: &[Pole]) -> Self {
        self.poles.extend_from_slice(poles);
        self
    }

    pub fn poles(&self) -> &[Pole] {
        &self.poles
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self.repr, Repr::Analytic(_))
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        match &self.repr {
            Repr::Analytic(f) => f(&CJet::constant(z, 0)).value(),
            Repr::Sampled { f, .. } => f(z),
        }
    }

    /// `D_{v_1}…D_{v_j} f(p)` for real directions `v_i`, followed by the
    /// same derivative with `extra` more copies of direction `w`.
    fn directional(&self, p: &[f64], dirs: &[&[f64]], w: Option<(&[f64], usize)>) -> Complex64 {
        match &self.repr {
            Repr::Analytic(f) => {
                let extra = w.map(|(_, e)| e).unwrap_or(0);
                let j = dirs.len() + extra;
                let jet = f(&CJet::variable(Complex64::new(p[0], p[1]), j));
                let mut d = jet.derivative(j);
                for v in dirs {
                    d *= Complex64::new(v[0], v[1]);
                }
                if let Some((w, e)) = w {
                    d *= Complex64::new(w[0], w[1]).powu(e as u32);
                }
                d
            }
            Repr::Sampled { re, im, .. } => {
                let mut all: Vec<&[f64]> = dirs.to_vec();
                if let Some((w, e)) = w {
                    for _ in 0..e {
                        all.push(w);
                    }
                }
                let x = seed_point(p, &all);
                let top = (1usize << all.len()) - 1;
                Complex64::new(re.eval_jet(&x).coeff(top), im.eval_jet(&x).coeff(top))
            }
        }
    }

    /// `|u_x − v_y| + |u_y + v_x|` at `z`.
    pub fn cauchy_riemann_residual(&self, z: Complex64) -> f64 {
        let p = [z.re, z.im];
        let dx = self.directional(&p, &[&[1.0, 0.0]], None);
        let dy = self.directional(&p, &[&[0.0, 1.0]], None);
        (dx.re - dy.im).abs() + (dx.im + dy.re).abs()
    }

    /// `f(w) / (w − z)`, keeping the declared poles.
    pub fn over_linear(&self, z: Complex64) -> HolomorphicSpec {
        let repr = match &self.repr {
            Repr::Analytic(f) => {
                let f = f.clone();
                Repr::Analytic(Arc::new(move |w: &CJet| f(w) / (w - z)))
            }
            Repr::Sampled { f, re, .. } => {
                let f = f.clone();
                let fd = re.finite_difference().unwrap_or_default();
                return HolomorphicSpec::sampled(move |w| f(w) / (w - z), fd).with_poles(&self.poles);
            }
        };
        HolomorphicSpec {
            repr,
            poles: self.poles.clone(),
        }
    }
}

/// A contour value with a truncation estimate of the midpoint–chord rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContourValue {
    pub value_re: f64,
    pub value_im: f64,
    pub error_estimate: f64,
}

impl ContourValue {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.value_re, self.value_im)
    }

    fn new(v: Complex64, err: f64) -> Self {
        ContourValue {
            value_re: v.re,
            value_im: v.im,
            error_estimate: err,
        }
    }
}

fn check_curve(j: &DiffChain) -> Result<()> {
    if j.dim() != 2 || j.grade() != 1 {
        return Err(ComplexError::NotPlanarCurve {
            dim: j.dim(),
            grade: j.grade(),
        });
    }
    Ok(())
}

fn pair_unchecked(f: &HolomorphicSpec, j: &DiffChain) -> (Complex64, f64) {
    let mut acc = ComplexNeumaier::default();
    let mut err = 0.0;
    for t in j.terms() {
        let a = t.alpha().to_vector();
        let dz = Complex64::new(a[0], a[1]);
        let dirs: Vec<&[f64]> = t.markers().iter().map(|m| m.as_slice()).collect();
        acc.add(f.directional(t.point(), &dirs, None) * dz);
        let curv = f.directional(t.point(), &dirs, Some((&a, 2)));
        err += curv.norm() * dz.norm() / 24.0;
    }
    (acc.value(), err)
}

/// `∮_J f dz = ∮_J (u dx − v dy) + i ∮_J (v dx + u dy)`.
pub fn complex_pair(f: &HolomorphicSpec, j: &DiffChain) -> Result<ContourValue> {
    check_curve(j)?;
    for t in j.terms() {
        let p = t.point();
        for pole in &f.poles {
            if (Complex64::new(p[0], p[1]) - pole.z()).norm() < pole.radius {
                return Err(ComplexError::PoleIntersection {
                    x: p[0],
                    y: p[1],
                    px: pole.at[0],
                    py: pole.at[1],
                });
            }
        }
    }
    let (v, e) = pair_unchecked(f, j);
    Ok(ContourValue::new(v, e))
}

/// Default winding clearance relative to chain diameter.
pub const CLEARANCE_FACTOR: f64 = 1e-3;

/// Distance from `z` to the segments `p ± α/2` of a 1-chain (to the points
/// of marked terms).
pub fn support_distance(j: &DiffChain, z: [f64; 2]) -> f64 {
    let mut best = f64::INFINITY;
    for t in j.terms() {
        let p = t.point();
        let d = if t.depth() == 0 {
            let a = t.alpha().to_vector();
            let (ax, ay) = (p[0] - a[0] / 2.0, p[1] - a[1] / 2.0);
            let l2 = a[0] * a[0] + a[1] * a[1];
            let s = if l2 > 0.0 {
                (((z[0] - ax) * a[0] + (z[1] - ay) * a[1]) / l2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            (z[0] - ax - s * a[0]).hypot(z[1] - ay - s * a[1])
        } else {
            (z[0] - p[0]).hypot(z[1] - p[1])
        };
        best = best.min(d);
    }
    best
}

fn check_clearance(j: &DiffChain, z: [f64; 2], clearance: Option<f64>) -> Result<()> {
    let required = clearance.unwrap_or(CLEARANCE_FACTOR * j.diameter());
    let d = support_distance(j, z);
    if d < required || d == 0.0 {
        return Err(ComplexError::Clearance { distance: d, required });
    }
    Ok(())
}

/// `(1/2πi) ∮_J dw / (w − z)`.
pub fn winding(j: &DiffChain, z: [f64; 2], clearance: Option<f64>) -> Result<ContourValue> {
    check_curve(j)?;
    check_clearance(j, z, clearance)?;
    let zc = Complex64::new(z[0], z[1]);
    let g = HolomorphicSpec::analytic(move |w: &CJet| (w - zc).recip());
    let (v, e) = pair_unchecked(&g, j);
    Ok(ContourValue::new(v / Complex64::new(0.0, TAU), e / TAU))
}

/// `(1/2πi) ∮_J f(w) / (w − z) dw`.
pub fn cauchy_formula(f: &HolomorphicSpec, j: &DiffChain, z: [f64; 2], clearance: Option<f64>) -> Result<ContourValue> {
    check_curve(j)?;
    check_clearance(j, z, clearance)?;
    let g = f.over_linear(Complex64::new(z[0], z[1]));
    let c = complex_pair(&g, j)?;
    Ok(ContourValue::new(c.value() / Complex64::new(0.0, TAU), c.error_estimate / TAU))
}

const RESIDUE_START: usize = 64;
const RESIDUE_MAX: usize = 1 << 16;

/// `∮` over the circle of radius `ρ/2` about a pole, by midpoint–chord
/// sums at doubling `N` with Richardson extrapolation.
fn pole_circle_integral(f: &HolomorphicSpec, pole: &Pole) -> Result<(Complex64, f64)> {
    let r = pole.radius / 2.0;
    let at = |n: usize| -> Result<Complex64> {
        let c = curve_chain(circle(pole.at, r), n)?;
        Ok(pair_unchecked(f, &c).0)
    };
    let mut n = RESIDUE_START;
    let mut prev = at(n)?;
    let mut prev_rich: Option<Complex64> = None;
    loop {
        let next = at(2 * n)?;
        let rich = (next * 4.0 - prev) / 3.0;
        if let Some(pr) = prev_rich {
            let diff = (rich - pr).norm();
            if diff <= 1e-13 * (1.0 + rich.norm()) || 2 * n >= RESIDUE_MAX {
                return Ok((rich, diff));
            }
        }
        prev_rich = Some(rich);
        prev = next;
        n *= 2;
    }
}

/// Rounds a winding number to the nearest integer when it lies within its
/// error estimate of one.
fn snap_index(w: ContourValue) -> ContourValue {
    let v = w.value();
    let r = v.re.round();
    if (v - r).norm() <= 10.0 * w.error_estimate + 1e-9 {
        ContourValue::new(Complex64::new(r, 0.0), 0.0)
    } else {
        w
    }
}

/// `Σ_k Ind_J(a_k) ∮_{∂D_k} f dz` over the declared poles.
pub fn residue_sum(f: &HolomorphicSpec, j: &DiffChain) -> Result<ContourValue> {
    check_curve(j)?;
    let poles = f.poles();
    for (i, a) in poles.iter().enumerate() {
        if !(a.radius > 0.0) {
            return Err(ComplexError::InvalidParameter("pole radius must be positive".into()));
        }
        for b in &poles[i + 1..] {
            if (a.z() - b.z()).norm() < a.radius + b.radius {
                return Err(ComplexError::OverlappingPoles {
                    ax: a.at[0],
                    ay: a.at[1],
                    bx: b.at[0],
                    by: b.at[1],
                });
            }
        }
    }
    let mut acc = ComplexNeumaier::default();
    let mut err = 0.0;
    for pole in poles {
        let ind = winding(j, pole.at, None)?;
        let ind = snap_index(ind);
        let (circ, e) = pole_circle_integral(f, pole)?;
        acc.add(ind.value() * circ);
        err += ind.error_estimate * circ.norm() + ind.value().norm() * e;
    }
    Ok(ContourValue::new(acc.value(), err))
}

/// Density estimate with its per-radius trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityEstimate {
    pub value: f64,
    pub std_error: f64,
    pub per_radius: Vec<(f64, f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DensityMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Signed area of `disk(0, r) ∩ triangle(0, a, b)`.
fn origin_triangle_disk(a: [f64; 2], b: [f64; 2], r: f64) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let qa = d[0] * d[0] + d[1] * d[1];
    let mut ts = vec![0.0];
    if qa > 0.0 {
        let qb = 2.0 * (a[0] * d[0] + a[1] * d[1]);
        let qc = a[0] * a[0] + a[1] * a[1] - r * r;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc > 0.0 {
            let s = disc.sqrt();
            for t in [(-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa)] {
                if t > 0.0 && t < 1.0 {
                    ts.push(t);
                }
            }
        }
    }
    ts.push(1.0);
    let at = |t: f64| [a[0] + t * d[0], a[1] + t * d[1]];
    let mut area = 0.0;
    for w in ts.windows(2) {
        let (p, q) = (at(w[0]), at(w[1]));
        let m = at(0.5 * (w[0] + w[1]));
        if m[0] * m[0] + m[1] * m[1] <= r * r {
            area += 0.5 * cross(p, q);
        } else {
            area += 0.5 * r * r * cross(p, q).atan2(p[0] * q[0] + p[1] * q[1]);
        }
    }
    area
}

/// Signed area of a triangle intersected with `disk(z, r)`, oriented like the triangle.
pub fn triangle_disk_area(tri: [[f64; 2]; 3], z: [f64; 2], r: f64) -> f64 {
    let rel = |p: [f64; 2]| [p[0] - z[0], p[1] - z[1]];
    let (a, b, c) = (rel(tri[0]), rel(tri[1]), rel(tri[2]));
    origin_triangle_disk(a, b, r) + origin_triangle_disk(b, c, r) + origin_triangle_disk(c, a, r)
}

fn triangle(c: &Cell) -> [[f64; 2]; 3] {
    [
        [c.vertices[0][0], c.vertices[0][1]],
        [c.vertices[1][0], c.vertices[1][1]],
        [c.vertices[2][0], c.vertices[2][1]],
    ]
}

fn on_segment(z: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = if l2 > 0.0 {
        (((z[0] - a[0]) * d[0] + (z[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let e = (z[0] - a[0] - t * d[0]).hypot(z[1] - a[1] - t * d[1]);
    e <= 1e-12 * (1.0 + l2.sqrt())
}

/// Orientation-weighted indicator `Σ w · sign(T) · [x ∈ T]`.
fn coverage(cells: &[([[f64; 2]; 3], f64)], x: [f64; 2]) -> f64 {
    let mut s = 0.0;
    for (t, w) in cells {
        let d1 = cross([t[1][0] - t[0][0], t[1][1] - t[0][1]], [x[0] - t[0][0], x[1] - t[0][1]]);
        let d2 = cross([t[2][0] - t[1][0], t[2][1] - t[1][1]], [x[0] - t[1][0], x[1] - t[1][1]]);
        let d3 = cross([t[0][0] - t[2][0], t[0][1] - t[2][1]], [x[0] - t[2][0], x[1] - t[2][1]]);
        if d1 > 0.0 && d2 > 0.0 && d3 > 0.0 {
            s += w;
        } else if d1 < 0.0 && d2 < 0.0 && d3 < 0.0 {
            s -= w;
        }
    }
    s
}

/// `(1/πε²) ∮_{K⌊B_ε(z)} dx∧dy` for a planar polyhedral 2-chain over a
/// schedule of radii; the value is the one at the smallest radius.
pub fn signed_density(k: &PolyhedralChain, z: [f64; 2], radii: &[f64], mode: DensityMode) -> Result<DensityEstimate> {
    if k.dim != 2 || k.grade != 2 {
        return Err(ComplexError::InvalidParameter("signed density needs a planar 2-chain".into()));
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(ComplexError::InvalidParameter("radii must be positive".into()));
    }
    let cells: Vec<([[f64; 2]; 3], f64)> = k.cells.iter().map(|c| (triangle(c), c.weight)).collect();
    for (t, _) in &cells {
        for i in 0..3 {
            if on_segment(z, t[i], t[(i + 1) % 3]) {
                return Err(ComplexError::PointOnEdge);
            }
        }
    }
    let min_w = cells.iter().map(|(_, w)| w.abs()).fold(f64::INFINITY, f64::min);
    let mut per_radius = Vec::with_capacity(radii.len());
    for &r in radii {
        let (v, se) = match mode {
            DensityMode::Exact => {
                let a: f64 = cells.iter().map(|(t, w)| w * triangle_disk_area(*t, z, r)).sum();
                (a / (PI * r * r), 0.0)
            }
            DensityMode::MonteCarlo { samples, seed } => {
                if samples < 2 {
                    return Err(ComplexError::InvalidParameter("need at least two samples".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ r.to_bits());
                let (mut sum, mut sq) = (0.0, 0.0);
                for _ in 0..samples {
                    let rho = r * rng.random::<f64>().sqrt();
                    let th = TAU * rng.random::<f64>();
                    let s = coverage(&cells, [z[0] + rho * th.cos(), z[1] + rho * th.sin()]);
                    sum += s;
                    sq += s * s;
                }
                let n = samples as f64;
                let mean = sum / n;
                let var = ((sq - n * mean * mean) / (n - 1.0)).max(0.0);
                (mean, (var / n).sqrt().max(min_w / n))
            }
        };
        per_radius.push((r, v, se));
    }
    let (_, value, std_error) = *per_radius
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("nonempty schedule");
    Ok(DensityEstimate {
        value,
        std_error,
        per_radius,
    })
}

/// Closes each segment `k = (a, b)` of a planar 1-chain through the unit
/// circle about `z`: `k + (b, π b) + (π b, π a) + (π a, a)` with
/// `π x = z + (x − z)/|x − z|`. The result is canonical and closed.
pub fn close_approximation(p: &PolyhedralChain, z: [f64; 2], eps: f64) -> Result<PolyhedralChain> {
    if p.dim != 2 || p.grade != 1 {
        return Err(ComplexError::InvalidParameter("closing needs a planar 1-chain".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(ComplexError::InvalidParameter("eps must lie in (0, 1)".into()));
    }
    let proj = |x: &[f64]| -> Vec<f64> {
        let d = (x[0] - z[0]).hypot(x[1] - z[1]);
        vec![z[0] + (x[0] - z[0]) / d, z[1] + (x[1] - z[1]) / d]
    };
    let mut cells = Vec::with_capacity(p.cells.len() * 4);
    for c in &p.cells {
        let (a, b) = (&c.vertices[0], &c.vertices[1]);
        let seg_d = {
            let d = [b[0] - a[0], b[1] - a[1]];
            let l2 = d[0] * d[0] + d[1] * d[1];
            let t = if l2 > 0.0 {
                (((z[0] - a[0]) * d[0] + (z[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            (z[0] - a[0] - t * d[0]).hypot(z[1] - a[1] - t * d[1])
        };
        if seg_d < eps {
            return Err(ComplexError::Clearance {
                distance: seg_d,
                required: eps,
            });
        }
        let (pa, pb) = (proj(a), proj(b));
        let ua = [pa[0] - z[0], pa[1] - z[1]];
        let ub = [pb[0] - z[0], pb[1] - z[1]];
        let cos_theta = (ua[0] * ub[0] + ua[1] * ub[1]).clamp(-1.0, 1.0);
        let cos_half = ((1.0 + cos_theta) / 2.0).sqrt();
        if cos_half <= eps {
            return Err(ComplexError::SegmentTooLong);
        }
        let w = c.weight;
        cells.push(Cell { weight: w, vertices: vec![a.clone(), b.clone()] });
        cells.push(Cell { weight: w, vertices: vec![b.clone(), pb.clone()] });
        cells.push(Cell { weight: w, vertices: vec![pb, pa.clone()] });
        cells.push(Cell { weight: w, vertices: vec![pa, a.clone()] });
    }
    Ok(PolyhedralChain::new(2, 1, cells)?.canonicalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{polygon_chain, square_vertices};

    fn exp_spec() -> HolomorphicSpec {
        HolomorphicSpec::analytic(|w: &CJet| w.exp())
    }

    #[test]
    fn cjet_matches_known_series() {
        let z = Complex64::new(0.3, -0.2);
        let j = CJet::variable(z, 4);
        let e = j.exp();
        for k in 0..=4 {
            assert!((e.derivative(k) - z.exp()).norm() < 1e-14);
        }
        let r = j.recip();
        assert!((r.derivative(2) - 2.0 / (z * z * z)).norm() < 1e-12);
        let (s, c) = j.sin_cos();
        assert!((s.derivative(1) - z.cos()).norm() < 1e-14);
        assert!((c.derivative(3) - z.sin()).norm() < 1e-14);
        let l = j.ln();
        assert!((l.derivative(1) - z.inv()).norm() < 1e-14);
        assert!((j.powi(3).derivative(2) - z * 6.0).norm() < 1e-13);
    }

    #[test]
    fn segment_and_green() {
        let one = HolomorphicSpec::analytic(|w: &CJet| CJet::constant(Complex64::new(1.0, 0.0), w.order()));
        let seg = DiffChain::pointed(&[0.5, 1.0], crate::multivector::KVector::vector(&[1.0, 2.0]).unwrap()).unwrap();
        let v = complex_pair(&one, &seg).unwrap();
        assert_eq!(v.value(), Complex64::new(1.0, 2.0));
        let conj = HolomorphicSpec::sampled(|w| w.conj(), FiniteDifference::default());
        let sq = polygon_chain(&square_vertices([0.5, 0.5], 1.0), 16).unwrap();
        let v = complex_pair(&conj, &sq).unwrap().value();
        assert!((v - Complex64::new(0.0, 2.0)).norm() < 1e-12, "{v}");
        assert!(conj.cauchy_riemann_residual(Complex64::new(0.2, 0.1)) > 1.0);
        assert!(exp_spec().cauchy_riemann_residual(Complex64::new(0.2, 0.1)) < 1e-12);
    }

    #[test]
    fn winding_examples() {
        let sq = polygon_chain(&square_vertices([0.0, 0.0], 1.0), 64).unwrap();
        let w0 = winding(&sq, [0.0, 0.0], None).unwrap();
        assert!((w0.value() - 1.0).norm() <= w0.error_estimate);
        assert!(winding(&sq, [5.0, 5.0], None).unwrap().value().norm() < 1e-6);
        let twice = sq.scale(2.0);
        let w2 = winding(&twice, [0.1, 0.0], None).unwrap();
        assert!((w2.value() - 2.0).norm() <= w2.error_estimate);
        assert!(matches!(winding(&sq, [0.5, 0.0], None), Err(ComplexError::Clearance { .. })));
    }

    #[test]
    fn cauchy_formula_examples() {
        let c = curve_chain(circle([0.0, 0.0], 1.0), 1 << 12).unwrap();
        let f = exp_spec();
        assert!((cauchy_formula(&f, &c, [0.0, 0.0], None).unwrap().value() - 1.0).norm() < 1e-6);
        assert!(cauchy_formula(&f, &c, [2.0, 0.5], None).unwrap().value().norm() < 1e-6);
        let sq = HolomorphicSpec::analytic(|w: &CJet| w * w);
        let v = cauchy_formula(&sq, &c, [0.3, 0.0], None).unwrap().value();
        assert!((v - 0.09).norm() < 1e-6);
    }

    #[test]
    fn residue_examples() {
        let c = curve_chain(circle([0.0, 0.0], 1.0), 1 << 12).unwrap();
        let inv = HolomorphicSpec::analytic(|w: &CJet| w.recip()).with_pole(Pole::new(0.0, 0.0, 0.5));
        let r = residue_sum(&inv, &c).unwrap().value();
        assert!((r - Complex64::new(0.0, TAU)).norm() < 1e-9);
        let r2 = residue_sum(&inv, &c.scale(2.0)).unwrap().value();
        assert!((r2 - Complex64::new(0.0, 2.0 * TAU)).norm() < 1e-9);
        assert!(matches!(complex_pair(&inv.clone().with_pole(Pole::new(1.0, 0.0, 0.1)), &c), Err(ComplexError::PoleIntersection { .. })));
        let bad = inv.clone().with_pole(Pole::new(0.3, 0.0, 0.3));
        assert!(matches!(residue_sum(&bad, &c), Err(ComplexError::OverlappingPoles { .. })));
    }

    #[test]
    fn triangle_disk_areas() {
        let tri = [[-5.0, -5.0], [5.0, -5.0], [0.0, 5.0]];
        assert!((triangle_disk_area(tri, [0.0, 0.0], 1.0) - PI).abs() < 1e-12);
        let rev = [tri[0], tri[2], tri[1]];
        assert!((triangle_disk_area(rev, [0.0, 0.0], 1.0) + PI).abs() < 1e-12);
        let half = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        assert!((triangle_disk_area(half, [0.0, 0.0], 1.0) - PI / 4.0).abs() < 1e-12);
        assert!(triangle_disk_area(half, [-3.0, -3.0], 1.0).abs() < 1e-15);
    }

    #[test]
    fn density_examples() {
        let sq = PolyhedralChain::polygon(&square_vertices([0.5, 0.5], 1.0)).unwrap();
        let k = crate::domains::cone_at(&[0.5, 0.5], &sq).unwrap();
        let radii = [0.1, 0.05, 0.01];
        for mode in [DensityMode::Exact, DensityMode::MonteCarlo { samples: 4000, seed: 7 }] {
            let inside = signed_density(&k, [0.3, 0.6], &radii, mode).unwrap();
            assert!((inside.value - 1.0).abs() < 2e-2);
            let outside = signed_density(&k, [2.0, 0.6], &radii, mode).unwrap();
            assert!(outside.value.abs() < 2e-2);
        }
        let off = crate::domains::cone_at(&[-1.0, 3.0], &sq).unwrap();
        let d = signed_density(&off, [0.3, 0.6], &radii, DensityMode::Exact).unwrap();
        assert!((d.value - 1.0).abs() < 1e-9);
        assert!(matches!(signed_density(&k, [0.5, 0.0], &radii, DensityMode::Exact), Err(ComplexError::PointOnEdge)));
    }

    #[test]
    fn closing_examples() {
        let seg = PolyhedralChain::new(
            2,
            1,
            vec![Cell { weight: 1.0, vertices: vec![vec![2.0, 0.0], vec![2.0, 1.0]] }],
        )
        .unwrap();
        let closed = close_approximation(&seg, [0.0, 0.0], 0.1).unwrap();
        assert_eq!(closed.cells.len(), 4);
        assert!(closed.is_closed());
        let sq = PolyhedralChain::polygon(&square_vertices([0.0, 0.0], 4.0)).unwrap();
        let long = close_approximation(&sq, [0.0, 0.0], 0.8);
        assert_eq!(long, Err(ComplexError::SegmentTooLong));
        let ok = close_approximation(&sq, [0.0, 0.0], 0.5).unwrap();
        assert!(ok.is_closed());
    }
}
