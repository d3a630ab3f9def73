//! Flows on flat tori: orbit chains `J_T`, measure chains `ξ_{X,μ}`, the
//! invariance residual and the ergodic gap.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{point, ChainError, ChainTerm, DiffChain};
use crate::field::{ScalarField, VectorField};
use crate::form::{evaluate, FormError, FormSpec};
use crate::jet::Jet;
use crate::multivector::{KVector, MultivectorError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("field is not 1-periodic along axis {axis} (defect {defect:e})")]
    NotPeriodic { axis: usize, defect: f64 },
    #[error("observed difference quotient {observed} exceeds the declared Lipschitz constant {declared}")]
    LipschitzViolation { observed: f64, declared: f64 },
    #[error("integration diverged at step {step}")]
    Unstable { step: usize },
    #[error("measure has no mass")]
    EmptyMeasure,
    #[error("measure is not invariant (residual {residual:e})")]
    NotInvariant { residual: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Form(#[from] FormError),
}

impl From<MultivectorError> for DynamicsError {
    fn from(e: MultivectorError) -> Self {
        DynamicsError::Chain(e.into())
    }
}

pub type Result<T> = std::result::Result<T, DynamicsError>;

pub const DEFAULT_STEP: f64 = 1e-3;
/// Residual below which a measure counts as invariant.
pub const INVARIANCE_THRESHOLD: f64 = 1e-6;

const PERIODICITY_TOL: f64 = 1e-12;
const VALIDATION_SAMPLES: usize = 256;

/// A periodic Lipschitz vector field on the flat torus `R^n / Z^n`.
#[derive(Clone, Debug)]
pub struct TorusFlow {
    field: VectorField,
    lipschitz: f64,
    step: f64,
    speed_bound: f64,
}

impl TorusFlow {
    /// Validates periodicity and the declared Lipschitz constant at seeded
    /// sample points.
    pub fn new(field: VectorField, lipschitz: f64) -> Result<Self> {
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(DynamicsError::InvalidParameter("Lipschitz constant must be finite and nonnegative".into()));
        }
        let n = field.dim();
        if n == 0 {
            return Err(DynamicsError::InvalidParameter("zero-dimensional torus".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x7065_7269_6f64);
        let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.random::<f64>()).collect() };
        let mut max_speed: f64 = 0.0;
        for _ in 0..VALIDATION_SAMPLES / 4 {
            let p = sample(&mut rng);
            let x = field.eval(&p);
            max_speed = max_speed.max(norm(&x));
            for axis in 0..n {
                let mut q = p.clone();
                q[axis] += 1.0;
                let defect = dist(&field.eval(&q), &x);
                if defect > PERIODICITY_TOL * (1.0 + norm(&x)) {
                    return Err(DynamicsError::NotPeriodic { axis, defect });
                }
            }
        }
        let scales = [1e-4, 1e-2, 0.3];
        for i in 0..VALIDATION_SAMPLES {
            let a = sample(&mut rng);
            let dir: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let len = norm(&dir).max(1e-12);
            let delta = scales[i % scales.len()];
            let b: Vec<f64> = a.iter().zip(&dir).map(|(x, d)| x + delta * d / len).collect();
            let q = dist(&field.eval(&a), &field.eval(&b)) / dist(&a, &b);
            if q > lipschitz * (1.0 + 1e-6) + 1e-9 {
                return Err(DynamicsError::LipschitzViolation {
                    observed: q,
                    declared: lipschitz,
                });
            }
        }
        let speed_bound = max_speed + lipschitz * (n as f64).sqrt();
        Ok(TorusFlow {
            field,
            lipschitz,
            step: DEFAULT_STEP,
            speed_bound,
        })
    }

    pub fn with_step(mut self, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(DynamicsError::InvalidParameter("step must be positive".into()));
        }
        self.step = h;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Upper bound on `|X|` implied by the samples and the Lipschitz constant.
    pub fn speed_bound(&self) -> f64 {
        self.speed_bound
    }

    /// Classical RK4 in the periodic lift on `[0, T]` with `⌈T/h⌉` equal steps.
    pub fn integrate(&self, p: &[f64], horizon: f64) -> Result<Orbit> {
        let n = self.dim();
        if p.len() != n {
            return Err(DynamicsError::DimensionMismatch { expected: n, got: p.len() });
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(DynamicsError::InvalidParameter("horizon must be positive".into()));
        }
        let steps = (horizon / self.step).ceil().max(1.0) as usize;
        let h = horizon / steps as f64;
        if h * self.lipschitz > 1.0 {
            return Err(DynamicsError::Unstable { step: 0 });
        }
        let limit = h * self.speed_bound * (1.0 + 1e-9) + 1e-300;
        let mut nodes = Vec::with_capacity((steps + 1) * n);
        nodes.extend_from_slice(p);
        let mut x = p.to_vec();
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut y = vec![0.0; n];
        for step in 0..steps {
            self.field.eval_into(&x, &mut k1);
            for i in 0..n {
                y[i] = x[i] + 0.5 * h * k1[i];
            }
            self.field.eval_into(&y, &mut k2);
            for i in 0..n {
                y[i] = x[i] + 0.5 * h * k2[i];
            }
            self.field.eval_into(&y, &mut k3);
            for i in 0..n {
                y[i] = x[i] + h * k3[i];
            }
            self.field.eval_into(&y, &mut k4);
            let mut inc2 = 0.0;
            for i in 0..n {
                let d = h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                inc2 += d * d;
                x[i] += d;
            }
            if !inc2.sqrt().le(&limit) || x.iter().any(|v| !v.is_finite()) {
                return Err(DynamicsError::Unstable { step });
            }
            nodes.extend_from_slice(&x);
        }
        Ok(Orbit { dim: n, step: h, nodes })
    }
}

/// RK4 nodes `φ(k h)` of one orbit in the periodic lift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    dim: usize,
    step: f64,
    nodes: Vec<f64>,
}

impl Orbit {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() / self.dim - 1
    }

    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.step
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.dim..(k + 1) * self.dim]
    }

    fn steps_until(&self, t: f64) -> Result<usize> {
        let k = (t / self.step).round();
        if !(k >= 1.0) || k as usize > self.steps() || (k * self.step - t).abs() > 1e-9 * t.max(1.0) {
            return Err(DynamicsError::InvalidParameter(format!("time {t} is not a step multiple within the orbit")));
        }
        Ok(k as usize)
    }

    /// `J_t = (1/t) Σ_k (midpoint_k; φ(t_{k+1}) − φ(t_k))` over `[0, t]`.
    pub fn chain(&self, t: f64) -> Result<DiffChain> {
        let k = self.steps_until(t)?;
        let s = 1.0 / (k as f64 * self.step);
        let n = self.dim;
        let mut terms = Vec::with_capacity(k);
        let mut mid = vec![0.0; n];
        let mut chord = vec![0.0; n];
        for i in 0..k {
            let (a, b) = (self.node(i), self.node(i + 1));
            for j in 0..n {
                mid[j] = 0.5 * (a[j] + b[j]);
                chord[j] = s * (b[j] - a[j]);
            }
            terms.push(ChainTerm::pointed(point(&mid), KVector::vector(&chord)?));
        }
        Ok(DiffChain::from_terms(n, 1, terms)?)
    }

    /// `(φ(t); 1/t) − (φ(0); 1/t)`, the endpoint form of `∂J_t`.
    pub fn boundary(&self, t: f64) -> Result<DiffChain> {
        let k = self.steps_until(t)?;
        let s = 1.0 / (k as f64 * self.step);
        let n = self.dim;
        let terms = vec![
            ChainTerm::pointed(point(self.node(k)), KVector::scalar(n, s)?),
            ChainTerm::pointed(point(self.node(0)), KVector::scalar(n, -s)?),
        ];
        Ok(DiffChain::from_terms(n, 0, terms)?)
    }
}

/// `J_T` for the orbit of `p`.
pub fn orbit_chain(flow: &TorusFlow, p: &[f64], horizon: f64) -> Result<DiffChain> {
    let orbit = flow.integrate(p, horizon)?;
    orbit.chain(orbit.horizon())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    Dirac { points: Vec<Vec<f64>>, weights: Vec<f64> },
    /// Midpoint grid with `resolution^n` cells of equal weight, total mass 1.
    LebesgueGrid { resolution: usize },
}

impl MeasureSpec {
    pub fn dirac(p: &[f64]) -> Self {
        MeasureSpec::Dirac {
            points: vec![p.to_vec()],
            weights: vec![1.0],
        }
    }

    pub fn lebesgue(resolution: usize) -> Self {
        MeasureSpec::LebesgueGrid { resolution }
    }

    /// Atoms `(p_k, c_k)` on the torus of dimension `n`.
    pub fn atoms(&self, n: usize) -> Result<Vec<(Vec<f64>, f64)>> {
        match self {
            MeasureSpec::Dirac { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return Err(DynamicsError::EmptyMeasure);
                }
                let mut out = Vec::with_capacity(points.len());
                for (p, &w) in points.iter().zip(weights) {
                    if p.len() != n {
                        return Err(DynamicsError::DimensionMismatch { expected: n, got: p.len() });
                    }
                    if !(w > 0.0 && w.is_finite()) {
                        return Err(DynamicsError::InvalidParameter("Dirac weights must be positive".into()));
                    }
                    out.push((p.clone(), w));
                }
                Ok(out)
            }
            &MeasureSpec::LebesgueGrid { resolution: m } => {
                if m == 0 {
                    return Err(DynamicsError::EmptyMeasure);
                }
                let count = (m as f64).powi(n as i32);
                if count > (1u64 << 24) as f64 {
                    return Err(DynamicsError::InvalidParameter(format!("grid of {count} cells is too large")));
                }
                let count = count as usize;
                let w = 1.0 / count as f64;
                let mut out = Vec::with_capacity(count);
                for idx in 0..count {
                    let mut r = idx;
                    let p: Vec<f64> = (0..n)
                        .map(|_| {
                            let i = r % m;
                            r /= m;
                            (i as f64 + 0.5) / m as f64
                        })
                        .collect();
                    out.push((p, w));
                }
                Ok(out)
            }
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            MeasureSpec::Dirac { weights, .. } => weights.iter().sum(),
            MeasureSpec::LebesgueGrid { resolution } => {
                if *resolution == 0 {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }
}

/// `ξ_{X,μ} = Σ_k (p_k; c_k X(p_k))`.
pub fn measure_chain(flow: &TorusFlow, mu: &MeasureSpec) -> Result<DiffChain> {
    let n = flow.dim();
    let atoms = mu.atoms(n)?;
    let mut terms = Vec::with_capacity(atoms.len());
    let mut x = vec![0.0; n];
    for (p, c) in atoms {
        flow.field.eval_into(&p, &mut x);
        for v in &mut x {
            *v *= c;
        }
        terms.push(ChainTerm::pointed(point(&p), KVector::vector(&x)?));
    }
    Ok(DiffChain::from_terms(n, 1, terms)?)
}

/// `cos(2π k·x)` and `sin(2π k·x)` for nonzero lex-positive `k` with `|k|_∞ ≤ degree`.
pub fn trig_bank(dim: usize, degree: usize) -> Vec<(String, ScalarField)> {
    let side = 2 * degree + 1;
    let total = side.pow(dim as u32);
    let mut out = Vec::new();
    for idx in 0..total {
        let mut r = idx;
        let k: Vec<i64> = (0..dim)
            .map(|_| {
                let v = (r % side) as i64 - degree as i64;
                r /= side;
                v
            })
            .collect();
        match k.iter().find(|&&v| v != 0) {
            Some(&v) if v > 0 => {}
            _ => continue,
        }
        let label: Vec<String> = k.iter().map(|v| v.to_string()).collect();
        let label = label.join(",");
        for (name, phase) in [("cos", 0.0), ("sin", -TAU / 4.0)] {
            let kk = k.clone();
            let f = ScalarField::analytic(dim, move |p: &[Jet]| {
                let mut arg = Jet::constant(phase);
                for (x, &ki) in p.iter().zip(&kk) {
                    if ki != 0 {
                        arg = arg + x * (TAU * ki as f64);
                    }
                }
                arg.cos()
            });
            out.push((format!("{name}[{label}]"), f));
        }
    }
    out
}

/// `max_f |∮_{∂ξ_{X,μ}} f| = max_f |∫ X(f) dμ|` over the test functions.
pub fn invariance_residual(flow: &TorusFlow, mu: &MeasureSpec, tests: &[ScalarField]) -> Result<f64> {
    let xi = measure_chain(flow, mu)?;
    let b = xi.boundary()?;
    let mut worst: f64 = 0.0;
    for f in tests {
        if f.dim() != flow.dim() {
            return Err(DynamicsError::DimensionMismatch {
                expected: flow.dim(),
                got: f.dim(),
            });
        }
        worst = worst.max(evaluate(&FormSpec::function(f.clone()), &b)?.abs());
    }
    Ok(worst)
}

/// `max_ω |⟨ω, J_T⟩ − ⟨ω, ξ_{X,μ}⟩ / μ(M)|` for an already integrated orbit.
pub fn ergodic_gap_for(orbit: &Orbit, t: f64, flow: &TorusFlow, mu: &MeasureSpec, forms: &[FormSpec]) -> Result<f64> {
    let bank: Vec<ScalarField> = trig_bank(flow.dim(), 3).into_iter().map(|(_, f)| f).collect();
    let residual = invariance_residual(flow, mu, &bank)?;
    if residual > INVARIANCE_THRESHOLD * mu.total_mass().max(1.0) {
        return Err(DynamicsError::NotInvariant { residual });
    }
    let j = orbit.chain(t)?;
    let xi = measure_chain(flow, mu)?;
    let mass = mu.total_mass();
    let mut gap: f64 = 0.0;
    for w in forms {
        gap = gap.max((evaluate(w, &j)? - evaluate(w, &xi)? / mass).abs());
    }
    Ok(gap)
}

pub fn ergodic_gap(flow: &TorusFlow, p: &[f64], horizon: f64, mu: &MeasureSpec, forms: &[FormSpec]) -> Result<f64> {
    let orbit = flow.integrate(p, horizon)?;
    ergodic_gap_for(&orbit, orbit.horizon(), flow, mu, forms)
}

/// Sup over the bank of `|⟨f, ∂J_t⟩|` using the endpoint form of the boundary.
pub fn boundary_pairing_sup(orbit: &Orbit, t: f64, tests: &[ScalarField]) -> Result<f64> {
    let b = orbit.boundary(t)?;
    let mut worst: f64 = 0.0;
    for f in tests {
        worst = worst.max(evaluate(&FormSpec::function(f.clone()), &b)?.abs());
    }
    Ok(worst)
}

/// `(1 + a sin(2π y), γ)` on the 2-torus.
pub fn skew_rotation(a: f64, gamma: f64) -> Result<TorusFlow> {
    let field = VectorField::new(vec![
        ScalarField::analytic(2, move |p: &[Jet]| (&p[1] * TAU).sin() * a + 1.0),
        ScalarField::constant(2, gamma),
    ]);
    TorusFlow::new(field, TAU * a.abs())
}

/// Constant rotation `(1, γ)`.
pub fn linear_rotation(gamma: f64) -> Result<TorusFlow> {
    TorusFlow::new(VectorField::constant(&[1.0, gamma]), 0.0)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dx(i: usize) -> FormSpec {
        FormSpec::basis(2, &[i]).unwrap()
    }

    #[test]
    fn validation() {
        let bad = VectorField::new(vec![ScalarField::coordinate(2, 0), ScalarField::constant(2, 1.0)]);
        assert!(matches!(TorusFlow::new(bad, 1.0), Err(DynamicsError::NotPeriodic { axis: 0, .. })));
        let f = VectorField::new(vec![
            ScalarField::analytic(2, |p: &[Jet]| (&p[1] * TAU).sin()),
            ScalarField::constant(2, 1.0),
        ]);
        assert!(matches!(TorusFlow::new(f.clone(), 1.0), Err(DynamicsError::LipschitzViolation { .. })));
        assert!(TorusFlow::new(f, TAU).is_ok());
    }

    #[test]
    fn straight_orbit() {
        let g = 2f64.sqrt();
        let flow = linear_rotation(g).unwrap();
        let j = orbit_chain(&flow, &[0.1, 0.2], 100.0).unwrap();
        assert!((evaluate(&dx(0), &j).unwrap() - 1.0).abs() < 1e-8);
        assert!((evaluate(&dx(1), &j).unwrap() - g).abs() < 1e-8);
    }

    #[test]
    fn boundary_decay_bound() {
        let flow = skew_rotation(0.3, 2f64.sqrt()).unwrap();
        let orbit = flow.integrate(&[0.1, 0.2], 50.0).unwrap();
        let bank: Vec<ScalarField> = trig_bank(2, 2).into_iter().map(|(_, f)| f).collect();
        for t in [10.0, 25.0, 50.0] {
            let s = boundary_pairing_sup(&orbit, t, &bank).unwrap();
            assert!(s <= 2.0 / t + 1e-12);
            let full = orbit.chain(t).unwrap().boundary().unwrap();
            for f in &bank {
                let a = evaluate(&FormSpec::function(f.clone()), &full).unwrap();
                let b = evaluate(&FormSpec::function(f.clone()), &orbit.boundary(t).unwrap()).unwrap();
                let third = (TAU * 2.0 * 2f64.sqrt()).powi(3);
                let chord = orbit.step() * flow.speed_bound();
                assert!((a - b).abs() <= third * chord * chord / 24.0);
            }
        }
    }

    #[test]
    fn measure_chain_examples() {
        let flow = skew_rotation(0.3, 2f64.sqrt()).unwrap();
        let xi = measure_chain(&flow, &MeasureSpec::dirac(&[0.25, 0.25])).unwrap();
        assert_eq!(xi.len(), 1);
        assert!((xi.terms()[0].alpha().to_vector()[0] - 1.3).abs() < 1e-15);
        let lin = linear_rotation(0.7).unwrap();
        let xi = measure_chain(&lin, &MeasureSpec::lebesgue(64)).unwrap();
        assert!((evaluate(&dx(0), &xi).unwrap() - 1.0).abs() < 1e-10);
        let xi = measure_chain(&flow, &MeasureSpec::lebesgue(64)).unwrap();
        assert!((evaluate(&dx(0), &xi).unwrap() - 1.0).abs() < 1e-6);
        assert!(matches!(MeasureSpec::lebesgue(0).atoms(2), Err(DynamicsError::EmptyMeasure)));
    }

    #[test]
    fn invariance_examples() {
        let bank: Vec<ScalarField> = trig_bank(2, 3).into_iter().map(|(_, f)| f).collect();
        assert_eq!(bank.len(), 48);
        let flow = skew_rotation(0.3, 2f64.sqrt()).unwrap();
        assert!(invariance_residual(&flow, &MeasureSpec::lebesgue(32), &bank).unwrap() < 1e-10);
        let comp = TorusFlow::new(
            VectorField::new(vec![
                ScalarField::analytic(2, |p: &[Jet]| (&p[0] * TAU).sin() * 0.5 + 1.0),
                ScalarField::constant(2, 0.0),
            ]),
            TAU * 0.5,
        )
        .unwrap();
        assert!(invariance_residual(&comp, &MeasureSpec::lebesgue(32), &bank).unwrap() > 1e-2);
        let fixed = TorusFlow::new(
            VectorField::new(vec![
                ScalarField::analytic(2, |p: &[Jet]| (&p[0] * TAU).sin()),
                ScalarField::analytic(2, |p: &[Jet]| (&p[1] * TAU).sin()),
            ]),
            TAU,
        )
        .unwrap();
        let delta = MeasureSpec::dirac(&[0.5, 0.0]);
        assert!(invariance_residual(&fixed, &delta, &bank).unwrap() < 1e-10);
        let gap = ergodic_gap(&fixed, &[0.5, 0.0], 1.0, &delta, &[dx(0), dx(1)]).unwrap();
        assert!(gap < 1e-8);
        assert!(matches!(
            ergodic_gap(&comp, &[0.1, 0.1], 1.0, &MeasureSpec::lebesgue(16), &[dx(0)]),
            Err(DynamicsError::NotInvariant { .. })
        ));
    }

    #[test]
    fn rational_slope_is_reported() {
        let flow = linear_rotation(0.5).unwrap();
        let cos_dx = FormSpec::one_form(vec![
            ScalarField::analytic(2, |p: &[Jet]| (&p[0] * TAU).cos()),
            ScalarField::constant(2, 0.0),
        ])
        .unwrap();
        let gap = ergodic_gap(&flow, &[0.0, 0.0], 20.0, &MeasureSpec::lebesgue(32), &[cos_dx]).unwrap();
        assert!(gap < 1e-6);
        let resonant = FormSpec::one_form(vec![
            ScalarField::analytic(2, |p: &[Jet]| ((&p[0] - &p[1] * 2.0) * TAU).cos()),
            ScalarField::constant(2, 0.0),
        ])
        .unwrap();
        let gap = ergodic_gap(&flow, &[0.0, 0.0], 20.0, &MeasureSpec::lebesgue(32), &[resonant]).unwrap();
        assert!(gap > 0.9);
    }
}
