#![allow(dead_code)]

use chaincalc::chain::{point, ChainTerm, DiffChain};
use chaincalc::field::{ScalarField, SmoothMap, VectorField};
use chaincalc::form::FormSpec;
use chaincalc::jet::Jet;
use chaincalc::multivector::{basis, KVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| uniform(rng, -scale, scale)).collect()
}

pub fn random_kvector(rng: &mut ChaCha8Rng, n: usize, k: usize) -> KVector {
    let pairs: Vec<_> = basis(n, k).into_iter().map(|i| (i, uniform(rng, -1.0, 1.0))).collect();
    KVector::from_pairs(n, k, pairs).unwrap()
}

/// Terms at points in `[-1,1]^n` with up to `max_markers` markers each.
pub fn random_chain(rng: &mut ChaCha8Rng, n: usize, k: usize, terms: usize, max_markers: usize) -> DiffChain {
    let ts = (0..terms)
        .map(|_| {
            let p = random_vec(rng, n, 1.0);
            let depth = if max_markers == 0 { 0 } else { rng.random_range(0..=max_markers) };
            let markers = (0..depth).map(|_| point(&random_vec(rng, n, 1.0))).collect();
            ChainTerm::new(point(&p), random_kvector(rng, n, k), markers)
        })
        .collect();
    DiffChain::from_terms(n, k, ts).unwrap()
}

/// `c_0 + c_1 sin(a·x + b) + c_2 x_i x_j` with seeded coefficients.
pub fn random_scalar(rng: &mut ChaCha8Rng, n: usize) -> ScalarField {
    let c: Vec<f64> = (0..3).map(|_| uniform(rng, -1.0, 1.0)).collect();
    let a = random_vec(rng, n, 1.5);
    let b = uniform(rng, -1.0, 1.0);
    let i = rng.random_range(0..n);
    let j = rng.random_range(0..n);
    ScalarField::analytic(n, move |p: &[Jet]| {
        let mut arg = Jet::constant(b);
        for (x, ai) in p.iter().zip(&a) {
            arg = arg + x * *ai;
        }
        arg.sin() * c[1] + &p[i] * &p[j] * c[2] + c[0]
    })
}

pub fn random_form(rng: &mut ChaCha8Rng, n: usize, k: usize) -> FormSpec {
    let coeffs = basis(n, k).into_iter().map(|i| (i, random_scalar(rng, n))).collect();
    FormSpec::new(n, k, coeffs).unwrap()
}

pub fn random_vector_field(rng: &mut ChaCha8Rng, n: usize) -> VectorField {
    VectorField::new((0..n).map(|_| random_scalar(rng, n)).collect())
}

/// A smooth map `R^n → R^m` mixing an affine part with a small nonlinearity.
pub fn random_map(rng: &mut ChaCha8Rng, n: usize, m: usize) -> SmoothMap {
    let comps = (0..m)
        .map(|r| {
            let lin = random_vec(rng, n, 1.0);
            let g = random_scalar(rng, n);
            let shift = r as f64 * 0.1;
            ScalarField::analytic(n, move |p: &[Jet]| {
                let mut s = g.eval_jet(p) * 0.3 + shift;
                for (x, a) in p.iter().zip(&lin) {
                    s = s + x * *a;
                }
                s
            })
        })
        .collect();
    SmoothMap::new(n, comps)
}
