//! Seeded invariant checks per module.

use std::f64::consts::TAU;

use chaincalc::chain::{point, ChainTerm};
use chaincalc::complex::{complex_pair, residue_sum, signed_density, winding, DensityMode};
use chaincalc::domains::{
    circle, cone_at, cube_chain, curve_chain, polygon_chain, polyhedral_boundary, square_vertices, PolyhedralChain,
};
use chaincalc::dynamics::{invariance_residual, linear_rotation, measure_chain, trig_bank, MeasureSpec};
use chaincalc::form::{evaluate, FormSpec};
use chaincalc::multivector::{basis, KVector, MultiIndex};
use chaincalc::norm::{best_certificate, bracket, probe_library};
use chaincalc::DiffChain;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::registry;

pub const ALL: [&str; 7] = ["multivector", "chain", "form", "norm", "domains", "complex", "dynamics"];

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn check(module: &'static str, name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        module,
        name,
        passed,
        detail,
    }
}

fn random_chain(rng: &mut ChaCha8Rng, n: usize, k: usize, terms: usize, markers: usize) -> Result<DiffChain> {
    let idx = basis(n, k);
    let mut ts = Vec::with_capacity(terms);
    for _ in 0..terms {
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let alpha = KVector::from_pairs(n, k, idx.iter().map(|&i| (i, rng.random_range(-1.0..1.0))))?;
        let m = (0..rng.random_range(0..=markers))
            .map(|_| point(&(0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>()))
            .collect();
        ts.push(ChainTerm::new(point(&p), alpha, m));
    }
    Ok(DiffChain::from_terms(n, k, ts)?)
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn multivector(_rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let a = KVector::from_pairs(4, 2, basis(4, 2).into_iter().zip([1.0, -2.0, 0.5, 3.0, -1.0, 0.25]))?;
    let twice = chaincalc::multivector::hodge_complement(&chaincalc::multivector::hodge_complement(&a));
    let ok = twice.sub(&a)?.is_zero();
    Ok(vec![check("multivector", "double complement is identity in even codimension", ok, format!("{twice:?}"))])
}

fn chain(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut bb = true;
    let mut perp = true;
    for _ in 0..20 {
        let n = rng.random_range(2..=4);
        let k = rng.random_range(2..=n);
        let a = random_chain(rng, n, k, 4, 2)?;
        bb &= a.boundary()?.boundary()?.is_empty();
        let s = if (k * (n - k)) % 2 == 0 { 1.0 } else { -1.0 };
        perp &= a.perp().perp().sub(&a.scale(s))?.is_empty();
    }
    Ok(vec![
        check("chain", "boundary squares to zero", bb, "20 random chains".into()),
        check("chain", "perp twice is the signed identity", perp, "20 random chains".into()),
    ])
}

fn form(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut worst: f64 = 0.0;
    for name in ["poly", "sin", "cos", "const"] {
        for _ in 0..5 {
            let n = rng.random_range(2..=3);
            let k = rng.random_range(1..=n);
            let a = random_chain(rng, n, k, 3, 2)?;
            let w = registry::form(name, n, k - 1)?;
            worst = worst.max(rel_gap(evaluate(&w, &a.boundary()?)?, evaluate(&w.d()?, &a)?));
        }
    }
    Ok(vec![check("form", "Stokes on random chains", worst <= 1e-10, format!("worst relative gap {worst:.3e}"))])
}

fn norm(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut ordered = true;
    let mut exact = true;
    let mut worst = 0.0f64;
    for r in 0..3 {
        let probes = probe_library(2, 1, r, 3, None)?;
        for _ in 0..10 {
            let a = random_chain(rng, 2, 1, 4, 0)?;
            let b = bracket(&a, r, &probes, None)?;
            ordered &= b.lower <= b.upper;
            worst = worst.max(b.lower / b.upper);
            exact &= best_certificate(&a, r)?.verify(&a)?.exact;
        }
    }
    Ok(vec![
        check("norm", "lower bound below certificate cost", ordered, format!("max ratio {worst:.4}")),
        check("norm", "certificates expand to the target", exact, "30 chains".into()),
    ])
}

fn domains(_rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let vol = FormSpec::constant(2, 2, &[(MultiIndex::full(2), 1.0)])?;
    let cube = evaluate(&vol, &cube_chain(&[0.0, 0.0], 2.0, 5)?)?;
    let square = PolyhedralChain::polygon(&square_vertices([0.5, 0.5], 1.0))?;
    let cone = cone_at(&[0.3, 0.6], &square)?;
    let recovered = polyhedral_boundary(&cone)? == square.canonicalize();
    let w = FormSpec::one_form(vec![
        chaincalc::ScalarField::constant(2, 0.0),
        chaincalc::ScalarField::coordinate(2, 0),
    ])?;
    let errs: Vec<f64> = [32, 64]
        .iter()
        .map(|&n| Ok((evaluate(&w, &curve_chain(circle([0.0, 0.0], 1.0), n)?)? - std::f64::consts::PI).abs()))
        .collect::<Result<_>>()?;
    let ratio = errs[0] / errs[1];
    Ok(vec![
        check("domains", "cube chain volume", (cube - 4.0).abs() < 1e-12, format!("{cube}")),
        check("domains", "cone boundary recovers polygon", recovered, String::new()),
        check("domains", "circle chain converges at second order", (3.8..4.2).contains(&ratio), format!("ratio {ratio:.4}")),
    ])
}

fn complex(_rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let square = polygon_chain(&square_vertices([0.0, 0.0], 2.0), 64)?;
    let w = winding(&square, [0.1, 0.2], None)?;
    let c = complex_pair(&registry::holomorphic("exp")?, &square)?;
    let r = residue_sum(&registry::holomorphic("inv")?, &square)?;
    let star = PolyhedralChain::polygon(&square_vertices([0.0, 0.0], 2.0))?;
    let d = signed_density(&cone_at(&[0.05, 0.0], &star)?, [0.4, -0.3], &[1e-2, 1e-3], DensityMode::Exact)?;
    let rv = (r.value() - Complex64::new(0.0, TAU)).norm();
    Ok(vec![
        check("complex", "winding of a square about an inside point", (w.value_re - 1.0).abs() <= w.error_estimate, format!("{:.12}", w.value_re)),
        check("complex", "contour integral of exp vanishes", c.value().norm() <= c.error_estimate.max(1e-12), format!("{:.3e}", c.value().norm())),
        check("complex", "residue of 1/z", rv < 1e-6, format!("{rv:.3e}")),
        check("complex", "cone density equals winding", (d.value - 1.0).abs() < 1e-9, format!("{}", d.value)),
    ])
}

fn dynamics(_rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let bank: Vec<_> = trig_bank(2, 3).into_iter().map(|(_, f)| f).collect();
    let lin = linear_rotation((5f64.sqrt() - 1.0) / 2.0)?;
    let lin_res = invariance_residual(&lin, &MeasureSpec::lebesgue(32), &bank)?;
    let comp = registry::flow("compressible")?;
    let comp_res = invariance_residual(&comp, &MeasureSpec::lebesgue(32), &bank)?;
    let mass = measure_chain(&lin, &MeasureSpec::lebesgue(16))?.mass();
    let speed = (1.0 + 0.25 * (5f64.sqrt() - 1.0).powi(2)).sqrt();
    Ok(vec![
        check("dynamics", "Lebesgue measure is invariant under rotation", lin_res < 1e-12, format!("{lin_res:.3e}")),
        check("dynamics", "compressible field is detected", comp_res > 1e-3, format!("{comp_res:.3e}")),
        check("dynamics", "measure chain mass equals mean speed", (mass - speed).abs() < 1e-12, format!("{mass}")),
    ])
}

pub fn run(modules: &[&str], seed: u64) -> Result<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    for m in modules {
        let part = match *m {
            "multivector" => multivector(&mut rng)?,
            "chain" => chain(&mut rng)?,
            "form" => form(&mut rng)?,
            "norm" => norm(&mut rng)?,
            "domains" => domains(&mut rng)?,
            "complex" => complex(&mut rng)?,
            "dynamics" => dynamics(&mut rng)?,
            other => {
                return Err(CliError::UnknownName {
                    kind: "module",
                    name: other.to_string(),
                    known: ALL.join(", "),
                })
            }
        };
        checks.extend(part);
    }
    Ok(Report {
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}
