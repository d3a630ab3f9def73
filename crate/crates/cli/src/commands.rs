use std::path::Path;

use chaincalc::complex::{
    cauchy_formula, complex_pair, residue_sum, signed_density, winding, CJet, DensityMode, HolomorphicSpec, Pole,
};
use chaincalc::domains::{
    circle, cube_chain, curve_chain, koch_boundary, polyhedral_to_pointed, whitney_chain, Ball, Cell,
    PolyhedralChain,
};
use chaincalc::dynamics::{invariance_residual, measure_chain, trig_bank, MeasureSpec, INVARIANCE_THRESHOLD};
use chaincalc::form::evaluate;
use chaincalc::multivector::{KVector, MultiIndex};
use chaincalc::norm::{bracket, probe_library};
use chaincalc::{DiffChain, FormSpec, Region};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{CliError, Result};
use crate::output::{csv_text, emit, envelope, num, read_json, to_pretty, Meta};
use crate::registry::{self, parse_floats, parse_point2};
use crate::selftest;
use crate::{
    CauchyArgs, Cli, Command, CycleArgs, DensityArgs, DomainArgs, DomainKind, MeasureArgs, NormArgs, ResidueArgs,
    StokesArgs, WindingArgs,
};

fn need<'a, T>(v: &'a Option<T>, flag: &'static str) -> Result<&'a T> {
    v.as_ref().ok_or(CliError::MissingArgument(flag))
}

fn read_chain(path: &Path) -> Result<DiffChain> {
    read_json(path, "chain")
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Domain(_) => "domain",
        Command::NormEstimate(_) => "norm-estimate",
        Command::StokesCheck(_) => "stokes-check",
        Command::Cauchy(_) => "cauchy",
        Command::Winding(_) => "winding",
        Command::Residue(_) => "residue",
        Command::Density(_) => "density",
        Command::AsymptoticCycle(_) => "asymptotic-cycle",
        Command::MeasureChain(_) => "measure-chain",
        Command::Selftest(_) => "selftest",
    }
}

fn selftest_modules(c: &Command) -> Result<Vec<&'static str>> {
    Ok(match c {
        Command::Domain(_) => vec!["domains"],
        Command::NormEstimate(_) => vec!["norm"],
        Command::StokesCheck(_) => vec!["multivector", "chain", "form"],
        Command::Cauchy(_) | Command::Winding(_) | Command::Residue(_) | Command::Density(_) => vec!["complex"],
        Command::AsymptoticCycle(_) | Command::MeasureChain(_) => vec!["dynamics"],
        Command::Selftest(a) => match &a.module {
            None => selftest::ALL.to_vec(),
            Some(m) => match selftest::ALL.iter().find(|x| *x == m) {
                Some(x) => vec![*x],
                None => {
                    return Err(CliError::UnknownName {
                        kind: "module",
                        name: m.clone(),
                        known: selftest::ALL.join(", "),
                    })
                }
            },
        },
    })
}

fn parameters(c: &Command) -> serde_json::Value {
    let v = match c {
        Command::Domain(a) => serde_json::to_value(a),
        Command::NormEstimate(a) => serde_json::to_value(a),
        Command::StokesCheck(a) => serde_json::to_value(a),
        Command::Cauchy(a) => serde_json::to_value(a),
        Command::Winding(a) => serde_json::to_value(a),
        Command::Residue(a) => serde_json::to_value(a),
        Command::Density(a) => serde_json::to_value(a),
        Command::AsymptoticCycle(a) => serde_json::to_value(a),
        Command::MeasureChain(a) => serde_json::to_value(a),
        Command::Selftest(a) => serde_json::to_value(a),
    };
    v.unwrap_or(serde_json::Value::Null)
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    let name = command_name(&cli.command);
    let meta = Meta::new(name, cli.seed, &parameters(&cli.command));
    let out = cli.out.as_deref();
    if cli.selftest || matches!(cli.command, Command::Selftest(_)) {
        let report = selftest::run(&selftest_modules(&cli.command)?, cli.seed)?;
        emit(&to_pretty(&envelope(&meta, &report)?)?, out)?;
        if !report.passed {
            let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
            return Err(CliError::CheckFailed(failed.join("; ")));
        }
        return Ok(());
    }
    match &cli.command {
        Command::Domain(a) => domain(a, &meta, out),
        Command::NormEstimate(a) => norm_estimate(a, &meta, out),
        Command::StokesCheck(a) => stokes_check(a, &meta, out),
        Command::Cauchy(a) => cauchy(a, &meta, out),
        Command::Winding(a) => winding_cmd(a, &meta, out),
        Command::Residue(a) => residue(a, &meta, out),
        Command::Density(a) => density(a, &meta, cli.seed, out),
        Command::AsymptoticCycle(a) => asymptotic_cycle(a, &meta, out),
        Command::MeasureChain(a) => measure(a, &meta, out),
        Command::Selftest(_) => unreachable!("handled above"),
    }
}

#[derive(Serialize)]
struct ChainSummary {
    dim: usize,
    grade: usize,
    terms: usize,
    mass: f64,
    diameter: f64,
}

fn summary(c: &DiffChain) -> ChainSummary {
    ChainSummary {
        dim: c.dim(),
        grade: c.grade(),
        terms: c.len(),
        mass: c.mass(),
        diameter: c.diameter(),
    }
}

fn standard_simplex(dim: usize, size: f64) -> Vec<Vec<f64>> {
    let mut v = vec![vec![0.0; dim]];
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = size;
        v.push(e);
    }
    v
}

fn domain(a: &DomainArgs, meta: &Meta, out: Option<&Path>) -> Result<()> {
    let kind = *need(&a.kind, "--kind")?;
    if a.polyhedral && !matches!(kind, DomainKind::Simplex | DomainKind::Koch) {
        return Err(CliError::Invalid("--polyhedral applies to simplex and koch".into()));
    }
    if matches!(kind, DomainKind::Circle | DomainKind::Koch) && a.dim != 2 {
        return Err(CliError::Invalid("circle and koch are planar; use --dim 2".into()));
    }
    let (text, result) = match kind {
        DomainKind::Simplex if a.polyhedral => {
            let p = PolyhedralChain::new(a.dim, a.dim, vec![Cell { weight: 1.0, vertices: standard_simplex(a.dim, a.size) }])?;
            let mass = p.mass()?;
            (to_pretty(&p)?, json!({"kind": kind, "cells": p.cells.len(), "mass": mass}))
        }
        DomainKind::Koch if a.polyhedral => {
            let (p, _) = koch_boundary(a.level)?;
            let mass = p.mass()?;
            (to_pretty(&p)?, json!({"kind": kind, "cells": p.cells.len(), "mass": mass}))
        }
        _ => {
            let c = match kind {
                DomainKind::Cube => cube_chain(&vec![0.0; a.dim], a.size, a.level)?,
                DomainKind::WhitneyDisk => {
                    let ball = Ball {
                        center: vec![0.0; a.dim],
                        radius: a.size,
                    };
                    whitney_chain(&ball, a.level, a.budget)?
                }
                DomainKind::Simplex => {
                    let p = PolyhedralChain::new(a.dim, a.dim, vec![Cell { weight: 1.0, vertices: standard_simplex(a.dim, a.size) }])?;
                    polyhedral_to_pointed(&p, a.level)?
                }
                DomainKind::Circle => {
                    let n = a.segments.unwrap_or(4usize << a.level.min(40));
                    curve_chain(circle([0.0, 0.0], a.size), n)?
                }
                DomainKind::Koch => koch_boundary(a.level)?.1,
            };
            let mut r = serde_json::to_value(summary(&c)).map_err(|e| CliError::parse("summary", e))?;
            r["kind"] = json!(kind);
            (to_pretty(&c)?, r)
        }
    };
    match out {
        Some(path) => {
            emit(&text, Some(path))?;
            let mut r = result;
            r["path"] = json!(path.display().to_string());
            emit(&to_pretty(&envelope(meta, &r)?)?, None)
        }
        None => emit(&text, None),
    }
}

fn parse_region(s: &str) -> Result<Region> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| CliError::parse("region", "expected lo1,..,lon:hi1,..,hin"))?;
    Ok(Region::new(parse_floats("region", lo)?, parse_floats("region", hi)?)?)
}

fn norm_estimate(a: &NormArgs, meta: &Meta, out: Option<&Path>) -> Result<()> {
    let chain = read_chain(need(&a.chain, "--chain")?)?;
    let region = a.region.as_deref().map(parse_region).transpose()?;
    let probes = probe_library(chain.dim(), chain.grade(), a.order, a.levels, region.as_ref())?;
    let b = bracket(&chain, a.order, &probes, region.as_ref())?;
    let mut r = serde_json::to_value(&b).map_err(|e| CliError::parse("bracket", e))?;
    r["probes"] = json!(probes.len());
    r["chain"] = serde_json::to_value(summary(&chain)).map_err(|e| CliError::parse("summary", e))?;
    emit(&to_pretty(&envelope(meta, &r)?)?, out)
}

#[derive(Serialize)]
struct StokesResult {
    form: String,
    boundary_pairing: f64,
    derivative_pairing: f64,
    gap: f64,
    tolerance: f64,
    passed: bool,
}

fn stokes_check(a: &StokesArgs, meta: &Meta, out: Option<&Path>) -> Result<()> {
    let chain = read_chain(need(&a.chain, "--chain")?)?;
    if chain.grade() == 0 {
        return Err(CliError::Invalid("Stokes needs a chain of positive grade".into()));
    }
    let w = registry::form(&a.form, chain.dim(), chain.grade() - 1)?;
    if w.grade() + 1 != chain.grade() {
        return Err(CliError::Invalid(format!(
            "form `{}` has grade {}, chain has grade {}",
            a.form,
            w.grade(),
            chain.grade()
        )));
    }
    let lhs = evaluate(&w, &chain.boundary()?)?;
    let rhs = evaluate(&w.d()?, &chain)?;
    let gap = (lhs - rhs).abs();
    let passed = gap <= a.tol * lhs.abs().max(rhs.abs()).max(1.0);
    let r = StokesResult {
        form: a.form.clone(),
        boundary_pairing: lhs,
        derivative_pairing: rhs,
        gap,
        tolerance: a.tol,
        passed,
    };
    emit(&to_pretty(&envelope(meta, &r)?)?, out)?;
    if !passed {
        return Err(CliError::CheckFailed(format!("Stokes gap {gap:e} exceeds {}", a.tol)));
    }
    Ok(())
}

/// Mass-weighted mean of the term points.
fn centroid(c: &DiffChain) -> Result<[f64; 2]> {
    if c.dim() != 2 || c.is_empty() {
        return Err(CliError::Invalid("centroid needs a nonempty planar chain".into()));
    }
    let (mut x, mut y, mut m) = (0.0, 0.0, 0.0);
    for t in c.terms() {
        let w = t.alpha().euclidean_norm();
        x += w * t.point()[0];
        y += w * t.point()[1];
        m += w;
    }
    if !(m > 0.0) {
        return Err(CliError::Invalid("centroid of a massless chain".into()));
    }
    Ok([x / m, y / m])
}

fn point_arg(s: &str, chain: &DiffChain) -> Result<[f64; 2]> {
    if s == "centroid" {
        centroid(chain)
    } else {
        parse_point2("--z", s)
    }
}

fn cauchy(a: &CauchyArgs, meta: &Meta, out: Option<&Path>) -> Result<()> {
    let f = registry::holomorphic(&a.f)?;
    let chain = read_chain(need(&a.chain, "--chain")?)?;
    let v = match &a.z {
        None => complex_pair(&f, &chain)?,
        Some(z) => cauchy_formula(&f, &chain, point_arg(z, &chain)?, None)?,
    };
    emit(&to_pretty(&envelope(meta, &v)?)?, out)
}

fn winding_cmd(a: &WindingArgs, meta: &Meta, out: Option<&Path>) -> Result<()> {
    let chain = read_chain(need(&a.chain, "--chain")?)?;
    let z = point_arg(&a.z, &chain)?;
    let w = winding(&chain, z, None)?;
    let mut r = serde_json::to_value(w).map_err(|e| CliError::parse("result", e))?;
    r["z"] = json!(z);
    let failed = a.expect.map(|e| (w.value_re - e).abs() > a.tol.max(w.error_estimate));
    if let Some(f) = failed {
        r["passed"] = json!(!f);
    }
    emit(&to_pretty(&envelope(meta, &r)?)?, out)?;
    if failed == Some(true) {
        return Err(CliError::CheckFailed(format!(
            "winding {} differs from {}",
            w.value_re,
            a.expect.unwrap_or_default()
        )));
    }
    Ok(())
}

fn one() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Deserialize)]
struct PoleEntry {
    at: [f64; 2],
    radius: f64,
    #[serde(default = "one")]
    coefficient: [f64; 2],
}

fn residue(a: &ResidueArgs, meta: &Meta, out: Option<&Path>) -> Result<()> {
    let chain = read_chain(need(&a.chain, "--chain")?)?;
    let entries: Vec<PoleEntry> = read_json(need(&a.poles, "--poles")?, "pole list")?;
    let (base, mut poles) = registry::holomorphic_parts(&a.f)?;
    let terms: Vec<(Complex64, Complex64)> = entries
        .iter()
        .map(|e| (Complex64::new(e.at[0], e.at[1]), Complex64::new(e.coefficient[0], e.coefficient[1])))
        .collect();
    poles.extend(entries.iter().map(|e| Pole::new(e.at[0], e.at[1], e.radius)));
    let f = HolomorphicSpec::analytic(move |z: &CJet| {
        let mut s = base(z);
        for (at, c) in &terms {
            s = s + (z - *at).recip() * *c;
        }
        s
    })
    .with_poles(&poles);
    let v = residue_sum(&f, &chain)?;
    emit(&to_pretty(&envelope(meta, &v)?)?, out)
}

fn density(a: &DensityArgs, meta: &Meta, seed: u64, out: Option<&Path>) -> Result<()> {
    let p: PolyhedralChain = read_json(need(&a.chain, "--chain")?, "polyhedral chain")?;
    let k = match p.grade {
        2 => p,
        1 => {
            let apex = match &a.apex {
                Some(s) => parse_floats("--apex", s)?,
                None => {
                    let mut c = vec![0.0; p.dim];
                    let mut n = 0.0f64;
                    for cell in &p.cells {
                        for v in &cell.vertices {
                            c.iter_mut().zip(v).for_each(|(a, b)| *a += b);
                            n += 1.0;
                        }
                    }
                    c.iter().map(|x| x / n.max(1.0)).collect()
                }
            };
            chaincalc::domains::cone_at(&apex, &p)?
        }
        g => return Err(CliError::Invalid(format!("density needs a planar 1- or 2-chain, got grade {g}"))),
    };
    let z = parse_point2("--z", need(&a.z, "--z")?)?;
    let radii = parse_floats("--radii", &a.radii)?;
    let mode = match a.samples {
        Some(samples) => DensityMode::MonteCarlo { samples, seed },
        None => DensityMode::Exact,
    };
    let d = signed_density(&k, z, &radii, mode)?;
    emit(&to_pretty(&envelope(meta, &d)?)?, out)
}

fn cycle_forms(a: &CycleArgs, dim: usize) -> Result<Vec<(String, FormSpec)>> {
    match &a.forms {
        Some(path) => {
            let names: Vec<String> = read_json(path, "form list")?;
            if names.is_empty() {
                return Err(CliError::Invalid("empty form list".into()));
            }
            names
                .into_iter()
                .map(|n| {
                    let f = registry::form(&n, dim, 1)?;
                    if f.grade() != 1 {
                        return Err(CliError::Invalid(format!("form `{n}` is not a 1-form")));
                    }
                    Ok((n, f))
                })
                .collect()
        }
        None => {
            let mut out = Vec::new();
            for (name, f) in trig_bank(dim, a.degree) {
                for axis in 0..dim {
                    out.push((format!("{name} dx{axis}"), FormSpec::new(dim, 1, vec![(MultiIndex::axis(axis), f.clone())])?));
                }
            }
            Ok(out)
        }
    }
}

fn asymptotic_cycle(a: &CycleArgs, meta: &Meta, out: Option<&Path>) -> Result<()> {
    let mut flow = registry::flow(need(&a.field, "--field")?)?;
    if let Some(h) = a.step {
        flow = flow.with_step(h)?;
    }
    let n = flow.dim();
    let p = parse_floats("--p", need(&a.p, "--p")?)?;
    if p.len() != n {
        return Err(CliError::Invalid(format!("--p needs {n} coordinates")));
    }
    if a.checkpoints == 0 {
        return Err(CliError::Invalid("--checkpoints must be positive".into()));
    }
    let forms = cycle_forms(a, n)?;
    let orbit = flow.integrate(&p, a.horizon)?;
    let steps = orbit.steps();
    let h = orbit.step();
    let mut ks: Vec<usize> = (1..=a.checkpoints)
        .map(|i| ((steps as f64 * i as f64 / a.checkpoints as f64).round() as usize).clamp(1, steps))
        .collect();
    ks.dedup();

    // Per-segment pairings, accumulated to each checkpoint.
    let pairings: Vec<Vec<f64>> = forms
        .par_iter()
        .map(|(_, w)| -> Result<Vec<f64>> {
            let mut acc = chaincalc::numeric::Neumaier::default();
            let mut vals = Vec::with_capacity(ks.len());
            let mut next = 0;
            let mut mid = vec![0.0; n];
            let mut chord = vec![0.0; n];
            for i in 0..steps {
                let (x, y) = (orbit.node(i), orbit.node(i + 1));
                for j in 0..n {
                    mid[j] = 0.5 * (x[j] + y[j]);
                    chord[j] = y[j] - x[j];
                }
                acc.add(w.at(&mid, &KVector::vector(&chord)?));
                while next < ks.len() && ks[next] == i + 1 {
                    vals.push(acc.value() / ((i + 1) as f64 * h));
                    next += 1;
                }
            }
            Ok(vals)
        })
        .collect::<Result<_>>()?;

    let mu = MeasureSpec::lebesgue(a.grid);
    let xi = measure_chain(&flow, &mu)?;
    let averages: Vec<f64> = forms.iter().map(|(_, w)| evaluate(w, &xi)).collect::<std::result::Result<_, _>>()?;
    let bank: Vec<_> = trig_bank(n, 3).into_iter().map(|(_, f)| f).collect();
    let residual = invariance_residual(&flow, &mu, &bank)?;

    let mut header = vec!["t".to_string(), "gap".to_string()];
    header.extend(forms.iter().map(|(name, _)| name.clone()));
    let rows: Vec<Vec<String>> = ks
        .iter()
        .enumerate()
        .map(|(c, &k)| {
            let gap = pairings
                .iter()
                .zip(&averages)
                .map(|(v, m)| (v[c] - m).abs())
                .fold(0.0f64, f64::max);
            let mut row = vec![num(k as f64 * h), num(gap)];
            row.extend(pairings.iter().map(|v| num(v[c])));
            row
        })
        .collect();
    let extra = [
        ("space_average", serde_json::to_string(&averages).map_err(|e| CliError::parse("averages", e))?),
        ("invariance_residual", num(residual)),
        ("invariant", (residual <= INVARIANCE_THRESHOLD).to_string()),
    ];
    emit(&csv_text(meta, &extra, &header, &rows)?, out)
}

#[derive(Serialize)]
struct MeasureResult {
    terms: usize,
    mass: f64,
    total_measure: f64,
    invariance_residual: f64,
    invariant: bool,
}

fn measure(a: &MeasureArgs, meta: &Meta, out: Option<&Path>) -> Result<()> {
    let flow = registry::flow(need(&a.field, "--field")?)?;
    let mu = match &a.dirac {
        Some(s) => {
            let points = s
                .split(';')
                .map(|p| parse_floats("--dirac", p))
                .collect::<Result<Vec<_>>>()?;
            let weights = vec![1.0; points.len()];
            MeasureSpec::Dirac { points, weights }
        }
        None => MeasureSpec::lebesgue(a.grid),
    };
    let xi = measure_chain(&flow, &mu)?;
    let bank: Vec<_> = trig_bank(flow.dim(), 3).into_iter().map(|(_, f)| f).collect();
    let residual = invariance_residual(&flow, &mu, &bank)?;
    if let Some(path) = &a.chain_out {
        emit(&to_pretty(&xi)?, Some(path))?;
    }
    let r = MeasureResult {
        terms: xi.len(),
        mass: xi.mass(),
        total_measure: mu.total_mass(),
        invariance_residual: residual,
        invariant: residual <= INVARIANCE_THRESHOLD * mu.total_mass().max(1.0),
    };
    emit(&to_pretty(&envelope(meta, &r)?)?, out)
}
