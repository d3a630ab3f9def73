//! Named built-in forms, scalar fields, flows and holomorphic functions.

use std::f64::consts::TAU;
use std::sync::Arc;

use chaincalc::complex::{CJet, HolomorphicSpec, Pole};
use chaincalc::dynamics::{linear_rotation, skew_rotation, TorusFlow};
use chaincalc::multivector::{basis, MultiIndex};
use chaincalc::{FormSpec, Jet, ScalarField, VectorField};
use num_complex::Complex64;

use crate::error::{CliError, Result};

pub const FORMS: &str = "dx:<axes>, const, poly, sin, cos, d:<field>, trig:<cos|sin>:<k1,..,kn>:<axis>";
pub const FIELDS: &str = "radial, gauss, wave, coord:<i>";
pub const FLOWS: &str = "linear:<gamma>, golden, skew:<a>,<gamma>, free, compressible";
pub const HOLOMORPHIC: &str = "zero, exp, sin, cos, poly, inv, rational";

fn unknown(kind: &'static str, name: &str, known: &str) -> CliError {
    CliError::UnknownName {
        kind,
        name: name.to_string(),
        known: known.to_string(),
    }
}

pub fn parse_floats(what: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| CliError::parse(what, format!("`{t}`: {e}"))))
        .collect()
}

fn parse_usizes(what: &str, s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<usize>().map_err(|e| CliError::parse(what, format!("`{t}`: {e}"))))
        .collect()
}

fn parse_ints(what: &str, s: &str) -> Result<Vec<i64>> {
    s.split(',')
        .map(|t| t.trim().parse::<i64>().map_err(|e| CliError::parse(what, format!("`{t}`: {e}"))))
        .collect()
}

/// `x,y` as a planar point.
pub fn parse_point2(what: &str, s: &str) -> Result<[f64; 2]> {
    match parse_floats(what, s)?.as_slice() {
        [x, y] => Ok([*x, *y]),
        other => Err(CliError::parse(what, format!("expected two coordinates, got {}", other.len()))),
    }
}

pub fn scalar_field(name: &str, dim: usize) -> Result<ScalarField> {
    if dim == 0 {
        return Err(CliError::Invalid("fields need a positive dimension".into()));
    }
    let f = match name {
        "radial" => ScalarField::analytic(dim, |p: &[Jet]| {
            let mut s = Jet::constant(0.0);
            for x in p {
                s = s + x * x;
            }
            s
        }),
        "gauss" => ScalarField::analytic(dim, |p: &[Jet]| {
            let mut s = Jet::constant(0.0);
            for x in p {
                s = s - x * x;
            }
            s.exp()
        }),
        "wave" => ScalarField::analytic(dim, |p: &[Jet]| {
            let mut s = (&p[0] * TAU).sin();
            for x in &p[1..] {
                s = s * (x * TAU).cos();
            }
            s
        }),
        _ => match name.strip_prefix("coord:") {
            Some(i) => {
                let i: usize = i.parse().map_err(|e| CliError::parse("coordinate index", e))?;
                if i >= dim {
                    return Err(CliError::Invalid(format!("coordinate {i} in dimension {dim}")));
                }
                ScalarField::coordinate(dim, i)
            }
            None => return Err(unknown("field", name, FIELDS)),
        },
    };
    Ok(f)
}

fn coefficient(kind: &str, dim: usize, index: usize) -> ScalarField {
    let shift = index as f64;
    match kind {
        "poly" => ScalarField::analytic(dim, move |p: &[Jet]| {
            let mut s = &p[0] * shift + 1.0;
            for x in p {
                s = s + x * x;
            }
            s
        }),
        "sin" | "cos" => {
            let sine = kind == "sin";
            ScalarField::analytic(dim, move |p: &[Jet]| {
                let mut arg = Jet::constant(shift);
                for (j, x) in p.iter().enumerate() {
                    arg = arg + x * (j + 1) as f64;
                }
                if sine {
                    arg.sin()
                } else {
                    arg.cos()
                }
            })
        }
        _ => ScalarField::constant(dim, 1.0),
    }
}

/// A form of the given dimension; `grade` applies to the families whose
/// grade is not fixed by the name.
pub fn form(name: &str, dim: usize, grade: usize) -> Result<FormSpec> {
    if grade > dim {
        return Err(CliError::Invalid(format!("grade {grade} in dimension {dim}")));
    }
    let family = |kind: &str| -> Result<FormSpec> {
        let coeffs = basis(dim, grade)
            .into_iter()
            .enumerate()
            .map(|(i, idx)| (idx, coefficient(kind, dim, i)))
            .collect();
        Ok(FormSpec::new(dim, grade, coeffs)?)
    };
    match name {
        "const" | "poly" | "sin" | "cos" => return family(name),
        _ => {}
    }
    if let Some(axes) = name.strip_prefix("dx:") {
        let axes = parse_usizes("form axes", axes)?;
        if axes.iter().any(|&a| a >= dim) {
            return Err(CliError::Invalid(format!("axes {axes:?} in dimension {dim}")));
        }
        return Ok(FormSpec::basis(dim, &axes)?);
    }
    if let Some(field) = name.strip_prefix("d:") {
        return Ok(FormSpec::exact(scalar_field(field, dim)?));
    }
    if let Some(rest) = name.strip_prefix("trig:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [kind, ks, axis] = parts.as_slice() else {
            return Err(CliError::parse("trig form", "expected trig:<cos|sin>:<k>:<axis>"));
        };
        let k: Vec<f64> = parse_ints("frequency", ks)?.into_iter().map(|x| x as f64).collect();
        let axis: usize = axis.parse().map_err(|e| CliError::parse("form axis", e))?;
        if k.len() != dim || axis >= dim {
            return Err(CliError::Invalid(format!("trig form `{name}` in dimension {dim}")));
        }
        let sine = match *kind {
            "sin" => true,
            "cos" => false,
            _ => return Err(unknown("trig kind", kind, "cos, sin")),
        };
        let f = ScalarField::analytic(dim, move |p: &[Jet]| {
            let mut arg = Jet::constant(0.0);
            for (x, kj) in p.iter().zip(&k) {
                arg = arg + x * (TAU * kj);
            }
            if sine {
                arg.sin()
            } else {
                arg.cos()
            }
        });
        return Ok(FormSpec::new(dim, 1, vec![(MultiIndex::axis(axis), f)])?);
    }
    Err(unknown("form", name, FORMS))
}

pub fn flow(name: &str) -> Result<TorusFlow> {
    let flow = match name {
        "golden" => linear_rotation((5f64.sqrt() - 1.0) / 2.0)?,
        "free" => TorusFlow::new(
            VectorField::new(vec![
                ScalarField::analytic(2, |p: &[Jet]| (&p[1] * TAU).sin()),
                ScalarField::analytic(2, |p: &[Jet]| (&p[0] * TAU).cos() * 0.5),
            ]),
            TAU,
        )?,
        "compressible" => TorusFlow::new(
            VectorField::new(vec![
                ScalarField::analytic(2, |p: &[Jet]| (&p[0] * TAU).sin() * 0.5 + 1.0),
                ScalarField::constant(2, 0.3),
            ]),
            0.5 * TAU,
        )?,
        _ => {
            if let Some(g) = name.strip_prefix("linear:") {
                let g: f64 = g.parse().map_err(|e| CliError::parse("rotation slope", e))?;
                linear_rotation(g)?
            } else if let Some(args) = name.strip_prefix("skew:") {
                match parse_floats("skew parameters", args)?.as_slice() {
                    [a, g] => skew_rotation(*a, *g)?,
                    _ => return Err(CliError::parse("skew parameters", "expected skew:<a>,<gamma>")),
                }
            } else {
                return Err(unknown("field", name, FLOWS));
            }
        }
    };
    Ok(flow)
}

/// Taylor-series form of a holomorphic function.
pub type JetFn = Arc<dyn Fn(&CJet) -> CJet + Send + Sync>;

/// The named function with the poles it declares.
pub fn holomorphic_parts(name: &str) -> Result<(JetFn, Vec<Pole>)> {
    let parts: (JetFn, Vec<Pole>) = match name {
        "zero" => (Arc::new(|z: &CJet| CJet::constant(Complex64::new(0.0, 0.0), z.order())), vec![]),
        "exp" => (Arc::new(|z: &CJet| z.exp()), vec![]),
        "sin" => (Arc::new(|z: &CJet| z.sin()), vec![]),
        "cos" => (Arc::new(|z: &CJet| z.cos()), vec![]),
        "poly" => (Arc::new(|z: &CJet| z.powi(3) - z * 2.0 + 1.0), vec![]),
        "inv" => (Arc::new(|z: &CJet| z.recip()), vec![Pole::new(0.0, 0.0, 0.25)]),
        "rational" => (
            Arc::new(|z: &CJet| (z - 0.3).recip() + z.exp()),
            vec![Pole::new(0.3, 0.0, 0.25)],
        ),
        _ => return Err(unknown("holomorphic function", name, HOLOMORPHIC)),
    };
    Ok(parts)
}

pub fn holomorphic(name: &str) -> Result<HolomorphicSpec> {
    let (f, poles) = holomorphic_parts(name)?;
    Ok(HolomorphicSpec::analytic(move |z: &CJet| f(z)).with_poles(&poles))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_name_resolves() {
        for f in ["dx:0", "dx:0,1", "const", "poly", "sin", "cos", "d:radial", "d:coord:1", "trig:cos:1,-2:0"] {
            form(f, 2, 1).unwrap();
        }
        for f in ["radial", "gauss", "wave", "coord:0"] {
            scalar_field(f, 3).unwrap();
        }
        for f in ["linear:0.5", "golden", "skew:0.1,0.3", "free", "compressible"] {
            flow(f).unwrap();
        }
        for f in ["zero", "exp", "sin", "cos", "poly", "inv", "rational"] {
            holomorphic(f).unwrap();
        }
    }

    #[test]
    fn unknown_names_are_reported() {
        assert_eq!(form("nope", 2, 1).unwrap_err().code(), "E_UNKNOWN_NAME");
        assert_eq!(flow("nope").unwrap_err().code(), "E_UNKNOWN_NAME");
        assert_eq!(form("dx:4", 2, 1).unwrap_err().code(), "E_INVALID_INPUT");
    }
}
