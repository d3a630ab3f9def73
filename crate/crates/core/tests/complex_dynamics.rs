mod common;

use chaincalc::complex::{
    cauchy_formula, close_approximation, residue_sum, signed_density, triangle_disk_area, winding, DensityMode,
};
use chaincalc::domains::{circle, cone_at, curve_chain, polygon_chain, PolyhedralChain};
use chaincalc::dynamics::{
    boundary_pairing_sup, ergodic_gap, invariance_residual, linear_rotation, measure_chain, skew_rotation,
    trig_bank, DynamicsError, MeasureSpec, Orbit, TorusFlow,
};
use chaincalc::form::{evaluate, FormSpec};
use chaincalc::{CJet, HolomorphicSpec, Jet, Pole, ScalarField, VectorField};
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn star(m: usize, radii: &[f64], phase: f64) -> Vec<Vec<f64>> {
    (0..m)
        .map(|i| {
            let t = TAU * (i as f64 + phase) / m as f64;
            vec![radii[i] * t.cos(), radii[i] * t.sin()]
        })
        .collect()
}

/// Winding number of a closed polygon by summed turning angles.
fn winding_oracle(vs: &[Vec<f64>], z: [f64; 2]) -> f64 {
    let mut total = 0.0;
    for i in 0..vs.len() {
        let (a, b) = (&vs[i], &vs[(i + 1) % vs.len()]);
        let (ax, ay, bx, by) = (a[0] - z[0], a[1] - z[1], b[0] - z[0], b[1] - z[1]);
        total += (ax * by - ay * bx).atan2(ax * bx + ay * by);
    }
    total / TAU
}

fn reversed_circle(center: [f64; 2], r: f64) -> impl Fn(f64) -> Vec<f64> {
    let g = circle(center, r);
    move |t| g(1.0 - t)
}

/// `I_0(1) = Σ 1/(4^k (k!)²)`.
fn bessel_i0_one() -> f64 {
    let mut term = 1.0;
    let mut s = 1.0;
    for k in 1..30 {
        term /= 4.0 * (k * k) as f64;
        s += term;
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cjet_matches_central_differences(x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let f = |z: &CJet| (z.sin() * z.exp()) * (z.clone() + c(3.0, 0.5)).recip();
        let fv = |z: Complex64| z.sin() * z.exp() / (z + c(3.0, 0.5));
        let z = c(x, y);
        let jet = f(&CJet::variable(z, 3));
        prop_assert!((jet.value() - fv(z)).norm() < 1e-14 * fv(z).norm().max(1.0));
        let h = 1e-4;
        let d1 = (fv(z + h) - fv(z - h)) / (2.0 * h);
        let d2 = (fv(z + h) - 2.0 * fv(z) + fv(z - h)) / (h * h);
        prop_assert!((jet.derivative(1) - d1).norm() < 1e-7);
        prop_assert!((jet.derivative(2) - d2).norm() < 1e-5);
        let dy = (fv(z + c(0.0, h)) - fv(z - c(0.0, h))) / c(0.0, 2.0 * h);
        prop_assert!((jet.derivative(1) - dy).norm() < 1e-7);
    }

    #[test]
    fn winding_matches_turning_angle(m in 3usize..9, radii in prop::collection::vec(0.4f64..1.0, 8),
                                     phase in 0.0f64..1.0, zx in -1.2f64..1.2, zy in -1.2f64..1.2) {
        let vs = star(m, &radii, phase);
        let j = polygon_chain(&vs, 64).unwrap();
        let z = [zx, zy];
        match winding(&j, z, None) {
            Ok(w) => {
                let expected = winding_oracle(&vs, z).round();
                prop_assert!((w.value_re - expected).abs() <= w.error_estimate.max(1e-12),
                    "got {} expected {} est {}", w.value_re, expected, w.error_estimate);
                prop_assert!(w.value_im.abs() <= w.error_estimate.max(1e-12));
            }
            Err(_) => prop_assume!(false),
        }
    }

    #[test]
    fn cone_density_equals_winding(m in 3usize..9, radii in prop::collection::vec(0.4f64..1.0, 8),
                                   phase in 0.0f64..1.0, zx in -1.2f64..1.2, zy in -1.2f64..1.2) {
        let vs = star(m, &radii, phase);
        let p = PolyhedralChain::polygon(&vs).unwrap();
        let k = cone_at(&[0.0, 0.0], &p).unwrap();
        let z = [zx, zy];
        match signed_density(&k, z, &[1e-3, 1e-4], DensityMode::Exact) {
            Ok(d) => prop_assert!((d.value - winding_oracle(&vs, z).round()).abs() < 1e-9, "density {}", d.value),
            Err(_) => prop_assume!(false),
        }
    }

    #[test]
    fn closed_approximation_is_closed(m in 3usize..7, radii in prop::collection::vec(0.4f64..2.0, 8), phase in 0.0f64..1.0) {
        let vs = star(m, &radii, phase);
        let open = PolyhedralChain::new(2, 1, vec![chaincalc::domains::Cell { weight: 1.0, vertices: vec![vs[0].clone(), vs[1].clone()] }]).unwrap();
        match close_approximation(&open, [0.05, -0.03], 0.1) {
            Ok(k) => prop_assert!(k.is_closed()),
            Err(_) => prop_assume!(false),
        }
    }

    #[test]
    fn triangle_disk_area_is_bounded(ax in -1.0f64..1.0, ay in -1.0f64..1.0, bx in -1.0f64..1.0, by in -1.0f64..1.0,
                                     zx in -1.0f64..1.0, zy in -1.0f64..1.0, r in 0.01f64..1.5) {
        let tri = [[0.0, 0.0], [ax, ay], [bx, by]];
        let full = 0.5 * (ax * by - ay * bx);
        let a = triangle_disk_area(tri, [zx, zy], r);
        prop_assert!(a.abs() <= full.abs() + 1e-12);
        prop_assert!(a.abs() <= PI * r * r + 1e-12);
        prop_assert!(a * full >= -1e-15);
        let big = triangle_disk_area(tri, [zx, zy], 10.0);
        prop_assert!((big - full).abs() < 1e-12);
    }

    #[test]
    fn linear_flow_gap_decays_like_inverse_time(x0 in 0.0f64..1.0, y0 in 0.0f64..1.0) {
        let gamma = (5f64.sqrt() - 1.0) / 2.0;
        let flow = linear_rotation(gamma).unwrap().with_step(1e-2).unwrap();
        let forms: Vec<FormSpec> = trig_bank(2, 1)
            .into_iter()
            .map(|(_, f)| FormSpec::one_form(vec![f, ScalarField::constant(2, 0.0)]).unwrap())
            .collect();
        let mu = MeasureSpec::lebesgue(16);
        let small_divisor = [1.0, gamma, 1.0 + gamma, 1.0 - gamma].into_iter().fold(f64::INFINITY, f64::min);
        for t in [10.0, 40.0] {
            let gap = ergodic_gap(&flow, &[x0, y0], t, &mu, &forms).unwrap();
            prop_assert!(gap * t <= 1.0 / (PI * small_divisor) + 1e-3, "t {t}: gap {gap}");
        }
    }

    #[test]
    fn boundary_pairing_is_bounded_by_endpoints(x0 in 0.0f64..1.0, y0 in 0.0f64..1.0, a in -0.2f64..0.2) {
        let flow = skew_rotation(a, 0.3).unwrap().with_step(1e-2).unwrap();
        let orbit = flow.integrate(&[x0, y0], 5.0).unwrap();
        let bank: Vec<ScalarField> = trig_bank(2, 2).into_iter().map(|(_, f)| f).collect();
        for t in [1.0, 2.5, 5.0] {
            prop_assert!(boundary_pairing_sup(&orbit, t, &bank).unwrap() <= 2.0 / t + 1e-12);
        }
        let back: Orbit = serde_json::from_str(&serde_json::to_string(&orbit).unwrap()).unwrap();
        prop_assert_eq!(back, orbit);
    }
}

#[test]
fn winding_vanishes_in_unbounded_component_of_annulus() {
    let outer = curve_chain(circle([0.0, 0.0], 1.0), 256).unwrap();
    let inner = curve_chain(reversed_circle([0.0, 0.0], 0.4), 256).unwrap();
    let j = outer.add(&inner).unwrap();
    for (z, expected) in [([0.0, 0.0], 0.0), ([0.1, -0.2], 0.0), ([0.7, 0.0], 1.0), ([0.0, -0.55], 1.0), ([1.5, 0.3], 0.0), ([-3.0, 2.0], 0.0)] {
        let w = winding(&j, z, None).unwrap();
        assert!((w.value_re - expected).abs() <= w.error_estimate, "{z:?}: {w:?}");
    }
}

#[test]
fn cauchy_formula_reproduces_values() {
    let f = HolomorphicSpec::analytic(|z: &CJet| z.exp() * z.cos());
    let j = curve_chain(circle([0.1, 0.0], 1.0), 512).unwrap();
    for z in [[0.0, 0.0], [0.4, 0.3], [-0.5, -0.4]] {
        let v = cauchy_formula(&f, &j, z, None).unwrap();
        let exact = c(z[0], z[1]).exp() * c(z[0], z[1]).cos();
        assert!((v.value() - exact).norm() <= v.error_estimate.max(1e-12), "{z:?}: {v:?}");
    }
}

#[test]
fn residue_sum_counts_simple_poles() {
    let f = HolomorphicSpec::analytic(|z: &CJet| (z.clone() - c(0.3, 0.1)).recip() + (z.clone() + c(0.4, 0.2)).recip() * 2.0)
        .with_poles(&[Pole::new(0.3, 0.1, 0.2), Pole::new(-0.4, -0.2, 0.2)]);
    let j = curve_chain(circle([0.0, 0.0], 1.0), 512).unwrap();
    let r = residue_sum(&f, &j).unwrap();
    assert!((r.value() - c(0.0, TAU * 3.0)).norm() < 1e-6, "{r:?}");
    let inner = curve_chain(circle([0.3, 0.1], 0.3), 256).unwrap();
    let r = residue_sum(&f, &inner).unwrap();
    assert!((r.value() - c(0.0, TAU)).norm() < 1e-6, "{r:?}");
}

#[test]
fn lebesgue_measure_chain_converges_spectrally() {
    let flow = linear_rotation(0.37).unwrap();
    let w = FormSpec::one_form(vec![
        ScalarField::analytic(2, |p: &[Jet]| (&p[0] * TAU).sin().exp()),
        ScalarField::constant(2, 0.0),
    ])
    .unwrap();
    let exact = bessel_i0_one();
    let errs: Vec<f64> = [2usize, 4, 8, 16]
        .iter()
        .map(|&m| (evaluate(&w, &measure_chain(&flow, &MeasureSpec::lebesgue(m)).unwrap()).unwrap() - exact).abs())
        .collect();
    assert!(errs[3] < 1e-13, "{errs:?}");
    for e in errs.windows(2) {
        assert!(e[1] <= e[0] / 4.0 || e[1] < 1e-13, "{errs:?}");
    }
}

#[test]
fn divergence_free_fields_leave_lebesgue_invariant() {
    let field = VectorField::new(vec![
        ScalarField::analytic(2, |p: &[Jet]| (&p[1] * TAU).sin()),
        ScalarField::analytic(2, |p: &[Jet]| (&p[0] * TAU).cos() * 0.5),
    ]);
    let flow = TorusFlow::new(field, TAU).unwrap();
    let bank: Vec<ScalarField> = trig_bank(2, 3).into_iter().map(|(_, f)| f).collect();
    assert!(invariance_residual(&flow, &MeasureSpec::lebesgue(32), &bank).unwrap() < 1e-12);
    let back: MeasureSpec = serde_json::from_str(&serde_json::to_string(&MeasureSpec::lebesgue(32)).unwrap()).unwrap();
    assert_eq!(back, MeasureSpec::lebesgue(32));
}

#[test]
fn flow_validation_rejects_bad_fields() {
    let aperiodic = VectorField::new(vec![ScalarField::coordinate(2, 0), ScalarField::constant(2, 1.0)]);
    assert!(matches!(TorusFlow::new(aperiodic, 1.0), Err(DynamicsError::NotPeriodic { axis: 0, .. })));
    let steep = VectorField::new(vec![
        ScalarField::analytic(2, |p: &[Jet]| (&p[0] * TAU).sin()),
        ScalarField::constant(2, 0.0),
    ]);
    assert!(matches!(TorusFlow::new(steep, 1.0), Err(DynamicsError::LipschitzViolation { .. })));
}
