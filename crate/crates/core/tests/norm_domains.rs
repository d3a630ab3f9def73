mod common;

use chaincalc::domains::{
    circle, cone_at, cube_chain, curve_chain, polyhedral_boundary, polyhedral_to_pointed, signed_area, Cell,
    ChainApproximant, PolyhedralChain,
};
use chaincalc::form::{evaluate, form_norm_estimate, smooth_form_bank, FormSpec, Region};
use chaincalc::multivector::{KVector, MultiIndex};
use chaincalc::norm::{best_certificate, bracket, certify_pairing, probe_library};
use chaincalc::{Jet, ScalarField};
use proptest::prelude::*;

use common::*;

fn x_squared_area() -> FormSpec {
    let f = ScalarField::analytic(2, |p: &[Jet]| &p[0] * &p[0]);
    FormSpec::top(f)
}

/// `∫_T x² dA = A/6 · (x₁² + x₂² + x₃² + x₁x₂ + x₂x₃ + x₁x₃)` with signed `A`.
fn x_squared_oracle(t: &[Vec<f64>]) -> f64 {
    let (a, b, c) = (&t[0], &t[1], &t[2]);
    let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
    let (x1, x2, x3) = (a[0], b[0], c[0]);
    area / 6.0 * (x1 * x1 + x2 * x2 + x3 * x3 + x1 * x2 + x2 * x3 + x1 * x3)
}

fn polygon_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (3usize..9, prop::collection::vec(0.3f64..1.0, 8), 0.0f64..1.0).prop_map(|(m, radii, phase)| {
        (0..m)
            .map(|i| {
                let t = std::f64::consts::TAU * (i as f64 + phase) / m as f64;
                vec![radii[i] * t.cos(), radii[i] * t.sin()]
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bracket_is_ordered_and_certificate_exact(seed in any::<u64>(), r in 0usize..3) {
        let mut g = rng(seed);
        let a = random_chain(&mut g, 2, 1, 4, 0);
        let probes = probe_library(2, 1, r, 3, None).unwrap();
        let b = bracket(&a, r, &probes, None).unwrap();
        prop_assert!(b.lower <= b.upper * (1.0 + 1e-12) + 1e-15);
        let c = best_certificate(&a, r).unwrap();
        let w = c.verify(&a).unwrap();
        prop_assert!(w.exact, "residual {} over {} terms", w.residual_mass, w.residual_terms);
        prop_assert!((c.cost - b.upper).abs() <= 1e-12 * b.upper.max(1.0));
    }

    #[test]
    fn upper_bound_decreases_with_order(seed in any::<u64>()) {
        let mut g = rng(seed);
        let a = random_chain(&mut g, 3, 2, 5, 0);
        let costs: Vec<f64> = (0..4).map(|r| best_certificate(&a, r).unwrap().cost).collect();
        for w in costs.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        prop_assert!(costs[0] <= a.mass() * (1.0 + 1e-12));
    }

    #[test]
    fn pairing_certificate_verifies(seed in any::<u64>(), r in 1usize..4) {
        let mut g = rng(seed);
        let a = random_chain(&mut g, 2, 1, 6, 0);
        let c = certify_pairing(&a, r).unwrap();
        prop_assert!(c.verify(&a).unwrap().exact);
    }

    #[test]
    fn cone_boundary_recovers_polygon(vs in polygon_strategy(), zx in -0.2f64..0.2, zy in -0.2f64..0.2) {
        let p = PolyhedralChain::polygon(&vs).unwrap();
        let cone = cone_at(&[zx, zy], &p).unwrap();
        let b = polyhedral_boundary(&cone).unwrap();
        prop_assert_eq!(&b, &p.canonicalize());
        prop_assert!(polyhedral_boundary(&b).unwrap().is_empty());
    }

    #[test]
    fn pointed_refinement_integrates_constants_exactly(vs in polygon_strategy()) {
        let p = PolyhedralChain::polygon(&vs).unwrap();
        let cone = cone_at(&[0.0, 0.0], &p).unwrap();
        let area = signed_area(&cone);
        let vol = FormSpec::constant(2, 2, &[(MultiIndex::full(2), 1.0)]).unwrap();
        for level in 0..3 {
            let a = polyhedral_to_pointed(&cone, level).unwrap();
            let v = evaluate(&vol, &a).unwrap();
            prop_assert!((v - area).abs() <= 1e-12 * area.abs().max(1.0));
        }
    }

    #[test]
    fn form_norm_estimate_grows_with_budget(idx in 0usize..4, r in 0usize..3) {
        let bank = smooth_form_bank();
        let (_, w) = &bank[idx % bank.len()];
        let region = Region::unit(w.dim());
        let small = form_norm_estimate(w, r, &region, 200).unwrap();
        let large = form_norm_estimate(w, r, &region, 800).unwrap();
        prop_assert!(large >= small);
    }

    #[test]
    fn polyhedral_serde_round_trip(vs in polygon_strategy()) {
        let p = cone_at(&[0.01, -0.02], &PolyhedralChain::polygon(&vs).unwrap()).unwrap();
        let back: PolyhedralChain = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn kvector_serde_round_trip(seed in any::<u64>(), n in 1usize..6) {
        let mut g = rng(seed);
        let k = (seed as usize) % (n + 1);
        let a = random_kvector(&mut g, n, k);
        let back: KVector = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        prop_assert_eq!(back, a);
    }
}

#[test]
fn triangle_refinement_converges_quadratically() {
    let tri = vec![vec![0.1, -0.3], vec![1.2, 0.2], vec![-0.4, 0.9]];
    let exact = x_squared_oracle(&tri);
    let p = PolyhedralChain::new(2, 2, vec![Cell { weight: 1.0, vertices: tri }]).unwrap();
    let w = x_squared_area();
    let errs: Vec<f64> = (1..6)
        .map(|l| (evaluate(&w, &polyhedral_to_pointed(&p, l).unwrap()).unwrap() - exact).abs())
        .collect();
    for e in errs.windows(2) {
        let ratio = e[0] / e[1];
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio} from {errs:?}");
    }
}

#[test]
fn circle_chain_converges_quadratically() {
    let w = FormSpec::one_form(vec![ScalarField::constant(2, 0.0), ScalarField::coordinate(2, 0)]).unwrap();
    let exact = std::f64::consts::PI * 0.49;
    let errs: Vec<f64> = [16, 32, 64, 128]
        .iter()
        .map(|&n| (evaluate(&w, &curve_chain(circle([0.2, -0.1], 0.7), n).unwrap()).unwrap() - exact).abs())
        .collect();
    for e in errs.windows(2) {
        let ratio = e[0] / e[1];
        assert!((3.8..4.2).contains(&ratio), "ratio {ratio} from {errs:?}");
    }
}

#[test]
fn cube_levels_respect_error_bounds() {
    let approx = ChainApproximant::cube(vec![0.3, -0.2], 1.5);
    for level in 1..6 {
        let diff = approx.chain(level).unwrap().sub(&approx.chain(level - 1).unwrap()).unwrap();
        let cost = best_certificate(&diff, 1).unwrap().cost;
        assert!(cost <= approx.error_bound(level) * (1.0 + 1e-9), "level {level}: {cost}");
        assert!(approx.tail_bound(level) <= approx.error_bound(level) * (1.0 + 1e-12));
    }
    let total = cube_chain(&[0.3, -0.2], 1.5, 4).unwrap();
    let vol = FormSpec::constant(2, 2, &[(MultiIndex::full(2), 1.0)]).unwrap();
    assert!((evaluate(&vol, &total).unwrap() - 2.25).abs() < 1e-12);
}
