//! Module examples checked against independent oracles.

use std::collections::BTreeMap;

use gapflow::abelian::Curve;
use gapflow::oracle::{
    cos_grid, edge_list, pieces_of, Background, SamplingGrids, Side, SteplikeOperator,
};
use gapflow::potential::BlaschkeEvaluator;
use gapflow::quadrature::{Integrator, Polyline, SingularEnds};
use gapflow::reconstruct::{delta_minus_table, ReconstructionOptions, ReconstructionProblem};
use gapflow::surface::{HyperellipticSurface, SurfacePoint};
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn genus_one() -> Curve {
    Curve::new(
        HyperellipticSurface::new(vec![-2.0, -1.0, 1.0, 2.0]).unwrap(),
        Integrator::default(),
    )
    .unwrap()
}

fn operator(b_plus: f64, sites: &[(i64, f64, f64)]) -> SteplikeOperator {
    let table: BTreeMap<i64, (f64, f64)> = sites.iter().map(|&(n, a, b)| (n, (a, b))).collect();
    SteplikeOperator::new(
        Background::new(0.5, 0.0).unwrap(),
        Background::new(0.5, b_plus).unwrap(),
        table,
    )
    .unwrap()
}

#[test]
fn gap_principal_value_matches_excision_limit() {
    let s = HyperellipticSurface::new(vec![-2.0, -1.0, 1.0, 2.0]).unwrap();
    let q = Integrator::default();
    let weight = |x: f64| 1.0 / s.sqrt_p_upper(c(x, 0.0));
    let pv = q
        .principal_value(|_| c(1.0, 0.0), weight, 0.3, -1.0, 1.0, SingularEnds::BOTH)
        .unwrap();
    // Symmetric excision leaves an odd series in ε; extrapolate out ε and ε³.
    let excised = |eps: f64| {
        let f = |x: f64| weight(x) / (x - 0.3);
        let left = q
            .endpoint_singular(f, -1.0, 0.3 - eps, SingularEnds::LEFT)
            .unwrap();
        let right = q
            .endpoint_singular(f, 0.3 + eps, 1.0, SingularEnds::RIGHT)
            .unwrap();
        (left + right).value
    };
    let (e1, e2, e3) = (excised(8e-3), excised(4e-3), excised(2e-3));
    let (r1, r2) = (2.0 * e2 - e1, 2.0 * e3 - e2);
    let limit = (4.0 * r2 - r1) / 3.0;
    assert!(
        (pv.value - limit).norm() < 1e-7,
        "{} vs {}",
        pv.value,
        limit
    );
}

#[test]
fn genus_zero_path_integral_matches_closed_form() {
    let curve = Curve::new(
        HyperellipticSurface::new(vec![-1.0, 1.0]).unwrap(),
        Integrator::default(),
    )
    .unwrap();
    let k = curve
        .third_kind_kernel(SurfacePoint::real(1.25, gapflow::surface::Sheet::Upper))
        .unwrap();
    let path = Polyline::new(vec![c(-1.0, 0.0), c(-1.0, 1.0), c(2.0, 1.0), c(2.0, 0.0)])
        .unwrap()
        .singular_start();
    let integral = Integrator::default()
        .path(|w| k.density_upper(w), &path)
        .unwrap();
    let wz = 2.0 - 3.0f64.sqrt();
    let expected = (wz - 0.5) / (wz * 0.5 - 1.0);
    assert!((integral.value.exp() - expected).norm() < 1e-8);
}

#[test]
fn delta_band_accumulation_matches_polyline_route() {
    let curve = genus_one();
    for rho in [0.0, 0.4, -0.7, 3.0, -2.5] {
        let k = curve
            .third_kind_kernel(SurfacePoint::real(rho, gapflow::surface::Sheet::Upper))
            .unwrap();
        // Tall detour above the real axis into the gap, ending left of the
        // pole, away from the path template used by the Blaschke evaluator.
        let x = if rho.abs() < 1.0 {
            (rho - 1.0) / 2.0
        } else {
            0.1
        };
        let path = Polyline::new(vec![c(-2.0, 0.0), c(-2.0, 0.7), c(x, 0.7), c(x, 0.0)])
            .unwrap()
            .singular_start();
        let direct = Integrator::default()
            .path(|w| k.density_upper(w), &path)
            .unwrap()
            .value
            .im;
        let accumulated = curve.delta_b_period(rho, 1).unwrap();
        let mut d = direct - accumulated;
        d -= 2.0 * std::f64::consts::PI * (d / (2.0 * std::f64::consts::PI)).round();
        assert!(d.abs() < 1e-6, "rho {rho}: {direct} vs {accumulated}");
    }
}

#[test]
fn gap_phase_is_arg_of_blaschke_mid_gap() {
    let curve = genus_one();
    let ev = BlaschkeEvaluator::new(&curve, 0.0).unwrap();
    let arg = ev
        .blaschke(&SurfacePoint::upper(c(0.5, 0.0)))
        .unwrap()
        .arg();
    let mut d = arg - ev.gap_phase(1).unwrap();
    d -= std::f64::consts::PI * (d / std::f64::consts::PI).round();
    assert!(d.abs() < 1e-6);
    assert_eq!(ev.gap_phase(0).unwrap(), 0.0);
    assert_eq!(ev.gap_phase(2).unwrap(), 0.0);
}

#[test]
fn delta_minus_with_single_eigenvalue() {
    let curve = genus_one();
    let table = delta_minus_table(&curve, &[0.0], &[], &[]).unwrap();
    assert_eq!(table.len(), 1);
    assert!((table[0] - curve.delta_b_period(0.0, 1).unwrap()).abs() < 1e-12);
    assert!(delta_minus_table(&curve, &[], &[], &[])
        .unwrap()
        .iter()
        .all(|&d| d == 0.0));
}

#[test]
fn translation_against_direct_minus_side() {
    let op = operator(1.5, &[(-1, 0.5, 0.2), (0, 0.5, 1.3), (1, 0.5, 1.6)]);
    let d = op.decomposition();
    let cuts = edge_list(&d);
    let lambdas: Vec<f64> = pieces_of(&d.sigma2, &cuts)
        .iter()
        .flat_map(|&(a, b)| cos_grid(a, b, 20, 1e-4))
        .collect();
    for t in op.translate(&lambdas).unwrap() {
        let r_direct = op.reflection(t.lambda, Side::Minus).unwrap();
        let r_plus = op.reflection(t.lambda, Side::Plus).unwrap();
        let r_minus = t.r_minus.unwrap();
        assert!((r_minus - r_direct).norm() < 1e-8);
        assert!((r_minus.norm() - r_plus.norm()).abs() < 1e-8);
    }
}

#[test]
fn single_site_reconstruction_at_five_quarters() {
    let op = operator(0.0, &[(0, 0.5, 0.25)]);
    let data = op.scattering_data(&SamplingGrids::default()).unwrap();
    let p = ReconstructionProblem::new(&data, ReconstructionOptions::default()).unwrap();
    let t = p.reconstruct_t(c(1.25, 0.0)).unwrap().value;
    assert!((t - 1.5).norm() / 1.5 < 1e-4, "{t}");
}

#[test]
fn eigenvalue_below_band_needs_sign_normalization() {
    let op = operator(0.0, &[(0, 0.5, -0.75)]);
    let data = op.scattering_data(&SamplingGrids::default()).unwrap();
    assert!((data.eigenvalues[0] + 1.25).abs() < 1e-10);
    let fixed = ReconstructionProblem::new(&data, ReconstructionOptions::default()).unwrap();
    let raw = ReconstructionProblem::new(
        &data,
        ReconstructionOptions {
            normalize_sign: false,
            ..Default::default()
        },
    )
    .unwrap();
    for z in [c(-3.0, 0.0), c(1.5, 0.0), c(0.2, 0.5)] {
        let direct = op.transmission(z, Side::Plus).unwrap();
        let t = fixed.reconstruct_t(z).unwrap().value;
        assert!((t - direct).norm() / direct.norm() < 1e-5, "{z}: {t} vs {direct}");
        let flipped = raw.reconstruct_t(z).unwrap().value;
        assert!((flipped + direct).norm() / direct.norm() < 1e-5);
    }
}

#[test]
fn steplike_reconstruction_examples_and_invariants() {
    let op = operator(3.0, &[(-1, 0.5, 0.2), (0, 0.5, 2.7)]);
    let data = op.scattering_data(&SamplingGrids::default()).unwrap();
    let p = ReconstructionProblem::new(&data, ReconstructionOptions::default()).unwrap();
    let tall = ReconstructionProblem::new(
        &data,
        ReconstructionOptions {
            height_scale: 2.0,
            ..Default::default()
        },
    )
    .unwrap();
    for z in [c(1.5, 0.0), c(-2.0, 0.0)] {
        let rec = p.reconstruct_t(z).unwrap().value;
        let direct = op.transmission(z, Side::Plus).unwrap();
        assert!((rec - direct).norm() / direct.norm() < 1e-3);
        let other = tall.reconstruct_t(z).unwrap().value;
        assert!((rec - other).norm() / rec.norm() < 1e-7);
    }
    for x in [-1.5, -3.0, -8.0] {
        let t = p.reconstruct_t(c(x, 0.0)).unwrap().value;
        assert!(t.im.abs() < 1e-6 * t.norm());
    }
    for row in data.t_plus_sq.iter().step_by(37) {
        let (lambda, modulus) = (row[0], row[1]);
        if (lambda + 1.0).abs() < 1e-3 || (lambda - 1.0).abs() < 1e-3 {
            continue;
        }
        let t = p.reconstruct_t(c(lambda, 1e-5)).unwrap().value;
        assert!(
            (t.norm_sqr() - modulus).abs() < 0.01 * modulus,
            "{lambda}: {} vs {modulus}",
            t.norm_sqr()
        );
    }
}

#[test]
fn grid_evaluation_edge_cases() {
    let op = operator(0.0, &[]);
    let data = op
        .scattering_data(&SamplingGrids {
            samples_per_band: 40,
            ..Default::default()
        })
        .unwrap();
    let p = ReconstructionProblem::new(&data, ReconstructionOptions::default()).unwrap();
    assert!(p.reconstruct_on_grid(&[]).is_empty());
    let grid: Vec<Complex64> = (0..10)
        .map(|k| c(1.2 + 0.2 * k as f64, 0.1 * k as f64))
        .collect();
    for (_, r) in p.reconstruct_on_grid(&grid) {
        assert!((r.unwrap().value - 1.0).norm() < 1e-8);
    }
    let on_band = p.reconstruct_on_grid(&[c(0.3, 0.0)]);
    assert!(on_band[0].1.is_err());
}
