use std::collections::BTreeMap;

use gapflow::abelian::Curve;
use gapflow::data::ScatteringData;
use gapflow::oracle::{Background, SamplingGrids, Side, SteplikeOperator};
use gapflow::potential::BlaschkeEvaluator;
use gapflow::quadrature::{Integrator, SingularEnds};
use gapflow::surface::{decompose_spectra, BandSet, HyperellipticSurface, Sheet, SurfacePoint};
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Sorted edges with spacing at least 0.1.
fn edges(max_genus: usize) -> impl Strategy<Value = Vec<f64>> {
    (0..=max_genus)
        .prop_flat_map(|g| (-3.0..3.0f64, prop::collection::vec(0.1..1.5f64, 2 * g + 1)))
        .prop_map(|(start, steps)| {
            let mut v = vec![start];
            for s in steps {
                v.push(v.last().unwrap() + s);
            }
            v
        })
}

fn band_set() -> impl Strategy<Value = BandSet> {
    edges(2).prop_map(|e| BandSet::from_edges(&e).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sheet_product_is_minus_p(e in edges(3), re in -6.0..6.0f64, im in 0.01..3.0f64, lower in any::<bool>()) {
        let s = HyperellipticSurface::new(e).unwrap();
        let z = c(re, if lower { -im } else { im });
        let up = s.sqrt_p(&SurfacePoint::new(z, Sheet::Upper));
        let down = s.sqrt_p(&SurfacePoint::new(z, Sheet::Lower));
        let p = s.poly(z);
        prop_assert!((up * down + p).norm() <= 1e-12 * p.norm());
        prop_assert!((up * up - p).norm() <= 1e-12 * p.norm());
    }

    #[test]
    fn real_off_bands_imaginary_on_bands(e in edges(3), t in 0.01..0.99f64, k in 0usize..8) {
        let s = HyperellipticSurface::new(e).unwrap();
        let edges = s.edges().to_vec();
        let k = k % (edges.len() - 1);
        let x = edges[k] + t * (edges[k + 1] - edges[k]);
        let v = s.sqrt_p_upper(c(x, 0.0));
        if k.is_multiple_of(2) {
            prop_assert!(v.re.abs() < 1e-12 * v.norm());
        } else {
            prop_assert!(v.im.abs() < 1e-12 * v.norm());
        }
        let outside = s.sqrt_p_upper(c(edges[0] - 1.0 - t, 0.0));
        prop_assert!(outside.im.abs() < 1e-12 * outside.norm());
    }

    #[test]
    fn leading_asymptotics(e in edges(3)) {
        let s = HyperellipticSurface::new(e).unwrap();
        let scale = s.edges().iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let x = 1e6 * scale;
        let ratio = s.sqrt_p_upper(c(x, 0.0)) / -(x.powi(s.genus() as i32 + 1));
        prop_assert!((ratio - 1.0).norm() < 1e-4);
    }

    #[test]
    fn decomposition_partitions_the_union(minus in band_set(), plus in band_set()) {
        let d = match decompose_spectra(&minus, &plus) {
            Ok(d) => d,
            Err(_) => return Ok(()),
        };
        let total = d.sigma2.measure() + d.sigma_minus1.measure() + d.sigma_plus1.measure();
        prop_assert!((total - d.sigma.measure()).abs() < 1e-9);
        for x in (0..200).map(|k| -4.0 + 0.05 * k as f64 + 0.0123) {
            let inside = minus.contains(x) || plus.contains(x);
            prop_assert_eq!(d.sigma.contains(x), inside);
            let hits = [&d.sigma2, &d.sigma_minus1, &d.sigma_plus1].iter().filter(|s| s.contains(x)).count();
            if minus.distance(x) > 1e-9 || plus.distance(x) > 1e-9 {
                prop_assert_eq!(hits, usize::from(inside));
            }
        }
    }

    #[test]
    fn quadrature_is_additive(a in -2.0..0.0f64, m in 0.1..0.9f64, len in 0.5..3.0f64, k in 0.5..4.0f64) {
        let q = Integrator::default();
        let b = a + len;
        let mid = a + m * len;
        let f = |x: f64| c((k * x).sin(), (x * x).exp() / (b - x + 1.0).sqrt());
        let whole = q.smooth(f, a, b).unwrap();
        let split = q.smooth(f, a, mid).unwrap() + q.smooth(f, mid, b).unwrap();
        prop_assert!((whole.value - split.value).norm() < 1e-9);
        let g = |x: f64| c(1.0 / ((x - a) * (b - x)).sqrt(), 0.0);
        let whole = q.endpoint_singular(g, a, b, SingularEnds::BOTH).unwrap();
        let split = q.endpoint_singular(g, a, mid, SingularEnds::LEFT).unwrap()
            + q.endpoint_singular(g, mid, b, SingularEnds::RIGHT).unwrap();
        prop_assert!((whole.value - split.value).norm() < 1e-9);
    }

    #[test]
    fn principal_value_linear_and_antisymmetric(pole in 0.05..0.9f64, alpha in -2.0..2.0f64, k in 0.0..3.0f64) {
        let q = Integrator::default();
        let even = |x: f64| c(1.0 + k * x * x, 0.0);
        let one = |_x: f64| c(1.0, 0.0);
        let ends = SingularEnds::NONE;
        let right = q.principal_value(even, one, pole, -1.0, 1.0, ends).unwrap().value;
        let left = q.principal_value(even, one, -pole, -1.0, 1.0, ends).unwrap().value;
        prop_assert!((right + left).norm() < 1e-10);
        let g = |x: f64| c(x.cos(), 0.0);
        let sum = q.principal_value(|x| even(x) * alpha + g(x), one, pole, -1.0, 1.0, ends).unwrap().value;
        let parts = q.principal_value(even, one, pole, -1.0, 1.0, ends).unwrap().value * alpha
            + q.principal_value(g, one, pole, -1.0, 1.0, ends).unwrap().value;
        prop_assert!((sum - parts).norm() < 1e-10);
    }

    #[test]
    fn density_flips_with_the_sheet(re in -3.0..3.0f64, im in 0.05..1.0f64, x in -4.0..4.0f64, y in 0.01..1.0f64) {
        let curve = Curve::new(HyperellipticSurface::new(vec![-2.0, -1.0, 1.0, 2.0]).unwrap(), Integrator::default()).unwrap();
        let k = curve.third_kind_kernel(SurfacePoint::upper(c(re, im))).unwrap();
        let q = c(x, -y);
        let up = k.density(&SurfacePoint::new(q, Sheet::Upper)).unwrap();
        let down = k.density(&SurfacePoint::new(q, Sheet::Lower)).unwrap();
        prop_assert!((up + down).norm() <= 1e-12 * up.norm().max(1.0));
    }

    #[test]
    fn scattering_json_round_trips(seed in prop::collection::vec(-1e3..1e3f64, 6), tiny in -1e-300..1e-300f64) {
        let data = ScatteringData {
            sigma_minus_edges: vec![-1.0, 1.0],
            sigma_plus_edges: vec![seed[0].min(0.0), seed[0].min(0.0) + 2.5],
            r_plus: vec![[0.1, seed[1], seed[2]], [0.2, tiny, 1.0 / 3.0]],
            t_plus_sq: vec![[-0.5, seed[3].abs()], [0.5, seed[4].abs() * 1e-17]],
            eigenvalues: vec![seed[5]],
            norming_plus: vec![0.25],
            m_minus: vec![],
            m_plus: vec![],
            mu_minus: None,
            mu_plus: None,
        };
        let text = data.to_json().unwrap();
        let back = ScatteringData::from_json(&text).unwrap();
        prop_assert_eq!(&back, &data);
        prop_assert_eq!(back.to_json().unwrap(), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn blaschke_unimodular_on_bands_and_real_left_of_e0(rho in prop_oneof![-0.9..0.9f64, 2.2..5.0f64], t in 0.0..1.0f64) {
        let curve = Curve::new(HyperellipticSurface::new(vec![-2.0, -1.0, 1.0, 2.0]).unwrap(), Integrator::default()).unwrap();
        let ev = BlaschkeEvaluator::new(&curve, rho).unwrap();
        for x in [-2.0 + t, 1.0 + t] {
            let b = ev.blaschke(&SurfacePoint::upper(c(x, 0.0))).unwrap();
            prop_assert!((b.norm() - 1.0).abs() < 1e-6);
        }
        let b = ev.blaschke(&SurfacePoint::upper(c(-2.0 - 3.0 * t - 1e-3, 0.0))).unwrap();
        prop_assert!(b.im.abs() < 1e-8);
    }

    #[test]
    fn wronskian_constant_for_random_perturbations(
        sites in prop::collection::btree_map(-4i64..4, (0.2..1.0f64, -1.0..1.0f64), 0..4),
        b_plus in -3.0..3.0f64,
        re in -4.0..4.0f64,
        im in prop_oneof![Just(0.0), 0.05..1.0f64],
    ) {
        let op = SteplikeOperator::new(Background::new(0.5, 0.0).unwrap(), Background::new(0.5, b_plus).unwrap(), sites).unwrap();
        let w = op.jost_wronskian(c(re, im)).unwrap();
        prop_assert!(w.rel_variance < 1e-10);
    }

    #[test]
    fn eigenvalues_and_norming_constants(
        sites in prop::collection::btree_map(-2i64..2, (0.3..0.8f64, -2.0..2.0f64), 1..3),
        b_plus in -2.5..2.5f64,
    ) {
        let op = SteplikeOperator::new(Background::new(0.5, 0.0).unwrap(), Background::new(0.5, b_plus).unwrap(), sites).unwrap();
        let eig = op.eigenvalues(2000).unwrap();
        let eig2 = op.eigenvalues(4000).unwrap();
        prop_assert_eq!(eig.len(), eig2.len());
        for &l in &eig {
            let g = op.norming_constant(l, Side::Plus).unwrap();
            prop_assert!(g > 0.0);
            let wider = op.norming_constant_split(l, Side::Plus, op.n_minus() - 6, op.n_plus() + 6).unwrap();
            prop_assert!((g - wider).abs() < 1e-10 * g.max(1.0));
        }
    }
}

#[test]
fn unitarity_of_sampled_data() {
    let mut table = BTreeMap::new();
    table.insert(0, (0.6, 0.4));
    let op = SteplikeOperator::new(
        Background::new(0.5, 0.0).unwrap(),
        Background::new(0.5, 1.0).unwrap(),
        table,
    )
    .unwrap();
    let data = op
        .scattering_data(&SamplingGrids {
            samples_per_band: 40,
            ..Default::default()
        })
        .unwrap();
    for row in &data.r_plus {
        let lambda = row[0];
        if lambda > 1.0 {
            assert!((row[1].hypot(row[2]) - 1.0).abs() < 1e-8);
        } else {
            assert!(op.unitarity_residual(lambda).unwrap().abs() < 1e-8);
        }
    }
}
