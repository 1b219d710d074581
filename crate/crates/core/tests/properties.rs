use std::f64::consts::{FRAC_PI_2, PI};

use flatlab::artifact::{from_json_str, to_json_string};
use flatlab::budget::{heights, FillingBudget};
use flatlab::hybrid::{HybridMetric, Thread};
use flatlab::sphere::{
    ambient_distance, build_net, chordal_distance, geodesic_distance, midpoint_defect, SpherePoint,
};
use flatlab::tunnel::{generate_profile, sample_grid, RadialProfile};
use proptest::prelude::*;
use serde::{Deserialize, Serialize};

fn point(ambient: usize) -> impl Strategy<Value = SpherePoint> {
    prop::collection::vec(-1.0f64..1.0, ambient)
        .prop_filter("nonzero", |v| v.iter().map(|c| c * c).sum::<f64>() > 1e-6)
        .prop_map(|v| SpherePoint::normalized(v).unwrap())
}

fn thread(ambient: usize) -> impl Strategy<Value = Thread> {
    (point(ambient), point(ambient), 0.0f64..3.0).prop_map(|(a, b, length)| Thread { a, b, length })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn sphere_metrics_are_metrics(x in point(4), y in point(4), z in point(4)) {
        for d in [geodesic_distance, chordal_distance] {
            prop_assert!(d(&x, &x) == 0.0);
            prop_assert!((d(&x, &y) - d(&y, &x)).abs() <= 1e-15);
            prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-10);
        }
    }

    #[test]
    fn chordal_and_geodesic_are_bilipschitz(x in point(3), y in point(3)) {
        let (e, g) = (chordal_distance(&x, &y), geodesic_distance(&x, &y));
        prop_assert!(e <= g + 1e-15);
        prop_assert!(g <= FRAC_PI_2 * e + 1e-12);
        prop_assert!(g <= PI + 1e-15);
    }

    #[test]
    fn chord_matches_ambient_norm(x in point(5), y in point(5)) {
        prop_assert!((chordal_distance(&x, &y) - ambient_distance(&x, &y)).abs() <= 1e-12);
    }

    #[test]
    fn midpoint_defect_positive(x in point(3), y in point(3)) {
        let d = midpoint_defect(&x, &y, 200);
        prop_assert!(d >= 0.0);
        if geodesic_distance(&x, &y) >= 0.1 {
            prop_assert!(d > 0.0);
        }
    }

    #[test]
    fn hybrid_is_a_metric_below_geodesic(
        threads in prop::collection::vec(thread(3), 0..5),
        x in point(3), y in point(3), z in point(3),
    ) {
        let metric = HybridMetric::new(3, threads).unwrap();
        let d = |a: &SpherePoint, b: &SpherePoint| metric.distance(a, b).unwrap();
        prop_assert!(d(&x, &x) == 0.0);
        prop_assert!((d(&x, &y) - d(&y, &x)).abs() <= 1e-12);
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-10);
        prop_assert!(d(&x, &y) <= geodesic_distance(&x, &y) + 1e-15);
    }

    #[test]
    fn chord_length_threads_stay_above_chordal(
        ends in prop::collection::vec((point(3), point(3)), 0..5),
        x in point(3), y in point(3),
    ) {
        let threads = ends
            .into_iter()
            .map(|(a, b)| Thread { length: chordal_distance(&a, &b), a, b })
            .collect();
        let metric = HybridMetric::new(3, threads).unwrap();
        prop_assert!(metric.distance(&x, &y).unwrap() >= chordal_distance(&x, &y) - 1e-12);
    }

    #[test]
    fn adding_a_thread_never_lengthens(
        threads in prop::collection::vec(thread(3), 0..4),
        extra in thread(3),
        x in point(3), y in point(3),
    ) {
        let before = HybridMetric::new(3, threads.clone()).unwrap().distance(&x, &y).unwrap();
        let mut more = threads;
        more.push(extra);
        let after = HybridMetric::new(3, more).unwrap().distance(&x, &y).unwrap();
        prop_assert!(after <= before + 1e-12);
    }

    #[test]
    fn closure_agrees_with_direct_search(
        threads in prop::collection::vec(thread(3), 1..6),
        x in point(3), y in point(3),
    ) {
        let metric = HybridMetric::new(3, threads).unwrap();
        let closure = metric.closure();
        prop_assert!((metric.distance(&x, &y).unwrap() - closure.distance(&x, &y).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn height_identities(rho in 1e-4f64..1.0, diam in 0.5f64..4.0) {
        let (h, h0) = heights(rho, diam).unwrap();
        prop_assert!((h * h - (2.0 * rho * diam - rho * rho)).abs() <= 1e-12 * (1.0 + h * h));
        prop_assert!((h0 * h0 - (2.0 * PI * rho * diam + 8.0 * rho)).abs() <= 1e-12 * (1.0 + h0 * h0));
    }

    #[test]
    fn budget_monotone(
        rho in 1e-3f64..0.5,
        vol in 0.5f64..20.0,
        grow in 1.01f64..2.0,
        tunnel in 0.0f64..1e-2,
        pipe in 0.0f64..1e-3,
    ) {
        let base = FillingBudget::from_parts(3, rho, 0.1 * rho, 1.0, vol, PI, tunnel, pipe).unwrap();
        let more_vol = FillingBudget::from_parts(3, rho, 0.1 * rho, 1.0, grow * vol, PI, tunnel, pipe).unwrap();
        let more_rho = FillingBudget::from_parts(3, grow * rho, 0.1 * rho, 1.0, vol, PI, tunnel, pipe).unwrap();
        prop_assert!(more_vol.df_bound > base.df_bound);
        prop_assert!(more_rho.dgh_bound > base.dgh_bound);
        prop_assert!((base.df_bound - (base.vol_bottom + base.vol_mid + base.vol_top)).abs() <= 1e-12 * base.df_bound);
    }

    #[test]
    fn floats_survive_artifacts(v in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 0..20)) {
        #[derive(Serialize, Deserialize, PartialEq, Debug)]
        struct Doc { schema: String, v: Vec<f64> }
        let doc = Doc { schema: "t/1".into(), v };
        let back: Doc = from_json_str(&to_json_string(&doc).unwrap(), "t/1").unwrap();
        prop_assert_eq!(back, doc);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn nets_pack_and_cover(m in 2usize..4, eps in 0.6f64..1.4, seed in 0u64..1000) {
        let net = build_net(m, eps, seed).unwrap();
        prop_assert!(net.count() == 1 || net.min_separation() > 2.0 * eps);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let sample: Vec<SpherePoint> = (0..4000).map(|_| SpherePoint::random(&mut rng, m + 1)).collect();
        prop_assert!(net.covering_radius(&sample) <= 2.0 * eps);
    }

    #[test]
    fn tunnel_profiles_are_symmetric_and_bounded(
        m in 2usize..5,
        rho in 0.05f64..0.3,
        neck in 0.05f64..0.6,
        extra in 0.0f64..1.0,
    ) {
        let rho0 = neck * rho;
        let minimal = generate_profile(m, rho0, rho, 10.0).unwrap().bend().minimal_length();
        let p = generate_profile(m, rho0, rho, minimal + extra).unwrap();
        let (a, b) = p.domain();
        for sample in sample_grid(&p, 401) {
            prop_assert!(sample.r > 0.0 && sample.r <= rho + 1e-12);
            prop_assert!((p.sample(-sample.s).r - sample.r).abs() <= 1e-10);
        }
        prop_assert!(p.axial_length() < p.length());
        prop_assert!(p.gluing_residual() <= 1e-8);
        prop_assert!((b - a - p.length()).abs() <= 1e-12);
    }
}
