use proptest::prelude::*;
use roughman::roughpath::{lift_smooth_path, spinning_line, RoughPathDriver};
use roughman::scenario::{DriverSpec, ScenarioConfig, ScenarioName};
use roughman::tensor::{check_lie, signature_piecewise_linear};
use roughman::TruncatedTensor;

fn dim_level() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=3, 1usize..=4)
}

fn vector(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, d)
}

fn group_like() -> impl Strategy<Value = TruncatedTensor> {
    dim_level().prop_flat_map(|(d, n)| {
        prop::collection::vec(vector(d), 1..4).prop_map(move |steps| {
            let mut g = TruncatedTensor::unit(d, n);
            for s in &steps {
                g.mul_exp_vector(s);
            }
            g
        })
    })
}

proptest! {
    #[test]
    fn exp_log_roundtrip(g in group_like()) {
        let back = g.log().unwrap().exp().unwrap();
        prop_assert!(back.max_abs_diff(&g) < 1e-9 * (1.0 + g.max_abs()));
    }

    #[test]
    fn inverse_is_two_sided(g in group_like()) {
        let inv = g.group_inverse().unwrap();
        let unit = TruncatedTensor::unit(g.dim(), g.level());
        let scale = 1.0 + g.max_abs() * inv.max_abs();
        prop_assert!(g.mul(&inv).unwrap().max_abs_diff(&unit) < 1e-9 * scale);
        prop_assert!(inv.mul(&g).unwrap().max_abs_diff(&unit) < 1e-9 * scale);
    }

    #[test]
    fn products_of_segments_stay_group_like(g in group_like()) {
        let rep = check_lie(&g, 1e-8 * (1.0 + g.max_abs())).unwrap();
        prop_assert!(rep.pass, "defects {:?}", rep.defects);
    }

    #[test]
    fn signature_satisfies_chen(
        (d, n, pts, cut) in dim_level().prop_flat_map(|(d, n)| {
            (Just(d), Just(n), prop::collection::vec(vector(d), 3..7))
                .prop_flat_map(|(d, n, pts)| {
                    let len = pts.len();
                    (Just(d), Just(n), Just(pts), 1..len - 1)
                })
        })
    ) {
        let whole = signature_piecewise_linear(&pts, n).unwrap();
        let left = signature_piecewise_linear(&pts[..=cut], n).unwrap();
        let right = signature_piecewise_linear(&pts[cut..], n).unwrap();
        let joined = left.mul(&right).unwrap();
        prop_assert_eq!(whole.dim(), d);
        prop_assert!(joined.max_abs_diff(&whole) < 1e-9 * (1.0 + whole.max_abs()));
    }

    #[test]
    fn json_roundtrip(g in group_like()) {
        let back = TruncatedTensor::from_json(&g.to_json()).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn sampled_driver_chen(
        ys in prop::collection::vec(vector(2), 4..12),
        s in 0.0f64..1.0, u in 0.0f64..1.0, t in 0.0f64..1.0,
    ) {
        let n = ys.len();
        let times: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let x = lift_smooth_path(times, ys, 2.5).unwrap();
        let direct = x.eval(s, t);
        let split = x.eval(s, u).mul(&x.eval(u, t)).unwrap();
        prop_assert!(direct.max_abs_diff(&split) < 1e-9 * (1.0 + direct.max_abs()));
    }

    #[test]
    fn spinning_line_level_two_area(v in vector(2), a in -3.0f64..3.0, h in 0.01f64..1.0) {
        let x = spinning_line(&v, &[vec![0.0, a], vec![-a, 0.0]]).unwrap();
        let inc = x.eval(0.0, h);
        let anti = inc.antisymmetric_area();
        prop_assert!((inc.degree(1)[0] - h * v[0]).abs() < 1e-12);
        prop_assert!((anti[1] - h * a).abs() < 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn driver_spec_roundtrip(dir in vector(2), a in -3.0f64..3.0, horizon in 0.5f64..5.0) {
        let spec = DriverSpec::SpinningLine {
            direction: dir,
            area: vec![vec![0.0, a], vec![-a, 0.0]],
            horizon: Some(horizon),
        };
        let json = serde_json::to_string(&spec).unwrap();
        prop_assert_eq!(DriverSpec::from_json(&json).unwrap(), spec);
    }

    #[test]
    fn scenario_config_roundtrip(k in 0usize..8, seed in any::<u64>()) {
        let mut cfg = ScenarioConfig::for_scenario(ScenarioName::ALL[k]);
        cfg.seed = seed;
        let json = serde_json::to_string(&cfg).unwrap();
        prop_assert_eq!(ScenarioConfig::from_json(&json).unwrap(), cfg);
    }
}
