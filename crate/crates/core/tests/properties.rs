use proptest::prelude::*;

use dbn_smooth::approx::{bk_smoother, ff_smoother, iterated_bk, ClusterSpec};
use dbn_smooth::exact::{brute_force_joint, flat_smoother, frontier_smoother};
use dbn_smooth::lbp::{
    detect_fixed_point, fb_sweep, flooding_sweep, lbp_smoother, unrolled_network, LbpConfig, LbpOptions, Schedule,
};
use dbn_smooth::metrics::{l1_error, run_error_experiment, AlgorithmSpec, ErrorExperiment, ModelSpec};
use dbn_smooth::model::{build_chmm, build_water_network_truncated, sample_evidence};
use dbn_smooth::{Caps, FactoredBelief, SmoothedMarginals};

fn distribution(arity: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, arity).prop_map(|mut v| {
        v[0] += 1e-3;
        let z: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= z);
        v
    })
}

fn marginals_of_shape(horizon: usize, arities: Vec<usize>) -> impl Strategy<Value = SmoothedMarginals> {
    prop::collection::vec(arities.into_iter().map(distribution).collect::<Vec<_>>(), horizon).prop_map(|slices| {
        SmoothedMarginals {
            slices: slices.into_iter().map(|marginals| FactoredBelief { marginals }).collect(),
            log_evidence: None,
        }
    })
}

/// Three marginals sets over the same `(T, arities)` shape.
fn marginal_triple() -> impl Strategy<Value = (SmoothedMarginals, SmoothedMarginals, SmoothedMarginals)> {
    (1usize..4, prop::collection::vec(2usize..4, 1..4)).prop_flat_map(|(horizon, arities)| {
        (
            marginals_of_shape(horizon, arities.clone()),
            marginals_of_shape(horizon, arities.clone()),
            marginals_of_shape(horizon, arities),
        )
    })
}

fn assert_normalized(m: &SmoothedMarginals) {
    for slice in &m.slices {
        for p in &slice.marginals {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|&x| (0.0..=1.0 + 1e-12).contains(&x)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn l1_is_bounded_symmetric_and_a_metric((a, b, c) in marginal_triple()) {
        let ab = l1_error(&a, &b).unwrap();
        let ba = l1_error(&b, &a).unwrap();
        let n = a.slices[0].marginals.len() as f64;
        prop_assert_eq!(&ab.per_t, &ba.per_t);
        for &d in &ab.per_t {
            prop_assert!((0.0..=2.0 * n + 1e-12).contains(&d));
        }
        let ac = l1_error(&a, &c).unwrap();
        let cb = l1_error(&c, &b).unwrap();
        for t in 0..ab.per_node.len() {
            for i in 0..ab.per_node[t].len() {
                prop_assert!(ab.per_node[t][i] <= ac.per_node[t][i] + cb.per_node[t][i] + 1e-12);
            }
        }
        prop_assert_eq!(l1_error(&a, &a).unwrap().total, 0.0);
    }

    #[test]
    fn exact_routes_agree_on_small_chmms(n in 1usize..4, horizon in 1usize..5, seed in 0u64..1000) {
        let dbn = build_chmm(n, 2, seed).unwrap();
        let (ev, _) = sample_evidence(&dbn, horizon, seed).unwrap();
        let caps = Caps::default();
        let brute = brute_force_joint(&dbn, &ev, &caps).unwrap();
        let flat = flat_smoother(&dbn, &ev, &caps).unwrap();
        let frontier = frontier_smoother(&dbn, &ev, &caps).unwrap().marginals;
        prop_assert!(brute.max_abs_diff(&flat).unwrap() < 1e-9);
        prop_assert!(brute.max_abs_diff(&frontier).unwrap() < 1e-9);
        let ll = brute.log_evidence.unwrap();
        prop_assert!((ll - flat.log_evidence.unwrap()).abs() < 1e-8);
        prop_assert!((ll - frontier.log_evidence.unwrap()).abs() < 1e-8);
    }

    #[test]
    fn every_smoother_returns_distributions(n in 1usize..4, horizon in 1usize..8, seed in 0u64..1000) {
        let dbn = build_chmm(n, 2, seed).unwrap();
        let (ev, _) = sample_evidence(&dbn, horizon, seed).unwrap();
        let caps = Caps::default();
        let net = unrolled_network(&dbn, &ev, &caps).unwrap();
        let clusters = ClusterSpec::per_node(&dbn);
        assert_normalized(&ff_smoother(&dbn, &ev).unwrap());
        assert_normalized(&bk_smoother(&dbn, &ev, &clusters, &caps).unwrap());
        assert_normalized(&lbp_smoother(&net, &LbpConfig::iterations(3), LbpOptions::default()).unwrap().marginals);
        assert_normalized(&iterated_bk(&dbn, &ev, &clusters, &LbpConfig::iterations(3), LbpOptions::default(), &caps).unwrap().marginals);
    }

    #[test]
    fn full_damping_freezes_messages(seed in 0u64..1000, flooding in any::<bool>()) {
        let dbn = build_chmm(3, 2, seed).unwrap();
        let (ev, _) = sample_evidence(&dbn, 4, seed).unwrap();
        let net = unrolled_network(&dbn, &ev, &Caps::default()).unwrap();
        let mut store = lbp_smoother(&net, &LbpConfig::iterations(2), LbpOptions::default()).unwrap().store;
        let before = store.clone();
        let delta = if flooding { flooding_sweep(&net, &mut store, 1.0) } else { fb_sweep(&net, &mut store, 1.0) };
        prop_assert_eq!(delta, 0.0);
        prop_assert_eq!(store, before);
    }

    #[test]
    fn fixed_points_do_not_depend_on_schedule(seed in 0u64..500, mu in prop::sample::select(vec![0.0, 0.1, 0.3])) {
        let dbn = build_water_network_truncated(seed, 4).unwrap();
        let (ev, _) = sample_evidence(&dbn, 6, seed).unwrap();
        let net = unrolled_network(&dbn, &ev, &Caps::default()).unwrap();
        let config = LbpConfig { max_iterations: 200, damping: mu, tol: 1e-11, ..LbpConfig::default() };
        let run = lbp_smoother(&net, &config, LbpOptions::default()).unwrap();
        prop_assume!(run.trace.converged);
        // one undamped sweep of either schedule leaves a damped fixed point in place
        for schedule in [Schedule::ForwardBackward, Schedule::Flooding] {
            let mut store = run.store.clone();
            match schedule {
                Schedule::ForwardBackward => fb_sweep(&net, &mut store, 0.0),
                Schedule::Flooding => flooding_sweep(&net, &mut store, 0.0),
            };
            let (fixed, delta) = detect_fixed_point(&run.store, &store, 1e-11 / (1.0 - mu) * 10.0);
            prop_assert!(fixed, "delta {delta}");
        }
    }
}

#[test]
fn seeded_experiments_are_bit_identical() {
    let exp = ErrorExperiment {
        model: ModelSpec::Water { keep_hidden: Some(4) },
        seeds: vec![3, 1, 2],
        horizon: 10,
        algorithms: vec![
            AlgorithmSpec::Ff,
            AlgorithmSpec::Bk,
            AlgorithmSpec::Lbp { iterations: 4, damping: 0.1, schedule: Schedule::ForwardBackward },
        ],
        tol: 1e-8,
        caps: Caps::default(),
    };
    let a = run_error_experiment(&exp).unwrap();
    let b = run_error_experiment(&exp).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.first().unwrap().seed, 1);
    let mut out_a = Vec::new();
    let mut out_b = Vec::new();
    dbn_smooth::metrics::write_error_csv(&a, &mut out_a).unwrap();
    dbn_smooth::metrics::write_error_csv(&b, &mut out_b).unwrap();
    assert_eq!(out_a, out_b);
}

#[test]
fn zero_algorithms_give_header_only() {
    let exp = ErrorExperiment {
        model: ModelSpec::Chmm { chains: 2, arity: 2 },
        seeds: vec![0],
        horizon: 3,
        algorithms: vec![],
        tol: 1e-8,
        caps: Caps::default(),
    };
    let rows = run_error_experiment(&exp).unwrap();
    let mut out = Vec::new();
    dbn_smooth::metrics::write_error_csv(&rows, &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), "run_id,seed,model,algorithm,mu,iteration,t,l1\n");
}
