//! Exact routes and approximations checked against oracles written here,
//! independent of the library's inference code.

use dbn_smooth::approx::{ff_smoother, ClusterSpec};
use dbn_smooth::elimination::{triangulate, two_slice_moral_graph};
use dbn_smooth::exact::{
    brute_force_joint, choose_frontier_schedule, flat_smoother, frontier_smoother, FrontierAction,
};
use dbn_smooth::metrics::l1_error;
use dbn_smooth::model::{
    build_chmm, build_factorial_hmm, build_water_network, sample_evidence, CptRole, DiscreteDbn, EvidenceSequence,
    Lag,
};
use dbn_smooth::{Caps, FactoredBelief, SmoothedMarginals};

/// Joint probability of one full hidden trajectory and the evidence, read
/// straight off the CPTs. `traj[t][node]` holds hidden values; observed
/// entries are ignored.
fn joint(dbn: &DiscreteDbn, ev: &EvidenceSequence, traj: &[Vec<usize>]) -> f64 {
    let mut p = 1.0;
    for (t0, vals) in traj.iter().enumerate() {
        let t = t0 + 1;
        let role = if t == 1 { CptRole::Prior } else { CptRole::Transition };
        for i in 0..dbn.num_nodes() {
            let cpt = dbn.cpt(i, role);
            let child = if dbn.node(i).is_hidden() {
                vals[i]
            } else {
                match ev.get(t, i) {
                    Some(y) => y,
                    None => continue,
                }
            };
            // first parent most significant
            let mut config = 0;
            for (k, pr) in cpt.parents.iter().enumerate() {
                let v = match pr.lag {
                    Lag::Current => vals[pr.node],
                    Lag::Previous => traj[t0 - 1][pr.node],
                };
                config = config * cpt.table.parent_arities()[k] + v;
            }
            p *= cpt.table.prob(child, config);
        }
    }
    p
}

/// Smoothed marginals and log-evidence by summing `joint` over every trajectory.
fn enumerate(dbn: &DiscreteDbn, ev: &EvidenceSequence) -> (Vec<Vec<Vec<f64>>>, f64) {
    let horizon = ev.horizon();
    let hidden = dbn.hidden().to_vec();
    let n = dbn.num_nodes();
    let vars: Vec<(usize, usize)> = (0..horizon).flat_map(|t| hidden.iter().map(move |&h| (t, h))).collect();
    let mut traj = vec![vec![0usize; n]; horizon];
    let mut acc: Vec<Vec<Vec<f64>>> = (0..horizon).map(|_| hidden.iter().map(|&h| vec![0.0; dbn.arity(h)]).collect()).collect();
    let mut total = 0.0;
    loop {
        let p = joint(dbn, ev, &traj);
        total += p;
        for t in 0..horizon {
            for (k, &h) in hidden.iter().enumerate() {
                acc[t][k][traj[t][h]] += p;
            }
        }
        // odometer over all hidden variables
        let mut carry = true;
        for &(t, h) in vars.iter().rev() {
            traj[t][h] += 1;
            if traj[t][h] < dbn.arity(h) {
                carry = false;
                break;
            }
            traj[t][h] = 0;
        }
        if carry {
            break;
        }
    }
    for slice in &mut acc {
        for m in slice {
            m.iter_mut().for_each(|x| *x /= total);
        }
    }
    (acc, total.ln())
}

fn assert_matches(oracle: &[Vec<Vec<f64>>], m: &SmoothedMarginals, tol: f64) {
    for (a, b) in oracle.iter().zip(&m.slices) {
        for (p, q) in a.iter().zip(&b.marginals) {
            for (x, y) in p.iter().zip(q) {
                assert!((x - y).abs() < tol, "{x} vs {y}");
            }
        }
    }
}

#[test]
fn exact_routes_match_direct_enumeration() {
    let caps = Caps::default();
    for (n, horizon, seed) in [(1, 6, 0), (2, 3, 1), (3, 4, 2), (3, 3, 5)] {
        let dbn = build_chmm(n, 2, seed).unwrap();
        let (ev, _) = sample_evidence(&dbn, horizon, seed).unwrap();
        let (oracle, ll) = enumerate(&dbn, &ev);
        let routes = [
            brute_force_joint(&dbn, &ev, &caps).unwrap(),
            flat_smoother(&dbn, &ev, &caps).unwrap(),
            frontier_smoother(&dbn, &ev, &caps).unwrap().marginals,
        ];
        for m in &routes {
            assert_matches(&oracle, m, 1e-9);
            assert!((m.log_evidence.unwrap() - ll).abs() < 1e-8);
        }
    }
}

#[test]
fn missing_observations_are_marginalized() {
    let dbn = build_chmm(2, 2, 8).unwrap();
    let (mut ev, _) = sample_evidence(&dbn, 4, 8).unwrap();
    let obs = dbn.observed()[1];
    ev.set(2, obs, None).unwrap();
    ev.set(4, dbn.observed()[0], None).unwrap();
    let (oracle, ll) = enumerate(&dbn, &ev);
    let m = frontier_smoother(&dbn, &ev, &Caps::default()).unwrap().marginals;
    assert_matches(&oracle, &m, 1e-9);
    assert!((m.log_evidence.unwrap() - ll).abs() < 1e-8);
}

#[test]
fn ff_error_on_two_chains_is_stable() {
    let dbn = build_chmm(2, 2, 3).unwrap();
    let (ev, _) = sample_evidence(&dbn, 3, 3).unwrap();
    let (oracle, _) = enumerate(&dbn, &ev);
    let exact = SmoothedMarginals {
        slices: oracle.into_iter().map(|marginals| FactoredBelief { marginals }).collect(),
        log_evidence: None,
    };
    let report = l1_error(&exact, &ff_smoother(&dbn, &ev).unwrap()).unwrap();
    assert!((report.total - FF_CHMM_2_2_T3_SEED3).abs() < 1e-9, "{}", report.total);
}

/// Recorded from the enumeration oracle above.
const FF_CHMM_2_2_T3_SEED3: f64 = 0.08868966583932936;

#[test]
fn chmm_frontier_stays_within_n_plus_two() {
    for n in 1..=7 {
        let dbn = build_chmm(n, 2, 0).unwrap();
        let schedule = choose_frontier_schedule(&dbn).unwrap();
        assert!(schedule.max_members() <= n + 2, "N={n}: {}", schedule.max_members());
    }
}

#[test]
fn factorial_frontier_adds_then_removes_each_chain() {
    let dbn = build_factorial_hmm(4, 2, 0).unwrap();
    let actions: Vec<FrontierAction> = choose_frontier_schedule(&dbn).unwrap().actions().collect();
    let expected: Vec<FrontierAction> = (0..4).flat_map(|i| [FrontierAction::Add(i), FrontierAction::Remove(i)]).collect();
    assert_eq!(actions, expected);
}

#[test]
fn water_triangulation_has_nonlocal_cliques() {
    let dbn = build_water_network(0).unwrap();
    let graph = two_slice_moral_graph(&dbn);
    let tri = triangulate(&graph);
    let n = dbn.num_nodes();
    let families: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut f: Vec<usize> = dbn
                .cpt(i, CptRole::Transition)
                .parents
                .iter()
                .map(|p| if p.lag == Lag::Previous { p.node } else { n + p.node })
                .collect();
            f.push(n + i);
            f
        })
        .collect();
    let max_family = families.iter().map(Vec::len).max().unwrap();
    let max_clique = tri.cliques.iter().map(|c| c.len()).max().unwrap();
    // cliques contained in no single family
    let nonlocal: Vec<&Vec<usize>> =
        tri.cliques.iter().filter(|c| !families.iter().any(|f| c.iter().all(|v| f.contains(v)))).collect();
    assert!(!nonlocal.is_empty());
    assert!(!tri.fill_edges.is_empty());
    // the largest clique is no larger than the largest family here
    assert_eq!((max_clique, max_family), (6, 6));
}

#[test]
fn whole_slice_cluster_spec_has_one_cluster() {
    let dbn = build_water_network(0).unwrap();
    let spec = ClusterSpec::whole_slice(&dbn, &Caps::default()).unwrap();
    assert_eq!(spec.len(), 1);
    assert_eq!(spec.clusters()[0], dbn.hidden().to_vec());
}
