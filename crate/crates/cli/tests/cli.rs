use std::path::Path;
use std::process::{Command, Output};

use dbn_smooth::exact::brute_force_joint;
use dbn_smooth::model::io::load_model;
use dbn_smooth::model::{validate_regular, CptRole, EvidenceSequence};
use dbn_smooth::Caps;

fn dbn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dbn")).args(args).output().expect("run dbn")
}

fn ok(args: &[&str]) -> String {
    let out = dbn(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// `(t, node, state) -> probability` rows of a marginals CSV.
fn read_marginals(path: &Path) -> Vec<(String, f64)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["t", "node", "state", "probability"]);
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (format!("{}/{}/{}", &rec[0], &rec[1], &rec[2]), rec[3].parse().unwrap())
        })
        .collect()
}

fn max_diff(a: &[(String, f64)], b: &[(String, f64)]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|((ka, va), (kb, vb))| {
            assert_eq!(ka, kb);
            (va - vb).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn gen_model_writes_loadable_regular_model() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chmm.json");
    let line = ok(&["gen-model", "chmm:5:2", "--seed", "4", "--out", s(&path)]);
    assert_eq!(line.lines().count(), 1);
    assert!(line.contains("13 inter-slice"), "{line}");
    let dbn = load_model(&path).unwrap();
    assert_eq!(dbn.num_hidden(), 5);
    for i in 0..5 {
        let parents: Vec<usize> = dbn.inter_parents(i).collect();
        assert_eq!(parents, (i.saturating_sub(1)..=(i + 1).min(4)).collect::<Vec<_>>());
    }

    let water = dir.path().join("water.json");
    ok(&["gen-model", "water", "--out", s(&water)]);
    assert!(validate_regular(&load_model(&water).unwrap()).is_ok());
}

#[test]
fn bad_spec_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dbn(&["gen-model", "chmm:0:2", "--out", s(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    assert!(out.stdout.is_empty());

    let out = dbn(&["smooth", "--model", "chmm:2:2", "--evidence", "sample:3", "--out", "x.csv", "--algorithm", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    let out = dbn(&["smooth", "--model", "/nonexistent/model.json", "--evidence", "sample:3", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exact_smoothing_matches_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    let ev = dir.path().join("e.json");
    let out = dir.path().join("exact.csv");
    ok(&["gen-model", "chmm:2:2", "--seed", "9", "--out", s(&model)]);
    ok(&["gen-evidence", "--model", s(&model), "--horizon", "3", "--seed", "9", "--out", s(&ev)]);
    ok(&["smooth", "--model", s(&model), "--evidence", s(&ev), "--algorithm", "exact", "--out", s(&out)]);

    let dbn = load_model(&model).unwrap();
    let evidence = EvidenceSequence::load(&dbn, &ev).unwrap();
    let brute = brute_force_joint(&dbn, &evidence, &Caps::default()).unwrap();
    let rows = read_marginals(&out);
    assert_eq!(rows.len(), 3 * 2 * 2);
    let mut k = 0;
    for slice in &brute.slices {
        for m in &slice.marginals {
            for &p in m {
                assert!((rows[k].1 - p).abs() < 1e-9);
                k += 1;
            }
        }
    }
}

#[test]
fn ff_equals_one_lbp_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let ff = dir.path().join("ff.csv");
    let lbp = dir.path().join("lbp.csv");
    let trace = dir.path().join("trace.csv");
    let common = ["--model", "chmm:4:2", "--seed", "3", "--evidence", "sample:20"];
    ok(&[&["smooth"], &common[..], &["--algorithm", "ff", "--out", s(&ff)]].concat());
    let line = ok(&[&["smooth"], &common[..], &["--algorithm", "lbp", "--iters", "1", "--out", s(&lbp), "--trace", s(&trace)]].concat());
    assert!(line.contains("non-converged after 1 iterations"), "{line}");
    assert!(max_diff(&read_marginals(&ff), &read_marginals(&lbp)) < 1e-10);
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("iteration,max_message_delta"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn full_damping_gives_local_evidence_beliefs() {
    let dir = tempfile::tempdir().unwrap();
    let lbp = dir.path().join("lbp.csv");
    let model = dir.path().join("m.json");
    let ev = dir.path().join("e.json");
    ok(&["gen-model", "chmm:3:2", "--seed", "6", "--out", s(&model)]);
    ok(&["gen-evidence", "--model", s(&model), "--horizon", "5", "--seed", "6", "--out", s(&ev)]);
    ok(&["smooth", "--model", s(&model), "--evidence", s(&ev), "--algorithm", "lbp", "--damping", "1", "--iters", "3", "--out", s(&lbp)]);

    // frozen uniform messages: belief of X_i[t] is its CPT averaged over
    // parent configurations times its own evidence
    let dbn = load_model(&model).unwrap();
    let evidence = EvidenceSequence::load(&dbn, &ev).unwrap();
    let local = dbn_smooth::model::evidence::node_local_evidence(&dbn, &evidence).unwrap();
    let rows = read_marginals(&lbp);
    let mut k = 0;
    for (t, slice) in local.iter().enumerate() {
        for (ord, l) in slice.iter().enumerate() {
            let table = &dbn.cpt(dbn.hidden()[ord], CptRole::for_slice(t + 1)).table;
            let mut b: Vec<f64> = (0..l.len())
                .map(|x| (0..table.num_configs()).map(|c| table.prob(x, c)).sum::<f64>() * l[x])
                .collect();
            let z: f64 = b.iter().sum();
            b.iter_mut().for_each(|v| *v /= z);
            for v in b {
                assert!((rows[k].1 - v).abs() < 1e-12, "{} {} {v}", rows[k].0, rows[k].1);
                k += 1;
            }
        }
    }
}

#[test]
fn compare_against_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    ok(&["compare", "--model", "chmm:3:2", "--evidence", "sample:6", "--algorithms", "exact,ff", "--out", s(&out)]);
    let mut r = csv::Reader::from_path(&out).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["run_id", "seed", "model", "algorithm", "mu", "iteration", "t", "l1"]);
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 12);
    for row in &rows {
        let l1: f64 = row[7].parse().unwrap();
        if &row[3] == "exact" {
            assert_eq!(l1, 0.0);
        } else {
            assert!(l1 >= 0.0);
        }
    }
}

#[test]
fn compare_without_feasible_reference_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dbn(&[
        "compare",
        "--model",
        "chmm:6:2",
        "--evidence",
        "sample:4",
        "--algorithms",
        "ff",
        "--max-flat-states",
        "16",
        "--max-frontier-joint",
        "16",
        "--out",
        s(&dir.path().join("c.csv")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds cap"));
}

#[test]
fn seeded_compare_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        ok(&["compare", "--model", "water:4", "--seeds", "0..3", "--evidence", "sample:8", "--algorithms", "ff,bk,lbp:3:0.1", "--out", s(p)]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn bench_omits_infeasible_exact_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let line = ok(&[
        "bench", "--ns", "1,3", "--horizon", "5", "--algorithms", "exact,ff,lbp:1,lbp:3", "--repeats", "2",
        "--min-batch-ms", "1", "--max-flat-states", "4", "--out", s(&out),
    ]);
    assert!(line.contains("1 points omitted"), "{line}");
    let mut r = csv::Reader::from_path(&out).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["model", "algorithm", "N", "Q", "T", "repeat", "seconds", "seconds_per_slice"]);
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 2 * 7);
    assert!(!rows.iter().any(|row| &row[1] == "exact" && &row[2] == "3"));
}
