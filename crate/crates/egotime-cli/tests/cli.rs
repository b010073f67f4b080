use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn egotime(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_egotime"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn output_digests(dir: &Path) -> BTreeMap<String, String> {
    let m = manifest(dir);
    m["outputs"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, v)| (k.clone(), v.as_str().unwrap().to_string()))
        .collect()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, seed: &str, n_egos: &str) {
    let o = egotime(&[
        "synth",
        "--n-egos",
        n_egos,
        "--horizon-days",
        "120",
        "--registration-span-days",
        "30",
        "--community-size",
        "30",
        "--seed",
        seed,
        "--out",
        p(dir),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = egotime(&["frobnicate"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn help_exits_zero() {
    let o = egotime(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("trajectories"));
}

#[test]
fn missing_inputs_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = egotime(&["stats", "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    let o = egotime(&["stats", "--edges", p(&tmp.path().join("none.csv")), "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("none.csv"));
    let o = egotime(&["stats", "--edges", p(&tmp.path().join("none.csv"))]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn invalid_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let edges = tmp.path().join("e.csv");
    fs::write(&edges, "src,dst,created_at\na,b,1\n").unwrap();
    let cfg = tmp.path().join("c.cfg");
    let out = tmp.path().join("o");
    for text in ["no equals sign", "bogus_key = 1", "timeout = soon", "seed = 1\nseed = 2"] {
        fs::write(&cfg, text).unwrap();
        let o = egotime(&["sessions", "--edges", p(&edges), "--config", p(&cfg), "--out", p(&out)]);
        assert_eq!(code(&o), 2, "{text:?}: {}", stderr(&o));
    }
    let o = egotime(&["trajectories", "--edges", p(&edges), "--cohort", "some", "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    let o = egotime(&["matching", "--edges", p(&edges), "--k", "0-2", "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    let o = egotime(&["pipeline", "--edges", p(&edges), "--analyses", "stats,astrology", "--out", p(&out)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn malformed_edges_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let edges = tmp.path().join("e.csv");
    fs::write(&edges, "src,dst,created_at\na,b,yesterday\n").unwrap();
    let o = egotime(&["stats", "--edges", p(&edges), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let edges = tmp.path().join("e.csv");
    fs::write(&edges, "src,dst,created_at\na,b,0\na,c,100\na,d,5000\n").unwrap();
    let cfg = tmp.path().join("c.cfg");
    fs::write(&cfg, "# sessions\ntimeout = 50\nmin-lifespan-days = 0\nshuffles = 5000\n").unwrap();
    let out = tmp.path().join("o");
    let o = egotime(&["sessions", "--edges", p(&edges), "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m["config"]["timeout"], "50");
    assert_eq!(m["config"]["min_lifespan_days"], "0");
    assert_eq!(m["config"]["window_secs"], "600");
    assert_eq!(m["inputs"]["edges"]["bytes"], fs::metadata(&edges).unwrap().len());
    // three singleton batches at timeout 50, two batches when the flag wins
    let batches = fs::read_to_string(out.join("batches.csv")).unwrap();
    assert_eq!(batches.lines().count(), 4);
    let o = egotime(&[
        "sessions", "--edges", p(&edges), "--config", p(&cfg), "--timeout", "1500", "--out", p(&out),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(manifest(&out)["config"]["timeout"], "1500");
    let batches = fs::read_to_string(out.join("batches.csv")).unwrap();
    assert_eq!(batches.lines().count(), 3);
}

#[test]
fn attribution_window() {
    let tmp = tempfile::tempdir().unwrap();
    let edges = tmp.path().join("e.csv");
    let imps = tmp.path().join("i.csv");
    fs::write(&edges, "src,dst,created_at\nu,five,10000\nu,eleven,10000\nu,after,10000\nu,none,10000\n").unwrap();
    fs::write(
        &imps,
        "user,candidate,shown_at\nu,five,9700\nu,eleven,9340\nu,after,10060\nbroken,row\n",
    )
    .unwrap();
    let out = tmp.path().join("o");
    let o = egotime(&["attribute", "--edges", p(&edges), "--impressions", p(&imps), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let tagged = fs::read_to_string(out.join("edges.csv")).unwrap();
    let origin: BTreeMap<&str, &str> = tagged
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1], f[3])
        })
        .collect();
    assert_eq!(origin["five"], "r");
    assert_eq!(origin["eleven"], "s");
    assert_eq!(origin["after"], "s");
    assert_eq!(origin["none"], "s");
    let report: Value = serde_json::from_slice(&fs::read(out.join("attribution.json")).unwrap()).unwrap();
    assert_eq!(report["recommended"], 1);
    assert_eq!(report["spontaneous"], 3);
    assert_eq!(report["skipped_impression_lines"], serde_json::json!([5]));
    assert_eq!(manifest(&out)["config"]["window_secs"], "600");

    // a wider window picks up the 11-minute impression
    let o = egotime(&[
        "attribute", "--edges", p(&edges), "--impressions", p(&imps), "--window-secs", "700", "--out", p(&out),
    ]);
    assert_eq!(code(&o), 0);
    let report: Value = serde_json::from_slice(&fs::read(out.join("attribution.json")).unwrap()).unwrap();
    assert_eq!(report["recommended"], 2);

    let o = egotime(&["attribute", "--edges", p(&edges), "--out", p(&out)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn synth_ingest_trajectories_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    let s = tmp.path().join("synth");
    synth(&s, "11", "1000");
    for f in ["edges.csv", "nodes.csv", "truth.json", "oracle.json", "manifest.json"] {
        assert!(s.join(f).exists(), "{f}");
    }
    let ing = tmp.path().join("ingest");
    let o = egotime(&["ingest", "--edges", p(&s.join("edges.csv")), "--nodes", p(&s.join("nodes.csv")), "--out", p(&ing)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&fs::read(ing.join("ingest.json")).unwrap()).unwrap();
    let n_edges = fs::read_to_string(s.join("edges.csv")).unwrap().lines().count() - 1;
    assert_eq!(report["edges"].as_u64().unwrap() as usize, n_edges);

    let tr = tmp.path().join("traj");
    let o = egotime(&[
        "trajectories", "--edges", p(&ing.join("edges.csv")), "--nodes", p(&ing.join("nodes.csv")), "--out", p(&tr),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: Value = serde_json::from_slice(&fs::read(tr.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["egos"], 1000);
    assert!(summary["densification"]["gamma"].as_f64().unwrap() > 1.0);
    let agg = fs::read_to_string(tr.join("aggregate.csv")).unwrap();
    assert!(agg.starts_with("metric,cohort,origin,n,mean,lo,hi,count"));
    assert!(agg.lines().any(|l| l.starts_with("gcc_ratio,all,all,2,")));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    synth(&a, "5", "300");
    synth(&b, "5", "300");
    assert_eq!(output_digests(&a), output_digests(&b));
    let c = tmp.path().join("c");
    synth(&c, "6", "300");
    assert_ne!(output_digests(&a)["edges.csv"], output_digests(&c)["edges.csv"]);

    let cfg = tmp.path().join("pipeline.cfg");
    fs::write(&cfg, "n_pairs = 2000\ntrees = 20\nfolds = 3\nmin_lifespan_days = 60\n").unwrap();
    let run = |out: &Path, threads: &str| {
        let o = egotime(&[
            "pipeline",
            "--config",
            p(&cfg),
            "--analyses",
            "stats,trajectories,selection,sessions,linkpred",
            "--edges",
            p(&a.join("edges.csv")),
            "--nodes",
            p(&a.join("nodes.csv")),
            "--seed",
            "3",
            "--threads",
            threads,
            "--out",
            p(out),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        output_digests(out)
    };
    let first = run(&tmp.path().join("p1"), "1");
    let second = run(&tmp.path().join("p2"), "2");
    assert!(first.contains_key("linkpred/report.json"));
    assert!(first.contains_key("trajectories/aggregate.csv"));
    assert_eq!(first, second);
    for (name, digest) in &first {
        let bytes = fs::read(tmp.path().join("p1").join(name)).unwrap();
        assert_eq!(&hex_sha256(&bytes), digest, "{name}");
    }
}

fn hex_sha256(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
