use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn flatlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flatlab"))
        .args(args)
        .current_dir(out)
        .env_remove("FLATLAB_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// The single file called `name` under `root`.
fn find(root: &Path, name: &str) -> PathBuf {
    let mut hits = Vec::new();
    for run in fs::read_dir(root).unwrap() {
        let p = run.unwrap().path().join(name);
        if p.exists() {
            hits.push(p);
        }
    }
    assert_eq!(hits.len(), 1, "{name} under {}: {hits:?}", root.display());
    hits.pop().unwrap()
}

fn net_and_threads(dir: &Path) -> (PathBuf, PathBuf) {
    let o = flatlab(
        &[
            "net", "--m", "2", "--eps", "0.7", "--seed", "7", "--out", "nets",
        ],
        dir,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let net = find(&dir.join("nets"), "net.json");
    let o = flatlab(
        &[
            "threads",
            "--net",
            net.to_str().unwrap(),
            "--out",
            "threads",
        ],
        dir,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    (net, find(&dir.join("threads"), "threads.json"))
}

#[test]
fn query_same_point_prints_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (_, threads) = net_and_threads(dir.path());
    let o = flatlab(
        &[
            "query",
            "--threads",
            threads.to_str().unwrap(),
            "--x",
            "0,0.6,0.8",
            "--y",
            "0,0.6,0.8",
            "--out",
            "q",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "0");
    let doc: Value = serde_json::from_str(
        &fs::read_to_string(find(&dir.path().join("q"), "query.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(doc["schema"], "query/1");
}

#[test]
fn query_antipodes_and_bad_points() {
    let dir = tempfile::tempdir().unwrap();
    let (_, threads) = net_and_threads(dir.path());
    let t = threads.to_str().unwrap();
    let o = flatlab(
        &[
            "query",
            "--threads",
            t,
            "--x",
            "1,0,0",
            "--y",
            "-1,0,0",
            "--pairs-csv",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let d: f64 = stdout(&o).trim().parse().unwrap();
    assert!(d > 2.0 - 1e-12 && d <= std::f64::consts::PI);
    let csv = fs::read_to_string(find(&dir.path().join("out"), "pairs.csv")).unwrap();
    assert!(csv.starts_with("i,j,d_sphere,d_hybrid"));
    assert_eq!(csv.lines().count(), 1 + 20 * 20);

    let o = flatlab(
        &["query", "--threads", t, "--x", "1,1,0", "--y", "1,0,0"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    let o = flatlab(
        &["query", "--threads", t, "--x", "1,0,0,0", "--y", "1,0,0,0"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn budget_with_imaginary_height_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = flatlab(
        &["budget", "--rho", "1", "--diam", "0.4", "--vol", "1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("h = sqrt(2 rho diam - rho^2)"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn direct_budget_reports_heights() {
    let dir = tempfile::tempdir().unwrap();
    let pi = std::f64::consts::PI.to_string();
    let o = flatlab(
        &[
            "budget",
            "--rho",
            "0.1",
            "--diam",
            &pi,
            "--vol",
            "12.566370614359172",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: Value = serde_json::from_str(
        &fs::read_to_string(find(&dir.path().join("out"), "filling.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(doc["schema"], "filling/1");
    let dgh = doc["dGH_bound"].as_f64().unwrap();
    assert!(
        (dgh - (1.6655091954768282 + 0.2 * std::f64::consts::PI + 0.7863323284197075)).abs()
            < 1e-12
    );
}

#[test]
fn profile_and_threaded_budget() {
    let dir = tempfile::tempdir().unwrap();
    let (_, threads) = net_and_threads(dir.path());
    let o = flatlab(
        &[
            "profile", "--m", "2", "--rho0", "0.005", "--rho", "0.028", "--L", "0.5", "--out", "p",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let run = find(&dir.path().join("p"), "profile.json")
        .parent()
        .unwrap()
        .to_path_buf();
    let csv = fs::read_to_string(run.join("profile.csv")).unwrap();
    assert!(csv.starts_with("s,r,r_prime,r_double_prime,scalar_curvature"));
    assert!(run.join("profile.obj").exists());

    let profile = run.join("profile.json");
    let o = flatlab(
        &[
            "budget",
            "--threads",
            threads.to_str().unwrap(),
            "--profile",
            profile.to_str().unwrap(),
            "--out",
            "b",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: Value = serde_json::from_str(
        &fs::read_to_string(find(&dir.path().join("b"), "budget.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(doc["schema"], "budget/1");
    assert_eq!(doc["K"], 10);
}

#[test]
fn psc_gate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = flatlab(
        &[
            "profile", "--m", "3", "--rho0", "1e-4", "--rho", "0.1", "--L", "1",
        ],
        dir.path(),
    );
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    let bad = flatlab(
        &[
            "profile", "--m", "3", "--rho0", "0.02", "--rho", "0.1", "--L", "1",
        ],
        dir.path(),
    );
    assert_eq!(bad.status.code(), Some(4));
    assert!(stderr(&bad).contains("at s ="));
    let short = flatlab(
        &[
            "profile", "--m", "3", "--rho0", "0.02", "--rho", "0.1", "--L", "0.01",
        ],
        dir.path(),
    );
    assert_eq!(short.status.code(), Some(3));
    assert!(stderr(&short).contains("minimal"), "{}", stderr(&short));
}

#[test]
fn schema_mismatch_and_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    let (_, threads) = net_and_threads(dir.path());
    let o = flatlab(&["threads", "--net", threads.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("schema"));
    let o = flatlab(
        &["net", "--m", "2", "--eps", "0.5", "--colour", "red"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    let o = flatlab(&["net", "--m", "2", "--eps", "4"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("wall_ms");
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

fn verify(dir: &Path, out: &str, extra: &[&str]) -> (Output, Value) {
    fs::write(
        dir.join("run.cfg"),
        "m = 2\nschedule = 0.7, 0.5\nseeds = 7\nsample_size = 300\n",
    )
    .unwrap();
    let mut args = vec!["verify", "--config", "run.cfg", "--out", out];
    args.extend_from_slice(extra);
    let o = flatlab(&args, dir);
    let text = fs::read_to_string(find(&dir.join(out), "report.json")).unwrap();
    (o, serde_json::from_str(&text).unwrap())
}

#[test]
fn verify_is_deterministic_and_reportable() {
    let dir = tempfile::tempdir().unwrap();
    let (first, mut a) = verify(dir.path(), "runs/a", &[]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    assert_eq!(a["schema"], "report/1");
    let rows = a["per_eps"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["stats"]["twelve_eps_ok"] == true));

    let (_, mut b) = verify(dir.path(), "runs/b", &[]);
    strip_timing(&mut a);
    strip_timing(&mut b);
    assert_eq!(a, b);

    let csv = fs::read_to_string(find(&dir.path().join("runs/a"), "report.csv")).unwrap();
    assert!(csv.starts_with(
        "eps,N,K,sup_dev,max_ratio,min_ratio,gh_est,dF_budget,dGH_budget,seed,wall_ms"
    ));
    assert!(find(&dir.path().join("runs/a"), "plot.csv").exists());

    let o = flatlab(
        &["report", "--runs", "runs", "--out", "summary"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("2 runs, 2 with all gates ok"));
    let summary: Value = serde_json::from_str(
        &fs::read_to_string(find(&dir.path().join("summary"), "summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 2);
}

#[test]
fn verify_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let (o, report) = verify(
        dir.path(),
        "set",
        &["--set", r#"{"seeds": [3, 4], "sample_size": 50}"#],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(report["seeds"], serde_json::json!([3, 4]));
    assert_eq!(report["per_eps"].as_array().unwrap().len(), 4);

    let o = Command::new(env!("CARGO_BIN_EXE_flatlab"))
        .args(["verify", "--config", "run.cfg", "--out", "env"])
        .current_dir(dir.path())
        .env("FLATLAB_SEED", "11")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg: Value = serde_json::from_str(
        &fs::read_to_string(find(&dir.path().join("env"), "config.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(cfg["seeds"], serde_json::json!([11]));

    fs::write(dir.path().join("bad.cfg"), "schedule = 0.5, 0.7\n").unwrap();
    let o = flatlab(&["verify", "--config", "bad.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    fs::write(dir.path().join("junk.cfg"), "this is not a config\n").unwrap();
    let o = flatlab(&["verify", "--config", "junk.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn net_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (net, _) = net_and_threads(dir.path());
    let text = fs::read_to_string(&net).unwrap();
    let doc: flatlab::sphere::NetDocument =
        flatlab::artifact::from_json_str(&text, "net/1").unwrap();
    let back = flatlab::sphere::Net::try_from(doc).unwrap();
    assert_eq!(
        flatlab::artifact::to_json_string(&back.to_document()).unwrap() + "\n",
        text
    );
    assert_eq!(back, flatlab::sphere::build_net(2, 0.7, 7).unwrap());
}
