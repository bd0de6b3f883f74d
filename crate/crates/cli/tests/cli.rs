use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pabm::graph_model::{draw_params, edge_prob_matrix, sample_adjacency, Adjacency, PopularityPrior};
use pabm::harness::{run_detect, write_edgelist, DetectOptions, Method};

fn pabm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pabm")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Two 6-cliques joined by one edge, plus the matching labels.
fn two_cliques(dir: &Path) {
    let mut edges = String::new();
    for base in [0, 6] {
        for i in 0..6 {
            for j in i + 1..6 {
                edges.push_str(&format!("v{} v{}\n", base + i, base + j));
            }
        }
    }
    edges.push_str("v0 v6\n");
    fs::write(dir.join("edges.txt"), edges).unwrap();
    let mut labels = String::from("vertex,label\n");
    for i in 0..12 {
        labels.push_str(&format!("v{i},{}\n", if i < 6 { "a" } else { "b" }));
    }
    fs::write(dir.join("labels.csv"), labels).unwrap();
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(pabm(&[]).status.code(), Some(1));
    assert_eq!(pabm(&["detect", "--k", "2"]).status.code(), Some(1));
    assert_eq!(pabm(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_exits_two() {
    let out = pabm(&["detect", "--edges", "/nonexistent/edges.txt", "--k", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn malformed_edge_list_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.txt");
    fs::write(&file, "a b\nb c d\n").unwrap();
    let out = pabm(&["detect", "--edges", path(&file), "--k", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2"));
}

#[test]
fn tau_requires_threshold_partition() {
    let dir = tempfile::tempdir().unwrap();
    two_cliques(dir.path());
    let edges = dir.path().join("edges.txt");
    let out = pabm(&["detect", "--edges", path(&edges), "--k", "2", "--tau", "0.1"]);
    assert_eq!(out.status.code(), Some(1));
}

/// A sampled two-community graph written as an edge list with its labels.
fn sampled_graph(dir: &Path, n: usize) -> (Adjacency, Vec<usize>) {
    let params = draw_params(n, 2, &PopularityPrior::default(), 12).unwrap();
    let a = sample_adjacency(&edge_prob_matrix(&params), 12);
    let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let mut buf = Vec::new();
    write_edgelist(&a, Some(&names), &mut buf).unwrap();
    fs::write(dir.join("sampled.txt"), buf).unwrap();
    let labels: String = std::iter::once("vertex,label\n".to_string())
        .chain(params.labels().iter().enumerate().map(|(i, l)| format!("v{i},{l}\n")))
        .collect();
    fs::write(dir.join("sampled_labels.csv"), labels).unwrap();
    (a, params.labels().to_vec())
}

#[test]
fn detect_reports_labels_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (a, _) = sampled_graph(dir.path(), 300);
    let (edges, labels) = (dir.path().join("sampled.txt"), dir.path().join("sampled_labels.csv"));
    let (out, report) = (dir.path().join("pred.csv"), dir.path().join("report.json"));
    let res = pabm(&[
        "detect", "--edges", path(&edges), "--k", "2", "--labels", path(&labels), "--out", path(&out), "--report",
        path(&report),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let pred = fs::read_to_string(&out).unwrap();
    let mut lines = pred.lines();
    assert_eq!(lines.next(), Some("vertex,label"));
    let ids: Vec<&str> = lines.map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(ids.len(), a.degrees().iter().filter(|&&d| d > 0).count());
    assert!(ids.iter().all(|&l| l == "1" || l == "2"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["edges"], a.edge_count());
    assert!(json["report"]["miscluster_rate"].as_f64().unwrap() < 0.2);
}

#[test]
fn estimate_writes_popularities_and_p_hat() {
    let dir = tempfile::tempdir().unwrap();
    two_cliques(dir.path());
    let (edges, labels) = (dir.path().join("edges.txt"), dir.path().join("labels.csv"));
    let (out, p_hat) = (dir.path().join("lambda.csv"), dir.path().join("p.csv"));
    for route in ["blockwise", "label-free"] {
        let res = pabm(&[
            "estimate", "--edges", path(&edges), "--k", "2", "--labels", path(&labels), "--out", path(&out),
            "--p-hat", path(&p_hat), "--route", route,
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        let lambda = fs::read_to_string(&out).unwrap();
        assert!(lambda.starts_with("vertex,community,lambda_1,lambda_2"));
        assert_eq!(lambda.lines().count(), 13);
        let p = fs::read_to_string(&p_hat).unwrap();
        assert_eq!(p.lines().count(), 12);
        assert!(p.lines().all(|l| l.split(',').count() == 12));
    }
}

#[test]
fn eval_matches_library_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (a, truth) = sampled_graph(dir.path(), 200);
    let sim: String = a
        .matrix()
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    let labels: String = truth.iter().map(|l| format!("class{l}\n")).collect();
    fs::write(dir.path().join("sim.csv"), sim).unwrap();
    fs::write(dir.path().join("labels.txt"), labels).unwrap();
    let out = dir.path().join("eval.json");
    let res = pabm(&[
        "eval",
        "--similarity",
        path(&dir.path().join("sim.csv")),
        "--labels",
        path(&dir.path().join("labels.txt")),
        "--top-classes",
        "2",
        "--threshold",
        "0.5",
        "--out",
        path(&out),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(json["vertices"], 200);
    assert_eq!(json["edges"], a.edge_count());
    let direct = run_detect(a.matrix().view(), 2, &DetectOptions::new(Method::Osc), Some(&truth))
        .unwrap()
        .report
        .unwrap();
    assert_eq!(json["miscluster_count"], direct.miscluster_count);
    assert!((json["ari"].as_f64().unwrap() - direct.ari).abs() < 1e-12);
}

#[test]
fn simulate_and_sweep_produce_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let res = pabm(&[
        "simulate", "--seed", "3", "--n-list", "40", "--k-list", "2", "--replicates", "2", "--method", "both", "--out",
        path(dir.path()),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let records = fs::read_to_string(dir.path().join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 1 + 4);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["cells"].as_array().unwrap().len(), 2);

    let sweep = dir.path().join("sweep.csv");
    let res = pabm(&["sweep-theta", "--k", "2", "--n", "40", "--points", "3", "--out", path(&sweep)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rows = fs::read_to_string(&sweep).unwrap();
    assert!(rows.starts_with("replicate,theta,miscluster_count,miscluster_rate,ari,error"));
    assert_eq!(rows.lines().count(), 4);
}
