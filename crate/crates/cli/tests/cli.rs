use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const VERTICAL_EXAMPLE: &str = "consumer_id,A,B,C\n1,0.90,0.70,0.60\n2,0.55,0.70,0.90\n3,0.65,0.70,0.60\n";

fn verfair(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_verfair"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn run_writes_slates_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let rel = write(dir.path(), "rel.csv", VERTICAL_EXAMPLE);
    let slates = dir.path().join("slates.csv");
    let metrics = dir.path().join("metrics.csv");
    let out = verfair(&[
        "run",
        "--relevance",
        s(&rel),
        "--method",
        "verfair-ind",
        "--alpha",
        "1",
        "--eta",
        "0",
        "--k",
        "2",
        "--order",
        "dataset",
        "--out",
        s(&slates),
        "--metrics",
        s(&metrics),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let dump = fs::read_to_string(&slates).unwrap();
    let rows: Vec<&str> = dump.lines().skip(2).collect();
    assert_eq!(
        rows,
        [
            "1,1,A,allocation",
            "1,2,B,allocation",
            "2,1,C,allocation",
            "2,2,A,allocation",
            "3,1,B,allocation",
            "3,2,C,allocation",
        ]
    );
    let metrics = fs::read_to_string(&metrics).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,param,eta,k,ndcg@1,ndcg@3,ndcg@10,fairness_ind,fairness_group,wall_ms_per_1k"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..5], ["verfair-ind", "1", "0", "2", "1"]);
    assert_eq!(row[7], "1");
}

#[test]
fn run_prints_metrics_without_path() {
    let dir = tempfile::tempdir().unwrap();
    let rel = write(dir.path(), "rel.csv", VERTICAL_EXAMPLE);
    let slates = dir.path().join("slates.csv");
    let out = verfair(&[
        "run",
        "--relevance",
        s(&rel),
        "--method",
        "top-k",
        "--k",
        "2",
        "--out",
        s(&slates),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("top-k,,1,2,1,,,"));
}

#[test]
fn gen_sweep_dump_and_bench_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let rel = dir.path().join("rel.csv");
    let groups = dir.path().join("groups.csv");
    let out = verfair(&[
        "gen",
        "--consumers",
        "200",
        "--items",
        "30",
        "--dist",
        "beta:2,5",
        "--seed",
        "4",
        "--out",
        s(&rel),
        "--n-groups",
        "4",
        "--groups-out",
        s(&groups),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(fs::read_to_string(&rel).unwrap().lines().count(), 201);
    assert_eq!(fs::read_to_string(&groups).unwrap().lines().count(), 31);

    let sweep = dir.path().join("sweep.csv");
    let out = verfair(&[
        "sweep",
        "--relevance",
        s(&rel),
        "--groups",
        s(&groups),
        "--method",
        "verfair-group",
        "--grid",
        "1,0,0.5",
        "--k",
        "10",
        "--seed",
        "4",
        "--out",
        s(&sweep),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&sweep).unwrap();
    let params: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(params, ["0", "0.5", "1"]);

    let slates = dir.path().join("slates.csv");
    let out = verfair(&[
        "run",
        "--relevance",
        s(&rel),
        "--groups",
        s(&groups),
        "--method",
        "verfair-ind",
        "--alpha",
        "0.5",
        "--k",
        "5",
        "--out",
        s(&slates),
        "--metrics",
        s(&dir.path().join("m.csv")),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = verfair(&["dump", "--relevance", s(&rel), "--slates", s(&slates)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "item_id,avg_relevance,exposure,quota_at_alpha"
    );
    assert_eq!(text.lines().count(), 31);
    let exposure: f64 = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .sum();
    let probs: f64 = (1..=5).map(|j| 1.0 / ((1 + j) as f64).log2()).sum();
    assert!((exposure - 200.0 * probs).abs() < 1e-6);

    let out = verfair(&[
        "bench",
        "--relevance",
        s(&rel),
        "--methods",
        "top-k,verfair-ind,fairco",
        "--alpha",
        "1",
        "--k",
        "5",
        "--repeat",
        "3",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 4);
}

#[test]
fn invalid_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let rel = write(dir.path(), "rel.csv", VERTICAL_EXAMPLE);
    let ragged = write(dir.path(), "ragged.csv", "consumer_id,A,B\n1,0.5\n");
    let slates = dir.path().join("slates.csv");
    let cases: Vec<Vec<&str>> = vec![
        vec![
            "run",
            "--relevance",
            s(&rel),
            "--method",
            "verfair-ind",
            "--lambda",
            "1",
            "--k",
            "2",
            "--out",
            s(&slates),
        ],
        vec![
            "run",
            "--relevance",
            s(&rel),
            "--method",
            "verfair-ind",
            "--alpha",
            "1.5",
            "--k",
            "2",
            "--out",
            s(&slates),
        ],
        vec![
            "run",
            "--relevance",
            s(&rel),
            "--method",
            "top-k",
            "--k",
            "4",
            "--out",
            s(&slates),
        ],
        vec![
            "run",
            "--relevance",
            s(&ragged),
            "--method",
            "top-k",
            "--k",
            "1",
            "--out",
            s(&slates),
        ],
        vec![
            "run",
            "--relevance",
            "/nonexistent/rel.csv",
            "--method",
            "top-k",
            "--k",
            "1",
            "--out",
            s(&slates),
        ],
        vec![
            "run",
            "--relevance",
            s(&rel),
            "--method",
            "no-such",
            "--k",
            "1",
            "--out",
            s(&slates),
        ],
        vec![
            "sweep",
            "--relevance",
            s(&rel),
            "--method",
            "top-k",
            "--grid",
            "0",
            "--k",
            "2",
        ],
        vec![
            "bench",
            "--relevance",
            s(&rel),
            "--methods",
            "top-k",
            "--k",
            "2",
            "--repeat",
            "1",
        ],
        vec![
            "gen",
            "--consumers",
            "0",
            "--items",
            "3",
            "--out",
            s(&slates),
        ],
    ];
    for args in cases {
        let out = verfair(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn dump_rejects_unknown_items() {
    let dir = tempfile::tempdir().unwrap();
    let rel = write(dir.path(), "rel.csv", VERTICAL_EXAMPLE);
    let slates = write(
        dir.path(),
        "slates.csv",
        "#method=top-k,eta=1,k=1\nconsumer_id,rank,item_id,phase_tag\n1,1,Z,direct\n",
    );
    let out = verfair(&["dump", "--relevance", s(&rel), "--slates", s(&slates)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`Z`"));
}
