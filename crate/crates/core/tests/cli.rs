use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_midhaul"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn plan_is_deterministic() {
    let cfg = data("example3x6").join("run.cfg");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = run(&["plan", "--config", s(&cfg), "--out", s(dir.path())]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["plan.json", "plan.txt", "metrics.csv"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file} differs between runs");
    }
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.path().join("plan.json")).unwrap()).unwrap();
    assert_eq!(json["feasible"], true);
    assert_eq!(json["links"].as_array().unwrap().len(), 6);
}

#[test]
fn missing_trace_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = data("example3x6").join("nodes.csv");
    let missing = dir.path().join("no_such_trace.csv");
    let out = run(&["plan", "--nodes", s(&nodes), "--trace", s(&missing), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_trace.csv"));
}

#[test]
fn generated_scene_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::copy(data("scene8x36").join("run.cfg"), &cfg).unwrap();
    let gen = run(&["generate-scene", "--config", s(&cfg), "--out", s(dir.path())]);
    assert!(gen.status.success());
    for f in ["scene.cfg", "nodes.csv", "trace.csv"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let out = run(&["sweep-cus", "1,2,3", "--config", s(&cfg), "--out", s(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut mins = Vec::new();
    for k in 1..=3 {
        let text = std::fs::read_to_string(dir.path().join(format!("metrics_{k}cu.csv"))).unwrap();
        let links = midhaul::report::parse_metrics_csv(&text).unwrap();
        let min = if links.len() < 36 {
            0.0
        } else {
            links.iter().map(|l| l.rate_bps).fold(f64::INFINITY, f64::min)
        };
        mins.push(min);
    }
    assert!(mins.windows(2).all(|w| w[1] >= w[0]), "{mins:?}");
    let plot = std::fs::read_to_string(dir.path().join("plot_data.csv")).unwrap();
    assert_eq!(plot.lines().count(), 37);
    assert!(plot.starts_with("du_index,du_id,sinr_db_1cu,sinr_db_2cu,sinr_db_3cu,rate_bps_1cu"));
}

#[test]
fn generated_scene_matches_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["generate-scene", "--config", s(&data("scene8x36").join("run.cfg")), "--out", s(dir.path())]);
    assert!(out.status.success());
    for f in ["nodes.csv", "trace.csv", "scene.cfg"] {
        assert_eq!(
            std::fs::read(dir.path().join(f)).unwrap(),
            std::fs::read(data("scene8x36").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_cfg = dir.path().join("bad.cfg");
    std::fs::write(&bad_cfg, "carrier_hz = soon\n").unwrap();
    assert_eq!(run(&["plan", "--config", s(&bad_cfg)]).status.code(), Some(2));

    let bad_trace = dir.path().join("trace.csv");
    std::fs::write(&bad_trace, "path_id,cu_id\n1,CU1\n").unwrap();
    let nodes = data("example3x6").join("nodes.csv");
    let out = run(&["validate-trace", "--nodes", s(&nodes), "--trace", s(&bad_trace)]);
    assert_eq!(out.status.code(), Some(5));

    let ok = run(&[
        "validate-trace",
        "--nodes",
        s(&nodes),
        "--trace",
        s(&data("example3x6").join("trace.csv")),
    ]);
    assert!(ok.status.success());

    let strict = dir.path().join("strict.cfg");
    std::fs::write(
        &strict,
        format!(
            "rate_target_bps = 20e9\nnodes = {}\ntrace = {}\n",
            s(&nodes),
            s(&data("example3x6").join("trace.csv"))
        ),
    )
    .unwrap();
    let out = run(&["plan", "--config", s(&strict), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("plan.json").exists());
}

#[test]
fn array_sweep_and_zf_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data("scene8x36").join("run.cfg");
    let out = run(&["sweep-arrays", "8x8,16x16", "--cus", "3", "--config", s(&cfg), "--out", s(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("array_sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);

    // 256-element DUs cannot satisfy the zero-forcing antenna condition
    let out = run(&["plan", "--precoder", "zf", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zero forcing"));
}
