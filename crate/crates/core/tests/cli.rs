mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bnrobot::coupling::random_controller_network;
use bnrobot::harness::{config_from_json, ExperimentConfig};
use bnrobot::netfile;
use bnrobot::search::{Descent, LOG_HEADER};
use tempfile::TempDir;

const TINY: &str = r#"{
  "runs": 3,
  "test_set_size": 4,
  "master_seed": 7,
  "search": {
    "total_iterations": 120,
    "stage1_iterations": 40,
    "stage1_horizon": 200,
    "stage2_horizon": 400,
    "clap_window": [150, 250],
    "training_set_size": 3
  }
}"#;

fn bnrobot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bnrobot"))
        .args(args)
        .env_remove("BNROBOT_SEED")
        .env_remove("BNROBOT_OUT")
        .env_remove("BNROBOT_PARALLELISM")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("tiny.json");
    fs::write(&path, TINY).unwrap();
    path.to_string_lossy().into_owned()
}

fn read_tree(dir: &Path, sub: &str) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir.join(sub))
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn design_writes_outputs_and_reruns_from_manifest() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path());
    let a = tmp.path().join("a");
    let o = bnrobot(&[
        "design",
        "--config",
        &config,
        "--out",
        a.to_str().unwrap(),
        "-q",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let networks = read_tree(&a, "networks");
    assert_eq!(networks.len(), 3);
    assert_eq!(networks[0].0, "run_00.json");
    for (_, bytes) in &networks {
        let net = netfile::from_json(std::str::from_utf8(bytes).unwrap()).unwrap();
        assert_eq!(net.n(), 20);
    }
    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.starts_with("run,train_median,test_median,test_q1,test_q3,success\n"));
    let trials = fs::read_to_string(a.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 1 + 3 * 4);
    let log = fs::read_to_string(a.join("logs/run_01.csv")).unwrap();
    assert_eq!(log.lines().next().unwrap(), LOG_HEADER);
    assert_eq!(log.lines().count(), 121);

    let manifest_path = a.join("manifest.json");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest["seeds"]["master"], 7);
    assert_eq!(manifest["seeds"]["runs"].as_array().unwrap().len(), 3);
    assert_eq!(manifest["outputs"]["networks"][2], "networks/run_02.json");

    let b = tmp.path().join("b");
    let o = bnrobot(&[
        "design",
        "--config",
        manifest_path.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "--parallelism",
        "2",
        "-q",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(a.join("summary.csv")).unwrap(),
        fs::read(b.join("summary.csv")).unwrap()
    );
    assert_eq!(networks, read_tree(&b, "networks"));
    assert_eq!(read_tree(&a, "logs"), read_tree(&b, "logs"));
}

#[test]
fn json_format_and_seed_override() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path());
    let out = tmp.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_bnrobot"))
        .args([
            "design", "--config", &config, "--format", "json", "--runs", "1", "-q",
        ])
        .env("BNROBOT_SEED", "99")
        .env("BNROBOT_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 1);
    assert!(summary[0]["test_median"].is_f64());
    let trials: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("trials.json")).unwrap()).unwrap();
    assert_eq!(trials.as_array().unwrap().len(), 4);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["master_seed"], 99);
}

#[test]
fn invalid_config_names_the_field() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("bad.json");
    fs::write(&path, r#"{"search": {"stage1_iterations": 30000}}"#).unwrap();
    let o = bnrobot(&[
        "design",
        "--config",
        path.to_str().unwrap(),
        "--out",
        "unused",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("search.stage1_iterations"),
        "{}",
        stderr(&o)
    );

    fs::write(
        &path,
        "{\n  \"runs\": 2,\n  \"search\": {\"nodes\": \"many\"}\n}",
    )
    .unwrap();
    let o = bnrobot(&[
        "design",
        "--config",
        path.to_str().unwrap(),
        "--out",
        "unused",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nodes"), "{}", stderr(&o));

    fs::write(&path, r#"{"arena": {"wheel_speed": -1}}"#).unwrap();
    let o = bnrobot(&[
        "design",
        "--config",
        path.to_str().unwrap(),
        "--out",
        "unused",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("arena.wheel_speed"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path());
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = bnrobot(&[
        "design",
        "--config",
        &config,
        "--out",
        blocker.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn resume_from_checkpoint_matches_an_uninterrupted_run() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path());
    let cfg: ExperimentConfig = config_from_json(TINY).unwrap();
    let whole = tmp.path().join("whole");
    let o = bnrobot(&[
        "design",
        "--config",
        &config,
        "--out",
        whole.to_str().unwrap(),
        "-q",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    // Simulate an interrupted run: run 1 stopped after 70 iterations with a
    // checkpoint at 60, leaving ten log rows past the checkpoint.
    let part = tmp.path().join("part");
    for sub in ["checkpoints", "logs"] {
        fs::create_dir_all(part.join(sub)).unwrap();
    }
    let mut d = Descent::new(&cfg.run_search(1), &cfg.arena).unwrap();
    let mut log = format!("{LOG_HEADER}\n");
    let mut checkpoint = None;
    for _ in 0..70 {
        d.advance(&mut |r| log.push_str(&(r.csv_row() + "\n")))
            .unwrap();
        if d.iteration() == 60 {
            checkpoint = Some(d.checkpoint());
        }
    }
    checkpoint
        .unwrap()
        .save(&part.join("checkpoints/run_01.json"))
        .unwrap();
    fs::write(part.join("logs/run_01.csv"), log).unwrap();

    let o = bnrobot(&[
        "design",
        "--config",
        &config,
        "--out",
        part.to_str().unwrap(),
        "--resume",
        "--checkpoint-every",
        "25",
        "-q",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(whole.join("summary.csv")).unwrap(),
        fs::read(part.join("summary.csv")).unwrap()
    );
    assert_eq!(read_tree(&whole, "networks"), read_tree(&part, "networks"));
    assert_eq!(read_tree(&whole, "logs"), read_tree(&part, "logs"));
}

fn stopped_network_file(dir: &Path) -> String {
    let mut net = random_controller_network(20, 3, 1).unwrap();
    for node in 0..20 {
        for row in 0..8 {
            if net.table(node).get(row) {
                net.toggle_table_bit(node, row).unwrap();
            }
        }
    }
    let path = dir.join("stop.json");
    netfile::save(&net, &path).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn simulate_stopped_robot_prints_one() {
    let tmp = TempDir::new().unwrap();
    let net = stopped_network_file(tmp.path());
    let o = bnrobot(&["simulate", "--network", &net, "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let values: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(values[0], "1");

    let o = bnrobot(&["simulate", "--network", &net, "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["error"], 1.0);
}

#[test]
fn simulate_validates_clap_step() {
    let tmp = TempDir::new().unwrap();
    let net = stopped_network_file(tmp.path());
    for bad in ["0", "1000", "1500"] {
        let o = bnrobot(&["simulate", "--network", &net, "--t-c", bad]);
        assert_eq!(o.status.code(), Some(2));
        assert!(stderr(&o).contains("--t-c"), "{}", stderr(&o));
    }
    let o = bnrobot(&["simulate", "--network", &net, "--perturb-angle", "-4"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bnrobot(&[
        "simulate",
        "--network",
        &net,
        "--t-c",
        "600",
        "--perturb-angle",
        "-1.5",
        "--perturb-step",
        "10",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().nth(1).unwrap().ends_with(",600,1000"));
}

#[test]
fn simulate_trajectories_are_reproducible() {
    let tmp = TempDir::new().unwrap();
    let net_path = tmp.path().join("net.json");
    netfile::save(&random_controller_network(20, 3, 5).unwrap(), &net_path).unwrap();
    let net = net_path.to_str().unwrap();
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    for out in [&a, &b] {
        let o = bnrobot(&[
            "simulate",
            "--network",
            net,
            "--seed",
            "8",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_eq!(
        text.lines().next().unwrap(),
        "t,x,y,heading,sector,sound,left,right,distance,label"
    );
    assert_eq!(text.lines().count(), 1001);
}

#[test]
fn malformed_network_reports_context() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("net.json");
    let mut file = netfile::NetworkFile::from(&random_controller_network(20, 3, 5).unwrap());
    file.tables[4] = "0101".into();
    fs::write(&path, serde_json::to_string_pretty(&file).unwrap()).unwrap();
    let o = bnrobot(&["simulate", "--network", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tables[4]"), "{}", stderr(&o));

    fs::write(
        &path,
        "{\n  \"format_version\": 1,\n  \"n\": 3,\n  \"inputs\": [\n",
    )
    .unwrap();
    let o = bnrobot(&["analyze", "--network", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    let o = bnrobot(&["analyze", "--network", "/nonexistent/net.json"]);
    assert_eq!(o.status.code(), Some(3));
}

fn analyze_rows(out: &str) -> Vec<Vec<u64>> {
    out.lines()
        .skip(2)
        .map(|l| l.split(',').take(3).map(|f| f.parse().unwrap()).collect())
        .collect()
}

#[test]
fn analyze_small_networks() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("c.json");
    netfile::save(&common::constant(3, false), &path).unwrap();
    let o = bnrobot(&["analyze", "--network", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(analyze_rows(&stdout(&o)), vec![vec![0, 1, 8]]);

    netfile::save(&common::identity(3), &path).unwrap();
    let o = bnrobot(&["analyze", "--network", path.to_str().unwrap()]);
    let rows = analyze_rows(&stdout(&o));
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r[1] == 1 && r[2] == 1));
}

#[test]
fn analyze_designed_network_and_capacity() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path());
    let out = tmp.path().join("out");
    let o = bnrobot(&[
        "design",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--runs",
        "1",
        "-q",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let net = out.join("networks/run_00.json");
    let o = bnrobot(&[
        "analyze",
        "--network",
        net.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let basins: u64 = v["attractors"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["count"].as_u64().unwrap())
        .sum();
    assert_eq!(basins, 1 << 20);

    let big = tmp.path().join("big.json");
    netfile::save(&random_controller_network(30, 3, 2).unwrap(), &big).unwrap();
    let o = bnrobot(&["analyze", "--network", big.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("--samples"), "{}", stderr(&o));
    let o = bnrobot(&[
        "analyze",
        "--network",
        big.to_str().unwrap(),
        "--samples",
        "50",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let hits: u64 = analyze_rows(&stdout(&o)).iter().map(|r| r[2]).sum();
    assert_eq!(hits, 50);
}

#[test]
fn init_config_prints_defaults() {
    let o = bnrobot(&["init-config"]);
    assert!(o.status.success());
    let cfg = config_from_json(&stdout(&o)).unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
    assert_eq!(cfg.search.total_iterations, 25_000);
}
