use std::process::Command;

use blowuplab::config::RunConfig;
use blowuplab::experiment::{execute, execute_all};
use blowuplab::record::{read_series, record_dir, RunRecord, RECORD_FILE};
use blowuplab::report::build_report;

const SWEEP: &str = r#"
name = "sweep"

[domain]
shape = "square"

[partition]
alignment = "dual-cells"

[solver]
q = 2.0
u0 = 0.5
h = 0.1
k_over_h2 = 0.2
threshold = 2.0

[sweep]
gamma1 = [0.6, 0.4, 0.2]
"#;

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_blowuplab"))
}

#[test]
fn sweep_writes_records_and_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_toml_str(SWEEP).unwrap();
    let rec = execute(&cfg, dir.path(), Some(2)).unwrap();
    assert_eq!(rec.rows.len(), 3);
    assert!(rec.rows.iter().all(|r| r.crossed && r.positivity_held));
    let t0: Vec<f64> = rec.rows.iter().map(|r| r.t0.unwrap()).collect();
    assert!(t0[0] < t0[1] && t0[1] < t0[2]);
    assert_eq!(rec.orders.len(), 2);
    assert!(rec.global_order.is_some());
    for r in &rec.rows {
        assert!(r.t0.unwrap() < r.bounds.upper.unwrap());
    }

    let rd = record_dir(dir.path(), &cfg);
    let loaded = RunRecord::load(&rd.join(RECORD_FILE)).unwrap();
    assert_eq!(loaded, rec);
    loaded.check(&rd).unwrap();
    let series = read_series(&rd.join(&rec.rows[0].series_file)).unwrap();
    assert_eq!(series[0].step, 0);
    assert!(series.windows(2).all(|w| w[1].t > w[0].t));
    assert!((series.last().unwrap().max - 2.0).abs() < 0.1);
    let header = std::fs::read_to_string(rd.join(&rec.rows[0].series_file)).unwrap();
    assert!(header.starts_with("step,t,M1,m1\n"));

    // same config, same directory, same numbers
    let again = execute(&cfg, dir.path(), Some(1)).unwrap();
    assert_eq!(again.rows.iter().map(|r| r.t0).collect::<Vec<_>>(), rec.rows.iter().map(|r| r.t0).collect::<Vec<_>>());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);

    let mut tampered = loaded.clone();
    tampered.config.solver.u0 = 0.7;
    assert!(tampered.check(&rd).is_err());
}

#[test]
fn empty_patch_never_crosses() {
    let dir = tempfile::tempdir().unwrap();
    let text = SWEEP.replace("[sweep]\ngamma1 = [0.6, 0.4, 0.2]", "").replace("threshold = 2.0", "threshold = 2.0\nt_max = 0.5");
    let cfg = RunConfig::from_toml_str(&text).unwrap();
    let rec = execute(&cfg, dir.path(), None).unwrap();
    assert!(!rec.rows[0].crossed && rec.rows[0].t0.is_none());
    assert!(rec.rows[0].bounds.upper.is_none());
    assert!(rec.orders.is_empty() && rec.global_order.is_none());
}

#[test]
fn bie_backend_runs_on_the_disk() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
name = "disk"
backend = "bie"

[domain]
shape = "disk"
radius = 1.0

[solver]
q = 2.0
u0 = 0.05
h = 0.1
k = 0.001
threshold = 0.5

[sweep]
gamma1 = [6.283185307179586, 3.141592653589793]

[bie]
nodes = 32
levels = 600
t_end = 30.0
"#;
    let cfg = RunConfig::from_toml_str(text).unwrap();
    let rec = execute(&cfg, dir.path(), None).unwrap();
    let t: Vec<f64> = rec.rows.iter().map(|r| r.t0.unwrap()).collect();
    assert!(t[0] < t[1] && t[0] < 9.0);
    assert!(rec.rows[0].bounds.ps_two_d.is_none());
}

#[test]
fn report_groups_records() {
    let dir = tempfile::tempdir().unwrap();
    let a = RunConfig::from_toml_str(SWEEP).unwrap();
    let b = RunConfig::from_toml_str(&SWEEP.replace("q = 2.0", "q = 3.0").replace("name = \"sweep\"", "name = \"cubic\"")).unwrap();
    let single = RunConfig::from_toml_str(
        &SWEEP.replace("[sweep]\ngamma1 = [0.6, 0.4, 0.2]", "").replace("[partition]", "[partition]\ngamma1 = 0.5").replace("\"square\"", "\"cube\"").replace("k_over_h2 = 0.2", "k_over_h2 = 0.1"),
    )
    .unwrap();
    execute_all(&[a, b, single], dir.path(), None).unwrap();
    let rep = build_report(dir.path()).unwrap();
    assert_eq!(rep.records, 3);
    assert_eq!(rep.groups.len(), 3);
    assert_eq!((rep.groups[0].dimension, rep.groups[0].q), (2, 2.0));
    assert!(rep.groups[0].global_order.is_some());
    let lone = rep.groups.iter().find(|g| g.dimension == 3).unwrap();
    assert!(lone.global_order.is_none());
    let md = rep.to_markdown();
    assert!(md.contains("n = 2, q = 3") && md.contains("Least-squares order"));
    let (m, c) = rep.write(dir.path()).unwrap();
    assert!(m.is_file() && c.is_file());
    assert!(build_report(&dir.path().join("nothing")).is_err());
}

#[test]
fn cli_exit_codes_and_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("sweep.toml");
    std::fs::write(&cfg_path, SWEEP).unwrap();
    let out = dir.path().join("from-env");
    let status = cli().args(["run", "--config"]).arg(&cfg_path).env("BLOWUPLAB_OUT", &out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 1);

    let flag = dir.path().join("from-flag");
    let status = cli().args(["run", "--config"]).arg(&cfg_path).arg("--out").arg(&flag).env("BLOWUPLAB_OUT", &out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(flag.is_dir());

    let o = cli().arg("report").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("Least-squares order"));

    let bad = dir.path().join("cfl.toml");
    std::fs::write(&bad, SWEEP.replace("k_over_h2 = 0.2", "k_over_h2 = 1.0")).unwrap();
    assert_eq!(cli().args(["run", "--config"]).arg(&bad).status().unwrap().code(), Some(3));
    let bad = dir.path().join("schema.toml");
    std::fs::write(&bad, "name = 3").unwrap();
    assert_eq!(cli().args(["run", "--config"]).arg(&bad).status().unwrap().code(), Some(2));
    assert_eq!(cli().args(["verify", "--suite", "nope"]).arg("--out").arg(dir.path()).status().unwrap().code(), Some(2));
    assert_eq!(cli().arg("report").arg(dir.path().join("empty")).status().unwrap().code(), Some(2));

    let o = cli().args(["verify", "--suite", "jumps", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let json = std::fs::read_to_string(dir.path().join("verify-jumps.json")).unwrap();
    let checks: Vec<serde_json::Value> = serde_json::from_str(&json).unwrap();
    assert_eq!(checks.len(), 6);
    assert!(checks.iter().all(|c| c["passed"] == true));

    let o = cli().args(["bounds", "--n", "3", "--q", "3", "--u0", "0.05", "--gamma1", "0.49", "--c-constant", "2"]).output().unwrap();
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["upper"].as_f64().unwrap() - 408.163).abs() < 1e-3);
    assert_eq!(v["c_constant"], 2.0);
}
