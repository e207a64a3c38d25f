use std::fs;
use std::process::Command;

use cp_hedge::adversaries::{self, SigmaSchedule};
use cp_hedge::harness::{self, AdversarySpec, ExperimentConfig, RunSummary};
use cp_hedge::PotentialSpec;

fn nh_config(n: usize, t: usize, out: &std::path::Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(
        PotentialSpec::normalhedge(1.0, n).unwrap(),
        n,
        t,
        AdversarySpec::RandomWalk { sigma: 0.5 },
    );
    c.seed = 7;
    c.output = out.to_path_buf();
    c
}

#[test]
fn rounds_csv_shape_and_summary_consistency() {
    let dir = tempfile::tempdir().unwrap();
    let c = nh_config(4, 3, dir.path());
    let reports = harness::run(&c).unwrap();
    let rep = &reports[0];
    let text = fs::read_to_string(rep.rounds_csv.as_ref().unwrap()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(
        lines[0],
        "round,t,delta_t,v_increment,V,log_phi_total,alg_loss,regret_eps_0.1,regret_eps_0.25,regret_eps_0.5"
    );
    let last: Vec<&str> = lines[3].split(',').collect();
    assert_eq!(last[1].parse::<f64>().unwrap(), rep.summary.final_t);
    assert_eq!(last[4].parse::<f64>().unwrap(), rep.summary.v_t);

    let summary: RunSummary =
        serde_json::from_str(&fs::read_to_string(rep.summary_json.as_ref().unwrap()).unwrap()).unwrap();
    assert_eq!(summary, rep.summary);
    for e in &summary.regret {
        assert_eq!(e.regret, cp_hedge::engine::quantile_regret(&summary.final_x, e.eps));
    }
}

#[test]
fn single_expert_run_keeps_time_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let c = nh_config(1, 50, dir.path());
    let rep = &harness::run(&c).unwrap()[0];
    assert_eq!(rep.summary.final_t, c.spec.t0());
    assert_eq!(rep.summary.v_t, 0.0);
}

#[test]
fn repeats_use_consecutive_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = nh_config(3, 5, dir.path());
    c.repeats = 3;
    let reps = harness::run(&c).unwrap();
    assert_eq!(reps.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![7, 8, 9]);
    for s in 7..10 {
        assert!(dir.path().join(format!("rounds_seed{s}.csv")).exists());
    }
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = nh_config(5, 10, dir.path());
    c.audit = true;
    c.eps_grid = vec![0.2, 0.4];
    let path = dir.path().join("config.json");
    harness::emit_config(&c, &path).unwrap();
    assert_eq!(harness::load_config(&path).unwrap(), c);
}

#[test]
fn csv_adversary_replays_a_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let schedule = SigmaSchedule::constant(0.5, 25, 1.0).unwrap();
    let m = adversaries::random_walk(&schedule, 6, 3).unwrap();
    let loss_path = dir.path().join("losses.csv");
    m.write_csv(&loss_path).unwrap();

    let mut generated = nh_config(6, 25, &dir.path().join("a"));
    generated.seed = 3;
    let mut replayed = generated.clone();
    replayed.adversary = AdversarySpec::Csv { path: loss_path };
    replayed.output = dir.path().join("b");
    let a = &harness::run(&generated).unwrap()[0];
    let b = &harness::run(&replayed).unwrap()[0];
    assert_eq!(a.summary.final_x, b.summary.final_x);
    assert_eq!(a.summary.final_t, b.summary.final_t);
}

#[test]
fn audit_of_a_default_run_passes() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = nh_config(8, 200, dir.path());
    c.audit = true;
    let rep = &harness::run(&c).unwrap()[0];
    assert!(rep.certificates_hold());
    assert!(dir.path().join("certificates_seed7.json").exists());
    let counts = rep.summary.certificates.unwrap();
    assert_eq!(counts.failed, 0);
    assert_eq!(counts.total, rep.certificates.len());
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cphedge"))
}

#[test]
fn cli_run_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"version": 1, "kind": "exponential", "eta": 0.2, "N": 3, "T": 40, "B": 1,
            "adversary": "two_phase_leader", "gap": 0.5, "seed": 2}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = cli()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("summary_seed2.json").exists());

    let status = cli().args(["verify", "--config"]).arg(&cfg).status().unwrap();
    assert!(status.success());

    fs::write(&cfg, r#"{"kind": "exponential", "N": 3, "T": 4, "B": 1, "adversary": "random_walk", "sigma": 0.5}"#)
        .unwrap();
    let o = cli().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("eta"));
}

#[test]
fn cli_bounds_and_lowerbound() {
    let o = cli()
        .args(["bounds", "--kind", "normalhedge", "--eps", "0.1,0.5", "--vt", "100", "--n", "10"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);

    let o = cli()
        .args(["lowerbound", "--eps", "0.25", "--n", "8", "--sigma", "0.5", "--t", "30", "--repeats", "2", "--seed", "1"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["rows"][0]["reference"]["vacuous"], true);
}
