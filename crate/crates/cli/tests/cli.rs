use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ctfsyn_cli::{validate_config, ExperimentConfig};
use serde_json::Value;

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sim")).args(args).output().expect("sim runs")
}

fn run_with(recipe: &str, config: Option<&str>, seed: u64, dir: &Path) -> Output {
    let out = dir.join("out");
    let mut args = vec![recipe.to_string(), "--seed".into(), seed.to_string(), "--out".into(), out.display().to_string()];
    if let Some(text) = config {
        let p = dir.join("run.cfg");
        fs::write(&p, text).unwrap();
        args.extend(["--config".into(), p.display().to_string()]);
    }
    sim(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {}", String::from_utf8_lossy(&o.stderr)))
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/manifest.json")).unwrap()).unwrap()
}

fn checksums(m: &Value) -> Vec<(String, String)> {
    m["outputs"].as_array().unwrap().iter().map(|o| (o["file"].as_str().unwrap().into(), o["sha256"].as_str().unwrap().into())).collect()
}

#[test]
fn empty_config_is_all_defaults() {
    assert_eq!(validate_config("").unwrap(), ExperimentConfig::default());
    assert_eq!(validate_config("# nothing here\n\n").unwrap(), ExperimentConfig::default());
}

#[test]
fn negative_pulse_width_names_the_field() {
    let e = validate_config("pulses.program_t_p = -1\n").unwrap_err();
    assert_eq!(e.0.len(), 1);
    assert_eq!(e.0[0].key.as_deref(), Some("pulses.program_t_p"));
    assert_eq!(e.0[0].line, Some(1));
}

#[test]
fn unknown_keys_are_rejected() {
    let e = validate_config("[snn]\nepochz = 3\n").unwrap_err();
    assert_eq!(e.0[0].key.as_deref(), Some("snn.epochz"));
    assert!(e.0[0].message.contains("unknown"));
}

#[test]
fn every_violation_is_reported_with_its_line() {
    let text = "device.rtol = 0\nsnn.epochs = \"many\"\nthis is not valid\ncircuit.v_step = -0.1\nbogus = 1\n";
    let e = validate_config(text).unwrap_err();
    let lines: Vec<_> = e.0.iter().map(|i| i.line).collect();
    assert_eq!(lines, vec![Some(1), Some(2), Some(3), Some(4), Some(5)], "{e}");
    assert!(e.0[2].message.contains("syntax"));
}

#[test]
fn cross_field_problems_point_at_the_setting_line() {
    let e = validate_config("circuit.v_start = 1\ncircuit.v_stop = -1\n").unwrap_err();
    assert!(e.0.iter().any(|i| i.key.as_deref() == Some("circuit.v_stop") && i.line == Some(2)), "{e}");
}

#[test]
fn trajectories_have_two_branches_of_1001_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with("fig2a-trajectories", None, 0, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("out/fig2a_trajectories.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("pulse_index,v_g,t_p,v_t,g_norm"));
    assert_eq!(lines.count(), 2 * 1001);
}

#[test]
fn selector_cell_energy_is_below_three_femtojoules() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_with("fig6-circuit", None, 0, dir.path()).status.success());
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/fig6_energy.json")).unwrap()).unwrap();
    let soi = v["topologies"].as_array().unwrap().iter().find(|t| t["topology"] == "1F2D-SOI").unwrap();
    assert!(soi["e_total_J"].as_f64().unwrap() <= 3e-15, "{soi}");
    assert!(v["min_leakage_ratio_1F0D_bulk_over_1F2D_soi"].as_f64().unwrap() >= 1e6);
}

#[test]
fn manifest_checksums_match_the_files() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_with("fig4-stdp", None, 0, dir.path()).status.success());
    let m = manifest(dir.path());
    assert_eq!(m["recipe"], "fig4-stdp");
    for (file, sum) in checksums(&m) {
        let bytes = fs::read(dir.path().join("out").join(&file)).unwrap();
        assert_eq!(ctfsyn_cli::manifest::sha256_hex(&bytes), sum, "{file}");
    }
}

#[test]
fn reruns_are_bit_identical() {
    let cfg = "[snn]\nseeds = 2\nepochs = 2\nrules = [\"ideal\", \"ctf\"]\nnoise_seeds = 2\n";
    for (recipe, config) in [("fig2b-thresholds", None), ("fig7-snn", Some(cfg))] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        assert!(run_with(recipe, config, 9, a.path()).status.success());
        assert!(run_with(recipe, config, 9, b.path()).status.success());
        let (ma, mb) = (manifest(a.path()), manifest(b.path()));
        assert_eq!(checksums(&ma), checksums(&mb), "{recipe}");
        assert_eq!(ma["config_sha256"], mb["config_sha256"]);
    }
}

#[test]
fn seed_changes_network_results() {
    let cfg = "[snn]\nseeds = 2\nepochs = 1\nrules = [\"ideal\"]\nnoise_seeds = 1\n";
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run_with("fig7-snn", Some(cfg), 1, a.path()).status.success());
    assert!(run_with("fig7-snn", Some(cfg), 2, b.path()).status.success());
    assert_ne!(checksums(&manifest(a.path())), checksums(&manifest(b.path())));
}

#[test]
fn bad_config_exits_nonzero_with_json_issues() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with("fig2a-trajectories", Some("pulses.n_pulses = -5\nwhat = 1\n"), 0, dir.path());
    assert!(!o.status.success());
    let e = stderr_json(&o);
    assert_eq!(e["error"]["kind"], "config");
    assert_eq!(e["error"]["issues"].as_array().unwrap().len(), 2);
}

#[test]
fn unknown_recipe_exits_nonzero_with_json() {
    let o = sim(&["fig9-nothing", "--out", "/tmp/never-written"]);
    assert!(!o.status.success());
    assert!(stderr_json(&o)["error"]["message"].as_str().unwrap().contains("fig9-nothing"));
}

#[test]
fn bad_flags_exit_nonzero_with_json() {
    let o = sim(&["fig4-stdp", "--seed", "minus-one"]);
    assert!(!o.status.success());
    assert_eq!(stderr_json(&o)["error"]["kind"], "usage");
}

#[test]
fn module_errors_propagate_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with("fig2a-trajectories", Some("device.window.v_t_min = -0.2\n"), 0, dir.path());
    assert!(!o.status.success());
    let msg = stderr_json(&o)["error"]["message"].as_str().unwrap().to_string();
    assert!(msg.contains("v_t_min") || msg.contains("window"), "{msg}");
}

#[test]
fn failed_calibration_reports_the_residual_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with("calibrate", Some("[calibrate]\ngate_currents_required = true\nmax_iterations = 20\n"), 0, dir.path());
    assert!(!o.status.success());
    let e = stderr_json(&o);
    assert_eq!(e["error"]["kind"], "recipe");
    let msg = e["error"]["message"].as_str().unwrap();
    assert!(msg.contains("erase_gate_current_A") && msg.contains("residual"), "{msg}");
}

#[test]
fn default_calibration_passes_its_required_targets() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_with("calibrate", None, 0, dir.path()).status.success());
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/calibration.json")).unwrap()).unwrap();
    for r in v["rows"].as_array().unwrap() {
        if r["required"] == true {
            assert_eq!(r["pass"], true, "{r}");
        }
    }
}

#[test]
fn defaults_listing_is_a_valid_config() {
    let o = sim(&["defaults"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(validate_config(&text).unwrap(), ExperimentConfig::default());
    let l = sim(&["list"]);
    assert_eq!(String::from_utf8(l.stdout).unwrap().lines().count(), 8);
}
