use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sspdsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sspdsim"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SSPDSIM_OUT")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn tmm_spectrum_writes_one_row_per_wavelength() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.cfg"), "experiment = tmm-spectrum\nspectrum.points = 81\n").unwrap();
    let o = sspdsim(&["run", "s.cfg", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("out/spectrum.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 82);
    assert_eq!(
        lines[0],
        "wavelength_nm,reflectance,transmittance,absorption_layer1,absorption_layer2"
    );
}

#[test]
fn unknown_experiment_exits_2_and_lists_kinds() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.cfg"), "experiment = warp-drive\n").unwrap();
    let o = sspdsim(&["run", "s.cfg", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for kind in sspdsim::config::EXPERIMENTS {
        assert!(err.contains(kind), "{err}");
    }
}

#[test]
fn unknown_key_exits_2_naming_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.cfg"), "# header\nexperiment = count-rate\ndetector.Ic_uA = 30\n").unwrap();
    let o = sspdsim(&["run", "s.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 3") && err.contains("detector.Ic_uA"), "{err}");
}

#[test]
fn invalid_value_exits_2_and_missing_file_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.cfg"), "experiment = count-rate\ndetector.tau_ns = fast\n").unwrap();
    let o = sspdsim(&["run", "s.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    assert_eq!(sspdsim(&["run", "missing.cfg"], dir.path()).status.code(), Some(4));
}

#[test]
fn numeric_failure_exits_3() {
    // A 0.1 ns grid cannot resolve 62 ps jitter.
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.cfg"), "experiment = g2-model\ng2.spacing_ns = 0.1\n").unwrap();
    let o = sspdsim(&["run", "s.cfg", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("too coarse"));
}

#[test]
fn unwritable_output_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("blocker"), "").unwrap();
    fs::write(dir.path().join("s.cfg"), "experiment = tmm-spectrum\n").unwrap();
    let o = sspdsim(&["run", "s.cfg", "--out", "blocker/out"], dir.path());
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn same_config_and_seed_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("s.cfg"),
        "experiment = lifetime-sim\ntcspc.target_counts = 20000\n",
    )
    .unwrap();
    for out in ["a", "b"] {
        let o = sspdsim(&["run", "s.cfg", "--out", out, "--seed", "5"], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["decay.csv", "diagnostics.jsonl", "effective_config.cfg"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let o = sspdsim(&["run", "s.cfg", "--out", "c", "--seed", "6"], dir.path());
    assert!(o.status.success());
    assert_ne!(
        fs::read(dir.path().join("a/decay.csv")).unwrap(),
        fs::read(dir.path().join("c/decay.csv")).unwrap()
    );
}

#[test]
fn effective_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.cfg"), "experiment = g2-model\n").unwrap();
    let o = sspdsim(
        &["run", "s.cfg", "--out", "a", "--set", "emitter.lifetime_ns=5", "--seed", "3"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = sspdsim(&["run", "a/effective_config.cfg", "--out", "b"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["g2_ideal.csv", "g2_measured.csv", "g2_compensated.csv", "effective_config.cfg"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let manifest = fs::read_to_string(dir.path().join("a/manifest.jsonl")).unwrap();
    let m: serde_json::Value = serde_json::from_str(manifest.lines().next().unwrap()).unwrap();
    assert_eq!(m["seed"], 3);
    assert_eq!(m["experiment"], "g2-model");
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert!(m["outputs"].as_array().unwrap().iter().any(|o| o["file"] == "g2_measured.csv"));
}

#[test]
fn csv_reals_parse_back_to_the_written_values() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.cfg"), "experiment = g2-model\ng2.half_span_ns = 2\n").unwrap();
    assert!(sspdsim(&["run", "s.cfg", "--out", "o"], dir.path()).status.success());
    let csv = fs::read_to_string(dir.path().join("o/g2_measured.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("tau_ns,g2"));
    for line in csv.lines().skip(1) {
        for cell in line.split(',') {
            let v: f64 = cell.parse().unwrap();
            assert_eq!(format!("{v:?}"), cell);
        }
    }
}

#[test]
fn output_directory_defaults_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.cfg"), "experiment = tmm-spectrum\nspectrum.points = 3\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_sspdsim"))
        .args(["run", "s.cfg"])
        .current_dir(dir.path())
        .env("SSPDSIM_OUT", "from-env")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("from-env/spectrum.csv").is_file());
}

#[test]
fn presets_list_names_every_figure() {
    let dir = tempfile::tempdir().unwrap();
    let o = sspdsim(&["presets", "list"], dir.path());
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["fig1c", "fig2e", "fig3a", "fig3b", "fig3c", "fig3d", "fig6a", "fig6b"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
    assert_eq!(sspdsim(&["presets", "run", "fig9"], dir.path()).status.code(), Some(2));
}

#[test]
fn fig3b_preset_has_rate_and_current_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = sspdsim(&["presets", "run", "fig3b", "--out", "o"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("o/count_rate.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("n_in_cps,n_out_cps,operating_current_uA,latched"));
    assert!(dir.path().join("o/count_rate_voltage.csv").is_file());
}

#[test]
fn fig6b_preset_starts_at_qe_one_thousandth() {
    let dir = tempfile::tempdir().unwrap();
    let o = sspdsim(&["presets", "run", "fig6b", "--out", "o"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("o/g2_zero.csv")).unwrap();
    let first: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first[0].parse::<f64>().unwrap(), 0.001);
    assert!(csv.lines().any(|l| l.ends_with("nan")) == false);
}
