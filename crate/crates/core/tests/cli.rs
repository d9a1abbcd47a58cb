use std::path::Path;
use std::process::{Command, Output};

use twinbeam::output::decode_pgm;

fn twinbeam(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twinbeam"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn presets_round_trip_through_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let o = twinbeam(&["presets"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["high-gain", "detuning-sweep", "non-amplifying"] {
        let cfg = dir.path().join(format!("{name}.toml"));
        assert!(cfg.exists());
        let out = dir.path().join(name);
        let o = twinbeam(
            &[
                "simulate",
                "--config",
                cfg.to_str().unwrap(),
                "--format",
                "json",
            ],
            &out,
        );
        assert!(o.status.success(), "{name}: {}", stderr(&o));
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("simulate.json")).unwrap())
                .unwrap();
        assert_eq!(v["scenario"], name);
        assert_eq!(v["config_sha256"].as_str().unwrap().len(), 64);
    }
    let v: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("non-amplifying/simulate.json")).unwrap(),
    )
    .unwrap();
    let att = &v["result"]["attenuation"];
    assert!((att["optimum"]["t_star"].as_f64().unwrap() - 0.5891).abs() < 1e-3);
    assert!((att["nsf_at_t_probe"]["nsf_db"].as_f64().unwrap() + 1.714).abs() < 1e-3);
}

#[test]
fn sweep_has_fixed_layout() {
    let dir = tempfile::tempdir().unwrap();
    let o = twinbeam(&["sweep-detuning", "--threads", "2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# twinbeam "));
    assert!(lines[1].starts_with("# config_sha256="));
    assert_eq!(
        lines[2],
        "delta_mhz,g_p,g_c,g_sum,nsf_linear,nsf_db,t_star,nsf_star_db"
    );
    let rows = &lines[3..];
    assert_eq!(rows.len(), 67);
    assert!(rows[0].starts_with("-50,"));
    assert!(rows[66].starts_with("16,"));
    for r in rows {
        assert_eq!(r.split(',').count(), 8);
    }
}

#[test]
fn outputs_are_deterministic_across_threads() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg_dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        cfg_dir.path(),
        "scenario = \"det\"\n[mc]\nsamples = 20000\n",
    );
    for (dir, threads) in [(a.path(), "1"), (b.path(), "3")] {
        for cmd in ["simulate", "sweep-detuning"] {
            let o = twinbeam(
                &[cmd, "--config", &cfg, "--threads", threads, "--seed", "9"],
                dir,
            );
            assert!(o.status.success(), "{}", stderr(&o));
        }
    }
    for f in ["simulate.csv", "sweep.csv", "sweep-detuning.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn seed_changes_sampling_result() {
    let cfg_dir = tempfile::tempdir().unwrap();
    let cfg = write_config(cfg_dir.path(), "scenario = \"mc\"\n[mc]\nsamples = 20000\n");
    let read = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let o = twinbeam(
            &[
                "simulate", "--config", &cfg, "--seed", seed, "--format", "json",
            ],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        let v: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("simulate.json")).unwrap(),
        )
        .unwrap();
        v["result"]["mc"]["estimate"]["nsf"].as_f64().unwrap()
    };
    assert_ne!(read("1"), read("2"));
    assert_eq!(read("3"), read("3"));
}

#[test]
fn render_beams_writes_six_pgms() {
    let dir = tempfile::tempdir().unwrap();
    let o = twinbeam(
        &["render-beams", "--l", "-1", "--format", "json"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for name in [
        "seed",
        "seed_fork",
        "probe",
        "probe_fork",
        "conjugate",
        "conjugate_fork",
    ] {
        let bytes = std::fs::read(dir.path().join(format!("{name}.pgm"))).unwrap();
        let (w, h, maxval, px) = decode_pgm(&bytes).unwrap();
        assert_eq!((w, h, maxval), (256, 256, 65535));
        assert_eq!(*px.iter().max().unwrap(), 65535, "{name} not normalized");
    }
    let v: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("render-beams.json")).unwrap(),
    )
    .unwrap();
    let beams = v["beams"].as_array().unwrap();
    assert_eq!(beams[0]["fork_order"], -1);
    assert_eq!(beams[2]["charge"], 1);
    assert_eq!(beams[2]["fork_order"], 1);
    assert_eq!(v["oam_conserved"], true);
}

#[test]
fn fit_command_reports_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[channel]\nfamily = \"loss_before_gain\"\ntarget_gains = [0.84, 0.16]\n",
    );
    let o = twinbeam(&["fit", "--config", &cfg, "--format", "json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fit.json")).unwrap())
            .unwrap();
    let spec = &v["channel"]["spec"];
    assert!((spec["gain"].as_f64().unwrap() - 0.84 / 0.68).abs() < 1e-6);
    assert!((spec["eta_probe"].as_f64().unwrap() - 0.68).abs() < 1e-6);
}

#[test]
fn unreachable_fit_exits_nonzero_with_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[channel]\nfamily = \"ideal\"\ntarget_gains = [0.84, 0.16]\n",
    );
    let o = twinbeam(&["fit", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not reachable"));
    assert!(dir.path().join("fit.csv").exists());
}

#[test]
fn fit_without_targets_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = twinbeam(&["fit"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("target_gains"));
}

#[test]
fn optimize_attenuation_command() {
    let dir = tempfile::tempdir().unwrap();
    let o = twinbeam(&["optimize-attenuation", "--format", "json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("optimize-attenuation.json")).unwrap(),
    )
    .unwrap();
    let t = v["attenuation"]["optimum"]["t_star"].as_f64().unwrap();
    assert!(t > 0.0 && t <= 1.0);
}

#[test]
fn config_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let missing = twinbeam(&["simulate", "--config", "/no/such/file.toml"], dir.path());
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).contains("cannot read config"));

    let cfg = write_config(
        dir.path(),
        "[channel]\ngain = 0.2\n[image]\nbit_depth = 12\n",
    );
    let o = twinbeam(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(
        msg.contains("line 2") && msg.contains("channel.gain"),
        "{msg}"
    );
    assert!(
        msg.contains("line 4") && msg.contains("image.bit_depth"),
        "{msg}"
    );

    let cfg = write_config(dir.path(), "[detection]\nefficiency = 0.9\n");
    let o = twinbeam(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("efficiency"));

    let cfg = write_config(dir.path(), "scenario = \"x\n");
    let o = twinbeam(&["simulate", "--config", &cfg], dir.path());
    assert!(stderr(&o).contains("syntax error"));
}
