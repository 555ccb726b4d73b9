use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use genbern::experiments::config::ExperimentConfig;
use genbern::experiments::report::Report;

fn genbern(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genbern"))
        .args(args)
        .env("GENBERN_OUT", out)
        .output()
        .expect("binary runs")
}

fn demo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/bernstein-demo.toml")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

// small enough for a debug binary
const QUICK: [&str; 4] = ["--set", "grids.n=[16, 64]", "--set", "modulus.delta_points=64"];

#[test]
fn help_exits_zero_and_embeds_defaults() {
    let d = tempfile::tempdir().unwrap();
    let o = genbern(&["--help"], d.path());
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    for word in ["evaluate", "modulus", "tail", "bound", "run", "tail_tol", "mc_trials", "GENBERN_OUT"] {
        assert!(text.contains(word), "help lacks {word}");
    }
    let start = text.find("--- default config (TOML) ---\n").expect("begin marker") + 30;
    let end = text.find("--- end default config ---").expect("end marker");
    let documented = ExperimentConfig::from_str_any(&text[start..end]).unwrap();
    assert_eq!(documented, ExperimentConfig::default());
    // the defaults summary matches the runtime values
    let c = ExperimentConfig::default();
    assert!(text.contains(&format!("tolerances.tail_tol      {:e}", c.tolerances.tail_tol)));
    assert!(text.contains(&format!("tail.n_max               {}", c.tail.n_max)));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let o = genbern(&["frobnicate"], d.path());
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert_eq!(e.lines().count(), 1, "{e}");
    assert!(e.starts_with("genbern: error[usage]:"), "{e}");
    assert!(e.contains("evaluate, modulus, tail, bound, run"), "{e}");
}

#[test]
fn unknown_config_keys_exit_two() {
    let d = tempfile::tempdir().unwrap();
    let o = genbern(&["run", "--set", "tolerances.tail_toll=1e-9"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("genbern: error[config]:"));

    let cfg = d.path().join("bad.toml");
    std::fs::write(&cfg, "[grids]\nnn = [1]\n").unwrap();
    let o = genbern(&["run", "--config", cfg.to_str().unwrap()], d.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn missing_config_file_is_a_runtime_error() {
    let d = tempfile::tempdir().unwrap();
    let o = genbern(&["run", "--config", "/nonexistent/x.toml"], d.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("genbern: error[io]:"));
}

#[test]
fn demo_run_writes_table_and_report() {
    let d = tempfile::tempdir().unwrap();
    let o = genbern(&["run", "--config", demo().to_str().unwrap()], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in ["table.csv", "report.json", "timings.csv"] {
        assert!(d.path().join(name).is_file(), "{name}");
    }
    let table = std::fs::read_to_string(d.path().join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 6);
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut args = vec!["run", "--seed", "7"];
    args.extend(QUICK);
    let o = genbern(&args, dirs[0].path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dirs[0].path().join("report.json")).unwrap();
    let report = Report::from_json(&text).unwrap();
    assert_eq!(report.seed, 7);
    let echoed = dirs[1].path().join("echo.json");
    std::fs::write(&echoed, serde_json::to_string(&report.config).unwrap()).unwrap();
    let o = genbern(&["run", "--config", echoed.to_str().unwrap()], dirs[1].path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in ["table.csv", "report.json"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn subcommands_write_their_files() {
    let d = tempfile::tempdir().unwrap();
    for (cmd, files) in [
        ("evaluate", ["evaluate.csv", "evaluate.json"]),
        ("modulus", ["modulus.csv", "modulus.json"]),
        ("tail", ["tail.csv", "tail.json"]),
        ("bound", ["bound.csv", "bound.json"]),
    ] {
        let out = d.path().join(cmd);
        let mut args = vec![cmd, "--out", out.to_str().unwrap(), "--quiet"];
        args.extend(QUICK);
        let o = genbern(&args, d.path());
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
        assert!(o.stdout.is_empty());
        for f in files {
            let text = std::fs::read_to_string(out.join(f)).unwrap();
            assert!(!text.contains('\r'));
        }
    }
    let header = std::fs::read_to_string(d.path().join("bound/bound.csv")).unwrap();
    assert!(header.starts_with("n,lower_bracket,upper_bracket,closed_form,empirical,ratio\n"));
    let tail: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("tail/tail.json")).unwrap()).unwrap();
    for key in ["method", "lambda_cap", "n_max", "seed"] {
        assert!(tail.get(key).is_some(), "{key}");
    }
}

#[test]
fn format_flag_restricts_outputs() {
    let d = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "--format", "json"];
    args.extend(QUICK);
    let o = genbern(&args, d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(d.path().join("report.json").is_file());
    assert!(!d.path().join("table.csv").exists());
}

#[test]
fn bad_flag_value_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let o = genbern(&["run", "--format", "xml"], d.path());
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert_eq!(e.lines().count(), 1, "{e}");
}
