use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ghost(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghost-optics"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn preset_with(dir: &Path, from: &str, to: &str) -> String {
    let text = ghost_optics::harness::preset_source("paper-fig1").unwrap();
    assert!(text.contains(from));
    let path = dir.join("bench.cfg");
    fs::write(&path, text.replace(from, to)).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn report_inline_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("r.cfg");
    fs::write(
        &cfg,
        "[report]\ndk1 = 23 1/mm\ndk2 = 23 1/mm\ndk_sum = 2.5 1/mm\ndx1 = 0.165 mm\ndx2 = 0.165 mm\ndx_diff = 0.11 mm\n",
    )
    .unwrap();
    let out = ghost(&["report", "--config", cfg.to_str().unwrap()], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json = fs::read_to_string(dir.path().join("o/epr_report.json")).unwrap();
    assert!(json.contains("necessary but not sufficient"));
}

#[test]
fn lens_violation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset_with(dir.path(), "b = 142 cm", "b = 160 cm");
    let out = ghost(&["image", "--config", &cfg], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("check_two_photon_lens_equation"));
}

#[test]
fn config_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset_with(dir.path(), "a1 = 32.5 cm", "a1 = 32.5");
    let out = ghost(&["interference", "--config", &cfg], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 7"));

    let cfg = preset_with(dir.path(), "slit_width = 0.165 mm", "slit_width = 0.4 mm");
    let out = ghost(&["interference", "--config", &cfg], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("overlap"));
}

#[test]
fn fit_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset_with(dir.path(), "half_width = 2.5 mm", "half_width = 0.8 mm");
    let out = ghost(&["interference", "--config", &cfg], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = ghost(&["sweep", "--config", "/nonexistent/bench.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (out, seed, threads) in [(&a, "7", "1"), (&b, "7", "2"), (&c, "8", "0")] {
        let run = Command::new(env!("CARGO_BIN_EXE_ghost-optics"))
            .args(["image", "--seed", seed, "--out"])
            .arg(out)
            .env("GHOST_OPTICS_THREADS", threads)
            .output()
            .unwrap();
        assert!(run.status.success());
    }
    for name in ["image_pattern.csv", "image_counts.csv", "image_report.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert_ne!(
        fs::read(a.join("image_counts.csv")).unwrap(),
        fs::read(c.join("image_counts.csv")).unwrap()
    );
}
