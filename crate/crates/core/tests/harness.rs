use std::fs;

use ghost_optics::biphoton::DetectorPlane;
use ghost_optics::harness::io::{read_counts_csv, read_pattern_csv};
use ghost_optics::harness::{exit_code, parse_config, preset_source, run, Mode};
use ghost_optics::Error;

fn preset() -> String {
    preset_source("paper-fig1").unwrap().to_string()
}

#[test]
fn report_from_paper_uncertainties() {
    let text = "[report]\n\
        dk1 = 23 1/mm\ndk2 = 23 1/mm\ndk_sum = 2.5 1/mm\n\
        dx1 = 0.165 mm\ndx2 = 0.165 mm\ndx_diff = 0.11 mm\n";
    let mut c = parse_config(text).unwrap();
    c.mode = Some(Mode::Report);
    let dir = tempfile::tempdir().unwrap();
    let out = run(&c, dir.path()).unwrap();
    let r = &out.report["epr_report"];
    assert_eq!(r["epr_momentum_ok"], true);
    assert_eq!(r["epr_position_ok"], true);
    assert!((r["product"]["value"].as_f64().unwrap() - 0.275).abs() < 1e-12);
    assert_eq!(r["product"]["unit"], "1");
    assert!(r["notes"][0].as_str().unwrap().contains("necessary but not sufficient"));
    assert!(dir.path().join("epr_report.json").exists());
}

#[test]
fn report_without_inputs_is_config_error() {
    let mut c = parse_config("[report]\ndk1 = 23 1/mm\n").unwrap();
    c.mode = Some(Mode::Report);
    let err = run(&c, tempfile::tempdir().unwrap().path()).unwrap_err();
    assert_eq!(exit_code(&err), 3);
}

#[test]
fn image_refuses_unfocused_geometry() {
    let text = preset().replace("b = 142 cm", "b = 160 cm");
    let mut c = parse_config(&text).unwrap();
    c.mode = Some(Mode::Image);
    let dir = tempfile::tempdir().unwrap();
    let err = run(&c, dir.path()).unwrap_err();
    assert!(matches!(err, Error::Configuration(_)));
    assert!(err.to_string().contains("check_two_photon_lens_equation"));
    assert_eq!(exit_code(&err), 3);
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn image_run_recovers_preset_blur() {
    let mut c = parse_config(&preset()).unwrap();
    c.mode = Some(Mode::Image);
    let dir = tempfile::tempdir().unwrap();
    let out = run(&c, dir.path()).unwrap();
    let fit = &out.report["fits"]["image"];
    let excess = fit["fwhm_excess"]["value"].as_f64().unwrap();
    assert!((excess - 0.11e-3).abs() < 0.02e-3, "{excess}");
    let counts = read_counts_csv(
        &fs::read_to_string(dir.path().join("image_counts.csv")).unwrap(),
        DetectorPlane::Image,
    )
    .unwrap();
    assert_eq!(counts.total(), out.report["fits"]["counts_total"]["value"].as_u64().unwrap());
}

#[test]
fn every_report_number_has_a_unit() {
    fn check(v: &serde_json::Value, path: &str) {
        match v {
            serde_json::Value::Number(_) => panic!("bare number at {path}"),
            serde_json::Value::Object(m) => {
                if m.contains_key("value") {
                    assert!(m["unit"].is_string(), "{path}");
                } else {
                    for (k, x) in m {
                        check(x, &format!("{path}.{k}"));
                    }
                }
            }
            serde_json::Value::Array(a) => a.iter().for_each(|x| check(x, path)),
            _ => {}
        }
    }
    let dir = tempfile::tempdir().unwrap();
    for mode in [Mode::Image, Mode::Sweep] {
        let mut c = parse_config(&preset()).unwrap();
        c.mode = Some(mode);
        c.sweep.models = 6;
        let out = run(&c, dir.path()).unwrap();
        for key in ["inputs", "fits", "epr_report", "provenance"] {
            assert!(out.report.get(key).is_some(), "{key}");
        }
        check(&out.report, "");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let mut c = parse_config(&preset()).unwrap();
    c.mode = Some(Mode::Interference);
    c.interference.bootstrap = 20;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let out_a = run(&c, a.path()).unwrap();
    run(&c, b.path()).unwrap();
    for f in &out_a.files {
        let name = f.file_name().unwrap();
        assert_eq!(fs::read(f).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name:?}");
    }
    let pattern = read_pattern_csv(
        &fs::read_to_string(a.path().join("interference_pattern.csv")).unwrap(),
        DetectorPlane::ImagingFocal,
    )
    .unwrap();
    assert_eq!(pattern.len(), out_a.report["fits"]["interference"]["n_points"]["value"].as_u64().unwrap() as usize);

    c.counts.seed += 1;
    let other = tempfile::tempdir().unwrap();
    run(&c, other.path()).unwrap();
    assert_ne!(
        fs::read(a.path().join("interference_counts.csv")).unwrap(),
        fs::read(other.path().join("interference_counts.csv")).unwrap()
    );
}

#[test]
fn narrow_scan_is_fit_error() {
    let text = preset().replace("half_width = 2.5 mm", "half_width = 1 mm");
    let mut c = parse_config(&text).unwrap();
    c.mode = Some(Mode::Interference);
    let err = run(&c, tempfile::tempdir().unwrap().path()).unwrap_err();
    assert_eq!(exit_code(&err), 2, "{err}");
}
