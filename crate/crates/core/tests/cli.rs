mod common;

use std::f64::consts::TAU;
use std::path::Path;
use std::process::Command;

use common::*;
use lsf::diff::linspace;
use lsf::grid::contact_lift_surface;
use lsf::io::{write_json, CurveFile, SurfaceFile};
use lsf::SpaceFormFrame;

fn small_circle(dir: &Path, n: usize) -> String {
    let out = path(dir, "circle.json");
    let step = format!("{:?}", TAU / n as f64);
    let code = lsf(&[
        "elastica",
        "--out",
        &out,
        "--mu",
        "0",
        "--lambda=-0.5",
        "--k0",
        "1",
        "--length",
        &format!("{TAU:?}"),
        "--step",
        &step,
        "--x0",
        "0",
        "--y0",
        "1",
        "--closed",
        "--close-tol",
        "1e-2",
    ]);
    assert_eq!(code, 0);
    out
}

fn rotation_spec(dir: &Path, n: usize) -> String {
    let out = path(dir, "complex.json");
    std::fs::write(
        &out,
        format!(
            r#"{{"generator": {{"type": "rotating_plane", "a": [0,0,1,0,0,0], "b": [0,-1,0,0,0,0], "rate": 1.0}}, "v_start": 0, "v_end": {TAU:?}, "n": {n}, "closed": true}}"#
        ),
    )
    .unwrap();
    out
}

#[test]
fn sech_elastica_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "sech.json");
    assert_eq!(lsf(&["elastica", "--out", &out]), 0);
    let file: CurveFile = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let (s, k) = (file.s.clone().unwrap(), file.k.clone().unwrap());
    assert_eq!(s.len(), 10_001);
    let err = max(s.iter().zip(&k).map(|(s, k)| (k - 2.0 / s.cosh()).abs()));
    assert!(err <= 1e-6, "{err}");
    let c = file.to_curve().unwrap();
    assert!(c.isotropy_defect() <= 1e-12);
}

#[test]
fn exit_codes_by_stage() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = |n| path(d, n);
    // configuration
    assert_eq!(lsf(&["evolve", "--curve", &p("missing.json"), "--complex", &p("x.json"), "--out", &p("o.json")]), 1);
    assert_eq!(lsf(&["elastica", "--bogus"]), 1);
    assert_eq!(lsf(&["--help"]), 0);
    // solver
    assert_eq!(lsf(&["elastica", "--out", &p("c.json"), "--step", "0"]), 2);
    // evolution
    let circle = small_circle(d, 32);
    std::fs::write(
        p("const.json"),
        r#"{"generator": {"type": "constant", "l": [0,0,1,0,0,0]}, "v_start": 0, "v_end": 1, "n": 8}"#,
    )
    .unwrap();
    assert_eq!(lsf(&["evolve", "--curve", &circle, "--complex", &p("const.json"), "--out", &p("s.json")]), 3);
    assert!(!d.join("s.json").exists());
    // ribaucour: the curvature circle of the profile is tangential
    let spec = rotation_spec(d, 32);
    let rib = |x: &str, y: &str, r: &str| {
        lsf(&[
            "ribaucour",
            "--curve",
            &circle,
            "--complex",
            &spec,
            "--out-dir",
            &p("rib"),
            "--x",
            x,
            "--y",
            y,
            "--r",
            r,
            "--substeps",
            "4",
        ])
    };
    assert_eq!(rib("0", "2", "1"), 5);
    assert_eq!(lsf(&["ribaucour", "--curve", &circle, "--complex", &spec, "--out-dir", &p("rib"), "--x", "1"]), 1);
}

#[test]
fn analysis_failure_still_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    // saddle z = xy sampled along its asymptotic lines
    let u = linspace(-0.5, 0.5, 16);
    let (mut pts, mut nrm) = (Vec::new(), Vec::new());
    for x in &u {
        for y in &u {
            pts.push([*x, *y, x * y]);
            let l = (x * x + y * y + 1.0f64).sqrt();
            nrm.push([-y / l, -x / l, 1.0 / l]);
        }
    }
    let g = contact_lift_surface(&pts, &nrm, u.clone(), u, false, false, &SpaceFormFrame::euclidean()).unwrap();
    let surf = dir.path().join("saddle.json");
    write_json(&surf, &SurfaceFile::from_grid(&g)).unwrap();
    let rep = path(dir.path(), "report.json");
    assert_eq!(lsf(&["analyze", "--surface", &surf.to_string_lossy(), "--out", &rep]), 4);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(json["kind"], "surface");
    assert!(json["error"].as_str().is_some());
}

#[test]
fn binary_reports_thread_setting_errors() {
    let out = Command::new(env!("CARGO_BIN_EXE_lsf"))
        .args(["elastica", "--out", "/nonexistent/never.json", "--length", "1", "--step", "0.1"])
        .env("LSF_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("LSF_THREADS"));
    let help = Command::new(env!("CARGO_BIN_EXE_lsf")).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
    for sub in ["elastica", "evolve", "analyze", "ribaucour", "export"] {
        assert!(String::from_utf8_lossy(&help.stdout).contains(sub));
    }
}

/// Parses `v x y z` lines and keeps every other line verbatim.
fn split_obj(text: &str) -> (Vec<[f64; 3]>, Vec<String>) {
    let mut verts = Vec::new();
    let mut rest = Vec::new();
    for line in text.lines() {
        match line.strip_prefix("v ") {
            Some(v) => {
                let x: Vec<f64> = v.split_whitespace().map(|t| t.parse().unwrap()).collect();
                verts.push([x[0], x[1], x[2]]);
            }
            None => rest.push(line.to_string()),
        }
    }
    (verts, rest)
}

#[test]
fn torus_mesh_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let circle = small_circle(d, 12);
    let spec = rotation_spec(d, 12);
    let surf = path(d, "torus.json");
    let obj = path(d, "torus.obj");
    assert_eq!(lsf(&["evolve", "--curve", &circle, "--complex", &spec, "--out", &surf, "--substeps", "8"]), 0);
    assert_eq!(lsf(&["export", "--surface", &surf, "--out", &obj]), 0);
    let golden = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/torus12.obj")).unwrap();
    let (gv, gr) = split_obj(&golden);
    let (v, r) = split_obj(&std::fs::read_to_string(&obj).unwrap());
    assert_eq!(r, gr);
    assert_eq!(v.len(), 144);
    let err = max(v.iter().zip(&gv).flat_map(|(a, b)| (0..3).map(move |k| (a[k] - b[k]).abs())));
    assert!(err <= 1e-12, "{err}");
    let h = TAU / 12.0;
    let oracle = max(v.iter().enumerate().flat_map(|(k, x)| {
        let (s, t) = ((k / 12) as f64 * h, (k % 12) as f64 * h);
        let w = 2.0 - s.cos();
        let y = [s.sin(), w * t.cos(), w * t.sin()];
        (0..3).map(move |i| (x[i] - y[i]).abs())
    }));
    // the profile comes from a coarse solver step of π/6
    assert!(oracle <= 5e-3, "{oracle}");
}
