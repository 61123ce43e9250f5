//! Runs the command-line pipeline end to end in a temporary directory:
//! circle, torus, report and OBJ/PLY meshes.

use std::f64::consts::TAU;

use lsf::cli::main_with_args;

fn run(args: &[&str]) -> i32 {
    let code = main_with_args(std::iter::once("lsf").chain(args.iter().copied()));
    println!("lsf {} -> {code}", args[0]);
    code
}

fn main() -> std::io::Result<()> {
    let dir = tempfile::tempdir()?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let n = 48;
    std::fs::write(
        p("complex.json"),
        format!(
            r#"{{"generator": {{"type": "rotating_plane", "a": [0,0,1,0,0,0], "b": [0,-1,0,0,0,0], "rate": 1.0}}, "v_start": 0, "v_end": {TAU:?}, "n": {n}, "closed": true}}"#
        ),
    )?;
    let (len, step) = (format!("{TAU:?}"), format!("{:?}", TAU / n as f64));
    let codes = [
        run(&[
            "elastica",
            "--out",
            &p("circle.json"),
            "--mu",
            "0",
            "--lambda=-0.5",
            "--k0",
            "1",
            "--length",
            &len,
            "--step",
            &step,
            "--x0",
            "0",
            "--y0",
            "1",
            "--closed",
            "--close-tol",
            "1e-4",
        ]),
        run(&[
            "evolve",
            "--curve",
            &p("circle.json"),
            "--complex",
            &p("complex.json"),
            "--out",
            &p("torus.json"),
            "--substeps",
            "4",
        ]),
        run(&["analyze", "--surface", &p("torus.json"), "--out", &p("report.json")]),
        run(&["export", "--surface", &p("torus.json"), "--out", &p("torus.obj")]),
        run(&["export", "--surface", &p("torus.json"), "--out", &p("torus.ply"), "--format", "ply"]),
    ];
    if codes.iter().any(|c| *c != 0) {
        std::process::exit(1);
    }
    let obj = std::fs::read_to_string(p("torus.obj"))?;
    let verts = obj.lines().filter(|l| l.starts_with("v ")).count();
    let faces = obj.lines().filter(|l| l.starts_with("f ")).count();
    println!("torus.obj: {verts} vertices, {faces} faces");
    Ok(())
}
