#![allow(dead_code)]

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use lsf::curve::{contact_lift_curve, LegendreCurve};
use lsf::diff::{linspace, periodic_grid};
use lsf::evolution::{
    evolve_surface, integrate_evolution, ComplexCurve, ComplexGenerator, EvolutionMap, EvolutionOptions, SurfaceOptions,
};
use lsf::grid::SurfaceGrid;
use lsf::{PseudoVector, SpaceFormFrame};

pub fn e(k: usize) -> PseudoVector {
    PseudoVector::e(k)
}

/// Circle of radius `r` in the `x3 = 0` plane through `(0, cy − r)` with
/// unit tangent `e1` there, normal on the left.
pub fn circle(n: usize, r: f64, cy: f64) -> LegendreCurve {
    oriented_circle(n, r, cy, 1.0)
}

/// Same circle with the normal multiplied by `sign`.
pub fn oriented_circle(n: usize, r: f64, cy: f64, sign: f64) -> LegendreCurve {
    let u = periodic_grid(0.0, TAU, n);
    let pts: Vec<[f64; 2]> = u.iter().map(|s| [r * s.sin(), cy - r * s.cos()]).collect();
    let nrm: Vec<[f64; 2]> = u.iter().map(|s| [-sign * s.sin(), sign * s.cos()]).collect();
    contact_lift_curve(&pts, &nrm, TAU / n as f64, true, &SpaceFormFrame::euclidean()).unwrap()
}

/// Rotation about the `x1` axis: `l = cos v e3 − sin v e2`.
pub fn revolution(n: usize) -> EvolutionMap {
    let gen = ComplexGenerator::RotatingPlane { a: e(3), b: -e(2), rate: 1.0, warp: 0.0 };
    let l = ComplexCurve::from_generator(gen, periodic_grid(0.0, TAU, n), true).unwrap();
    integrate_evolution(&l, 0, &EvolutionOptions { substeps: 4, ..Default::default() }).unwrap()
}

/// Torus of revolution with tube radius 1 and centre circle radius 2.
pub fn torus(n: usize) -> SurfaceGrid {
    evolve_surface(&revolution(n), &circle(n, 1.0, 2.0), &SurfaceOptions::default()).unwrap()
}

/// Ellipse arc evolved by a polynomial complex spanning all six directions,
/// so that neither curvature family is spherical.
pub fn generic_surface(n: usize) -> SurfaceGrid {
    let q = e(5) - e(4);
    let h = 1.1 / (n - 1) as f64;
    let (a, b) = (1.3, 0.8);
    let t = |i: usize| 0.2 + i as f64 * h;
    let pts: Vec<[f64; 2]> = (0..n).map(|i| [a * t(i).cos(), 2.5 + b * t(i).sin()]).collect();
    let nrm: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let (x, y) = (-b * t(i).cos(), -a * t(i).sin());
            let l = x.hypot(y);
            [x / l, y / l]
        })
        .collect();
    let c = contact_lift_curve(&pts, &nrm, h, false, &SpaceFormFrame::euclidean()).unwrap();
    let gen = ComplexGenerator::Polynomial {
        base: e(3),
        dirs: vec![e(2), q, e(6), e(1), e(4)],
        coeffs: vec![
            vec![0.0, -0.8],
            vec![0.0, 0.0, 0.3],
            vec![0.0, 0.3],
            vec![0.0, 0.0, 0.3],
            vec![0.0, 0.0, 0.0, 0.05],
        ],
    };
    let l = ComplexCurve::from_generator(gen, linspace(0.0, 1.5, n), false).unwrap();
    let a = integrate_evolution(&l, 0, &EvolutionOptions { substeps: 2, ..Default::default() }).unwrap();
    evolve_surface(&a, &c, &SurfaceOptions::default()).unwrap()
}

pub fn max(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

/// Runs the driver in-process and returns its exit code.
pub fn lsf(args: &[&str]) -> i32 {
    lsf::cli::main_with_args(std::iter::once("lsf").chain(args.iter().copied()))
}

pub fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

/// Files of the CLI torus pipeline on an `n × n` grid.
pub struct TorusPipeline {
    pub dir: PathBuf,
    pub codes: Vec<i32>,
}

pub const TORUS_FILES: [&str; 10] = [
    "circle.json",
    "torus.json",
    "report.json",
    "torus.obj",
    "torus.ply",
    "rib/f.json",
    "rib/f_hat.json",
    "rib/pair.json",
    "rib/report.json",
    "complex.json",
];

impl TorusPipeline {
    pub fn run(dir: &Path, n: usize) -> TorusPipeline {
        std::fs::create_dir_all(dir).unwrap();
        let complex = format!(
            r#"{{"generator": {{"type": "rotating_plane", "a": [0,0,1,0,0,0], "b": [0,-1,0,0,0,0], "rate": 1.0}}, "v_start": 0, "v_end": {TAU:?}, "n": {n}, "closed": true}}"#
        );
        std::fs::write(dir.join("complex.json"), complex).unwrap();
        let (len, step) = (format!("{TAU:?}"), format!("{:?}", TAU / n as f64));
        let p = |name| path(dir, name);
        let codes = vec![
            lsf(&[
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
            ]),
            lsf(&["evolve", "--curve", &p("circle.json"), "--complex", &p("complex.json"), "--out", &p("torus.json")]),
            lsf(&["analyze", "--surface", &p("torus.json"), "--out", &p("report.json")]),
            lsf(&["export", "--surface", &p("torus.json"), "--out", &p("torus.obj")]),
            lsf(&["export", "--surface", &p("torus.json"), "--out", &p("torus.ply"), "--format", "ply"]),
            lsf(&[
                "ribaucour",
                "--curve",
                &p("circle.json"),
                "--complex",
                &p("complex.json"),
                "--out-dir",
                &p("rib"),
                "--x",
                "0.5",
                "--y",
                "1",
                "--r",
                "0.4",
            ]),
        ];
        TorusPipeline { dir: dir.to_path_buf(), codes }
    }

    pub fn ok(&self) -> bool {
        self.codes.iter().all(|c| *c == 0)
    }

    pub fn json(&self, name: &str) -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(self.dir.join(name)).unwrap()).unwrap()
    }

    pub fn bytes(&self) -> Vec<Vec<u8>> {
        TORUS_FILES.iter().map(|f| std::fs::read(self.dir.join(f)).unwrap()).collect()
    }
}
