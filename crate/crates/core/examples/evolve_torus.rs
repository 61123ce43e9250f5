//! Sweeps a circle by a rotating family of planes and compares the result
//! with the parametric torus.

use std::f64::consts::TAU;

use lsf::curve::contact_lift_curve;
use lsf::diff::periodic_grid;
use lsf::evolution::{
    evolve_surface, integrate_evolution, ComplexCurve, ComplexGenerator, EvolutionOptions, SurfaceOptions,
};
use lsf::io::surface_mesh;
use lsf::{PseudoVector, SpaceFormFrame};

fn main() -> lsf::Result<()> {
    let n = 96;
    let fr = SpaceFormFrame::euclidean();
    let u = periodic_grid(0.0, TAU, n);

    // tube radius 1, centre at distance 2 from the axis
    let pts: Vec<[f64; 2]> = u.iter().map(|s| [s.sin(), 2.0 - s.cos()]).collect();
    let nrm: Vec<[f64; 2]> = u.iter().map(|s| [-s.sin(), s.cos()]).collect();
    let c = contact_lift_curve(&pts, &nrm, TAU / n as f64, true, &fr)?;

    let gen = ComplexGenerator::RotatingPlane { a: PseudoVector::e(3), b: -PseudoVector::e(2), rate: 1.0, warp: 0.0 };
    let l = ComplexCurve::from_generator(gen, periodic_grid(0.0, TAU, n), true)?;
    let a = integrate_evolution(&l, 0, &EvolutionOptions { substeps: 4, ..Default::default() })?;
    println!("evolution parallelism residual {:.3e}", a.parallelism_residual());

    let g = evolve_surface(&a, &c, &SurfaceOptions::default())?;
    let mesh = surface_mesh(&g, &fr)?;
    let mut err: f64 = 0.0;
    for (i, s) in u.iter().enumerate() {
        for (j, t) in u.iter().enumerate() {
            let x = mesh.vertices[g.idx(i, j)];
            let w = 2.0 - s.cos();
            let y = [s.sin(), w * t.cos(), w * t.sin()];
            err = err.max((0..3).map(|k| (x[k] - y[k]).abs()).fold(0.0, f64::max));
        }
    }
    println!("{} x {} grid, max vertex error {err:.3e}", g.nu(), g.nv());
    Ok(())
}
