//! Two tori of revolution around concentric profile circles with opposite
//! orientations form a Ribaucour pair of Dupin cyclides.

use std::f64::consts::TAU;

use lsf::analysis::{curvature_sphere_fields, sphere_drift, AnalysisOptions};
use lsf::curve::{contact_lift_curve, LegendreCurve};
use lsf::diff::{periodic_grid, Stencil};
use lsf::evolution::{integrate_evolution, ComplexCurve, ComplexGenerator, EvolutionOptions};
use lsf::report::RibaucourTolerances;
use lsf::ribaucour::{ribaucour_evolve, verify_ribaucour, Partner};
use lsf::{PseudoVector, SpaceFormFrame};

fn circle(n: usize, r: f64, cy: f64, sign: f64) -> lsf::Result<LegendreCurve> {
    let u = periodic_grid(0.0, TAU, n);
    let pts: Vec<[f64; 2]> = u.iter().map(|s| [r * s.sin(), cy - r * s.cos()]).collect();
    let nrm: Vec<[f64; 2]> = u.iter().map(|s| [-sign * s.sin(), sign * s.cos()]).collect();
    contact_lift_curve(&pts, &nrm, TAU / n as f64, true, &SpaceFormFrame::euclidean())
}

fn main() -> lsf::Result<()> {
    let n = 96;
    let gen = ComplexGenerator::RotatingPlane { a: PseudoVector::e(3), b: -PseudoVector::e(2), rate: 1.0, warp: 0.0 };
    let l = ComplexCurve::from_generator(gen, periodic_grid(0.0, TAU, n), true)?;
    let a = integrate_evolution(&l, 0, &EvolutionOptions { substeps: 4, ..Default::default() })?;

    let partner = Partner::Curve(circle(n, 0.5, 2.0, -1.0)?);
    let pair = ribaucour_evolve(&a, &circle(n, 1.0, 2.0, 1.0)?, &partner)?;
    let rep = verify_ribaucour(&pair, Stencil::Fourth, &RibaucourTolerances::default());
    println!("Ribaucour pair: {}", rep.passes);

    let opts = AnalysisOptions::default();
    for (name, g) in [("f", &pair.f), ("f_hat", &pair.f_hat)] {
        let pd = curvature_sphere_fields(g, &opts)?;
        for fam in [1, 2] {
            let d = sphere_drift(g, &pd, fam, Stencil::Fourth);
            let m = (0..g.len()).filter(|&i| pd.valid[i]).map(|i| d[i]).fold(0.0, f64::max);
            println!("{name}: family {fam} curvature sphere drift {m:.3e}");
        }
    }
    Ok(())
}
