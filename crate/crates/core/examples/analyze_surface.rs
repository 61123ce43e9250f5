//! Classifies a surface swept by a polynomial family of planes: the
//! curvature lines of the first family are spherical, the others are not.

use lsf::analysis::{analyze_surface, AnalysisOptions};
use lsf::curve::contact_lift_curve;
use lsf::diff::linspace;
use lsf::evolution::{
    evolve_surface, integrate_evolution, ComplexCurve, ComplexGenerator, EvolutionOptions, SurfaceOptions,
};
use lsf::{PseudoVector, SpaceFormFrame};

fn main() -> lsf::Result<()> {
    let n = 65;
    let fr = SpaceFormFrame::euclidean();
    let e = PseudoVector::e;

    // ellipse arc
    let t = linspace(0.2, 1.3, n);
    let pts: Vec<[f64; 2]> = t.iter().map(|t| [1.3 * t.cos(), 2.5 + 0.8 * t.sin()]).collect();
    let nrm: Vec<[f64; 2]> = t
        .iter()
        .map(|t| {
            let (x, y) = (-0.8 * t.cos(), -1.3 * t.sin());
            [x / x.hypot(y), y / x.hypot(y)]
        })
        .collect();
    let c = contact_lift_curve(&pts, &nrm, t[1] - t[0], false, &fr)?;

    let gen = ComplexGenerator::Polynomial {
        base: e(3),
        dirs: vec![e(2), e(5) - e(4), e(6), e(1), e(4)],
        coeffs: vec![
            vec![0.0, -0.8],
            vec![0.0, 0.0, 0.3],
            vec![0.0, 0.3],
            vec![0.0, 0.0, 0.3],
            vec![0.0, 0.0, 0.0, 0.05],
        ],
    };
    let l = ComplexCurve::from_generator(gen, linspace(0.0, 1.5, n), false)?;
    let a = integrate_evolution(&l, 0, &EvolutionOptions { substeps: 2, ..Default::default() })?;
    let g = evolve_surface(&a, &c, &SurfaceOptions::default())?;

    let (rep, err) = analyze_surface(&g, &fr, &AnalysisOptions::default());
    if let Some(e) = err {
        return Err(e);
    }
    println!("channel {:?}, Blaschke type {:?}", rep.channel.unwrap(), rep.blaschke);
    for f in &rep.families {
        let r = f.spherical_residual.as_ref().map(|s| s.max);
        println!("family {}: spherical {:?} (max residual {:?}), source {:?}", f.family, f.spherical, r, f.source);
    }
    Ok(())
}
