//! One-family Lie-applicability: a sech elastica swept by planes from a
//! 4-dimensional complex is detected; a fifth direction breaks it.

use lsf::analysis::{analyze_surface, AnalysisOptions};
use lsf::curve::elastic_complex_vector;
use lsf::diff::linspace;
use lsf::elastica::{legendre_lift, solve_elastica, ElasticaParams, FrameInit};
use lsf::evolution::{
    evolve_surface, integrate_evolution, ComplexCurve, ComplexGenerator, EvolutionOptions, SurfaceOptions,
};
use lsf::{PseudoVector, SpaceFormFrame};

fn main() -> lsf::Result<()> {
    let fr = SpaceFormFrame::euclidean();
    let e = PseudoVector::e;
    let sol =
        solve_elastica(&ElasticaParams::sech(5.0, 0.01), Some(FrameInit::planar(&fr, [0.0, 0.0], 0.0)?), &fr, 100)?;
    let r = elastic_complex_vector(&sol.geometry, sol.params.mu, sol.params.lambda, &fr)[0];
    let c = legendre_lift(&sol.geometry, &e(3))?;

    for pert in [0.0, 0.1] {
        let gen = ComplexGenerator::Polynomial {
            base: e(3),
            dirs: vec![r, fr.p, fr.q, e(1)],
            coeffs: vec![vec![0.0, 0.3], vec![0.0, 0.0, 0.2], vec![0.0, 0.0, 0.0, 0.1], vec![0.0, 0.0, 0.0, 0.0, pert]],
        };
        let l = ComplexCurve::from_generator(gen, linspace(0.0, 1.0, 101), false)?;
        let a = integrate_evolution(&l, 0, &EvolutionOptions { substeps: 2, ..Default::default() })?;
        let g = evolve_surface(&a, &c, &SurfaceOptions::default())?;
        let (rep, _) = analyze_surface(&g, &fr, &AnalysisOptions::default());
        match rep.lie_applicability {
            Some(la) => println!(
                "perturbation {pert}: envelope dim {}, elastic residual {:?}, applicable {}",
                la.envelope_dim, la.elastic_residual, la.verdict
            ),
            None => println!("perturbation {pert}: test not run ({:?})", rep.notes),
        }
    }
    Ok(())
}
