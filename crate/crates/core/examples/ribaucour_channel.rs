//! Channel Ribaucour transform of a torus: the partner surface and the
//! sphere congruence enveloped by both.

use std::f64::consts::TAU;

use lsf::curve::contact_lift_curve;
use lsf::diff::{periodic_grid, Stencil};
use lsf::evolution::{integrate_evolution, ComplexCurve, ComplexGenerator, EvolutionOptions};
use lsf::report::RibaucourTolerances;
use lsf::ribaucour::{ribaucour_channel, verify_ribaucour, ChannelChoice};
use lsf::{PseudoVector, SpaceFormFrame};

fn main() -> lsf::Result<()> {
    let n = 64;
    let fr = SpaceFormFrame::euclidean();
    let u = periodic_grid(0.0, TAU, n);
    let pts: Vec<[f64; 2]> = u.iter().map(|s| [s.sin(), 2.0 - s.cos()]).collect();
    let nrm: Vec<[f64; 2]> = u.iter().map(|s| [-s.sin(), s.cos()]).collect();
    let c = contact_lift_curve(&pts, &nrm, TAU / n as f64, true, &fr)?;

    let gen = ComplexGenerator::RotatingPlane { a: PseudoVector::e(3), b: -PseudoVector::e(2), rate: 1.0, warp: 0.0 };
    let l = ComplexCurve::from_generator(gen, periodic_grid(0.0, TAU, n), true)?;
    let a = integrate_evolution(&l, 0, &EvolutionOptions { substeps: 4, ..Default::default() })?;

    // sphere of radius 0.4 centred at (0.5, 1) in the profile plane
    let choice = ChannelChoice::new(0.5, 1.0, 0.4);
    let pair = ribaucour_channel(&a, &c, &choice)?;
    println!("channel sphere drift {:.3e}", pair.channel_drift().unwrap_or(f64::NAN));

    let rep = verify_ribaucour(&pair, Stencil::Fourth, &RibaucourTolerances::default());
    println!("incidence {:.3e}, rank-1 margin {:.3}", rep.incidence, rep.rank1_margin);
    println!(
        "enveloping {} proper {} corresponding {} -> passes {}",
        rep.enveloping, rep.proper_pair, rep.corresponding, rep.passes
    );
    Ok(())
}
