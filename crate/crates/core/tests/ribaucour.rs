mod common;

use common::*;
use lsf::analysis::{curvature_sphere_fields, sphere_drift, AnalysisOptions};
use lsf::diff::Stencil;
use lsf::report::RibaucourTolerances;
use lsf::ribaucour::*;
use lsf::Error;

#[test]
fn channel_transform_of_torus() {
    let n = 64;
    let pair = ribaucour_channel(&revolution(n), &circle(n, 1.0, 2.0), &ChannelChoice::new(0.5, 1.0, 0.4)).unwrap();
    assert!(pair.channel_drift().unwrap() <= 1e-8);
    let rep = verify_ribaucour(&pair, Stencil::Fourth, &RibaucourTolerances::default());
    assert!(rep.passes, "{rep:?}");
    assert!(rep.incidence <= 1e-8 && rep.rank1_margin >= 1e-3);
    let back = verify_ribaucour(&pair.swapped(), Stencil::Fourth, &RibaucourTolerances::default());
    assert_eq!(
        (back.enveloping, back.proper_pair, back.corresponding),
        (rep.enveloping, rep.proper_pair, rep.corresponding)
    );
}

#[test]
fn point_sphere_choice() {
    let n = 48;
    let pair = ribaucour_channel(&revolution(n), &circle(n, 1.0, 2.0), &ChannelChoice::new(0.3, 0.8, 0.0)).unwrap();
    let rep = verify_ribaucour(&pair, Stencil::Fourth, &RibaucourTolerances::default());
    assert!(rep.enveloping, "{rep:?}");
}

#[test]
fn concentric_circles_give_dupin_pair() {
    let n = 96;
    // inner circle with the opposite orientation: corresponding contact
    // elements share the sphere centred midway between them
    let inner = oriented_circle(n, 0.5, 2.0, -1.0);
    let pair = ribaucour_evolve(&revolution(n), &circle(n, 1.0, 2.0), &Partner::Curve(inner)).unwrap();
    let rep = verify_ribaucour(&pair, Stencil::Fourth, &RibaucourTolerances::default());
    assert!(rep.passes, "{rep:?}");
    let opts = AnalysisOptions::default();
    for g in [&pair.f, &pair.f_hat] {
        let pd = curvature_sphere_fields(g, &opts).unwrap();
        for fam in [1, 2] {
            let d = sphere_drift(g, &pd, fam, Stencil::Fourth);
            let m = max((0..g.len()).filter(|&i| pd.valid[i]).map(|i| d[i]));
            assert!(m <= 1e-6, "family {fam}: {m}");
        }
    }
}

#[test]
fn unrelated_surfaces_do_not_envelope() {
    let pair = RibaucourPair::from_surfaces(torus(49), generic_surface(49)).unwrap();
    let rep = verify_ribaucour(&pair, Stencil::Fourth, &RibaucourTolerances::default());
    assert!(!rep.enveloping && !rep.passes);
    assert!(rep.notes.iter().any(|n| n.contains("do not share a sphere")));
}

#[test]
fn surface_with_itself_is_flagged() {
    let g = torus(32);
    let pair = RibaucourPair::from_surfaces(g.clone(), g).unwrap();
    let rep = verify_ribaucour(&pair, Stencil::Fourth, &RibaucourTolerances::default());
    assert!(!rep.proper_pair && !rep.passes);
    assert!(rep.notes.iter().any(|n| n.contains("not a proper pair")));
}

#[test]
fn sphere_outside_the_complex_is_rejected() {
    let n = 32;
    let bad = e(3) + e(6);
    assert!(matches!(
        ribaucour_evolve(&revolution(n), &circle(n, 1.0, 2.0), &Partner::Sphere(bad)),
        Err(Error::ComplexMembership(_))
    ));
}

#[test]
fn choice_space_has_three_parameters() {
    assert_eq!(ChannelChoice::DIM, 3);
    let ch = ChannelChoice::new(-0.4, 0.7, 0.25);
    let s = ch.sphere(&e(3)).unwrap();
    let back = ChannelChoice::from_sphere(&s, &e(3)).unwrap().unwrap();
    for (a, b) in ch.params().iter().zip(back.params()) {
        assert!((a - b).abs() <= 1e-12);
    }
}
