//! Surfaces with spherical curvature lines in Lie sphere geometry.
//!
//! Points, oriented spheres and planes of 3-space are points of the
//! projectivized light cone of the (4,2) space; contact elements are isotropic
//! 2-planes. On top of that model this crate provides:
//!
//! * [`algebra`]: metric arithmetic, bivectors, signatures, group elements;
//! * [`space_form`]: Euclidean lifts and projections;
//! * [`curve`]: Legendre curves, curvature, constrained-elastica detection;
//! * [`elastica`]: the constrained elastica ODE and frame reconstruction;
//! * [`evolution`]: spherical evolution maps and evolved surfaces;
//! * [`analysis`]: curvature spheres, osculating complexes, classification;
//! * [`ribaucour`]: channel Ribaucour transforms of evolved surfaces;
//! * [`io`] and [`cli`]: file schemas, mesh export and the `lsf` driver.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod analysis;
pub mod cli;
pub mod curve;
pub mod diff;
pub mod elastica;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod io;
pub mod report;
pub mod ribaucour;
pub mod space_form;

pub use algebra::{inner, wedge_apply, Bivector, OrthoMap, PseudoVector, Signature, Subspace};
pub use error::{Error, Result};
pub use space_form::SpaceFormFrame;

/// Isotropic 2-plane (contact element) given by two spanning vectors.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ContactFrame(pub PseudoVector, pub PseudoVector);

impl ContactFrame {
    pub fn new(a: PseudoVector, b: PseudoVector) -> Self {
        ContactFrame(a, b)
    }

    /// Largest `|(a,b)|` over the three pairings, each relative to the
    /// Euclidean sizes involved.
    pub fn isotropy_defect(&self) -> f64 {
        let (a, b) = (self.0, self.1);
        let na = a.euclid_norm().max(f64::MIN_POSITIVE);
        let nb = b.euclid_norm().max(f64::MIN_POSITIVE);
        (a.square().abs() / (na * na)).max(b.square().abs() / (nb * nb)).max(a.inner(&b).abs() / (na * nb))
    }

    pub fn map(&self, f: impl Fn(&PseudoVector) -> PseudoVector) -> ContactFrame {
        ContactFrame(f(&self.0), f(&self.1))
    }

    pub fn vectors(&self) -> [PseudoVector; 2] {
        [self.0, self.1]
    }

    /// Solves `a·ρ₁ + b·ρ₂` for the two linear conditions
    /// `(x, p) = rp`, `(x, q) = rq`. Returns `None` when the 2×2 system is
    /// singular relative to the frame scale.
    pub fn solve_pairing(&self, p: &PseudoVector, rp: f64, q: &PseudoVector, rq: f64) -> Option<PseudoVector> {
        let (r1, r2) = (self.0, self.1);
        let m11 = r1.inner(p);
        let m12 = r2.inner(p);
        let m21 = r1.inner(q);
        let m22 = r2.inner(q);
        let det = m11 * m22 - m12 * m21;
        let scale = r1.euclid_norm() * r2.euclid_norm() * p.euclid_norm() * q.euclid_norm();
        if det.abs() <= 1e-12 * scale || !det.is_finite() {
            return None;
        }
        let a = (rp * m22 - m12 * rq) / det;
        let b = (m11 * rq - rp * m21) / det;
        Some(a * r1 + b * r2)
    }
}
