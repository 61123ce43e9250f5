//! Ribaucour transforms of evolved surfaces.
//!
//! A partner curve `Ĉ` that meets `C` in one sphere `c0(u)` per sample is
//! evolved by the same map `A`; the pair `f = A⁻¹C`, `f̂ = A⁻¹Ĉ` then
//! envelopes `s0 = A⁻¹c0`. Choosing `Ĉ = <ĉ, c0>` for a fixed sphere `ĉ`
//! of the initial complex gives a channel partner.

use nalgebra::{DMatrix, Matrix6x2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{frame_through, OrthoMap, PseudoVector};
use crate::analysis::{curvature_sphere_fields, euclid_basis, AnalysisOptions};
use crate::curve::LegendreCurve;
use crate::diff::Stencil;
use crate::error::{Error, Result};
use crate::evolution::{evolve_surface, EvolutionMap, SurfaceOptions};
use crate::grid::SurfaceGrid;
use crate::report::{GridInfo, RibaucourReport, RibaucourTolerances, SCHEMA};
use crate::space_form::{OrientedSphere, SpaceFormFrame};
use crate::ContactFrame;

/// Relative size below which `ĉ` counts as orthogonal to a contact element.
const TANGENTIAL_TOL: f64 = 1e-9;
/// Relative singular value separating intersecting from skew planes.
const INTERSECTION_TOL: f64 = 1e-6;

/// Chart on the spheres of the complex `<l0>^⊥`.
///
/// The element `M e3 = l0` given by [`frame_through`] identifies
/// `<l0>^⊥` with `<e3>^⊥`, whose light cone holds the oriented circles and
/// points of the plane `z = 0`. The sphere with center `(x, y, 0)` and signed
/// radius `r` (a point when `r = 0`) is mapped to `ĉ = M ŝ`.
///
/// Chart boundary: spheres with `(M⁻¹ĉ, q) = 0`, i.e. the lines of the plane
/// and the point at infinity, have no coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelChoice {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

impl ChannelChoice {
    /// Number of real parameters of the channel family.
    pub const DIM: usize = 3;

    pub fn new(x: f64, y: f64, r: f64) -> Self {
        ChannelChoice { x, y, r }
    }

    pub fn params(&self) -> [f64; 3] {
        [self.x, self.y, self.r]
    }

    pub fn from_params(p: [f64; 3]) -> Self {
        ChannelChoice::new(p[0], p[1], p[2])
    }

    /// `ĉ` for the complex `l0`.
    pub fn sphere(&self, l0: &PseudoVector) -> Result<PseudoVector> {
        if !(self.x.is_finite() && self.y.is_finite() && self.r.is_finite()) {
            return Err(Error::Config("channel parameters must be finite".into()));
        }
        let m = chart_map(l0)?;
        let fr = SpaceFormFrame::euclidean();
        let c = [self.x, self.y, 0.0];
        let s = if self.r == 0.0 {
            fr.lift_point(c)?
        } else {
            fr.lift_sphere(&OrientedSphere { center: c, radius: self.r })?
        };
        Ok(m.apply(&s))
    }

    /// Chart coordinates of a null vector of `<l0>^⊥`; `None` on the chart
    /// boundary.
    pub fn from_sphere(c_hat: &PseudoVector, l0: &PseudoVector) -> Result<Option<Self>> {
        check_membership(c_hat, l0)?;
        let m = chart_map(l0)?;
        let y = m.inverse().apply(c_hat);
        let fr = SpaceFormFrame::euclidean();
        let yq = y.inner(&fr.q);
        if yq.abs() <= 1e-12 * y.euclid_norm() {
            return Ok(None);
        }
        let y = y * (-1.0 / yq);
        Ok(Some(ChannelChoice::new(y.0[0], y.0[1], -y.inner(&fr.p))))
    }
}

fn chart_map(l0: &PseudoVector) -> Result<OrthoMap> {
    frame_through(l0, 2)
        .ok_or_else(|| Error::ComplexMembership("initial complex is not a unit spacelike vector".into()))
}

fn check_membership(c_hat: &PseudoVector, l0: &PseudoVector) -> Result<()> {
    let n = c_hat.euclid_norm();
    if !(n > 0.0) || !c_hat.is_finite() {
        return Err(Error::ComplexMembership("sphere vector is zero".into()));
    }
    let null = c_hat.square().abs() / (n * n);
    let perp = c_hat.inner(l0).abs() / (n * l0.euclid_norm());
    if null > 1e-9 {
        return Err(Error::ComplexMembership(format!("(c, c) = {null:e} relative, not a sphere")));
    }
    if perp > 1e-9 {
        return Err(Error::ComplexMembership(format!("(c, l0) = {perp:e} relative")));
    }
    Ok(())
}

/// Partner of the base curve.
#[derive(Clone, Debug, PartialEq)]
pub enum Partner {
    /// Fixed sphere `ĉ` of the initial complex (channel partner).
    Sphere(PseudoVector),
    /// Legendre curve meeting `C` in exactly one sphere per sample.
    Curve(LegendreCurve),
}

/// Channel partner `Ĉ = <ĉ, c0>` with `c0 = (ρ2, ĉ) ρ1 − (ρ1, ĉ) ρ2`,
/// Euclidean-normalized with canonical sign. Returns `(Ĉ, c0)`.
pub fn channel_partner(c: &LegendreCurve, c_hat: &PseudoVector) -> Result<(LegendreCurve, Vec<PseudoVector>)> {
    check_membership(c_hat, &c.ambient)?;
    let s = c_hat.euclid_normalized().expect("nonzero");
    let mut c0 = Vec::with_capacity(c.len());
    for (iu, fr) in c.frames.iter().enumerate() {
        let (r1, r2) = (fr.0, fr.1);
        let (a, b) = (r1.inner(&s), r2.inner(&s));
        let scale = r1.euclid_norm().max(r2.euclid_norm());
        if a.hypot(b) <= TANGENTIAL_TOL * scale {
            return Err(Error::TangentialChoice(iu));
        }
        let x = r1 * b - r2 * a;
        c0.push(x.euclid_normalized().ok_or(Error::TangentialChoice(iu))?.with_canonical_sign());
    }
    let frames = c0.iter().map(|x| ContactFrame(s, *x)).collect();
    let hat = LegendreCurve::new(c.u.clone(), frames, c.ambient, c.closed)?;
    Ok((hat, c0))
}

/// Common sphere of two contact elements, from the null space of
/// `[ρ1 ρ2 −ρ̂1 −ρ̂2]`.
fn common_sphere(a: &ContactFrame, b: &ContactFrame, i: usize) -> Result<PseudoVector> {
    let cols: Vec<PseudoVector> = [a.0, a.1, -b.0, -b.1].iter().map(|x| x.euclid_normalized().unwrap_or(*x)).collect();
    let m = DMatrix::from_fn(6, 4, |r, k| cols[k].0[r]);
    let svd = (m.transpose() * &m).symmetric_eigen();
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&x, &y| svd.eigenvalues[x].total_cmp(&svd.eigenvalues[y]));
    let sv = |k: usize| svd.eigenvalues[order[k]].max(0.0).sqrt();
    if sv(1) <= INTERSECTION_TOL {
        return Err(Error::CurvesCoincide);
    }
    if sv(0) > INTERSECTION_TOL {
        return Err(Error::NoCommonSphere(i));
    }
    let k = svd.eigenvectors.column(order[0]);
    let x = cols[0] * k[0] + cols[1] * k[1];
    Ok(x.euclid_normalized().ok_or(Error::NoCommonSphere(i))?.with_canonical_sign())
}

/// Two surfaces on one grid with their common sphere congruence.
#[derive(Clone, Debug, PartialEq)]
pub struct RibaucourPair {
    pub f: SurfaceGrid,
    pub f_hat: SurfaceGrid,
    pub s0: Vec<PseudoVector>,
    /// Fixed sphere of the channel construction.
    pub c_hat: Option<PseudoVector>,
}

impl RibaucourPair {
    /// Pairs two grids; `s0` is the bisector of the closest directions of the
    /// two contact elements.
    pub fn from_surfaces(f: SurfaceGrid, f_hat: SurfaceGrid) -> Result<Self> {
        if f.nu() != f_hat.nu() || f.nv() != f_hat.nv() {
            return Err(Error::IncompatibleGrids(format!("{}x{} vs {}x{}", f.nu(), f.nv(), f_hat.nu(), f_hat.nv())));
        }
        let s0 = f.frames.par_iter().zip(&f_hat.frames).map(|(a, b)| principal(a, b).2).collect();
        Ok(RibaucourPair { f, f_hat, s0, c_hat: None })
    }

    /// The pair with roles exchanged.
    pub fn swapped(&self) -> Self {
        RibaucourPair { f: self.f_hat.clone(), f_hat: self.f.clone(), s0: self.s0.clone(), c_hat: None }
    }

    /// `max ‖A⁻¹ĉ(u, v) − A⁻¹ĉ(u0, v)‖` over the grid: the enveloped sphere of
    /// a channel partner should depend on `v` only.
    pub fn channel_drift(&self) -> Option<f64> {
        self.c_hat?;
        let nv = self.f_hat.nv();
        let unit = |x: &PseudoVector| x.euclid_normalized().unwrap_or(*x);
        Some(
            (0..self.f_hat.len())
                .map(|i| (unit(&self.f_hat.frames[i].0) - unit(&self.f_hat.frames[i % nv].0)).euclid_norm())
                .fold(0.0, f64::max),
        )
    }
}

/// Evolves `C` and its partner by `A`.
pub fn ribaucour_evolve(a: &EvolutionMap, c: &LegendreCurve, partner: &Partner) -> Result<RibaucourPair> {
    let (hat, c0, c_hat) = match partner {
        Partner::Sphere(s) => {
            check_membership(s, &a.l0())?;
            let (hat, c0) = channel_partner(c, s)?;
            let fixed = hat.frames[0].0;
            (hat, c0, Some(fixed))
        }
        Partner::Curve(h) => {
            if h.len() != c.len() {
                return Err(Error::IncompatibleGrids("partner curve length".into()));
            }
            let c0 = c
                .frames
                .iter()
                .zip(&h.frames)
                .enumerate()
                .map(|(i, (x, y))| common_sphere(x, y, i))
                .collect::<Result<Vec<_>>>()?;
            (h.clone(), c0, None)
        }
    };
    let opts = SurfaceOptions::default();
    let f = evolve_surface(a, c, &opts)?;
    let f_hat = evolve_surface(a, &hat, &opts)?;
    let nv = f.nv();
    let inv: Vec<OrthoMap> = a.maps.iter().map(OrthoMap::inverse).collect();
    let s0 = (0..f.len()).map(|i| inv[i % nv].apply(&c0[i / nv])).collect();
    Ok(RibaucourPair { f, f_hat, s0, c_hat })
}

/// Channel partner from chart coordinates.
pub fn ribaucour_channel(a: &EvolutionMap, c: &LegendreCurve, choice: &ChannelChoice) -> Result<RibaucourPair> {
    let s = choice.sphere(&a.l0())?;
    ribaucour_evolve(a, c, &Partner::Sphere(s))
}

/// Sines of the principal angles `(θ1 ≤ θ2)` between two contact elements
/// and the bisector of the first principal pair.
fn principal(a: &ContactFrame, b: &ContactFrame) -> (f64, f64, PseudoVector) {
    let qa = euclid_basis(a);
    let qb = euclid_basis(b);
    // sines from the part of qb off span(qa); well conditioned near θ = 0
    let off = |x: &PseudoVector| *x - qa[0] * x.euclid_dot(&qa[0]) - qa[1] * x.euclid_dot(&qa[1]);
    let p = Matrix6x2::from_columns(&[off(&qb[0]).0, off(&qb[1]).0]);
    let sv = p.svd(false, true);
    let (k0, k1) = if sv.singular_values[0] <= sv.singular_values[1] { (0, 1) } else { (1, 0) };
    let vt = sv.v_t.expect("v_t");
    let y = qb[0] * vt[(k0, 0)] + qb[1] * vt[(k0, 1)];
    let x = qa[0] * y.euclid_dot(&qa[0]) + qa[1] * y.euclid_dot(&qa[1]);
    let mid = (x + y).euclid_normalized().unwrap_or(y);
    (sv.singular_values[k0].min(1.0), sv.singular_values[k1].min(1.0), mid.with_canonical_sign())
}

fn span_distance(s: &PseudoVector, fr: &ContactFrame) -> f64 {
    let q = euclid_basis(fr);
    let s = s.euclid_normalized().unwrap_or(*s);
    (s - q[0] * s.euclid_dot(&q[0]) - q[1] * s.euclid_dot(&q[1])).euclid_norm()
}

/// Curvature-sphere residuals `[u, v]` (max over valid cells), or infinity
/// when the grid lines are not curvature lines at all.
fn correspondence(g: &SurfaceGrid, stencil: Stencil, notes: &mut Vec<String>, name: &str) -> [f64; 2] {
    let opts = AnalysisOptions { stencil, ..Default::default() };
    match curvature_sphere_fields(g, &opts) {
        Ok(pd) => {
            let max = |r: &[f64]| (0..pd.len()).filter(|&i| pd.valid[i]).map(|i| r[i]).fold(0.0, f64::max);
            [max(&pd.residual1), max(&pd.residual2)]
        }
        Err(e) => {
            notes.push(format!("{name}: {e}"));
            [f64::INFINITY; 2]
        }
    }
}

/// Checks the enveloping, rank-one intersection and curvature-line
/// correspondence conditions.
pub fn verify_ribaucour(pair: &RibaucourPair, stencil: Stencil, tol: &RibaucourTolerances) -> RibaucourReport {
    let (f, h) = (&pair.f, &pair.f_hat);
    let mut notes = Vec::new();
    let cells: Vec<(f64, f64, f64)> = (0..f.len())
        .into_par_iter()
        .map(|i| {
            let (s1, s2, _) = principal(&f.frames[i], &h.frames[i]);
            let inc = span_distance(&pair.s0[i], &f.frames[i]).max(span_distance(&pair.s0[i], &h.frames[i]));
            (s1.asin(), s2, inc)
        })
        .collect();
    let used: Vec<usize> = (0..f.len()).filter(|&i| f.valid(i) && h.valid(i)).collect();
    let incidence = used.iter().map(|&i| cells[i].2).fold(0.0, f64::max);
    let intersection_angle = used.iter().map(|&i| cells[i].0).fold(0.0, f64::max);
    let rank1_margin = used.iter().map(|&i| cells[i].1).fold(f64::INFINITY, f64::min);
    let rank1_margin = if used.is_empty() { 0.0 } else { rank1_margin };
    let correspondence_f = correspondence(f, stencil, &mut notes, "f");
    let correspondence_f_hat = correspondence(h, stencil, &mut notes, "f_hat");

    let enveloping = incidence <= tol.incidence && intersection_angle.sin() <= tol.incidence;
    let proper_pair = enveloping && rank1_margin >= tol.margin;
    if !enveloping {
        notes.push("contact elements do not share a sphere".into());
    } else if rank1_margin < tol.margin {
        notes.push("not a proper pair: intersection rank 2".into());
    }
    let corresponding = correspondence_f.iter().chain(&correspondence_f_hat).all(|r| *r <= tol.correspondence);
    RibaucourReport {
        schema: SCHEMA.into(),
        grid: GridInfo::of(f),
        incidence,
        intersection_angle,
        rank1_margin,
        correspondence_f,
        correspondence_f_hat,
        enveloping,
        proper_pair,
        corresponding,
        passes: enveloping && proper_pair && corresponding,
        tolerances: *tol,
        notes,
    }
}
