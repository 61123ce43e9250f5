//! Curvature spheres, special lifts, osculating complexes and the
//! classification of sampled Legendre surfaces.
//!
//! Conventions: `u` lines are the curvature lines of family 1, `v` lines those
//! of family 2. Curvature spheres are stored as Euclidean-unit vectors `ŝ1`,
//! `ŝ2` with `∂_u ŝ1 = a ŝ1 + b ŝ2` and `∂_v ŝ2 = c ŝ1 + d ŝ2`. Special lifts
//! `σ1 = φ ŝ1`, `σ2 = ψ ŝ2` satisfy `σ1_u = β σ2`, `σ2_v = γ σ1`.

use nalgebra::{Matrix2, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{orthonormal_span, subspace_signature, PseudoVector, Signature, Subspace};
use crate::curve::{curve_geometry, detect_constrained_elastic};
use crate::diff::{cumulative_integral, derivative, second_derivative, Stencil};
use crate::error::{Error, Result};
use crate::evolution::{fit_constant_envelope, ComplexCurve};
use crate::grid::{along, Axis, SurfaceGrid};
use crate::report::{FamilyReport, LieApplicability, Stats, SurfaceReport};
use crate::space_form::SpaceFormFrame;
use crate::ContactFrame;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisOptions {
    pub stencil: Stencil,
    /// Median `σ_min / σ_max` of the per-direction kernel problems above
    /// which the grid is rejected as not curvature-line aligned.
    pub alignment_tol: f64,
    /// Sine of the angle between `ŝ1` and `ŝ2` below which a cell is umbilic.
    pub umbilic_tol: f64,
    /// `|b|` (resp. `|c|`) relative to the frame derivative below which a
    /// cell counts as channel-like for family 1 (resp. 2).
    pub channel_tol: f64,
    /// Threshold for spherical, planar and orthogonal flags.
    pub flag_tol: f64,
    /// Rank and null tolerance for osculating bundle signatures.
    pub rank_tol: f64,
    /// Relative singular value cut for the envelope fit.
    pub envelope_tol: f64,
    /// Orthogonality required to accept the evolution complex as `L1`.
    pub complex_tol: f64,
    /// Largest accepted constrained-elastica residual.
    pub elastic_tol: f64,
    /// Use the evolution complex stored on the grid as `L1` when certified.
    pub use_provenance: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            stencil: Stencil::Fourth,
            alignment_tol: 0.25,
            umbilic_tol: 1e-4,
            channel_tol: 1e-4,
            flag_tol: 1e-6,
            rank_tol: 1e-5,
            envelope_tol: 1e-6,
            complex_tol: 1e-8,
            elastic_tol: 1e-4,
            use_provenance: true,
        }
    }
}

impl AnalysisOptions {
    pub fn validate(&self) -> Result<()> {
        let tols = [
            self.alignment_tol,
            self.umbilic_tol,
            self.channel_tol,
            self.flag_tol,
            self.rank_tol,
            self.envelope_tol,
            self.complex_tol,
            self.elastic_tol,
        ];
        if tols.iter().all(|t| t.is_finite() && *t > 0.0) {
            Ok(())
        } else {
            Err(Error::Config("analysis tolerances must be positive".into()))
        }
    }
}

/// Special lifts `σ1 = φ ŝ1`, `σ2 = ψ ŝ2` with their couplings.
///
/// The scalings are kept as logarithms: on badly conditioned grids `φ`,
/// `ψ` span many orders of magnitude and `sigma*`, `beta`, `gamma` may
/// overflow while the logarithms stay usable.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecialLifts {
    pub ln_phi: Vec<f64>,
    pub ln_psi: Vec<f64>,
    pub sigma1: Vec<PseudoVector>,
    pub sigma2: Vec<PseudoVector>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

/// Initial data of the lift scalings: `φ(0, v) = phi0[v]`, `ψ(u, 0) = psi0[u]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftGauge {
    pub phi0: Vec<f64>,
    pub psi0: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalData {
    pub nu: usize,
    pub nv: usize,
    pub s1: Vec<PseudoVector>,
    pub s2: Vec<PseudoVector>,
    pub umbilic: Vec<bool>,
    /// Regular and not umbilic.
    pub valid: Vec<bool>,
    /// Median `σ_min / σ_max` over valid cells and both directions.
    pub misalignment: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    /// `‖P_f ∂_u ŝ1‖` and `‖P_f ∂_v ŝ2‖`.
    pub residual1: Vec<f64>,
    pub residual2: Vec<f64>,
    /// Cells where `b` (resp. `c`) is below the channel floor.
    pub channel_like1: Vec<bool>,
    pub channel_like2: Vec<bool>,
    /// More than half of the valid cells are channel-like.
    pub channel: [bool; 2],
    pub lifts: Option<SpecialLifts>,
}

impl PrincipalData {
    pub fn len(&self) -> usize {
        self.s1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s1.is_empty()
    }

    pub fn umbilic_fraction(&self) -> f64 {
        let n = self.umbilic.len().max(1);
        self.umbilic.iter().filter(|&&x| x).count() as f64 / n as f64
    }
}

/// Euclidean-orthonormal basis of a contact element.
pub(crate) fn euclid_basis(c: &ContactFrame) -> [PseudoVector; 2] {
    let e1 = c.0.euclid_normalized().unwrap_or(c.0);
    let r = c.1 - e1 * c.1.euclid_dot(&e1);
    [e1, r.euclid_normalized().unwrap_or(r)]
}

fn off(x: &PseudoVector, e: &[PseudoVector; 2]) -> PseudoVector {
    *x - e[0] * x.euclid_dot(&e[0]) - e[1] * x.euclid_dot(&e[1])
}

/// Unit kernel vector of `[m1 m2]` and its smallest / largest singular values.
fn kernel(m1: &PseudoVector, m2: &PseudoVector) -> ([f64; 2], f64, f64) {
    let x = m1.euclid_dot(m2);
    let n = Matrix2::new(m1.euclid_dot(m1), x, x, m2.euclid_dot(m2));
    let eig = SymmetricEigen::new(n);
    let (lo, hi) = if eig.eigenvalues[0] <= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let v = eig.eigenvectors.column(lo);
    ([v[0], v[1]], eig.eigenvalues[lo].max(0.0).sqrt(), eig.eigenvalues[hi].max(0.0).sqrt())
}

/// Flips signs so that neighbouring vectors have positive Euclidean dot
/// products: down the first column, then along each row.
pub(crate) fn orient(nu: usize, nv: usize, field: &mut [PseudoVector]) {
    if field.is_empty() {
        return;
    }
    field[0] = field[0].with_canonical_sign();
    for iu in 0..nu {
        if iu > 0 {
            let prev = field[(iu - 1) * nv];
            if field[iu * nv].euclid_dot(&prev) < 0.0 {
                field[iu * nv] = -field[iu * nv];
            }
        }
        for iv in 1..nv {
            let prev = field[iu * nv + iv - 1];
            if field[iu * nv + iv].euclid_dot(&prev) < 0.0 {
                field[iu * nv + iv] = -field[iu * nv + iv];
            }
        }
    }
}

fn d_along<T: crate::diff::Field + Send + Sync>(g: &SurfaceGrid, f: &[T], axis: Axis, stencil: Stencil) -> Vec<T> {
    let closed = match axis {
        Axis::U => g.wrap_u,
        Axis::V => g.wrap_v,
    };
    along(g, f, axis, closed, |x, h, c| derivative(x, h, c, stencil))
}

/// Coefficients of `y ≈ x1 ŝ1 + x2 ŝ2` in the Euclidean least-squares sense.
fn decompose(y: &PseudoVector, s1: &PseudoVector, s2: &PseudoVector) -> [f64; 2] {
    let g12 = s1.euclid_dot(s2);
    let det = 1.0 - g12 * g12;
    if det <= 1e-24 {
        return [0.0, 0.0];
    }
    let (r1, r2) = (y.euclid_dot(s1), y.euclid_dot(s2));
    [(r1 - g12 * r2) / det, (r2 - g12 * r1) / det]
}

/// Curvature-sphere fields of a curvature-line aligned grid.
///
/// Per cell the kernel of `(x, y) ↦ P_f(x ∂_u e1 + y ∂_u e2)` (smallest
/// singular vector) gives `ŝ1`, with `e1, e2` a Euclidean-orthonormal basis
/// of `f` and `P_f` the Euclidean projection off `f`; likewise `ŝ2` from
/// `∂_v`.
pub fn curvature_sphere_fields(g: &SurfaceGrid, opts: &AnalysisOptions) -> Result<PrincipalData> {
    g.check()?;
    opts.validate()?;
    let (nu, nv) = (g.nu(), g.nv());
    let n = g.len();
    let basis: Vec<[PseudoVector; 2]> = g.frames.par_iter().map(euclid_basis).collect();
    let e1: Vec<PseudoVector> = basis.iter().map(|b| b[0]).collect();
    let e2: Vec<PseudoVector> = basis.iter().map(|b| b[1]).collect();
    let (e1u, e1v) = (d_along(g, &e1, Axis::U, opts.stencil), d_along(g, &e1, Axis::V, opts.stencil));
    let (e2u, e2v) = (d_along(g, &e2, Axis::U, opts.stencil), d_along(g, &e2, Axis::V, opts.stencil));

    type Cell = (PseudoVector, PseudoVector, f64, f64, f64, f64);
    let cells: Vec<Cell> = (0..n)
        .into_par_iter()
        .map(|i| {
            let b = &basis[i];
            let (k1, lo1, hi1) = kernel(&off(&e1u[i], b), &off(&e2u[i], b));
            let (k2, lo2, hi2) = kernel(&off(&e1v[i], b), &off(&e2v[i], b));
            let s1 = b[0] * k1[0] + b[1] * k1[1];
            let s2 = b[0] * k2[0] + b[1] * k2[1];
            let r1 = if hi1 > 0.0 { lo1 / hi1 } else { 0.0 };
            let r2 = if hi2 > 0.0 { lo2 / hi2 } else { 0.0 };
            (s1, s2, r1, r2, hi1, hi2)
        })
        .collect();
    let mut s1: Vec<PseudoVector> = cells.iter().map(|c| c.0).collect();
    let mut s2: Vec<PseudoVector> = cells.iter().map(|c| c.1).collect();
    orient(nu, nv, &mut s1);
    orient(nu, nv, &mut s2);

    let umbilic: Vec<bool> = (0..n)
        .map(|i| {
            let c = s1[i].euclid_dot(&s2[i]);
            (1.0 - c * c).max(0.0).sqrt() < opts.umbilic_tol
        })
        .collect();
    let valid: Vec<bool> = (0..n).map(|i| g.valid(i) && !umbilic[i]).collect();
    let ratios: Vec<f64> = (0..n).filter(|&i| valid[i]).flat_map(|i| [cells[i].2, cells[i].3]).collect();
    let misalignment = if ratios.is_empty() { 0.0 } else { crate::diff::median(ratios) };
    if misalignment > opts.alignment_tol {
        return Err(Error::NotCurvatureAligned(misalignment));
    }

    let s1u = d_along(g, &s1, Axis::U, opts.stencil);
    let s2v = d_along(g, &s2, Axis::V, opts.stencil);
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut residual1 = vec![0.0; n];
    let mut residual2 = vec![0.0; n];
    let mut channel_like1 = vec![false; n];
    let mut channel_like2 = vec![false; n];
    for i in 0..n {
        [a[i], b[i]] = decompose(&s1u[i], &s1[i], &s2[i]);
        [c[i], d[i]] = decompose(&s2v[i], &s1[i], &s2[i]);
        residual1[i] = off(&s1u[i], &basis[i]).euclid_norm();
        residual2[i] = off(&s2v[i], &basis[i]).euclid_norm();
        channel_like1[i] = b[i].abs() <= opts.channel_tol * cells[i].4;
        channel_like2[i] = c[i].abs() <= opts.channel_tol * cells[i].5;
    }
    let nvalid = valid.iter().filter(|&&x| x).count().max(1);
    let frac = |mask: &[bool]| (0..n).filter(|&i| valid[i] && mask[i]).count() as f64 / nvalid as f64;
    let channel = [frac(&channel_like1) >= 0.5, frac(&channel_like2) >= 0.5];
    Ok(PrincipalData {
        nu,
        nv,
        s1,
        s2,
        umbilic,
        valid,
        misalignment,
        a,
        b,
        c,
        d,
        residual1,
        residual2,
        channel_like1,
        channel_like2,
        channel,
        lifts: None,
    })
}

/// `‖∂_i ŝ_i − (ŝ_i·∂_i ŝ_i) ŝ_i‖`: how far the curvature sphere of family `i`
/// moves along its own curvature lines. Zero for circular curvature lines.
pub fn sphere_drift(g: &SurfaceGrid, pd: &PrincipalData, family: u8, stencil: Stencil) -> Vec<f64> {
    let (s, axis) = if family == 1 { (&pd.s1, Axis::U) } else { (&pd.s2, Axis::V) };
    let ds = d_along(g, s, axis, stencil);
    s.iter().zip(&ds).map(|(x, dx)| (*dx - *x * x.euclid_dot(dx)).euclid_norm()).collect()
}

fn log_gauges(g: &SurfaceGrid, pd: &PrincipalData, gauge: Option<&LiftGauge>) -> Result<(Vec<f64>, Vec<f64>)> {
    let (nu, nv) = (pd.nu, pd.nv);
    if let Some(gg) = gauge {
        if gg.phi0.len() != nv || gg.psi0.len() != nu {
            return Err(Error::IncompatibleGrids("gauge lengths".into()));
        }
        if gg.phi0.iter().chain(&gg.psi0).any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(Error::Config("gauge values must be finite and positive".into()));
        }
    }
    let ia = along(g, &pd.a, Axis::U, false, |f, h, _| cumulative_integral(f, h));
    let id = along(g, &pd.d, Axis::V, false, |f, h, _| cumulative_integral(f, h));
    let ln_phi = (0..pd.len()).map(|i| gauge.map_or(0.0, |gg| gg.phi0[i % nv].ln()) - ia[i]).collect();
    let ln_psi = (0..pd.len()).map(|i| gauge.map_or(0.0, |gg| gg.psi0[i / nv].ln()) - id[i]).collect();
    Ok((ln_phi, ln_psi))
}

/// Rescales the curvature-sphere fields to special lifts by integrating
/// `(ln φ)_u = −a` from the first row and `(ln ψ)_v = −d` from the first
/// column; then `β = φ b / ψ` and `γ = ψ c / φ`.
pub fn special_lifts(g: &SurfaceGrid, pd: &PrincipalData, gauge: Option<&LiftGauge>) -> Result<PrincipalData> {
    for (k, ch) in pd.channel.iter().enumerate() {
        if *ch {
            return Err(Error::ChannelSurface(k as u8 + 1));
        }
    }
    let (ln_phi, ln_psi) = log_gauges(g, pd, gauge)?;
    let n = pd.len();
    let lifts = SpecialLifts {
        sigma1: (0..n).map(|i| pd.s1[i] * ln_phi[i].exp()).collect(),
        sigma2: (0..n).map(|i| pd.s2[i] * ln_psi[i].exp()).collect(),
        beta: (0..n).map(|i| pd.b[i] * (ln_phi[i] - ln_psi[i]).exp()).collect(),
        gamma: (0..n).map(|i| pd.c[i] * (ln_psi[i] - ln_phi[i]).exp()).collect(),
        ln_phi,
        ln_psi,
    };
    Ok(PrincipalData { lifts: Some(lifts), ..pd.clone() })
}

/// `max ‖σ1_u − β σ2‖ / φ` and `max ‖σ2_v − γ σ1‖ / ψ` over valid cells,
/// evaluated as `‖ŝ1_u + (ln φ)_u ŝ1 − b ŝ2‖` and
/// `‖ŝ2_v + (ln ψ)_v ŝ2 − c ŝ1‖` with one-sided stencils at the line ends.
pub fn lift_normalization_residual(g: &SurfaceGrid, pd: &PrincipalData, stencil: Stencil) -> Option<[f64; 2]> {
    let l = pd.lifts.as_ref()?;
    Some(normalization_residual(g, pd, &l.ln_phi, &l.ln_psi, stencil))
}

/// The same residual computed straight from the gauge integrals.
///
/// The normalization `σ1_u ∥ σ2`, `σ2_v ∥ σ1` exists on channel surfaces too
/// (with `β` or `γ` vanishing), so no channel check is made here.
pub fn gauge_normalization_residual(
    g: &SurfaceGrid,
    pd: &PrincipalData,
    gauge: Option<&LiftGauge>,
    stencil: Stencil,
) -> Result<[f64; 2]> {
    let (ln_phi, ln_psi) = log_gauges(g, pd, gauge)?;
    Ok(normalization_residual(g, pd, &ln_phi, &ln_psi, stencil))
}

fn normalization_residual(
    g: &SurfaceGrid,
    pd: &PrincipalData,
    ln_phi: &[f64],
    ln_psi: &[f64],
    stencil: Stencil,
) -> [f64; 2] {
    let open = |f: &[f64], axis| along(g, f, axis, false, |x, h, c| derivative(x, h, c, stencil));
    let open_v = |f: &[PseudoVector], axis| along(g, f, axis, false, |x, h, c| derivative(x, h, c, stencil));
    let (lpu, lqv) = (open(ln_phi, Axis::U), open(ln_psi, Axis::V));
    let (s1u, s2v) = (open_v(&pd.s1, Axis::U), open_v(&pd.s2, Axis::V));
    let mut r = [0.0f64; 2];
    for i in (0..pd.len()).filter(|&i| pd.valid[i]) {
        r[0] = r[0].max((s1u[i] + pd.s1[i] * lpu[i] - pd.s2[i] * pd.b[i]).euclid_norm());
        r[1] = r[1].max((s2v[i] + pd.s2[i] * lqv[i] - pd.s1[i] * pd.c[i]).euclid_norm());
    }
    r
}

/// `β σ1_v − β_v σ1` (family 1) or `γ σ2_u − γ_u σ2` (family 2) evaluated
/// literally from the stored special lifts by finite differences.
///
/// Only meaningful where the lifts do not overflow; the analysis itself uses
/// the equivalent gauge-free form.
pub fn osculating_from_lifts(
    g: &SurfaceGrid,
    pd: &PrincipalData,
    family: u8,
    stencil: Stencil,
) -> Option<Vec<PseudoVector>> {
    let l = pd.lifts.as_ref()?;
    let (sigma, coef, axis) = if family == 1 { (&l.sigma1, &l.beta, Axis::V) } else { (&l.sigma2, &l.gamma, Axis::U) };
    let ds = d_along(g, sigma, axis, stencil);
    let dc = d_along(g, coef, axis, stencil);
    Some((0..pd.len()).map(|i| ds[i] * coef[i] - sigma[i] * dc[i]).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexSource {
    /// The evolution complex stored on the grid, certified orthogonal to `f`.
    Provenance,
    /// `β σ1_v − β_v σ1` (resp. `γ σ2_u − γ_u σ2`).
    SpecialLifts,
}

/// Osculating complex of one curvature family.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyComplex {
    pub family: u8,
    pub l: Vec<PseudoVector>,
    pub valid: Vec<bool>,
    pub source: ComplexSource,
    /// Largest `|(l, e)|` over unit frame vectors before projection onto `f^⊥`.
    pub raw_orthogonality: f64,
    /// Same after projection and normalization.
    pub orthogonality: f64,
    /// Osculating bundle `⟨l, ∂l, ∂²l⟩` along the transverse direction, per
    /// curvature line (sampled at the middle of the line).
    pub h_lines: Vec<Vec<PseudoVector>>,
    /// Most frequent signature of the osculating bundle over valid cells.
    pub h_signature: Option<Signature>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct OsculatingData {
    pub l1: Option<FamilyComplex>,
    pub l2: Option<FamilyComplex>,
    pub notes: Vec<String>,
}

impl OsculatingData {
    pub fn family(&self, family: u8) -> Option<&FamilyComplex> {
        if family == 1 {
            self.l1.as_ref()
        } else {
            self.l2.as_ref()
        }
    }
}

/// Unit `f^⊥` representatives of the osculating complexes.
///
/// Family 1 uses the grid's evolution complex when `use_provenance` is set
/// and it is unit, constant along `u` and orthogonal to `f` within
/// `complex_tol`: such a line is the osculating complex. Otherwise, and for
/// family 2, the special-lift expression is evaluated in its gauge-free form
/// `ŝ1_v − (b_v / b + d) ŝ1` (resp. `ŝ2_u − (c_u / c + a) ŝ2`). A channel
/// family has no such expression and is left empty.
pub fn osculating_complexes(g: &SurfaceGrid, pd: &PrincipalData, opts: &AnalysisOptions) -> Result<OsculatingData> {
    let mut out = OsculatingData::default();
    let prov = if opts.use_provenance { certified_complex(g, opts.complex_tol) } else { None };
    out.l1 = match prov {
        Some(l) => Some(finish_family(g, pd, 1, l, vec![true; pd.len()], ComplexSource::Provenance, opts)?),
        None if !pd.channel[0] => Some(formula_family(g, pd, 1, opts)?),
        None => {
            out.notes.push("family 1 is channel: osculating complex not unique".into());
            None
        }
    };
    out.l2 = if !pd.channel[1] {
        Some(formula_family(g, pd, 2, opts)?)
    } else {
        out.notes.push("family 2 is channel: osculating complex not unique".into());
        None
    };
    Ok(out)
}

fn certified_complex(g: &SurfaceGrid, tol: f64) -> Option<Vec<PseudoVector>> {
    let cx = g.complex.as_ref()?;
    let (nu, nv) = (g.nu(), g.nv());
    for (iv, l) in cx.iter().enumerate() {
        if (l.square() - 1.0).abs() > tol {
            return None;
        }
        for iu in 0..nu {
            let e = euclid_basis(g.frame(iu, iv));
            if e.iter().any(|x| x.inner(l).abs() > tol) {
                return None;
            }
        }
    }
    Some((0..nu * nv).map(|i| cx[i % nv]).collect())
}

fn formula_family(g: &SurfaceGrid, pd: &PrincipalData, family: u8, opts: &AnalysisOptions) -> Result<FamilyComplex> {
    let n = pd.len();
    let (s, coup, extra, axis, mask) = if family == 1 {
        (&pd.s1, &pd.b, &pd.d, Axis::V, &pd.channel_like1)
    } else {
        (&pd.s2, &pd.c, &pd.a, Axis::U, &pd.channel_like2)
    };
    let ln_coup: Vec<f64> = coup.iter().map(|x| x.abs().max(f64::MIN_POSITIVE).ln()).collect();
    let ds = d_along(g, s, axis, opts.stencil);
    let dlc = d_along(g, &ln_coup, axis, opts.stencil);
    let raw: Vec<PseudoVector> = (0..n).map(|i| ds[i] - s[i] * (dlc[i] + extra[i])).collect();
    let valid = (0..n).map(|i| pd.valid[i] && !mask[i]).collect();
    finish_family(g, pd, family, raw, valid, ComplexSource::SpecialLifts, opts)
}

fn finish_family(
    g: &SurfaceGrid,
    pd: &PrincipalData,
    family: u8,
    raw: Vec<PseudoVector>,
    mut valid: Vec<bool>,
    source: ComplexSource,
    opts: &AnalysisOptions,
) -> Result<FamilyComplex> {
    let n = pd.len();
    let mut raw_orth: f64 = 0.0;
    let mut l = Vec::with_capacity(n);
    for i in 0..n {
        let e = euclid_basis(&g.frames[i]);
        let x = raw[i].euclid_normalized().unwrap_or(raw[i]);
        if valid[i] {
            raw_orth = raw_orth.max(e.iter().map(|b| b.inner(&x).abs()).fold(0.0, f64::max));
        }
        // remove the pairings with f using the dual vectors G e_j
        let y = x - e[0].lowered() * x.inner(&e[0]) - e[1].lowered() * x.inner(&e[1]);
        let sq = y.square();
        if sq > 1e-12 * y.euclid_norm().powi(2) && sq.is_finite() {
            l.push(y / sq.sqrt());
        } else {
            valid[i] = false;
            l.push(y);
        }
    }
    let candidates = pd.valid.iter().filter(|&&x| x).count();
    let lost = (0..n).filter(|&i| pd.valid[i] && !valid[i]).count();
    if candidates > 0 && 2 * lost > candidates {
        return Err(Error::RegularityViolated(format!(
            "family {family}: {lost} of {candidates} cells have no spacelike osculating complex"
        )));
    }
    orient(pd.nu, pd.nv, &mut l);
    let orthogonality = (0..n)
        .filter(|&i| valid[i])
        .map(|i| {
            let e = euclid_basis(&g.frames[i]);
            e.iter().map(|b| b.inner(&l[i]).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let (h_lines, h_signature) = osculating_bundles(g, &l, &valid, family, opts);
    Ok(FamilyComplex { family, l, valid, source, raw_orthogonality: raw_orth, orthogonality, h_lines, h_signature })
}

fn osculating_bundles(
    g: &SurfaceGrid,
    l: &[PseudoVector],
    valid: &[bool],
    family: u8,
    opts: &AnalysisOptions,
) -> (Vec<Vec<PseudoVector>>, Option<Signature>) {
    let (nu, nv) = (g.nu(), g.nv());
    let (axis, closed) = if family == 1 { (Axis::V, g.wrap_v) } else { (Axis::U, g.wrap_u) };
    let st = opts.stencil;
    let d1 = along(g, l, axis, closed, |x, h, c| derivative(x, h, c, st));
    let d2 = along(g, l, axis, closed, |x, h, c| second_derivative(x, h, c, st));
    let span = |i: usize| orthonormal_span(&[l[i], d1[i], d2[i]], opts.rank_tol);
    let sigs: Vec<Signature> = (0..l.len())
        .into_par_iter()
        .filter(|&i| valid[i])
        .filter_map(|i| subspace_signature(&span(i), opts.rank_tol).ok())
        .collect();
    let lines = if family == 1 {
        (0..nv).map(|iv| span((nu / 2) * nv + iv)).collect()
    } else {
        (0..nu).map(|iu| span(iu * nv + nv / 2)).collect()
    };
    (lines, mode(&sigs))
}

fn mode(sigs: &[Signature]) -> Option<Signature> {
    let mut counts: Vec<(Signature, usize)> = Vec::new();
    for s in sigs {
        match counts.iter_mut().find(|(t, _)| t == s) {
            Some(e) => e.1 += 1,
            None => counts.push((*s, 1)),
        }
    }
    // first maximum in order of appearance
    let mut best: Option<(Signature, usize)> = None;
    for (s, c) in counts {
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((s, c));
        }
    }
    best.map(|b| b.0)
}

/// Per-cell `‖∂_i l_i‖` along the family's own direction; `NaN` on invalid
/// cells.
pub fn spherical_line_residual(g: &SurfaceGrid, od: &OsculatingData, family: u8, stencil: Stencil) -> Vec<f64> {
    let Some(fc) = od.family(family) else {
        return vec![f64::NAN; g.len()];
    };
    let axis = if family == 1 { Axis::U } else { Axis::V };
    d_along(g, &fc.l, axis, stencil)
        .iter()
        .enumerate()
        .map(|(i, d)| if fc.valid[i] { d.euclid_norm() } else { f64::NAN })
        .collect()
}

/// `(ln|β|)_uv − βγ` and `(ln|γ|)_uv − βγ` per cell, evaluated through the
/// gauge-free expressions `(ln|b|)_uv − a_v + d_u − bc` and
/// `(ln|c|)_uv + a_v − d_u − bc`. The first vanishes iff family 1 is
/// spherical, the second iff family 2 is.
pub fn lift_pde_residuals(g: &SurfaceGrid, pd: &PrincipalData, stencil: Stencil) -> [Vec<f64>; 2] {
    let n = pd.len();
    let ln = |x: &[f64]| -> Vec<f64> { x.iter().map(|v| v.abs().max(f64::MIN_POSITIVE).ln()).collect() };
    let mixed = |x: &[f64]| d_along(g, &d_along(g, x, Axis::U, stencil), Axis::V, stencil);
    let lb = mixed(&ln(&pd.b));
    let lc = mixed(&ln(&pd.c));
    let av = d_along(g, &pd.a, Axis::V, stencil);
    let du = d_along(g, &pd.d, Axis::U, stencil);
    let bc: Vec<f64> = (0..n).map(|i| pd.b[i] * pd.c[i]).collect();
    [(0..n).map(|i| lb[i] - av[i] + du[i] - bc[i]).collect(), (0..n).map(|i| lc[i] + av[i] - du[i] - bc[i]).collect()]
}

/// Blaschke's cases from the osculating bundle signatures.
pub fn blaschke_label(h1: Option<Signature>, h2: Option<Signature>) -> Option<&'static str> {
    let (h1, h2) = (h1?, h2?);
    let is = |s: Signature, p, q| s == Signature::new(p, q, 0);
    if is(h1, 2, 1) && is(h2, 2, 1) {
        Some("joachimsthal")
    } else if (is(h1, 3, 0) && is(h2, 1, 2)) || (is(h1, 1, 2) && is(h2, 3, 0)) {
        Some("monge_with_cone")
    } else if h1.is_degenerate() && h2.is_degenerate() {
        Some("doubly_planar")
    } else {
        None
    }
}

fn family_report(
    g: &SurfaceGrid,
    pd: &PrincipalData,
    od: &OsculatingData,
    family: u8,
    frame: &SpaceFormFrame,
    opts: &AnalysisOptions,
) -> FamilyReport {
    let k = family as usize - 1;
    let valid = |i: &usize| pd.valid[*i];
    let res = if family == 1 { &pd.residual1 } else { &pd.residual2 };
    let drift = sphere_drift(g, pd, family, opts.stencil);
    let mut rep = FamilyReport {
        family,
        channel: pd.channel[k],
        curvature_sphere_residual: Stats::of((0..pd.len()).filter(valid).map(|i| res[i])),
        sphere_drift: Stats::of((0..pd.len()).filter(valid).map(|i| drift[i])),
        ..FamilyReport::empty(family)
    };
    let Some(fc) = od.family(family) else {
        rep.note = Some("osculating complex unavailable (channel family)".into());
        return rep;
    };
    let sph = spherical_line_residual(g, od, family, opts.stencil);
    let cells = || (0..pd.len()).filter(|&i| fc.valid[i]);
    let s = Stats::of(cells().map(|i| sph[i]));
    let planar = cells().map(|i| fc.l[i].inner(&frame.q).abs()).fold(0.0, f64::max);
    let orth = cells().map(|i| fc.l[i].inner(&frame.p).abs()).fold(0.0, f64::max);
    rep.available = true;
    rep.source = Some(fc.source);
    rep.spherical = Some(s.max <= opts.flag_tol);
    rep.spherical_residual = Some(s);
    rep.planar_defect = Some(planar);
    rep.orthogonal_defect = Some(orth);
    rep.planar = Some(planar <= opts.flag_tol);
    rep.orthogonal = Some(orth <= opts.flag_tol);
    rep.monge = Some(planar <= opts.flag_tol && orth <= opts.flag_tol);
    rep.h_signature = fc.h_signature;
    rep.orthogonality = Some(fc.orthogonality);
    rep.raw_orthogonality = Some(fc.raw_orthogonality);
    rep.valid_fraction = cells().count() as f64 / pd.len().max(1) as f64;
    rep
}

/// One-family Lie-applicability test: the family-1 complex curve must lie in
/// a constant space of dimension at most 4 and the base curve
/// `f(·, v_base)` must be constrained elastic in `frame`.
pub fn lie_applicability(
    g: &SurfaceGrid,
    od: &OsculatingData,
    frame: &SpaceFormFrame,
    opts: &AnalysisOptions,
) -> Result<LieApplicability> {
    let fc =
        od.l1.as_ref().ok_or_else(|| Error::RegularityViolated("family 1 osculating complex unavailable".into()))?;
    let (nu, nv) = (g.nu(), g.nv());
    let row = nu / 2;
    let samples: Vec<PseudoVector> = (0..nv).map(|iv| fc.l[row * nv + iv]).collect();
    let curve = ComplexCurve::from_samples(g.v.clone(), samples, g.wrap_v)?;
    let v0 = g.base_index;
    let env = fit_constant_envelope(&curve, v0, opts.envelope_tol);
    let l0 = curve.l[v0];
    let adapted = l0.inner(&frame.p).abs() <= opts.flag_tol && l0.inner(&frame.q).abs() <= opts.flag_tol;
    let mut out = LieApplicability {
        envelope_dim: env.dim,
        envelope_residual: env.residual,
        envelope_signature: env.signature,
        w0_signature: env.w0_signature,
        frame_adapted: adapted,
        ..LieApplicability::default()
    };
    if !adapted {
        out.note = Some("space form vectors are not orthogonal to the base complex".into());
        return Ok(out);
    }
    let base = g.u_curve(v0, l0)?;
    let geom = curve_geometry(&base, frame, opts.stencil)?;
    let det = detect_constrained_elastic(&geom, frame)?;
    out.elastic_residual = Some(det.residual);
    out.complex_residual = Some(det.complex_residual);
    out.mu = Some(det.mu);
    out.lambda = Some(det.lambda);
    out.circular = det.circular;
    if let Some(w0) = &env.w0 {
        let span = Subspace::span(&[frame.p, frame.q, det.r_vec], 1e-9);
        out.w0_residual = Some(w0.iter().map(|w| span.membership_residual(w)).fold(0.0, f64::max));
    }
    out.verdict = env.dim <= 4 && det.residual <= opts.elastic_tol;
    out.note = det.note;
    Ok(out)
}

/// Assembles the diagnostic report from completed analysis stages.
pub fn classify_surface(
    g: &SurfaceGrid,
    pd: &PrincipalData,
    od: &OsculatingData,
    frame: &SpaceFormFrame,
    opts: &AnalysisOptions,
) -> SurfaceReport {
    let mut rep = SurfaceReport::new(g, opts);
    rep.misalignment = Some(pd.misalignment);
    rep.umbilic_fraction = Some(pd.umbilic_fraction());
    rep.channel = Some(pd.channel);
    rep.special_lift_residual = lift_normalization_residual(g, pd, opts.stencil)
        .or_else(|| gauge_normalization_residual(g, pd, None, opts.stencil).ok());
    rep.families = vec![family_report(g, pd, od, 1, frame, opts), family_report(g, pd, od, 2, frame, opts)];
    if !pd.channel[0] && !pd.channel[1] {
        let [r1, r2] = lift_pde_residuals(g, pd, opts.stencil);
        for (fam, r) in rep.families.iter_mut().zip([r1, r2]) {
            fam.lift_pde_residual = Some(Stats::of((0..pd.len()).filter(|&i| pd.valid[i]).map(|i| r[i].abs())));
        }
    }
    rep.blaschke =
        blaschke_label(od.l1.as_ref().and_then(|f| f.h_signature), od.l2.as_ref().and_then(|f| f.h_signature))
            .map(str::to_string);
    match lie_applicability(g, od, frame, opts) {
        Ok(la) => rep.lie_applicability = Some(la),
        Err(e) => rep.notes.push(format!("lie applicability: {e}")),
    }
    rep.notes.extend(od.notes.iter().cloned());
    rep
}

/// Runs the whole pipeline; stage errors end up in the report.
pub fn analyze_surface(
    g: &SurfaceGrid,
    frame: &SpaceFormFrame,
    opts: &AnalysisOptions,
) -> (SurfaceReport, Option<Error>) {
    let pd = match curvature_sphere_fields(g, opts) {
        Ok(pd) => pd,
        Err(e) => return (SurfaceReport::failed(g, opts, &e), Some(e)),
    };
    let pd = if pd.channel.iter().any(|&c| c) {
        pd
    } else {
        match special_lifts(g, &pd, None) {
            Ok(p) => p,
            Err(e) => return (SurfaceReport::failed(g, opts, &e), Some(e)),
        }
    };
    match osculating_complexes(g, &pd, opts) {
        Ok(od) => (classify_surface(g, &pd, &od, frame, opts), None),
        Err(e) => {
            let mut rep = classify_surface(g, &pd, &OsculatingData::default(), frame, opts);
            rep.error = Some(e.to_string());
            (rep, Some(e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::{linspace, periodic_grid};
    use crate::grid::contact_lift_surface;
    use std::f64::consts::TAU;

    fn torus(n: usize) -> SurfaceGrid {
        let fr = SpaceFormFrame::euclidean();
        let u = periodic_grid(0.0, TAU, n);
        let v = periodic_grid(0.0, TAU, n);
        let mut pts = Vec::new();
        let mut nrm = Vec::new();
        for a in &u {
            for b in &v {
                let w = 2.0 + a.sin();
                pts.push([a.cos(), w * b.cos(), w * b.sin()]);
                nrm.push([-a.cos(), -a.sin() * b.cos(), -a.sin() * b.sin()]);
            }
        }
        contact_lift_surface(&pts, &nrm, u, v, true, true, &fr).unwrap()
    }

    #[test]
    fn torus_fields_are_curvature_spheres() {
        let g = torus(64);
        let pd = curvature_sphere_fields(&g, &AnalysisOptions::default()).unwrap();
        let r1 = pd.residual1.iter().fold(0.0f64, |m, x| m.max(*x));
        let r2 = pd.residual2.iter().fold(0.0f64, |m, x| m.max(*x));
        assert!(r1 < 1e-5 && r2 < 1e-5, "{r1} {r2}");
        assert_eq!(pd.channel, [true, true]);
        assert!(pd.umbilic.iter().all(|u| !u));
        assert!(matches!(special_lifts(&g, &pd, None), Err(Error::ChannelSurface(1))));
    }

    #[test]
    fn torus_profile_sphere_is_the_unit_tube_sphere() {
        // the u-curvature sphere along the meridian v is the unit sphere about
        // the core circle point (0, 2 cos v, 2 sin v)
        let g = torus(48);
        let fr = SpaceFormFrame::euclidean();
        let pd = curvature_sphere_fields(&g, &AnalysisOptions::default()).unwrap();
        for iu in [0, 7, 30] {
            for iv in [0, 11, 40] {
                let v = g.v[iv];
                let s = fr
                    .lift_sphere(&crate::space_form::OrientedSphere {
                        center: [0.0, 2.0 * v.cos(), 2.0 * v.sin()],
                        radius: 1.0,
                    })
                    .unwrap()
                    .euclid_normalized()
                    .unwrap();
                let c = pd.s1[g.idx(iu, iv)].euclid_dot(&s).abs();
                assert!(1.0 - c < 1e-8, "{c}");
            }
        }
    }

    #[test]
    fn round_sphere_is_umbilic() {
        let fr = SpaceFormFrame::euclidean();
        let u = linspace(0.4, 2.7, 24);
        let v = periodic_grid(0.0, TAU, 24);
        let mut pts = Vec::new();
        for a in &u {
            for b in &v {
                pts.push([a.sin() * b.cos(), a.sin() * b.sin(), a.cos()]);
            }
        }
        let g = contact_lift_surface(&pts, &pts, u, v, false, true, &fr).unwrap();
        let pd = curvature_sphere_fields(&g, &AnalysisOptions::default()).unwrap();
        assert_eq!(pd.umbilic_fraction(), 1.0);
    }

    #[test]
    fn sheared_grid_is_rejected() {
        let fr = SpaceFormFrame::euclidean();
        let u = linspace(-0.5, 0.5, 16);
        let v = linspace(-0.5, 0.5, 16);
        let mut pts = Vec::new();
        let mut nrm = Vec::new();
        // saddle z = xy: the coordinate lines are its asymptotic lines
        for a in &u {
            for b in &v {
                let (x, y) = (*a, *b);
                pts.push([x, y, x * y]);
                let n = [-y, -x, 1.0];
                let l = (n[0] * n[0] + n[1] * n[1] + 1.0f64).sqrt();
                nrm.push([n[0] / l, n[1] / l, n[2] / l]);
            }
        }
        let g = contact_lift_surface(&pts, &nrm, u, v, false, false, &fr).unwrap();
        assert!(matches!(curvature_sphere_fields(&g, &AnalysisOptions::default()), Err(Error::NotCurvatureAligned(_))));
    }

    #[test]
    fn blaschke_cases() {
        let s = Signature::new;
        assert_eq!(blaschke_label(Some(s(2, 1, 0)), Some(s(2, 1, 0))), Some("joachimsthal"));
        assert_eq!(blaschke_label(Some(s(1, 2, 0)), Some(s(3, 0, 0))), Some("monge_with_cone"));
        assert_eq!(blaschke_label(Some(s(1, 1, 1)), Some(s(2, 0, 1))), Some("doubly_planar"));
        assert_eq!(blaschke_label(Some(s(3, 0, 0)), None), None);
    }

    #[test]
    fn orient_removes_sign_flips() {
        let e = PseudoVector::e;
        let mut f: Vec<PseudoVector> = (0..12).map(|i| if i % 3 == 1 { -e(2) } else { e(2) }).collect();
        orient(3, 4, &mut f);
        assert!(f.iter().all(|x| *x == f[0]));
    }
}
