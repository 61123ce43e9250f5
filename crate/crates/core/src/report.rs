//! Diagnostic reports produced by analysis and Ribaucour verification.

use serde::{Deserialize, Serialize};

use crate::algebra::Signature;
use crate::analysis::{AnalysisOptions, ComplexSource};
use crate::grid::SurfaceGrid;

pub const SCHEMA: &str = "lsf-1";

/// Max and median of the finite values in a sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub max: f64,
    pub median: f64,
    pub count: usize,
}

impl Stats {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Stats {
        let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return Stats::default();
        }
        Stats {
            max: v.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x)),
            count: v.len(),
            median: crate::diff::median(v),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridInfo {
    pub nu: usize,
    pub nv: usize,
    pub wrap_u: bool,
    pub wrap_v: bool,
}

impl GridInfo {
    pub fn of(g: &SurfaceGrid) -> Self {
        GridInfo { nu: g.nu(), nv: g.nv(), wrap_u: g.wrap_u, wrap_v: g.wrap_v }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub family: u8,
    pub channel: bool,
    pub curvature_sphere_residual: Stats,
    pub sphere_drift: Stats,
    pub available: bool,
    pub source: Option<ComplexSource>,
    pub valid_fraction: f64,
    pub spherical_residual: Option<Stats>,
    pub spherical: Option<bool>,
    /// `max |(l, q)|`.
    pub planar_defect: Option<f64>,
    /// `max |(l, p)|`.
    pub orthogonal_defect: Option<f64>,
    pub planar: Option<bool>,
    pub orthogonal: Option<bool>,
    pub monge: Option<bool>,
    pub h_signature: Option<Signature>,
    pub raw_orthogonality: Option<f64>,
    pub orthogonality: Option<f64>,
    /// `|(ln β)_uv − βγ|` (family 1) or `|(ln γ)_uv − βγ|` (family 2).
    pub lift_pde_residual: Option<Stats>,
    pub note: Option<String>,
}

impl FamilyReport {
    pub fn empty(family: u8) -> Self {
        FamilyReport {
            family,
            channel: false,
            curvature_sphere_residual: Stats::default(),
            sphere_drift: Stats::default(),
            available: false,
            source: None,
            valid_fraction: 0.0,
            spherical_residual: None,
            spherical: None,
            planar_defect: None,
            orthogonal_defect: None,
            planar: None,
            orthogonal: None,
            monge: None,
            h_signature: None,
            raw_orthogonality: None,
            orthogonality: None,
            lift_pde_residual: None,
            note: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LieApplicability {
    pub envelope_dim: usize,
    pub envelope_residual: f64,
    pub envelope_signature: Option<Signature>,
    pub w0_signature: Option<Signature>,
    /// Largest distance of the envelope part orthogonal to `l(v0)` from
    /// `⟨p, q, r⟩`.
    pub w0_residual: Option<f64>,
    pub frame_adapted: bool,
    pub elastic_residual: Option<f64>,
    pub complex_residual: Option<f64>,
    pub mu: Option<f64>,
    pub lambda: Option<f64>,
    pub circular: bool,
    /// A negative verdict means "not detected" for the tested structure.
    pub verdict: bool,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceReport {
    pub schema: String,
    pub grid: GridInfo,
    pub legendre_residual: f64,
    pub isotropy_defect: f64,
    pub misalignment: Option<f64>,
    pub umbilic_fraction: Option<f64>,
    pub channel: Option<[bool; 2]>,
    pub special_lift_residual: Option<[f64; 2]>,
    pub families: Vec<FamilyReport>,
    pub blaschke: Option<String>,
    pub lie_applicability: Option<LieApplicability>,
    pub tolerances: AnalysisOptions,
    pub notes: Vec<String>,
    pub error: Option<String>,
}

impl SurfaceReport {
    pub fn new(g: &SurfaceGrid, opts: &AnalysisOptions) -> Self {
        SurfaceReport {
            schema: SCHEMA.into(),
            grid: GridInfo::of(g),
            legendre_residual: g.legendre_residual(opts.stencil),
            isotropy_defect: g.isotropy_defect(),
            misalignment: None,
            umbilic_fraction: None,
            channel: None,
            special_lift_residual: None,
            families: Vec::new(),
            blaschke: None,
            lie_applicability: None,
            tolerances: *opts,
            notes: Vec::new(),
            error: None,
        }
    }

    pub fn failed(g: &SurfaceGrid, opts: &AnalysisOptions, e: &crate::Error) -> Self {
        SurfaceReport { error: Some(e.to_string()), ..SurfaceReport::new(g, opts) }
    }

    pub fn family(&self, family: u8) -> Option<&FamilyReport> {
        self.families.iter().find(|f| f.family == family)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RibaucourTolerances {
    pub incidence: f64,
    pub margin: f64,
    pub correspondence: f64,
}

impl Default for RibaucourTolerances {
    fn default() -> Self {
        RibaucourTolerances { incidence: 1e-8, margin: 1e-3, correspondence: 1e-5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RibaucourReport {
    pub schema: String,
    pub grid: GridInfo,
    /// Largest distance of `s0` from either contact element.
    pub incidence: f64,
    /// Largest first principal angle between the two contact elements.
    pub intersection_angle: f64,
    /// Smallest sine of the second principal angle.
    pub rank1_margin: f64,
    /// Curvature-sphere residuals `[u, v]` of `f` and `f̂`.
    pub correspondence_f: [f64; 2],
    pub correspondence_f_hat: [f64; 2],
    pub enveloping: bool,
    pub proper_pair: bool,
    pub corresponding: bool,
    pub passes: bool,
    pub tolerances: RibaucourTolerances,
    pub notes: Vec<String>,
}

/// Either kind of report, tagged for file output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum DiagnosticReport {
    Surface(SurfaceReport),
    Ribaucour(RibaucourReport),
}
