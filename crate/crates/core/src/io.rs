//! File schemas (`lsf-1` JSON documents), atomic writes and mesh export.
//!
//! Every float is written with 17 significant digits and a lowercase
//! exponent, so documents round-trip exactly and identical inputs give
//! byte-identical files.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Number, Value};

use crate::algebra::PseudoVector;
use crate::curve::LegendreCurve;
use crate::diff::{linspace, periodic_grid};
use crate::elastica::{ElasticaParams, ElasticaSolution};
use crate::error::{Error, Result};
use crate::evolution::{ComplexCurve, ComplexGenerator};
use crate::grid::SurfaceGrid;
use crate::report::SCHEMA;
use crate::ribaucour::{ChannelChoice, RibaucourPair};
use crate::space_form::SpaceFormFrame;
use crate::ContactFrame;

fn number(n: &Number) -> String {
    match (n.as_u64(), n.as_i64(), n.as_f64()) {
        (Some(u), _, _) => u.to_string(),
        (None, Some(i), _) => i.to_string(),
        (_, _, Some(x)) => format!("{x:.16e}"),
        _ => n.to_string(),
    }
}

/// JSON text with floats as `{:.16e}`; `indent` selects the pretty layout.
fn emit(v: &Value, indent: Option<usize>, out: &mut String) {
    let pad = |out: &mut String, level: usize| {
        out.push('\n');
        out.push_str(&"  ".repeat(level));
    };
    match v {
        Value::Number(n) => out.push_str(&number(n)),
        Value::Array(a) if a.is_empty() => out.push_str("[]"),
        Value::Array(a) => {
            // numeric rows stay on one line in the pretty layout
            let flat = a.iter().all(|x| !x.is_array() && !x.is_object());
            out.push('[');
            for (k, x) in a.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                    if flat && indent.is_some() {
                        out.push(' ');
                    }
                }
                match indent {
                    Some(l) if !flat => {
                        pad(out, l + 1);
                        emit(x, Some(l + 1), out);
                    }
                    _ => emit(x, indent, out),
                }
            }
            if let (Some(l), false) = (indent, flat) {
                pad(out, l);
            }
            out.push(']');
        }
        Value::Object(o) if o.is_empty() => out.push_str("{}"),
        Value::Object(o) => {
            out.push('{');
            for (k, (key, x)) in o.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                if let Some(l) = indent {
                    pad(out, l + 1);
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push(':');
                if indent.is_some() {
                    out.push(' ');
                }
                emit(x, indent.map(|l| l + 1), out);
            }
            if let Some(l) = indent {
                pad(out, l);
            }
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}

/// Compact JSON with canonical float formatting and a trailing newline.
pub fn to_json<T: Serialize>(x: &T) -> Result<String> {
    let mut s = String::new();
    emit(&serde_json::to_value(x)?, None, &mut s);
    s.push('\n');
    Ok(s)
}

/// Indented variant of [`to_json`], used for reports and configs.
pub fn to_json_pretty<T: Serialize>(x: &T) -> Result<String> {
    let mut s = String::new();
    emit(&serde_json::to_value(x)?, Some(0), &mut s);
    s.push('\n');
    Ok(s)
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, x: &T) -> Result<()> {
    write_atomic(path, to_json(x)?.as_bytes())
}

pub fn write_json_pretty<T: Serialize>(path: &Path, x: &T) -> Result<()> {
    write_atomic(path, to_json_pretty(x)?.as_bytes())
}

/// Reads a document, checking `schema` and, when given, `kind`.
pub fn read_json<T: DeserializeOwned>(path: &Path, kind: Option<&str>) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text)?;
    let schema = v.get("schema").and_then(Value::as_str);
    if schema != Some(SCHEMA) {
        return Err(Error::Format(format!("{}: expected schema {SCHEMA}, found {schema:?}", path.display())));
    }
    if let Some(k) = kind {
        let found = v.get("kind").and_then(Value::as_str);
        if found != Some(k) {
            return Err(Error::Format(format!("{}: expected kind {k}, found {found:?}", path.display())));
        }
    }
    Ok(serde_json::from_value(v)?)
}

fn pack(c: &ContactFrame) -> [f64; 12] {
    let mut out = [0.0; 12];
    out[..6].copy_from_slice(&c.0.coords());
    out[6..].copy_from_slice(&c.1.coords());
    out
}

fn unpack(x: &[f64; 12]) -> ContactFrame {
    let mut a = [0.0; 6];
    let mut b = [0.0; 6];
    a.copy_from_slice(&x[..6]);
    b.copy_from_slice(&x[6..]);
    ContactFrame(PseudoVector::new(a), PseudoVector::new(b))
}

fn kind(k: &str) -> String {
    k.to_string()
}

/// Legendre curve with optional elastica columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveFile {
    pub schema: String,
    pub kind: String,
    pub closed: bool,
    pub ambient: PseudoVector,
    pub u: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ElasticaParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<f64>>,
    /// First integral per sample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<Vec<f64>>,
    /// `[ρ1 | ρ2]` per sample.
    pub lift: Vec<[f64; 12]>,
}

impl CurveFile {
    pub fn from_curve(c: &LegendreCurve) -> Self {
        CurveFile {
            schema: SCHEMA.into(),
            kind: kind("curve"),
            closed: c.closed,
            ambient: c.ambient,
            u: c.u.clone(),
            params: None,
            s: None,
            k: None,
            energy: None,
            lift: c.frames.iter().map(pack).collect(),
        }
    }

    /// `c` must be the lift of `sol` (possibly with the closing sample dropped).
    pub fn from_elastica(sol: &ElasticaSolution, c: &LegendreCurve) -> Self {
        let n = c.len();
        let e = sol.energies();
        CurveFile {
            params: Some(sol.params),
            s: Some(sol.s[..n].to_vec()),
            k: Some(sol.k[..n].to_vec()),
            energy: Some(e[..n].to_vec()),
            ..CurveFile::from_curve(c)
        }
    }

    pub fn to_curve(&self) -> Result<LegendreCurve> {
        LegendreCurve::new(self.u.clone(), self.lift.iter().map(unpack).collect(), self.ambient, self.closed)
    }
}

/// Sampled Legendre surface, row-major `frames[iu * nv + iv]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceFile {
    pub schema: String,
    pub kind: String,
    pub u_grid: Vec<f64>,
    pub v_grid: Vec<f64>,
    pub wrap_u: bool,
    pub wrap_v: bool,
    pub base_index: usize,
    pub regularity_floor: f64,
    pub regularity: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complex: Option<Vec<PseudoVector>>,
    pub frames: Vec<[f64; 12]>,
}

impl SurfaceFile {
    pub fn from_grid(g: &SurfaceGrid) -> Self {
        SurfaceFile {
            schema: SCHEMA.into(),
            kind: kind("surface"),
            u_grid: g.u.clone(),
            v_grid: g.v.clone(),
            wrap_u: g.wrap_u,
            wrap_v: g.wrap_v,
            base_index: g.base_index,
            regularity_floor: g.regularity_floor,
            regularity: g.regularity.clone(),
            complex: g.complex.clone(),
            frames: g.frames.iter().map(pack).collect(),
        }
    }

    pub fn to_grid(&self) -> Result<SurfaceGrid> {
        let g = SurfaceGrid {
            u: self.u_grid.clone(),
            v: self.v_grid.clone(),
            frames: self.frames.iter().map(unpack).collect(),
            regularity: self.regularity.clone(),
            regularity_floor: self.regularity_floor,
            wrap_u: self.wrap_u,
            wrap_v: self.wrap_v,
            complex: self.complex.clone(),
            base_index: self.base_index,
        };
        g.check()?;
        Ok(g)
    }
}

pub fn read_curve(path: &Path) -> Result<LegendreCurve> {
    read_json::<CurveFile>(path, Some("curve"))?.to_curve()
}

pub fn read_surface(path: &Path) -> Result<SurfaceGrid> {
    read_json::<SurfaceFile>(path, Some("surface"))?.to_grid()
}

/// Complex curve description for `evolve`: either a generator sampled on
/// `n` points of `[v_start, v_end]` (periodic grid when `closed`) or explicit
/// samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexSpec {
    #[serde(default)]
    pub generator: Option<ComplexGenerator>,
    #[serde(default)]
    pub samples: Option<Vec<PseudoVector>>,
    pub v_start: f64,
    pub v_end: f64,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub closed: bool,
    #[serde(default)]
    pub v0_index: usize,
}

impl ComplexSpec {
    pub fn curve(&self) -> Result<ComplexCurve> {
        let n = match (&self.samples, self.n) {
            (Some(s), _) => s.len(),
            (None, Some(n)) => n,
            (None, None) => return Err(Error::Config("complex spec needs `n` or `samples`".into())),
        };
        if n < 4 {
            return Err(Error::Config(format!("complex grid has {n} samples, need at least 4")));
        }
        let v = if self.closed {
            periodic_grid(self.v_start, self.v_end, n)
        } else {
            linspace(self.v_start, self.v_end, n)
        };
        match (&self.generator, &self.samples) {
            (Some(g), None) => ComplexCurve::from_generator(g.clone(), v, self.closed),
            (None, Some(s)) => ComplexCurve::from_samples(v, s.clone(), self.closed),
            _ => Err(Error::Config("complex spec needs exactly one of `generator`, `samples`".into())),
        }
    }
}

/// Space form frame given by `p` and `q`; the origin is only available for
/// the standard Euclidean vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub p: PseudoVector,
    pub q: PseudoVector,
}

impl FrameSpec {
    pub fn frame(&self) -> Result<SpaceFormFrame> {
        let e = SpaceFormFrame::euclidean();
        if (self.p - e.p).euclid_norm() < 1e-12 && (self.q - e.q).euclid_norm() < 1e-12 {
            return Ok(e);
        }
        SpaceFormFrame::from_vectors(self.p, self.q)
    }
}

/// Link between the two surface files of a Ribaucour pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairFile {
    pub schema: String,
    pub kind: String,
    pub f: String,
    pub f_hat: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice: Option<ChannelChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_hat: Option<PseudoVector>,
    /// Common sphere per cell, row-major.
    pub s0: Vec<PseudoVector>,
}

impl PairFile {
    pub fn new(pair: &RibaucourPair, f: &str, f_hat: &str, choice: Option<ChannelChoice>) -> Self {
        PairFile {
            schema: SCHEMA.into(),
            kind: kind("ribaucour_pair"),
            f: f.into(),
            f_hat: f_hat.into(),
            choice,
            c_hat: pair.c_hat,
            s0: pair.s0.clone(),
        }
    }
}

/// Quad mesh over a parameter grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    /// Zero-based vertex indices, counter-clockwise in `(u, v)`.
    pub faces: Vec<[usize; 4]>,
    /// Grid points without a projection; their faces are dropped.
    pub dropped: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl FromStr for MeshFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "ply" => Ok(MeshFormat::Ply),
            _ => Err(Error::Config(format!("unknown mesh format {s:?} (obj|ply)"))),
        }
    }
}

/// Grid-quad connectivity for `nu × nv` points stored row-major; wrapped
/// directions reuse the first row/column, so no vertex is duplicated.
pub fn quad_mesh(points: &[Option<[f64; 3]>], nu: usize, nv: usize, wrap_u: bool, wrap_v: bool) -> Result<Mesh> {
    if points.len() != nu * nv || nu < 2 || nv < 2 {
        return Err(Error::IncompatibleGrids(format!("{} points for a {nu}x{nv} grid", points.len())));
    }
    let mut index = vec![None; points.len()];
    let mut vertices = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if let Some(x) = p {
            index[i] = Some(vertices.len());
            vertices.push(*x);
        }
    }
    if vertices.is_empty() {
        return Err(Error::Format("no cell has a point projection".into()));
    }
    let cu = if wrap_u { nu } else { nu - 1 };
    let cv = if wrap_v { nv } else { nv - 1 };
    let mut faces = Vec::with_capacity(cu * cv);
    for iu in 0..cu {
        for iv in 0..cv {
            let (ju, jv) = ((iu + 1) % nu, (iv + 1) % nv);
            let corners = [iu * nv + iv, ju * nv + iv, ju * nv + jv, iu * nv + jv];
            if let [Some(a), Some(b), Some(c), Some(d)] = corners.map(|k| index[k]) {
                faces.push([a, b, c, d]);
            }
        }
    }
    Ok(Mesh { dropped: points.len() - vertices.len(), vertices, faces })
}

/// Point projections of a surface in `frame`, meshed over its grid.
pub fn surface_mesh(g: &SurfaceGrid, frame: &SpaceFormFrame) -> Result<Mesh> {
    let pts: Vec<Option<[f64; 3]>> = g
        .point_lifts(frame)
        .iter()
        .map(|y| y.as_ref().and_then(|y| frame.project_point(y).ok()))
        .map(|x| x.filter(|x| x.iter().all(|c| c.is_finite())))
        .collect();
    quad_mesh(&pts, g.nu(), g.nv(), g.wrap_u, g.wrap_v)
}

impl Mesh {
    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("# {SCHEMA} mesh\n"));
        for v in &self.vertices {
            s.push_str(&format!("v {:.16e} {:.16e} {:.16e}\n", v[0], v[1], v[2]));
        }
        for f in &self.faces {
            s.push_str(&format!("f {} {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1, f[3] + 1));
        }
        s
    }

    pub fn to_ply(&self) -> String {
        let mut s = String::new();
        s.push_str("ply\nformat ascii 1.0\n");
        s.push_str(&format!("comment {SCHEMA} mesh\n"));
        s.push_str(&format!(
            "element vertex {}\nproperty double x\nproperty double y\nproperty double z\n",
            self.vertices.len()
        ));
        s.push_str(&format!("element face {}\nproperty list uchar int vertex_indices\nend_header\n", self.faces.len()));
        for v in &self.vertices {
            s.push_str(&format!("{:.16e} {:.16e} {:.16e}\n", v[0], v[1], v[2]));
        }
        for f in &self.faces {
            s.push_str(&format!("4 {} {} {} {}\n", f[0], f[1], f[2], f[3]));
        }
        s
    }

    pub fn render(&self, format: MeshFormat) -> String {
        match format {
            MeshFormat::Obj => self.to_obj(),
            MeshFormat::Ply => self.to_ply(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        let s = to_json(&(0.1f64, 2usize, -1.5e-300f64)).unwrap();
        assert_eq!(s, "[1.0000000000000001e-1,2,-1.5000000000000001e-300]\n");
        let back: (f64, usize, f64) = serde_json::from_str(&s).unwrap();
        assert_eq!(back, (0.1, 2, -1.5e-300));
    }

    #[test]
    fn pretty_layout_round_trips() {
        let v = serde_json::json!({"a": [1.5, 2.0], "b": {"c": [[0.25], []], "d": "x\"y"}, "e": null});
        let s = to_json_pretty(&v).unwrap();
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        assert!(s.contains("\"a\": [1.5000000000000000e0, 2.0000000000000000e0]"));
    }

    #[test]
    fn open_two_by_two() {
        let p = vec![Some([0.0; 3]); 4];
        let m = quad_mesh(&p, 2, 2, false, false).unwrap();
        assert_eq!((m.vertices.len(), m.faces.len()), (4, 1));
        assert_eq!(m.faces[0], [0, 2, 3, 1]);
    }

    #[test]
    fn doubly_wrapped_grid() {
        let (nu, nv) = (5, 7);
        let p = vec![Some([1.0, 2.0, 3.0]); nu * nv];
        let m = quad_mesh(&p, nu, nv, true, true).unwrap();
        assert_eq!((m.vertices.len(), m.faces.len()), (nu * nv, nu * nv));
        // every vertex is used by exactly four faces
        let mut use_count = vec![0; nu * nv];
        for f in &m.faces {
            for k in f {
                use_count[*k] += 1;
            }
        }
        assert!(use_count.iter().all(|&c| c == 4));
    }

    #[test]
    fn missing_vertices_drop_faces() {
        let mut p = vec![Some([0.0; 3]); 9];
        p[4] = None;
        let m = quad_mesh(&p, 3, 3, false, false).unwrap();
        assert_eq!((m.vertices.len(), m.faces.len(), m.dropped), (8, 0, 1));
        assert!(quad_mesh(&[None; 4], 2, 2, false, false).is_err());
    }

    #[test]
    fn ply_header_counts() {
        let m = quad_mesh(&[Some([0.0; 3]); 4], 2, 2, false, false).unwrap();
        let s = m.to_ply();
        assert!(s.contains("element vertex 4\n") && s.contains("element face 1\n"));
        assert!(s.ends_with("4 0 2 3 1\n"));
    }
}
