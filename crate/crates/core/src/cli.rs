//! The `lsf` command-line driver.
//!
//! Every subcommand takes its parameters as flags; `--config <file>` reads a
//! JSON object whose keys (flag names with `_` for `-`) override the flags.
//! `LSF_THREADS` caps the worker pool. Exit codes: 0 success, 1 config or
//! I/O, 2 solver, 3 evolution, 4 analysis, 5 Ribaucour.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{analyze_surface, AnalysisOptions};
use crate::diff::Stencil;
use crate::elastica::{close_curve, legendre_lift, solve_elastica, ElasticaParams, FrameInit};
use crate::error::{Error, Result, Stage};
use crate::evolution::{evolve_surface, integrate_evolution, EvolutionOptions, SurfaceOptions};
use crate::io::{
    read_curve, read_surface, surface_mesh, write_atomic, write_json, write_json_pretty, ComplexSpec, CurveFile,
    FrameSpec, MeshFormat, PairFile, SurfaceFile,
};
use crate::report::{DiagnosticReport, RibaucourTolerances};
use crate::ribaucour::{ribaucour_evolve, verify_ribaucour, ChannelChoice, Partner};
use crate::space_form::SpaceFormFrame;

#[derive(Debug, Parser)]
#[command(name = "lsf", version, about = "Surfaces with spherical curvature lines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the constrained elastica equation and write the lifted curve.
    Elastica(ElasticaArgs),
    /// Evolve a curve file along a complex curve and write the surface.
    Evolve(EvolveArgs),
    /// Analyze a surface file and write a diagnostic report.
    Analyze(AnalyzeArgs),
    /// Build and verify a Ribaucour pair of an evolved surface.
    Ribaucour(RibaucourArgs),
    /// Export a surface file as an OBJ or PLY quad mesh.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticaArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub chi: f64,
    #[arg(long, default_value_t = 0.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub lambda: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub k0: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub dk0: f64,
    #[arg(long, default_value_t = 10.0)]
    pub length: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub x0: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub y0: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub heading: f64,
    /// Drop the repeated endpoint and mark the curve closed.
    #[arg(long, default_value_t = false)]
    pub closed: bool,
    #[arg(long, default_value_t = 1e-6)]
    pub close_tol: f64,
    #[arg(long, default_value_t = 100)]
    pub renorm_every: usize,
    #[arg(long)]
    #[serde(default, skip_serializing)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveArgs {
    #[arg(long)]
    pub curve: PathBuf,
    /// Complex spec (JSON).
    #[arg(long)]
    pub complex: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub substeps: usize,
    #[arg(long, default_value_t = 50)]
    pub renorm_every: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub relative_floor: f64,
    #[arg(long)]
    #[serde(default, skip_serializing)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub surface: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Space form frame (JSON with `p`, `q`); Euclidean by default.
    #[arg(long)]
    pub frame: Option<PathBuf>,
    #[arg(long, value_parser = parse_stencil, default_value = "fourth")]
    pub stencil: Stencil,
    #[arg(long, default_value_t = 1e-6)]
    pub flag_tol: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub umbilic_tol: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub elastic_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub envelope_tol: f64,
    /// Ignore the evolution complex stored with the surface.
    #[arg(long, default_value_t = false)]
    pub no_provenance: bool,
    #[arg(long)]
    #[serde(default, skip_serializing)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RibaucourArgs {
    #[arg(long)]
    pub curve: PathBuf,
    #[arg(long)]
    pub complex: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Channel sphere center x.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<f64>,
    /// Channel sphere center y.
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<f64>,
    /// Channel sphere signed radius (0 for a point).
    #[arg(long, allow_hyphen_values = true)]
    pub r: Option<f64>,
    /// Partner curve file instead of a channel sphere.
    #[arg(long)]
    pub partner: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub substeps: usize,
    #[arg(long, value_parser = parse_stencil, default_value = "fourth")]
    pub stencil: Stencil,
    #[arg(long)]
    #[serde(default, skip_serializing)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportArgs {
    #[arg(long)]
    pub surface: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_format, default_value = "obj")]
    pub format: MeshFormat,
    #[arg(long)]
    pub frame: Option<PathBuf>,
    #[arg(long)]
    #[serde(default, skip_serializing)]
    pub config: Option<PathBuf>,
}

fn parse_stencil(s: &str) -> std::result::Result<Stencil, String> {
    match s {
        "second" => Ok(Stencil::Second),
        "fourth" => Ok(Stencil::Fourth),
        _ => Err(format!("unknown stencil {s:?} (second|fourth)")),
    }
}

fn parse_format(s: &str) -> std::result::Result<MeshFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Overlays the keys of the JSON object in `config` onto `args`.
fn overlay<T: Serialize + DeserializeOwned>(args: T, config: Option<&Path>) -> Result<T> {
    let Some(path) = config else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let over: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let Value::Object(over) = over else {
        return Err(Error::Config("config must be a JSON object".into()));
    };
    let mut base = serde_json::to_value(&args)?;
    let obj = base.as_object_mut().expect("args serialize to an object");
    for (k, v) in over {
        obj.insert(k.replace('-', "_"), v);
    }
    serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {x}")))
    }
}

fn load_frame(path: Option<&Path>) -> Result<SpaceFormFrame> {
    match path {
        None => Ok(SpaceFormFrame::euclidean()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            let spec: FrameSpec = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            spec.frame()
        }
    }
}

fn load_complex(path: &Path) -> Result<ComplexSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn run_elastica(a: &ElasticaArgs) -> Result<()> {
    positive("close_tol", a.close_tol)?;
    let params = ElasticaParams {
        chi: a.chi,
        kappa: a.kappa,
        mu: a.mu,
        lambda: a.lambda,
        k0: a.k0,
        dk0: a.dk0,
        length: a.length,
        step: a.step,
    };
    let frame = SpaceFormFrame::euclidean();
    let init = FrameInit::planar(&frame, [a.x0, a.y0], a.heading)?;
    let sol = solve_elastica(&params, Some(init), &frame, a.renorm_every)?;
    let geom = if a.closed { close_curve(&sol.geometry, a.close_tol)? } else { sol.geometry.clone() };
    let curve = legendre_lift(&geom, &frame.axes[2])?;
    write_json(&a.out, &CurveFile::from_elastica(&sol, &curve))
}

pub fn run_evolve(a: &EvolveArgs) -> Result<()> {
    positive("relative_floor", a.relative_floor)?;
    let curve = read_curve(&a.curve)?;
    let spec = load_complex(&a.complex)?;
    let l = spec.curve()?;
    let map = integrate_evolution(
        &l,
        spec.v0_index,
        &EvolutionOptions { substeps: a.substeps, renorm_every: a.renorm_every, ..Default::default() },
    )?;
    let g = evolve_surface(&map, &curve, &SurfaceOptions { relative_floor: a.relative_floor, ..Default::default() })?;
    write_json(&a.out, &SurfaceFile::from_grid(&g))
}

/// Writes the report even when the analysis stops early; the error is
/// returned afterwards.
pub fn run_analyze(a: &AnalyzeArgs) -> Result<()> {
    let opts = AnalysisOptions {
        stencil: a.stencil,
        flag_tol: a.flag_tol,
        umbilic_tol: a.umbilic_tol,
        elastic_tol: a.elastic_tol,
        envelope_tol: a.envelope_tol,
        use_provenance: !a.no_provenance,
        ..Default::default()
    };
    opts.validate()?;
    let frame = load_frame(a.frame.as_deref())?;
    let g = read_surface(&a.surface)?;
    let (report, err) = analyze_surface(&g, &frame, &opts);
    write_json_pretty(&a.out, &DiagnosticReport::Surface(report))?;
    match err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

pub fn run_ribaucour(a: &RibaucourArgs) -> Result<()> {
    let choice = match (&a.partner, a.x, a.y, a.r) {
        (Some(_), None, None, None) => None,
        (None, Some(x), Some(y), Some(r)) => Some(ChannelChoice::new(x, y, r)),
        _ => return Err(Error::Config("give either --partner or all of --x, --y, --r".into())),
    };
    let curve = read_curve(&a.curve)?;
    let spec = load_complex(&a.complex)?;
    let map = integrate_evolution(
        &spec.curve()?,
        spec.v0_index,
        &EvolutionOptions { substeps: a.substeps, ..Default::default() },
    )?;
    let partner = match (&a.partner, &choice) {
        (_, Some(ch)) => Partner::Sphere(ch.sphere(&map.l0())?),
        (Some(p), None) => Partner::Curve(read_curve(p)?),
        (None, None) => unreachable!("checked above"),
    };
    let pair = ribaucour_evolve(&map, &curve, &partner)?;
    std::fs::create_dir_all(&a.out_dir)?;
    write_json(&a.out_dir.join("f.json"), &SurfaceFile::from_grid(&pair.f))?;
    write_json(&a.out_dir.join("f_hat.json"), &SurfaceFile::from_grid(&pair.f_hat))?;
    write_json(&a.out_dir.join("pair.json"), &PairFile::new(&pair, "f.json", "f_hat.json", choice))?;
    let report = verify_ribaucour(&pair, a.stencil, &RibaucourTolerances::default());
    write_json_pretty(&a.out_dir.join("report.json"), &DiagnosticReport::Ribaucour(report))
}

pub fn run_export(a: &ExportArgs) -> Result<()> {
    let frame = load_frame(a.frame.as_deref())?;
    let g = read_surface(&a.surface)?;
    let mesh = surface_mesh(&g, &frame)?;
    write_atomic(&a.out, mesh.render(a.format).as_bytes())
}

pub fn exit_code(e: &Error) -> i32 {
    match e.stage() {
        Stage::Config => 1,
        Stage::Solver => 2,
        Stage::Evolution => 3,
        Stage::Analysis => 4,
        Stage::Ribaucour => 5,
    }
}

fn init_threads() -> Result<()> {
    if let Ok(s) = std::env::var("LSF_THREADS") {
        let n: usize = s
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("LSF_THREADS must be a positive integer, got {s:?}")))?;
        if n == 0 {
            return Err(Error::Config("LSF_THREADS must be positive".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn execute(cmd: Command) -> Result<()> {
    init_threads()?;
    match cmd {
        Command::Elastica(a) => {
            let c = a.config.clone();
            run_elastica(&overlay(a, c.as_deref())?)
        }
        Command::Evolve(a) => {
            let c = a.config.clone();
            run_evolve(&overlay(a, c.as_deref())?)
        }
        Command::Analyze(a) => {
            let c = a.config.clone();
            run_analyze(&overlay(a, c.as_deref())?)
        }
        Command::Ribaucour(a) => {
            let c = a.config.clone();
            run_ribaucour(&overlay(a, c.as_deref())?)
        }
        Command::Export(a) => {
            let c = a.config.clone();
            run_export(&overlay(a, c.as_deref())?)
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit
/// code. Messages go to stderr.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("lsf: {e}");
            exit_code(&e)
        }
    }
}
