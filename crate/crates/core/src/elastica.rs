//! Constrained elastica: the curvature ODE `k'' + χk³/2 + (μ+κ)k + λ = 0`,
//! its first integral, and reconstruction of the moving frame.

use nalgebra::SVector;
use serde::{Deserialize, Serialize};

use crate::algebra::PseudoVector;
use crate::curve::{CurveGeometry, LegendreCurve};
use crate::diff::interpolate;
use crate::error::{Error, Result};
use crate::space_form::{dot3, SpaceFormFrame};
use crate::ContactFrame;

const INIT_TOL: f64 = 1e-10;
const BLOWUP: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticaParams {
    pub chi: f64,
    pub kappa: f64,
    pub mu: f64,
    pub lambda: f64,
    pub k0: f64,
    pub dk0: f64,
    pub length: f64,
    pub step: f64,
}

impl ElasticaParams {
    /// `k = 2 sech s`: `χ = 1`, `κ = 0`, `μ = −1`, `λ = 0`.
    pub fn sech(length: f64, step: f64) -> Self {
        ElasticaParams { chi: 1.0, kappa: 0.0, mu: -1.0, lambda: 0.0, k0: 2.0, dk0: 0.0, length, step }
    }

    /// Equilibrium `k ≡ k0` (Euclidean, `μ = 0`).
    pub fn circle(k0: f64, length: f64, step: f64) -> Self {
        ElasticaParams { chi: 1.0, kappa: 0.0, mu: 0.0, lambda: -k0.powi(3) / 2.0, k0, dk0: 0.0, length, step }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.chi, self.kappa, self.mu, self.lambda, self.k0, self.dk0, self.length, self.step];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if (self.chi.abs() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!("chi = {} (must be ±1)", self.chi)));
        }
        if self.step <= 0.0 {
            return Err(Error::InvalidParams(format!("step = {} (must be > 0)", self.step)));
        }
        if self.length < self.step {
            return Err(Error::InvalidParams(format!("length {} shorter than step {}", self.length, self.step)));
        }
        Ok(())
    }

    /// Number of steps and the exact step that divides `length`.
    pub fn steps(&self) -> (usize, f64) {
        let n = (self.length / self.step).round().max(1.0) as usize;
        (n, self.length / n as f64)
    }

    fn accel(&self, k: f64) -> f64 {
        -self.chi * k * k * k / 2.0 - (self.mu + self.kappa) * k - self.lambda
    }
}

/// `E = k'² + χk⁴/4 + (μ+κ)k² + 2λk`.
pub fn first_integral(p: &ElasticaParams, k: f64, dk: f64) -> f64 {
    dk * dk + p.chi * k.powi(4) / 4.0 + (p.mu + p.kappa) * k * k + 2.0 * p.lambda * k
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureProfile {
    pub s: Vec<f64>,
    pub k: Vec<f64>,
    pub dk: Vec<f64>,
}

/// Classical RK4 on `(k, k')`.
pub fn solve_curvature(p: &ElasticaParams) -> Result<CurvatureProfile> {
    p.validate()?;
    let (n, h) = p.steps();
    let mut s = Vec::with_capacity(n + 1);
    let mut k = Vec::with_capacity(n + 1);
    let mut dk = Vec::with_capacity(n + 1);
    let (mut y0, mut y1) = (p.k0, p.dk0);
    s.push(0.0);
    k.push(y0);
    dk.push(y1);
    for i in 0..n {
        let f = |a: f64, b: f64| (b, p.accel(a));
        let (a1, b1) = f(y0, y1);
        let (a2, b2) = f(y0 + 0.5 * h * a1, y1 + 0.5 * h * b1);
        let (a3, b3) = f(y0 + 0.5 * h * a2, y1 + 0.5 * h * b2);
        let (a4, b4) = f(y0 + h * a3, y1 + h * b3);
        y0 += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        y1 += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        let si = (i + 1) as f64 * h;
        if !y0.is_finite() || !y1.is_finite() || y0.abs() > BLOWUP || y1.abs() > BLOWUP {
            return Err(Error::SolutionEscaped(si));
        }
        s.push(si);
        k.push(y0);
        dk.push(y1);
    }
    Ok(CurvatureProfile { s, k, dk })
}

/// Initial point lift `f0`, tangent-plane lift `t0` and unit tangent `v0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameInit {
    pub f0: PseudoVector,
    pub t0: PseudoVector,
    pub v0: PseudoVector,
}

impl FrameInit {
    /// Start at `x0` in the `x3 = 0` plane heading at angle `heading`, with
    /// the normal on the left so that positive curvature turns left.
    pub fn planar(frame: &SpaceFormFrame, x0: [f64; 2], heading: f64) -> Result<Self> {
        let x = [x0[0], x0[1], 0.0];
        let e = [heading.cos(), heading.sin(), 0.0];
        let n = [-heading.sin(), heading.cos(), 0.0];
        Ok(FrameInit {
            f0: frame.lift_point(x)?,
            t0: frame.lift_plane(n, dot3(x, n))?,
            v0: embed(frame, e) + frame.q * dot3(x, e),
        })
    }

    /// Origin, tangent `e1`, normal `e2`.
    pub fn standard(frame: &SpaceFormFrame) -> Result<Self> {
        FrameInit::planar(frame, [0.0, 0.0], 0.0)
    }

    pub fn defect(&self, frame: &SpaceFormFrame) -> f64 {
        relations_defect(&self.f0, &self.t0, &self.v0, frame)
    }
}

fn embed(frame: &SpaceFormFrame, x: [f64; 3]) -> PseudoVector {
    frame.axes[0] * x[0] + frame.axes[1] * x[1] + frame.axes[2] * x[2]
}

fn relations_defect(f: &PseudoVector, t: &PseudoVector, v: &PseudoVector, frame: &SpaceFormFrame) -> f64 {
    let (p, q) = (frame.p, frame.q);
    [
        f.square(),
        f.inner(&q) + 1.0,
        f.inner(&p),
        t.square(),
        t.inner(&p) + 1.0,
        t.inner(&q),
        f.inner(t),
        v.square() - 1.0,
        v.inner(f),
        v.inner(t),
        v.inner(&p),
        v.inner(&q),
    ]
    .iter()
    .fold(0.0, |m, x| m.max(x.abs()))
}

/// Integrated constrained elastica.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticaSolution {
    pub params: ElasticaParams,
    pub s: Vec<f64>,
    pub k: Vec<f64>,
    pub dk: Vec<f64>,
    /// First integral at `s = 0`.
    pub energy: f64,
    /// `max |E(s) − E(0)| / max(1, |E(0)|)`.
    pub energy_drift: f64,
    pub geometry: CurveGeometry,
}

impl ElasticaSolution {
    pub fn energies(&self) -> Vec<f64> {
        self.k.iter().zip(&self.dk).map(|(k, dk)| first_integral(&self.params, *k, *dk)).collect()
    }
}

type State = SVector<f64, 20>;

fn pv_at(x: &State, off: usize) -> PseudoVector {
    PseudoVector(x.fixed_rows::<6>(off).into_owned())
}

fn set_pv(x: &mut State, off: usize, v: &PseudoVector) {
    x.fixed_rows_mut::<6>(off).copy_from(&v.0);
}

/// Right-hand side of the coupled system; slots: k, k', f, v, t.
fn rhs(p: &ElasticaParams, frame: &SpaceFormFrame, x: &State, k_override: Option<f64>) -> State {
    let k = k_override.unwrap_or(x[0]);
    let f = pv_at(x, 2);
    let v = pv_at(x, 8);
    let t = pv_at(x, 14);
    let mut d = State::zeros();
    if k_override.is_none() {
        d[0] = x[1];
        d[1] = p.accel(k);
    }
    let dv = f * (-frame.kappa) + t * (frame.chi * k) + frame.q - frame.p * k;
    set_pv(&mut d, 2, &v);
    set_pv(&mut d, 8, &dv);
    set_pv(&mut d, 14, &(v * (-k)));
    d
}

/// Re-imposes the incidence relations by reprojecting to a Euclidean
/// point, unit tangent and unit normal. No-op for non-Euclidean frames.
fn renormalize(x: &mut State, frame: &SpaceFormFrame) {
    if !frame.is_euclidean() {
        return;
    }
    let f = pv_at(x, 2);
    let v = pv_at(x, 8);
    let t = pv_at(x, 14);
    let Ok(pt) = frame.project_point(&f) else {
        return;
    };
    let coords = |y: &PseudoVector| [y.inner(&frame.axes[0]), y.inner(&frame.axes[1]), y.inner(&frame.axes[2])];
    let mut e = coords(&v);
    let ne = dot3(e, e).sqrt();
    if ne == 0.0 {
        return;
    }
    e = e.map(|c| c / ne);
    let n_raw = coords(&t);
    let d = dot3(n_raw, e);
    let mut n = [n_raw[0] - d * e[0], n_raw[1] - d * e[1], n_raw[2] - d * e[2]];
    let nn = dot3(n, n).sqrt();
    if nn == 0.0 {
        return;
    }
    n = n.map(|c| c / nn);
    let (Ok(f_new), Ok(t_new)) = (frame.lift_point(pt), frame.lift_plane(n, dot3(pt, n))) else {
        return;
    };
    let v_new = embed(frame, e) + frame.q * dot3(pt, e);
    set_pv(x, 2, &f_new);
    set_pv(x, 8, &v_new);
    set_pv(x, 14, &t_new);
}

fn rk4_step(p: &ElasticaParams, frame: &SpaceFormFrame, x: &State, h: f64, ks: Option<[f64; 3]>) -> State {
    let k0 = ks.map(|k| k[0]);
    let km = ks.map(|k| k[1]);
    let k1v = ks.map(|k| k[2]);
    let a = rhs(p, frame, x, k0);
    let b = rhs(p, frame, &(x + a * (0.5 * h)), km);
    let c = rhs(p, frame, &(x + b * (0.5 * h)), km);
    let d = rhs(p, frame, &(x + c * h), k1v);
    x + (a + b * 2.0 + c * 2.0 + d) * (h / 6.0)
}

fn initial_state(p: &ElasticaParams, init: &FrameInit) -> State {
    let mut x = State::zeros();
    x[0] = p.k0;
    x[1] = p.dk0;
    set_pv(&mut x, 2, &init.f0);
    set_pv(&mut x, 8, &init.v0);
    set_pv(&mut x, 14, &init.t0);
    x
}

/// Integrates curvature and frame together with RK4, reprojecting the frame
/// every `renorm_every` steps (0 disables it).
pub fn solve_elastica(
    p: &ElasticaParams,
    init: Option<FrameInit>,
    frame: &SpaceFormFrame,
    renorm_every: usize,
) -> Result<ElasticaSolution> {
    p.validate()?;
    let init = match init {
        Some(i) => i,
        None => FrameInit::standard(frame)?,
    };
    let defect = init.defect(frame);
    if defect > INIT_TOL {
        return Err(Error::InvalidInitialFrame(defect));
    }
    let (n, h) = p.steps();
    let mut x = initial_state(p, &init);
    let mut states = Vec::with_capacity(n + 1);
    states.push(x);
    for i in 0..n {
        x = rk4_step(p, frame, &x, h, None);
        let si = (i + 1) as f64 * h;
        if !x.iter().all(|c| c.is_finite()) || x[0].abs() > BLOWUP || x[1].abs() > BLOWUP {
            return Err(Error::SolutionEscaped(si));
        }
        if renorm_every > 0 && (i + 1) % renorm_every == 0 {
            renormalize(&mut x, frame);
        }
        states.push(x);
    }
    let s: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let k: Vec<f64> = states.iter().map(|x| x[0]).collect();
    let dk: Vec<f64> = states.iter().map(|x| x[1]).collect();
    Ok(package(p, frame, s, k, dk, &states))
}

fn package(
    p: &ElasticaParams,
    frame: &SpaceFormFrame,
    s: Vec<f64>,
    k: Vec<f64>,
    dk: Vec<f64>,
    states: &[State],
) -> ElasticaSolution {
    let energy = first_integral(p, k[0], dk[0]);
    let energy_drift = k.iter().zip(&dk).map(|(a, b)| (first_integral(p, *a, *b) - energy).abs()).fold(0.0, f64::max)
        / energy.abs().max(1.0);
    let geometry = CurveGeometry {
        u: s.clone(),
        s: s.clone(),
        speed: vec![1.0; s.len()],
        f_lift: states.iter().map(|x| pv_at(x, 2)).collect(),
        t_lift: states.iter().map(|x| pv_at(x, 14)).collect(),
        tangent: states.iter().map(|x| pv_at(x, 8)).collect(),
        k: k.clone(),
        dk: dk.clone(),
        ambient: frame.axes[2],
        closed: false,
    };
    ElasticaSolution { params: *p, s, k, dk, energy, energy_drift, geometry }
}

/// Frame reconstruction for a prescribed curvature sampled on the uniform
/// grid `s`; midpoint curvatures come from cubic interpolation.
pub fn integrate_frame(
    p: &ElasticaParams,
    s: &[f64],
    k: &[f64],
    init: &FrameInit,
    frame: &SpaceFormFrame,
    renorm_every: usize,
) -> Result<CurveGeometry> {
    if s.len() != k.len() || s.len() < 2 {
        return Err(Error::InvalidParams("curvature grid mismatch".into()));
    }
    let defect = init.defect(frame);
    if defect > INIT_TOL {
        return Err(Error::InvalidInitialFrame(defect));
    }
    let h = s[1] - s[0];
    let mut x = initial_state(p, init);
    let mut states = vec![x];
    for i in 0..s.len() - 1 {
        let km = interpolate(k, i, 0.5, false);
        x = rk4_step(p, frame, &x, h, Some([k[i], km, k[i + 1]]));
        if !x.iter().all(|c| c.is_finite()) {
            return Err(Error::SolutionEscaped(s[i + 1]));
        }
        if renorm_every > 0 && (i + 1) % renorm_every == 0 {
            renormalize(&mut x, frame);
        }
        states.push(x);
    }
    let dk = crate::diff::derivative(k, h, false, crate::diff::Stencil::Fourth);
    let sol = package(p, frame, s.to_vec(), k.to_vec(), dk, &states);
    Ok(sol.geometry)
}

/// Packages `(f, t)` as a Legendre curve in `<ambient_line>^⊥`.
pub fn legendre_lift(g: &CurveGeometry, ambient_line: &PseudoVector) -> Result<LegendreCurve> {
    let mut worst: f64 = 0.0;
    for (f, t) in g.f_lift.iter().zip(&g.t_lift) {
        worst =
            worst.max(f.inner(ambient_line).abs() / f.euclid_norm()).max(t.inner(ambient_line).abs() / t.euclid_norm());
    }
    if worst > 1e-9 {
        return Err(Error::NotInSlice(worst));
    }
    let frames = g.f_lift.iter().zip(&g.t_lift).map(|(f, t)| ContactFrame(*f, *t)).collect();
    LegendreCurve::new(g.u.clone(), frames, *ambient_line, g.closed)
}

/// Drops the repeated endpoint of a curve that closes up to `tol` and marks
/// it closed.
pub fn close_curve(g: &CurveGeometry, tol: f64) -> Result<CurveGeometry> {
    let n = g.len();
    if n < 5 {
        return Err(Error::InvalidCurve("too short to close".into()));
    }
    let gap = (g.f_lift[n - 1] - g.f_lift[0]).euclid_norm().max((g.t_lift[n - 1] - g.t_lift[0]).euclid_norm());
    if gap > tol {
        return Err(Error::InvalidCurve(format!("curve does not close (gap {gap:e})")));
    }
    let cut = |v: &Vec<f64>| v[..n - 1].to_vec();
    let cutp = |v: &Vec<PseudoVector>| v[..n - 1].to_vec();
    Ok(CurveGeometry {
        u: cut(&g.u),
        s: cut(&g.s),
        speed: cut(&g.speed),
        f_lift: cutp(&g.f_lift),
        t_lift: cutp(&g.t_lift),
        tangent: cutp(&g.tangent),
        k: cut(&g.k),
        dk: cut(&g.dk),
        ambient: g.ambient,
        closed: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{curve_geometry, detect_constrained_elastic};
    use crate::diff::Stencil;
    use std::f64::consts::TAU;

    #[test]
    fn equilibrium_is_constant() {
        let p = ElasticaParams::circle(0.7, 5.0, 0.01);
        let prof = solve_curvature(&p).unwrap();
        assert!(prof.k.iter().all(|k| (k - 0.7).abs() < 1e-13));
    }

    #[test]
    fn first_integral_examples() {
        let p = ElasticaParams::sech(10.0, 1e-3);
        assert_eq!(first_integral(&p, 2.0, 0.0), 0.0);
        let c = ElasticaParams::circle(1.5, 1.0, 0.1);
        let e = c.chi * 1.5f64.powi(4) / 4.0 + (c.mu + c.kappa) * 1.5 * 1.5 + 2.0 * c.lambda * 1.5;
        assert_eq!(first_integral(&c, 1.5, 0.0), e);
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = ElasticaParams::sech(10.0, 1e-3);
        p.step = 0.0;
        assert!(matches!(solve_curvature(&p), Err(Error::InvalidParams(_))));
        p.step = 1.0;
        p.length = 0.5;
        assert!(matches!(solve_curvature(&p), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn blow_up_reported() {
        // χ = −1 makes the cubic term repulsive
        let p =
            ElasticaParams { chi: -1.0, kappa: 0.0, mu: 0.0, lambda: 0.0, k0: 5.0, dk0: 0.0, length: 10.0, step: 1e-3 };
        assert!(matches!(solve_curvature(&p), Err(Error::SolutionEscaped(_))));
    }

    #[test]
    fn straight_line_matches_point_lifts() {
        let fr = SpaceFormFrame::euclidean();
        let p =
            ElasticaParams { chi: 1.0, kappa: 0.0, mu: 0.0, lambda: 0.0, k0: 0.0, dk0: 0.0, length: 5.0, step: 0.01 };
        let sol = solve_elastica(&p, None, &fr, 100).unwrap();
        for (s, f) in sol.s.iter().zip(&sol.geometry.f_lift) {
            let exact = fr.lift_point([*s, 0.0, 0.0]).unwrap();
            assert!((*f - exact).euclid_norm() < 1e-9);
        }
    }

    #[test]
    fn unit_circle_closes() {
        let fr = SpaceFormFrame::euclidean();
        let p = ElasticaParams::circle(1.0, TAU, TAU / 2000.0);
        let sol = solve_elastica(&p, None, &fr, 100).unwrap();
        let g = &sol.geometry;
        assert!((g.f_lift[g.len() - 1] - g.f_lift[0]).euclid_norm() < 1e-6);
        let closed = close_curve(g, 1e-6).unwrap();
        assert!(closed.closed);
        assert_eq!(closed.len(), g.len() - 1);
    }

    #[test]
    fn invalid_initial_frame() {
        let fr = SpaceFormFrame::euclidean();
        let mut init = FrameInit::standard(&fr).unwrap();
        init.v0 = init.v0 * 2.0;
        let p = ElasticaParams::sech(1.0, 0.01);
        assert!(matches!(solve_elastica(&p, Some(init), &fr, 100), Err(Error::InvalidInitialFrame(_))));
    }

    #[test]
    fn prescribed_curvature_frame_agrees_with_coupled_solve() {
        let fr = SpaceFormFrame::euclidean();
        let p = ElasticaParams::sech(4.0, 1e-3);
        let sol = solve_elastica(&p, None, &fr, 100).unwrap();
        let init = FrameInit::standard(&fr).unwrap();
        let g = integrate_frame(&p, &sol.s, &sol.k, &init, &fr, 100).unwrap();
        let err = g.f_lift.iter().zip(&sol.geometry.f_lift).map(|(a, b)| (*a - *b).euclid_norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "err {err}");
    }

    #[test]
    fn lift_round_trip_reproduces_curvature() {
        let fr = SpaceFormFrame::euclidean();
        let p = ElasticaParams::sech(6.0, 0.01);
        let sol = solve_elastica(&p, Some(FrameInit::planar(&fr, [0.0, 0.0], 0.0).unwrap()), &fr, 100).unwrap();
        let c = legendre_lift(&sol.geometry, &PseudoVector::e(3)).unwrap();
        assert!(c.ambient_defect() <= 1e-9);
        let g = curve_geometry(&c, &fr, Stencil::Fourth).unwrap();
        let err = g.k.iter().zip(&sol.k).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "err {err}");
        assert!(legendre_lift(&sol.geometry, &PseudoVector::e(1)).is_err());
    }

    #[test]
    fn detection_recovers_parameters_from_sampled_lifts() {
        let fr = SpaceFormFrame::euclidean();
        let p = ElasticaParams::sech(8.0, 0.01);
        let sol = solve_elastica(&p, Some(FrameInit::planar(&fr, [0.3, -0.2], 0.4).unwrap()), &fr, 100).unwrap();
        let c = legendre_lift(&sol.geometry, &PseudoVector::e(3)).unwrap();
        let g = curve_geometry(&c, &fr, Stencil::Fourth).unwrap();
        let d = detect_constrained_elastic(&g, &fr).unwrap();
        assert!(!d.circular);
        assert!((d.mu + 1.0).abs() < 1e-4 && d.lambda.abs() < 1e-4, "{d:?}");
        assert!(d.residual < 1e-4);
    }
}
