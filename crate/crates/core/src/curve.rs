//! Legendre curves in the slice orthogonal to a spacelike line: contact
//! lifts, curvature, the conserved vector of constrained elastica and its
//! detection.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::algebra::{orthonormal_span, wedge_apply, PseudoVector, Subspace, RANK_TOL};
use crate::diff::{cumulative_integral, derivative, uniform_step, Stencil};
use crate::error::{Error, Result};
use crate::space_form::SpaceFormFrame;
use crate::ContactFrame;

/// Sampled Legendre curve living in `<ambient>^⊥`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegendreCurve {
    pub u: Vec<f64>,
    pub frames: Vec<ContactFrame>,
    /// Spacelike line whose orthogonal complement holds the curve.
    pub ambient: PseudoVector,
    pub closed: bool,
}

impl LegendreCurve {
    pub fn new(u: Vec<f64>, frames: Vec<ContactFrame>, ambient: PseudoVector, closed: bool) -> Result<Self> {
        if u.len() != frames.len() {
            return Err(Error::InvalidCurve(format!("{} parameters for {} frames", u.len(), frames.len())));
        }
        if u.len() < 4 {
            return Err(Error::DegenerateSampling(format!("{} samples, need at least 4", u.len())));
        }
        if uniform_step(&u).is_none() {
            return Err(Error::DegenerateSampling("non-uniform parameter grid".into()));
        }
        if frames.iter().any(|f| !f.0.is_finite() || !f.1.is_finite()) {
            return Err(Error::NonFinite("legendre curve"));
        }
        Ok(LegendreCurve { u, frames, ambient, closed })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.u[1] - self.u[0]
    }

    pub fn isotropy_defect(&self) -> f64 {
        self.frames.iter().map(ContactFrame::isotropy_defect).fold(0.0, f64::max)
    }

    /// Largest `|(ρ, ambient)| / |ρ|` over all frame vectors.
    pub fn ambient_defect(&self) -> f64 {
        let a = self.ambient;
        self.frames
            .iter()
            .flat_map(|f| f.vectors())
            .map(|r| r.inner(&a).abs() / r.euclid_norm().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    /// Largest `|(ρ_i', ρ_j)|` relative to the sizes involved.
    pub fn legendre_residual(&self, stencil: Stencil) -> f64 {
        let h = self.step();
        let r1: Vec<_> = self.frames.iter().map(|f| f.0).collect();
        let r2: Vec<_> = self.frames.iter().map(|f| f.1).collect();
        let d1 = derivative(&r1, h, self.closed, stencil);
        let d2 = derivative(&r2, h, self.closed, stencil);
        (0..self.len()).map(|i| legendre_defect(&[r1[i], r2[i]], &[d1[i], d2[i]])).fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(&PseudoVector) -> PseudoVector) -> LegendreCurve {
        LegendreCurve {
            u: self.u.clone(),
            frames: self.frames.iter().map(|c| c.map(&f)).collect(),
            ambient: f(&self.ambient),
            closed: self.closed,
        }
    }
}

pub(crate) fn legendre_defect(rho: &[PseudoVector; 2], d: &[PseudoVector; 2]) -> f64 {
    // one of the derivatives may vanish legitimately; scale by the larger
    let dn = d[0].euclid_norm().max(d[1].euclid_norm());
    let mut m: f64 = 0.0;
    for di in d {
        for r in rho {
            let s = dn * r.euclid_norm();
            if s > 0.0 {
                m = m.max(di.inner(r).abs() / s);
            }
        }
    }
    m
}

/// Point/tangent-plane lifts of a planar curve in the `x3 = 0` plane.
///
/// `du` is the parameter spacing. Closed curves must not repeat the first
/// point at the end.
pub fn contact_lift_curve(
    points: &[[f64; 2]],
    normals: &[[f64; 2]],
    du: f64,
    closed: bool,
    frame: &SpaceFormFrame,
) -> Result<LegendreCurve> {
    if points.len() != normals.len() {
        return Err(Error::InvalidCurve("points/normals length mismatch".into()));
    }
    if !(du > 0.0 && du.is_finite()) {
        return Err(Error::DegenerateSampling(format!("parameter step {du}")));
    }
    let n = points.len();
    for i in 0..n {
        let j = if i + 1 < n {
            i + 1
        } else if closed {
            0
        } else {
            break;
        };
        let d = (points[j][0] - points[i][0]).hypot(points[j][1] - points[i][1]);
        if d <= 1e-14 {
            return Err(Error::DegenerateSampling(format!("zero-length segment at sample {i}")));
        }
    }
    let frames = points
        .iter()
        .zip(normals)
        .map(|(x, nrm)| {
            let x3 = [x[0], x[1], 0.0];
            let n3 = [nrm[0], nrm[1], 0.0];
            let d = x[0] * nrm[0] + x[1] * nrm[1];
            Ok(ContactFrame(frame.lift_point(x3)?, frame.lift_plane(n3, d)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let u = (0..n).map(|i| i as f64 * du).collect();
    LegendreCurve::new(u, frames, frame.axes[2], closed)
}

/// Point and tangent-plane lifts of a Legendre curve with curvature data.
///
/// Curvature follows `dt = −k df`: inward normals give `k > 0` on convex
/// curves, and the curvature circle is `t + k f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveGeometry {
    pub u: Vec<f64>,
    /// Arclength, starting at 0.
    pub s: Vec<f64>,
    /// `ds/du`.
    pub speed: Vec<f64>,
    pub f_lift: Vec<PseudoVector>,
    pub t_lift: Vec<PseudoVector>,
    /// `df/ds`.
    pub tangent: Vec<PseudoVector>,
    pub k: Vec<f64>,
    /// `dk/ds`.
    pub dk: Vec<f64>,
    pub ambient: PseudoVector,
    pub closed: bool,
}

impl CurveGeometry {
    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    /// Largest violation of the twelve normalization relations.
    pub fn normalization_defect(&self, frame: &SpaceFormFrame) -> f64 {
        let (p, q) = (frame.p, frame.q);
        let mut m: f64 = 0.0;
        for i in 0..self.len() {
            let (f, t, v) = (self.f_lift[i], self.t_lift[i], self.tangent[i]);
            for x in [
                f.square(),
                f.inner(&q) + 1.0,
                f.inner(&p),
                t.square(),
                t.inner(&p) + 1.0,
                t.inner(&q),
                f.inner(&t),
                v.square() - 1.0,
                v.inner(&f),
                v.inner(&t),
                v.inner(&p),
                v.inner(&q),
            ] {
                m = m.max(x.abs());
            }
        }
        m
    }

    /// Curvature circles `t + k f`.
    pub fn curvature_circles(&self) -> Vec<PseudoVector> {
        (0..self.len()).map(|i| self.t_lift[i] + self.f_lift[i] * self.k[i]).collect()
    }
}

/// Solves the point and tangent-plane lifts per sample and differentiates.
pub fn curve_geometry(c: &LegendreCurve, frame: &SpaceFormFrame, stencil: Stencil) -> Result<CurveGeometry> {
    let (p, q) = (frame.p, frame.q);
    let n = c.len();
    let h = c.step();
    let mut f = Vec::with_capacity(n);
    let mut t = Vec::with_capacity(n);
    for (i, cf) in c.frames.iter().enumerate() {
        f.push(cf.solve_pairing(&p, 0.0, &q, -1.0).ok_or(Error::NotTransversal(i))?);
        t.push(cf.solve_pairing(&p, -1.0, &q, 0.0).ok_or(Error::NotTransversal(i))?);
    }
    let fu = derivative(&f, h, c.closed, stencil);
    let tu = derivative(&t, h, c.closed, stencil);
    let mut speed = Vec::with_capacity(n);
    let mut k = Vec::with_capacity(n);
    let mut tangent = Vec::with_capacity(n);
    for i in 0..n {
        let sq = fu[i].square();
        if !(sq > 0.0) || sq.sqrt() <= 1e-12 * fu[i].euclid_norm().max(1.0) {
            return Err(Error::DegenerateSampling(format!("point lift is stationary at sample {i}")));
        }
        let sp = sq.sqrt();
        speed.push(sp);
        k.push(-tu[i].inner(&fu[i]) / sq);
        let v = project_off(&fu[i], &[f[i], t[i], q, p]) / sp;
        let vs = v.square();
        tangent.push(if vs > 0.0 { v / vs.sqrt() } else { v });
    }
    let dk_du = derivative(&k, h, c.closed, stencil);
    let dk = dk_du.iter().zip(&speed).map(|(d, s)| d / s).collect();
    let s = cumulative_integral(&speed, h);
    Ok(CurveGeometry {
        u: c.u.clone(),
        s,
        speed,
        f_lift: f,
        t_lift: t,
        tangent,
        k,
        dk,
        ambient: c.ambient,
        closed: c.closed,
    })
}

/// Removes from `x` its component in the span of four vectors with a
/// non-degenerate Gram matrix (metric projection).
fn project_off(x: &PseudoVector, basis: &[PseudoVector; 4]) -> PseudoVector {
    let gram = Matrix4::from_fn(|i, j| basis[i].inner(&basis[j]));
    let rhs = Vector4::from_fn(|i, _| basis[i].inner(x));
    match gram.lu().solve(&rhs) {
        Some(c) => *x - (0..4).map(|i| basis[i] * c[i]).sum::<PseudoVector>(),
        None => *x,
    }
}

/// `r = −(kκ+λ) f + (χk²/2 + μ) t − k' f' + k q − (k²/2) p` per sample.
pub fn elastic_complex_vector(g: &CurveGeometry, mu: f64, lambda: f64, frame: &SpaceFormFrame) -> Vec<PseudoVector> {
    (0..g.len()).map(|i| elastic_vector_at(g, i, mu, lambda, frame)).collect()
}

fn elastic_vector_at(g: &CurveGeometry, i: usize, mu: f64, lambda: f64, frame: &SpaceFormFrame) -> PseudoVector {
    let k = g.k[i];
    g.f_lift[i] * (-(k * frame.kappa + lambda)) + g.t_lift[i] * (0.5 * k * k * frame.chi + mu) - g.tangent[i] * g.dk[i]
        + frame.q * k
        - frame.p * (0.5 * k * k)
}

/// Outcome of fitting a constant conserved vector to a curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticDetection {
    pub r_vec: PseudoVector,
    pub mu: f64,
    pub lambda: f64,
    /// Relative constancy defect of the template vector against the fit.
    pub residual: f64,
    /// `max |(t + k/2 f, r)|`.
    pub complex_residual: f64,
    /// Constant curvature: `(μ, λ)` is only determined up to the line
    /// `λ = −χk³/2 − (μ+κ)k`.
    pub circular: bool,
    pub note: Option<String>,
}

/// Norm of `y` measured through its pairings with the moving basis
/// `(f, t, f', q, p)` of the slice at sample `i`.
fn moving_norm(g: &CurveGeometry, i: usize, frame: &SpaceFormFrame, y: &PseudoVector) -> f64 {
    [g.f_lift[i], g.t_lift[i], g.tangent[i], frame.q, frame.p].iter().map(|b| b.inner(y).powi(2)).sum::<f64>().sqrt()
}

/// Fits a constant `r` to the pairings `(r, f) = −k`, `(r, t) = k²/2`,
/// `(r, f') = −k'` by linear least squares in the curve's slice, then reads
/// `μ = −(r, p)` and `λ = (r, q)`.
pub fn detect_constrained_elastic(g: &CurveGeometry, frame: &SpaceFormFrame) -> Result<ElasticDetection> {
    let n = g.len();
    if n < 4 {
        return Err(Error::DegenerateSampling("too few samples".into()));
    }
    let kmax = g.k.iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let kmean = g.k.iter().sum::<f64>() / n as f64;
    let kspread = g.k.iter().fold(0.0f64, |m, k| m.max((k - kmean).abs()));
    let circular_k = kspread <= 1e-6 * kmax.max(1.0);

    let slice = Subspace::span(&[g.ambient], RANK_TOL).ortho_complement();
    let basis = slice.basis().to_vec();
    let nb = basis.len();
    let mut a = DMatrix::zeros(3 * n, nb);
    let mut b = DVector::zeros(3 * n);
    for i in 0..n {
        let k = g.k[i];
        let rows = [(g.f_lift[i], -k), (g.t_lift[i], 0.5 * k * k), (g.tangent[i], -g.dk[i])];
        // unweighted: the rows are pairings with invariantly normalized
        // lifts, so the fit commutes with metric maps fixing p and q
        for (r, (vec, val)) in rows.iter().enumerate() {
            for j in 0..nb {
                a[(3 * i + r, j)] = basis[j].inner(vec);
            }
            b[3 * i + r] = *val;
        }
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-8 * smax).count();
    let sol = svd.solve(&b, 1e-8 * smax).map_err(|e| Error::InvalidCurve(e.to_string()))?;
    let r_vec: PseudoVector = (0..nb).map(|j| basis[j] * sol[j]).sum();
    let mu = -r_vec.inner(&frame.p);
    let lambda = r_vec.inner(&frame.q);
    let circular = circular_k || rank < nb;

    let mut residual: f64 = 0.0;
    let mut complex_residual: f64 = 0.0;
    for i in 0..n {
        let tmpl = elastic_vector_at(g, i, mu, lambda, frame);
        let scale = moving_norm(g, i, frame, &r_vec);
        let d = moving_norm(g, i, frame, &(tmpl - r_vec));
        residual = residual.max(if scale > 0.0 { d / scale } else { d });
        let half = g.t_lift[i] + g.f_lift[i] * (0.5 * g.k[i]);
        complex_residual = complex_residual.max(half.inner(&r_vec).abs());
    }
    let note = circular.then(|| {
        let k0 = kmean;
        format!(
            "circular: (mu, lambda) non-unique; any pair with lambda = {:.6e} - ({:.6e}) * (mu + kappa) fits",
            -frame.chi * k0.powi(3) / 2.0,
            k0
        )
    });
    Ok(ElasticDetection { r_vec, mu, lambda, residual, complex_residual, circular, note })
}

/// Residuals of the linear conserved quantity `r + t(2t + k f)` of
/// `d + t ξ`, `ξ(∂s) = −f ∧ f'`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservedResiduals {
    /// `max ‖dr/ds‖`.
    pub res0: f64,
    /// `max ‖(2t + k f)' + ξ r‖`.
    pub res1: f64,
    /// `max ‖ξ(2t + k f)‖`.
    pub res2: f64,
}

/// `r_field` holds one vector per sample, or a single constant vector.
pub fn verify_linear_conserved(g: &CurveGeometry, r_field: &[PseudoVector], stencil: Stencil) -> ConservedResiduals {
    let n = g.len();
    let h = g.u[1] - g.u[0];
    let r_at = |i: usize| if r_field.len() == 1 { r_field[0] } else { r_field[i] };
    let res0 = if r_field.len() == 1 {
        0.0
    } else {
        derivative(r_field, h, g.closed, stencil)
            .iter()
            .zip(&g.speed)
            .map(|(d, s)| d.euclid_norm() / s)
            .fold(0.0, f64::max)
    };
    let w: Vec<PseudoVector> = (0..n).map(|i| g.t_lift[i] * 2.0 + g.f_lift[i] * g.k[i]).collect();
    let dw = derivative(&w, h, g.closed, stencil);
    let mut res1: f64 = 0.0;
    let mut res2: f64 = 0.0;
    for i in 0..n {
        let xi = |x: &PseudoVector| -wedge_apply(&g.f_lift[i], &g.tangent[i], x);
        res1 = res1.max((dw[i] / g.speed[i] + xi(&r_at(i))).euclid_norm());
        res2 = res2.max(xi(&w[i]).euclid_norm());
    }
    ConservedResiduals { res0, res1, res2 }
}

/// Euclidean-orthonormal span of all frame vectors, used for quick dimension
/// checks of curves.
pub fn curve_span(c: &LegendreCurve, tol: f64) -> Vec<PseudoVector> {
    let all: Vec<_> = c.frames.iter().flat_map(|f| f.vectors()).collect();
    orthonormal_span(&all, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn circle(n: usize, r: f64, inward: bool) -> LegendreCurve {
        let h = TAU / n as f64;
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let a = i as f64 * h;
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        let sgn = if inward { -1.0 } else { 1.0 };
        let nrm: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let a = i as f64 * h;
                [sgn * a.cos(), sgn * a.sin()]
            })
            .collect();
        contact_lift_curve(&pts, &nrm, h, true, &SpaceFormFrame::euclidean()).unwrap()
    }

    #[test]
    fn circle_lift_example() {
        let fr = SpaceFormFrame::euclidean();
        let c = contact_lift_curve(
            &[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
            &[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
            TAU / 4.0,
            true,
            &fr,
        )
        .unwrap();
        assert_eq!(c.frames[0].0, PseudoVector::new([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]));
        assert_eq!(c.frames[0].1, PseudoVector::new([1.0, 0.0, 0.0, -1.0, 1.0, 1.0]));
        assert_eq!(c.frames[0].0.inner(&c.frames[0].1), 0.0);
    }

    #[test]
    fn circle_curvature_signs() {
        let fr = SpaceFormFrame::euclidean();
        let g = curve_geometry(&circle(64, 1.0, true), &fr, Stencil::Fourth).unwrap();
        assert!(g.k.iter().all(|k| (k - 1.0).abs() < 1e-6));
        let g = curve_geometry(&circle(64, 1.0, false), &fr, Stencil::Fourth).unwrap();
        assert!(g.k.iter().all(|k| (k + 1.0).abs() < 1e-6));
        let g = curve_geometry(&circle(64, 2.5, true), &fr, Stencil::Fourth).unwrap();
        assert!(g.k.iter().all(|k| (k - 0.4).abs() < 1e-6));
        assert!(g.normalization_defect(&fr) < 1e-6);
    }

    fn ellipse(n: usize, a: f64, b: f64) -> LegendreCurve {
        let h = TAU / n as f64;
        let mut pts = Vec::new();
        let mut nrm = Vec::new();
        for i in 0..n {
            let t = i as f64 * h;
            pts.push([a * t.cos(), b * t.sin()]);
            let (nx, ny) = (-b * t.cos(), -a * t.sin());
            let l = nx.hypot(ny);
            nrm.push([nx / l, ny / l]);
        }
        contact_lift_curve(&pts, &nrm, h, true, &SpaceFormFrame::euclidean()).unwrap()
    }

    #[test]
    fn curvature_converges_on_ellipse() {
        let fr = SpaceFormFrame::euclidean();
        let (a, b) = (2.0, 1.0);
        let err = |n, st| {
            let g = curve_geometry(&ellipse(n, a, b), &fr, st).unwrap();
            (0..n)
                .map(|i| {
                    let t = i as f64 * TAU / n as f64;
                    let exact = a * b / (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).powf(1.5);
                    (g.k[i] - exact).abs()
                })
                .fold(0.0f64, f64::max)
        };
        let r2 = err(64, Stencil::Second) / err(128, Stencil::Second);
        assert!(r2 > 3.5, "second order ratio {r2}");
        let r4 = err(64, Stencil::Fourth) / err(128, Stencil::Fourth);
        assert!(r4 > 12.0, "fourth order ratio {r4}");
    }

    #[test]
    fn line_has_zero_curvature_and_constant_plane() {
        let fr = SpaceFormFrame::euclidean();
        let pts: Vec<[f64; 2]> = (0..10).map(|i| [i as f64 * 0.1, 0.0]).collect();
        let nrm = vec![[0.0, 1.0]; 10];
        let c = contact_lift_curve(&pts, &nrm, 0.1, false, &fr).unwrap();
        assert!(c.frames.windows(2).all(|w| w[0].1 == w[1].1));
        let g = curve_geometry(&c, &fr, Stencil::Fourth).unwrap();
        assert!(g.k.iter().all(|k| k.abs() < 1e-12));
        // r = μ t with λ = 0 is constant along a line
        let r = elastic_complex_vector(&g, 0.7, 0.0, &fr);
        let res = verify_linear_conserved(&g, &r, Stencil::Fourth);
        assert!(res.res0 < 1e-12 && res.res1 < 1e-10 && res.res2 < 1e-12, "{res:?}");
    }

    #[test]
    fn zero_length_segment_rejected() {
        let fr = SpaceFormFrame::euclidean();
        let pts = [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        let nrm = [[0.0, 1.0]; 4];
        assert!(matches!(contact_lift_curve(&pts, &nrm, 1.0, false, &fr), Err(Error::DegenerateSampling(_))));
    }

    #[test]
    fn contractions_are_exact() {
        let fr = SpaceFormFrame::euclidean();
        let g = curve_geometry(&circle(40, 1.3, true), &fr, Stencil::Fourth).unwrap();
        for r in elastic_complex_vector(&g, -0.4, 0.25, &fr) {
            assert!((r.inner(&fr.q) - 0.25).abs() < 1e-12);
            assert!((r.inner(&fr.p) - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_vector_constant_on_the_constraint_line() {
        let fr = SpaceFormFrame::euclidean();
        let k0: f64 = 1.0 / 1.3;
        let mu = 0.3;
        let lambda = -k0.powi(3) / 2.0 - mu * k0;
        let g = curve_geometry(&circle(200, 1.3, true), &fr, Stencil::Fourth).unwrap();
        let r = elastic_complex_vector(&g, mu, lambda, &fr);
        let drift = r.iter().map(|x| (*x - r[0]).euclid_norm()).fold(0.0, f64::max);
        assert!(drift <= 1e-8, "drift {drift}");
        let det = detect_constrained_elastic(&g, &fr).unwrap();
        assert!(det.circular);
        assert!(det.residual < 1e-8);
    }

    #[test]
    fn xi_annihilates_curvature_circle_pair() {
        let fr = SpaceFormFrame::euclidean();
        let g = curve_geometry(&circle(50, 0.8, true), &fr, Stencil::Fourth).unwrap();
        let res = verify_linear_conserved(&g, &[fr.p], Stencil::Fourth);
        assert!(res.res2 <= 1e-12);
    }
}
