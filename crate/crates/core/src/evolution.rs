//! Spherical evolution maps: the gauge `A(v)` with `A' = −A (l ∧ l_v)`,
//! `A(v0) = id`, and surfaces `f(u, v) = A(v)⁻¹ C(u)`.

use nalgebra::{DMatrix, Matrix6};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{orthonormal_span, subspace_signature, Bivector, OrthoMap, PseudoVector, Signature};
use crate::curve::LegendreCurve;
use crate::diff::{derivative, interpolate, median, uniform_step, Stencil};
use crate::error::{Error, Result};
use crate::grid::SurfaceGrid;
use crate::ContactFrame;

const UNIT_TOL: f64 = 1e-9;

/// Closed-form families of spacelike lines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ComplexGenerator {
    Constant {
        l: PseudoVector,
    },
    /// `l = cos θ a + sin θ b` with `θ = rate (v + warp sin v)`.
    RotatingPlane {
        a: PseudoVector,
        b: PseudoVector,
        rate: f64,
        #[serde(default)]
        warp: f64,
    },
    /// `l = exp(θ a∧b) l0`, `θ` as for the rotating plane.
    Orbit {
        l0: PseudoVector,
        a: PseudoVector,
        b: PseudoVector,
        rate: f64,
        #[serde(default)]
        warp: f64,
    },
    /// `l ∝ base + Σ_j α_j(v) dirs_j` with `α_j(v) = Σ_k coeffs[j][k] v^k`.
    Polynomial {
        base: PseudoVector,
        dirs: Vec<PseudoVector>,
        coeffs: Vec<Vec<f64>>,
    },
}

fn angle(rate: f64, warp: f64, v: f64) -> (f64, f64) {
    (rate * (v + warp * v.sin()), rate * (1.0 + warp * v.cos()))
}

fn poly(c: &[f64], v: f64) -> (f64, f64) {
    let mut val = 0.0;
    let mut der = 0.0;
    for ck in c.iter().rev() {
        der = der * v + val;
        val = val * v + ck;
    }
    (val, der)
}

impl ComplexGenerator {
    pub fn validate(&self) -> Result<()> {
        match self {
            ComplexGenerator::Constant { l } => unit_check(l, "constant line"),
            ComplexGenerator::RotatingPlane { a, b, rate, warp } | ComplexGenerator::Orbit { a, b, rate, warp, .. } => {
                if !rate.is_finite() || !warp.is_finite() || warp.abs() >= 1.0 {
                    return Err(Error::InvalidComplex("rate/warp must be finite, |warp| < 1".into()));
                }
                if let ComplexGenerator::RotatingPlane { .. } = self {
                    unit_check(a, "a")?;
                    unit_check(b, "b")?;
                    if a.inner(b).abs() > UNIT_TOL {
                        return Err(Error::InvalidComplex("(a, b) != 0".into()));
                    }
                }
                if let ComplexGenerator::Orbit { l0, .. } = self {
                    unit_check(l0, "l0")?;
                }
                Ok(())
            }
            ComplexGenerator::Polynomial { dirs, coeffs, .. } => {
                if dirs.len() != coeffs.len() {
                    return Err(Error::InvalidComplex("one coefficient list per direction".into()));
                }
                Ok(())
            }
        }
    }

    /// `(l(v), l'(v))` with `(l, l) = 1`.
    pub fn eval(&self, v: f64) -> Result<(PseudoVector, PseudoVector)> {
        match self {
            ComplexGenerator::Constant { l } => Ok((*l, PseudoVector::zero())),
            ComplexGenerator::RotatingPlane { a, b, rate, warp } => {
                let (t, dt) = angle(*rate, *warp, v);
                let l = *a * t.cos() + *b * t.sin();
                let lv = (*b * t.cos() - *a * t.sin()) * dt;
                Ok((l, lv))
            }
            ComplexGenerator::Orbit { l0, a, b, rate, warp } => {
                let (t, dt) = angle(*rate, *warp, v);
                let gen = Bivector::wedge(*a, *b);
                let l = gen.scaled(t).exp().apply(l0);
                let lv = gen.apply(&l) * dt;
                Ok((l, lv))
            }
            ComplexGenerator::Polynomial { base, dirs, coeffs } => {
                let mut m = *base;
                let mut dm = PseudoVector::zero();
                for (d, c) in dirs.iter().zip(coeffs) {
                    let (a, da) = poly(c, v);
                    m += *d * a;
                    dm += *d * da;
                }
                let sq = m.square();
                if !(sq > 0.0) {
                    return Err(Error::InvalidComplex(format!("line not spacelike at v = {v}")));
                }
                let n = sq.sqrt();
                let l = m / n;
                let lv = dm / n - m * (m.inner(&dm) / (n * n * n));
                Ok((l, lv))
            }
        }
    }
}

fn unit_check(l: &PseudoVector, what: &str) -> Result<()> {
    if (l.square() - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidComplex(format!("{what} is not a unit spacelike vector")));
    }
    Ok(())
}

/// Sampled curve of spacelike lines with a sign-continuous unit section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexCurve {
    pub v: Vec<f64>,
    pub l: Vec<PseudoVector>,
    pub closed: bool,
    /// Exact values between samples when present.
    pub generator: Option<ComplexGenerator>,
}

impl ComplexCurve {
    pub fn from_samples(v: Vec<f64>, l: Vec<PseudoVector>, closed: bool) -> Result<Self> {
        if v.len() != l.len() || v.len() < 4 {
            return Err(Error::InvalidComplex(format!("{} parameters for {} samples (need >= 4)", v.len(), l.len())));
        }
        if uniform_step(&v).is_none() {
            return Err(Error::InvalidComplex("non-uniform parameter grid".into()));
        }
        let mut l = l;
        for (i, x) in l.iter().enumerate() {
            if !x.is_finite() || (x.square() - 1.0).abs() > 1e-8 {
                return Err(Error::NonUnitSection(i));
            }
        }
        for i in 1..l.len() {
            if l[i].inner(&l[i - 1]) < 0.0 {
                l[i] = -l[i];
            }
        }
        Ok(ComplexCurve { v, l, closed, generator: None })
    }

    pub fn from_generator(gen: ComplexGenerator, v: Vec<f64>, closed: bool) -> Result<Self> {
        gen.validate()?;
        let l = v.iter().map(|&x| gen.eval(x).map(|p| p.0)).collect::<Result<Vec<_>>>()?;
        let mut c = ComplexCurve::from_samples(v, l, closed)?;
        // keep the generator's own sign so exact derivatives match the samples
        c.l = c.v.iter().map(|&x| gen.eval(x).map(|p| p.0)).collect::<Result<Vec<_>>>()?;
        c.generator = Some(gen);
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.l.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.v[1] - self.v[0]
    }

    /// `l_v` at the samples, exact for generated curves.
    pub fn derivative(&self, stencil: Stencil) -> Result<Vec<PseudoVector>> {
        match &self.generator {
            Some(g) => self.v.iter().map(|&x| g.eval(x).map(|p| p.1)).collect(),
            None => Ok(derivative(&self.l, self.step(), self.closed, stencil)),
        }
    }

    /// `(l, l_v)` at fractional sample position `x` (in units of the step).
    fn eval_at(&self, x: f64, lv: &[PseudoVector]) -> Result<(PseudoVector, PseudoVector)> {
        if let Some(g) = &self.generator {
            return g.eval(self.v[0] + x * self.step());
        }
        let n = self.len();
        let top = if self.closed { n - 1 } else { n - 2 };
        let i = (x.floor().max(0.0) as usize).min(top);
        let tau = x - i as f64;
        Ok((interpolate(&self.l, i, tau, self.closed), interpolate(lv, i, tau, self.closed)))
    }
}

/// `l ∧ l_v` per sample.
pub fn connection_form(l: &ComplexCurve, stencil: Stencil) -> Result<Vec<Bivector>> {
    let lv = l.derivative(stencil)?;
    l.l.iter()
        .zip(&lv)
        .enumerate()
        .map(|(i, (a, b))| {
            if a.inner(b).abs() > 1e-4 * b.euclid_norm().max(1.0) {
                return Err(Error::NonUnitSection(i));
            }
            Ok(Bivector::wedge(*a, *b))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionOptions {
    pub renorm_every: usize,
    /// RK4 substeps per grid interval.
    pub substeps: usize,
    pub stencil: Stencil,
}

impl Default for EvolutionOptions {
    fn default() -> Self {
        EvolutionOptions { renorm_every: 50, substeps: 1, stencil: Stencil::Fourth }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionMap {
    pub v: Vec<f64>,
    #[serde(skip)]
    pub maps: Vec<OrthoMap>,
    pub v0_index: usize,
    pub closed: bool,
    /// `‖A(v_start + period) A(v_start)⁻¹ − id‖` for closed complexes.
    pub holonomy: Option<f64>,
    pub max_defect: f64,
    pub complex: ComplexCurve,
}

impl EvolutionMap {
    /// `max ‖A(v) l(v) − l(v0)‖`.
    pub fn parallelism_residual(&self) -> f64 {
        let l0 = self.complex.l[self.v0_index];
        self.maps.iter().zip(&self.complex.l).map(|(a, l)| (a.apply(l) - l0).euclid_norm()).fold(0.0, f64::max)
    }

    pub fn l0(&self) -> PseudoVector {
        self.complex.l[self.v0_index]
    }
}

fn matrix_of(l: &PseudoVector, lv: &PseudoVector) -> Matrix6<f64> {
    *Bivector::wedge(*l, *lv).operator()
}

/// Integrates `A' = −A (l ∧ l_v)` from `v0_index` in both directions with
/// RK4, projecting back onto the group every `renorm_every` grid steps.
pub fn integrate_evolution(l: &ComplexCurve, v0_index: usize, opts: &EvolutionOptions) -> Result<EvolutionMap> {
    let n = l.len();
    if v0_index >= n {
        return Err(Error::InvalidComplex(format!("base index {v0_index} out of range")));
    }
    let lv = l.derivative(opts.stencil)?;
    connection_form(l, opts.stencil)?;
    let h = l.step();
    let m = opts.substeps.max(1);
    let nmat = |x: f64| -> Result<Matrix6<f64>> {
        let (a, b) = l.eval_at(x, &lv)?;
        Ok(matrix_of(&a, &b))
    };
    // one grid interval from position x in direction dir (±1)
    let advance = |a: &Matrix6<f64>, x: f64, dir: f64| -> Result<Matrix6<f64>> {
        let dx = dir / m as f64;
        let dh = dx * h;
        let mut a = *a;
        for j in 0..m {
            let x0 = x + dx * j as f64;
            let n0 = nmat(x0)?;
            let nm = nmat(x0 + 0.5 * dx)?;
            let n1 = nmat(x0 + dx)?;
            let k1 = -a * n0;
            let k2 = -(a + k1 * (0.5 * dh)) * nm;
            let k3 = -(a + k2 * (0.5 * dh)) * nm;
            let k4 = -(a + k3 * dh) * n1;
            a += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dh / 6.0);
        }
        Ok(a)
    };
    let renorm = opts.renorm_every;
    let finish = |a: Matrix6<f64>, count: usize| -> Result<OrthoMap> {
        if !a.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("evolution map"));
        }
        let mut map = OrthoMap::new(a);
        if renorm > 0 && count.is_multiple_of(renorm) {
            map = map.renormalized();
            if map.defect() > 1e-6 {
                return Err(Error::LostGroup(map.defect()));
            }
        }
        Ok(map)
    };
    let mut maps = vec![OrthoMap::identity(); n];
    let mut count = 0;
    for i in v0_index..n - 1 {
        let a = advance(maps[i].matrix(), i as f64, 1.0)?;
        count += 1;
        maps[i + 1] = finish(a, count)?;
    }
    count = 0;
    for i in (1..=v0_index).rev() {
        let a = advance(maps[i].matrix(), i as f64, -1.0)?;
        count += 1;
        maps[i - 1] = finish(a, count)?;
    }
    let max_defect = maps.iter().map(OrthoMap::defect).fold(0.0, f64::max);
    if max_defect > 1e-6 {
        return Err(Error::LostGroup(max_defect));
    }
    let holonomy = if l.closed {
        let end = OrthoMap::new(advance(maps[n - 1].matrix(), (n - 1) as f64, 1.0)?);
        let hol = end.compose(&maps[0].inverse());
        Some((hol.matrix() - Matrix6::identity()).amax())
    } else {
        None
    };
    Ok(EvolutionMap { v: l.v.clone(), maps, v0_index, closed: l.closed, holonomy, max_defect, complex: l.clone() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceOptions {
    /// Regularity floor relative to the median regularity.
    pub relative_floor: f64,
    /// Largest accepted `|(ρ, l0)| / |ρ|` for the base curve.
    pub complex_tol: f64,
    pub stencil: Stencil,
}

impl Default for SurfaceOptions {
    fn default() -> Self {
        SurfaceOptions { relative_floor: 1e-6, complex_tol: 1e-8, stencil: Stencil::Fourth }
    }
}

/// `f(u, v) = A(v)⁻¹ C(u)`.
///
/// Regularity is the size of `ρ ↦ (l ∧ l_v) ρ` on the Euclidean-normalized
/// frame of `f`, i.e. `sqrt((l_v, ρ̂1)² + (l_v, ρ̂2)²)`; this map has rank at
/// most one so its norm stands in for its singular values.
pub fn evolve_surface(a: &EvolutionMap, c: &LegendreCurve, opts: &SurfaceOptions) -> Result<SurfaceGrid> {
    if a.maps.len() != a.v.len() || c.is_empty() {
        return Err(Error::IncompatibleGrids("empty curve or evolution".into()));
    }
    let l0 = a.l0();
    let worst =
        c.frames.iter().flat_map(|f| f.vectors()).map(|r| r.inner(&l0).abs() / r.euclid_norm()).fold(0.0, f64::max);
    if worst > opts.complex_tol {
        return Err(Error::CurveNotInComplex(worst));
    }
    let inv: Vec<OrthoMap> = a.maps.iter().map(OrthoMap::inverse).collect();
    let lv = a.complex.derivative(opts.stencil)?;
    let (nu, nv) = (c.len(), a.v.len());
    let cells: Vec<(ContactFrame, f64)> = (0..nu * nv)
        .into_par_iter()
        .map(|i| {
            let (iu, iv) = (i / nv, i % nv);
            let fr = c.frames[iu].map(|x| inv[iv].apply(x));
            let r1 = fr.0.euclid_normalized().unwrap_or(fr.0);
            let r2 = fr.1.euclid_normalized().unwrap_or(fr.1);
            let reg = lv[iv].inner(&r1).hypot(lv[iv].inner(&r2));
            (fr, reg)
        })
        .collect();
    let regularity: Vec<f64> = cells.iter().map(|c| c.1).collect();
    let rmax = regularity.iter().fold(0.0f64, |m, x| m.max(*x));
    if rmax <= 1e-12 {
        return Err(Error::DegenerateEvolution);
    }
    let floor = opts.relative_floor * median(regularity.iter().copied()).max(1e-12 * rmax);
    let wrap_v = a.closed && a.holonomy.is_some_and(|h| h <= 1e-6);
    let complex = inv.iter().map(|m| m.apply(&l0)).collect();
    let g = SurfaceGrid {
        u: c.u.clone(),
        v: a.v.clone(),
        frames: cells.into_iter().map(|c| c.0).collect(),
        regularity,
        regularity_floor: floor,
        wrap_u: c.closed,
        wrap_v,
        complex: Some(complex),
        base_index: a.v0_index,
    };
    g.check()?;
    Ok(g)
}

/// Smallest constant subspace holding every sample of `L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub basis: Vec<PseudoVector>,
    pub dim: usize,
    pub signature: Option<Signature>,
    /// Largest discarded singular value relative to the largest one.
    pub residual: f64,
    pub singular_values: Vec<f64>,
    /// `envelope ∩ <l(v0)>^⊥`, when `dim <= 4`.
    pub w0: Option<Vec<PseudoVector>>,
    pub w0_signature: Option<Signature>,
    /// More than four directions are needed.
    pub no_envelope: bool,
}

/// Singular-value thresholding of the sample matrix at `rel_tol`.
pub fn fit_constant_envelope(l: &ComplexCurve, v0_index: usize, rel_tol: f64) -> EnvelopeFit {
    let n = l.len();
    let m = DMatrix::from_fn(6, n, |r, c| l.l[c].0[r]);
    let svd = m.svd(true, false);
    let u = svd.u.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let smax = sv.first().copied().unwrap_or(0.0);
    let dim = sv.iter().filter(|&&s| s > rel_tol * smax).count();
    let basis: Vec<PseudoVector> =
        order[..dim].iter().map(|&i| PseudoVector(u.column(i).fixed_rows::<6>(0).into_owned())).collect();
    let residual = if dim < sv.len() && smax > 0.0 { sv[dim] / smax } else { 0.0 };
    let signature = subspace_signature(&basis, 1e-6).ok();
    let (w0, w0_signature) = if (1..=4).contains(&dim) {
        let l0 = l.l[v0_index.min(n - 1)];
        let proj: Vec<PseudoVector> = basis.iter().map(|b| *b - l0 * b.inner(&l0)).collect();
        let w = orthonormal_span(&proj, 1e-6);
        let sig = subspace_signature(&w, 1e-6).ok();
        (Some(w), sig)
    } else {
        (None, None)
    };
    EnvelopeFit { basis, dim, signature, residual, singular_values: sv, w0, w0_signature, no_envelope: dim > 4 }
}
