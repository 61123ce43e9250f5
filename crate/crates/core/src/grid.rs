//! Sampled Legendre surfaces on a rectangular parameter grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::PseudoVector;
use crate::curve::legendre_defect;
use crate::diff::{derivative, uniform_step, Stencil};
use crate::error::{Error, Result};
use crate::space_form::SpaceFormFrame;
use crate::ContactFrame;

/// Contact elements `f(u, v)` stored row-major as `frames[iu * nv + iv]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGrid {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub frames: Vec<ContactFrame>,
    /// Per-cell regularity; cells below `regularity_floor` are excluded from
    /// residual statistics.
    pub regularity: Vec<f64>,
    pub regularity_floor: f64,
    pub wrap_u: bool,
    pub wrap_v: bool,
    /// Spacelike vector per `v` column that the surface is known to be
    /// orthogonal to along the whole `u` line (set by evolution).
    pub complex: Option<Vec<PseudoVector>>,
    /// Column holding the unevolved base curve.
    pub base_index: usize,
}

impl SurfaceGrid {
    /// Builds a grid with unit regularity everywhere.
    pub fn new(u: Vec<f64>, v: Vec<f64>, frames: Vec<ContactFrame>, wrap_u: bool, wrap_v: bool) -> Result<Self> {
        let n = u.len() * v.len();
        let g = SurfaceGrid {
            regularity: vec![1.0; n],
            u,
            v,
            frames,
            regularity_floor: 0.0,
            wrap_u,
            wrap_v,
            complex: None,
            base_index: 0,
        };
        g.check()?;
        Ok(g)
    }

    pub fn check(&self) -> Result<()> {
        let (nu, nv) = (self.u.len(), self.v.len());
        if nu < 4 || nv < 4 {
            return Err(Error::IncompatibleGrids(format!("grid {nu}x{nv}; need at least 4 samples per direction")));
        }
        if self.frames.len() != nu * nv || self.regularity.len() != nu * nv {
            return Err(Error::IncompatibleGrids(format!(
                "{} frames / {} regularity values for a {nu}x{nv} grid",
                self.frames.len(),
                self.regularity.len()
            )));
        }
        if uniform_step(&self.u).is_none() || uniform_step(&self.v).is_none() {
            return Err(Error::DegenerateSampling("non-uniform surface grid".into()));
        }
        if let Some(c) = &self.complex {
            if c.len() != nv {
                return Err(Error::IncompatibleGrids("complex column count".into()));
            }
        }
        if self.base_index >= nv {
            return Err(Error::IncompatibleGrids("base index out of range".into()));
        }
        Ok(())
    }

    pub fn nu(&self) -> usize {
        self.u.len()
    }

    pub fn nv(&self) -> usize {
        self.v.len()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn idx(&self, iu: usize, iv: usize) -> usize {
        iu * self.nv() + iv
    }

    pub fn du(&self) -> f64 {
        self.u[1] - self.u[0]
    }

    pub fn dv(&self) -> f64 {
        self.v[1] - self.v[0]
    }

    pub fn frame(&self, iu: usize, iv: usize) -> &ContactFrame {
        &self.frames[self.idx(iu, iv)]
    }

    pub fn valid(&self, i: usize) -> bool {
        self.regularity[i] > self.regularity_floor
    }

    pub fn rho1(&self) -> Vec<PseudoVector> {
        self.frames.iter().map(|f| f.0).collect()
    }

    pub fn rho2(&self) -> Vec<PseudoVector> {
        self.frames.iter().map(|f| f.1).collect()
    }

    /// Column `u ↦ f(u, v_iv)` as a Legendre curve.
    pub fn u_curve(&self, iv: usize, ambient: PseudoVector) -> Result<crate::curve::LegendreCurve> {
        let frames = (0..self.nu()).map(|iu| *self.frame(iu, iv)).collect();
        crate::curve::LegendreCurve::new(self.u.clone(), frames, ambient, self.wrap_u)
    }

    pub fn map(&self, f: impl Fn(&PseudoVector) -> PseudoVector + Sync) -> SurfaceGrid {
        SurfaceGrid {
            frames: self.frames.par_iter().map(|c| c.map(&f)).collect(),
            complex: self.complex.as_ref().map(|c| c.iter().map(&f).collect()),
            ..self.clone()
        }
    }

    pub fn isotropy_defect(&self) -> f64 {
        self.frames.par_iter().map(ContactFrame::isotropy_defect).reduce(|| 0.0, f64::max)
    }

    /// Largest relative `|(∂ρ_i, ρ_j)|` over valid cells and both directions.
    pub fn legendre_residual(&self, stencil: Stencil) -> f64 {
        let r1 = self.rho1();
        let r2 = self.rho2();
        let (d1u, d1v) = grid_derivatives(self, &r1, stencil);
        let (d2u, d2v) = grid_derivatives(self, &r2, stencil);
        (0..self.len())
            .filter(|&i| self.valid(i))
            .map(|i| {
                let rho = [r1[i], r2[i]];
                legendre_defect(&rho, &[d1u[i], d2u[i]]).max(legendre_defect(&rho, &[d1v[i], d2v[i]]))
            })
            .fold(0.0, f64::max)
    }

    /// Point-sphere lifts `f ∩ p^⊥` normalized by `(x, q) = −1`; `None` where
    /// the contact element contains `p^⊥`-degenerate directions.
    pub fn point_lifts(&self, frame: &SpaceFormFrame) -> Vec<Option<PseudoVector>> {
        self.frames.par_iter().map(|c| c.solve_pairing(&frame.p, 0.0, &frame.q, -1.0)).collect()
    }
}

/// Derivatives of a per-cell field along `u` and `v`.
pub fn grid_derivatives<T: crate::diff::Field + Send + Sync>(
    g: &SurfaceGrid,
    field: &[T],
    stencil: Stencil,
) -> (Vec<T>, Vec<T>) {
    (derivative_u(g, field, stencil), derivative_v(g, field, stencil))
}

pub fn derivative_u<T: crate::diff::Field + Send + Sync>(g: &SurfaceGrid, field: &[T], stencil: Stencil) -> Vec<T> {
    along(g, field, Axis::U, g.wrap_u, |f, h, c| derivative(f, h, c, stencil))
}

pub fn derivative_v<T: crate::diff::Field + Send + Sync>(g: &SurfaceGrid, field: &[T], stencil: Stencil) -> Vec<T> {
    along(g, field, Axis::V, g.wrap_v, |f, h, c| derivative(f, h, c, stencil))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    U,
    V,
}

/// Applies a 1-D operator `op(samples, step, closed)` to every grid line
/// running along `axis`.
pub fn along<T, F>(g: &SurfaceGrid, field: &[T], axis: Axis, closed: bool, op: F) -> Vec<T>
where
    T: crate::diff::Field + Send + Sync,
    F: Fn(&[T], f64, bool) -> Vec<T> + Sync,
{
    let (nu, nv) = (g.nu(), g.nv());
    match axis {
        Axis::V => field.par_chunks(nv).flat_map_iter(|row| op(row, g.dv(), closed)).collect(),
        Axis::U => {
            let cols: Vec<Vec<T>> = (0..nv)
                .into_par_iter()
                .map(|iv| {
                    let col: Vec<T> = (0..nu).map(|iu| field[iu * nv + iv]).collect();
                    op(&col, g.du(), closed)
                })
                .collect();
            let mut out = Vec::with_capacity(nu * nv);
            for iu in 0..nu {
                for col in &cols {
                    out.push(col[iu]);
                }
            }
            out
        }
    }
}

/// Point/tangent-plane lifts of a parametrized surface with unit normals.
pub fn contact_lift_surface(
    points: &[[f64; 3]],
    normals: &[[f64; 3]],
    u: Vec<f64>,
    v: Vec<f64>,
    wrap_u: bool,
    wrap_v: bool,
    frame: &SpaceFormFrame,
) -> Result<SurfaceGrid> {
    let n = u.len() * v.len();
    if points.len() != n || normals.len() != n {
        return Err(Error::IncompatibleGrids(format!(
            "{} points / {} normals for {} cells",
            points.len(),
            normals.len(),
            n
        )));
    }
    let frames = points
        .iter()
        .zip(normals)
        .map(|(x, nrm)| {
            let d = crate::space_form::dot3(*x, *nrm);
            Ok(ContactFrame(frame.lift_point(*x)?, frame.lift_plane(*nrm, d)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let nv = v.len();
    let nu = u.len();
    let g = SurfaceGrid::new(u, v, frames, wrap_u, wrap_v)?;
    // neighbouring samples must be distinct points
    for iu in 0..nu {
        for iv in 0..nv {
            let i = iu * nv + iv;
            let nexts = [
                (iu + 1 < nu || wrap_u).then(|| ((iu + 1) % nu) * nv + iv),
                (iv + 1 < nv || wrap_v).then(|| iu * nv + (iv + 1) % nv),
            ];
            for j in nexts.into_iter().flatten() {
                let d = (0..3).map(|k| (points[i][k] - points[j][k]).powi(2)).sum::<f64>();
                if d <= 1e-28 {
                    return Err(Error::DegenerateSampling(format!("coincident samples at cell ({iu}, {iv})")));
                }
            }
        }
    }
    Ok(g)
}
