//! Symmetry breaking: lifts of points, oriented spheres and planes of a
//! space form into the light cone, and projections back.

use serde::{Deserialize, Serialize};

use crate::algebra::{OrthoMap, PseudoVector};
use crate::error::{Error, Result};

const FRAME_TOL: f64 = 1e-9;

/// Point sphere complex `p`, space form vector `q`, and for the Euclidean
/// model an origin `o` and three orthonormal axes spanning `<p, q, o>^⊥`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceFormFrame {
    pub p: PseudoVector,
    pub q: PseudoVector,
    pub o: Option<PseudoVector>,
    pub axes: [PseudoVector; 3],
    pub chi: f64,
    pub kappa: f64,
}

/// Oriented sphere; the sign of `radius` is the orientation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedSphere {
    pub center: [f64; 3],
    pub radius: f64,
}

/// What a light-cone point projects to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Projected {
    Point([f64; 3]),
    Sphere(OrientedSphere),
    Plane { normal: [f64; 3], offset: f64 },
}

impl SpaceFormFrame {
    /// `p = e6`, `q = e5 - e4`, `o = (e4 + e5)/2`; ambient 3-space `<e1,e2,e3>`.
    pub fn euclidean() -> Self {
        let e = PseudoVector::e;
        SpaceFormFrame {
            p: e(6),
            q: e(5) - e(4),
            o: Some((e(4) + e(5)) * 0.5),
            axes: [e(1), e(2), e(3)],
            chi: 1.0,
            kappa: 0.0,
        }
    }

    /// Frame given only by `p` and `q` (spherical or hyperbolic space forms).
    /// Only inner products against `p`, `q` are available for such frames.
    pub fn from_vectors(p: PseudoVector, q: PseudoVector) -> Result<Self> {
        let chi = -p.square();
        let kappa = -q.square();
        if (chi.abs() - 1.0).abs() > FRAME_TOL {
            return Err(Error::InvalidFrame(format!("(p,p) = {}", -chi)));
        }
        if p.inner(&q).abs() > FRAME_TOL {
            return Err(Error::InvalidFrame("(p,q) != 0".into()));
        }
        let e = PseudoVector::e;
        Ok(SpaceFormFrame { p, q, o: None, axes: [e(1), e(2), e(3)], chi, kappa })
    }

    /// Image of the frame under a metric-preserving map.
    pub fn transformed(&self, m: &OrthoMap) -> Self {
        SpaceFormFrame {
            p: m.apply(&self.p),
            q: m.apply(&self.q),
            o: self.o.map(|o| m.apply(&o)),
            axes: self.axes.map(|a| m.apply(&a)),
            chi: self.chi,
            kappa: self.kappa,
        }
    }

    pub fn is_euclidean(&self) -> bool {
        self.o.is_some() && self.kappa.abs() <= FRAME_TOL
    }

    fn origin(&self) -> Result<PseudoVector> {
        match self.o {
            Some(o) if self.is_euclidean() => Ok(o),
            _ => Err(Error::UnsupportedFrame(format!("point model needs a Euclidean frame (kappa = {})", self.kappa))),
        }
    }

    fn embed(&self, x: [f64; 3]) -> PseudoVector {
        self.axes[0] * x[0] + self.axes[1] * x[1] + self.axes[2] * x[2]
    }

    fn coords(&self, y: &PseudoVector) -> [f64; 3] {
        [y.inner(&self.axes[0]), y.inner(&self.axes[1]), y.inner(&self.axes[2])]
    }

    /// `o + x + |x|²/2 q`.
    pub fn lift_point(&self, x: [f64; 3]) -> Result<PseudoVector> {
        let o = self.origin()?;
        let r2 = dot3(x, x);
        Ok(o + self.embed(x) + self.q * (0.5 * r2))
    }

    /// `o + c + (|c|² − r²)/2 q + r p`.
    pub fn lift_sphere(&self, s: &OrientedSphere) -> Result<PseudoVector> {
        if s.radius == 0.0 {
            return Err(Error::ZeroRadius);
        }
        let o = self.origin()?;
        let c = s.center;
        Ok(o + self.embed(c) + self.q * (0.5 * (dot3(c, c) - s.radius * s.radius)) + self.p * s.radius)
    }

    /// `n + d q + p` for the plane `x·n = d`.
    pub fn lift_plane(&self, n: [f64; 3], d: f64) -> Result<PseudoVector> {
        let norm = dot3(n, n).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::NonUnitNormal(norm));
        }
        self.origin()?;
        Ok(self.embed(n) + self.q * d + self.p)
    }

    /// Inverse of [`lift_point`](Self::lift_point) up to scale.
    pub fn project_point(&self, y: &PseudoVector) -> Result<[f64; 3]> {
        self.origin()?;
        let scale = y.euclid_norm().max(f64::MIN_POSITIVE);
        let yq = y.inner(&self.q);
        if yq.abs() <= 1e-12 * scale {
            return Err(Error::PointAtInfinity);
        }
        if y.inner(&self.p).abs() > 1e-9 * yq.abs().max(1e-300) {
            return Err(Error::NotPointSphere);
        }
        let y = *y * (-1.0 / yq);
        Ok(self.coords(&y))
    }

    /// Center/radius, plane or point represented by a light-cone vector.
    pub fn project(&self, y: &PseudoVector) -> Result<Projected> {
        self.origin()?;
        let scale = y.euclid_norm().max(f64::MIN_POSITIVE);
        let yq = y.inner(&self.q);
        let yp = y.inner(&self.p);
        if yq.abs() <= 1e-12 * scale {
            if yp.abs() <= 1e-12 * scale {
                return Err(Error::PointAtInfinity);
            }
            // plane: normalize (y,p) = -1, then y = n + d q + p
            let y = *y * (-1.0 / yp);
            let o = self.o.expect("checked Euclidean");
            return Ok(Projected::Plane { normal: self.coords(&y), offset: -y.inner(&o) });
        }
        let y = *y * (-1.0 / yq);
        let yp = y.inner(&self.p);
        let center = self.coords(&y);
        if yp.abs() <= 1e-12 * y.euclid_norm() {
            Ok(Projected::Point(center))
        } else {
            Ok(Projected::Sphere(OrientedSphere { center, radius: -yp }))
        }
    }
}

impl Default for SpaceFormFrame {
    fn default() -> Self {
        SpaceFormFrame::euclidean()
    }
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
