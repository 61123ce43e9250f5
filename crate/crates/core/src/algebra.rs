//! Bilinear-form arithmetic in the six-dimensional space of signature (4,2).
//!
//! The basis `e1..e6` is fixed with `(e_i, e_i) = +1` for `i <= 4` and
//! `(e_5, e_5) = (e_6, e_6) = -1`. Every other module inherits this
//! convention. Euclidean coordinate norms (`euclid_norm`) are only used for
//! conditioning and residual reporting, never for geometry.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use nalgebra::{Matrix6, SymmetricEigen, Vector6};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Diagonal of the metric matrix.
pub const METRIC_DIAG: [f64; 6] = [1.0, 1.0, 1.0, 1.0, -1.0, -1.0];

/// Default rank/degeneracy tolerance, relative to the largest singular value
/// or Gram eigenvalue involved.
pub const RANK_TOL: f64 = 1e-9;

/// The metric matrix `G = diag(+,+,+,+,-,-)`.
pub fn metric() -> Matrix6<f64> {
    Matrix6::from_diagonal(&Vector6::from(METRIC_DIAG))
}

/// An element of the (4,2) space in the fixed basis `e1..e6`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PseudoVector(pub Vector6<f64>);

impl PseudoVector {
    pub fn new(coords: [f64; 6]) -> Self {
        PseudoVector(Vector6::from(coords))
    }

    pub fn zero() -> Self {
        PseudoVector(Vector6::zeros())
    }

    /// Basis vector `e_k`, one-based to match the usual `e1..e6` naming.
    pub fn e(k: usize) -> Self {
        assert!((1..=6).contains(&k), "basis index {k} out of range 1..=6");
        let mut v = Vector6::zeros();
        v[k - 1] = 1.0;
        PseudoVector(v)
    }

    pub fn coords(&self) -> [f64; 6] {
        self.0.into()
    }

    pub fn inner(&self, other: &PseudoVector) -> f64 {
        (0..6).map(|i| METRIC_DIAG[i] * self.0[i] * other.0[i]).sum()
    }

    /// `(v, v)` for the indefinite metric.
    pub fn square(&self) -> f64 {
        self.inner(self)
    }

    /// Index-lowered copy `G v`.
    pub fn lowered(&self) -> PseudoVector {
        PseudoVector(self.0.component_mul(&Vector6::from(METRIC_DIAG)))
    }

    pub fn euclid_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn euclid_dot(&self, other: &PseudoVector) -> f64 {
        self.0.dot(&other.0)
    }

    /// Unit Euclidean representative; `None` for the zero vector.
    pub fn euclid_normalized(&self) -> Option<PseudoVector> {
        let n = self.euclid_norm();
        (n > 0.0 && n.is_finite()).then(|| *self / n)
    }

    /// Representative with `(v, v) = ±1`; `None` for null or zero vectors.
    pub fn metric_normalized(&self) -> Option<PseudoVector> {
        let sq = self.square();
        let scale = self.euclid_norm();
        if scale == 0.0 || sq.abs() <= RANK_TOL * scale * scale {
            return None;
        }
        Some(*self / sq.abs().sqrt())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Flip sign so that the first component with magnitude above `tol`
    /// (relative to the largest) is positive.
    pub fn with_canonical_sign(&self) -> PseudoVector {
        let scale = self.0.amax();
        for &c in self.0.iter() {
            if c.abs() > 1e-12 * scale {
                return if c < 0.0 { -*self } else { *self };
            }
        }
        *self
    }
}

impl fmt::Display for PseudoVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.coords();
        write!(f, "({}, {}, {}, {}, {}, {})", c[0], c[1], c[2], c[3], c[4], c[5])
    }
}

impl Serialize for PseudoVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for PseudoVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        <[f64; 6]>::deserialize(d).map(PseudoVector::new)
    }
}

impl From<[f64; 6]> for PseudoVector {
    fn from(c: [f64; 6]) -> Self {
        PseudoVector::new(c)
    }
}

impl Add for PseudoVector {
    type Output = PseudoVector;
    fn add(self, rhs: PseudoVector) -> PseudoVector {
        PseudoVector(self.0 + rhs.0)
    }
}

impl Sub for PseudoVector {
    type Output = PseudoVector;
    fn sub(self, rhs: PseudoVector) -> PseudoVector {
        PseudoVector(self.0 - rhs.0)
    }
}

impl Neg for PseudoVector {
    type Output = PseudoVector;
    fn neg(self) -> PseudoVector {
        PseudoVector(-self.0)
    }
}

impl Mul<f64> for PseudoVector {
    type Output = PseudoVector;
    fn mul(self, rhs: f64) -> PseudoVector {
        PseudoVector(self.0 * rhs)
    }
}

impl Mul<PseudoVector> for f64 {
    type Output = PseudoVector;
    fn mul(self, rhs: PseudoVector) -> PseudoVector {
        PseudoVector(rhs.0 * self)
    }
}

impl Div<f64> for PseudoVector {
    type Output = PseudoVector;
    fn div(self, rhs: f64) -> PseudoVector {
        PseudoVector(self.0 / rhs)
    }
}

impl AddAssign for PseudoVector {
    fn add_assign(&mut self, rhs: PseudoVector) {
        self.0 += rhs.0;
    }
}

impl SubAssign for PseudoVector {
    fn sub_assign(&mut self, rhs: PseudoVector) {
        self.0 -= rhs.0;
    }
}

impl Sum for PseudoVector {
    fn sum<I: Iterator<Item = PseudoVector>>(iter: I) -> Self {
        iter.fold(PseudoVector::zero(), |a, b| a + b)
    }
}

pub fn inner(a: &PseudoVector, b: &PseudoVector) -> f64 {
    a.inner(b)
}

/// `(a ∧ b) c = (a, c) b − (b, c) a`.
pub fn wedge_apply(a: &PseudoVector, b: &PseudoVector, c: &PseudoVector) -> PseudoVector {
    a.inner(c) * *b - b.inner(c) * *a
}

/// Element of the Lie algebra of the metric group, stored as a 6×6 operator.
///
/// Decomposable bivectors keep their factors; sums keep only the operator.
#[derive(Clone, Debug, PartialEq)]
pub struct Bivector {
    factors: Option<(PseudoVector, PseudoVector)>,
    op: Matrix6<f64>,
}

impl Bivector {
    pub fn wedge(a: PseudoVector, b: PseudoVector) -> Self {
        // c ↦ b (Ga)ᵀc − a (Gb)ᵀc
        let op = b.0 * a.lowered().0.transpose() - a.0 * b.lowered().0.transpose();
        Bivector { factors: Some((a, b)), op }
    }

    pub fn zero() -> Self {
        Bivector { factors: None, op: Matrix6::zeros() }
    }

    pub fn from_operator(op: Matrix6<f64>) -> Self {
        Bivector { factors: None, op }
    }

    pub fn factors(&self) -> Option<(PseudoVector, PseudoVector)> {
        self.factors
    }

    pub fn operator(&self) -> &Matrix6<f64> {
        &self.op
    }

    pub fn apply(&self, c: &PseudoVector) -> PseudoVector {
        PseudoVector(self.op * c.0)
    }

    pub fn scaled(&self, s: f64) -> Bivector {
        Bivector { factors: self.factors.map(|(a, b)| (a * s, b)), op: self.op * s }
    }

    /// `‖BᵀG + GB‖_∞`, zero for metric skew-adjoint operators.
    pub fn skew_defect(&self) -> f64 {
        let g = metric();
        (self.op.transpose() * g + g * self.op).amax()
    }

    /// Group element `exp(B)` (scaling-and-squaring Padé from nalgebra).
    pub fn exp(&self) -> OrthoMap {
        OrthoMap::new(self.op.exp())
    }

    /// Conjugate by a group element: `M B M⁻¹`.
    pub fn conjugated(&self, m: &OrthoMap) -> Bivector {
        let op = m.matrix * self.op * m.inverse().matrix;
        Bivector { factors: self.factors.map(|(a, b)| (m.apply(&a), m.apply(&b))), op }
    }
}

impl Add for Bivector {
    type Output = Bivector;
    fn add(self, rhs: Bivector) -> Bivector {
        Bivector::from_operator(self.op + rhs.op)
    }
}

/// Counts of positive, negative and null directions of a subspace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Signature {
    pub positive: usize,
    pub negative: usize,
    pub null: usize,
}

impl Signature {
    pub fn new(positive: usize, negative: usize, null: usize) -> Self {
        Signature { positive, negative, null }
    }

    pub fn dim(&self) -> usize {
        self.positive + self.negative + self.null
    }

    pub fn is_degenerate(&self) -> bool {
        self.null > 0
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.positive, self.negative, self.null)
    }
}

/// Euclidean-orthonormal basis of the span of `vectors`, keeping directions
/// whose singular value exceeds `tol` times the largest one.
pub fn orthonormal_span(vectors: &[PseudoVector], tol: f64) -> Vec<PseudoVector> {
    if vectors.is_empty() {
        return Vec::new();
    }
    // SVD of the vectors themselves: the Gram matrix would square the
    // condition number and blur the rank cut
    let m = nalgebra::DMatrix::from_fn(6, vectors.len(), |r, c| vectors[c].0[r]);
    let svd = m.svd(true, false);
    let u = svd.u.expect("requested");
    let sv = &svd.singular_values;
    let max = sv.amax();
    if max <= 0.0 || !max.is_finite() {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    idx.into_iter()
        .filter(|&i| sv[i] > tol * max)
        .map(|i| PseudoVector(u.column(i).fixed_rows::<6>(0).into_owned()).with_canonical_sign())
        .collect()
}

/// Euclidean-orthonormal basis of the Euclidean orthogonal complement of the
/// span of an orthonormal family.
fn euclid_complement(orthonormal: &[PseudoVector]) -> Vec<PseudoVector> {
    let mut proj = Matrix6::zeros();
    for v in orthonormal {
        proj += v.0 * v.0.transpose();
    }
    let eig = SymmetricEigen::new(proj);
    let mut idx: Vec<usize> = (0..6).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    idx.into_iter()
        .take(6 - orthonormal.len())
        .map(|i| PseudoVector(eig.eigenvectors.column(i).into_owned()).with_canonical_sign())
        .collect()
}

/// Counts the signs of the Gram eigenvalues of the span of `basis`.
///
/// Near-dependent inputs are first reduced to a Euclidean-orthonormal basis
/// of their span, so the result depends only on the span.
pub fn subspace_signature(basis: &[PseudoVector], tol: f64) -> Result<Signature> {
    if basis.is_empty() {
        return Err(Error::EmptySubspace);
    }
    let q = orthonormal_span(basis, tol);
    if q.is_empty() {
        return Err(Error::EmptySubspace);
    }
    Ok(gram_signature(&q, tol))
}

fn gram_signature(q: &[PseudoVector], tol: f64) -> Signature {
    let k = q.len();
    let gram = nalgebra::DMatrix::from_fn(k, k, |i, j| q[i].inner(&q[j]));
    let eig = SymmetricEigen::new(gram);
    let mut sig = Signature::default();
    // q is Euclidean-orthonormal, so Gram eigenvalues live in [-1, 1].
    for &l in eig.eigenvalues.iter() {
        if l.abs() <= tol {
            sig.null += 1;
        } else if l > 0.0 {
            sig.positive += 1;
        } else {
            sig.negative += 1;
        }
    }
    sig
}

/// Linear subspace given by an independent basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    basis: Vec<PseudoVector>,
}

impl Subspace {
    /// Wraps an explicit basis, rejecting linearly dependent families.
    pub fn new(basis: Vec<PseudoVector>, tol: f64) -> Result<Self> {
        let rank = orthonormal_span(&basis, tol).len();
        if rank < basis.len() {
            return Err(Error::DependentBasis { rank, len: basis.len() });
        }
        Ok(Subspace { basis })
    }

    /// Span of arbitrary vectors, stored with a Euclidean-orthonormal basis.
    pub fn span(vectors: &[PseudoVector], tol: f64) -> Self {
        Subspace { basis: orthonormal_span(vectors, tol) }
    }

    pub fn zero() -> Self {
        Subspace { basis: Vec::new() }
    }

    pub fn full() -> Self {
        Subspace { basis: (1..=6).map(PseudoVector::e).collect() }
    }

    pub fn basis(&self) -> &[PseudoVector] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn signature(&self, tol: f64) -> Result<Signature> {
        subspace_signature(&self.basis, tol)
    }

    fn orthonormal(&self) -> Vec<PseudoVector> {
        orthonormal_span(&self.basis, RANK_TOL)
    }

    /// Metric orthogonal complement, of dimension `6 − dim`.
    ///
    /// `w ⊥_G S` iff `G w` is Euclidean-orthogonal to `S`, so the complement is
    /// `G` applied to the Euclidean complement.
    pub fn ortho_complement(&self) -> Subspace {
        let q = self.orthonormal();
        let basis = euclid_complement(&q).into_iter().map(|w| w.lowered()).collect();
        Subspace { basis }
    }

    /// Euclidean distance from `v` to the subspace, relative to `|v|`.
    pub fn membership_residual(&self, v: &PseudoVector) -> f64 {
        let n = v.euclid_norm();
        if n == 0.0 {
            return 0.0;
        }
        let q = self.orthonormal();
        let proj: PseudoVector = q.iter().map(|b| b.euclid_dot(v) * *b).sum();
        (*v - proj).euclid_norm() / n
    }
}

/// Free-function form of [`Subspace::ortho_complement`].
pub fn ortho_complement(s: &Subspace) -> Subspace {
    s.ortho_complement()
}

/// A 6×6 linear map with its cached orthogonality defect `‖MᵀGM − G‖_∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthoMap {
    matrix: Matrix6<f64>,
    defect: f64,
}

impl OrthoMap {
    pub fn new(matrix: Matrix6<f64>) -> Self {
        let defect = defect_of(&matrix);
        OrthoMap { matrix, defect }
    }

    pub fn identity() -> Self {
        OrthoMap::new(Matrix6::identity())
    }

    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.matrix
    }

    pub fn defect(&self) -> f64 {
        self.defect
    }

    pub fn apply(&self, v: &PseudoVector) -> PseudoVector {
        PseudoVector(self.matrix * v.0)
    }

    /// Metric inverse `G Mᵀ G`; exact for metric-preserving maps.
    pub fn inverse(&self) -> OrthoMap {
        let g = metric();
        OrthoMap::new(g * self.matrix.transpose() * g)
    }

    pub fn compose(&self, other: &OrthoMap) -> OrthoMap {
        OrthoMap::new(self.matrix * other.matrix)
    }

    /// Projects back onto the group.
    ///
    /// Newton–Schulz steps `M ← M (3I − G MᵀG M) / 2`, falling back to an
    /// indefinite Gram–Schmidt pass over the columns in basis order when the
    /// iteration does not reduce the defect.
    pub fn renormalized(&self) -> OrthoMap {
        let g = metric();
        let mut best = self.clone();
        for _ in 0..4 {
            if best.defect < 1e-15 {
                return best;
            }
            let e = g * best.matrix.transpose() * g * best.matrix;
            let next = OrthoMap::new(best.matrix * (Matrix6::identity() * 3.0 - e) * 0.5);
            if next.defect < best.defect {
                best = next;
            } else {
                break;
            }
        }
        if best.defect <= 1e-12 {
            return best;
        }
        match gram_schmidt_columns(&best.matrix) {
            Some(m) => {
                let gs = OrthoMap::new(m);
                if gs.defect < best.defect {
                    gs
                } else {
                    best
                }
            }
            None => best,
        }
    }
}

fn defect_of(m: &Matrix6<f64>) -> f64 {
    let g = metric();
    (m.transpose() * g * m - g).amax()
}

fn gram_schmidt_columns(m: &Matrix6<f64>) -> Option<Matrix6<f64>> {
    let mut cols: Vec<PseudoVector> = (0..6).map(|j| PseudoVector(m.column(j).into_owned())).collect();
    for j in 0..6 {
        let mut c = cols[j];
        for (i, ci) in cols.iter().enumerate().take(j) {
            c -= METRIC_DIAG[i] * ci.inner(&c) * *ci;
        }
        let sq = c.square();
        if sq * METRIC_DIAG[j] <= 0.0 {
            return None;
        }
        cols[j] = c / sq.abs().sqrt();
    }
    Some(Matrix6::from_columns(&cols.iter().map(|c| c.0).collect::<Vec<_>>()))
}

/// `‖MᵀGM − G‖_∞`.
pub fn ortho_defect(m: &OrthoMap) -> f64 {
    m.defect
}

/// Extends `first` (a unit vector with `(v,v) = METRIC_DIAG[slot]`) to a
/// pseudo-orthonormal basis and returns the group element sending `e_{slot+1}`
/// to `first`.
pub fn frame_through(first: &PseudoVector, slot: usize) -> Option<OrthoMap> {
    let sq = first.square();
    if (sq - METRIC_DIAG[slot]).abs() > 1e-9 {
        return None;
    }
    let mut chosen: Vec<(usize, PseudoVector)> = vec![(slot, *first)];
    let mut pos_free: Vec<usize> = (0..4).filter(|&i| i != slot).collect();
    let mut neg_free: Vec<usize> = (4..6).filter(|&i| i != slot).collect();
    let candidates: Vec<PseudoVector> = (1..=6).map(PseudoVector::e).collect();
    for cand in candidates.iter() {
        if pos_free.is_empty() && neg_free.is_empty() {
            break;
        }
        let mut c = *cand;
        for (s, v) in &chosen {
            c -= METRIC_DIAG[*s] * v.inner(&c) * *v;
        }
        let sq = c.square();
        if sq.abs() < 1e-6 {
            continue;
        }
        let slot_list = if sq > 0.0 { &mut pos_free } else { &mut neg_free };
        if let Some(s) = slot_list.first().copied() {
            slot_list.remove(0);
            chosen.push((s, c / sq.abs().sqrt()));
        }
    }
    if !(pos_free.is_empty() && neg_free.is_empty()) {
        return None;
    }
    chosen.sort_by_key(|(s, _)| *s);
    let m = Matrix6::from_columns(&chosen.iter().map(|(_, v)| v.0).collect::<Vec<_>>());
    Some(OrthoMap::new(m).renormalized())
}
