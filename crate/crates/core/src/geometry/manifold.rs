use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3};

use crate::error::{check_dim, contract, Result};
use crate::jet::{dot, lift, values, Jet};

/// Tolerance for "on the manifold" preconditions.
pub const ON_MANIFOLD_TOL: f64 = 1e-8;

/// A constraint set in an ambient `R^n` that solvers can retract onto.
pub trait StateSpace: Send + Sync + Debug {
    fn ambient_dim(&self) -> usize;
    /// Nearest-point map back onto the constraint set.
    fn retract(&self, y: &[f64]) -> Vec<f64>;
    /// Size of the constraint violation at `y`; zero on the set.
    fn defect(&self, y: &[f64]) -> f64;
}

pub type SharedSpace = Arc<dyn StateSpace>;

/// A finite-dimensional manifold presented through an ambient embedding.
///
/// `projector` is the tangent projector `Q(y)`; `connection_term` returns
/// `DQ(y)[v] w`, which is the velocity of a parallel-transported tangent vector
/// `w` along a curve with velocity `v` (Levi-Civita by projection).
pub trait EmbeddedManifold: StateSpace {
    /// Intrinsic dimension.
    fn dim(&self) -> usize;
    fn name(&self) -> String;
    /// `Q(y)` as a row-major `m × m` matrix.
    fn projector(&self, y: &[Jet]) -> Vec<Jet>;
    fn connection_term(&self, y: &[Jet], v: &[Jet], w: &[Jet]) -> Vec<Jet>;
    /// Riemannian metric on tangent vectors at `y`.
    fn metric(&self, _y: &[f64], a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn project(&self, y: &[Jet], v: &[Jet]) -> Vec<Jet> {
        mat_vec(&self.projector(y), v)
    }
}

pub type SharedManifold = Arc<dyn EmbeddedManifold>;

pub(crate) fn mat_vec(a: &[Jet], v: &[Jet]) -> Vec<Jet> {
    let n = v.len();
    (0..a.len() / n).map(|i| dot(&a[i * n..(i + 1) * n], v)).collect()
}

fn norm(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `Q(y) v` for an on-manifold point `y`.
pub fn tangent_project(m: &dyn EmbeddedManifold, y: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_dim("point dimension", m.ambient_dim(), y.len())?;
    check_dim("vector dimension", m.ambient_dim(), v.len())?;
    let off = m.defect(y);
    if off > ON_MANIFOLD_TOL {
        return Err(contract(format!(
            "point is off the {} by {off:e}",
            m.name()
        )));
    }
    Ok(values(&m.project(&lift(y), &lift(v))))
}

/// Flat `R^d` with the identity embedding.
#[derive(Clone, Debug)]
pub struct Euclidean {
    dim: usize,
}

impl Euclidean {
    pub fn new(dim: usize) -> Self {
        Euclidean { dim }
    }

    pub fn plane() -> Self {
        Euclidean { dim: 2 }
    }
}

impl StateSpace for Euclidean {
    fn ambient_dim(&self) -> usize {
        self.dim
    }
    fn retract(&self, y: &[f64]) -> Vec<f64> {
        y.to_vec()
    }
    fn defect(&self, _y: &[f64]) -> f64 {
        0.0
    }
}

impl EmbeddedManifold for Euclidean {
    fn dim(&self) -> usize {
        self.dim
    }
    fn name(&self) -> String {
        if self.dim == 2 {
            "plane".into()
        } else {
            format!("R^{}", self.dim)
        }
    }
    fn projector(&self, _y: &[Jet]) -> Vec<Jet> {
        let n = self.dim;
        (0..n * n)
            .map(|k| Jet::constant(if k / n == k % n { 1.0 } else { 0.0 }))
            .collect()
    }
    fn connection_term(&self, _y: &[Jet], _v: &[Jet], w: &[Jet]) -> Vec<Jet> {
        vec![Jet::constant(0.0); w.len()]
    }
    fn project(&self, _y: &[Jet], v: &[Jet]) -> Vec<Jet> {
        v.to_vec()
    }
}

/// Round sphere of a given radius centred at the origin of `R^{n+1}`.
#[derive(Clone, Debug)]
pub struct Sphere {
    radius: f64,
    ambient: usize,
}

impl Sphere {
    /// The 2-sphere in `R^3`.
    pub fn new(radius: f64) -> Self {
        Sphere { radius, ambient: 3 }
    }

    pub fn unit() -> Self {
        Sphere::new(1.0)
    }

    pub fn with_ambient(radius: f64, ambient: usize) -> Self {
        Sphere { radius, ambient }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl StateSpace for Sphere {
    fn ambient_dim(&self) -> usize {
        self.ambient
    }
    fn retract(&self, y: &[f64]) -> Vec<f64> {
        let n = norm(y);
        y.iter().map(|v| self.radius * v / n).collect()
    }
    fn defect(&self, y: &[f64]) -> f64 {
        (norm(y) - self.radius).abs()
    }
}

impl EmbeddedManifold for Sphere {
    fn dim(&self) -> usize {
        self.ambient - 1
    }
    fn name(&self) -> String {
        format!("sphere(r={})", self.radius)
    }
    fn projector(&self, y: &[Jet]) -> Vec<Jet> {
        let n = y.len();
        let inv = dot(y, y).recip();
        let mut q = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let id = if i == j { 1.0 } else { 0.0 };
                q.push(Jet::constant(id) - y[i] * y[j] * inv);
            }
        }
        q
    }
    fn project(&self, y: &[Jet], v: &[Jet]) -> Vec<Jet> {
        let c = dot(y, v) / dot(y, y);
        v.iter().zip(y).map(|(vi, yi)| *vi - c * *yi).collect()
    }
    fn connection_term(&self, y: &[Jet], v: &[Jet], w: &[Jet]) -> Vec<Jet> {
        // Q = I − y yᵀ/|y|²
        let inv = dot(y, y).recip();
        let yw = dot(y, w);
        let vw = dot(v, w);
        let yv = dot(y, v);
        let c_y = (yv * yw * inv * 2.0 - vw) * inv;
        let c_v = -(yw * inv);
        y.iter().zip(v).map(|(yi, vi)| c_y * *yi + c_v * *vi).collect()
    }
}

/// Hyperbolic plane as the upper sheet of `x² + y² − z² = −r²` with the
/// Minkowski metric; the last ambient coordinate is time-like.
#[derive(Clone, Debug)]
pub struct Hyperboloid {
    radius: f64,
}

impl Hyperboloid {
    pub fn new(radius: f64) -> Self {
        Hyperboloid { radius }
    }
}

fn minkowski(a: &[Jet], b: &[Jet]) -> Jet {
    a[0] * b[0] + a[1] * b[1] - a[2] * b[2]
}

fn minkowski_f(a: &[f64], b: &[f64]) -> f64 {
    a[0] * b[0] + a[1] * b[1] - a[2] * b[2]
}

impl StateSpace for Hyperboloid {
    fn ambient_dim(&self) -> usize {
        3
    }
    fn retract(&self, y: &[f64]) -> Vec<f64> {
        let q = -minkowski_f(y, y);
        let s = self.radius / q.sqrt();
        y.iter().map(|v| v * s).collect()
    }
    fn defect(&self, y: &[f64]) -> f64 {
        let q = -minkowski_f(y, y);
        if q <= 0.0 || y[2] <= 0.0 {
            return f64::INFINITY;
        }
        (q.sqrt() - self.radius).abs()
    }
}

impl EmbeddedManifold for Hyperboloid {
    fn dim(&self) -> usize {
        2
    }
    fn name(&self) -> String {
        format!("hyperboloid(r={})", self.radius)
    }
    fn metric(&self, _y: &[f64], a: &[f64], b: &[f64]) -> f64 {
        minkowski_f(a, b)
    }
    fn projector(&self, y: &[Jet]) -> Vec<Jet> {
        // Q v = v − (⟨v,y⟩/⟨y,y⟩) y, Minkowski products
        let inv = minkowski(y, y).recip();
        let sig = [1.0, 1.0, -1.0];
        let mut q = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                q.push(Jet::constant(id) - y[i] * y[j] * inv * sig[j]);
            }
        }
        q
    }
    fn connection_term(&self, y: &[Jet], v: &[Jet], w: &[Jet]) -> Vec<Jet> {
        let inv = minkowski(y, y).recip();
        let yw = minkowski(y, w);
        let vw = minkowski(v, w);
        let yv = minkowski(y, v);
        let c_y = (yv * yw * inv * 2.0 - vw) * inv;
        let c_v = -(yw * inv);
        y.iter().zip(v).map(|(yi, vi)| c_y * *yi + c_v * *vi).collect()
    }
}

/// The rotation group `SO(3)` embedded in `R^9` (row-major matrices).
#[derive(Clone, Debug, Default)]
pub struct SpecialOrthogonal3;

fn mat3(y: &[f64]) -> Matrix3<f64> {
    Matrix3::from_row_slice(y)
}

fn jmat_mul(a: &[Jet], b: &[Jet]) -> Vec<Jet> {
    let mut out = vec![Jet::constant(0.0); 9];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = Jet::constant(0.0);
            for k in 0..3 {
                acc += a[i * 3 + k] * b[k * 3 + j];
            }
            out[i * 3 + j] = acc;
        }
    }
    out
}

fn jtranspose(a: &[Jet]) -> Vec<Jet> {
    (0..9).map(|k| a[(k % 3) * 3 + k / 3]).collect()
}

impl StateSpace for SpecialOrthogonal3 {
    fn ambient_dim(&self) -> usize {
        9
    }
    fn retract(&self, y: &[f64]) -> Vec<f64> {
        let svd = mat3(y).svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut r = u * vt;
        if r.determinant() < 0.0 {
            let mut u2 = u;
            u2.column_mut(2).neg_mut();
            r = u2 * vt;
        }
        r.transpose().as_slice().to_vec()
    }
    fn defect(&self, y: &[f64]) -> f64 {
        let m = mat3(y);
        let d = m.transpose() * m - Matrix3::identity();
        let det_off = if m.determinant() > 0.0 { 0.0 } else { f64::INFINITY };
        d.norm() + det_off
    }
}

impl EmbeddedManifold for SpecialOrthogonal3 {
    fn dim(&self) -> usize {
        3
    }
    fn name(&self) -> String {
        "so3".into()
    }
    fn projector(&self, y: &[Jet]) -> Vec<Jet> {
        // column k of Q is Q applied to the k-th basis matrix
        let mut q = vec![Jet::constant(0.0); 81];
        for k in 0..9 {
            let mut e = vec![Jet::constant(0.0); 9];
            e[k] = Jet::constant(1.0);
            let col = self.project(y, &e);
            for (i, c) in col.into_iter().enumerate() {
                q[i * 9 + k] = c;
            }
        }
        q
    }
    fn project(&self, y: &[Jet], v: &[Jet]) -> Vec<Jet> {
        // (V − Y Vᵀ Y) / 2
        let yvy = jmat_mul(&jmat_mul(y, &jtranspose(v)), y);
        v.iter().zip(yvy).map(|(a, b)| (*a - b) * 0.5).collect()
    }
    fn connection_term(&self, y: &[Jet], v: &[Jet], w: &[Jet]) -> Vec<Jet> {
        // −(V Wᵀ Y + Y Wᵀ V) / 2
        let wt = jtranspose(w);
        let a = jmat_mul(&jmat_mul(v, &wt), y);
        let b = jmat_mul(&jmat_mul(y, &wt), v);
        a.into_iter().zip(b).map(|(x, z)| -(x + z) * 0.5).collect()
    }
}

/// Cartesian product of embedded manifolds, coordinates concatenated.
#[derive(Clone, Debug)]
pub struct ProductManifold {
    factors: Vec<SharedManifold>,
    offsets: Vec<usize>,
}

impl ProductManifold {
    pub fn new(factors: Vec<SharedManifold>) -> Result<Self> {
        if factors.is_empty() {
            return Err(contract("product manifold needs at least one factor"));
        }
        let mut offsets = vec![0];
        for f in &factors {
            offsets.push(offsets.last().unwrap() + f.ambient_dim());
        }
        Ok(ProductManifold { factors, offsets })
    }

    pub fn factors(&self) -> &[SharedManifold] {
        &self.factors
    }

    fn block<'a, T>(&self, i: usize, y: &'a [T]) -> &'a [T] {
        &y[self.offsets[i]..self.offsets[i + 1]]
    }
}

impl StateSpace for ProductManifold {
    fn ambient_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }
    fn retract(&self, y: &[f64]) -> Vec<f64> {
        (0..self.factors.len())
            .flat_map(|i| self.factors[i].retract(self.block(i, y)))
            .collect()
    }
    fn defect(&self, y: &[f64]) -> f64 {
        (0..self.factors.len())
            .map(|i| self.factors[i].defect(self.block(i, y)))
            .fold(0.0, f64::max)
    }
}

impl EmbeddedManifold for ProductManifold {
    fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim()).sum()
    }
    fn name(&self) -> String {
        let names: Vec<_> = self.factors.iter().map(|f| f.name()).collect();
        format!("product({})", names.join(" × "))
    }
    fn metric(&self, y: &[f64], a: &[f64], b: &[f64]) -> f64 {
        (0..self.factors.len())
            .map(|i| {
                self.factors[i].metric(self.block(i, y), self.block(i, a), self.block(i, b))
            })
            .sum()
    }
    fn projector(&self, y: &[Jet]) -> Vec<Jet> {
        let n = self.ambient_dim();
        let mut q = vec![Jet::constant(0.0); n * n];
        for (i, f) in self.factors.iter().enumerate() {
            let o = self.offsets[i];
            let m = f.ambient_dim();
            let qi = f.projector(self.block(i, y));
            for r in 0..m {
                for c in 0..m {
                    q[(o + r) * n + o + c] = qi[r * m + c];
                }
            }
        }
        q
    }
    fn project(&self, y: &[Jet], v: &[Jet]) -> Vec<Jet> {
        (0..self.factors.len())
            .flat_map(|i| self.factors[i].project(self.block(i, y), self.block(i, v)))
            .collect()
    }
    fn connection_term(&self, y: &[Jet], v: &[Jet], w: &[Jet]) -> Vec<Jet> {
        (0..self.factors.len())
            .flat_map(|i| {
                self.factors[i].connection_term(self.block(i, y), self.block(i, v), self.block(i, w))
            })
            .collect()
    }
}

/// Unconstrained `R^n`; used for auxiliary solver states.
#[derive(Clone, Debug)]
pub struct FreeSpace(pub usize);

impl StateSpace for FreeSpace {
    fn ambient_dim(&self) -> usize {
        self.0
    }
    fn retract(&self, y: &[f64]) -> Vec<f64> {
        y.to_vec()
    }
    fn defect(&self, _y: &[f64]) -> f64 {
        0.0
    }
}

/// Product of arbitrary state spaces, coordinates concatenated.
#[derive(Clone, Debug)]
pub struct StateProduct {
    factors: Vec<SharedSpace>,
    offsets: Vec<usize>,
}

impl StateProduct {
    pub fn new(factors: Vec<SharedSpace>) -> Self {
        let mut offsets = vec![0];
        for f in &factors {
            offsets.push(offsets.last().unwrap() + f.ambient_dim());
        }
        StateProduct { factors, offsets }
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }
}

impl StateSpace for StateProduct {
    fn ambient_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }
    fn retract(&self, y: &[f64]) -> Vec<f64> {
        self.factors
            .iter()
            .enumerate()
            .flat_map(|(i, f)| f.retract(&y[self.offsets[i]..self.offsets[i + 1]]))
            .collect()
    }
    fn defect(&self, y: &[f64]) -> f64 {
        self.factors
            .iter()
            .enumerate()
            .map(|(i, f)| f.defect(&y[self.offsets[i]..self.offsets[i + 1]]))
            .fold(0.0, f64::max)
    }
}

/// Dense `m × m` projector matrix at a plain point.
pub fn projector_matrix(m: &dyn EmbeddedManifold, y: &[f64]) -> DMatrix<f64> {
    let n = m.ambient_dim();
    DMatrix::from_row_slice(n, n, &values(&m.projector(&lift(y))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sphere_projection_examples() {
        let s = Sphere::unit();
        let north = [0.0, 0.0, 1.0];
        assert_eq!(tangent_project(&s, &north, &[0.0, 0.0, 1.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(
            tangent_project(&s, &north, &[1.0, 0.0, 0.5]).unwrap(),
            vec![1.0, 0.0, 0.0]
        );
        assert!(tangent_project(&s, &[0.0, 0.0, 1.1], &[1.0, 0.0, 0.0]).is_err());
    }

    fn random_point(m: &dyn EmbeddedManifold, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let raw: Vec<f64> = (0..m.ambient_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        match m.ambient_dim() {
            3 if m.name().starts_with("hyper") => {
                let mut p = raw;
                p[2] = 2.0 + p[2].abs();
                m.retract(&p)
            }
            _ => m.retract(&raw),
        }
    }

    #[test]
    fn projectors_are_idempotent_with_rank_dim() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mans: Vec<SharedManifold> = vec![
            Arc::new(Sphere::new(2.0)),
            Arc::new(Hyperboloid::new(1.0)),
            Arc::new(SpecialOrthogonal3),
            Arc::new(
                ProductManifold::new(vec![Arc::new(Sphere::unit()), Arc::new(Euclidean::new(2))])
                    .unwrap(),
            ),
        ];
        for m in &mans {
            for _ in 0..100 {
                let y = random_point(m.as_ref(), &mut rng);
                assert!(m.defect(&y) < 1e-12, "{}", m.name());
                let q = projector_matrix(m.as_ref(), &y);
                assert!((&q * &q - &q).abs().max() < 1e-12, "{}", m.name());
                let rank = q.clone().svd(false, false).rank(1e-9);
                assert_eq!(rank, m.dim(), "{}", m.name());
                let v: Vec<f64> = (0..m.ambient_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let pv = tangent_project(m.as_ref(), &y, &v).unwrap();
                let ppv = tangent_project(m.as_ref(), &y, &pv).unwrap();
                let err = pv.iter().zip(&ppv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err < 1e-12);
            }
        }
    }

    #[test]
    fn retraction_is_normal_and_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = Sphere::new(1.5);
        for _ in 0..50 {
            let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = s.retract(&y);
            let near: Vec<f64> = y.iter().map(|v| v * 1.001 + 1e-4).collect();
            let r = s.retract(&near);
            assert!(s.retract(&r).iter().zip(&r).all(|(a, b)| (a - b).abs() < 1e-14));
            let diff: Vec<f64> = near.iter().zip(&r).map(|(a, b)| a - b).collect();
            let t = tangent_project(&s, &r, &diff).unwrap();
            assert!(t.iter().all(|v| v.abs() < 1e-8));
        }
        let so3 = SpecialOrthogonal3;
        let mut m = vec![1.0, 0.01, 0.0, -0.02, 1.0, 0.0, 0.0, 0.03, 0.98];
        m = so3.retract(&m);
        assert!(so3.defect(&m) < 1e-14);
    }

    #[test]
    fn connection_term_matches_projector_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mans: Vec<SharedManifold> = vec![
            Arc::new(Sphere::new(0.7)),
            Arc::new(Hyperboloid::new(1.3)),
            Arc::new(SpecialOrthogonal3),
        ];
        for m in &mans {
            let y = random_point(m.as_ref(), &mut rng);
            let n = m.ambient_dim();
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let exact = values(&crate::jet::directional(
                |z| m.project(z, &lift(&w)),
                &lift(&y),
                &lift(&v),
            ));
            let term = values(&m.connection_term(&lift(&y), &lift(&v), &lift(&w)));
            for (a, b) in exact.iter().zip(&term) {
                assert!((a - b).abs() < 1e-12, "{}: {a} vs {b}", m.name());
            }
        }
    }
}
