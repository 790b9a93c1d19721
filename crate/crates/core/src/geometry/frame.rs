//! Frame bundles of embedded manifolds, horizontal lifts and surface curvature.
//!
//! A frame over `x ∈ M ⊂ R^m` is stored as the ambient state
//! `(x, e_1, …, e_d) ∈ R^{m(1+d)}`. With the projection connection a tangent
//! vector `w` parallel-transported along a curve of velocity `v` moves with
//! velocity `DQ(x)[v] w`, so the horizontal lift of a base field `F` is
//! `(F(x), DQ(x)[F(x)] e_1, …, DQ(x)[F(x)] e_d)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_dim, contract, Result};
use crate::geometry::field::{lie_bracket_exact, lie_bracket_fd, SharedField, VectorField, VfOneForm};
use crate::geometry::manifold::{SharedManifold, StateSpace, ON_MANIFOLD_TOL};
use crate::jet::{lift, values, Jet};

/// Tolerance for frame validity checks.
pub const FRAME_TOL: f64 = 1e-10;

/// Sign `s` in `[H_1, H_2] = s · Ω · V_12`, where `V_12` turns `e_1` towards
/// `e_2`. Measured on round spheres (see the `frame` tests).
pub const BRACKET_CURVATURE_SIGN: f64 = 1.0;

/// The frame bundle `GL(M)` (or `OM` when `orthonormal`) of an embedded manifold.
#[derive(Clone)]
pub struct FrameBundle {
    base: SharedManifold,
    orthonormal: bool,
}

impl fmt::Debug for FrameBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "FrameBundle({}, orthonormal={})",
            self.base.name(),
            self.orthonormal
        )
    }
}

impl FrameBundle {
    /// The orthonormal frame bundle.
    pub fn orthonormal(base: SharedManifold) -> Self {
        FrameBundle {
            base,
            orthonormal: true,
        }
    }

    /// The full linear frame bundle.
    pub fn linear(base: SharedManifold) -> Self {
        FrameBundle {
            base,
            orthonormal: false,
        }
    }

    pub fn base(&self) -> &SharedManifold {
        &self.base
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormal
    }

    /// Intrinsic dimension `d` of the base.
    pub fn frame_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn base_ambient(&self) -> usize {
        self.base.ambient_dim()
    }

    fn gram(&self, x: &[f64], cols: &[Vec<f64>]) -> DMatrix<f64> {
        let d = cols.len();
        DMatrix::from_fn(d, d, |i, j| self.base.metric(x, &cols[i], &cols[j]))
    }

    fn columns(&self, y: &[f64]) -> Vec<Vec<f64>> {
        let m = self.base_ambient();
        (0..self.frame_dim())
            .map(|j| y[m * (j + 1)..m * (j + 2)].to_vec())
            .collect()
    }
}

impl StateSpace for FrameBundle {
    fn ambient_dim(&self) -> usize {
        self.base_ambient() * (1 + self.frame_dim())
    }

    fn retract(&self, y: &[f64]) -> Vec<f64> {
        let m = self.base_ambient();
        let x = self.base.retract(&y[..m]);
        let xj = lift(&x);
        let mut cols: Vec<Vec<f64>> = self
            .columns(y)
            .iter()
            .map(|c| values(&self.base.project(&xj, &lift(c))))
            .collect();
        if self.orthonormal {
            cols = orthonormalize(&self.gram(&x, &cols), &cols);
        }
        let mut out = x;
        for c in cols {
            out.extend(c);
        }
        out
    }

    fn defect(&self, y: &[f64]) -> f64 {
        let m = self.base_ambient();
        let x = &y[..m];
        let mut worst = self.base.defect(x);
        let xj = lift(x);
        let cols = self.columns(y);
        for c in &cols {
            let pc = values(&self.base.project(&xj, &lift(c)));
            let off = pc.iter().zip(c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst = worst.max(off);
        }
        if self.orthonormal {
            let g = self.gram(x, &cols);
            worst = worst.max((g - DMatrix::identity(cols.len(), cols.len())).abs().max());
        }
        worst
    }
}

/// Symmetric (Löwdin) orthonormalization `E ↦ E G^{-1/2}`.
fn orthonormalize(gram: &DMatrix<f64>, cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let eig = gram.clone().symmetric_eigen();
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let w = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    let m = cols[0].len();
    let d = cols.len();
    (0..d)
        .map(|j| {
            (0..m)
                .map(|r| (0..d).map(|k| cols[k][r] * w[(k, j)]).sum())
                .collect()
        })
        .collect()
}

/// A point of the frame bundle: base point and frame columns.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameBundlePoint {
    pub x: Vec<f64>,
    pub frame: Vec<Vec<f64>>,
}

impl FrameBundlePoint {
    /// Validate a frame over `x`.
    pub fn new(bundle: &FrameBundle, x: Vec<f64>, frame: Vec<Vec<f64>>) -> Result<Self> {
        let m = bundle.base_ambient();
        check_dim("base point dimension", m, x.len())?;
        check_dim("number of frame columns", bundle.frame_dim(), frame.len())?;
        for c in &frame {
            check_dim("frame column dimension", m, c.len())?;
        }
        let p = FrameBundlePoint { x, frame };
        p.validate(bundle)?;
        Ok(p)
    }

    pub fn validate(&self, bundle: &FrameBundle) -> Result<()> {
        let off = bundle.base.defect(&self.x);
        if off > ON_MANIFOLD_TOL {
            return Err(contract(format!("frame base point is off the manifold by {off:e}")));
        }
        let xj = lift(&self.x);
        for (j, c) in self.frame.iter().enumerate() {
            let pc = values(&bundle.base.project(&xj, &lift(c)));
            let off = pc.iter().zip(c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if off > FRAME_TOL {
                return Err(contract(format!("frame column {j} is not tangent ({off:e})")));
            }
        }
        let g = bundle.gram(&self.x, &self.frame);
        if bundle.orthonormal {
            let err = (g - DMatrix::identity(self.frame.len(), self.frame.len()))
                .abs()
                .max();
            if err > FRAME_TOL {
                return Err(contract(format!("frame is not orthonormal ({err:e})")));
            }
        } else if g.determinant().abs() < 1e-12 {
            return Err(contract("frame columns are linearly dependent"));
        }
        Ok(())
    }

    /// Gram–Schmidt of the projected ambient axes at `x`.
    pub fn default_at(bundle: &FrameBundle, x: &[f64]) -> Result<Self> {
        let m = bundle.base_ambient();
        check_dim("base point dimension", m, x.len())?;
        let xj = lift(x);
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for axis in 0..m {
            let mut e = vec![0.0; m];
            e[axis] = 1.0;
            let mut v = values(&bundle.base.project(&xj, &lift(&e)));
            for c in &cols {
                let k = bundle.base.metric(x, &v, c);
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= k * ci;
                }
            }
            let n2 = bundle.base.metric(x, &v, &v);
            if n2 > 1e-8 {
                let n = n2.sqrt();
                cols.push(v.into_iter().map(|a| a / n).collect());
            }
            if cols.len() == bundle.frame_dim() {
                break;
            }
        }
        FrameBundlePoint::new(bundle, x.to_vec(), cols)
    }

    pub fn to_state(&self) -> Vec<f64> {
        let mut s = self.x.clone();
        for c in &self.frame {
            s.extend_from_slice(c);
        }
        s
    }

    pub fn from_state(bundle: &FrameBundle, state: &[f64]) -> Self {
        let m = bundle.base_ambient();
        FrameBundlePoint {
            x: state[..m].to_vec(),
            frame: bundle.columns(state),
        }
    }

    /// `e(a) = Σ a_j e_j`.
    pub fn apply(&self, a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.x.len()];
        for (aj, c) in a.iter().zip(&self.frame) {
            for (o, v) in out.iter_mut().zip(c) {
                *o += aj * v;
            }
        }
        out
    }

    /// Coordinates of a tangent vector in this frame, `e^{-1}(w)`.
    pub fn coordinates(&self, w: &[f64]) -> Vec<f64> {
        let m = self.x.len();
        let d = self.frame.len();
        let e = DMatrix::from_fn(m, d, |r, c| self.frame[c][r]);
        let rhs = e.transpose() * DVector::from_column_slice(w);
        let g = e.transpose() * &e;
        g.lu()
            .solve(&rhs)
            .expect("frame columns are independent")
            .iter()
            .copied()
            .collect()
    }
}

/// `e^{-1}(w)` on jets: solve `(eᵀe) a = eᵀ w` by Gaussian elimination.
pub(crate) fn frame_coordinates_jet(cols: &[&[Jet]], w: &[Jet]) -> Vec<Jet> {
    let d = cols.len();
    let mut a = vec![vec![Jet::constant(0.0); d + 1]; d];
    for i in 0..d {
        for j in 0..d {
            a[i][j] = crate::jet::dot(cols[i], cols[j]);
        }
        a[i][d] = crate::jet::dot(cols[i], w);
    }
    for k in 0..d {
        let piv = (k..d)
            .max_by(|&p, &q| a[p][k].value().abs().total_cmp(&a[q][k].value().abs()))
            .unwrap();
        a.swap(k, piv);
        let inv = a[k][k].recip();
        for i in k + 1..d {
            let f = a[i][k] * inv;
            for j in k..=d {
                let t = a[k][j];
                a[i][j] -= f * t;
            }
        }
    }
    let mut x = vec![Jet::constant(0.0); d];
    for i in (0..d).rev() {
        let mut acc = a[i][d];
        for j in i + 1..d {
            acc -= a[i][j] * x[j];
        }
        x[i] = acc / a[i][i];
    }
    x
}

pub(crate) fn split_frame(m: usize, d: usize, y: &[Jet]) -> (&[Jet], Vec<&[Jet]>) {
    let cols = (0..d).map(|j| &y[m * (j + 1)..m * (j + 2)]).collect();
    (&y[..m], cols)
}

/// Horizontal lift to the frame bundle of a vector field on the base.
pub struct HorizontalLift {
    bundle: FrameBundle,
    field: SharedField,
}

impl VectorField for HorizontalLift {
    fn ambient_dim(&self) -> usize {
        self.bundle.ambient_dim()
    }
    fn eval_jet(&self, y: &[Jet]) -> Vec<Jet> {
        let m = self.bundle.base_ambient();
        let (x, cols) = split_frame(m, self.bundle.frame_dim(), y);
        let v = self.field.eval_jet(x);
        let mut out = v.clone();
        for c in cols {
            out.extend(self.bundle.base.connection_term(x, &v, c));
        }
        out
    }
}

/// The lifted 1-form `𝐅` whose fields are the horizontal lifts of `F_i`.
pub fn horizontal_form(bundle: &FrameBundle, form: &VfOneForm) -> Result<VfOneForm> {
    check_dim("1-form ambient dimension", bundle.base_ambient(), form.ambient_dim())?;
    VfOneForm::new(
        form.fields()
            .iter()
            .map(|f| {
                Arc::new(HorizontalLift {
                    bundle: bundle.clone(),
                    field: f.clone(),
                }) as SharedField
            })
            .collect(),
    )
}

/// Canonical horizontal field `H^∇(·; ε_a)`: the horizontal lift of `e(ε_a)`.
pub struct CanonicalHorizontal {
    bundle: FrameBundle,
    index: usize,
}

impl VectorField for CanonicalHorizontal {
    fn ambient_dim(&self) -> usize {
        self.bundle.ambient_dim()
    }
    fn eval_jet(&self, y: &[Jet]) -> Vec<Jet> {
        let m = self.bundle.base_ambient();
        let (x, cols) = split_frame(m, self.bundle.frame_dim(), y);
        let v = cols[self.index].to_vec();
        let mut out = v.clone();
        for c in cols {
            out.extend(self.bundle.base.connection_term(x, &v, c));
        }
        out
    }
}

/// The canonical horizontal 1-form `H^∇` on `R^d`.
pub fn canonical_horizontal_form(bundle: &FrameBundle) -> VfOneForm {
    VfOneForm::new(
        (0..bundle.frame_dim())
            .map(|index| {
                Arc::new(CanonicalHorizontal {
                    bundle: bundle.clone(),
                    index,
                }) as SharedField
            })
            .collect(),
    )
    .expect("frame dimension is positive")
}

/// `H^∇(e; a)` at a frame point.
pub fn horizontal_field(bundle: &FrameBundle, e: &FrameBundlePoint, a: &[f64]) -> Result<Vec<f64>> {
    check_dim("horizontal coefficient dimension", bundle.frame_dim(), a.len())?;
    e.validate(bundle)?;
    Ok(canonical_horizontal_form(bundle).eval(&e.to_state(), a))
}

/// Vertical field rotating `e_i` towards `e_j`: `e_i' = e_j`, `e_j' = −e_i`.
pub struct FrameRotation {
    bundle: FrameBundle,
    i: usize,
    j: usize,
}

impl VectorField for FrameRotation {
    fn ambient_dim(&self) -> usize {
        self.bundle.ambient_dim()
    }
    fn eval_jet(&self, y: &[Jet]) -> Vec<Jet> {
        let m = self.bundle.base_ambient();
        let mut out = vec![Jet::constant(0.0); y.len()];
        let (oi, oj) = (m * (self.i + 1), m * (self.j + 1));
        for r in 0..m {
            out[oi + r] = y[oj + r];
            out[oj + r] = -y[oi + r];
        }
        out
    }
}

/// Horizontal and vertical fields on the orthonormal frame bundle of a surface.
#[derive(Clone)]
pub struct SurfaceFrameData {
    pub bundle: FrameBundle,
    pub h1: SharedField,
    pub h2: SharedField,
    pub v12: SharedField,
}

impl SurfaceFrameData {
    pub fn new(base: SharedManifold) -> Result<Self> {
        if base.dim() != 2 {
            return Err(contract(format!(
                "surface frame data needs a 2-dimensional manifold, {} has dimension {}",
                base.name(),
                base.dim()
            )));
        }
        let bundle = FrameBundle::orthonormal(base);
        let h = canonical_horizontal_form(&bundle);
        Ok(SurfaceFrameData {
            h1: h.field(0).clone(),
            h2: h.field(1).clone(),
            v12: Arc::new(FrameRotation {
                bundle: bundle.clone(),
                i: 0,
                j: 1,
            }),
            bundle,
        })
    }

    /// The 1-form `u ↦ u¹H₁ + u²H₂`.
    pub fn horizontal_form(&self) -> VfOneForm {
        VfOneForm::new(vec![self.h1.clone(), self.h2.clone()]).expect("two fields")
    }

    /// Coefficients `(α, β, c)` with `w = α H₁ + β H₂ + c V₁₂` at `state`,
    /// solved in the least-squares sense.
    pub fn decompose(&self, state: &[f64], w: &[f64]) -> [f64; 3] {
        let basis = [self.h1.eval(state), self.h2.eval(state), self.v12.eval(state)];
        let n = state.len();
        let a = DMatrix::from_fn(n, 3, |r, c| basis[c][r]);
        let rhs = DVector::from_column_slice(w);
        let sol = (a.transpose() * &a)
            .lu()
            .solve(&(a.transpose() * rhs))
            .expect("H1, H2, V12 are independent");
        [sol[0], sol[1], sol[2]]
    }
}

/// Gauss curvature at `x` from the vertical part of `[H₁, H₂]`, with the
/// bracket computed by central differences of step `h`.
pub fn curvature_scalar(surface: &SurfaceFrameData, x: &[f64], h: f64) -> Result<f64> {
    let e = FrameBundlePoint::default_at(&surface.bundle, x)?;
    let state = e.to_state();
    let b = lie_bracket_fd(surface.h1.as_ref(), surface.h2.as_ref(), &state, h)?;
    let [_, _, c] = surface.decompose(&state, &b);
    Ok(BRACKET_CURVATURE_SIGN * c)
}

/// [`curvature_scalar`] with the bracket differentiated exactly on jets.
pub fn curvature_scalar_exact(surface: &SurfaceFrameData, x: &[f64]) -> Result<f64> {
    let e = FrameBundlePoint::default_at(&surface.bundle, x)?;
    let state = e.to_state();
    let b = lie_bracket_exact(surface.h1.as_ref(), surface.h2.as_ref(), &state);
    let [_, _, c] = surface.decompose(&state, &b);
    Ok(BRACKET_CURVATURE_SIGN * c)
}

/// Levi-Civita connection of an embedded manifold by ambient projection.
#[derive(Clone)]
pub struct ProjectionConnection {
    pub manifold: SharedManifold,
}

impl ProjectionConnection {
    pub fn new(manifold: SharedManifold) -> Self {
        ProjectionConnection { manifold }
    }

    /// `∇_X Y (x) = Q(x) DY(x)[X(x)]`.
    pub fn covariant_derivative(&self, xf: &dyn VectorField, yf: &dyn VectorField, x: &[f64]) -> Vec<f64> {
        let xj = lift(x);
        let v = xf.eval_jet(&xj);
        let dy = crate::jet::directional(|z| yf.eval_jet(z), &xj, &v);
        values(&self.manifold.project(&xj, &dy))
    }

    /// `|X⟨Y,Z⟩ − ⟨∇_X Y, Z⟩ − ⟨Y, ∇_X Z⟩|` at `x`, the derivative taken by
    /// central differences along the retracted flow direction.
    pub fn metric_compatibility_defect(
        &self,
        xf: &dyn VectorField,
        yf: &dyn VectorField,
        zf: &dyn VectorField,
        x: &[f64],
        h: f64,
    ) -> f64 {
        let m = &self.manifold;
        let inner = |p: &[f64]| {
            let y = values(&m.project(&lift(p), &lift(&yf.eval(p))));
            let z = values(&m.project(&lift(p), &lift(&zf.eval(p))));
            m.metric(p, &y, &z)
        };
        let v = xf.eval(x);
        let plus = m.retract(&x.iter().zip(&v).map(|(a, b)| a + h * b).collect::<Vec<_>>());
        let minus = m.retract(&x.iter().zip(&v).map(|(a, b)| a - h * b).collect::<Vec<_>>());
        let lhs = (inner(&plus) - inner(&minus)) / (2.0 * h);
        let y = values(&m.project(&lift(x), &lift(&yf.eval(x))));
        let z = values(&m.project(&lift(x), &lift(&zf.eval(x))));
        let ny = self.covariant_derivative(xf, &TangentPart { m: m.clone(), f: yf }, x);
        let nz = self.covariant_derivative(xf, &TangentPart { m: m.clone(), f: zf }, x);
        (lhs - m.metric(x, &ny, &z) - m.metric(x, &y, &nz)).abs()
    }
}

/// `Q(x) F(x)`, the tangent part of an ambient field.
struct TangentPart<'a> {
    m: SharedManifold,
    f: &'a dyn VectorField,
}

impl VectorField for TangentPart<'_> {
    fn ambient_dim(&self) -> usize {
        self.f.ambient_dim()
    }
    fn eval_jet(&self, x: &[Jet]) -> Vec<Jet> {
        self.m.project(x, &self.f.eval_jet(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::field::{lie_bracket_exact, LinearField};
    use crate::geometry::manifold::{Euclidean, Hyperboloid, Sphere};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sphere_frame(r: f64) -> (SurfaceFrameData, Vec<f64>) {
        let s = SurfaceFrameData::new(Arc::new(Sphere::new(r))).unwrap();
        let x = vec![0.0, 0.0, r];
        let e = FrameBundlePoint::default_at(&s.bundle, &x).unwrap();
        (s, e.to_state())
    }

    #[test]
    fn horizontal_field_projects_to_frame_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let bundle = FrameBundle::orthonormal(Arc::new(Sphere::new(1.3)));
        for _ in 0..100 {
            let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = bundle.base().retract(&raw);
            let mut e = FrameBundlePoint::default_at(&bundle, &x).unwrap();
            // random rotation of the frame
            let th: f64 = rng.gen_range(0.0..6.28);
            let (c, s) = (th.cos(), th.sin());
            let (e1, e2) = (e.frame[0].clone(), e.frame[1].clone());
            e.frame[0] = e1.iter().zip(&e2).map(|(a, b)| c * a + s * b).collect();
            e.frame[1] = e1.iter().zip(&e2).map(|(a, b)| -s * a + c * b).collect();
            let a = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let hv = horizontal_field(&bundle, &e, &a).unwrap();
            let base = e.apply(&a);
            for i in 0..3 {
                assert!((hv[i] - base[i]).abs() < 1e-10);
            }
        }
        let e = FrameBundlePoint::default_at(&bundle, &[0.0, 0.0, 1.3]).unwrap();
        assert!(horizontal_field(&bundle, &e, &[0.0, 0.0])
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn flat_plane_frames_are_parallel() {
        let bundle = FrameBundle::orthonormal(Arc::new(Euclidean::plane()));
        let e = FrameBundlePoint::default_at(&bundle, &[0.3, -1.0]).unwrap();
        let hv = horizontal_field(&bundle, &e, &[0.7, 0.2]).unwrap();
        assert_eq!(&hv[2..], &[0.0; 4]);
    }

    #[test]
    fn invalid_frames_rejected() {
        let bundle = FrameBundle::orthonormal(Arc::new(Sphere::unit()));
        let bad = FrameBundlePoint::new(
            &bundle,
            vec![0.0, 0.0, 1.0],
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]],
        );
        assert!(bad.is_err());
        let not_on = FrameBundlePoint::new(
            &bundle,
            vec![0.0, 0.0, 2.0],
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
        );
        assert!(not_on.is_err());
    }

    #[test]
    fn sphere_curvature() {
        for (r, want) in [(1.0, 1.0), (2.0, 0.25)] {
            let (s, _) = sphere_frame(r);
            let x = vec![0.6 * r, 0.0, 0.8 * r];
            let k = curvature_scalar(&s, &x, 1e-4).unwrap();
            assert!((k - want).abs() < 1e-5, "r={r}: {k}");
        }
        let plane = SurfaceFrameData::new(Arc::new(Euclidean::plane())).unwrap();
        assert!(curvature_scalar(&plane, &[0.2, 0.1], 1e-4).unwrap().abs() < 1e-12);
        let hyp = SurfaceFrameData::new(Arc::new(Hyperboloid::new(1.0))).unwrap();
        let k = curvature_scalar(&hyp, &[0.3, 0.0, (1.09f64).sqrt()], 1e-4).unwrap();
        assert!((k + 1.0).abs() < 1e-5, "{k}");
        assert!(SurfaceFrameData::new(Arc::new(Euclidean::new(3))).is_err());
    }

    #[test]
    fn surface_bracket_is_vertical() {
        let (s, state) = sphere_frame(1.0);
        let b = lie_bracket_exact(s.h1.as_ref(), s.h2.as_ref(), &state);
        assert!(b[..3].iter().all(|v| v.abs() < 1e-12));
        let [a, bb, c] = s.decompose(&state, &b);
        assert!(a.abs() < 1e-12 && bb.abs() < 1e-12);
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vertical_flow_rotates_frame_about_fixed_base() {
        let (s, state) = sphere_frame(1.0);
        let theta: f64 = 0.9;
        let n = 2000;
        let h = theta / n as f64;
        let mut y = state.clone();
        for _ in 0..n {
            let k1 = s.v12.eval(&y);
            let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
            let k2 = s.v12.eval(&y2);
            let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
            let k3 = s.v12.eval(&y3);
            let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
            let k4 = s.v12.eval(&y4);
            for i in 0..y.len() {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        assert!(y[..3].iter().zip(&state[..3]).all(|(a, b)| (a - b).abs() < 1e-8));
        let e1: Vec<f64> = state[3..6].to_vec();
        let e2: Vec<f64> = state[6..9].to_vec();
        for i in 0..3 {
            let want = theta.cos() * e1[i] + theta.sin() * e2[i];
            assert!((y[3 + i] - want).abs() < 1e-8);
        }
    }

    #[test]
    fn projection_connection_is_metric() {
        let s: SharedManifold = Arc::new(Sphere::unit());
        let conn = ProjectionConnection::new(s.clone());
        let skew = |i: usize, j: usize| {
            let mut a = vec![0.0; 9];
            a[i * 3 + j] = -1.0;
            a[j * 3 + i] = 1.0;
            LinearField::new(3, a).unwrap()
        };
        let (x1, y1, z1) = (skew(0, 1), skew(1, 2), skew(0, 2));
        let quad = crate::geometry::field::field(3, |p| vec![p[1] * p[2], p[0] * p[0], p[2]]);
        let x = [0.48, 0.6, 0.64];
        assert!(conn.metric_compatibility_defect(&x1, &y1, &z1, &x, 1e-4) < 1e-8);
        assert!(conn.metric_compatibility_defect(&y1, quad.as_ref(), &z1, &x, 1e-4) < 1e-8);
    }

    #[test]
    fn jet_frame_coordinates_match_dense_solve() {
        let bundle = FrameBundle::linear(Arc::new(Sphere::unit()));
        let x = vec![0.0, 0.6, 0.8];
        let e = FrameBundlePoint::new(
            &bundle,
            x.clone(),
            vec![vec![1.0, 0.0, 0.0], vec![0.5, 0.8, -0.6]],
        )
        .unwrap();
        let w = e.apply(&[0.3, -2.0]);
        let dense = e.coordinates(&w);
        let cols: Vec<Vec<Jet>> = e.frame.iter().map(|c| lift(c)).collect();
        let refs: Vec<&[Jet]> = cols.iter().map(|c| c.as_slice()).collect();
        let jet = values(&frame_coordinates_jet(&refs, &lift(&w)));
        for (a, b) in dense.iter().zip(&jet) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!((dense[0] - 0.3).abs() < 1e-13 && (dense[1] + 2.0).abs() < 1e-13);
    }
}
