//! Parallel transport, Cartan development and the canonical representation
//! of a rough integrator by a driver over the model space `E = R^d`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{check_dim, contract, Result};
use crate::geometry::field::{field, SharedField, VectorField, VfOneForm};
use crate::geometry::frame::{
    canonical_horizontal_form, frame_coordinates_jet, horizontal_form, split_frame, FrameBundle,
    FrameBundlePoint,
};
use crate::geometry::manifold::{
    FreeSpace, SharedSpace, StateProduct, StateSpace, Sphere, ON_MANIFOLD_TOL,
};
use crate::jet::{lift, Jet};
use crate::rde::integrator::{solve_on_grid, BundleConnectionForm, RoughIntegrator, SolverOptions};
use crate::rde::logode::{integrate_unit_time, Step};
use crate::rde::path::{frame_columns, RDEPath};
use crate::roughpath::{lift_smooth_path, GroupPath, SharedDriver};
use crate::tensor::TruncatedTensor;

/// RK4 substeps per sample interval in development and anti-development.
const CARTAN_SUBSTEPS: usize = 4;

fn check_base_point(bundle: &FrameBundle, e0: &FrameBundlePoint, x0: &[f64]) -> Result<()> {
    e0.validate(bundle)?;
    let gap = e0
        .x
        .iter()
        .zip(x0)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if !(gap <= ON_MANIFOLD_TOL) {
        return Err(contract(format!(
            "frame base point differs from the path start by {gap:e}"
        )));
    }
    Ok(())
}

/// Parallel transport of `e0` along `Θ`: solves `de = 𝐅(e; X(dt))` with `𝐅`
/// the horizontal lift of `F`.
pub fn parallel_transport(
    theta: &RoughIntegrator,
    bundle: &FrameBundle,
    e0: &FrameBundlePoint,
) -> Result<RoughIntegrator> {
    check_dim("bundle base dimension", theta.space().ambient_dim(), bundle.base_ambient())?;
    check_base_point(bundle, e0, theta.x0())?;
    let space: SharedSpace = Arc::new(bundle.clone());
    theta.resolve_pieces(
        space,
        &e0.to_state(),
        |piece| horizontal_form(bundle, &piece.form),
        frame_columns(bundle.base_ambient(), bundle.frame_dim()),
    )
}

/// Signed rotation angle carrying `e0` to `e1` in the oriented plane
/// `(e0_1, e0_2)`, for frames at the same base point.
pub fn rotation_angle(e0: &FrameBundlePoint, e1: &FrameBundlePoint) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    dot(&e1.frame[0], &e0.frame[1]).atan2(dot(&e1.frame[0], &e0.frame[0]))
}

/// Wrap an angle into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HolonomyReport {
    pub polar_angle: f64,
    pub measured: f64,
    pub expected: f64,
    pub error: f64,
}

/// Transport the default frame once around the latitude circle at polar
/// angle `polar` on the unit sphere and compare the rotation with the
/// enclosed area `2π(1 − cos θ)`.
pub fn latitude_holonomy(polar: f64, opts: &SolverOptions) -> Result<HolonomyReport> {
    if !(polar > 0.0 && polar < PI) {
        return Err(contract("polar angle must lie in (0, π)"));
    }
    let sphere = Arc::new(Sphere::unit());
    let rot = field(3, |x| vec![-x[1], x[0], Jet::constant(0.0)]);
    let form = VfOneForm::new(vec![rot])?;
    let line: SharedDriver = Arc::new(lift_smooth_path(
        vec![0.0, 1.0],
        vec![vec![0.0], vec![2.0 * PI]],
        crate::roughpath::DEFAULT_P,
    )?);
    let x0 = vec![polar.sin(), 0.0, polar.cos()];
    let theta = RoughIntegrator::solve(sphere.clone(), form, line, &x0, opts)?;
    let bundle = FrameBundle::orthonormal(sphere);
    let e0 = FrameBundlePoint::default_at(&bundle, &x0)?;
    let frames = parallel_transport(&theta, &bundle, &e0)?;
    let e1 = FrameBundlePoint::from_state(&bundle, frames.path().last());
    let measured = rotation_angle(&e0, &e1);
    let expected = wrap_angle(2.0 * PI * (1.0 - polar.cos()));
    Ok(HolonomyReport {
        polar_angle: polar,
        measured,
        expected,
        error: wrap_angle(measured - expected).abs(),
    })
}

/// `H^∇(·; a)` for a fixed `a ∈ R^d`.
struct HorizontalAt {
    form: VfOneForm,
    a: Vec<f64>,
}

impl VectorField for HorizontalAt {
    fn ambient_dim(&self) -> usize {
        self.form.ambient_dim()
    }
    fn eval_jet(&self, y: &[Jet]) -> Vec<Jet> {
        self.form.eval_jet(y, &lift(&self.a))
    }
}

fn flow_horizontal(bundle: &FrameBundle, h: &VfOneForm, e: &[f64], a: &[f64]) -> Result<Vec<f64>> {
    let f = HorizontalAt {
        form: h.clone(),
        a: a.to_vec(),
    };
    match integrate_unit_time(bundle, &f, e, CARTAN_SUBSTEPS, f64::INFINITY) {
        Step::Done(y) => Ok(y),
        Step::Diverged { .. } => Err(contract("horizontal flow diverged")),
    }
}

/// A path in `R^d` together with its development: frames over the manifold path.
#[derive(Clone, Debug, Serialize)]
pub struct CartanPath {
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub frames: Vec<FrameBundlePoint>,
}

impl CartanPath {
    pub fn base_points(&self) -> Vec<Vec<f64>> {
        self.frames.iter().map(|e| e.x.clone()).collect()
    }

    pub fn frame_path(&self, bundle: &FrameBundle) -> Result<RDEPath> {
        RDEPath::new(
            self.times.clone(),
            self.frames.iter().map(|e| e.to_state()).collect(),
            frame_columns(bundle.base_ambient(), bundle.frame_dim()),
        )
    }
}

fn check_samples(times: &[f64], n: usize) -> Result<()> {
    if times.len() < 2 || times.len() != n {
        return Err(contract("need at least two samples with matching times"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(contract("sample times must be strictly increasing"));
    }
    Ok(())
}

/// Anti-development of a sampled path: between samples the path is followed
/// by the geodesic segment `t ↦ flow of H^∇(·; Δu)`, with `Δu` solved so the
/// segment lands on the next sample.
pub fn antidevelop(
    bundle: &FrameBundle,
    times: &[f64],
    gamma: &[Vec<f64>],
    e0: &FrameBundlePoint,
) -> Result<CartanPath> {
    check_samples(times, gamma.len())?;
    let base = bundle.base();
    for (k, x) in gamma.iter().enumerate() {
        check_dim("path point dimension", bundle.base_ambient(), x.len())?;
        let off = base.defect(x);
        if !(off <= ON_MANIFOLD_TOL) {
            return Err(contract(format!("path sample {k} is off the manifold by {off:e}")));
        }
    }
    check_base_point(bundle, e0, &gamma[0])?;
    let h = canonical_horizontal_form(bundle);
    let d = bundle.frame_dim();
    let m = bundle.base_ambient();
    let mut u = vec![vec![0.0; d]];
    let mut frames = vec![e0.clone()];
    for target in &gamma[1..] {
        let e = frames.last().unwrap().clone();
        let chord: Vec<f64> = target.iter().zip(&e.x).map(|(a, b)| a - b).collect();
        let mut a = e.coordinates(&chord);
        let mut next = flow_horizontal(bundle, &h, &e.to_state(), &a)?;
        let mut last_err = f64::INFINITY;
        for _ in 0..50 {
            let r: Vec<f64> = target.iter().zip(&next[..m]).map(|(t, y)| t - y).collect();
            let err = r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if err < 1e-15 || err >= last_err {
                break;
            }
            last_err = err;
            let da = e.coordinates(&r);
            for (ai, di) in a.iter_mut().zip(&da) {
                *ai += di;
            }
            next = flow_horizontal(bundle, &h, &e.to_state(), &a)?;
        }
        let prev = u.last().unwrap();
        u.push(prev.iter().zip(&a).map(|(p, q)| p + q).collect());
        frames.push(FrameBundlePoint::from_state(bundle, &next));
    }
    Ok(CartanPath {
        times: times.to_vec(),
        u,
        frames,
    })
}

/// Development of a sampled path `u` in `R^d` with `u_0 = 0` from the frame `e0`.
pub fn develop(
    bundle: &FrameBundle,
    times: &[f64],
    u: &[Vec<f64>],
    e0: &FrameBundlePoint,
) -> Result<CartanPath> {
    check_samples(times, u.len())?;
    for p in u {
        check_dim("model path dimension", bundle.frame_dim(), p.len())?;
    }
    if u[0].iter().any(|v| v.abs() > 1e-12) {
        return Err(contract("model path must start at 0"));
    }
    e0.validate(bundle)?;
    let h = canonical_horizontal_form(bundle);
    let mut frames = vec![e0.clone()];
    for w in u.windows(2) {
        let a: Vec<f64> = w[1].iter().zip(&w[0]).map(|(p, q)| p - q).collect();
        let next = flow_horizontal(bundle, &h, &frames.last().unwrap().to_state(), &a)?;
        frames.push(FrameBundlePoint::from_state(bundle, &next));
    }
    Ok(CartanPath {
        times: times.to_vec(),
        u: u.to_vec(),
        frames,
    })
}

/// The coupled field `(𝐅_i(e), Z ⊗ e^{-1} F_i(π e))` on `GL(M) × T^N(E)`.
struct CoupledField {
    bundle: FrameBundle,
    f: SharedField,
    level: usize,
}

impl CoupledField {
    fn frame_part(&self, y: &[Jet]) -> (Vec<Jet>, Vec<Jet>) {
        let m = self.bundle.base_ambient();
        let d = self.bundle.frame_dim();
        let (x, cols) = split_frame(m, d, y);
        let v = self.f.eval_jet(x);
        let mut out = v.clone();
        for c in &cols {
            out.extend(self.bundle.base().connection_term(x, &v, c));
        }
        let coords = frame_coordinates_jet(&cols, &v);
        (out, coords)
    }
}

/// `Z ⊗ v` on the positive part of `Z` (scalar part 1) for `v ∈ E`.
fn right_multiply(z: &[Jet], v: &[Jet], d: usize, level: usize) -> Vec<Jet> {
    let mut out = Vec::with_capacity(z.len());
    out.extend_from_slice(v);
    let mut off = 0;
    for k in 2..=level {
        let prev = &z[off..off + d.pow(k as u32 - 1)];
        for zi in prev {
            for vj in v {
                out.push(*zi * *vj);
            }
        }
        off += prev.len();
    }
    out
}

impl VectorField for CoupledField {
    fn ambient_dim(&self) -> usize {
        self.bundle.ambient_dim()
            + TruncatedTensor::positive_len(self.bundle.frame_dim(), self.level)
    }
    fn eval_jet(&self, y: &[Jet]) -> Vec<Jet> {
        let n = self.bundle.ambient_dim();
        let (mut out, coords) = self.frame_part(&y[..n]);
        out.extend(right_multiply(&y[n..], &coords, self.bundle.frame_dim(), self.level));
        out
    }
}

/// The driver `Z` over `E` and the frame path of a rough integrator.
#[derive(Clone, Debug)]
pub struct CanonicalRepresentation {
    pub e0: FrameBundlePoint,
    pub frames: RDEPath,
    pub z: GroupPath,
}

impl CanonicalRepresentation {
    pub fn driver(&self) -> SharedDriver {
        Arc::new(self.z.clone())
    }

    /// Z samples and consecutive increments in tensor JSON.
    pub fn to_json(&self) -> serde_json::Value {
        let els = self.z.elements();
        let incs: Vec<serde_json::Value> = els
            .windows(2)
            .map(|w| {
                let inc = w[0].group_inverse().and_then(|i| i.mul(&w[1])).expect("group-like");
                serde_json::to_value(&inc).expect("tensor serializes")
            })
            .collect();
        serde_json::json!({
            "e0": self.e0,
            "times": self.z.times(),
            "z": els,
            "increments": incs,
        })
    }
}

/// Solve the coupled system `de = 𝐅(e; X(dt))`, `dZ = Z ⊗ e^{-1} F(π e; X(dt))`
/// from `(e0, 1)` and return `Z` as a driver over `E = R^d`.
pub fn canonical_representation(
    theta: &RoughIntegrator,
    bundle: &FrameBundle,
    e0: &FrameBundlePoint,
) -> Result<CanonicalRepresentation> {
    check_dim("bundle base dimension", theta.space().ambient_dim(), bundle.base_ambient())?;
    check_base_point(bundle, e0, theta.x0())?;
    let d = bundle.frame_dim();
    let level = theta.pieces().iter().map(|p| p.driver.level()).max().unwrap();
    let p = theta.pieces().iter().map(|p| p.driver.p()).fold(0.0, f64::max);
    let zlen = TruncatedTensor::positive_len(d, level);
    let space: SharedSpace = Arc::new(StateProduct::new(vec![
        Arc::new(bundle.clone()),
        Arc::new(FreeSpace(zlen)),
    ]));
    let mut s0 = e0.to_state();
    s0.extend(std::iter::repeat(0.0).take(zlen));
    let mut columns = frame_columns(bundle.base_ambient(), d);
    columns.extend(crate::rde::path::coordinate_columns("z", zlen));
    let coupled = theta.resolve_pieces(
        space,
        &s0,
        |piece| {
            VfOneForm::new(
                piece
                    .form
                    .fields()
                    .iter()
                    .map(|f| {
                        Arc::new(CoupledField {
                            bundle: bundle.clone(),
                            f: f.clone(),
                            level,
                        }) as SharedField
                    })
                    .collect(),
            )
        },
        columns,
    )?;
    let n = bundle.ambient_dim();
    let path = coupled.path();
    let elements: Vec<TruncatedTensor> = path
        .points()
        .iter()
        .map(|s| TruncatedTensor::from_flat_positive(d, level, 1.0, &s[n..]))
        .collect();
    let z = GroupPath::new(path.times().to_vec(), elements, p)?;
    Ok(CanonicalRepresentation {
        e0: e0.clone(),
        frames: path.select(0..n),
        z,
    })
}

/// `(e, y) ↦ (𝐅_i(e), G(y, π e; F_i(π e)))`.
struct SystemField {
    bundle: FrameBundle,
    f: SharedField,
    g: BundleConnectionForm,
}

impl VectorField for SystemField {
    fn ambient_dim(&self) -> usize {
        self.bundle.ambient_dim() + self.g.fiber_dim()
    }
    fn eval_jet(&self, s: &[Jet]) -> Vec<Jet> {
        let n = self.bundle.ambient_dim();
        let m = self.bundle.base_ambient();
        let (x, cols) = split_frame(m, self.bundle.frame_dim(), &s[..n]);
        let v = self.f.eval_jet(x);
        let mut out = v.clone();
        for c in &cols {
            out.extend(self.bundle.base().connection_term(x, &v, c));
        }
        out.extend(self.g.eval_jet(&s[n..], x, &v));
        out
    }
}

/// `(ē, ȳ) ↦ (H^∇(ē; ε_a), G(ȳ, π ē; ē(ε_a)))`.
struct ModelSystemField {
    bundle: FrameBundle,
    a: usize,
    g: BundleConnectionForm,
}

impl VectorField for ModelSystemField {
    fn ambient_dim(&self) -> usize {
        self.bundle.ambient_dim() + self.g.fiber_dim()
    }
    fn eval_jet(&self, s: &[Jet]) -> Vec<Jet> {
        let n = self.bundle.ambient_dim();
        let m = self.bundle.base_ambient();
        let (x, cols) = split_frame(m, self.bundle.frame_dim(), &s[..n]);
        let v = cols[self.a].to_vec();
        let mut out = v.clone();
        for c in &cols {
            out.extend(self.bundle.base().connection_term(x, &v, c));
        }
        out.extend(self.g.eval_jet(&s[n..], x, &v));
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RepresentationReport {
    /// Sup over common samples of the max-norm distance between the two solutions.
    pub distance: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub samples: usize,
    pub z_dim: usize,
}

/// Solve the system driven by `X` on `GL(M) × N × U` and the one driven by
/// the canonical `Z` on `GL(M) × N × E` from `(e0, y0)` and compare.
pub fn verify_representation(
    theta: &RoughIntegrator,
    bundle: &FrameBundle,
    g: &BundleConnectionForm,
    fiber: SharedSpace,
    e0: &FrameBundlePoint,
    y0: &[f64],
    tol: f64,
) -> Result<(RepresentationReport, CanonicalRepresentation)> {
    check_dim("connection base dimension", bundle.base_ambient(), g.base_dim())?;
    check_dim("connection fiber dimension", fiber.ambient_dim(), g.fiber_dim())?;
    check_dim("fiber start dimension", g.fiber_dim(), y0.len())?;
    let rep = canonical_representation(theta, bundle, e0)?;
    let space: SharedSpace = Arc::new(StateProduct::new(vec![Arc::new(bundle.clone()), fiber]));
    let mut s0 = e0.to_state();
    s0.extend_from_slice(y0);
    let mut columns = frame_columns(bundle.base_ambient(), bundle.frame_dim());
    columns.extend(crate::rde::path::coordinate_columns("y", y0.len()));
    let direct = theta.resolve_pieces(
        space.clone(),
        &s0,
        |piece| {
            VfOneForm::new(
                piece
                    .form
                    .fields()
                    .iter()
                    .map(|f| {
                        Arc::new(SystemField {
                            bundle: bundle.clone(),
                            f: f.clone(),
                            g: g.clone(),
                        }) as SharedField
                    })
                    .collect(),
            )
        },
        columns,
    )?;
    let model_form = VfOneForm::new(
        (0..bundle.frame_dim())
            .map(|a| {
                Arc::new(ModelSystemField {
                    bundle: bundle.clone(),
                    a,
                    g: g.clone(),
                }) as SharedField
            })
            .collect(),
    )?;
    let opts = theta.options().clone();
    let model = solve_on_grid(
        space.as_ref(),
        &rep.driver(),
        &model_form,
        &s0,
        rep.z.times(),
        &opts,
    )?;
    let a = direct.path();
    let n = a.len().min(model.len());
    let mut distance = 0.0f64;
    for k in 0..n {
        for (p, q) in a.points()[k].iter().zip(&model.points()[k]) {
            distance = distance.max((p - q).abs());
        }
    }
    let report = RepresentationReport {
        distance,
        tolerance: tol,
        pass: distance < tol,
        samples: n,
        z_dim: rep.z.elements()[0].dim(),
    };
    Ok((report, rep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::manifold::Euclidean;

    #[test]
    fn wrap() {
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
    }

    #[test]
    fn flat_plane_frame_is_constant() {
        let plane = Arc::new(Euclidean::plane());
        let bundle = FrameBundle::orthonormal(plane.clone());
        let x: SharedDriver = Arc::new(
            lift_smooth_path(
                vec![0.0, 0.5, 1.0],
                vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![0.2, -0.3]],
                2.5,
            )
            .unwrap(),
        );
        let theta = RoughIntegrator::solve(plane, VfOneForm::identity(2), x, &[0.0, 0.0], &SolverOptions::with_mesh(64))
            .unwrap();
        let e0 = FrameBundlePoint::default_at(&bundle, &[0.0, 0.0]).unwrap();
        let frames = parallel_transport(&theta, &bundle, &e0).unwrap();
        for p in frames.path().points() {
            assert_eq!(&p[2..], &[1.0, 0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn base_mismatch_rejected() {
        let plane = Arc::new(Euclidean::plane());
        let bundle = FrameBundle::orthonormal(plane.clone());
        let x: SharedDriver =
            Arc::new(lift_smooth_path(vec![0.0, 1.0], vec![vec![0.0, 0.0], vec![1.0, 0.0]], 2.5).unwrap());
        let theta = RoughIntegrator::solve(plane, VfOneForm::identity(2), x, &[0.0, 0.0], &SolverOptions::with_mesh(8))
            .unwrap();
        let e0 = FrameBundlePoint::default_at(&bundle, &[1.0, 0.0]).unwrap();
        assert!(parallel_transport(&theta, &bundle, &e0).is_err());
        assert!(canonical_representation(&theta, &bundle, &e0).is_err());
    }

    #[test]
    fn right_multiplication_layout() {
        let z = lift(&[1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let v = lift(&[3.0, 5.0]);
        let out = crate::jet::values(&right_multiply(&z, &v, 2, 2));
        assert_eq!(out, vec![3.0, 5.0, 3.0, 5.0, 6.0, 10.0]);
    }

    #[test]
    fn flat_identity_representation_reproduces_driver() {
        let plane = Arc::new(Euclidean::plane());
        let bundle = FrameBundle::orthonormal(plane.clone());
        let x: SharedDriver = Arc::new(
            crate::roughpath::spinning_line(&[1.0, 0.5], &[vec![0.0, 0.7], vec![-0.7, 0.0]]).unwrap(),
        );
        let theta =
            RoughIntegrator::solve(plane, VfOneForm::identity(2), x.clone(), &[0.0, 0.0], &SolverOptions::with_mesh(32))
                .unwrap();
        let e0 = FrameBundlePoint::default_at(&bundle, &[0.0, 0.0]).unwrap();
        let rep = canonical_representation(&theta, &bundle, &e0).unwrap();
        for (t, z) in rep.z.times().iter().zip(rep.z.elements()) {
            assert!(z.max_abs_diff(&x.eval(0.0, *t)) < 1e-10);
        }
    }
}
