//! The bundled scenarios.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cartan::{
    antidevelop, develop, latitude_holonomy, parallel_transport, verify_representation,
};
use crate::error::{Error, Result};
use crate::geometry::field::{field, Combination, SharedField, VectorField, VfOneForm};
use crate::geometry::frame::{curvature_scalar_exact, FrameBundle, FrameBundlePoint, SurfaceFrameData};
use crate::geometry::manifold::{
    Euclidean, FreeSpace, SharedManifold, SharedSpace, Sphere,
};
use crate::jet::{directional, lift, values, Jet};
use crate::rde::davie::{
    coordinate_and_quadratic_tests, davie_residual, dyadic_windows, dyadic_windows_until,
    DavieReport,
};
use crate::rde::integrator::{
    concatenate, lift_through_connection, solve_rde, BundleConnectionForm, RoughIntegrator,
    SolverOptions,
};
use crate::rde::logode::LogOdeField;
use crate::rde::path::{frame_columns, RDEPath};
use crate::roughpath::{
    lift_smooth_path, log_linear, pure_area, spinning_line, spinning_signal, uniform_grid,
    validate_driver, SharedDriver, DEFAULT_P,
};
use crate::scenario::config::{FieldPreset, ManifoldSpec, ScenarioConfig, ScenarioName};
use crate::scenario::report::{Artifact, Check, RunReport, Table};
use crate::tensor::TruncatedTensor;

/// Result of a scenario run: the report and the files it wants written.
#[derive(Debug)]
pub struct Outcome {
    pub report: RunReport,
    pub artifacts: Vec<Artifact>,
}

#[derive(Default)]
struct Run {
    checks: Vec<Check>,
    artifacts: Vec<Artifact>,
    notes: Vec<String>,
    steps_per_unit: usize,
}

/// Run the scenario named in `cfg`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Outcome> {
    let name = cfg.name()?;
    check_used_fields(cfg, name)?;
    let start = Instant::now();
    let run = match name {
        ScenarioName::SpinningLineBracketFlow => spinning_line_bracket_flow(cfg)?,
        ScenarioName::SphereHorizontalLift => sphere_horizontal_lift(cfg)?,
        ScenarioName::GeodesicRecovery => geodesic_recovery(cfg)?,
        ScenarioName::CartanRoundtrip => cartan_roundtrip(cfg)?,
        ScenarioName::CanonicalRepCheck => canonical_rep_check(cfg)?,
        ScenarioName::LieGroupNoExplosion => lie_group_no_explosion(cfg)?,
        ScenarioName::PureRoughPathLift => pure_rough_path_lift(cfg)?,
        ScenarioName::BlowUpDetection => blow_up_detection(cfg)?,
    };
    Ok(Outcome {
        report: RunReport {
            scenario: name.as_str().into(),
            checks: run.checks,
            elapsed_ms: start.elapsed().as_millis(),
            steps_per_unit: run.steps_per_unit,
            seed: cfg.seed,
            notes: run.notes,
        },
        artifacts: run.artifacts,
    })
}

fn unused(field: &str, name: ScenarioName) -> Error {
    Error::Config {
        path: field.into(),
        message: format!("not used by scenario {name}"),
    }
}

fn check_used_fields(cfg: &ScenarioConfig, name: ScenarioName) -> Result<()> {
    use ScenarioName::*;
    let uses = |field: &str| -> bool {
        match field {
            "manifold" => matches!(name, SphereHorizontalLift | GeodesicRecovery | CartanRoundtrip),
            "driver" => matches!(name, SphereHorizontalLift | LieGroupNoExplosion | PureRoughPathLift),
            "fields" => matches!(name, PureRoughPathLift),
            "initial" => !matches!(name, CartanRoundtrip | CanonicalRepCheck),
            "n_values" | "signal_mesh" => matches!(name, SpinningLineBracketFlow),
            "polar_angles" | "samples" => matches!(name, CartanRoundtrip),
            "validation" => matches!(name, CanonicalRepCheck),
            _ => true,
        }
    };
    let present = [
        ("manifold", cfg.manifold.is_some()),
        ("driver", cfg.driver.is_some()),
        ("fields", cfg.fields.is_some()),
        ("initial", cfg.initial.is_some()),
        ("n_values", cfg.n_values.is_some()),
        ("signal_mesh", cfg.signal_mesh.is_some()),
        ("polar_angles", cfg.polar_angles.is_some()),
        ("samples", cfg.samples.is_some()),
        ("validation", cfg.validation.is_some()),
    ];
    for (field, set) in present {
        if set && !uses(field) {
            return Err(unused(field, name));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- helpers

fn j_matrix() -> Vec<Vec<f64>> {
    vec![vec![0.0, 1.0], vec![-1.0, 0.0]]
}

/// `V₁ = ∂_x`, `V₂ = x ∂_y`.
pub fn heisenberg_form() -> VfOneForm {
    VfOneForm::new(vec![
        field(2, |_x| vec![Jet::constant(1.0), Jet::constant(0.0)]),
        field(2, |x| vec![Jet::constant(0.0), x[0]]),
    ])
    .expect("two fields")
}

/// `V₁ = ∂_x`, `V₂ = ∂_y`.
pub fn commuting_form() -> VfOneForm {
    VfOneForm::identity(2)
}

/// The first `k` of the rotation fields `x ↦ ε_i × x` on `R³`.
pub fn rotation_fields(k: usize) -> Vec<SharedField> {
    let z = Jet::constant(0.0);
    let all: [SharedField; 3] = [
        field(3, move |x| vec![z, -x[2], x[1]]),
        field(3, move |x| vec![x[2], z, -x[0]]),
        field(3, move |x| vec![-x[1], x[0], z]),
    ];
    all.into_iter().take(k).collect()
}

/// Standard basis of `so(3)`, row-major.
fn so3_basis() -> [[f64; 9]; 3] {
    [
        [0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    ]
}

/// Left-invariant fields `Q ↦ Q A_i` on `SO(3) ⊂ R⁹`.
pub fn left_invariant_form() -> VfOneForm {
    VfOneForm::new(
        so3_basis()
            .into_iter()
            .map(|a| {
                field(9, move |q| {
                    let mut out = vec![Jet::constant(0.0); 9];
                    for i in 0..3 {
                        for j in 0..3 {
                            for k in 0..3 {
                                if a[k * 3 + j] != 0.0 {
                                    out[i * 3 + j] += q[i * 3 + k] * a[k * 3 + j];
                                }
                            }
                        }
                    }
                    out
                })
            })
            .collect(),
    )
    .expect("three fields")
}

fn preset_form(p: FieldPreset) -> VfOneForm {
    match p {
        FieldPreset::Heisenberg => heisenberg_form(),
        FieldPreset::Commuting => commuting_form(),
        FieldPreset::Rotations => VfOneForm::new(rotation_fields(3)).expect("fields"),
        FieldPreset::LeftInvariant => left_invariant_form(),
    }
}

/// Straight line `t ↦ t` in `R`, lifted, on `[0, horizon]`.
pub fn line_driver(horizon: f64) -> Result<SharedDriver> {
    Ok(Arc::new(lift_smooth_path(
        vec![0.0, horizon],
        vec![vec![0.0], vec![horizon]],
        DEFAULT_P,
    )?))
}

/// Default point of a configured manifold.
pub fn default_point(spec: &ManifoldSpec) -> Vec<f64> {
    match spec {
        ManifoldSpec::Sphere { radius } | ManifoldSpec::Hyperboloid { radius } => {
            vec![0.0, 0.0, *radius]
        }
        ManifoldSpec::So3 {} => vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        ManifoldSpec::Plane {} => vec![0.0, 0.0],
        ManifoldSpec::Euclidean { dim } => vec![0.0; *dim],
        ManifoldSpec::Product { factors } => factors.iter().flat_map(default_point).collect(),
    }
}

fn initial_or(cfg: &ScenarioConfig, space: &dyn crate::geometry::manifold::StateSpace, default: Vec<f64>) -> Result<Vec<f64>> {
    let Some(x) = &cfg.initial else {
        return Ok(default);
    };
    if x.len() != space.ambient_dim() {
        return Err(Error::Config {
            path: "initial".into(),
            message: format!("expected {} coordinates, got {}", space.ambient_dim(), x.len()),
        });
    }
    let off = space.defect(x);
    if !(off <= 1e-8) {
        return Err(Error::Config {
            path: "initial".into(),
            message: format!("point is off the state space by {off:e}"),
        });
    }
    Ok(x.clone())
}

fn surface_spec(cfg: &ScenarioConfig, allow_plane: bool) -> Result<ManifoldSpec> {
    let spec = cfg
        .manifold
        .clone()
        .unwrap_or(ManifoldSpec::Sphere { radius: 1.0 });
    let ok = match spec {
        ManifoldSpec::Sphere { .. } | ManifoldSpec::Hyperboloid { .. } => true,
        ManifoldSpec::Plane {} => allow_plane,
        _ => false,
    };
    if !ok {
        return Err(Error::Config {
            path: "manifold".into(),
            message: format!(
                "this scenario needs a {}",
                if allow_plane { "surface: sphere, hyperboloid or plane" } else { "sphere or hyperboloid" }
            ),
        });
    }
    Ok(spec)
}

fn driver_or(cfg: &ScenarioConfig, dim: usize, default: impl FnOnce() -> Result<SharedDriver>) -> Result<SharedDriver> {
    match &cfg.driver {
        None => default(),
        Some(spec) => {
            let d = spec.build()?;
            if d.dim() != dim {
                return Err(Error::Config {
                    path: "driver".into(),
                    message: format!("driver dimension {} does not match the {dim} driving fields", d.dim()),
                });
            }
            Ok(d)
        }
    }
}

/// Solver options, with a mesh default used when the config has no solver section.
fn solver(cfg: &ScenarioConfig, default_steps: usize) -> SolverOptions {
    cfg.solver_or(SolverOptions::with_mesh(default_steps))
}

/// Davie exponent on dyadic windows, optionally only up to time `until`.
fn davie_check(label: &str, theta: &RoughIntegrator, until: Option<f64>) -> Result<(Check, DavieReport)> {
    let windows = match until {
        Some(u) => dyadic_windows_until(theta, u, 2..=11, 8),
        None => dyadic_windows(theta, 2..=11, 8),
    };
    let rep = davie_residual(theta, &coordinate_and_quadratic_tests(), &windows)?;
    Ok((
        Check::above(format!("davie_exponent_{label}"), rep.exponent, 1.0),
        rep,
    ))
}

fn davie_table(rep: &DavieReport) -> Table {
    let mut t = Table::new(&["window", "residual"]);
    for (l, r) in &rep.residuals {
        t.push(vec![Some(*l), Some(*r)]);
    }
    t
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest deviation of frames along a frame-bundle path from orthonormality.
pub fn orthonormality_defect(bundle: &FrameBundle, path: &RDEPath) -> f64 {
    let base = bundle.base();
    let mut worst = 0.0f64;
    for s in path.points() {
        let e = FrameBundlePoint::from_state(bundle, s);
        for i in 0..e.frame.len() {
            for j in 0..e.frame.len() {
                let g = base.metric(&e.x, &e.frame[i], &e.frame[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - want).abs());
            }
        }
    }
    worst
}

/// Distance of points from the best plane through the origin, relative to their norm.
pub fn plane_through_origin_residual(points: &[Vec<f64>]) -> f64 {
    let mut m = Matrix3::<f64>::zeros();
    for p in points {
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] += p[i] * p[j];
            }
        }
    }
    let eig = SymmetricEigen::new(m);
    let k = eig.eigenvalues.imin();
    let n = eig.eigenvectors.column(k);
    points
        .iter()
        .map(|p| {
            let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            let dot: f64 = n[0] * p[0] + n[1] * p[1] + n[2] * p[2];
            dot.abs() / norm
        })
        .fold(0.0, f64::max)
}

/// Owned log-ODE field of a fixed Lie element.
struct GeneratorField {
    form: VfOneForm,
    ell: TruncatedTensor,
}

impl VectorField for GeneratorField {
    fn ambient_dim(&self) -> usize {
        self.form.ambient_dim()
    }
    fn eval_jet(&self, x: &[Jet]) -> Vec<Jet> {
        LogOdeField::new(&self.form, &self.ell)
            .expect("checked at construction")
            .eval_jet(x)
    }
}

fn generator_field(form: &VfOneForm, ell: &TruncatedTensor) -> Result<SharedField> {
    LogOdeField::new(form, ell)?;
    Ok(Arc::new(GeneratorField {
        form: form.clone(),
        ell: ell.clone(),
    }))
}

/// Flow of a single autonomous field for time `horizon`.
fn flow(space: &dyn crate::geometry::manifold::StateSpace, f: SharedField, x0: &[f64], horizon: f64, steps_per_unit: usize, columns: Vec<String>) -> Result<RDEPath> {
    let form = VfOneForm::new(vec![f])?;
    let mut opts = SolverOptions::with_mesh(steps_per_unit);
    opts.horizon = Some(horizon);
    solve_rde(space, &line_driver(horizon)?, &form, x0, &opts)?.with_columns(columns)
}

/// Finer reference mesh: four times the solver mesh, capped.
fn reference_steps(opts: &SolverOptions) -> usize {
    (opts.steps_per_unit * 4).clamp(1 << 10, 1 << 15)
}

// ------------------------------------------------------ spinning signals

/// One member of the spinning-signal family.
#[derive(Clone, Debug)]
pub struct SpinningRun {
    pub n: u32,
    /// Sup distance to the flow of `[V₁, V₂]` at the limiting area rate.
    pub error: f64,
    /// Antisymmetric level-2 part of the lifted signal on `[0, 1]`.
    pub area: f64,
    pub theta: RoughIntegrator,
}

/// Area swept per unit time by `h^n` in the limit, as a Lévy area.
pub const SPINNING_AREA_RATE: f64 = 0.5;

/// Lévy area of `h^n` over `[0, t]`: `t/2 − sin(n²t) / (2n²)`.
pub fn spinning_area(n: u32, t: f64) -> f64 {
    let w = f64::from(n * n);
    SPINNING_AREA_RATE * t - (w * t).sin() / (2.0 * w)
}

/// Solve `dx = V(x) dh^n` for the Heisenberg fields from `x0` on `[0, 1]`.
pub fn spinning_run(n: u32, signal_mesh: f64, opts: &SolverOptions, x0: &[f64]) -> Result<SpinningRun> {
    let (times, points) = spinning_signal(f64::from(n), 1.0, signal_mesh);
    let driver: SharedDriver = Arc::new(lift_smooth_path(times, points, DEFAULT_P)?);
    let area = driver.eval(0.0, 1.0).antisymmetric_area()[1];
    let plane: SharedSpace = Arc::new(Euclidean::plane());
    let theta = RoughIntegrator::solve(plane, heisenberg_form(), driver, x0, opts)?;
    let path = theta.path();
    let mut error = 0.0f64;
    for (t, p) in path.times().iter().zip(path.points()) {
        let want = [x0[0], x0[1] + SPINNING_AREA_RATE * t];
        error = error.max(max_abs_diff(p, &want));
    }
    Ok(SpinningRun {
        n,
        error,
        area,
        theta,
    })
}

fn spinning_line_bracket_flow(cfg: &ScenarioConfig) -> Result<Run> {
    let ns = cfg.n_values.clone().unwrap_or_else(|| vec![8, 16, 32]);
    let mesh = cfg.signal_mesh.unwrap_or(1e-4);
    let opts = solver(cfg, 1 << 12);
    let x0 = initial_or(cfg, &Euclidean::plane(), vec![0.0, 0.0])?;
    let runs: Vec<SpinningRun> = ns
        .par_iter()
        .map(|&n| spinning_run(n, mesh, &opts, &x0))
        .collect::<Result<_>>()?;
    let mut run = Run {
        steps_per_unit: opts.steps_per_unit,
        ..Run::default()
    };
    let mut table = Table::new(&["n", "sup_error", "area"]);
    for r in &runs {
        table.push(vec![Some(f64::from(r.n)), Some(r.error), Some(r.area)]);
        run.checks.push(Check::near(
            format!("area_n{}", r.n),
            r.area,
            spinning_area(r.n, 1.0),
            1e-3,
        ));
    }
    let mut order: Vec<&SpinningRun> = runs.iter().collect();
    order.sort_by_key(|r| r.n);
    if order.len() >= 2 {
        let decreasing = order.windows(2).all(|w| w[1].error < w[0].error);
        run.checks.push(Check::holds("sup_error_decreasing_in_n", decreasing));
        let xs: Vec<f64> = order.iter().map(|r| f64::from(r.n).ln()).collect();
        let ys: Vec<f64> = order.iter().map(|r| r.error.ln()).collect();
        let slope = crate::roughpath::fit_slope(&xs, &ys);
        run.checks.push(Check::near("sup_error_slope", slope, -1.0, 0.3));
    } else {
        run.notes.push("a single n gives no slope".into());
    }
    run.notes.push(format!(
        "reference is the flow of [V1,V2] at area rate {SPINNING_AREA_RATE} per unit time"
    ));
    let last = order.last().expect("n_values non-empty");
    let (c, rep) = davie_check(&format!("n{}", last.n), &last.theta, None)?;
    run.checks.push(c);
    run.artifacts.push(Artifact::table("errors", table));
    run.artifacts.push(Artifact::table("davie", davie_table(&rep)));
    for r in &runs {
        run.artifacts
            .push(Artifact::path(format!("path_n{}", r.n), r.theta.path().clone()));
    }
    Ok(run)
}

// ------------------------------------------------- surface frame bundles

/// Setup shared by the frame bundle scenarios on a surface.
struct SurfaceSetup {
    base: SharedManifold,
    surface: SurfaceFrameData,
    e0: FrameBundlePoint,
    omega: f64,
}

fn surface_setup(cfg: &ScenarioConfig, spec: &ManifoldSpec) -> Result<SurfaceSetup> {
    let base = spec.build()?;
    let x0 = initial_or(cfg, base.as_ref(), default_point(spec))?;
    let surface = SurfaceFrameData::new(base.clone())?;
    let e0 = FrameBundlePoint::default_at(&surface.bundle, &x0)?;
    let omega = curvature_scalar_exact(&surface, &x0)?;
    Ok(SurfaceSetup {
        base,
        surface,
        e0,
        omega,
    })
}

/// `log X_{0,h} / h`, the generator of a log-linear driver.
fn generator_of(driver: &SharedDriver, horizon: f64) -> Result<TruncatedTensor> {
    Ok(driver.eval(0.0, horizon).log()?.scale(1.0 / horizon))
}

fn sphere_horizontal_lift(cfg: &ScenarioConfig) -> Result<Run> {
    let spec = surface_spec(cfg, true)?;
    let s = surface_setup(cfg, &spec)?;
    let opts = solver(cfg, 1 << 12);
    let driver = driver_or(cfg, 2, || Ok(Arc::new(spinning_line(&[1.0, 0.0], &j_matrix())?)))?;
    let horizon = opts.horizon.unwrap_or_else(|| driver.horizon());
    let bundle = s.surface.bundle.clone();
    let form = s.surface.horizontal_form();
    let x0 = s.e0.to_state();
    let theta = RoughIntegrator::solve(Arc::new(bundle.clone()), form.clone(), driver.clone(), &x0, &opts)?
        .relabel(frame_columns(3, 2))?;
    let mut run = Run {
        steps_per_unit: opts.steps_per_unit,
        ..Run::default()
    };
    let ell = generator_of(&driver, horizon)?;
    let gen_field = generator_field(&form, &ell)?;
    let [a, b, c] = s.surface.decompose(&x0, &gen_field.eval(&x0));
    run.notes.push(format!(
        "Omega = {:.12} on {}; generator field = {a:.6} H1 + {b:.6} H2 + {c:.6} V12",
        s.omega,
        s.base.name()
    ));
    let reference_field: SharedField = if cfg.driver.is_none() {
        run.checks.push(Check::near("vertical_coefficient_equals_omega", c, s.omega, 1e-6));
        Arc::new(Combination::new(vec![
            (1.0, s.surface.h1.clone()),
            (s.omega, s.surface.v12.clone()),
        ])?)
    } else {
        run.notes
            .push("reference is the flow of the driver generator; exact only for log-linear drivers".into());
        gen_field
    };
    let reference = flow(&bundle, reference_field, &x0, horizon, reference_steps(&opts), frame_columns(3, 2))?;
    let dist = theta.path().sup_distance(&reference)?;
    run.checks.push(Check::below("sup_distance_to_H1_plus_omega_V12", dist, 1e-4));
    run.checks.push(Check::below(
        "orthonormality_defect",
        orthonormality_defect(&bundle, theta.path()),
        1e-8,
    ));
    let (dc, rep) = davie_check("frame_path", &theta, None)?;
    run.checks.push(dc);
    run.artifacts.push(Artifact::path("frame_path", theta.path().clone()));
    run.artifacts.push(Artifact::path("reference", reference));
    run.artifacts.push(Artifact::table("davie", davie_table(&rep)));
    Ok(run)
}

/// `ε₁ + [ε₁, ε₂] − [ε₁, [ε₁, [ε₁, ε₂]]]` at level 4.
pub fn geodesic_generator() -> TruncatedTensor {
    let e1 = TruncatedTensor::letter(2, 4, 0);
    let e2 = TruncatedTensor::letter(2, 4, 1);
    let b = e1.bracket(&e2).expect("same shape");
    let b3 = e1.bracket(&e1.bracket(&b).expect("same shape")).expect("same shape");
    e1.add(&b).and_then(|x| x.sub(&b3)).expect("same shape")
}

struct GeodesicRun {
    theta: RoughIntegrator,
    omega: f64,
    vertical: f64,
    plane_residual: f64,
    predicted_distance: f64,
    predicted: RDEPath,
}

fn geodesic_run(cfg: &ScenarioConfig, spec: &ManifoldSpec, opts: &SolverOptions) -> Result<GeodesicRun> {
    let s = surface_setup(cfg, spec)?;
    let bundle = s.surface.bundle.clone();
    let form = s.surface.horizontal_form();
    let g = geodesic_generator();
    let driver: SharedDriver = Arc::new(log_linear(&g, 4.5)?);
    let horizon = opts.horizon.unwrap_or_else(|| driver.horizon());
    let x0 = s.e0.to_state();
    let theta = RoughIntegrator::solve(Arc::new(bundle.clone()), form.clone(), driver, &x0, opts)?
        .relabel(frame_columns(3, 2))?;
    let gf = generator_field(&form, &g)?;
    let [_, _, vertical] = s.surface.decompose(&x0, &gf.eval(&x0));
    let base_points: Vec<Vec<f64>> = theta.path().points().iter().map(|p| p[..3].to_vec()).collect();
    let plane_residual = plane_through_origin_residual(&base_points);
    let k = s.omega * (1.0 + s.omega);
    let predicted_field: SharedField = Arc::new(Combination::new(vec![
        (1.0, s.surface.h1.clone()),
        (k, s.surface.v12.clone()),
    ])?);
    let predicted = flow(&bundle, predicted_field, &x0, horizon, reference_steps(opts), frame_columns(3, 2))?;
    let predicted_distance = theta.path().sup_distance(&predicted)?;
    Ok(GeodesicRun {
        theta,
        omega: s.omega,
        vertical,
        plane_residual,
        predicted_distance,
        predicted,
    })
}

fn geodesic_recovery(cfg: &ScenarioConfig) -> Result<Run> {
    let spec = surface_spec(cfg, false)?;
    let opts = solver(cfg, 1 << 10);
    let main = geodesic_run(cfg, &spec, &opts)?;
    let mut run = Run {
        steps_per_unit: opts.steps_per_unit,
        ..Run::default()
    };
    let label = match spec {
        ManifoldSpec::Hyperboloid { .. } => "hyperboloid",
        _ => "sphere",
    };
    run.checks.push(Check::below(
        format!("great_circle_residual_{label}"),
        main.plane_residual,
        1e-4,
    ));
    run.checks.push(Check::near(
        "vertical_coefficient_equals_omega_times_1_plus_omega",
        main.vertical,
        main.omega * (1.0 + main.omega),
        1e-6,
    ));
    run.checks.push(Check::below(
        "sup_distance_to_predicted_flow",
        main.predicted_distance,
        1e-4,
    ));
    run.notes.push(format!(
        "Omega = {:.12}; the generator field is H1 + {:.6} V12, geodesic only when Omega = -1",
        main.omega, main.vertical
    ));
    if matches!(spec, ManifoldSpec::Sphere { .. }) {
        let hyp = ManifoldSpec::Hyperboloid { radius: 1.0 };
        let mut hcfg = cfg.clone();
        hcfg.initial = None;
        let companion = geodesic_run(&hcfg, &hyp, &opts)?;
        run.checks.push(Check::below(
            "great_circle_residual_hyperboloid",
            companion.plane_residual,
            1e-4,
        ));
        run.artifacts
            .push(Artifact::path("frame_path_hyperboloid", companion.theta.path().clone()));
    }
    let (dc, rep) = davie_check("frame_path", &main.theta, None)?;
    run.checks.push(dc);
    run.artifacts.push(Artifact::path("frame_path", main.theta.path().clone()));
    run.artifacts.push(Artifact::path("predicted", main.predicted));
    run.artifacts.push(Artifact::table("davie", davie_table(&rep)));
    Ok(run)
}

// ------------------------------------------------------------------ Cartan

/// A seeded smooth closed-form path on the sphere of radius `r`.
pub fn random_sphere_path(seed: u64, samples: usize, r: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = [[0.0f64; 6]; 3];
    for mode in coeffs.iter_mut() {
        for c in mode.iter_mut() {
            *c = rng.gen_range(-0.25..0.25);
        }
    }
    let times = uniform_grid(0.0, 1.0, samples);
    let points = times
        .iter()
        .map(|&t| {
            let mut p = [0.0, 0.0, 1.0];
            for (k, mode) in coeffs.iter().enumerate() {
                let w = 2.0 * PI * (k + 1) as f64;
                let s = 1.0 / (k + 1) as f64;
                for i in 0..3 {
                    p[i] += s * (mode[2 * i] * (w * t).cos() + mode[2 * i + 1] * (w * t).sin() - mode[2 * i]);
                }
            }
            let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            p.iter().map(|v| r * v / n).collect()
        })
        .collect();
    (times, points)
}

fn cartan_roundtrip(cfg: &ScenarioConfig) -> Result<Run> {
    let spec = cfg
        .manifold
        .clone()
        .unwrap_or(ManifoldSpec::Sphere { radius: 1.0 });
    let ManifoldSpec::Sphere { radius } = spec else {
        return Err(Error::Config {
            path: "manifold".into(),
            message: "this scenario needs a sphere".into(),
        });
    };
    let samples = cfg.samples.unwrap_or(1 << 12);
    let angles = cfg
        .polar_angles
        .clone()
        .unwrap_or_else(|| vec![PI / 6.0, PI / 4.0, PI / 3.0]);
    let opts = solver(cfg, 1 << 10);
    let sphere: SharedManifold = Arc::new(Sphere::new(radius));
    let bundle = FrameBundle::orthonormal(sphere.clone());
    let mut run = Run {
        steps_per_unit: opts.steps_per_unit,
        ..Run::default()
    };

    let (times, gamma) = random_sphere_path(cfg.seed, samples, radius);
    let e0 = FrameBundlePoint::default_at(&bundle, &gamma[0])?;
    let anti = antidevelop(&bundle, &times, &gamma, &e0)?;
    let dev = develop(&bundle, &times, &anti.u, &e0)?;
    let mut roundtrip = 0.0f64;
    for (k, f) in dev.frames.iter().enumerate() {
        roundtrip = roundtrip
            .max(max_abs_diff(&f.x, &gamma[k]))
            .max(max_abs_diff(&f.to_state(), &anti.frames[k].to_state()));
    }
    run.checks.push(Check::below("develop_antidevelop_roundtrip", roundtrip, 1e-6));

    // a great circle anti-develops to a straight line at unit speed
    let north = vec![0.0, 0.0, radius];
    let en = FrameBundlePoint::default_at(&bundle, &north)?;
    let arc = 1.5;
    let gc: Vec<Vec<f64>> = times
        .iter()
        .map(|t| {
            let a = arc * t;
            let dir = &en.frame[0];
            (0..3)
                .map(|i| (a.cos() * north[i] / radius + a.sin() * dir[i]) * radius)
                .collect()
        })
        .collect();
    let line = antidevelop(&bundle, &times, &gc, &en)?;
    let line_err = line
        .u
        .iter()
        .zip(&times)
        .map(|(u, t)| max_abs_diff(u, &[radius * arc * t, 0.0]))
        .fold(0.0, f64::max);
    run.checks.push(Check::below("geodesic_antidevelops_to_line", line_err, 1e-6));

    // a straight line develops to a great circle
    let dir = [0.6, 0.8];
    let u: Vec<Vec<f64>> = times.iter().map(|t| vec![arc * radius * dir[0] * t, arc * radius * dir[1] * t]).collect();
    let developed = develop(&bundle, &times, &u, &en)?;
    let w: Vec<f64> = (0..3).map(|i| dir[0] * en.frame[0][i] + dir[1] * en.frame[1][i]).collect();
    let circle_err = developed
        .frames
        .iter()
        .zip(&times)
        .map(|(f, t)| {
            let a = arc * t;
            let want: Vec<f64> = (0..3).map(|i| a.cos() * north[i] + a.sin() * radius * w[i]).collect();
            max_abs_diff(&f.x, &want)
        })
        .fold(0.0, f64::max);
    run.checks.push(Check::below("line_develops_to_great_circle", circle_err, 1e-6));

    let holonomy: Vec<_> = angles
        .par_iter()
        .map(|&th| latitude_holonomy(th, &opts))
        .collect::<Result<_>>()?;
    let mut htable = Table::new(&["polar_angle", "measured", "expected", "error"]);
    for h in &holonomy {
        run.checks.push(Check::below(
            format!("holonomy_polar_{:.6}", h.polar_angle),
            h.error,
            1e-4,
        ));
        htable.push(vec![Some(h.polar_angle), Some(h.measured), Some(h.expected), Some(h.error)]);
    }

    // parallel transport around the latitude at π/4
    let unit: SharedManifold = Arc::new(Sphere::unit());
    let polar = PI / 4.0;
    let x0 = vec![polar.sin(), 0.0, polar.cos()];
    let loop_theta = RoughIntegrator::solve(
        unit.clone(),
        VfOneForm::new(rotation_fields(3).into_iter().skip(2).collect())?,
        Arc::new(lift_smooth_path(vec![0.0, 1.0], vec![vec![0.0], vec![2.0 * PI]], DEFAULT_P)?),
        &x0,
        &opts,
    )?;
    let ubundle = FrameBundle::orthonormal(unit);
    let transport = parallel_transport(&loop_theta, &ubundle, &FrameBundlePoint::default_at(&ubundle, &x0)?)?;
    let (dc, rep) = davie_check("parallel_transport", &transport, None)?;
    run.checks.push(dc);

    let mut rt = Table::new(&["t", "u_1", "u_2", "gamma_1", "gamma_2", "gamma_3", "dev_1", "dev_2", "dev_3"]);
    for k in 0..times.len() {
        let mut row = vec![Some(times[k])];
        row.extend(anti.u[k].iter().map(|v| Some(*v)));
        row.extend(gamma[k].iter().map(|v| Some(*v)));
        row.extend(dev.frames[k].x.iter().map(|v| Some(*v)));
        rt.push(row);
    }
    run.artifacts.push(Artifact::table("roundtrip", rt));
    run.artifacts.push(Artifact::table("holonomy", htable));
    run.artifacts.push(Artifact::path("transport_frames", transport.path().clone()));
    run.artifacts.push(Artifact::table("davie", davie_table(&rep)));
    Ok(run)
}

/// Smooth test curve in `R^d` sampled on `[0, 1]`.
fn smooth_driver(d: usize, phase: f64) -> Result<SharedDriver> {
    let times = uniform_grid(0.0, 1.0, 257);
    let points = times
        .iter()
        .map(|&t| {
            (0..d)
                .map(|i| {
                    let k = (i + 1) as f64;
                    0.8 * ((k + 1.0) * t + phase).sin() / k - 0.8 * phase.sin() / k + 0.3 * t * t
                })
                .collect()
        })
        .collect();
    Ok(Arc::new(lift_smooth_path(times, points, DEFAULT_P)?))
}

/// `G(y, x; p) = x¹p² − x²p¹` with fiber `R`.
fn area_connection(base_dim: usize) -> BundleConnectionForm {
    BundleConnectionForm::one_form(base_dim, |x: &[Jet]| {
        let mut a = vec![Jet::constant(0.0); x.len()];
        a[0] = -x[1];
        a[1] = x[0];
        a
    })
}

fn canonical_rep_check(cfg: &ScenarioConfig) -> Result<Run> {
    let opts = solver(cfg, 1 << 10);
    let tol = 1e-3;
    let mut run = Run {
        steps_per_unit: opts.steps_per_unit,
        ..Run::default()
    };
    let fiber: SharedSpace = Arc::new(FreeSpace(1));
    let sphere: SharedManifold = Arc::new(Sphere::unit());
    let sbundle = FrameBundle::orthonormal(sphere.clone());
    let sx0 = vec![0.6, 0.0, 0.8];
    let se0 = FrameBundlePoint::default_at(&sbundle, &sx0)?;
    let mut table = Table::new(&["case", "distance", "z_dim", "samples"]);

    // (a) flat identity
    let plane: SharedManifold = Arc::new(Euclidean::plane());
    let pbundle = FrameBundle::orthonormal(plane.clone());
    let flat = RoughIntegrator::solve(plane, VfOneForm::identity(2), smooth_driver(2, 0.3)?, &[0.0, 0.0], &opts)?;
    let pe0 = FrameBundlePoint::default_at(&pbundle, &[0.0, 0.0])?;
    let (ra, _) = verify_representation(&flat, &pbundle, &area_connection(2), fiber.clone(), &pe0, &[0.0], tol)?;

    // (b) sphere, rotation fields over U = R³, smooth driver
    let rot3 = VfOneForm::new(rotation_fields(3))?;
    let tb = RoughIntegrator::solve(sphere.clone(), rot3.clone(), smooth_driver(3, 0.7)?, &sx0, &opts)?;
    let (rb, rep_b) = verify_representation(&tb, &sbundle, &area_connection(3), fiber.clone(), &se0, &[0.0], tol)?;

    // (c) sphere, pure area over U = R²
    let rot2 = VfOneForm::new(rotation_fields(2))?;
    let tc = RoughIntegrator::solve(sphere.clone(), rot2.clone(), Arc::new(pure_area(&j_matrix())?), &sx0, &opts)?;
    let (rc, _) = verify_representation(&tc, &sbundle, &area_connection(3), fiber.clone(), &se0, &[0.0], tol)?;

    // (d) U = R² then U = R³, joined
    let first = RoughIntegrator::solve(sphere.clone(), rot2, smooth_driver(2, 0.1)?, &sx0, &opts)?;
    let second = RoughIntegrator::solve(sphere, rot3, smooth_driver(3, 1.1)?, first.path().last(), &opts)?;
    let joined = concatenate(&[first, second])?;
    let (rd, rep_d) = verify_representation(&joined, &sbundle, &area_connection(3), fiber, &se0, &[0.0], tol)?;

    for (name, r) in [("flat", &ra), ("sphere_smooth", &rb), ("sphere_pure_area", &rc), ("concatenated", &rd)] {
        run.checks.push(Check::below(format!("representation_{name}"), r.distance, tol));
        table.push(vec![None, Some(r.distance), Some(r.z_dim as f64), Some(r.samples as f64)]);
    }
    for (row, k) in table.rows.iter_mut().zip(0..) {
        row[0] = Some(f64::from(k));
    }
    run.checks.push(Check::holds(
        "concatenation_single_model_driver",
        rd.z_dim == 2 && rep_d.z.times().len() == joined.path().len(),
    ));

    let vopts = cfg.validation.clone().unwrap_or_default();
    let grid = uniform_grid(0.0, *rep_b.z.times().last().unwrap(), 257);
    let zr = validate_driver(&rep_b.z, &grid, &vopts)?;
    run.checks.push(Check::below("z_chen_defect", zr.chen_defect, 1e-8));
    run.checks.push(Check::below("z_lie_defect", zr.lie_defect, 1e-6));

    let (dc, rep) = davie_check("sphere_smooth", &tb, None)?;
    run.checks.push(dc);
    run.notes.push("cases: 0 flat, 1 sphere smooth, 2 sphere pure area, 3 concatenated".into());
    run.artifacts.push(Artifact::table("representation", table));
    run.artifacts.push(Artifact::path("frames_sphere_smooth", rep_b.frames.clone()));
    run.artifacts.push(Artifact::json("z_sphere_smooth", rep_b.to_json()));
    run.artifacts.push(Artifact::json("z_validation", serde_json::to_value(&zr)?));
    run.artifacts.push(Artifact::table("davie", davie_table(&rep)));
    Ok(run)
}

// ------------------------------------------------------- Lie group, blow-up

fn lie_group_no_explosion(cfg: &ScenarioConfig) -> Result<Run> {
    let so3: SharedManifold = Arc::new(crate::geometry::manifold::SpecialOrthogonal3);
    let q0 = initial_or(cfg, so3.as_ref(), default_point(&ManifoldSpec::So3 {}))?;
    let driver = driver_or(cfg, 3, || {
        Ok(Arc::new(
            spinning_line(
                &[1.0, 0.5, -0.3],
                &[vec![0.0, 1.0, 0.0], vec![-1.0, 0.0, 0.5], vec![0.0, -0.5, 0.0]],
            )?
            .with_horizon(10.0),
        ))
    })?;
    let opts = solver(cfg, 1 << 10);
    let form = left_invariant_form();
    let theta = RoughIntegrator::solve(so3.clone(), form.clone(), driver.clone(), &q0, &opts)?;
    let path = theta.path();
    let mut run = Run {
        steps_per_unit: opts.steps_per_unit,
        ..Run::default()
    };
    let orth = path
        .points()
        .iter()
        .map(|q| {
            let m = Matrix3::from_row_slice(q);
            (m.transpose() * m - Matrix3::identity()).norm()
        })
        .fold(0.0, f64::max);
    run.checks.push(Check::below("orthogonality_defect", orth, 1e-8));
    run.checks.push(Check::holds("no_explosion", !path.exploded()));
    run.notes.push(format!("solved to t = {}", path.end()));
    if cfg.driver.is_none() {
        // left-invariant with a constant generator: Q_t = Q_0 exp(t B)
        let ell = generator_of(&driver, 1.0)?;
        let id = default_point(&ManifoldSpec::So3 {});
        let b = Matrix3::from_row_slice(&generator_field(&form, &ell)?.eval(&id));
        let m0 = Matrix3::from_row_slice(&q0);
        let err = path
            .times()
            .iter()
            .zip(path.points())
            .map(|(t, q)| {
                let want = m0 * (b * *t).exp();
                (Matrix3::from_row_slice(q) - want).amax()
            })
            .fold(0.0, f64::max);
        run.checks.push(Check::below("distance_to_matrix_exponential", err, 1e-8));
    }
    let (dc, rep) = davie_check("so3", &theta, None)?;
    run.checks.push(dc);
    run.artifacts.push(Artifact::path("path", path.clone()));
    run.artifacts.push(Artifact::table("davie", davie_table(&rep)));
    Ok(run)
}

/// Level-2 Euler scheme on a uniform mesh: `x ← x + X^i F_i(x) + X^{ij} (DF_j · F_i)(x)`.
pub fn davie_euler(form: &VfOneForm, driver: &SharedDriver, x0: &[f64], horizon: f64, steps: usize) -> Vec<f64> {
    let fields = form.fields();
    let d = fields.len();
    let mut x = x0.to_vec();
    for k in 0..steps {
        let (s, t) = (horizon * k as f64 / steps as f64, horizon * (k + 1) as f64 / steps as f64);
        let inc = driver.eval(s, t);
        let xj = lift(&x);
        let f: Vec<Vec<Jet>> = fields.iter().map(|fi| fi.eval_jet(&xj)).collect();
        let mut next = x.clone();
        for i in 0..d {
            let c = inc.degree(1)[i];
            for (n, v) in next.iter_mut().zip(&f[i]) {
                *n += c * v.value();
            }
        }
        for i in 0..d {
            for j in 0..d {
                let c = inc.degree(2)[i * d + j];
                if c == 0.0 {
                    continue;
                }
                let dfj = values(&directional(|z| fields[j].eval_jet(z), &xj, &f[i]));
                for (n, v) in next.iter_mut().zip(&dfj) {
                    *n += c * v;
                }
            }
        }
        x = next;
    }
    x
}

fn pure_rough_path_lift(cfg: &ScenarioConfig) -> Result<Run> {
    let plane: SharedManifold = Arc::new(Euclidean::plane());
    let x0 = initial_or(cfg, plane.as_ref(), vec![0.3, -0.2])?;
    let preset = cfg.fields.unwrap_or(FieldPreset::Heisenberg);
    if !matches!(preset, FieldPreset::Heisenberg | FieldPreset::Commuting) {
        return Err(Error::Config {
            path: "fields".into(),
            message: "this scenario takes heisenberg or commuting fields".into(),
        });
    }
    let driver = driver_or(cfg, 2, || Ok(Arc::new(pure_area(&j_matrix())?)))?;
    let opts = solver(cfg, 1 << 10);
    let horizon = opts.horizon.unwrap_or_else(|| driver.horizon());
    let form = preset_form(preset);
    let mut run = Run {
        steps_per_unit: opts.steps_per_unit,
        ..Run::default()
    };
    let theta = RoughIntegrator::solve(plane.clone(), form.clone(), driver.clone(), &x0, &opts)?;
    let steps = (horizon / 1e-4).round() as usize;
    let oracle = davie_euler(&form, &driver, &x0, horizon, steps);
    let end_err = max_abs_diff(theta.path().last(), &oracle);
    run.checks.push(Check::below("endpoint_vs_davie_euler_oracle", end_err, 1e-6));
    run.notes.push(format!("endpoint {:?}, oracle {:?}", theta.path().last(), oracle));

    let level1 = generator_of(&driver, horizon)?.degree(1).iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let commuting = RoughIntegrator::solve(plane, commuting_form(), driver.clone(), &x0, &opts)?;
    if level1 == 0.0 {
        let drift = commuting
            .path()
            .points()
            .iter()
            .map(|p| max_abs_diff(p, &x0))
            .fold(0.0, f64::max);
        run.checks.push(Check::below("commuting_base_path_constant", drift, 1e-10));
    } else {
        run.notes.push("driver has a first level; base constancy not checked".into());
    }
    // G(y, x; p) = (p¹, y¹ p²) lifts the commuting fields to Heisenberg fields on the fiber
    let g = BundleConnectionForm::new(2, 2, |y: &[Jet], _x: &[Jet], p: &[Jet]| vec![p[0], y[0] * p[1]]);
    let lifted = lift_through_connection(&commuting, &g, Arc::new(FreeSpace(2)), &[0.0, 0.0])?;
    let y_end = &lifted.path().last()[2..];
    let moved = y_end.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    run.checks.push(Check::above("lift_fiber_displacement", moved, 0.5));

    let (dc, rep) = davie_check("base", &theta, None)?;
    run.checks.push(dc);
    run.artifacts.push(Artifact::path("path", theta.path().clone()));
    run.artifacts.push(Artifact::path("commuting_path", commuting.path().clone()));
    run.artifacts.push(Artifact::path("lift", lifted.path().clone()));
    run.artifacts.push(Artifact::table("davie", davie_table(&rep)));
    Ok(run)
}

/// Blow-up time of `dx = x² dt` from `x0` as detected by the solver.
pub fn blow_up_time(x0: f64, opts: &SolverOptions) -> Result<(RoughIntegrator, Option<f64>)> {
    let form = VfOneForm::new(vec![field(1, |x| vec![x[0] * x[0]])])?;
    let horizon = (2.0 / x0).max(1e-3);
    let mut o = opts.clone();
    o.horizon = None;
    let theta = RoughIntegrator::solve(Arc::new(Euclidean::new(1)), form, line_driver(horizon)?, &[x0], &o)?;
    let t = theta.path().blow_up.as_ref().map(|b| b.time);
    Ok((theta, t))
}

fn blow_up_detection(cfg: &ScenarioConfig) -> Result<Run> {
    let x0 = initial_or(cfg, &Euclidean::new(1), vec![1.0])?[0];
    if !(x0 > 0.0) {
        return Err(Error::Config {
            path: "initial".into(),
            message: "the start must be positive for the solution to explode".into(),
        });
    }
    let opts = solver(cfg, 1 << 10);
    let (theta, t) = blow_up_time(x0, &opts)?;
    let mut run = Run {
        steps_per_unit: opts.steps_per_unit,
        ..Run::default()
    };
    let expected = 1.0 / x0;
    run.checks.push(Check::holds("explosion_flagged", t.is_some()));
    run.checks.push(Check::near(
        "blow_up_time",
        t.unwrap_or(f64::INFINITY),
        expected,
        0.05,
    ));
    let (dc, rep) = davie_check("before_blow_up", &theta, Some(0.5 * expected))?;
    run.checks.push(dc);
    run.artifacts.push(Artifact::path("path", theta.path().clone()));
    run.artifacts.push(Artifact::table("davie", davie_table(&rep)));
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_residual_of_great_circle_vanishes() {
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|k| {
                let a = k as f64 * 0.1;
                vec![a.cos() * 0.6, a.sin(), a.cos() * 0.8]
            })
            .collect();
        assert!(plane_through_origin_residual(&pts) < 1e-12);
    }

    #[test]
    fn geodesic_generator_is_lie() {
        let g = geodesic_generator();
        assert!(crate::tensor::check_lie(&g.exp().unwrap(), 1e-12).unwrap().max_defect() < 1e-12);
        assert_eq!(g.word(&[0, 1]), 1.0);
        assert_eq!(g.word(&[1, 0]), -1.0);
    }

    #[test]
    fn unused_fields_rejected() {
        let cfg = ScenarioConfig::from_json(r#"{"scenario":"blow_up_detection","samples":10}"#).unwrap();
        let err = run_scenario(&cfg).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "samples"), "{err}");
    }

    #[test]
    fn random_path_is_on_sphere_and_seeded() {
        let (_, a) = random_sphere_path(3, 64, 2.0);
        let (_, b) = random_sphere_path(3, 64, 2.0);
        assert_eq!(a, b);
        assert!(a.iter().all(|p| (p.iter().map(|v| v * v).sum::<f64>().sqrt() - 2.0).abs() < 1e-12));
    }
}
