//! Rough integrators `Θ = (x, F, X)`: solving, lifting, pushing forward and joining.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, contract, Result};
use crate::geometry::field::{SharedField, VectorField, VfOneForm};
use crate::geometry::manifold::{
    EmbeddedManifold, FreeSpace, SharedSpace, StateProduct, StateSpace, ON_MANIFOLD_TOL,
};
use crate::jet::{directional, lift, values, Jet};
use crate::rde::logode::{log_ode_step_bounded, Step, DEFAULT_BLOW_UP_NORM};
use crate::rde::path::{coordinate_columns, BlowUp, RDEPath};
use crate::roughpath::SharedDriver;

/// Tolerance for endpoint matching when joining integrators.
pub const JOIN_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Uniform steps per unit of driver time.
    pub steps_per_unit: usize,
    /// RK4 steps inside each log-ODE step.
    pub substeps: usize,
    pub blow_up_norm: f64,
    /// Solve on `[0, horizon]` instead of the driver's own horizon.
    pub horizon: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            steps_per_unit: 1 << 10,
            substeps: 4,
            blow_up_norm: DEFAULT_BLOW_UP_NORM,
            horizon: None,
        }
    }
}

impl SolverOptions {
    pub fn with_mesh(steps_per_unit: usize) -> Self {
        SolverOptions {
            steps_per_unit,
            ..Self::default()
        }
    }
}

fn grid_for(horizon: f64, steps_per_unit: usize) -> Result<Vec<f64>> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(contract(format!("horizon must be positive and finite, got {horizon}")));
    }
    if steps_per_unit == 0 {
        return Err(contract("steps_per_unit must be positive"));
    }
    let n = ((horizon * steps_per_unit as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok((0..=n).map(|k| horizon * k as f64 / n as f64).collect())
}

/// Solve `dx = F(x; X(dt))` from `x0` by log-ODE steps on a uniform mesh.
pub fn solve_rde(
    space: &dyn StateSpace,
    driver: &SharedDriver,
    form: &VfOneForm,
    x0: &[f64],
    opts: &SolverOptions,
) -> Result<RDEPath> {
    check_dim("driver dimension vs 1-form", form.dim_u(), driver.dim())?;
    check_dim("initial state dimension", space.ambient_dim(), x0.len())?;
    check_dim("1-form ambient dimension", space.ambient_dim(), form.ambient_dim())?;
    let off = space.defect(x0);
    if !(off <= ON_MANIFOLD_TOL) {
        return Err(contract(format!("initial state is off the manifold by {off:e}")));
    }
    let horizon = opts.horizon.unwrap_or_else(|| driver.horizon());
    if horizon > driver.horizon() + 1e-12 {
        return Err(contract(format!(
            "horizon {horizon} exceeds the driver horizon {}",
            driver.horizon()
        )));
    }
    let grid = grid_for(horizon, opts.steps_per_unit)?;
    solve_on_grid(space, driver, form, x0, &grid, opts)
}

/// [`solve_rde`] on an explicit increasing grid of driver times.
pub fn solve_on_grid(
    space: &dyn StateSpace,
    driver: &SharedDriver,
    form: &VfOneForm,
    x0: &[f64],
    grid: &[f64],
    opts: &SolverOptions,
) -> Result<RDEPath> {
    check_dim("driver dimension vs 1-form", form.dim_u(), driver.dim())?;
    if grid.len() < 2 {
        return Err(contract("solver grid needs at least two times"));
    }
    let mut times = vec![grid[0]];
    let mut points = vec![x0.to_vec()];
    let mut blow_up = None;
    for w in grid.windows(2) {
        let log_x = driver.eval(w[0], w[1]).log()?;
        let x = points.last().unwrap();
        match log_ode_step_bounded(space, form, x, &log_x, opts.substeps, opts.blow_up_norm)? {
            Step::Done(next) => {
                times.push(w[1]);
                points.push(next);
            }
            Step::Diverged { fraction, .. } => {
                blow_up = Some(BlowUp {
                    time: w[0] + (w[1] - w[0]) * (fraction + 1.0 / opts.substeps as f64),
                    last_valid_time: w[0],
                    reason: "state norm exceeded bound or became non-finite".into(),
                });
                break;
            }
        }
    }
    let mut path = RDEPath::new(times, points, coordinate_columns("x", x0.len()))?;
    path.mesh = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    path.p = driver.p();
    path.blow_up = blow_up;
    Ok(path)
}

/// One `(F, X)` segment of an integrator, active on `[start, end]` in
/// integrator time; the driver is read in local time `t − start`.
#[derive(Clone, Debug)]
pub struct Piece {
    pub form: VfOneForm,
    pub driver: SharedDriver,
    pub start: f64,
    pub end: f64,
}

/// A basic rough integrator, or the concatenation of several.
#[derive(Clone)]
pub struct RoughIntegrator {
    space: SharedSpace,
    pieces: Vec<Piece>,
    path: RDEPath,
    options: SolverOptions,
}

impl fmt::Debug for RoughIntegrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RoughIntegrator")
            .field("space", &self.space)
            .field("pieces", &self.pieces.len())
            .field("samples", &self.path.len())
            .field("lifetime", &self.lifetime())
            .finish()
    }
}

impl RoughIntegrator {
    /// Solve for the path of `(F, X)` started at `x0`.
    pub fn solve(
        space: SharedSpace,
        form: VfOneForm,
        driver: SharedDriver,
        x0: &[f64],
        opts: &SolverOptions,
    ) -> Result<Self> {
        let path = solve_rde(space.as_ref(), &driver, &form, x0, opts)?;
        let end = path.end();
        Ok(RoughIntegrator {
            space,
            pieces: vec![Piece {
                form,
                driver,
                start: 0.0,
                end,
            }],
            path,
            options: opts.clone(),
        })
    }

    pub fn space(&self) -> &SharedSpace {
        &self.space
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn is_composite(&self) -> bool {
        self.pieces.len() > 1
    }

    /// The 1-form of the first piece.
    pub fn form(&self) -> &VfOneForm {
        &self.pieces[0].form
    }

    /// The driver of the first piece.
    pub fn driver(&self) -> &SharedDriver {
        &self.pieces[0].driver
    }

    pub fn path(&self) -> &RDEPath {
        &self.path
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn x0(&self) -> &[f64] {
        self.path.first()
    }

    pub fn lifetime(&self) -> f64 {
        self.path.lifetime()
    }

    pub fn relabel(mut self, columns: Vec<String>) -> Result<Self> {
        self.path = self.path.with_columns(columns)?;
        Ok(self)
    }

    /// The piece active at integrator time `t`, preferring the earlier piece at joins.
    pub fn piece_at(&self, t: f64) -> &Piece {
        self.pieces
            .iter()
            .find(|p| t <= p.end + 1e-12)
            .unwrap_or_else(|| self.pieces.last().unwrap())
    }

    /// Re-solve each piece with new fields on a new state space, chaining
    /// endpoints. `make_form` maps each piece's 1-form to the new one.
    pub(crate) fn resolve_pieces(
        &self,
        space: SharedSpace,
        y0: &[f64],
        make_form: impl Fn(&Piece) -> Result<VfOneForm>,
        columns: Vec<String>,
    ) -> Result<RoughIntegrator> {
        let mut pieces = Vec::new();
        let mut path: Option<RDEPath> = None;
        let mut start_state = y0.to_vec();
        for piece in &self.pieces {
            let form = make_form(piece)?;
            let mut opts = self.options.clone();
            opts.horizon = Some(piece.end - piece.start);
            let seg = solve_rde(space.as_ref(), &piece.driver, &form, &start_state, &opts)?
                .shifted(piece.start);
            start_state = seg.last().to_vec();
            let stop = seg.exploded();
            let end = seg.end();
            pieces.push(Piece {
                form,
                driver: piece.driver.clone(),
                start: piece.start,
                end,
            });
            match &mut path {
                None => path = Some(seg),
                Some(p) => p.append_join(&seg),
            }
            if stop {
                break;
            }
        }
        let path = path.expect("at least one piece").with_columns(columns)?;
        Ok(RoughIntegrator {
            space,
            pieces,
            path,
            options: self.options.clone(),
        })
    }
}

/// `G(y, x; p)`: a connection on `M × N` in product form `H(x, y)p = (p, G(y, x; p))`.
#[derive(Clone)]
pub struct BundleConnectionForm {
    base_dim: usize,
    fiber_dim: usize,
    #[allow(clippy::type_complexity)]
    g: Arc<dyn Fn(&[Jet], &[Jet], &[Jet]) -> Vec<Jet> + Send + Sync>,
}

impl fmt::Debug for BundleConnectionForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BundleConnectionForm(M⊂R^{}, N⊂R^{})", self.base_dim, self.fiber_dim)
    }
}

impl BundleConnectionForm {
    /// `g(y, x, p)` with `x, p ∈ R^base_dim` and `y ∈ R^fiber_dim`.
    pub fn new<G>(base_dim: usize, fiber_dim: usize, g: G) -> Self
    where
        G: Fn(&[Jet], &[Jet], &[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    {
        BundleConnectionForm {
            base_dim,
            fiber_dim,
            g: Arc::new(g),
        }
    }

    /// `G ≡ 0`.
    pub fn zero(base_dim: usize, fiber_dim: usize) -> Self {
        BundleConnectionForm::new(base_dim, fiber_dim, move |_, _, _| {
            vec![Jet::constant(0.0); fiber_dim]
        })
    }

    /// `G(y, x; p) = p` on `M = N = R^d`.
    pub fn identity(d: usize) -> Self {
        BundleConnectionForm::new(d, d, |_, _, p| p.to_vec())
    }

    /// `G(y, x; p) = α_x(p)` on `N = R` for a 1-form `α` given by its
    /// covector field `x ↦ a(x)`.
    pub fn one_form<A>(base_dim: usize, a: A) -> Self
    where
        A: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    {
        BundleConnectionForm::new(base_dim, 1, move |_, x, p| vec![crate::jet::dot(&a(x), p)])
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn eval_jet(&self, y: &[Jet], x: &[Jet], p: &[Jet]) -> Vec<Jet> {
        (self.g)(y, x, p)
    }

    pub fn eval(&self, y: &[f64], x: &[f64], p: &[f64]) -> Vec<f64> {
        values(&self.eval_jet(&lift(y), &lift(x), &lift(p)))
    }

    /// Check tangency to `N` at `y` (within 1e-10) and linearity in `p`
    /// (within 1e-12 relative) for the given sample vectors.
    pub fn check(
        &self,
        fiber: &dyn EmbeddedManifold,
        y: &[f64],
        x: &[f64],
        p: &[f64],
        q: &[f64],
    ) -> Result<()> {
        check_dim("fiber point dimension", self.fiber_dim, y.len())?;
        check_dim("base point dimension", self.base_dim, x.len())?;
        let gp = self.eval(y, x, p);
        let tangent = values(&fiber.project(&lift(y), &lift(&gp)));
        let off = gp.iter().zip(&tangent).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if off > 1e-10 {
            return Err(contract(format!("G(y, x; p) is not tangent to N ({off:e})")));
        }
        let (a, b) = (1.7, -0.6);
        let combo: Vec<f64> = p.iter().zip(q).map(|(u, v)| a * u + b * v).collect();
        let lhs = self.eval(y, x, &combo);
        let gq = self.eval(y, x, q);
        let scale = 1.0 + gp.iter().chain(&gq).fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..lhs.len() {
            if (lhs[i] - a * gp[i] - b * gq[i]).abs() > 1e-12 * scale {
                return Err(contract("G(y, x; p) is not linear in p"));
            }
        }
        Ok(())
    }
}

/// `(x, y) ↦ (F(x), G(y, x; F(x)))`.
struct LiftedField {
    base: SharedField,
    g: BundleConnectionForm,
}

impl VectorField for LiftedField {
    fn ambient_dim(&self) -> usize {
        self.g.base_dim + self.g.fiber_dim
    }
    fn eval_jet(&self, z: &[Jet]) -> Vec<Jet> {
        let (x, y) = z.split_at(self.g.base_dim);
        let v = self.base.eval_jet(x);
        let w = self.g.eval_jet(y, x, &v);
        let mut out = v;
        out.extend(w);
        out
    }
}

/// Lift `Θ` to `M × N` through `G`, starting the fiber component at `y0`.
pub fn lift_through_connection(
    theta: &RoughIntegrator,
    g: &BundleConnectionForm,
    fiber: SharedSpace,
    y0: &[f64],
) -> Result<RoughIntegrator> {
    let m = theta.space.ambient_dim();
    check_dim("connection base dimension", m, g.base_dim)?;
    check_dim("connection fiber dimension", fiber.ambient_dim(), g.fiber_dim)?;
    check_dim("fiber start dimension", g.fiber_dim, y0.len())?;
    let off = fiber.defect(y0);
    if !(off <= ON_MANIFOLD_TOL) {
        return Err(contract(format!("fiber start is off N by {off:e}")));
    }
    let space: SharedSpace = Arc::new(StateProduct::new(vec![theta.space.clone(), fiber]));
    let mut z0 = theta.x0().to_vec();
    z0.extend_from_slice(y0);
    let mut columns = theta.path.columns().to_vec();
    columns.extend(coordinate_columns("y", y0.len()));
    theta.resolve_pieces(
        space,
        &z0,
        |piece| {
            VfOneForm::new(
                piece
                    .form
                    .fields()
                    .iter()
                    .map(|f| {
                        Arc::new(LiftedField {
                            base: f.clone(),
                            g: g.clone(),
                        }) as SharedField
                    })
                    .collect(),
            )
        },
        columns,
    )
}

/// Line integral `∫ α(dx)` along `Θ` for `α = Σ a_i(x) dx^i`, as a lift to `N = R`.
pub fn integrate_one_form<A>(theta: &RoughIntegrator, a: A) -> Result<RoughIntegrator>
where
    A: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
{
    let m = theta.space.ambient_dim();
    let g = BundleConnectionForm::one_form(m, a);
    lift_through_connection(theta, &g, Arc::new(FreeSpace(1)), &[0.0])
}

/// A diffeomorphism `g: M → M'` given on jets together with its inverse.
#[derive(Clone)]
pub struct Diffeomorphism {
    source_dim: usize,
    target_dim: usize,
    #[allow(clippy::type_complexity)]
    forward: Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>,
    #[allow(clippy::type_complexity)]
    inverse: Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>,
}

impl Diffeomorphism {
    pub fn new<F, G>(source_dim: usize, target_dim: usize, forward: F, inverse: G) -> Self
    where
        F: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
        G: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    {
        Diffeomorphism {
            source_dim,
            target_dim,
            forward: Arc::new(forward),
            inverse: Arc::new(inverse),
        }
    }

    /// `x ↦ A x` for an invertible row-major `n × n` matrix.
    pub fn linear(n: usize, a: &[f64]) -> Result<Self> {
        check_dim("matrix entries", n * n, a.len())?;
        let m = nalgebra::DMatrix::from_row_slice(n, n, a);
        let inv = m
            .clone()
            .try_inverse()
            .filter(|i| i.iter().all(|v| v.is_finite()))
            .ok_or_else(|| contract("linear map is not invertible"))?;
        let apply = |mat: nalgebra::DMatrix<f64>| {
            move |x: &[Jet]| -> Vec<Jet> {
                (0..n)
                    .map(|r| {
                        (0..n).fold(Jet::constant(0.0), |acc, c| acc + x[c] * mat[(r, c)])
                    })
                    .collect()
            }
        };
        Ok(Diffeomorphism::new(n, n, apply(m), apply(inv)))
    }

    pub fn identity(n: usize) -> Self {
        Diffeomorphism::new(n, n, |x| x.to_vec(), |x| x.to_vec())
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        values(&(self.forward)(&lift(x)))
    }

    pub fn apply_inverse(&self, y: &[f64]) -> Vec<f64> {
        values(&(self.inverse)(&lift(y)))
    }
}

/// `g_* F (y) = Dg(g^{-1} y) F(g^{-1} y)`.
struct PushedField {
    g: Diffeomorphism,
    f: SharedField,
}

impl VectorField for PushedField {
    fn ambient_dim(&self) -> usize {
        self.g.target_dim
    }
    fn eval_jet(&self, y: &[Jet]) -> Vec<Jet> {
        let x = (self.g.inverse)(y);
        let v = self.f.eval_jet(&x);
        directional(|z| (self.g.forward)(z), &x, &v)
    }
}

/// Push `Θ` forward along `g` onto `target`: path `g(x_t)`, fields `g_* F_i`,
/// same driver.
pub fn pushforward(
    theta: &RoughIntegrator,
    g: &Diffeomorphism,
    target: SharedSpace,
) -> Result<RoughIntegrator> {
    check_dim("diffeomorphism source", theta.space.ambient_dim(), g.source_dim)?;
    check_dim("diffeomorphism target", target.ambient_dim(), g.target_dim)?;
    for (t, x) in theta.path.times().iter().zip(theta.path.points()) {
        let back = g.apply_inverse(&g.apply(x));
        let err = back.iter().zip(x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if !(err <= 1e-8 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs())))) {
            return Err(contract(format!("map is not invertible along the path at t = {t}")));
        }
    }
    let path = theta
        .path
        .map_states(|x| g.apply(x), coordinate_columns("x", g.target_dim))?;
    let pieces = theta
        .pieces
        .iter()
        .map(|p| {
            Ok(Piece {
                form: VfOneForm::new(
                    p.form
                        .fields()
                        .iter()
                        .map(|f| {
                            Arc::new(PushedField {
                                g: g.clone(),
                                f: f.clone(),
                            }) as SharedField
                        })
                        .collect(),
                )?,
                driver: p.driver.clone(),
                start: p.start,
                end: p.end,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RoughIntegrator {
        space: target,
        pieces,
        path,
        options: theta.options.clone(),
    })
}

/// Join integrators end to end. Each must start where the previous one ended,
/// within [`JOIN_TOL`].
pub fn concatenate(parts: &[RoughIntegrator]) -> Result<RoughIntegrator> {
    let first = parts.first().ok_or_else(|| contract("nothing to concatenate"))?;
    let mut out = first.clone();
    for (j, next) in parts.iter().enumerate().skip(1) {
        check_dim("concatenated state dimension", out.space.ambient_dim(), next.space.ambient_dim())?;
        if out.path.exploded() {
            return Err(contract(format!(
                "junction {j}: segment {} exploded before its horizon",
                j - 1
            )));
        }
        let gap = out
            .path
            .last()
            .iter()
            .zip(next.x0())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if !(gap <= JOIN_TOL) {
            return Err(contract(format!(
                "junction {j}: endpoint mismatch {gap:e} between segments {} and {j}",
                j - 1
            )));
        }
        let shift = out.path.end() - next.path.start();
        out.path.append_join(&next.path.clone().shifted(shift));
        for p in &next.pieces {
            out.pieces.push(Piece {
                form: p.form.clone(),
                driver: p.driver.clone(),
                start: p.start + shift,
                end: p.end + shift,
            });
        }
    }
    Ok(out)
}
