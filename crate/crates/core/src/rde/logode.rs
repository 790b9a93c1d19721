//! Log-ODE stepping: flow the vector field obtained by substituting a Lie
//! element into the driving fields.

use crate::error::{check_dim, contract, Result};
use crate::geometry::field::{SharedField, VectorField, VfOneForm};
use crate::geometry::manifold::{StateSpace, ON_MANIFOLD_TOL};
use crate::jet::{directional, lift, values, Jet, MAX_INFINITESIMALS};
use crate::tensor::TruncatedTensor;

/// State norm above which a solve is declared to have exploded.
pub const DEFAULT_BLOW_UP_NORM: f64 = 1e6;

/// The field `Σ_w ℓ_w F_{w_1}(… F_{w_{k-1}}(F_{w_k}))`.
///
/// For a Lie element `ℓ` this equals the bracket substitution of `ℓ` into the
/// `F_i`, since words map to compositions of first-order operators.
pub struct LogOdeField<'a> {
    fields: &'a [SharedField],
    ell: &'a TruncatedTensor,
}

impl<'a> LogOdeField<'a> {
    pub fn new(form: &'a VfOneForm, ell: &'a TruncatedTensor) -> Result<Self> {
        check_dim("log increment dimension", form.dim_u(), ell.dim())?;
        if ell.level() > MAX_INFINITESIMALS {
            return Err(contract(format!(
                "log increment level {} exceeds the supported {}",
                ell.level(),
                MAX_INFINITESIMALS
            )));
        }
        Ok(LogOdeField {
            fields: form.fields(),
            ell,
        })
    }

    /// Whether some word strictly extending `prefix` has a nonzero coefficient.
    fn extends(&self, prefix: &[usize]) -> bool {
        let d = self.ell.dim();
        let idx = prefix.iter().fold(0usize, |a, &i| a * d + i);
        (prefix.len() + 1..=self.ell.level()).any(|k| {
            let block = d.pow((k - prefix.len()) as u32);
            self.ell.degree(k)[idx * block..(idx + 1) * block]
                .iter()
                .any(|c| *c != 0.0)
        })
    }

    /// Sum over words `p·v`, `v` non-empty, of `ℓ_{p·v}` times the field of `v`.
    fn tail(&self, prefix: &[usize], y: &[Jet]) -> Vec<Jet> {
        let mut out = vec![Jet::constant(0.0); y.len()];
        let mut word = prefix.to_vec();
        for i in 0..self.fields.len() {
            word.push(i);
            let coeff = self.ell.word(&word);
            let live = self.extends(&word);
            if coeff != 0.0 || live {
                let fi = self.fields[i].eval_jet(y);
                if coeff != 0.0 {
                    for (o, v) in out.iter_mut().zip(&fi) {
                        *o += *v * coeff;
                    }
                }
                if live {
                    let w = word.clone();
                    let d = directional(|z| self.tail(&w, z), y, &fi);
                    for (o, v) in out.iter_mut().zip(&d) {
                        *o += *v;
                    }
                }
            }
            word.pop();
        }
        out
    }
}

impl VectorField for LogOdeField<'_> {
    fn ambient_dim(&self) -> usize {
        self.fields[0].ambient_dim()
    }
    fn eval_jet(&self, x: &[Jet]) -> Vec<Jet> {
        self.tail(&[], x)
    }
}

/// Outcome of a single log-ODE step.
#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Done(Vec<f64>),
    /// The state became non-finite or exceeded the norm bound; `fraction` is
    /// the part of the unit flow time completed by `last_valid`.
    Diverged { last_valid: Vec<f64>, fraction: f64 },
}

fn sup_norm(y: &[f64]) -> f64 {
    y.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

fn axpy(y: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

/// Flow `x0` for unit time along the log-ODE field of `log_x`, with `substeps`
/// classical RK4 steps and a retraction after each.
pub fn log_ode_step(
    space: &dyn StateSpace,
    form: &VfOneForm,
    x0: &[f64],
    log_x: &TruncatedTensor,
    substeps: usize,
) -> Result<Step> {
    log_ode_step_bounded(space, form, x0, log_x, substeps, DEFAULT_BLOW_UP_NORM)
}

/// [`log_ode_step`] with an explicit blow-up bound on the state norm.
pub fn log_ode_step_bounded(
    space: &dyn StateSpace,
    form: &VfOneForm,
    x0: &[f64],
    log_x: &TruncatedTensor,
    substeps: usize,
    bound: f64,
) -> Result<Step> {
    check_dim("state dimension", space.ambient_dim(), x0.len())?;
    check_dim("1-form ambient dimension", space.ambient_dim(), form.ambient_dim())?;
    if substeps == 0 {
        return Err(contract("substeps must be positive"));
    }
    if log_x.scalar().abs() > 1e-12 {
        return Err(contract("log increment must have zero scalar part"));
    }
    let off = space.defect(x0);
    if !(off <= ON_MANIFOLD_TOL) {
        return Err(contract(format!("initial state is off the manifold by {off:e}")));
    }
    let field = LogOdeField::new(form, log_x)?;
    if log_x.max_abs() == 0.0 {
        return Ok(Step::Done(x0.to_vec()));
    }
    Ok(integrate_unit_time(space, &field, x0, substeps, bound))
}

pub(crate) fn integrate_unit_time(
    space: &dyn StateSpace,
    field: &dyn VectorField,
    x0: &[f64],
    substeps: usize,
    bound: f64,
) -> Step {
    let h = 1.0 / substeps as f64;
    let mut y = x0.to_vec();
    let eval = |z: &[f64]| values(&field.eval_jet(&lift(z)));
    for k in 0..substeps {
        let k1 = eval(&y);
        let k2 = eval(&axpy(&y, 0.5 * h, &k1));
        let k3 = eval(&axpy(&y, 0.5 * h, &k2));
        let k4 = eval(&axpy(&y, h, &k3));
        let next: Vec<f64> = (0..y.len())
            .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        let next = if next.iter().all(|v| v.is_finite()) {
            space.retract(&next)
        } else {
            next
        };
        let n = sup_norm(&next);
        if !n.is_finite() || n > bound {
            return Step::Diverged {
                last_valid: y,
                fraction: k as f64 * h,
            };
        }
        y = next;
    }
    Step::Done(y)
}
