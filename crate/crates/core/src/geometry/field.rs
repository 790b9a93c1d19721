use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, contract, Result};
use crate::geometry::manifold::EmbeddedManifold;
use crate::jet::{directional, lift, values, Jet};

/// A vector field on an ambient neighbourhood of a manifold.
///
/// Fields are evaluated on [`Jet`]s so that solvers can take exact nested
/// directional derivatives of them.
pub trait VectorField: Send + Sync {
    fn ambient_dim(&self) -> usize;
    fn eval_jet(&self, x: &[Jet]) -> Vec<Jet>;

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        values(&self.eval_jet(&lift(x)))
    }

    /// Number of continuous derivatives the field is known to have (label only).
    fn regularity(&self) -> usize {
        usize::MAX
    }
}

pub type SharedField = Arc<dyn VectorField>;

impl fmt::Debug for dyn VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorField(R^{})", self.ambient_dim())
    }
}

/// A field given by a closure over jets.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&[Jet]) -> Vec<Jet> + Send + Sync,
{
    fn ambient_dim(&self) -> usize {
        self.dim
    }
    fn eval_jet(&self, x: &[Jet]) -> Vec<Jet> {
        (self.f)(x)
    }
}

/// Wrap a closure as a shared vector field on `R^dim`.
pub fn field<F>(dim: usize, f: F) -> SharedField
where
    F: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
{
    Arc::new(FnField { dim, f })
}

/// `x ↦ A x` for a row-major square matrix `A`.
#[derive(Clone, Debug)]
pub struct LinearField {
    dim: usize,
    matrix: Vec<f64>,
}

impl LinearField {
    pub fn new(dim: usize, matrix: Vec<f64>) -> Result<Self> {
        check_dim("linear field matrix size", dim * dim, matrix.len())?;
        Ok(LinearField { dim, matrix })
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }
}

impl VectorField for LinearField {
    fn ambient_dim(&self) -> usize {
        self.dim
    }
    fn eval_jet(&self, x: &[Jet]) -> Vec<Jet> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                let mut acc = Jet::constant(0.0);
                for j in 0..n {
                    let a = self.matrix[i * n + j];
                    if a != 0.0 {
                        acc += x[j] * a;
                    }
                }
                acc
            })
            .collect()
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n)
            .map(|i| (0..n).map(|j| self.matrix[i * n + j] * x[j]).sum())
            .collect()
    }
}

/// A constant field.
#[derive(Clone, Debug)]
pub struct ConstantField(pub Vec<f64>);

impl VectorField for ConstantField {
    fn ambient_dim(&self) -> usize {
        self.0.len()
    }
    fn eval_jet(&self, _x: &[Jet]) -> Vec<Jet> {
        lift(&self.0)
    }
}

/// `Σ c_i V_i`.
pub struct Combination {
    terms: Vec<(f64, SharedField)>,
}

impl Combination {
    pub fn new(terms: Vec<(f64, SharedField)>) -> Result<Self> {
        let dim = terms
            .first()
            .map(|t| t.1.ambient_dim())
            .ok_or_else(|| contract("combination needs at least one field"))?;
        for (_, f) in &terms {
            check_dim("combined field dimension", dim, f.ambient_dim())?;
        }
        Ok(Combination { terms })
    }
}

impl VectorField for Combination {
    fn ambient_dim(&self) -> usize {
        self.terms[0].1.ambient_dim()
    }
    fn eval_jet(&self, x: &[Jet]) -> Vec<Jet> {
        let mut out = vec![Jet::constant(0.0); self.ambient_dim()];
        for (c, f) in &self.terms {
            for (o, v) in out.iter_mut().zip(f.eval_jet(x)) {
                *o += v * *c;
            }
        }
        out
    }
}

/// The bracket `[V, W] = DW·V − DV·W`, evaluated exactly through jets.
pub struct Bracket {
    v: SharedField,
    w: SharedField,
}

impl Bracket {
    pub fn new(v: SharedField, w: SharedField) -> Result<Self> {
        check_dim("bracket field dimension", v.ambient_dim(), w.ambient_dim())?;
        Ok(Bracket { v, w })
    }
}

impl VectorField for Bracket {
    fn ambient_dim(&self) -> usize {
        self.v.ambient_dim()
    }
    fn eval_jet(&self, x: &[Jet]) -> Vec<Jet> {
        let vx = self.v.eval_jet(x);
        let wx = self.w.eval_jet(x);
        let dw_v = directional(|y| self.w.eval_jet(y), x, &vx);
        let dv_w = directional(|y| self.v.eval_jet(y), x, &wx);
        dw_v.into_iter().zip(dv_w).map(|(a, b)| a - b).collect()
    }
}

/// Exact Lie bracket `[V, W](x)` with the operator convention `[V,W]f = V(Wf) − W(Vf)`.
pub fn lie_bracket_exact(v: &dyn VectorField, w: &dyn VectorField, x: &[f64]) -> Vec<f64> {
    let xj = lift(x);
    let vx = v.eval_jet(&xj);
    let wx = w.eval_jet(&xj);
    let dw_v = directional(|y| w.eval_jet(y), &xj, &vx);
    let dv_w = directional(|y| v.eval_jet(y), &xj, &wx);
    dw_v.iter().zip(&dv_w).map(|(a, b)| a.value() - b.value()).collect()
}

/// Central finite-difference bracket in ambient coordinates.
pub fn lie_bracket_fd(v: &dyn VectorField, w: &dyn VectorField, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(contract(format!("finite-difference step must be positive, got {h}")));
    }
    let dir = |f: &dyn VectorField, along: &[f64]| -> Vec<f64> {
        let plus: Vec<f64> = x.iter().zip(along).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = x.iter().zip(along).map(|(a, b)| a - h * b).collect();
        f.eval(&plus)
            .iter()
            .zip(f.eval(&minus))
            .map(|(p, m)| (p - m) / (2.0 * h))
            .collect()
    };
    let vx = v.eval(x);
    let wx = w.eval(x);
    let dw_v = dir(w, &vx);
    let dv_w = dir(v, &wx);
    Ok(dw_v.iter().zip(&dv_w).map(|(a, b)| a - b).collect())
}

/// Finite-difference bracket projected onto `T_x M`.
pub fn lie_bracket(
    m: &dyn EmbeddedManifold,
    v: &dyn VectorField,
    w: &dyn VectorField,
    x: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    let b = lie_bracket_fd(v, w, x, h)?;
    crate::geometry::manifold::tangent_project(m, x, &b)
}

/// A vector-field-valued 1-form `u ↦ Σ u^i F_i` on `R^{d_U}`.
#[derive(Clone)]
pub struct VfOneForm {
    fields: Vec<SharedField>,
}

impl fmt::Debug for VfOneForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "VfOneForm(d_U={}, ambient={})",
            self.fields.len(),
            self.ambient_dim()
        )
    }
}

impl VfOneForm {
    pub fn new(fields: Vec<SharedField>) -> Result<Self> {
        let dim = fields
            .first()
            .map(|f| f.ambient_dim())
            .ok_or_else(|| contract("a 1-form needs at least one field"))?;
        for f in &fields {
            check_dim("1-form field dimension", dim, f.ambient_dim())?;
        }
        Ok(VfOneForm { fields })
    }

    /// The identity 1-form on `R^d`: `F_i = ∂_i`.
    pub fn identity(d: usize) -> Self {
        let fields = (0..d)
            .map(|i| {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                Arc::new(ConstantField(e)) as SharedField
            })
            .collect();
        VfOneForm { fields }
    }

    /// Dimension of the driving space `U`.
    pub fn dim_u(&self) -> usize {
        self.fields.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.fields[0].ambient_dim()
    }

    pub fn fields(&self) -> &[SharedField] {
        &self.fields
    }

    pub fn field(&self, i: usize) -> &SharedField {
        &self.fields[i]
    }

    /// `F(x; u)`.
    pub fn eval_jet(&self, x: &[Jet], u: &[Jet]) -> Vec<Jet> {
        let mut out = vec![Jet::constant(0.0); self.ambient_dim()];
        for (ui, f) in u.iter().zip(&self.fields) {
            for (o, v) in out.iter_mut().zip(f.eval_jet(x)) {
                *o += *ui * v;
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        values(&self.eval_jet(&lift(x), &lift(u)))
    }
}

/// Iterated first-order operators `F_{w1}(F_{w2}(… F_{wk} f))` evaluated at `x`.
///
/// With the empty word this is `f(x)`.
pub fn apply_word(
    fields: &[SharedField],
    word: &[usize],
    x: &[Jet],
    f: &dyn Fn(&[Jet]) -> Vec<Jet>,
) -> Vec<Jet> {
    match word.split_first() {
        None => f(x),
        Some((&first, rest)) => {
            let v = fields[first].eval_jet(x);
            directional(|y| apply_word(fields, rest, y, f), x, &v)
        }
    }
}

/// The vector field `F^⊗(w)` applied to the identity map, i.e. the field
/// attached to a word by composing first-order operators.
pub fn word_field(fields: &[SharedField], word: &[usize], x: &[Jet]) -> Vec<Jet> {
    let (&last, prefix) = word.split_last().expect("non-empty word");
    let last_field = &fields[last];
    apply_word(fields, prefix, x, &|y| last_field.eval_jet(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::manifold::Sphere;

    fn heisenberg() -> (SharedField, SharedField) {
        let v1 = field(2, |_x| vec![Jet::constant(1.0), Jet::constant(0.0)]);
        let v2 = field(2, |x| vec![Jet::constant(0.0), x[0]]);
        (v1, v2)
    }

    #[test]
    fn bracket_of_field_with_itself_vanishes() {
        let (_, v2) = heisenberg();
        let b = lie_bracket_exact(v2.as_ref(), v2.as_ref(), &[0.3, 0.2]);
        assert_eq!(b, vec![0.0, 0.0]);
    }

    #[test]
    fn heisenberg_bracket_is_dy() {
        let (v1, v2) = heisenberg();
        for x in [[0.0, 0.0], [1.5, -2.0], [-0.3, 7.0]] {
            assert_eq!(lie_bracket_exact(v1.as_ref(), v2.as_ref(), &x), vec![0.0, 1.0]);
            let fd = lie_bracket_fd(v1.as_ref(), v2.as_ref(), &x, 1e-4).unwrap();
            assert!((fd[0]).abs() < 1e-10 && (fd[1] - 1.0).abs() < 1e-10);
        }
        assert!(lie_bracket_fd(v1.as_ref(), v2.as_ref(), &[0.0, 0.0], 0.0).is_err());
    }

    fn skew(axis: usize) -> Vec<f64> {
        let mut a = vec![0.0; 9];
        let (i, j) = ((axis + 1) % 3, (axis + 2) % 3);
        a[i * 3 + j] = -1.0;
        a[j * 3 + i] = 1.0;
        a
    }

    #[test]
    fn rotation_bracket_matches_matrix_commutator() {
        let s = Sphere::unit();
        let a = skew(0);
        let b = skew(1);
        let fa = LinearField::new(3, a.clone()).unwrap();
        let fb = LinearField::new(3, b.clone()).unwrap();
        let x = [0.6, 0.0, 0.8];
        let fd = lie_bracket(&s, &fa, &fb, &x, 1e-4).unwrap();
        // [Ax, Bx] = (BA − AB) x
        let mut c = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    c[i * 3 + j] += b[i * 3 + k] * a[k * 3 + j] - a[i * 3 + k] * b[k * 3 + j];
                }
            }
        }
        for i in 0..3 {
            let exact: f64 = (0..3).map(|j| c[i * 3 + j] * x[j]).sum();
            assert!((fd[i] - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn word_fields_compose_operators() {
        let (v1, v2) = heisenberg();
        let fields = vec![v1, v2];
        let x = lift(&[2.0, 1.0]);
        // F^⊗(ε1 ε2) id = D V2 · V1 = (0, 1); F^⊗(ε2 ε1) id = D V1 · V2 = 0
        assert_eq!(values(&word_field(&fields, &[0, 1], &x)), vec![0.0, 1.0]);
        assert_eq!(values(&word_field(&fields, &[1, 0], &x)), vec![0.0, 0.0]);
        assert_eq!(values(&word_field(&fields, &[1], &x)), vec![0.0, 2.0]);
    }

    #[test]
    fn one_form_is_linear() {
        let (v1, v2) = heisenberg();
        let form = VfOneForm::new(vec![v1, v2]).unwrap();
        let x = [0.5, 0.1];
        let a = form.eval(&x, &[1.0, 2.0]);
        let b = form.eval(&x, &[-3.0, 0.5]);
        let ab = form.eval(&x, &[-2.0, 2.5]);
        for i in 0..2 {
            assert!((a[i] + b[i] - ab[i]).abs() < 1e-15);
        }
    }
}
