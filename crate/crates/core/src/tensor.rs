//! The truncated tensor algebra `T^N(R^d)` and its free nilpotent Lie algebra.
//!
//! Each degree `k` is a dense row-major array of `d^k` coefficients; the
//! coefficient at flat index `i_1 d^{k-1} + … + i_k` multiplies the word
//! `ε_{i_1} ⊗ … ⊗ ε_{i_k}`.
//!
//! Norms are `ℓ¹` per degree; the homogeneous norm of a group-like element is
//! `max_k |g_k|^{1/k}`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, contract, Error, Result};

/// Relative tolerance used for algebraic identities in double precision.
pub const ALGEBRA_TOL: f64 = 1e-12;

/// Largest coefficient count accepted for driver truncations.
pub const MAX_COEFFICIENTS: usize = 1 << 22;

#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedTensor {
    dim: usize,
    level: usize,
    levels: Vec<Vec<f64>>,
}

impl TruncatedTensor {
    /// The zero tensor. Panics if `dim` or `level` is zero.
    pub fn zero(dim: usize, level: usize) -> Self {
        assert!(dim > 0 && level > 0, "tensor dim and level must be positive");
        let levels = (0..=level).map(|k| vec![0.0; dim.pow(k as u32)]).collect();
        TruncatedTensor { dim, level, levels }
    }

    /// The unit `(1, 0, …, 0)`.
    pub fn unit(dim: usize, level: usize) -> Self {
        let mut t = Self::zero(dim, level);
        t.levels[0][0] = 1.0;
        t
    }

    /// The basis letter `ε_i` placed in degree one.
    pub fn letter(dim: usize, level: usize, i: usize) -> Self {
        let mut t = Self::zero(dim, level);
        t.levels[1][i] = 1.0;
        t
    }

    /// A degree-one tensor with the given coordinates.
    pub fn from_vector(level: usize, v: &[f64]) -> Self {
        let mut t = Self::zero(v.len(), level);
        t.levels[1].copy_from_slice(v);
        t
    }

    /// Build from explicit per-degree arrays, checking their sizes.
    pub fn from_levels(dim: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 || levels.len() < 2 {
            return Err(contract("tensor needs dim > 0 and at least degrees 0 and 1"));
        }
        let mut size = 1usize;
        for (k, arr) in levels.iter().enumerate() {
            if k > 0 {
                size = size
                    .checked_mul(dim)
                    .ok_or_else(|| contract("tensor size overflows"))?;
            }
            if arr.len() != size {
                return Err(contract(format!(
                    "degree {k} has {} coefficients, expected {size}",
                    arr.len()
                )));
            }
        }
        let level = levels.len() - 1;
        Ok(TruncatedTensor { dim, level, levels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn scalar(&self) -> f64 {
        self.levels[0][0]
    }

    pub fn degree(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    pub fn degree_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.levels[k]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    /// Coefficient of a word given as a list of letters.
    pub fn word(&self, letters: &[usize]) -> f64 {
        let idx = letters.iter().fold(0, |acc, &i| acc * self.dim + i);
        self.levels[letters.len()][idx]
    }

    /// All coefficients in degree order, levels `1..=N` concatenated.
    pub fn flatten_positive(&self) -> Vec<f64> {
        self.levels[1..].iter().flatten().copied().collect()
    }

    /// Inverse of [`flatten_positive`](Self::flatten_positive) with the given scalar part.
    pub fn from_flat_positive(dim: usize, level: usize, scalar: f64, flat: &[f64]) -> Self {
        let mut t = Self::zero(dim, level);
        t.levels[0][0] = scalar;
        let mut off = 0;
        for k in 1..=level {
            let n = t.levels[k].len();
            t.levels[k].copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        t
    }

    /// Number of coefficients in degrees `1..=level`.
    pub fn positive_len(dim: usize, level: usize) -> usize {
        (1..=level).map(|k| dim.pow(k as u32)).sum()
    }

    /// Reject shapes with more than [`MAX_COEFFICIENTS`] coefficients.
    pub fn check_shape(dim: usize, level: usize) -> Result<()> {
        let mut size = 1usize;
        let mut total = 1usize;
        for _ in 0..level {
            size = size.saturating_mul(dim);
            total = total.saturating_add(size);
            if total > MAX_COEFFICIENTS {
                return Err(contract(format!(
                    "tensor of dimension {dim} and level {level} exceeds {MAX_COEFFICIENTS} coefficients"
                )));
            }
        }
        Ok(())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        check_dim("tensor dimension", self.dim, other.dim)?;
        check_dim("tensor level", self.level, other.level)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.levels.iter_mut().flatten().for_each(|x| *x *= c);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.add_unchecked(other, 1.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.add_unchecked(other, -1.0))
    }

    fn add_unchecked(&self, other: &Self, c: f64) -> Self {
        let mut out = self.clone();
        for (a, b) in out.levels.iter_mut().zip(&other.levels) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += c * y;
            }
        }
        out
    }

    /// Truncated tensor product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.mul_unchecked(other))
    }

    pub(crate) fn mul_unchecked(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.dim, self.level);
        for k in 0..=self.level {
            let dst = &mut out.levels[k];
            for i in 0..=k {
                outer_accumulate(dst, &self.levels[i], &other.levels[k - i]);
            }
        }
        out
    }

    /// Truncated exponential. The input must have zero scalar part.
    pub fn exp(&self) -> Result<Self> {
        if self.scalar() != 0.0 {
            return Err(contract("tensor_exp requires a zero scalar part"));
        }
        // Horner form of 1 + x(1 + x/2(1 + x/3(…)))
        let unit = Self::unit(self.dim, self.level);
        let mut r = unit.clone();
        for k in (1..=self.level).rev() {
            r = unit.add_unchecked(&self.mul_unchecked(&r), 1.0 / k as f64);
        }
        Ok(r)
    }

    /// Truncated logarithm. The input must have scalar part one.
    pub fn log(&self) -> Result<Self> {
        if (self.scalar() - 1.0).abs() > ALGEBRA_TOL {
            return Err(contract(format!(
                "tensor_log requires scalar part 1, got {}",
                self.scalar()
            )));
        }
        let mut x = self.clone();
        x.levels[0][0] = 0.0;
        let n = self.level;
        let coeff = |k: usize| if k % 2 == 1 { 1.0 / k as f64 } else { -1.0 / k as f64 };
        let unit = Self::unit(self.dim, self.level);
        let mut r = unit.scale(coeff(n));
        for k in (1..n).rev() {
            r = unit.scale(coeff(k)).add_unchecked(&x.mul_unchecked(&r), 1.0);
        }
        Ok(x.mul_unchecked(&r))
    }

    /// Inverse of an element with scalar part one, solved degree by degree.
    pub fn group_inverse(&self) -> Result<Self> {
        if (self.scalar() - 1.0).abs() > ALGEBRA_TOL {
            return Err(contract(format!(
                "group_inverse requires scalar part 1, got {}",
                self.scalar()
            )));
        }
        let mut h = Self::unit(self.dim, self.level);
        for k in 1..=self.level {
            let mut acc = vec![0.0; self.levels[k].len()];
            for j in 1..=k {
                outer_accumulate(&mut acc, &self.levels[j], &h.levels[k - j]);
            }
            for (dst, v) in h.levels[k].iter_mut().zip(acc) {
                *dst = -v;
            }
        }
        Ok(h)
    }

    /// `[a, b] = a ⊗ b − b ⊗ a`.
    pub fn bracket(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self
            .mul_unchecked(other)
            .add_unchecked(&other.mul_unchecked(self), -1.0))
    }

    /// `self ⊗ exp(v)` for a degree-one increment `v`, computed in place.
    pub fn mul_exp_vector(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.dim);
        let powers = exp_vector_levels(v, self.level);
        for k in (1..=self.level).rev() {
            let mut acc = vec![0.0; self.levels[k].len()];
            for j in 0..=k {
                outer_accumulate(&mut acc, &self.levels[k - j], &powers[j]);
            }
            self.levels[k] = acc;
        }
    }

    /// Exponential of a degree-one vector: degree `k` is `v^{⊗k}/k!`.
    pub fn exp_vector(v: &[f64], level: usize) -> Self {
        let dim = v.len();
        TruncatedTensor {
            dim,
            level,
            levels: exp_vector_levels(v, level),
        }
    }

    /// Restrict to a lower truncation level, or pad with zeros to a higher one.
    pub fn with_level(&self, level: usize) -> Self {
        let mut out = Self::zero(self.dim, level);
        for k in 0..=level.min(self.level) {
            out.levels[k].copy_from_slice(&self.levels[k]);
        }
        out
    }

    pub fn norm_l1(&self, k: usize) -> f64 {
        self.levels[k].iter().map(|x| x.abs()).sum()
    }

    /// `max_k |g_k|_{ℓ¹}^{1/k}` over degrees `1..=N`.
    pub fn homogeneous_norm(&self) -> f64 {
        (1..=self.level)
            .map(|k| self.norm_l1(k).powf(1.0 / k as f64))
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.levels
            .iter()
            .flatten()
            .zip(other.levels.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.levels.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max)
    }

    /// Left-normed bracketing of the degree-`k` part:
    /// `ε_{i1}…ε_{ik} ↦ [… [ε_{i1}, ε_{i2}], …, ε_{ik}]`.
    pub fn left_bracketing(&self, k: usize) -> Vec<f64> {
        left_bracketing(self.dim, &self.levels[k], k)
    }

    /// Antisymmetric part of degree two as a `d×d` row-major matrix.
    pub fn antisymmetric_area(&self) -> Vec<f64> {
        let d = self.dim;
        let x = &self.levels[2];
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                a[i * d + j] = 0.5 * (x[i * d + j] - x[j * d + i]);
            }
        }
        a
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&TensorJson::from(self)).expect("tensor serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: TensorJson = serde_json::from_str(s)?;
        Self::try_from(raw)
    }
}

/// `dst += a ⊗ b` with row-major flattening.
fn outer_accumulate(dst: &mut [f64], a: &[f64], b: &[f64]) {
    let nb = b.len();
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        let row = &mut dst[i * nb..(i + 1) * nb];
        for (r, &bj) in row.iter_mut().zip(b) {
            *r += ai * bj;
        }
    }
}

fn exp_vector_levels(v: &[f64], level: usize) -> Vec<Vec<f64>> {
    let mut levels = Vec::with_capacity(level + 1);
    levels.push(vec![1.0]);
    for k in 1..=level {
        let prev: &Vec<f64> = &levels[k - 1];
        let mut next = vec![0.0; prev.len() * v.len()];
        let scaled: Vec<f64> = v.iter().map(|x| x / k as f64).collect();
        outer_accumulate(&mut next, prev, &scaled);
        levels.push(next);
    }
    levels
}

fn left_bracketing(d: usize, x: &[f64], k: usize) -> Vec<f64> {
    if k <= 1 {
        return x.to_vec();
    }
    let sub = d.pow(k as u32 - 1);
    let mut out = vec![0.0; x.len()];
    for i in 0..d {
        // x = Σ_i y_i ⊗ ε_i
        let y: Vec<f64> = (0..sub).map(|w| x[w * d + i]).collect();
        if y.iter().all(|v| *v == 0.0) {
            continue;
        }
        let ry = left_bracketing(d, &y, k - 1);
        for (w, &r) in ry.iter().enumerate() {
            // r ⊗ ε_i − ε_i ⊗ r
            out[w * d + i] += r;
            out[i * sub + w] -= r;
        }
    }
    out
}

/// Per-degree result of the Lie-membership test.
#[derive(Clone, Debug, Serialize)]
pub struct LieReport {
    /// `max |r(x_k)/k − x_k|` for each degree `k = 1..=N`, where `x = log g`.
    pub defects: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

impl LieReport {
    pub fn max_defect(&self) -> f64 {
        self.defects.iter().copied().fold(0.0, f64::max)
    }
}

/// Geometricity test: `log g` must satisfy Dynkin's criterion in every degree.
///
/// The defect in degree `k` is compared against `tol * (1 + |x_k|_∞)`.
pub fn check_lie(g: &TruncatedTensor, tol: f64) -> Result<LieReport> {
    let x = g.log()?;
    Ok(dynkin_report(&x, tol))
}

/// Dynkin's criterion applied directly to a candidate Lie element.
pub fn dynkin_report(x: &TruncatedTensor, tol: f64) -> LieReport {
    let mut defects = Vec::with_capacity(x.level);
    let mut pass = true;
    for k in 1..=x.level {
        let r = x.left_bracketing(k);
        let xk = x.degree(k);
        let scale = xk.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let defect = r
            .iter()
            .zip(xk)
            .map(|(a, b)| (a / k as f64 - b).abs())
            .fold(0.0, f64::max);
        if defect > tol * (1.0 + scale) {
            pass = false;
        }
        defects.push(defect);
    }
    LieReport {
        defects,
        tolerance: tol,
        pass,
    }
}

/// Signature of the polygonal path through `points`, truncated at `level`.
pub fn signature_piecewise_linear(points: &[Vec<f64>], level: usize) -> Result<TruncatedTensor> {
    if points.len() < 2 {
        return Err(contract("signature needs at least two points"));
    }
    let d = points[0].len();
    if d == 0 || level == 0 {
        return Err(contract("signature needs positive dimension and level"));
    }
    let mut sig = TruncatedTensor::unit(d, level);
    let mut inc = vec![0.0; d];
    for w in points.windows(2) {
        check_dim("path point dimension", d, w[1].len())?;
        for (i, v) in inc.iter_mut().enumerate() {
            *v = w[1][i] - w[0][i];
        }
        sig.mul_exp_vector(&inc);
    }
    Ok(sig)
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LevelJson {
    Scalar(f64),
    Array(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorJson {
    dim: usize,
    level: usize,
    data: Vec<LevelJson>,
}

impl From<&TruncatedTensor> for TensorJson {
    fn from(t: &TruncatedTensor) -> Self {
        let mut data = vec![LevelJson::Scalar(t.scalar())];
        data.extend(t.levels[1..].iter().cloned().map(LevelJson::Array));
        TensorJson {
            dim: t.dim,
            level: t.level,
            data,
        }
    }
}

impl TryFrom<TensorJson> for TruncatedTensor {
    type Error = Error;

    fn try_from(raw: TensorJson) -> Result<Self> {
        if raw.data.len() != raw.level + 1 {
            return Err(contract(format!(
                "tensor JSON has {} levels in `data`, expected level + 1 = {}",
                raw.data.len(),
                raw.level.saturating_add(1)
            )));
        }
        let mut levels = Vec::with_capacity(raw.data.len());
        for (k, lv) in raw.data.into_iter().enumerate() {
            match (k, lv) {
                (0, LevelJson::Scalar(s)) => levels.push(vec![s]),
                (0, LevelJson::Array(_)) => {
                    return Err(contract("tensor JSON degree 0 must be a number"))
                }
                (_, LevelJson::Array(a)) => levels.push(a),
                (k, LevelJson::Scalar(_)) => {
                    return Err(contract(format!("tensor JSON degree {k} must be an array")))
                }
            }
        }
        TruncatedTensor::from_levels(raw.dim, levels)
    }
}

impl Serialize for TruncatedTensor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TensorJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for TruncatedTensor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = TensorJson::deserialize(d)?;
        TruncatedTensor::try_from(raw).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn area_generator() -> TruncatedTensor {
        let e1 = TruncatedTensor::letter(2, 2, 0);
        let e2 = TruncatedTensor::letter(2, 2, 1);
        e1.bracket(&e2).unwrap()
    }

    #[test]
    fn degree_one_product_adds() {
        let a = TruncatedTensor::exp_vector(&[1.0, 2.0], 1);
        let b = TruncatedTensor::exp_vector(&[0.5, -1.0], 1);
        let c = a.mul(&b).unwrap();
        assert_eq!(c.degree(1), &[1.5, 1.0]);
        assert_eq!(c.scalar(), 1.0);
    }

    #[test]
    fn single_letter_exponentials_compose() {
        let u = TruncatedTensor::letter(3, 4, 1);
        let a = u.scale(0.3).exp().unwrap();
        let b = u.scale(1.1).exp().unwrap();
        let c = u.scale(1.4).exp().unwrap();
        assert!(a.mul(&b).unwrap().max_abs_diff(&c) < 1e-15);
    }

    #[test]
    fn exp_of_area_truncates() {
        let lam = area_generator();
        let g = lam.exp().unwrap();
        assert_eq!(g, TruncatedTensor::unit(2, 2).add(&lam).unwrap());
        assert_eq!(g.log().unwrap(), lam);
    }

    #[test]
    fn log_of_unit_and_letter() {
        assert_eq!(
            TruncatedTensor::unit(2, 3).log().unwrap(),
            TruncatedTensor::zero(2, 3)
        );
        let x = TruncatedTensor::letter(2, 3, 0).scale(0.25);
        assert!(x.exp().unwrap().log().unwrap().max_abs_diff(&x) < 1e-16);
    }

    #[test]
    fn contract_errors() {
        let bad = TruncatedTensor::unit(2, 2);
        assert!(matches!(bad.exp(), Err(Error::Contract(_))));
        let zero = TruncatedTensor::zero(2, 2);
        assert!(matches!(zero.log(), Err(Error::Contract(_))));
        assert!(matches!(zero.group_inverse(), Err(Error::Contract(_))));
        let other = TruncatedTensor::unit(3, 2);
        assert!(matches!(bad.mul(&other), Err(Error::Dimension { .. })));
        assert!(signature_piecewise_linear(&[vec![0.0, 0.0]], 2).is_err());
    }

    #[test]
    fn inverse_of_unit_and_exponential() {
        let u = TruncatedTensor::unit(2, 3);
        assert_eq!(u.group_inverse().unwrap(), u);
        let x = TruncatedTensor::from_vector(3, &[0.3, -0.7]);
        let inv = x.exp().unwrap().group_inverse().unwrap();
        assert!(inv.max_abs_diff(&x.scale(-1.0).exp().unwrap()) < 1e-15);
    }

    #[test]
    fn dynkin_flags_non_lie_area() {
        let mut g = TruncatedTensor::unit(2, 2);
        g.degree_mut(2)[1] = 1.0; // ε1⊗ε2
        let rep = check_lie(&g, 1e-12).unwrap();
        assert!(rep.defects[0] < 1e-15);
        assert!(!rep.pass);
        assert!(rep.defects[1] > 0.4);
    }

    #[test]
    fn closed_square_encloses_unit_area() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![0.0, 0.0],
        ];
        let s = signature_piecewise_linear(&pts, 2).unwrap();
        assert!(s.norm_l1(1) < 1e-15);
        let a = s.antisymmetric_area();
        // shoelace: counter-clockwise unit square has area +1
        assert!((a[1] - 1.0).abs() < 1e-15);
        assert!((a[2] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn json_layout() {
        let t = TruncatedTensor::exp_vector(&[1.0, 2.0], 2);
        let s = t.to_json();
        assert_eq!(
            s,
            r#"{"dim":2,"level":2,"data":[1.0,[1.0,2.0],[0.5,1.0,1.0,2.0]]}"#
        );
        assert_eq!(TruncatedTensor::from_json(&s).unwrap(), t);
        assert!(TruncatedTensor::from_json(r#"{"dim":2,"level":1,"data":[1.0,[1.0]]}"#).is_err());
        assert!(TruncatedTensor::from_json(r#"{"dim":2,"level":1,"data":[[1.0],[1.0,2.0]]}"#).is_err());
        assert!(TruncatedTensor::from_json(r#"{"dim":0,"level":1,"data":[1.0,[]]}"#).is_err());
    }
}
