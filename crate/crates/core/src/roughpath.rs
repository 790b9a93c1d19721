//! Weak geometric Hölder p-rough path drivers over `R^d`.
//!
//! A driver is a two-parameter family `(s, t) ↦ X_st` of group-like elements
//! of `T^{⌊p⌋}(R^d)`. Exact-formula drivers (pure area, spinning line,
//! log-linear) satisfy Chen's identity by construction; sampled drivers carry a
//! polygonal or group-valued path and compute increments from it.

use std::fmt::Debug;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, contract, Result};
use crate::tensor::{check_lie, dynkin_report, TruncatedTensor};

/// Default Hölder exponent for level-two drivers.
pub const DEFAULT_P: f64 = 2.5;

pub trait RoughPathDriver: Send + Sync + Debug {
    /// Dimension of the driving space.
    fn dim(&self) -> usize;
    /// Hölder exponent.
    fn p(&self) -> f64;
    /// Truncation level of the increments.
    fn level(&self) -> usize;
    /// Right end of the time interval `[0, T)`.
    fn horizon(&self) -> f64;
    /// `X_st` for `s ≤ t`.
    fn increment(&self, s: f64, t: f64) -> TruncatedTensor;

    /// `X_st`, extended to `s > t` through the group inverse.
    fn eval(&self, s: f64, t: f64) -> TruncatedTensor {
        if s <= t {
            self.increment(s, t)
        } else {
            self.increment(t, s)
                .group_inverse()
                .expect("driver increments are group-like")
        }
    }
}

pub type SharedDriver = Arc<dyn RoughPathDriver>;

fn level_of(p: f64) -> Result<usize> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(contract(format!("Hölder exponent must be ≥ 1, got {p}")));
    }
    Ok(p.floor() as usize)
}

fn square_matrix(a: &[Vec<f64>]) -> Result<(usize, Vec<f64>)> {
    let d = a.len();
    if d == 0 {
        return Err(contract("matrix must be non-empty"));
    }
    let mut flat = Vec::with_capacity(d * d);
    for row in a {
        check_dim("matrix row length", d, row.len())?;
        flat.extend_from_slice(row);
    }
    Ok((d, flat))
}

fn check_antisymmetric(d: usize, a: &[f64]) -> Result<()> {
    for i in 0..d {
        for j in 0..d {
            let s = a[i * d + j] + a[j * d + i];
            if s.abs() > 1e-14 {
                return Err(contract(format!(
                    "area matrix is not antisymmetric at ({i},{j}): A+Aᵀ = {s:e}"
                )));
            }
        }
    }
    Ok(())
}

/// Canonical lift of a time-stamped sampled path, interpolated linearly.
#[derive(Clone, Debug)]
pub struct SampledPathLift {
    times: Vec<f64>,
    points: Vec<Vec<f64>>,
    p: f64,
    level: usize,
}

impl SampledPathLift {
    pub fn new(times: Vec<f64>, points: Vec<Vec<f64>>, p: f64) -> Result<Self> {
        let level = level_of(p)?;
        if p < 2.0 {
            return Err(contract("smooth-path lifts need p ≥ 2"));
        }
        Self::with_level(times, points, p, level)
    }

    /// A lift truncated at an explicit level, keeping `p` as metadata.
    pub fn with_level(times: Vec<f64>, points: Vec<Vec<f64>>, p: f64, level: usize) -> Result<Self> {
        if times.len() < 2 || times.len() != points.len() {
            return Err(contract(
                "smooth-path lift needs at least two samples with matching times",
            ));
        }
        if level == 0 {
            return Err(contract("lift level must be positive"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(contract("sample times must be strictly increasing"));
        }
        let d = points[0].len();
        if d == 0 {
            return Err(contract("sample points must be non-empty vectors"));
        }
        for pt in &points {
            check_dim("sample dimension", d, pt.len())?;
        }
        TruncatedTensor::check_shape(d, level)?;
        Ok(SampledPathLift {
            times,
            points,
            p,
            level,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    fn clamp(&self, t: f64) -> f64 {
        t.clamp(self.times[0], *self.times.last().unwrap())
    }

    /// Index `k` with `times[k] ≤ t < times[k+1]` (last segment at the end).
    fn segment(&self, t: f64) -> usize {
        let k = self.times.partition_point(|&x| x <= t);
        k.saturating_sub(1).min(self.times.len() - 2)
    }

    /// Linear interpolation of the sampled path.
    pub fn position(&self, t: f64) -> Vec<f64> {
        let t = self.clamp(t);
        let k = self.segment(t);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let th = (t - t0) / (t1 - t0);
        self.points[k]
            .iter()
            .zip(&self.points[k + 1])
            .map(|(a, b)| a + th * (b - a))
            .collect()
    }
}

impl RoughPathDriver for SampledPathLift {
    fn dim(&self) -> usize {
        self.points[0].len()
    }
    fn p(&self) -> f64 {
        self.p
    }
    fn level(&self) -> usize {
        self.level
    }
    fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn increment(&self, s: f64, t: f64) -> TruncatedTensor {
        let (s, t) = (self.clamp(s), self.clamp(t));
        let d = self.dim();
        let mut sig = TruncatedTensor::unit(d, self.level);
        if t <= s {
            return sig;
        }
        let ks = self.segment(s);
        let kt = self.segment(t);
        let mut prev = self.position(s);
        let mut inc = vec![0.0; d];
        for k in ks + 1..=kt {
            let pt = &self.points[k];
            for i in 0..d {
                inc[i] = pt[i] - prev[i];
            }
            sig.mul_exp_vector(&inc);
            prev.copy_from_slice(pt);
        }
        let end = self.position(t);
        for i in 0..d {
            inc[i] = end[i] - prev[i];
        }
        sig.mul_exp_vector(&inc);
        sig
    }
}

/// Build the canonical lift of a sampled smooth path.
pub fn lift_smooth_path(times: Vec<f64>, points: Vec<Vec<f64>>, p: f64) -> Result<SampledPathLift> {
    SampledPathLift::new(times, points, p)
}

/// Driver `X_st = exp((t − s) Λ)` for a fixed Lie element `Λ`.
#[derive(Clone, Debug)]
pub struct LogLinear {
    generator: TruncatedTensor,
    p: f64,
    horizon: f64,
}

impl LogLinear {
    pub fn new(generator: &TruncatedTensor, p: f64) -> Result<Self> {
        let level = level_of(p)?;
        TruncatedTensor::check_shape(generator.dim(), level)?;
        if generator.scalar() != 0.0 {
            return Err(contract("log-linear generator must have zero scalar part"));
        }
        for k in level + 1..=generator.level() {
            if generator.norm_l1(k) > 0.0 {
                return Err(contract(format!(
                    "generator has degree-{k} terms above the truncation level {level}"
                )));
            }
        }
        let generator = generator.with_level(level);
        let rep = dynkin_report(&generator, 1e-10);
        if !rep.pass {
            return Err(contract(format!(
                "generator is not a Lie element (defects {:?})",
                rep.defects
            )));
        }
        Ok(LogLinear {
            generator,
            p,
            horizon: 1.0,
        })
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn generator(&self) -> &TruncatedTensor {
        &self.generator
    }
}

impl RoughPathDriver for LogLinear {
    fn dim(&self) -> usize {
        self.generator.dim()
    }
    fn p(&self) -> f64 {
        self.p
    }
    fn level(&self) -> usize {
        self.generator.level()
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn increment(&self, s: f64, t: f64) -> TruncatedTensor {
        self.generator
            .scale(t - s)
            .exp()
            .expect("generator has zero scalar part")
    }
}

pub fn log_linear(generator: &TruncatedTensor, p: f64) -> Result<LogLinear> {
    LogLinear::new(generator, p)
}

/// Level-two driver with first level `(t−s)e` and area `(t−s)A`.
///
/// With `e = 0` this is the pure area rough path; otherwise it is the
/// spinning straight line, whose second level is `½(t−s)² e⊗e + (t−s)A`.
#[derive(Clone, Debug)]
pub struct SpinningLine {
    dim: usize,
    direction: Vec<f64>,
    area: Vec<f64>,
    horizon: f64,
}

impl SpinningLine {
    pub fn new(direction: &[f64], area: &[Vec<f64>]) -> Result<Self> {
        let (d, flat) = square_matrix(area)?;
        check_dim("direction dimension", d, direction.len())?;
        check_antisymmetric(d, &flat)?;
        Ok(SpinningLine {
            dim: d,
            direction: direction.to_vec(),
            area: flat,
            horizon: 1.0,
        })
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn area(&self) -> &[f64] {
        &self.area
    }
}

impl RoughPathDriver for SpinningLine {
    fn dim(&self) -> usize {
        self.dim
    }
    fn p(&self) -> f64 {
        DEFAULT_P
    }
    fn level(&self) -> usize {
        2
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn increment(&self, s: f64, t: f64) -> TruncatedTensor {
        let h = t - s;
        let d = self.dim;
        let mut x = TruncatedTensor::unit(d, 2);
        for (dst, e) in x.degree_mut(1).iter_mut().zip(&self.direction) {
            *dst = h * e;
        }
        let lvl2 = x.degree_mut(2);
        for i in 0..d {
            for j in 0..d {
                lvl2[i * d + j] =
                    0.5 * h * h * self.direction[i] * self.direction[j] + h * self.area[i * d + j];
            }
        }
        x
    }
}

/// The pure area rough path with area process `(t − s) A`.
pub fn pure_area(area: &[Vec<f64>]) -> Result<SpinningLine> {
    let d = area.len();
    SpinningLine::new(&vec![0.0; d], area)
}

/// The spinning straight line in direction `e` with area `A`.
pub fn spinning_line(direction: &[f64], area: &[Vec<f64>]) -> Result<SpinningLine> {
    SpinningLine::new(direction, area)
}

/// A group-valued path `Z_t` given at sample times; `X_st = Z_s^{-1} ⊗ Z_t`.
///
/// Between samples the path follows the one-parameter subgroup through the
/// neighbouring samples, so Chen's identity holds up to round-off at any times.
#[derive(Clone, Debug)]
pub struct GroupPath {
    times: Vec<f64>,
    elements: Vec<TruncatedTensor>,
    steps: Vec<TruncatedTensor>,
    p: f64,
}

impl GroupPath {
    pub fn new(times: Vec<f64>, elements: Vec<TruncatedTensor>, p: f64) -> Result<Self> {
        if times.len() < 2 || times.len() != elements.len() {
            return Err(contract("group path needs at least two samples with matching times"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(contract("group path times must be strictly increasing"));
        }
        let (d, n) = (elements[0].dim(), elements[0].level());
        for e in &elements {
            check_dim("group path dimension", d, e.dim())?;
            check_dim("group path level", n, e.level())?;
            if (e.scalar() - 1.0).abs() > 1e-12 {
                return Err(contract("group path elements must have scalar part 1"));
            }
        }
        let steps = elements
            .windows(2)
            .map(|w| {
                w[0].group_inverse()
                    .map(|inv| inv.mul_unchecked(&w[1]))
                    .and_then(|g| g.log())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GroupPath {
            times,
            elements,
            steps,
            p,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn elements(&self) -> &[TruncatedTensor] {
        &self.elements
    }

    /// `Z_t`, interpolated between samples.
    pub fn at(&self, t: f64) -> TruncatedTensor {
        let t = t.clamp(self.times[0], *self.times.last().unwrap());
        let k = self
            .times
            .partition_point(|&x| x <= t)
            .saturating_sub(1)
            .min(self.times.len() - 2);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        if t == t0 {
            return self.elements[k].clone();
        }
        if t == t1 {
            return self.elements[k + 1].clone();
        }
        let th = (t - t0) / (t1 - t0);
        let partial = self.steps[k].scale(th).exp().expect("log has zero scalar");
        self.elements[k].mul_unchecked(&partial)
    }

    /// Join paths end to end: each later path is shifted in time and
    /// left-multiplied by the endpoint of the previous one.
    pub fn concatenate(paths: &[GroupPath]) -> Result<GroupPath> {
        let first = paths.first().ok_or_else(|| contract("nothing to concatenate"))?;
        let mut times = first.times.clone();
        let mut elements = first.elements.clone();
        for g in &paths[1..] {
            let t_end = *times.last().unwrap();
            let z_end = elements.last().unwrap().clone();
            let base = g.elements[0].group_inverse()?;
            let t0 = g.times[0];
            for (t, e) in g.times.iter().zip(&g.elements).skip(1) {
                times.push(t_end + (t - t0));
                elements.push(z_end.mul(&base.mul(e)?)?);
            }
        }
        GroupPath::new(times, elements, first.p)
    }
}

impl RoughPathDriver for GroupPath {
    fn dim(&self) -> usize {
        self.elements[0].dim()
    }
    fn p(&self) -> f64 {
        self.p
    }
    fn level(&self) -> usize {
        self.elements[0].level()
    }
    fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }
    fn increment(&self, s: f64, t: f64) -> TruncatedTensor {
        let zs = self.at(s).group_inverse().expect("group-like");
        zs.mul_unchecked(&self.at(t))
    }
}

/// Options for [`validate_driver`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationOptions {
    pub tol: f64,
    /// Number of random `(s, u, t)` triples drawn from the grid.
    pub random_triples: usize,
    /// Number of finest dyadic lags used to fit Hölder exponents.
    pub holder_lags: usize,
    pub seed: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            tol: 1e-10,
            random_triples: 1000,
            holder_lags: 4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HolderFit {
    pub degree: usize,
    /// `max |X^k_st| / |t − s|^{k/p}` over the sampled pairs.
    pub constant: f64,
    /// Log-log slope of the max degree-`k` norm against the lag.
    pub fitted_exponent: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DriverReport {
    pub unit_defect: f64,
    pub chen_defect: f64,
    pub lie_defect: f64,
    pub holder: Vec<HolderFit>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Measure Chen, unit and geometricity defects and Hölder constants on a grid.
pub fn validate_driver(
    x: &dyn RoughPathDriver,
    grid: &[f64],
    opts: &ValidationOptions,
) -> Result<DriverReport> {
    if grid.len() < 3 {
        return Err(contract("validation grid needs at least three points"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(contract("validation grid must be strictly increasing"));
    }
    let unit = TruncatedTensor::unit(x.dim(), x.level());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = grid.len();

    let mut unit_defect: f64 = 0.0;
    for &t in grid.iter().step_by((n / 64).max(1)) {
        unit_defect = unit_defect.max(x.eval(t, t).max_abs_diff(&unit));
    }

    let mut chen_defect: f64 = 0.0;
    let mut lie_defect: f64 = 0.0;
    let mut check_triple = |i: usize, j: usize, k: usize| -> Result<()> {
        let (s, u, t) = (grid[i], grid[j], grid[k]);
        let su = x.eval(s, u);
        let ut = x.eval(u, t);
        let st = x.eval(s, t);
        let scale = 1.0 + st.max_abs();
        chen_defect = chen_defect.max(su.mul(&ut)?.max_abs_diff(&st) / scale);
        lie_defect = lie_defect.max(check_lie(&st, opts.tol)?.max_defect());
        Ok(())
    };
    for i in 0..n - 2 {
        check_triple(i, i + 1, i + 2)?;
    }
    for _ in 0..opts.random_triples {
        let mut idx = [
            rng.gen_range(0..n),
            rng.gen_range(0..n),
            rng.gen_range(0..n),
        ];
        idx.sort_unstable();
        check_triple(idx[0], idx[1], idx[2])?;
    }

    let p = x.p();
    let mut holder = Vec::new();
    for k in 1..=x.level() {
        let mut constant: f64 = 0.0;
        let mut lx = Vec::new();
        let mut ly = Vec::new();
        let mut lag = 1;
        let mut fitted = 0;
        while lag < n && fitted < opts.holder_lags.max(2) {
            let mut worst: f64 = 0.0;
            let mut dt_sum = 0.0;
            let mut count = 0;
            for i in (0..n - lag).step_by(((n - lag) / 256).max(1)) {
                let (s, t) = (grid[i], grid[i + lag]);
                let norm = x.eval(s, t).norm_l1(k);
                constant = constant.max(norm / (t - s).powf(k as f64 / p));
                worst = worst.max(norm);
                dt_sum += t - s;
                count += 1;
            }
            if worst > 0.0 {
                lx.push((dt_sum / count as f64).ln());
                ly.push(worst.ln());
            }
            lag *= 2;
            fitted += 1;
        }
        let fitted_exponent = if lx.len() >= 2 { fit_slope(&lx, &ly) } else { f64::NAN };
        holder.push(HolderFit {
            degree: k,
            constant,
            fitted_exponent,
        });
    }

    let pass = unit_defect < opts.tol
        && chen_defect < opts.tol
        && lie_defect < opts.tol
        && holder.iter().all(|h| h.constant.is_finite());
    Ok(DriverReport {
        unit_defect,
        chen_defect,
        lie_defect,
        holder,
        tolerance: opts.tol,
        pass,
    })
}

/// Uniform grid of `n` points on `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Samples of the spinning signal `h^n_t = (cos(n²t), sin(n²t)) / n`.
pub fn spinning_signal(n: f64, horizon: f64, mesh: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let steps = (horizon / mesh).round().max(1.0) as usize;
    let times = uniform_grid(0.0, horizon, steps + 1);
    let points = times
        .iter()
        .map(|&t| vec![(n * n * t).cos() / n, (n * n * t).sin() / n])
        .collect();
    (times, points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j() -> Vec<Vec<f64>> {
        vec![vec![0.0, 1.0], vec![-1.0, 0.0]]
    }

    #[test]
    fn oversized_truncation_is_rejected() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.5]];
        assert!(lift_smooth_path(vec![0.0, 1.0], pts, 1025.0).is_err());
        let g = TruncatedTensor::letter(2, 1, 0);
        assert!(log_linear(&g, 64.0).is_err());
        assert!(log_linear(&g, 4.5).is_ok());
    }

    #[test]
    fn constant_path_is_unit() {
        let x = lift_smooth_path(vec![0.0, 0.5, 1.0], vec![vec![1.0, 2.0]; 3], 2.5).unwrap();
        assert_eq!(x.eval(0.1, 0.9), TruncatedTensor::unit(2, 2));
    }

    #[test]
    fn straight_line_lift_is_exponential() {
        let u = [0.3, -1.2];
        let times = uniform_grid(0.0, 1.0, 7);
        let pts = times.iter().map(|t| vec![t * u[0], t * u[1]]).collect();
        let x = lift_smooth_path(times, pts, 3.2).unwrap();
        let got = x.eval(0.13, 0.71);
        let want = TruncatedTensor::exp_vector(&[0.58 * u[0], 0.58 * u[1]], 3);
        assert!(got.max_abs_diff(&want) < 1e-14);
    }

    #[test]
    fn non_monotone_times_rejected() {
        assert!(lift_smooth_path(vec![0.0, 0.0], vec![vec![0.0], vec![1.0]], 2.5).is_err());
        assert!(lift_smooth_path(vec![0.0, 1.0], vec![vec![0.0], vec![1.0]], 1.5).is_err());
    }

    #[test]
    fn pure_area_increment() {
        let x = pure_area(&j()).unwrap();
        let g = x.eval(0.0, 0.7);
        assert_eq!(g.degree(1), &[0.0, 0.0]);
        assert_eq!(g.degree(2), &[0.0, 0.7, -0.7, 0.0]);
        let zero = pure_area(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(zero.eval(0.2, 0.9), TruncatedTensor::unit(2, 2));
        assert!(pure_area(&[vec![0.0, 1.0], vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn pure_area_chen_is_exact() {
        let x = pure_area(&j()).unwrap();
        let lhs = x.eval(0.1, 0.4).mul(&x.eval(0.4, 0.9)).unwrap();
        assert_eq!(lhs, x.eval(0.1, 0.9));
    }

    #[test]
    fn spinning_line_unit_time() {
        let x = spinning_line(&[1.0, 0.0], &j()).unwrap();
        let g = x.eval(0.0, 1.0);
        assert_eq!(g.degree(1), &[1.0, 0.0]);
        assert_eq!(g.degree(2), &[0.5, 1.0, -1.0, 0.0]);
    }

    #[test]
    fn log_linear_rejects_overflow_and_non_lie() {
        let e1 = TruncatedTensor::letter(2, 3, 0);
        let e2 = TruncatedTensor::letter(2, 3, 1);
        let br = e1.bracket(&e2).unwrap();
        let lam = e1.bracket(&br).unwrap();
        assert!(log_linear(&lam, 2.5).is_err());
        assert!(log_linear(&lam, 3.5).is_ok());
        let mut not_lie = TruncatedTensor::zero(2, 2);
        not_lie.degree_mut(2)[1] = 1.0;
        assert!(log_linear(&not_lie, 2.5).is_err());
    }

    #[test]
    fn group_path_chen_and_concatenation() {
        let lam = TruncatedTensor::from_vector(2, &[1.0, 0.5]);
        let times = uniform_grid(0.0, 1.0, 5);
        let els: Vec<_> = times.iter().map(|t| lam.scale(*t).exp().unwrap()).collect();
        let g = GroupPath::new(times, els, 2.5).unwrap();
        let direct = lam.scale(0.55).exp().unwrap();
        assert!(g.eval(0.1, 0.65).max_abs_diff(&direct) < 1e-14);
        let both = GroupPath::concatenate(&[g.clone(), g]).unwrap();
        assert_eq!(both.horizon(), 2.0);
        assert!(both.eval(0.0, 2.0).max_abs_diff(&lam.scale(2.0).exp().unwrap()) < 1e-14);
    }

    #[test]
    fn validation_of_exact_driver() {
        let x = pure_area(&j()).unwrap();
        let grid = uniform_grid(0.0, 1.0, 65);
        let rep = validate_driver(&x, &grid, &ValidationOptions::default()).unwrap();
        assert!(rep.pass);
        assert!(rep.chen_defect < 1e-14);
        assert!(rep.lie_defect < 1e-14);
        // area grows linearly: exponent one for the second level
        assert!((rep.holder[1].fitted_exponent - 1.0).abs() < 1e-9);
    }
}
