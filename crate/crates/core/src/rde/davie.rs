//! Local Taylor–Euler expansion residuals of computed solutions.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{contract, Result};
use crate::geometry::field::apply_word;
use crate::jet::{lift, values, Jet};
use crate::rde::integrator::RoughIntegrator;
use crate::roughpath::fit_slope;

/// Residuals at or below this level are treated as exact.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

/// A vector-valued test function on the state space.
pub type TestFunctions = Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>;

/// Coordinates `y_i`, squares `y_i²` and neighbour products `y_i y_{i+1}`.
pub fn coordinate_and_quadratic_tests() -> TestFunctions {
    Arc::new(|y: &[Jet]| {
        let mut out = y.to_vec();
        out.extend(y.iter().map(|v| *v * *v));
        out.extend(y.windows(2).map(|w| w[0] * w[1]));
        out
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DavieReport {
    /// `(t − s, max residual over windows of that length)`.
    pub residuals: Vec<(f64, f64)>,
    /// Fitted log-log slope; `∞` when every residual is at round-off.
    pub exponent: f64,
}

impl DavieReport {
    pub fn pass(&self) -> bool {
        self.exponent > 1.0
    }
}

/// `max_j |f_j(x_t) − (F^⊗(X_st) f_j)(x_s)|` for one window.
pub fn window_residual(theta: &RoughIntegrator, tests: &TestFunctions, s: f64, t: f64) -> Result<f64> {
    let path = theta.path();
    if !(s < t) || s < path.start() - 1e-12 || t > path.end() + 1e-12 {
        return Err(contract(format!(
            "window [{s}, {t}] is not inside the solved range [{}, {}]",
            path.start(),
            path.end()
        )));
    }
    let piece = theta.piece_at(s);
    if t > piece.end + 1e-12 {
        return Err(contract(format!("window [{s}, {t}] straddles a junction")));
    }
    let xs = path.state_at(s)?;
    let xt = path.state_at(t)?;
    let x = piece.driver.eval(s - piece.start, t - piece.start);
    let fields = piece.form.fields();
    let f = |y: &[Jet]| tests(y);
    let base = lift(&xs);
    let mut expansion = values(&tests(&base));
    let d = x.dim();
    for k in 1..=x.level() {
        let coeffs = x.degree(k);
        for (idx, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mut word = vec![0usize; k];
            let mut r = idx;
            for slot in (0..k).rev() {
                word[slot] = r % d;
                r /= d;
            }
            let term = values(&apply_word(fields, &word, &base, &f));
            for (e, v) in expansion.iter_mut().zip(&term) {
                *e += c * v;
            }
        }
    }
    let target = values(&tests(&lift(&xt)));
    Ok(target
        .iter()
        .zip(&expansion)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Residuals over `windows`, grouped by length, with the fitted exponent.
pub fn davie_residual(
    theta: &RoughIntegrator,
    tests: &TestFunctions,
    windows: &[(f64, f64)],
) -> Result<DavieReport> {
    if windows.is_empty() {
        return Err(contract("no windows given"));
    }
    let mut by_len: Vec<(f64, f64)> = Vec::new();
    for &(s, t) in windows {
        let r = window_residual(theta, tests, s, t)?;
        let len = t - s;
        match by_len.iter_mut().find(|(l, _)| (l - len).abs() <= 1e-12 * len) {
            Some(entry) => entry.1 = entry.1.max(r),
            None => by_len.push((len, r)),
        }
    }
    by_len.sort_by(|a, b| a.0.total_cmp(&b.0));
    let usable: Vec<&(f64, f64)> = by_len.iter().filter(|(_, r)| *r > RESIDUAL_FLOOR).collect();
    let exponent = if usable.len() < 2 {
        f64::INFINITY
    } else {
        let xs: Vec<f64> = usable.iter().map(|(l, _)| l.ln()).collect();
        let ys: Vec<f64> = usable.iter().map(|(_, r)| r.ln()).collect();
        fit_slope(&xs, &ys)
    };
    Ok(DavieReport {
        residuals: by_len,
        exponent,
    })
}

/// Dyadic windows on solver samples: for each `k` in `levels`, up to
/// `per_level` evenly spread windows spanning `span / 2^k` samples, where
/// `span` is the number of steps in the first piece.
pub fn dyadic_windows(theta: &RoughIntegrator, levels: std::ops::RangeInclusive<u32>, per_level: usize) -> Vec<(f64, f64)> {
    let end = theta.pieces()[0].end.min(theta.path().end());
    dyadic_windows_until(theta, end, levels, per_level)
}

/// [`dyadic_windows`] restricted to samples at or before time `until`.
pub fn dyadic_windows_until(
    theta: &RoughIntegrator,
    until: f64,
    levels: std::ops::RangeInclusive<u32>,
    per_level: usize,
) -> Vec<(f64, f64)> {
    let path = theta.path();
    let limit = until.min(theta.pieces()[0].end);
    let times = path.times();
    let span = times.iter().take_while(|&&t| t <= limit + 1e-12).count().saturating_sub(1);
    let mut out = Vec::new();
    for k in levels {
        let len = span >> k;
        if len == 0 {
            break;
        }
        let slots = span / len;
        let count = slots.min(per_level.max(1));
        for j in 0..count {
            let i = (j * slots / count) * len;
            out.push((times[i], times[i + len]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::field::{field, LinearField, VfOneForm};
    use crate::geometry::manifold::{Euclidean, SharedSpace};
    use crate::rde::integrator::SolverOptions;
    use crate::roughpath::{lift_smooth_path, SharedDriver};

    fn line_theta() -> RoughIntegrator {
        let form = VfOneForm::new(vec![
            Arc::new(LinearField::new(2, vec![0.0, 1.0, -1.0, 0.0]).unwrap()),
            Arc::new(LinearField::new(2, vec![0.5, 0.0, 0.0, 0.5]).unwrap()),
        ])
        .unwrap();
        let x: SharedDriver = Arc::new(
            lift_smooth_path(vec![0.0, 1.0], vec![vec![0.0, 0.0], vec![0.4, 0.3]], 2.5).unwrap(),
        );
        let space: SharedSpace = Arc::new(Euclidean::plane());
        RoughIntegrator::solve(space, form, x, &[1.0, 0.0], &SolverOptions::with_mesh(64)).unwrap()
    }

    #[test]
    fn constant_test_function_has_zero_residual() {
        let theta = line_theta();
        let one: TestFunctions = Arc::new(|_y: &[Jet]| vec![Jet::constant(1.0)]);
        assert_eq!(window_residual(&theta, &one, 0.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn commuting_linear_fields_have_smooth_residual() {
        let theta = line_theta();
        let linear: TestFunctions = Arc::new(|y: &[Jet]| y.to_vec());
        let windows = dyadic_windows(&theta, 2..=6, 4);
        let rep = davie_residual(&theta, &linear, &windows).unwrap();
        // the commuting linear flow is exp of a constant matrix; the level-2
        // expansion misses the cubic term only
        assert!(rep.exponent > 2.5, "{rep:?}");
    }

    #[test]
    fn windows_outside_path_rejected() {
        let theta = line_theta();
        let tests = coordinate_and_quadratic_tests();
        assert!(window_residual(&theta, &tests, 0.5, 1.5).is_err());
        assert!(davie_residual(&theta, &tests, &[]).is_err());
    }

    #[test]
    fn nonlinear_field_exponent_exceeds_one() {
        let form = VfOneForm::new(vec![
            field(2, |x| vec![Jet::constant(1.0), x[1] * x[0]]),
            field(2, |x| vec![x[1].sin(), x[0]]),
        ])
        .unwrap();
        let times: Vec<f64> = (0..=512).map(|k| k as f64 / 512.0).collect();
        let pts = times
            .iter()
            .map(|t| vec![(6.0 * t).sin(), (4.0 * t).cos() - 1.0])
            .collect();
        let x: SharedDriver = Arc::new(lift_smooth_path(times, pts, 2.5).unwrap());
        let theta = RoughIntegrator::solve(
            Arc::new(Euclidean::plane()),
            form,
            x,
            &[0.1, 0.2],
            &SolverOptions::with_mesh(1024),
        )
        .unwrap();
        let rep = davie_residual(&theta, &coordinate_and_quadratic_tests(), &dyadic_windows(&theta, 3..=7, 8)).unwrap();
        assert!(rep.exponent > 1.0, "{rep:?}");
    }
}
