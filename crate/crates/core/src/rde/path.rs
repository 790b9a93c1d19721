//! Sampled solution paths.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{check_dim, contract, Result};

/// Where and why a solve stopped before its horizon.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlowUp {
    /// Estimated explosion time: the end of the step that diverged.
    pub time: f64,
    /// Time of the last state that passed the divergence checks.
    pub last_valid_time: f64,
    pub reason: String,
}

/// Time stamps and states of a solution, plus mesh metadata.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RDEPath {
    times: Vec<f64>,
    points: Vec<Vec<f64>>,
    columns: Vec<String>,
    /// Mesh width used by the solver.
    pub mesh: f64,
    pub p: f64,
    pub scheme: String,
    pub blow_up: Option<BlowUp>,
}

/// Default column names `x_1..x_n`.
pub fn coordinate_columns(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect()
}

/// Column names for a frame state over an `m`-dimensional ambient space.
pub fn frame_columns(m: usize, d: usize) -> Vec<String> {
    let mut cols = coordinate_columns("x", m);
    for j in 1..=d {
        cols.extend(coordinate_columns(&format!("e{j}"), m));
    }
    cols
}

impl RDEPath {
    pub fn new(times: Vec<f64>, points: Vec<Vec<f64>>, columns: Vec<String>) -> Result<Self> {
        if times.is_empty() || times.len() != points.len() {
            return Err(contract("path needs matching, non-empty times and points"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(contract("path time stamps must be strictly increasing"));
        }
        for p in &points {
            check_dim("path state dimension", columns.len(), p.len())?;
        }
        Ok(RDEPath {
            times,
            points,
            columns,
            mesh: 0.0,
            p: 0.0,
            scheme: "log-ode-rk4".into(),
            blow_up: None,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn with_columns(mut self, columns: Vec<String>) -> Result<Self> {
        check_dim("column count", self.points[0].len(), columns.len())?;
        self.columns = columns;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.columns.len()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn first(&self) -> &[f64] {
        &self.points[0]
    }

    pub fn last(&self) -> &[f64] {
        self.points.last().unwrap()
    }

    pub fn exploded(&self) -> bool {
        self.blow_up.is_some()
    }

    /// Lifetime `ζ`: the blow-up estimate, or `∞` if the solve reached its horizon.
    pub fn lifetime(&self) -> f64 {
        self.blow_up.as_ref().map_or(f64::INFINITY, |b| b.time)
    }

    /// Index of the sample at time `t`, if there is one within `1e-12`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = self.times.partition_point(|&s| s < t - 1e-12);
        (k < self.times.len() && (self.times[k] - t).abs() <= 1e-12).then_some(k)
    }

    /// Linear interpolation of the state at `t`.
    pub fn state_at(&self, t: f64) -> Result<Vec<f64>> {
        if !(t >= self.start() - 1e-12 && t <= self.end() + 1e-12) {
            return Err(contract(format!(
                "time {t} outside path range [{}, {}]",
                self.start(),
                self.end()
            )));
        }
        if let Some(k) = self.index_of(t) {
            return Ok(self.points[k].clone());
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let th = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        Ok(self.points[k]
            .iter()
            .zip(&self.points[k + 1])
            .map(|(a, b)| a + th * (b - a))
            .collect())
    }

    /// Keep only the columns in `range`.
    pub fn select(&self, range: std::ops::Range<usize>) -> RDEPath {
        RDEPath {
            times: self.times.clone(),
            points: self.points.iter().map(|p| p[range.clone()].to_vec()).collect(),
            columns: self.columns[range].to_vec(),
            mesh: self.mesh,
            p: self.p,
            scheme: self.scheme.clone(),
            blow_up: self.blow_up.clone(),
        }
    }

    /// Apply `f` to each state.
    pub fn map_states(&self, f: impl Fn(&[f64]) -> Vec<f64>, columns: Vec<String>) -> Result<RDEPath> {
        let points: Vec<Vec<f64>> = self.points.iter().map(|p| f(p)).collect();
        let mut out = RDEPath::new(self.times.clone(), points, columns)?;
        out.mesh = self.mesh;
        out.p = self.p;
        out.scheme = self.scheme.clone();
        out.blow_up = self.blow_up.clone();
        Ok(out)
    }

    /// Sup over the samples of `self` of the max-norm distance to `other`,
    /// which is interpolated where it has no sample.
    pub fn sup_distance(&self, other: &RDEPath) -> Result<f64> {
        check_dim("compared state dimension", self.state_dim(), other.state_dim())?;
        let mut worst = 0.0f64;
        for (t, p) in self.times.iter().zip(&self.points) {
            let q = other.state_at(*t)?;
            for (a, b) in p.iter().zip(&q) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    }

    /// Shift all time stamps by `dt`.
    pub fn shifted(mut self, dt: f64) -> RDEPath {
        for t in &mut self.times {
            *t += dt;
        }
        if let Some(b) = &mut self.blow_up {
            b.time += dt;
            b.last_valid_time += dt;
        }
        self
    }

    /// Append `other`, whose first sample duplicates our last one.
    pub(crate) fn append_join(&mut self, other: &RDEPath) {
        for (t, p) in other.times.iter().zip(&other.points).skip(1) {
            self.times.push(*t);
            self.points.push(p.clone());
        }
        self.blow_up = other.blow_up.clone();
        self.mesh = self.mesh.max(other.mesh);
    }

    /// CSV with header `t,<columns>,flags`. The flag is `1` on the last valid
    /// state of a path that blew up and `0` elsewhere.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push_str(",flags\n");
        let last = self.times.len() - 1;
        for (k, (t, p)) in self.times.iter().zip(&self.points).enumerate() {
            write!(out, "{t:e}").unwrap();
            for v in p {
                write!(out, ",{v:e}").unwrap();
            }
            let flag = u8::from(k == last && self.blow_up.is_some());
            writeln!(out, ",{flag}").unwrap();
        }
        out
    }

    /// JSON mirror of the CSV with metadata.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "columns": self.columns,
            "mesh": self.mesh,
            "p": self.p,
            "scheme": self.scheme,
            "blow_up": self.blow_up,
            "times": self.times,
            "points": self.points,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> RDEPath {
        RDEPath::new(
            vec![0.0, 0.5, 1.0],
            vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 0.0]],
            coordinate_columns("x", 2),
        )
        .unwrap()
    }

    #[test]
    fn interpolation_and_range() {
        let p = line();
        assert_eq!(p.state_at(0.25).unwrap(), vec![0.5, 1.0]);
        assert_eq!(p.state_at(1.0).unwrap(), vec![2.0, 0.0]);
        assert!(p.state_at(1.5).is_err());
        assert_eq!(p.lifetime(), f64::INFINITY);
    }

    #[test]
    fn csv_layout() {
        let mut p = line();
        p.blow_up = Some(BlowUp {
            time: 1.1,
            last_valid_time: 1.0,
            reason: "norm".into(),
        });
        let csv = p.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,x_1,x_2,flags"));
        assert_eq!(lines.next(), Some("0e0,0e0,1e0,0"));
        assert_eq!(lines.last(), Some("1e0,2e0,0e0,1"));
        assert_eq!(frame_columns(2, 1), vec!["x_1", "x_2", "e1_1", "e1_2"]);
    }

    #[test]
    fn rejects_bad_times() {
        let r = RDEPath::new(vec![0.0, 0.0], vec![vec![0.0], vec![1.0]], vec!["x_1".into()]);
        assert!(r.is_err());
    }
}
