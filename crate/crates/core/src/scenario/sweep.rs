//! Convergence sweeps: one error per parameter value, with a fitted log-log slope.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::roughpath::fit_slope;
use crate::scenario::config::{ScenarioConfig, ScenarioName, SweepParameter};
use crate::scenario::report::Table;
use crate::scenario::runner::{blow_up_time, spinning_run};

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub parameter: f64,
    pub error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub scenario: String,
    pub parameter: SweepParameter,
    pub rows: Vec<SweepRow>,
    /// Slope of `ln error` against `ln parameter`; `None` for a single row.
    pub slope: Option<f64>,
}

impl SweepReport {
    /// Columns `parameter,error,local_slope,fitted_slope`, `NA` where undefined.
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["parameter", "error", "local_slope", "fitted_slope"]);
        for (k, r) in self.rows.iter().enumerate() {
            let local = (k > 0).then(|| {
                let p = &self.rows[k - 1];
                (r.error.ln() - p.error.ln()) / (r.parameter.ln() - p.parameter.ln())
            });
            t.push(vec![Some(r.parameter), Some(r.error), local, self.slope]);
        }
        t
    }
}

fn unsupported(name: ScenarioName, p: SweepParameter) -> Error {
    Error::Usage(format!(
        "scenario {name} does not support a {} sweep; supported: spinning_line_bracket_flow (n, mesh), \
         sphere_horizontal_lift (mesh), geodesic_recovery (mesh), blow_up_detection (mesh)",
        match p {
            SweepParameter::N => "n",
            SweepParameter::Mesh => "mesh",
        }
    ))
}

/// The error a scenario reports for one parameter value.
fn error_at(cfg: &ScenarioConfig, name: ScenarioName, param: SweepParameter, value: f64) -> Result<f64> {
    let mut c = cfg.clone();
    c.sweep = None;
    if param == SweepParameter::Mesh {
        let mut s = c.solver.clone().unwrap_or_default();
        s.steps_per_unit = value as usize;
        c.solver = Some(s);
    }
    let opts = c.solver.clone().unwrap_or_else(|| crate::rde::integrator::SolverOptions::with_mesh(1 << 12));
    match (name, param) {
        (ScenarioName::SpinningLineBracketFlow, _) => {
            let n = match param {
                SweepParameter::N => value as u32,
                SweepParameter::Mesh => c.n_values.as_ref().map_or(8, |v| v[0]),
            };
            let x0 = c.initial.clone().unwrap_or_else(|| vec![0.0, 0.0]);
            Ok(spinning_run(n, c.signal_mesh.unwrap_or(1e-4), &opts, &x0)?.error)
        }
        (ScenarioName::SphereHorizontalLift, SweepParameter::Mesh) => {
            named_measure(&c, "sup_distance_to_H1_plus_omega_V12")
        }
        (ScenarioName::GeodesicRecovery, SweepParameter::Mesh) => {
            named_measure(&c, "sup_distance_to_predicted_flow")
        }
        (ScenarioName::BlowUpDetection, SweepParameter::Mesh) => {
            let x0 = c.initial.as_ref().map_or(1.0, |v| v[0]);
            let (_, t) = blow_up_time(x0, &opts)?;
            Ok(t.map_or(f64::INFINITY, |t| (t - 1.0 / x0).abs()))
        }
        _ => Err(unsupported(name, param)),
    }
}

fn named_measure(cfg: &ScenarioConfig, check: &str) -> Result<f64> {
    let out = crate::scenario::runner::run_scenario(cfg)?;
    out.report
        .checks
        .iter()
        .find(|c| c.name == check)
        .map(|c| c.measured)
        .ok_or_else(|| Error::Contract(format!("scenario did not report {check}")))
}

/// Run the sweep described in `cfg.sweep`; rows are computed in parallel.
pub fn convergence_sweep(cfg: &ScenarioConfig) -> Result<SweepReport> {
    let name = cfg.name()?;
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Usage("config has no sweep section".into()))?;
    if spec.values.is_empty() {
        return Err(Error::Usage("sweep values must not be empty".into()));
    }
    if spec.parameter == SweepParameter::N && name != ScenarioName::SpinningLineBracketFlow {
        return Err(unsupported(name, spec.parameter));
    }
    for (i, v) in spec.values.iter().enumerate() {
        if v.fract() != 0.0 || *v < 1.0 || *v > f64::from(1u32 << 22) {
            return Err(Error::Config {
                path: format!("sweep.values[{i}]"),
                message: "values must be integers between 1 and 2^22".into(),
            });
        }
    }
    let errors: Vec<f64> = spec
        .values
        .par_iter()
        .map(|&v| error_at(cfg, name, spec.parameter, v))
        .collect::<Result<_>>()?;
    let rows: Vec<SweepRow> = spec
        .values
        .iter()
        .zip(errors)
        .map(|(&parameter, error)| SweepRow { parameter, error })
        .collect();
    let slope = (rows.len() >= 2).then(|| {
        let xs: Vec<f64> = rows.iter().map(|r| r.parameter.ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.error.ln()).collect();
        fit_slope(&xs, &ys)
    });
    Ok(SweepReport {
        scenario: name.as_str().into(),
        parameter: spec.parameter,
        rows,
        slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sweep_is_usage_error() {
        let cfg = ScenarioConfig::from_json(
            r#"{"scenario":"blow_up_detection","sweep":{"parameter":"mesh","values":[]}}"#,
        )
        .unwrap();
        assert!(matches!(convergence_sweep(&cfg), Err(Error::Usage(_))));
    }

    #[test]
    fn single_row_has_no_slope() {
        let cfg = ScenarioConfig::from_json(
            r#"{"scenario":"blow_up_detection","sweep":{"parameter":"mesh","values":[64]}}"#,
        )
        .unwrap();
        let rep = convergence_sweep(&cfg).unwrap();
        assert_eq!(rep.slope, None);
        let csv = rep.table().to_csv();
        assert!(csv.lines().nth(1).unwrap().ends_with(",NA,NA"), "{csv}");
    }

    #[test]
    fn unsupported_parameter() {
        let cfg = ScenarioConfig::from_json(
            r#"{"scenario":"cartan_roundtrip","sweep":{"parameter":"mesh","values":[8]}}"#,
        )
        .unwrap();
        assert!(matches!(convergence_sweep(&cfg), Err(Error::Usage(_))));
    }
}
