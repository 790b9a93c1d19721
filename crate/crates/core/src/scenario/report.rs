//! Run reports and output artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::rde::path::RDEPath;
use crate::scenario::config::OutputFormat;

/// How a measured value is compared with its tolerance.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Relation {
    /// `measured < tolerance`.
    Below,
    /// `measured > tolerance`.
    Above,
    /// `|measured − target| < tolerance`.
    Near { target: f64 },
    /// A boolean property; `measured` is 1 or 0.
    Holds,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, measured: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            measured,
            tolerance,
            relation: Relation::Below,
            pass: measured < tolerance,
        }
    }

    pub fn above(name: impl Into<String>, measured: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            measured,
            tolerance,
            relation: Relation::Above,
            pass: measured > tolerance,
        }
    }

    pub fn near(name: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            measured,
            tolerance,
            relation: Relation::Near { target },
            pass: (measured - target).abs() < tolerance,
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Check {
        Check {
            name: name.into(),
            measured: f64::from(u8::from(ok)),
            tolerance: 0.0,
            relation: Relation::Holds,
            pass: ok,
        }
    }

    fn describe(&self) -> String {
        match &self.relation {
            Relation::Below => format!("{:e} < {:e}", self.measured, self.tolerance),
            Relation::Above => format!("{:e} > {:e}", self.measured, self.tolerance),
            Relation::Near { target } => format!(
                "{:e} within {:e} of {:e}",
                self.measured, self.tolerance, target
            ),
            Relation::Holds => (if self.pass { "holds" } else { "violated" }).to_string(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub checks: Vec<Check>,
    pub elapsed_ms: u128,
    /// Solver steps per unit time used by the main solve.
    pub steps_per_unit: usize,
    pub seed: u64,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    /// Human-readable summary, one line per check.
    pub fn summary(&self) -> String {
        let mut out = format!("scenario {}\n", self.scenario);
        for c in &self.checks {
            writeln!(
                out,
                "  [{}] {}: {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.describe()
            )
            .unwrap();
        }
        for n in &self.notes {
            writeln!(out, "  note: {n}").unwrap();
        }
        writeln!(
            out,
            "  {} ({} ms)",
            if self.pass() { "all checks passed" } else { "some checks failed" },
            self.elapsed_ms
        )
        .unwrap();
        out
    }

    /// Checks as CSV; omits timing so the file is reproducible.
    pub fn checks_csv(&self) -> String {
        let mut out = String::from("check,measured,tolerance,relation,target,pass\n");
        for c in &self.checks {
            let (rel, target) = match &c.relation {
                Relation::Below => ("below", String::new()),
                Relation::Above => ("above", String::new()),
                Relation::Near { target } => ("near", format!("{target:e}")),
                Relation::Holds => ("holds", String::new()),
            };
            writeln!(
                out,
                "{},{:e},{:e},{rel},{target},{}",
                c.name,
                c.measured,
                c.tolerance,
                u8::from(c.pass)
            )
            .unwrap();
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["pass"] = serde_json::Value::Bool(self.pass());
        v
    }
}

/// A table with numeric cells; `None` is written as `NA` in CSV and `null` in JSON.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Table {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Some(v) => format!("{v:e}"),
                    None => "NA".into(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: serde_json::Map<String, serde_json::Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(k, v)| (k.clone(), serde_json::json!(v)))
                    .collect();
                serde_json::Value::Object(obj)
            })
            .collect();
        serde_json::json!({ "columns": self.columns, "rows": rows })
    }
}

#[derive(Clone, Debug)]
pub enum ArtifactData {
    Path(RDEPath),
    Table(Table),
    /// Always written as JSON.
    Json(serde_json::Value),
}

#[derive(Clone, Debug)]
pub struct Artifact {
    pub name: String,
    pub data: ArtifactData,
}

impl Artifact {
    pub fn path(name: impl Into<String>, p: RDEPath) -> Artifact {
        Artifact {
            name: name.into(),
            data: ArtifactData::Path(p),
        }
    }

    pub fn table(name: impl Into<String>, t: Table) -> Artifact {
        Artifact {
            name: name.into(),
            data: ArtifactData::Table(t),
        }
    }

    pub fn json(name: impl Into<String>, v: serde_json::Value) -> Artifact {
        Artifact {
            name: name.into(),
            data: ArtifactData::Json(v),
        }
    }

    /// File name and contents in `format`.
    pub fn render(&self, format: OutputFormat) -> (String, String) {
        let pretty = |v: &serde_json::Value| serde_json::to_string_pretty(v).expect("json") + "\n";
        match (&self.data, format) {
            (ArtifactData::Path(p), OutputFormat::Csv) => (format!("{}.csv", self.name), p.to_csv()),
            (ArtifactData::Path(p), OutputFormat::Json) => {
                (format!("{}.json", self.name), pretty(&p.to_json()))
            }
            (ArtifactData::Table(t), OutputFormat::Csv) => (format!("{}.csv", self.name), t.to_csv()),
            (ArtifactData::Table(t), OutputFormat::Json) => {
                (format!("{}.json", self.name), pretty(&t.to_json()))
            }
            (ArtifactData::Json(v), _) => (format!("{}.json", self.name), pretty(v)),
        }
    }
}

/// Write artifacts plus `report.json` and `checks.csv` into `dir/<scenario>/`.
/// Returns the written paths.
pub fn write_outputs(
    dir: &Path,
    report: &RunReport,
    artifacts: &[Artifact],
    format: OutputFormat,
) -> Result<Vec<PathBuf>> {
    let target = dir.join(&report.scenario);
    fs::create_dir_all(&target)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let p = target.join(name);
        fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    for a in artifacts {
        let (name, body) = a.render(format);
        put(name, body)?;
    }
    put("checks.csv".into(), report.checks_csv())?;
    put(
        "report.json".into(),
        serde_json::to_string_pretty(&report.to_json())? + "\n",
    )?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_relations() {
        assert!(Check::below("a", 1e-5, 1e-4).pass);
        assert!(!Check::below("a", f64::NAN, 1e-4).pass);
        assert!(Check::above("a", f64::INFINITY, 1.0).pass);
        assert!(Check::near("s", -0.9, -1.0, 0.3).pass);
        assert!(!Check::holds("h", false).pass);
    }

    #[test]
    fn table_formats() {
        let mut t = Table::new(&["n", "err"]);
        t.push(vec![Some(8.0), None]);
        assert_eq!(t.to_csv(), "n,err\n8e0,NA\n");
        assert_eq!(t.to_json()["rows"][0]["err"], serde_json::Value::Null);
    }
}
