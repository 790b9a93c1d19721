//! Scenario configuration documents.
//!
//! A config is a single JSON object. Unknown keys are rejected and every
//! error carries the path of the offending field.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::manifold::{
    Euclidean, Hyperboloid, ProductManifold, SharedManifold, SpecialOrthogonal3, Sphere,
};
use crate::rde::integrator::SolverOptions;
use crate::roughpath::{
    lift_smooth_path, log_linear, pure_area, spinning_line, SharedDriver, ValidationOptions,
    DEFAULT_P,
};
use crate::tensor::TruncatedTensor;

/// The bundled scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    SpinningLineBracketFlow,
    SphereHorizontalLift,
    GeodesicRecovery,
    CartanRoundtrip,
    CanonicalRepCheck,
    LieGroupNoExplosion,
    PureRoughPathLift,
    BlowUpDetection,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 8] = [
        ScenarioName::SpinningLineBracketFlow,
        ScenarioName::SphereHorizontalLift,
        ScenarioName::GeodesicRecovery,
        ScenarioName::CartanRoundtrip,
        ScenarioName::CanonicalRepCheck,
        ScenarioName::LieGroupNoExplosion,
        ScenarioName::PureRoughPathLift,
        ScenarioName::BlowUpDetection,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::SpinningLineBracketFlow => "spinning_line_bracket_flow",
            ScenarioName::SphereHorizontalLift => "sphere_horizontal_lift",
            ScenarioName::GeodesicRecovery => "geodesic_recovery",
            ScenarioName::CartanRoundtrip => "cartan_roundtrip",
            ScenarioName::CanonicalRepCheck => "canonical_rep_check",
            ScenarioName::LieGroupNoExplosion => "lie_group_no_explosion",
            ScenarioName::PureRoughPathLift => "pure_rough_path_lift",
            ScenarioName::BlowUpDetection => "blow_up_detection",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ScenarioName::SpinningLineBracketFlow => {
                "ODEs driven by spinning signals converge to the bracket flow"
            }
            ScenarioName::SphereHorizontalLift => {
                "spinning straight line on the orthonormal frame bundle of a surface"
            }
            ScenarioName::GeodesicRecovery => "level-4 log-linear driver on the frame bundle",
            ScenarioName::CartanRoundtrip => "development, anti-development and holonomy",
            ScenarioName::CanonicalRepCheck => "driver over the model space reproduces lifts",
            ScenarioName::LieGroupNoExplosion => "left-invariant equation on SO(3)",
            ScenarioName::PureRoughPathLift => "pure area driver with commuting and bracket fields",
            ScenarioName::BlowUpDetection => "explosion of x^2 d/dx",
        }
    }

    pub fn valid_names() -> String {
        ScenarioName::ALL
            .iter()
            .map(|s| s.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ScenarioName::ALL
            .iter()
            .copied()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown scenario `{s}`; valid scenarios: {}",
                    ScenarioName::valid_names()
                ))
            })
    }
}

fn default_radius() -> f64 {
    1.0
}

/// `{"manifold": "sphere", "radius": 1.0}` and friends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "manifold", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldSpec {
    Sphere {
        #[serde(default = "default_radius")]
        radius: f64,
    },
    Hyperboloid {
        #[serde(default = "default_radius")]
        radius: f64,
    },
    So3 {},
    Plane {},
    Euclidean {
        dim: usize,
    },
    Product {
        factors: Vec<ManifoldSpec>,
    },
}

impl ManifoldSpec {
    pub fn build(&self) -> Result<SharedManifold> {
        self.build_at("manifold")
    }

    fn build_at(&self, path: &str) -> Result<SharedManifold> {
        let bad = |field: &str, message: &str| Error::Config {
            path: format!("{path}.{field}"),
            message: message.into(),
        };
        Ok(match self {
            ManifoldSpec::Sphere { radius } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(bad("radius", "must be positive and finite"));
                }
                Arc::new(Sphere::new(*radius))
            }
            ManifoldSpec::Hyperboloid { radius } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(bad("radius", "must be positive and finite"));
                }
                Arc::new(Hyperboloid::new(*radius))
            }
            ManifoldSpec::So3 {} => Arc::new(SpecialOrthogonal3),
            ManifoldSpec::Plane {} => Arc::new(Euclidean::plane()),
            ManifoldSpec::Euclidean { dim } => {
                if *dim == 0 || *dim > 64 {
                    return Err(bad("dim", "must be between 1 and 64"));
                }
                Arc::new(Euclidean::new(*dim))
            }
            ManifoldSpec::Product { factors } => {
                if factors.is_empty() {
                    return Err(bad("factors", "must not be empty"));
                }
                let built = factors
                    .iter()
                    .enumerate()
                    .map(|(i, f)| f.build_at(&format!("{path}.factors[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                Arc::new(ProductManifold::new(built)?)
            }
        })
    }
}

/// Driver description, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriverSpec {
    /// Canonical lift of the piecewise linear path through `points`.
    LiftSmooth {
        times: Vec<f64>,
        points: Vec<Vec<f64>>,
        #[serde(default)]
        p: Option<f64>,
    },
    /// Zero first level, level 2 equal to `(t − s) · area`.
    PureArea {
        area: Vec<Vec<f64>>,
        #[serde(default)]
        horizon: Option<f64>,
    },
    /// First level `(t − s) · direction`, area `(t − s) · area`.
    SpinningLine {
        direction: Vec<f64>,
        area: Vec<Vec<f64>>,
        #[serde(default)]
        horizon: Option<f64>,
    },
    /// `exp((t − s) · generator)` for a Lie element in tensor JSON.
    LogLinear {
        generator: TruncatedTensor,
        #[serde(default)]
        p: Option<f64>,
        #[serde(default)]
        horizon: Option<f64>,
    },
}

fn check_horizon(h: Option<f64>) -> Result<Option<f64>> {
    match h {
        Some(v) if !(v > 0.0 && v.is_finite()) => Err(Error::Config {
            path: "driver.horizon".into(),
            message: "must be positive and finite".into(),
        }),
        other => Ok(other),
    }
}

fn config_err(path: &str, e: Error) -> Error {
    match e {
        Error::Config { .. } | Error::Usage(_) => e,
        other => Error::Config {
            path: path.into(),
            message: other.to_string(),
        },
    }
}

impl DriverSpec {
    pub fn build(&self) -> Result<SharedDriver> {
        let p_of = |p: Option<f64>, default: f64| -> Result<f64> {
            match p {
                Some(v) if !(v >= 1.0 && v.is_finite()) => Err(Error::Config {
                    path: "driver.p".into(),
                    message: "must be finite and at least 1".into(),
                }),
                Some(v) => Ok(v),
                None => Ok(default),
            }
        };
        Ok(match self {
            DriverSpec::LiftSmooth { times, points, p } => Arc::new(
                lift_smooth_path(times.clone(), points.clone(), p_of(*p, DEFAULT_P)?)
                    .map_err(|e| config_err("driver.points", e))?,
            ),
            DriverSpec::PureArea { area, horizon } => {
                let mut x = pure_area(area).map_err(|e| config_err("driver.area", e))?;
                if let Some(h) = check_horizon(*horizon)? {
                    x = x.with_horizon(h);
                }
                Arc::new(x)
            }
            DriverSpec::SpinningLine {
                direction,
                area,
                horizon,
            } => {
                let mut x =
                    spinning_line(direction, area).map_err(|e| config_err("driver.area", e))?;
                if let Some(h) = check_horizon(*horizon)? {
                    x = x.with_horizon(h);
                }
                Arc::new(x)
            }
            DriverSpec::LogLinear {
                generator,
                p,
                horizon,
            } => {
                let default_p = generator.level() as f64 + 0.5;
                let mut x = log_linear(generator, p_of(*p, default_p)?)
                    .map_err(|e| config_err("driver.generator", e))?;
                if let Some(h) = check_horizon(*horizon)? {
                    x = x.with_horizon(h);
                }
                Arc::new(x)
            }
        })
    }

    /// Parse a driver spec on its own, with path diagnostics.
    pub fn from_json(s: &str) -> Result<DriverSpec> {
        parse_with_path(s)
    }
}

/// Named vector-field presets for scenarios that accept alternatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldPreset {
    /// `V_1 = ∂_x`, `V_2 = x ∂_y` on the plane.
    Heisenberg,
    /// `V_1 = ∂_x`, `V_2 = ∂_y` on the plane.
    Commuting,
    /// Rotation generators `x ↦ ε_i × x` on a sphere.
    Rotations,
    /// `Q ↦ Q A_i` on SO(3).
    LeftInvariant,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Usage(format!("unknown format `{other}`; use csv or json"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: Option<String>,
    pub format: OutputFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Spinning-signal frequency parameter.
    N,
    /// Solver steps per unit time.
    Mesh,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// A full scenario configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    #[serde(default)]
    pub manifold: Option<ManifoldSpec>,
    #[serde(default)]
    pub driver: Option<DriverSpec>,
    #[serde(default)]
    pub fields: Option<FieldPreset>,
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    #[serde(default)]
    pub solver: Option<SolverOptions>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    /// Frequencies of the spinning signals.
    #[serde(default)]
    pub n_values: Option<Vec<u32>>,
    /// Sampling mesh of the spinning signals.
    #[serde(default)]
    pub signal_mesh: Option<f64>,
    /// Polar angles of the holonomy loops.
    #[serde(default)]
    pub polar_angles: Option<Vec<f64>>,
    /// Number of samples of the round-trip path.
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub validation: Option<ValidationOptions>,
}

pub(crate) fn parse_with_path<T: for<'de> Deserialize<'de>>(s: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(s);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config {
            path: if path.is_empty() { ".".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })?;
    de.end().map_err(|e| Error::Config {
        path: ".".into(),
        message: e.to_string(),
    })?;
    Ok(value)
}

impl ScenarioConfig {
    /// Parse and validate a config document.
    pub fn from_json(s: &str) -> Result<ScenarioConfig> {
        let cfg: ScenarioConfig = parse_with_path(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// A config with defaults for `name`.
    pub fn for_scenario(name: ScenarioName) -> ScenarioConfig {
        ScenarioConfig {
            scenario: name.as_str().into(),
            manifold: None,
            driver: None,
            fields: None,
            initial: None,
            solver: None,
            seed: 0,
            output: OutputSpec::default(),
            sweep: None,
            n_values: None,
            signal_mesh: None,
            polar_angles: None,
            samples: None,
            validation: None,
        }
    }

    pub fn name(&self) -> Result<ScenarioName> {
        self.scenario.parse()
    }

    fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: &str| {
            Err(Error::Config {
                path: path.into(),
                message: message.into(),
            })
        };
        if let Some(s) = &self.solver {
            if s.steps_per_unit == 0 || s.steps_per_unit > 1 << 22 {
                return bad("solver.steps_per_unit", "must be between 1 and 2^22");
            }
            if s.substeps == 0 || s.substeps > 1024 {
                return bad("solver.substeps", "must be between 1 and 1024");
            }
            if !(s.blow_up_norm > 0.0) {
                return bad("solver.blow_up_norm", "must be positive");
            }
            if let Some(h) = s.horizon {
                if !(h > 0.0 && h.is_finite()) {
                    return bad("solver.horizon", "must be positive and finite");
                }
            }
        }
        if let Some(ns) = &self.n_values {
            if ns.is_empty() || ns.iter().any(|&n| n == 0 || n > 1024) {
                return bad("n_values", "must be a non-empty list of integers in 1..=1024");
            }
        }
        if let Some(m) = self.signal_mesh {
            if !(m > 0.0 && m <= 0.1) {
                return bad("signal_mesh", "must lie in (0, 0.1]");
            }
        }
        if let Some(a) = &self.polar_angles {
            if a.is_empty() || a.iter().any(|t| !(*t > 0.0 && *t < std::f64::consts::PI)) {
                return bad("polar_angles", "angles must lie in (0, π)");
            }
        }
        if let Some(n) = self.samples {
            if !(2..=1 << 20).contains(&n) {
                return bad("samples", "must be between 2 and 2^20");
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return bad("sweep.values", "values must be positive and finite");
            }
        }
        if let Some(init) = &self.initial {
            if init.iter().any(|v| !v.is_finite()) {
                return bad("initial", "values must be finite");
            }
        }
        if let Some(m) = &self.manifold {
            m.build()?;
        }
        if let Some(d) = &self.driver {
            d.build()?;
        }
        Ok(())
    }

    pub fn solver_or(&self, default: SolverOptions) -> SolverOptions {
        self.solver.clone().unwrap_or(default)
    }
}

/// Config for `validate-driver`: a driver plus validation options and grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverCheckConfig {
    pub driver: DriverSpec,
    #[serde(default)]
    pub validation: ValidationOptions,
    /// Number of grid points on `[0, horizon]`.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_grid_points() -> usize {
    257
}

impl DriverCheckConfig {
    pub fn from_json(s: &str) -> Result<DriverCheckConfig> {
        let cfg: DriverCheckConfig = parse_with_path(s)?;
        if !(3..=1 << 16).contains(&cfg.grid_points) {
            return Err(Error::Config {
                path: "grid_points".into(),
                message: "must be between 3 and 65536".into(),
            });
        }
        cfg.driver.build()?;
        Ok(cfg)
    }
}
