//! TOML experiment configuration. Unknown keys are rejected everywhere.

use serde::{Deserialize, Serialize};
use surfdyn::linalg::Rect;
use surfdyn::{MapSpec, Point};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub parallel: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    pub map: MapSpec,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic_scan: Option<PeriodicScanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domination_certify: Option<CertifyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pliss: Option<PlissConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifolds: Option<ManifoldsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forge_tangency: Option<ForgeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distortion: Option<DistortionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<VerdictConfig>,
}

fn default_true() -> bool {
    true
}

/// The constant ladder `0 < λ < λ1 < λ2 < λ3 < 1` and the Pliss pair.
/// Missing rungs default to `λ^{1/2}`, `λ^{1/4}`, `λ^{1/8}`; `gamma1`,
/// `gamma2` default to `λ1`, `λ2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma2: Option<f64>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            lambda: 0.5,
            lambda1: None,
            lambda2: None,
            lambda3: None,
            gamma1: None,
            gamma2: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ladder {
    pub lambda: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Thresholds {
    pub fn resolve(&self) -> Result<Ladder, CliError> {
        let l = self.lambda;
        let ladder = Ladder {
            lambda: l,
            lambda1: self.lambda1.unwrap_or(l.powf(0.5)),
            lambda2: self.lambda2.unwrap_or(l.powf(0.25)),
            lambda3: self.lambda3.unwrap_or(l.powf(0.125)),
            gamma1: 0.0,
            gamma2: 0.0,
        };
        let ladder = Ladder {
            gamma1: self.gamma1.unwrap_or(ladder.lambda1),
            gamma2: self.gamma2.unwrap_or(ladder.lambda2),
            ..ladder
        };
        let chain = [
            ("thresholds.lambda", ladder.lambda),
            ("thresholds.lambda1", ladder.lambda1),
            ("thresholds.lambda2", ladder.lambda2),
            ("thresholds.lambda3", ladder.lambda3),
        ];
        for (path, v) in chain.iter().chain(&[("thresholds.gamma1", ladder.gamma1), ("thresholds.gamma2", ladder.gamma2)]) {
            if !(*v > 0.0 && *v < 1.0) {
                return Err(CliError::config(path, format!("must lie in (0, 1), got {v}")));
            }
        }
        for w in chain.windows(2) {
            if w[0].1 >= w[1].1 {
                return Err(CliError::config(w[1].0, format!("must exceed {} = {}", w[0].0, w[0].1)));
            }
        }
        if ladder.gamma1 >= ladder.gamma2 {
            return Err(CliError::config("thresholds.gamma2", "must exceed gamma1"));
        }
        Ok(ladder)
    }
}

/// `[x0, x1, y0, y1]`
pub type RegionSpec = [f64; 4];

pub fn region(path: &str, r: RegionSpec) -> Result<Rect, CliError> {
    Rect::new(r[0], r[1], r[2], r[3]).map_err(|e| CliError::config(path, e.to_string()))
}

/// Points of a forward orbit after a transient, used to sample an attractor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSample {
    pub start: [f64; 2],
    #[serde(default = "default_transient")]
    pub transient: usize,
    pub count: usize,
}

fn default_transient() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeriodicScanConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionSpec>,
    pub grid: [usize; 2],
    pub max_period: usize,
    /// Forward horizon for the per-orbit domination scan.
    pub m1: usize,
}

impl Default for PeriodicScanConfig {
    fn default() -> Self {
        PeriodicScanConfig {
            region: None,
            grid: [64, 64],
            max_period: 2,
            m1: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionSpec>,
    pub grid: [usize; 2],
    pub horizon: usize,
    pub half_width: f64,
    pub samples_per_box: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restrict_to: Option<Vec<[f64; 2]>>,
    /// Restrict to boxes visited by an attractor orbit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attractor: Option<OrbitSample>,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            region: None,
            grid: [256, 256],
            horizon: 1,
            half_width: 0.5,
            samples_per_box: 2,
            restrict_to: None,
            attractor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlissConfig {
    /// Explicit norm sequence; otherwise `‖Df|E‖` along `orbit`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norms: Option<Vec<f64>>,
    pub orbit: OrbitSample,
    /// Finite-time horizon for the splitting along the orbit.
    pub splitting_horizon: usize,
    /// Map-level bound `A`; defaults to the largest norm.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomPliss>,
}

impl Default for PlissConfig {
    fn default() -> Self {
        PlissConfig {
            norms: None,
            orbit: OrbitSample {
                start: [0.1, 0.1],
                transient: 100,
                count: 60,
            },
            splitting_horizon: 20,
            a_bound: None,
            random: None,
        }
    }
}

/// Random sequences over a finite alphabet, seeded by the run seed; only
/// sequences satisfying the hypothesis are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomPliss {
    pub count: usize,
    pub length: usize,
    pub alphabet: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManifoldsConfig {
    pub orbit_seed: [f64; 2],
    pub period: usize,
    pub arclength: f64,
    pub seed_radius: f64,
    pub h_max: f64,
    pub alpha_max: f64,
    pub max_points: usize,
    pub tangency_tol: f64,
}

impl Default for ManifoldsConfig {
    fn default() -> Self {
        ManifoldsConfig {
            orbit_seed: [0.001, 0.001],
            period: 1,
            arclength: 3.0,
            seed_radius: 0.05,
            h_max: 1e-3,
            alpha_max: 0.2,
            max_points: 1_000_000,
            tangency_tol: surfdyn::manifolds::DEFAULT_TANGENCY_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForgeConfig {
    pub orbit_seed: [f64; 2],
    pub period: usize,
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x1: Option<f64>,
    pub c1_samples: usize,
    pub curve_samples: usize,
}

impl Default for ForgeConfig {
    fn default() -> Self {
        ForgeConfig {
            orbit_seed: [0.01, 0.01],
            period: 1,
            epsilon: 0.1,
            x1: None,
            c1_samples: 512,
            curve_samples: 401,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistortionConfig {
    pub orbit_seed: [f64; 2],
    pub period: usize,
    /// Total arclength of the grown unstable manifold.
    pub arclength: f64,
    pub seed_radius: f64,
    /// Arclength window of `J` measured from the saddle along one branch.
    pub segment: [f64; 2],
    pub n: usize,
    pub stable_seed_length: f64,
    pub stable_steps: usize,
}

impl Default for DistortionConfig {
    fn default() -> Self {
        DistortionConfig {
            orbit_seed: [0.6, 0.2],
            period: 1,
            arclength: 2.0,
            seed_radius: 0.05,
            segment: [0.2, 0.3],
            n: 10,
            stable_seed_length: 1e-3,
            stable_steps: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerdictConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 2]>>,
    pub orbit: OrbitSample,
    pub horizon: usize,
    pub splitting_horizon: usize,
}

impl Default for VerdictConfig {
    fn default() -> Self {
        VerdictConfig {
            points: None,
            orbit: OrbitSample {
                start: [0.1, 0.1],
                transient: 100,
                count: 16,
            },
            horizon: 30,
            splitting_horizon: 20,
        }
    }
}

pub fn point(p: [f64; 2]) -> Point {
    Point::new(p[0], p[1])
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::config("<root>", e.to_string()))?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config {
                path: if path == "." { "<root>".into() } else { path },
                message: e.into_inner().message().trim().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::config("<root>", e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        self.thresholds.resolve()?;
        Ok(())
    }
}
