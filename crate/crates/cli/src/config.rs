//! Job configuration: one JSON document per run.

use std::path::Path;
use std::sync::Arc;

use nctorus::connection::{Connection, Convention, ProjectiveModule};
use nctorus::matrix::{TorusMatrix, DEFAULT_MAX_ITER, DEFAULT_TOL};
use nctorus::random;
use nctorus::serial::{self, MatrixJson, ModuleJson, ProjectionJson};
use nctorus::torus::DEFAULT_EPS_DROP;
use nctorus::{DeformationMatrix, DescentParams, TruncationMode, TruncationPolicy};
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

/// Largest denominator tried when flagging rational deformation entries.
pub const RATIONAL_DENOMINATOR: u32 = 64;
pub const DEFAULT_SAMPLES: usize = 4;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationJson {
    pub r_max: i32,
    pub mode: TruncationMode,
    #[serde(default = "default_eps")]
    pub eps_drop: f64,
}

fn default_eps() -> f64 {
    DEFAULT_EPS_DROP
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    #[serde(default = "default_radius")]
    pub radius: i32,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_radius() -> i32 {
    1
}

fn default_scale() -> f64 {
    0.5
}

/// Explicit potentials, a seeded random draw, or (neither) the
/// Grassmannian connection.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionSpec {
    pub convention: Convention,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potentials: Option<Vec<MatrixJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub n: usize,
    pub theta: Vec<f64>,
    pub truncation: TruncationJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub module: Option<ModuleJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection: Option<ConnectionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotent: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compatibility_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<DescentParams>,
}

/// Command-line overrides.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

/// A parsed config with the algebra set up; module and connection are
/// built on demand because `validate` must inspect them before the
/// constructors' checks run.
#[derive(Debug, Clone)]
pub struct Job {
    pub config: JobConfig,
    pub theta: Arc<DeformationMatrix>,
    pub policy: TruncationPolicy,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub samples: usize,
    pub params: DescentParams,
}

pub fn read(path: &Path, overrides: Overrides) -> Result<Job, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, overrides)
}

pub fn parse(text: &str, overrides: Overrides) -> Result<Job, Failure> {
    let config: JobConfig = serde_json::from_str(text).map_err(|e| Failure::Config(format!("invalid config: {e}")))?;
    let theta = serial::theta_from_json(config.n, &config.theta).map_err(Failure::config)?;
    let t = &config.truncation;
    let policy = TruncationPolicy::with_eps(t.r_max, t.mode, t.eps_drop).map_err(Failure::config)?;
    let tol = overrides.tol.or(config.tol).unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Failure::Config(format!("tolerance must be positive, got {tol}")));
    }
    let seed = overrides.seed.or(config.seed).unwrap_or(0);
    let mut params = config.optimize.unwrap_or_default();
    params.seed = seed;
    params.validate().map_err(Failure::config)?;
    let max_iter = config.max_iter.unwrap_or(DEFAULT_MAX_ITER);
    if max_iter == 0 {
        return Err(Failure::Config("max_iter must be positive".into()));
    }
    if let Some(spec) = &config.connection {
        if spec.potentials.is_some() && spec.random.is_some() {
            return Err(Failure::Config("connection takes either potentials or random, not both".into()));
        }
        if let Some(r) = &spec.random {
            if r.radius < 0 || r.radius > policy.r_max || !(r.scale.is_finite() && r.scale >= 0.0) {
                return Err(Failure::Config(format!(
                    "random potentials need 0 <= radius <= r_max and a finite scale >= 0, got radius {} scale {}",
                    r.radius, r.scale
                )));
            }
        }
    }
    Ok(Job {
        samples: config.compatibility_samples.unwrap_or(DEFAULT_SAMPLES),
        theta: Arc::new(theta),
        policy,
        tol,
        max_iter,
        seed,
        params,
        config,
    })
}

impl Job {
    pub fn n(&self) -> usize {
        self.theta.n()
    }

    pub fn rational_warning(&self) -> Option<String> {
        self.theta.looks_rational(RATIONAL_DENOMINATOR).then(|| {
            format!(
                "every deformation entry is rational with denominator <= {RATIONAL_DENOMINATOR}; \
                 the trace need not be the unique one"
            )
        })
    }

    fn module_json(&self) -> ModuleJson {
        self.config.module.clone().unwrap_or(ModuleJson {
            q: 1,
            p: ProjectionJson::Named("free".into()),
        })
    }

    /// The projection matrix, unchecked.
    pub fn projection(&self) -> Result<TorusMatrix, Failure> {
        let json = self.module_json();
        match &json.p {
            ProjectionJson::Named(s) if s == "free" && json.q > 0 => {
                Ok(TorusMatrix::identity(&self.theta, self.policy, json.q))
            }
            ProjectionJson::Matrix(m) if m.q == json.q => {
                serial::matrix_from_json(&self.theta, self.policy, m).map_err(Failure::config)
            }
            _ => serial::module_from_json(&self.theta, self.policy, &json)
                .map(|m| m.p().clone())
                .map_err(Failure::config),
        }
    }

    pub fn module(&self) -> Result<ProjectiveModule, Failure> {
        Ok(ProjectiveModule::new(self.projection()?)?)
    }

    pub fn convention(&self) -> Convention {
        self.config
            .connection
            .as_ref()
            .map(|c| c.convention)
            .unwrap_or(Convention::Dynamical)
    }

    /// Potentials as configured (explicit, random or zero), unchecked.
    pub fn potentials(&self, module: &ProjectiveModule) -> Result<Vec<TorusMatrix>, Failure> {
        let n = self.n();
        let q = module.q();
        let spec = self.config.connection.as_ref();
        if let Some(list) = spec.and_then(|s| s.potentials.as_ref()) {
            if list.len() != n {
                return Err(Failure::Config(format!("{} potentials given for n = {n}", list.len())));
            }
            return list
                .iter()
                .map(|m| {
                    if m.q != q {
                        return Err(Failure::Config(format!("potential is {}x{} but the module has q = {q}", m.q, m.q)));
                    }
                    serial::matrix_from_json(&self.theta, self.policy, m).map_err(Failure::config)
                })
                .collect();
        }
        if let Some(r) = spec.and_then(|s| s.random.as_ref()) {
            let mut rng = random::rng(self.seed);
            let c = random::dynamical_connection(&mut rng, module, r.radius, r.scale)?;
            let c = match self.convention() {
                Convention::Dynamical => c,
                Convention::Spectral => c.phi_map()?,
            };
            return Ok(c.potentials().to_vec());
        }
        Ok(vec![TorusMatrix::zeros(&self.theta, self.policy, q); n])
    }

    pub fn connection(&self) -> Result<Connection, Failure> {
        let module = self.module()?;
        let potentials = self.potentials(&module)?;
        Ok(Connection::new(module, self.convention(), potentials)?)
    }

    pub fn idempotent(&self) -> Result<TorusMatrix, Failure> {
        let json = self
            .config
            .idempotent
            .as_ref()
            .ok_or_else(|| Failure::Config("make-projection needs an \"idempotent\" matrix".into()))?;
        serial::matrix_from_json(&self.theta, self.policy, json).map_err(Failure::config)
    }

    /// A config document reproducing `c`, suitable as input to `ym`.
    pub fn config_for(&self, c: &Connection) -> JobConfig {
        JobConfig {
            n: self.config.n,
            theta: self.theta.row_major().to_vec(),
            truncation: self.config.truncation.clone(),
            module: Some(serial::module_to_json(c.module())),
            connection: Some(ConnectionSpec {
                convention: c.convention(),
                potentials: Some(c.potentials().iter().map(serial::matrix_to_json).collect()),
                random: None,
            }),
            idempotent: None,
            tol: self.config.tol,
            max_iter: self.config.max_iter,
            seed: Some(self.seed),
            compatibility_samples: self.config.compatibility_samples,
            optimize: self.config.optimize,
        }
    }
}
