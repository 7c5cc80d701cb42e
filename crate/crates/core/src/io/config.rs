use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::loss::LossWeights;
use crate::optim::TrainConfig;
use crate::pde::{manufactured_case, Inclusion, Phantom, PhantomId, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Forward,
    Inverse,
}

/// What the run reconstructs.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Phantom(PhantomId),
    CustomPhantom {
        background: f64,
        inclusions: Vec<Inclusion>,
    },
    /// A manufactured case id such as `stratified` or `harmonic-2`.
    Case(String),
}

/// A fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: Problem,
    pub target: Target,
    /// Interface width of phantom conductivities.
    pub smoothing: f64,
    /// Current pattern `n` injected for phantom data.
    pub current: i32,
    pub train: TrainConfig,
    pub out: PathBuf,
    /// Cells per side of exported grids, including finite-difference references.
    pub export_resolution: usize,
    /// Cells per side of the Neumann solve that generates phantom boundary data.
    pub reference_resolution: usize,
    /// Write a checkpoint every this many epochs; 0 writes only the final one.
    pub checkpoint_every: usize,
    /// Forward-trained potential used by inverse runs.
    pub u_checkpoint: Option<PathBuf>,
    /// Constant boundary conductivity for inverse runs; the true trace when absent.
    pub sigma0: Option<f64>,
}

/// On-disk form: every key optional so that missing keys are reported by name.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: Option<Problem>,
    phantom: Option<String>,
    case: Option<String>,
    background: Option<f64>,
    smoothing: Option<f64>,
    current: Option<i32>,
    domain: Option<String>,
    out: Option<PathBuf>,
    export_resolution: Option<usize>,
    reference_resolution: Option<usize>,
    checkpoint_every: Option<usize>,
    u_checkpoint: Option<PathBuf>,
    sigma0: Option<f64>,
    layers: Option<Vec<usize>>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    lr0: Option<f64>,
    decay_factor: Option<f64>,
    decay_every: Option<usize>,
    n_interior: Option<usize>,
    n_boundary: Option<usize>,
    seed: Option<u64>,
    resample: Option<bool>,
    lambda: Option<f64>,
    mu: Option<f64>,
    k: Option<usize>,
    alpha: Option<f64>,
    beta: Option<f64>,
    p: Option<f64>,
    tv_eps: Option<f64>,
    inclusion: Option<Vec<Inclusion>>,
}

const UNIT_DISC: &str = "unit-disc";
const CUSTOM: &str = "custom";

/// 1-based line on which `key` is assigned, if any.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .map(|rest| rest.trim_start().starts_with('='))
            .unwrap_or(false)
    })
    .map(|i| i + 1)
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_at(text, s.start));
            let key = line.and_then(|l| {
                let src = text.lines().nth(l - 1)?;
                let (k, _) = src.split_once('=')?;
                Some(k.trim().to_string())
            });
            let message = e.message().trim().to_string();
            let key = key.or_else(|| {
                message
                    .strip_prefix("unknown field `")
                    .and_then(|m| m.split('`').next())
                    .map(str::to_string)
            });
            Error::Config { key, line, message }
        })?;
        let fail = |key: &str, message: String| Error::Config {
            key: Some(key.to_string()),
            line: line_of(text, key),
            message,
        };
        let missing = |key: &str| Error::Config {
            key: Some(key.to_string()),
            line: None,
            message: "missing required key".into(),
        };

        let problem = raw.problem.ok_or_else(|| missing("problem"))?;
        let target = match (&raw.phantom, &raw.case) {
            (Some(_), Some(_)) => {
                return Err(fail("case", "give either `phantom` or `case`, not both".into()))
            }
            (None, None) => return Err(missing("phantom")),
            (Some(p), None) if p == CUSTOM => Target::CustomPhantom {
                background: raw.background.ok_or_else(|| missing("background"))?,
                inclusions: raw.inclusion.clone().unwrap_or_default(),
            },
            (Some(p), None) => Target::Phantom(
                p.parse()
                    .map_err(|_| fail("phantom", format!("unknown phantom `{p}`")))?,
            ),
            (None, Some(c)) => {
                manufactured_case(c).map_err(|_| fail("case", format!("unknown case `{c}`")))?;
                Target::Case(c.clone())
            }
        };
        if !matches!(target, Target::CustomPhantom { .. }) {
            if raw.background.is_some() {
                return Err(fail("background", "only used with phantom = \"custom\"".into()));
            }
            if raw.inclusion.is_some() {
                return Err(Error::config_key("inclusion", "only used with phantom = \"custom\""));
            }
        }
        if let Some(d) = &raw.domain {
            if d != UNIT_DISC {
                return Err(fail("domain", format!("unsupported domain `{d}`")));
            }
        }

        let base = TrainConfig::default();
        let wdef = match problem {
            Problem::Forward => LossWeights::forward_defaults(),
            Problem::Inverse => LossWeights::inverse_defaults(),
        };
        let train = TrainConfig {
            layers: raw.layers.clone().unwrap_or(base.layers),
            epochs: raw.epochs.ok_or_else(|| missing("epochs"))?,
            batch_size: raw.batch_size.unwrap_or(base.batch_size),
            lr0: raw.lr0.unwrap_or(base.lr0),
            decay_factor: raw.decay_factor.unwrap_or(base.decay_factor),
            decay_every: raw.decay_every.unwrap_or(base.decay_every),
            weights: LossWeights {
                lambda: raw.lambda.unwrap_or(wdef.lambda),
                mu: raw.mu.unwrap_or(wdef.mu),
                k: raw.k.unwrap_or(wdef.k),
                alpha: raw.alpha.unwrap_or(wdef.alpha),
                beta: raw.beta.unwrap_or(wdef.beta),
                p: raw.p.unwrap_or(wdef.p),
                tv_eps: raw.tv_eps.unwrap_or(wdef.tv_eps),
            },
            n_interior: raw.n_interior.unwrap_or(base.n_interior),
            n_boundary: raw.n_boundary.unwrap_or(base.n_boundary),
            seed: raw.seed.unwrap_or(base.seed),
            resample: raw.resample.unwrap_or(base.resample),
        };
        let cfg = RunConfig {
            problem,
            target,
            smoothing: raw.smoothing.unwrap_or(crate::pde::DEFAULT_SMOOTHING),
            current: raw.current.unwrap_or(1),
            train,
            out: raw.out.clone().unwrap_or_else(|| PathBuf::from("out")),
            export_resolution: raw.export_resolution.unwrap_or(100),
            reference_resolution: raw.reference_resolution.unwrap_or(128),
            checkpoint_every: raw.checkpoint_every.unwrap_or(100),
            u_checkpoint: raw.u_checkpoint.clone(),
            sigma0: raw.sigma0,
        };
        cfg.validate().map_err(|e| match e {
            Error::Config {
                key: Some(key),
                line: None,
                message,
            } => fail(&key, message),
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(self.smoothing > 0.0 && self.smoothing.is_finite()) {
            return Err(Error::config_key("smoothing", "must be positive"));
        }
        if !(1..=3).contains(&self.current) {
            return Err(Error::config_key("current", "must be 1, 2 or 3"));
        }
        if self.export_resolution < 2 {
            return Err(Error::config_key("export_resolution", "must be at least 2"));
        }
        if self.reference_resolution < 16 {
            return Err(Error::config_key("reference_resolution", "must be at least 16"));
        }
        if let Some(s) = self.sigma0 {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::config_key("sigma0", "must be positive"));
            }
        }
        if self.problem == Problem::Inverse && self.u_checkpoint.is_none() {
            return Err(Error::config_key(
                "u_checkpoint",
                "inverse runs need the forward potential checkpoint",
            ));
        }
        if let Target::CustomPhantom { .. } = self.target {
            self.phantom()?.expect("custom phantom").validate()?;
        }
        Ok(())
    }

    /// The phantom conductivity, when the target is a phantom.
    pub fn phantom(&self) -> Result<Option<Phantom>> {
        Ok(match &self.target {
            Target::Phantom(id) => Some(Phantom::from_id(*id, self.smoothing)),
            Target::CustomPhantom {
                background,
                inclusions,
            } => Some(Phantom {
                background: *background,
                smoothing: self.smoothing,
                inclusions: inclusions.clone(),
            }),
            Target::Case(_) => None,
        })
    }

    /// True conductivity of the target.
    pub fn sigma(&self) -> Result<Arc<dyn ScalarField>> {
        match &self.target {
            Target::Case(id) => Ok(manufactured_case(id)?.sigma),
            _ => Ok(Arc::new(self.phantom()?.expect("phantom target"))),
        }
    }

    pub fn to_toml(&self) -> String {
        let (phantom, case, background, inclusion) = match &self.target {
            Target::Phantom(id) => (
                Some(match id {
                    PhantomId::Phantom1 => "phantom1".to_string(),
                    PhantomId::Phantom2 => "phantom2".to_string(),
                }),
                None,
                None,
                None,
            ),
            Target::CustomPhantom {
                background,
                inclusions,
            } => (
                Some(CUSTOM.to_string()),
                None,
                Some(*background),
                Some(inclusions.clone()),
            ),
            Target::Case(c) => (None, Some(c.clone()), None, None),
        };
        let t = &self.train;
        let w = &t.weights;
        let raw = RawConfig {
            problem: Some(self.problem),
            phantom,
            case,
            background,
            smoothing: Some(self.smoothing),
            current: Some(self.current),
            domain: Some(UNIT_DISC.to_string()),
            out: Some(self.out.clone()),
            export_resolution: Some(self.export_resolution),
            reference_resolution: Some(self.reference_resolution),
            checkpoint_every: Some(self.checkpoint_every),
            u_checkpoint: self.u_checkpoint.clone(),
            sigma0: self.sigma0,
            layers: Some(t.layers.clone()),
            epochs: Some(t.epochs),
            batch_size: Some(t.batch_size),
            lr0: Some(t.lr0),
            decay_factor: Some(t.decay_factor),
            decay_every: Some(t.decay_every),
            n_interior: Some(t.n_interior),
            n_boundary: Some(t.n_boundary),
            seed: Some(t.seed),
            resample: Some(t.resample),
            lambda: Some(w.lambda),
            mu: Some(w.mu),
            k: Some(w.k),
            alpha: Some(w.alpha),
            beta: Some(w.beta),
            p: Some(w.p),
            tv_eps: Some(w.tv_eps),
            inclusion,
        };
        toml::to_string(&raw).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical serialization. The output directory is
    /// left out so a run directory can be moved without orphaning its
    /// checkpoints.
    pub fn digest(&self) -> String {
        let canonical = RunConfig {
            out: PathBuf::new(),
            ..self.clone()
        };
        let hash = Sha256::digest(canonical.to_toml().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
    RunConfig::from_toml_str(&text)
}
