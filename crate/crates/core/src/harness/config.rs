//! Experiment configuration, read from TOML. Unknown keys are rejected.
//!
//! ```toml
//! seed = 7
//! trials = 200
//!
//! [pair]
//! mu = [0.5, 0.5]
//! nu = [0.9, 0.1]
//!
//! [domain]
//! kind = "lattice"
//! dim = 2
//! half_width = 512
//!
//! [path]
//! walk = "simple"
//! stop = { kind = "sup-norm-exit", factor = 2 }
//!
//! [detector]
//! kind = "cube"
//! calibration = { trials = 200, false_alarm = 0.1 }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, PathSampler, StopRule, WalkSpec, DEFAULT_MAX_STEPS};
use crate::measures::MeasurePair;
use crate::trees::{FlowSpec, FlowTree, TreeGenerator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed. TOML integers are signed, so at most `i64::MAX`.
    pub seed: u64,
    /// Trials per arm.
    pub trials: usize,
    pub pair: MeasurePair<f64>,
    pub domain: DomainSpec,
    /// Required on lattices; trees hide a ray drawn from the flow.
    #[serde(default)]
    pub path: Option<PathSpec>,
    pub detector: DetectorSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    Lattice {
        dim: usize,
        half_width: i64,
    },
    Tree {
        generator: TreeGenerator,
        #[serde(default)]
        flow: FlowChoice,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FlowChoice {
    #[default]
    Uniform,
    MaxFlowForBeta {
        beta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WalkChoice {
    Simple,
    Oriented,
    Biased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub walk: WalkChoice,
    /// Biased walks: `2d` weights, `+e_i` then `-e_i` for each axis.
    /// Oriented walks: optional `d` weights on the positive steps.
    #[serde(default)]
    pub step_probs: Option<Vec<f64>>,
    pub stop: StopSpec,
    #[serde(default)]
    pub max_steps: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StopSpec {
    FixedSteps {
        t: u64,
    },
    /// First exit of the window.
    WindowExit,
    /// First time `|X|_inf` reaches `k`, or `factor * n` for window
    /// half-width `n`.
    SupNormExit {
        #[serde(default)]
        k: Option<i64>,
        #[serde(default)]
        factor: Option<i64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    /// Null sceneries used for calibration, on their own seed streams.
    pub trials: usize,
    /// Target false-alarm rate.
    #[serde(default = "default_false_alarm")]
    pub false_alarm: f64,
}

fn default_false_alarm() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CutsSpec {
    /// Level cuts at depths `from..=to`.
    Levels { from: usize, to: usize },
    /// Crossing antichains `V_k` for `k` in `ks`.
    Crossing { h: f64, gamma: f64, ks: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineChoice {
    Exact,
    Mc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DetectorSpec {
    /// Either a fixed `delta` or a calibration run choosing it.
    Cube {
        #[serde(default)]
        rho_star: Option<usize>,
        #[serde(default)]
        delta: Option<f64>,
        #[serde(default)]
        side: Option<usize>,
        #[serde(default)]
        calibration: Option<Calibration>,
    },
    Radial {
        #[serde(default)]
        shells: Option<usize>,
    },
    /// `rho` and `gamma_hat` are calibrated unless given.
    Tube {
        #[serde(default)]
        xi: Option<usize>,
        k_min: u32,
        k_max: u32,
        #[serde(default)]
        rho: Option<f64>,
        #[serde(default)]
        gamma_hat: Option<f64>,
        #[serde(default = "default_tube_walks")]
        rho_walks: usize,
        #[serde(default = "default_tube_nulls")]
        gamma_trials: usize,
    },
    Lr {
        engine: EngineChoice,
        #[serde(default = "default_replicas")]
        replicas: usize,
        #[serde(default)]
        schedule: Option<Vec<usize>>,
    },
    Treecut {
        cuts: CutsSpec,
    },
    /// Always answers the same; a harness sanity check.
    Constant {
        perturbed: bool,
    },
}

fn default_tube_walks() -> usize {
    1000
}

fn default_tube_nulls() -> usize {
    200
}

fn default_replicas() -> usize {
    1000
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub json: Option<PathBuf>,
    #[serde(default)]
    pub csv: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("seed {} does not fit a TOML integer (max 2^63 - 1)", self.seed)));
        }
        if self.trials < 10 {
            return Err(Error::Config(format!("trials must be >= 10, got {}", self.trials)));
        }
        match (&self.domain, &self.path) {
            (DomainSpec::Lattice { dim, half_width }, Some(p)) => {
                LatticeBox::new(*dim, *half_width)?;
                p.sampler(*dim, *half_width)?;
            }
            (DomainSpec::Lattice { .. }, None) => {
                return Err(Error::Config("lattice experiments need a [path] section".into()));
            }
            (DomainSpec::Tree { .. }, Some(_)) => {
                return Err(Error::Config("tree experiments hide a ray drawn from the flow; remove [path]".into()));
            }
            (DomainSpec::Tree { .. }, None) => {}
        }
        let lattice = matches!(self.domain, DomainSpec::Lattice { .. });
        let ok = match &self.detector {
            DetectorSpec::Cube { delta, calibration, .. } => {
                if delta.is_some() == calibration.is_some() {
                    return Err(Error::Config("cube detector needs exactly one of delta or calibration".into()));
                }
                lattice
            }
            DetectorSpec::Radial { .. } | DetectorSpec::Tube { .. } => lattice,
            DetectorSpec::Lr { engine, .. } => lattice == (*engine == EngineChoice::Mc),
            DetectorSpec::Treecut { .. } => !lattice,
            DetectorSpec::Constant { .. } => true,
        };
        if !ok {
            return Err(Error::Config("detector does not apply to this domain".into()));
        }
        Ok(())
    }

    pub fn window(&self) -> Result<Option<LatticeBox>> {
        match self.domain {
            DomainSpec::Lattice { dim, half_width } => Ok(Some(LatticeBox::new(dim, half_width)?)),
            DomainSpec::Tree { .. } => Ok(None),
        }
    }

    pub fn tree(&self) -> Result<Option<FlowTree<f64>>> {
        match &self.domain {
            DomainSpec::Lattice { .. } => Ok(None),
            DomainSpec::Tree { generator, flow } => {
                let t = FlowTree::build(generator)?;
                let t = match flow {
                    FlowChoice::Uniform => t,
                    FlowChoice::MaxFlowForBeta { beta } => t.attach_flow(FlowSpec::MaxFlowForBeta(*beta))?,
                };
                Ok(Some(t))
            }
        }
    }
}

impl PathSpec {
    pub fn walk_spec(&self, dim: usize) -> Result<WalkSpec> {
        match (self.walk, &self.step_probs) {
            (WalkChoice::Simple, None) => WalkSpec::simple(dim),
            (WalkChoice::Oriented, None) => WalkSpec::oriented(dim),
            (WalkChoice::Oriented, Some(w)) if w.len() == dim => WalkSpec::oriented_weighted(w),
            (WalkChoice::Biased, Some(p)) => WalkSpec::biased(dim, p.clone()),
            (WalkChoice::Simple, Some(_)) => Err(Error::Config("simple walks take no step_probs".into())),
            (WalkChoice::Oriented, Some(w)) => Err(Error::Config(format!(
                "oriented step weights need {dim} entries, got {}",
                w.len()
            ))),
            (WalkChoice::Biased, None) => Err(Error::Config("biased walks need step_probs".into())),
        }
    }

    pub fn stop_rule(&self, half_width: i64) -> Result<StopRule> {
        let rule = match self.stop {
            StopSpec::FixedSteps { t } => StopRule::FixedSteps { t },
            StopSpec::WindowExit => StopRule::WindowExit { half_width },
            StopSpec::SupNormExit { k: Some(k), factor: None } => StopRule::SupNormExit { k },
            StopSpec::SupNormExit { k: None, factor: Some(f) } => StopRule::SupNormExit { k: f * half_width },
            StopSpec::SupNormExit { .. } => {
                return Err(Error::Config("sup-norm-exit needs exactly one of k or factor".into()));
            }
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn sampler(&self, dim: usize, half_width: i64) -> Result<PathSampler> {
        Ok(PathSampler::Walk {
            spec: self.walk_spec(dim)?,
            stop: self.stop_rule(half_width)?,
            max_steps: self.max_steps.unwrap_or(DEFAULT_MAX_STEPS),
        })
    }
}
