use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{CutsSpec, DetectorSpec, EngineChoice, ExperimentConfig};
use crate::detectors::{
    calibrate_tube_rho, cube_scan_detect, cube_scan_statistic, cube_side, delta_for_threshold, drift_tube_detect,
    lr_detect, radial_detect, tree_cut_detect, tube_events, CubeParams, DetectorOutcome, GEngine, TubeGeometry,
    TubeParams,
};
use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, PathSampler};
use crate::measures::MeasurePair;
use crate::scenery::{sample_null, sample_perturbed, sample_perturbed_tree, Domain, SceneryWindow};
use crate::seeds::{mix, stream_key};
use crate::stats::{quantile, wilson_interval, Interval, Z95};
use crate::trees::{first_crossing_antichain, Cut, FlowTree};

pub const NULL_ARM: u16 = 0;
pub const PERTURBED_ARM: u16 = 1;
/// Null sceneries used to calibrate thresholds.
pub const CALIBRATION_ARM: u16 = 2;
/// Path-only simulations used to calibrate the tube `rho`.
pub const PATH_CALIBRATION_ARM: u16 = 3;

/// Salt separating a detector's own randomness from the scenery streams of
/// the same trial seed.
const DETECTOR_SALT: u64 = 0xD37E_C708;

pub fn trial_seed(master: u64, arm: u16, index: u64) -> u64 {
    mix(master, stream_key(arm, index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmCounts {
    pub trials: u64,
    pub decided_null: u64,
    pub decided_perturbed: u64,
}

impl ArmCounts {
    fn tally(outcomes: &[DetectorOutcome]) -> Self {
        let perturbed = outcomes.iter().filter(|o| o.decision.is_perturbed()).count() as u64;
        Self {
            trials: outcomes.len() as u64,
            decided_null: outcomes.len() as u64 - perturbed,
            decided_perturbed: perturbed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub detector: String,
    pub null_arm: ArmCounts,
    pub perturbed_arm: ArmCounts,
    /// False-alarm frequency under the null arm.
    pub type_i: f64,
    pub type_i_ci: Interval,
    /// Miss frequency under the perturbed arm.
    pub type_ii: f64,
    pub type_ii_ci: Interval,
    pub null_statistics: Vec<f64>,
    pub perturbed_statistics: Vec<f64>,
    /// Thresholds are fixed before the arms run, so one value per report.
    pub threshold: f64,
    /// What calibration chose and from how many runs; `null` when none ran.
    pub calibration: serde_json::Value,
    pub config: ExperimentConfig,
    pub wall_clock_secs: f64,
}

impl DetectionReport {
    pub fn power(&self) -> f64 {
        1.0 - self.type_ii
    }

    /// Equality ignoring the wall clock.
    pub fn same_results(&self, other: &Self) -> bool {
        let mut a = self.clone();
        a.wall_clock_secs = other.wall_clock_secs;
        a == *other
    }
}

/// A detector with every calibrated quantity fixed.
enum Prepared {
    Cube(CubeParams),
    Radial(Option<usize>),
    Tube(TubeParams, Box<TubeGeometry>),
    LrExact(Option<Vec<usize>>),
    LrMonteCarlo {
        replicas: usize,
        schedule: Vec<usize>,
    },
    TreeCut(Vec<Cut>),
    Constant(bool),
}

struct Setting {
    pair: MeasurePair<f64>,
    domain: Domain,
    window: Option<LatticeBox>,
    tree: Option<FlowTree<f64>>,
    sampler: Option<PathSampler>,
}

impl Setting {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let window = cfg.window()?;
        let tree = cfg.tree()?;
        let domain = match (&window, &tree) {
            (Some(w), _) => Domain::lattice(*w),
            (None, Some(t)) => Domain::tree(t),
            (None, None) => unreachable!("a domain is either a window or a tree"),
        };
        let sampler = match (&cfg.path, window) {
            (Some(p), Some(w)) => Some(p.sampler(w.dim, w.half_width)?),
            _ => None,
        };
        Ok(Self {
            pair: cfg.pair.clone(),
            domain,
            window,
            tree,
            sampler,
        })
    }

    fn null(&self, seed: u64) -> Result<SceneryWindow> {
        sample_null(self.domain, &self.pair, seed)
    }

    fn perturbed(&self, seed: u64) -> Result<SceneryWindow> {
        match (&self.window, &self.tree, &self.sampler) {
            (Some(w), _, Some(s)) => sample_perturbed(*w, &self.pair, s, seed),
            (_, Some(t), _) => sample_perturbed_tree(t, &self.pair, seed),
            _ => Err(Error::Config("no hidden-path law for this domain".into())),
        }
    }

    fn sampler(&self) -> Result<&PathSampler> {
        self.sampler
            .as_ref()
            .ok_or_else(|| Error::Config("this detector needs a lattice path law".into()))
    }

    fn tree(&self) -> Result<&FlowTree<f64>> {
        self.tree
            .as_ref()
            .ok_or_else(|| Error::Config("this detector needs a tree domain".into()))
    }

    fn run(&self, prepared: &Prepared, scenery: &SceneryWindow) -> Result<DetectorOutcome> {
        let blind = scenery.blind();
        let pair = &self.pair;
        match prepared {
            Prepared::Cube(p) => cube_scan_detect(&blind, pair, p),
            Prepared::Radial(shells) => radial_detect(&blind, pair, *shells),
            Prepared::Tube(p, g) => drift_tube_detect(&blind, pair, p, g),
            Prepared::LrExact(schedule) => lr_detect(
                &blind,
                pair,
                GEngine::Exact {
                    tree: self.tree()?,
                    schedule: schedule.as_deref(),
                },
            ),
            Prepared::LrMonteCarlo { replicas, schedule } => lr_detect(
                &blind,
                pair,
                GEngine::MonteCarlo {
                    sampler: self.sampler()?,
                    replicas: *replicas,
                    schedule,
                    seed: mix(scenery.seed(), DETECTOR_SALT),
                },
            ),
            Prepared::TreeCut(cuts) => tree_cut_detect(&blind, self.tree()?, pair, cuts),
            Prepared::Constant(perturbed) => Ok(DetectorOutcome {
                detector: "constant".into(),
                decision: if *perturbed {
                    crate::detectors::Decision::Perturbed
                } else {
                    crate::detectors::Decision::Null
                },
                statistic: f64::from(u8::from(*perturbed)),
                threshold: 0.5,
                params: json!({ "perturbed": perturbed }),
                trajectory: None,
            }),
        }
    }
}

fn arm_name(arm: u16) -> String {
    match arm {
        NULL_ARM => "null".into(),
        PERTURBED_ARM => "perturbed".into(),
        CALIBRATION_ARM => "calibration".into(),
        PATH_CALIBRATION_ARM => "path-calibration".into(),
        other => format!("arm-{other}"),
    }
}

/// Runs `f` on `count` derived seeds of `arm` in parallel and collects the
/// results in index order. The first failing index is reported with its
/// seed.
fn per_trial<T, F>(master: u64, arm: u16, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let results: Vec<Result<T>> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(master, arm, i);
            f(seed).map_err(|e| Error::Trial {
                arm: arm_name(arm),
                index: i,
                seed,
                source: Box::new(e),
            })
        })
        .collect();
    results.into_iter().collect()
}

fn null_tube_fraction(events: &[bool]) -> f64 {
    events.iter().filter(|&&b| b).count() as f64 / events.len() as f64
}

fn prepare(cfg: &ExperimentConfig, setting: &Setting) -> Result<(Prepared, serde_json::Value)> {
    let pair = &setting.pair;
    Ok(match &cfg.detector {
        DetectorSpec::Cube {
            rho_star,
            delta,
            side,
            calibration,
        } => match (delta, calibration) {
            (Some(delta), _) => (
                Prepared::Cube(CubeParams {
                    rho_star: *rho_star,
                    delta: *delta,
                    side: *side,
                }),
                serde_json::Value::Null,
            ),
            (None, Some(cal)) => {
                if cal.trials < 10 || !(cal.false_alarm > 0.0 && cal.false_alarm < 1.0) {
                    return Err(Error::Config("calibration needs >= 10 trials and false_alarm in (0, 1)".into()));
                }
                let label = match rho_star {
                    Some(l) => *l,
                    None => pair
                        .default_signal_label()
                        .ok_or_else(|| Error::Inapplicable("no label with nu > mu".into()))?,
                };
                let window = setting.domain.as_box()?;
                let k = match side {
                    Some(k) => *k,
                    None => cube_side(window.half_width as u64, window.dim)?,
                };
                let stats = per_trial(cfg.seed, CALIBRATION_ARM, cal.trials, |seed| {
                    cube_scan_statistic(&setting.null(seed)?, label, k)
                })?;
                // Decisions need the statistic strictly above the threshold,
                // so at most `false_alarm` of the calibration runs fire.
                let q = quantile(&stats, 1.0 - cal.false_alarm);
                let (mu, nu) = (pair.mu()[label], pair.nu()[label]);
                let max_delta = 2.0 * (1.0 - mu) / (nu - mu);
                let delta = delta_for_threshold(pair, label, q + 1e-12).min(max_delta);
                (
                    Prepared::Cube(CubeParams {
                        rho_star: Some(label),
                        delta,
                        side: Some(k),
                    }),
                    json!({
                        "trials": cal.trials,
                        "target_false_alarm": cal.false_alarm,
                        "null_quantile": q,
                        "delta": delta,
                        "side": k,
                        "calibration_false_alarm": stats.iter().filter(|&&s| s > mu + delta * (nu - mu) / 2.0).count() as f64 / stats.len() as f64,
                    }),
                )
            }
            (None, None) => return Err(Error::Config("cube detector needs delta or calibration".into())),
        },
        DetectorSpec::Radial { shells } => (Prepared::Radial(*shells), serde_json::Value::Null),
        DetectorSpec::Tube {
            xi,
            k_min,
            k_max,
            rho,
            gamma_hat,
            rho_walks,
            gamma_trials,
        } => {
            let sampler = setting.sampler()?;
            let mean = match sampler {
                PathSampler::Walk { spec, .. } => spec.mean(),
                PathSampler::Uniform(_) => return Err(Error::Config("tube detector needs a walk law".into())),
            };
            let geometry = TubeGeometry::new(setting.domain.as_box()?, &mean, *k_min, *k_max)?;
            let mut info = serde_json::Map::new();
            let rho = match rho {
                Some(r) => *r,
                None => {
                    let cal = calibrate_tube_rho(
                        &geometry,
                        sampler,
                        *rho_walks,
                        trial_seed(cfg.seed, PATH_CALIBRATION_ARM, 0),
                    )?;
                    info.insert("rho".into(), json!(cal));
                    cal.rho
                }
            };
            let mut params = TubeParams {
                xi: *xi,
                mean,
                rho,
                k_min: *k_min,
                k_max: *k_max,
                gamma_hat: 0.0,
            };
            params.gamma_hat = match gamma_hat {
                Some(g) => *g,
                None => {
                    if *gamma_trials < 10 {
                        return Err(Error::Config("gamma_trials must be >= 10".into()));
                    }
                    let fractions = per_trial(cfg.seed, CALIBRATION_ARM, *gamma_trials, |seed| {
                        Ok(null_tube_fraction(&tube_events(&setting.null(seed)?, pair, &params, &geometry)?))
                    })?;
                    let g = crate::stats::mean(&fractions);
                    info.insert("gamma_hat".into(), json!({ "value": g, "trials": gamma_trials }));
                    g
                }
            };
            let info = if info.is_empty() {
                serde_json::Value::Null
            } else {
                serde_json::Value::Object(info)
            };
            (Prepared::Tube(params, Box::new(geometry)), info)
        }
        DetectorSpec::Lr {
            engine,
            replicas,
            schedule,
        } => match engine {
            EngineChoice::Exact => (Prepared::LrExact(schedule.clone()), serde_json::Value::Null),
            EngineChoice::Mc => {
                let schedule = match schedule {
                    Some(s) => s.clone(),
                    None => vec![setting.domain.len()?],
                };
                (
                    Prepared::LrMonteCarlo {
                        replicas: *replicas,
                        schedule,
                    },
                    serde_json::Value::Null,
                )
            }
        },
        DetectorSpec::Treecut { cuts } => {
            let tree = setting.tree()?;
            match cuts {
                CutsSpec::Levels { from, to } => {
                    if from == &0 || from > to {
                        return Err(Error::Config("level cuts need 1 <= from <= to".into()));
                    }
                    let cuts = (*from..=*to).map(|d| Cut::level(tree, d)).collect::<Result<Vec<_>>>()?;
                    (Prepared::TreeCut(cuts), serde_json::Value::Null)
                }
                CutsSpec::Crossing { h, gamma, ks } => {
                    let mut cuts = Vec::new();
                    let mut dropped = Vec::new();
                    for &k in ks {
                        let a = first_crossing_antichain(tree, *h, *gamma, k)?;
                        dropped.push(json!({ "k": k, "dropped_rays": a.dropped_rays, "total_rays": a.total_rays }));
                        if !a.cut.vertices.is_empty() {
                            cuts.push(a.cut);
                        }
                    }
                    if cuts.is_empty() {
                        return Err(Error::Inapplicable("every crossing antichain is empty".into()));
                    }
                    (Prepared::TreeCut(cuts), json!({ "crossings": dropped }))
                }
            }
        }
        DetectorSpec::Constant { perturbed } => (Prepared::Constant(*perturbed), serde_json::Value::Null),
    })
}

/// Runs `trials` null and `trials` perturbed sceneries through the
/// configured detector. Calibration, when requested, runs first on its own
/// seed streams.
pub fn run_detection_experiment(cfg: &ExperimentConfig) -> Result<DetectionReport> {
    cfg.validate()?;
    let start = Instant::now();
    let setting = Setting::new(cfg)?;
    let (prepared, calibration) = prepare(cfg, &setting)?;
    let null = per_trial(cfg.seed, NULL_ARM, cfg.trials, |seed| setting.run(&prepared, &setting.null(seed)?))?;
    let perturbed = per_trial(cfg.seed, PERTURBED_ARM, cfg.trials, |seed| {
        setting.run(&prepared, &setting.perturbed(seed)?)
    })?;
    let null_arm = ArmCounts::tally(&null);
    let perturbed_arm = ArmCounts::tally(&perturbed);
    let n = cfg.trials as u64;
    Ok(DetectionReport {
        detector: null[0].detector.clone(),
        null_arm,
        perturbed_arm,
        type_i: null_arm.decided_perturbed as f64 / n as f64,
        type_i_ci: wilson_interval(null_arm.decided_perturbed, n, Z95),
        type_ii: perturbed_arm.decided_null as f64 / n as f64,
        type_ii_ci: wilson_interval(perturbed_arm.decided_null, n, Z95),
        null_statistics: null.iter().map(|o| o.statistic).collect(),
        perturbed_statistics: perturbed.iter().map(|o| o.statistic).collect(),
        threshold: null[0].threshold,
        calibration,
        config: cfg.clone(),
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}
