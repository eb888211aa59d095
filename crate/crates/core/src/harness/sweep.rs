use serde::{Deserialize, Serialize};

use super::config::{CutsSpec, DetectorSpec, DomainSpec, ExperimentConfig};
use super::experiment::{run_detection_experiment, DetectionReport};
use crate::error::{Error, Result};
use crate::lattice::{estimate_intersection_tail, TailReport, WalkSpec};
use crate::measures::MeasurePair;
use crate::seeds::{mix, stream_rng};
use crate::trees::{branching_number, BranchingConfig, BranchingEstimate, CutSumSource, LevelProfile, TreeGenerator};

/// What varies across a sweep; everything else comes from the base config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SweepSpec {
    /// Perturbed measures, `mu` fixed.
    Nu { values: Vec<Vec<f64>> },
    /// Lattice window half-widths.
    HalfWidth { values: Vec<i64> },
    /// Tree depths.
    Depth { values: Vec<usize> },
}

impl SweepSpec {
    pub fn len(&self) -> usize {
        match self {
            SweepSpec::Nu { values } => values.len(),
            SweepSpec::HalfWidth { values } => values.len(),
            SweepSpec::Depth { values } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: String,
    /// `H(nu | mu)` in nats.
    pub entropy: f64,
    /// `log br(T)` on trees.
    pub log_branching: Option<f64>,
    /// `H - log br`: positive is the detectable side.
    pub margin: Option<f64>,
    pub report: DetectionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub warnings: Vec<String>,
}

impl SweepTable {
    pub fn single(report: DetectionReport) -> Self {
        let entropy = report.config.pair.relative_entropy();
        Self {
            rows: vec![SweepRow {
                point: "base".into(),
                entropy,
                log_branching: None,
                margin: None,
                report,
            }],
            warnings: Vec::new(),
        }
    }
}

/// `nu_t = (1 - t) mu + t target` at `steps` evenly spaced `t` in `[0, 1]`.
pub fn interpolate_nu(mu: &[f64], target: &[f64], steps: usize) -> Result<Vec<Vec<f64>>> {
    if mu.len() != target.len() {
        return Err(Error::DimensionMismatch(mu.len(), target.len()));
    }
    if steps < 2 {
        return Err(Error::InvalidParameter("need at least two interpolation steps".into()));
    }
    Ok((0..steps)
        .map(|i| {
            let t = i as f64 / (steps - 1) as f64;
            mu.iter().zip(target).map(|(m, v)| (1.0 - t) * m + t * v).collect()
        })
        .collect())
}

/// Branching number of the configured tree. Generators with a level
/// profile are evaluated deep; other trees use their own cut sums.
pub fn tree_branching(generator: &TreeGenerator) -> Result<BranchingEstimate> {
    if let Some(profile) = LevelProfile::from_generator(generator, 30) {
        return branching_number(&profile, &BranchingConfig::default());
    }
    let tree = crate::trees::FlowTree::<f64>::build(generator)?;
    let depth = CutSumSource::max_depth(&tree);
    let step = (depth / 4).max(1);
    let cfg = BranchingConfig {
        start_depth: step,
        depth_step: step,
        ..BranchingConfig::default()
    };
    branching_number(&tree, &cfg)
}

fn with_depth(g: &TreeGenerator, d: usize) -> Result<TreeGenerator> {
    let mut g = g.clone();
    match &mut g {
        TreeGenerator::BAry { depth, .. }
        | TreeGenerator::SphericallySymmetric { depth, .. }
        | TreeGenerator::Random { depth, .. } => *depth = d,
        TreeGenerator::Explicit { .. } => {
            return Err(Error::Config("explicit trees have no depth to sweep".into()));
        }
    }
    Ok(g)
}

fn generator_depth(g: &TreeGenerator) -> Option<usize> {
    match g {
        TreeGenerator::BAry { depth, .. }
        | TreeGenerator::SphericallySymmetric { depth, .. }
        | TreeGenerator::Random { depth, .. } => Some(*depth),
        TreeGenerator::Explicit { .. } => None,
    }
}

fn point_configs(base: &ExperimentConfig, sweep: &SweepSpec) -> Result<Vec<(String, ExperimentConfig)>> {
    let mut out = Vec::new();
    match sweep {
        SweepSpec::Nu { values } => {
            for nu in values {
                let mut cfg = base.clone();
                cfg.pair = MeasurePair::new(base.pair.mu().to_vec(), nu.clone())
                    .map_err(|e| Error::Config(format!("sweep point {nu:?}: {e}")))?;
                out.push((format!("nu={nu:?}"), cfg));
            }
        }
        SweepSpec::HalfWidth { values } => {
            for &n in values {
                let mut cfg = base.clone();
                match &mut cfg.domain {
                    DomainSpec::Lattice { half_width, .. } => *half_width = n,
                    DomainSpec::Tree { .. } => return Err(Error::Config("half-width sweeps need a lattice".into())),
                }
                out.push((format!("half_width={n}"), cfg));
            }
        }
        SweepSpec::Depth { values } => {
            for &d in values {
                let mut cfg = base.clone();
                let old = match &mut cfg.domain {
                    DomainSpec::Tree { generator, .. } => {
                        let old = generator_depth(generator);
                        *generator = with_depth(generator, d)?;
                        old
                    }
                    DomainSpec::Lattice { .. } => return Err(Error::Config("depth sweeps need a tree".into())),
                };
                // level cuts reaching the base tree's leaves follow the new depth
                if let DetectorSpec::Treecut { cuts: CutsSpec::Levels { to, .. } } = &mut cfg.detector {
                    if Some(*to) == old {
                        *to = d;
                    }
                }
                out.push((format!("depth={d}"), cfg));
            }
        }
    }
    for (_, cfg) in &out {
        cfg.validate()?;
    }
    Ok(out)
}

/// One detection experiment per sweep point, all with the base seed so the
/// points share random numbers. On trees, warns when no `nu` could push
/// `H` past `log br` because `H <= log(1 / min mu)`.
pub fn run_threshold_sweep(base: &ExperimentConfig, sweep: &SweepSpec) -> Result<SweepTable> {
    if sweep.is_empty() {
        return Err(Error::Config("empty sweep".into()));
    }
    let points = point_configs(base, sweep)?;
    let mut warnings = Vec::new();
    let mut rows = Vec::with_capacity(points.len());
    for (label, cfg) in points {
        let log_br = match &cfg.domain {
            DomainSpec::Tree { generator, .. } => Some(tree_branching(generator)?.estimate.ln()),
            DomainSpec::Lattice { .. } => None,
        };
        if let Some(lb) = log_br {
            let min_mu = cfg.pair.mu().iter().cloned().fold(f64::INFINITY, f64::min);
            let h_max = (1.0 / min_mu).ln();
            if h_max <= lb {
                let w = format!(
                    "infeasible sweep at {label}: H(nu|mu) <= log(1/min mu) = {h_max:.4} <= log br = {lb:.4}; the detectable side is unreachable"
                );
                if !warnings.contains(&w) {
                    warnings.push(w);
                }
            }
        }
        let entropy = cfg.pair.relative_entropy();
        let report = run_detection_experiment(&cfg)?;
        rows.push(SweepRow {
            point: label,
            entropy,
            log_branching: log_br,
            margin: log_br.map(|lb| entropy - lb),
            report,
        });
    }
    Ok(SweepTable { rows, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionTail {
    pub dim: usize,
    pub report: TailReport,
}

/// Intersection tails of two independent oriented walks for each `dim`.
pub fn intersection_dimension_sweep(
    dims: &[usize],
    horizon: usize,
    samples: usize,
    window: Option<(usize, usize)>,
    seed: u64,
) -> Result<Vec<DimensionTail>> {
    if dims.is_empty() {
        return Err(Error::Config("empty sweep".into()));
    }
    dims.iter()
        .map(|&d| {
            let spec = WalkSpec::oriented(d)?;
            let report = estimate_intersection_tail(&spec, horizon, samples, window, &mut stream_rng(mix(seed, d as u64), 0))?;
            Ok(DimensionTail { dim: d, report })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(mu: &str, nu: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml_str(&format!(
            r#"
seed = 5
trials = 20
[pair]
mu = {mu}
nu = {nu}
[domain]
kind = "tree"
generator = {{ kind = "b-ary", b = 2, depth = 6 }}
[detector]
kind = "treecut"
cuts = {{ kind = "levels", from = 1, to = 6 }}
"#
        ))
        .unwrap()
    }

    #[test]
    fn single_point_matches_experiment() {
        let cfg = base("[0.25, 0.25, 0.25, 0.25]", "[0.7, 0.1, 0.1, 0.1]");
        let t = run_threshold_sweep(&cfg, &SweepSpec::Nu { values: vec![vec![0.7, 0.1, 0.1, 0.1]] }).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!(t.rows[0].report.same_results(&run_detection_experiment(&cfg).unwrap()));
        let lb = t.rows[0].log_branching.unwrap();
        assert!((lb - 2f64.ln()).abs() < 0.01);
        assert!(t.warnings.is_empty());
    }

    #[test]
    fn binary_alphabet_is_infeasible() {
        let cfg = base("[0.5, 0.5]", "[0.9, 0.1]");
        let t = run_threshold_sweep(&cfg, &SweepSpec::Depth { values: vec![6, 7] }).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.warnings.len(), 2);
        assert!(t.rows.iter().all(|r| r.margin.unwrap() < 0.0));
    }

    #[test]
    fn depth_sweep_moves_full_level_cuts() {
        let cfg = base("[0.25, 0.25, 0.25, 0.25]", "[0.7, 0.1, 0.1, 0.1]");
        let t = run_threshold_sweep(&cfg, &SweepSpec::Depth { values: vec![4, 8] }).unwrap();
        let to: Vec<_> = t
            .rows
            .iter()
            .map(|r| match &r.report.config.detector {
                DetectorSpec::Treecut { cuts: CutsSpec::Levels { to, .. } } => *to,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(to, vec![4, 8]);
    }

    #[test]
    fn empty_and_mismatched_sweeps() {
        let cfg = base("[0.5, 0.5]", "[0.9, 0.1]");
        assert!(run_threshold_sweep(&cfg, &SweepSpec::Nu { values: vec![] }).unwrap_err().is_config());
        assert!(run_threshold_sweep(&cfg, &SweepSpec::HalfWidth { values: vec![4] }).unwrap_err().is_config());
        assert!(run_threshold_sweep(&cfg, &SweepSpec::Nu { values: vec![vec![1.0]] }).unwrap_err().is_config());
    }

    #[test]
    fn interpolation_endpoints() {
        let v = interpolate_nu(&[0.25; 4], &[0.97, 0.01, 0.01, 0.01], 5).unwrap();
        assert_eq!(v[0], vec![0.25; 4]);
        assert_eq!(v[4], vec![0.97, 0.01, 0.01, 0.01]);
    }
}
