use serde_json::json;

use super::{check_scenery, DetectorOutcome};
use crate::error::{Error, Result};
use crate::lattice::PathSampler;
use crate::measures::MeasurePair;
use crate::scenery::{exact_g_sequence, mc_g_estimate, SceneryWindow};
use crate::seeds::stream_rng;
use crate::trees::FlowTree;

/// How `g_n` is computed.
#[derive(Debug, Clone, Copy)]
pub enum GEngine<'a> {
    /// Exact on a flow tree, breadth-first reveal order. The trajectory
    /// reports `g` after each completed level unless `schedule` is given.
    Exact {
        tree: &'a FlowTree<f64>,
        schedule: Option<&'a [usize]>,
    },
    /// Monte Carlo over hidden paths on a lattice window in diamond order,
    /// evaluated at each reveal count in `schedule` (the last one is the
    /// statistic).
    MonteCarlo {
        sampler: &'a PathSampler,
        replicas: usize,
        schedule: &'a [usize],
        seed: u64,
    },
}

/// Likelihood-ratio test at the unit threshold: perturbed when `g_N > 1`.
pub fn lr_detect(scenery: &SceneryWindow, pair: &MeasurePair<f64>, engine: GEngine<'_>) -> Result<DetectorOutcome> {
    check_scenery(scenery, pair)?;
    match engine {
        GEngine::Exact { tree, schedule } => {
            let g = exact_g_sequence(tree, scenery, pair)?;
            let n = g.len() - 1;
            let points: Vec<usize> = match schedule {
                Some(s) => s.to_vec(),
                None => {
                    // BFS order lists whole levels in turn
                    let mut acc = 0;
                    tree.level_sizes()
                        .into_iter()
                        .map(|c| {
                            acc += c;
                            acc
                        })
                        .collect()
                }
            };
            if let Some(&bad) = points.iter().find(|&&p| p > n) {
                return Err(Error::InvalidParameter(format!("reveal count {bad} exceeds {n} vertices")));
            }
            let mut out = DetectorOutcome::new("lr", g[n], 1.0, json!({ "engine": "exact", "revealed": n }));
            out.trajectory = Some(points.iter().map(|&p| g[p]).collect());
            Ok(out)
        }
        GEngine::MonteCarlo {
            sampler,
            replicas,
            schedule,
            seed,
        } => {
            let (&last, _) = schedule
                .split_last()
                .ok_or_else(|| Error::InvalidParameter("empty reveal schedule".into()))?;
            let mut rng = stream_rng(seed, 0);
            let traj: Vec<f64> = schedule
                .iter()
                .map(|&n| mc_g_estimate(scenery, pair, sampler, n, replicas, &mut rng).map(|e| e.value))
                .collect::<Result<_>>()?;
            let stat = *traj.last().unwrap();
            let mut out = DetectorOutcome::new(
                "lr",
                stat,
                1.0,
                json!({ "engine": "mc", "revealed": last, "replicas": replicas, "seed": seed }),
            );
            out.trajectory = Some(traj);
            Ok(out)
        }
    }
}
