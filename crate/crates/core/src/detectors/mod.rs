//! Decision statistics. Every detector sees labels only; the hidden path in
//! a scenery's provenance is never read here.
//!
//! Ties between a statistic and its threshold are decided as null.

mod cube;
mod lr;
mod radial;
mod treecut;
mod tube;

pub use cube::{cube_scan_detect, cube_scan_statistic, cube_side, delta_for_threshold, CubeParams};
pub use lr::{lr_detect, GEngine};
pub use radial::{radial_detect, radial_null_variance, radial_statistic};
pub use treecut::{k_u_fires, tree_cut_detect};
pub use tube::{
    calibrate_tube_rho, drift_tube_detect, rotate_mean, tube_events, Orientation, TubeCalibration, TubeGeometry,
    TubeParams,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::MeasurePair;
use crate::scenery::SceneryWindow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Null,
    Perturbed,
}

impl Decision {
    /// `statistic > threshold`; a tie is null.
    pub fn from_threshold(statistic: f64, threshold: f64) -> Self {
        if statistic > threshold {
            Decision::Perturbed
        } else {
            Decision::Null
        }
    }

    pub fn is_perturbed(self) -> bool {
        self == Decision::Perturbed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorOutcome {
    pub detector: String,
    pub decision: Decision,
    pub statistic: f64,
    pub threshold: f64,
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<f64>>,
}

impl DetectorOutcome {
    fn new(detector: &str, statistic: f64, threshold: f64, params: serde_json::Value) -> Self {
        Self {
            detector: detector.to_string(),
            decision: Decision::from_threshold(statistic, threshold),
            statistic,
            threshold,
            params,
            trajectory: None,
        }
    }
}

/// The label to count: the caller's choice, or the one maximising `nu - mu`.
fn signal_label(pair: &MeasurePair<f64>, chosen: Option<usize>) -> Result<usize> {
    let label = match chosen {
        Some(l) => l,
        None => pair
            .default_signal_label()
            .ok_or_else(|| Error::Inapplicable("no label with nu > mu".into()))?,
    };
    if label >= pair.alphabet().size() {
        return Err(Error::LabelOutOfRange {
            label,
            size: pair.alphabet().size(),
        });
    }
    if pair.nu()[label] <= pair.mu()[label] {
        return Err(Error::Inapplicable(format!("label {label} does not have nu > mu")));
    }
    Ok(label)
}

fn check_scenery(scenery: &SceneryWindow, pair: &MeasurePair<f64>) -> Result<()> {
    scenery.check_pair(pair)
}
