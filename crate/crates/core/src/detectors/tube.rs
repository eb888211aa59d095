use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{check_scenery, signal_label, DetectorOutcome};
use crate::error::{Error, Result};
use crate::lattice::{DriftTube, LatticeBox, PathSampler};
use crate::measures::MeasurePair;
use crate::scenery::SceneryWindow;
use crate::seeds::stream_rng;
use crate::stats::quantile;

/// Signed coordinate swap taking the mean's dominant axis to the first
/// coordinate with a positive sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Orientation {
    pub axis: usize,
    pub sign: i64,
}

impl Orientation {
    fn to_window(self, y: &[i64]) -> Vec<i64> {
        let mut x = y.to_vec();
        if self.axis != 0 {
            x.swap(0, self.axis);
        }
        x[self.axis] = self.sign * y[0];
        x
    }
}

/// Picks the axis with the largest `|m_i|` (lowest index on ties) and
/// returns the mean in rotated coordinates, as exact fractions.
pub fn rotate_mean(mean: &[f64]) -> Result<(Orientation, Vec<Ratio<i64>>)> {
    if mean.iter().all(|&m| m == 0.0) {
        return Err(Error::Inapplicable("drift tube needs a nonzero mean".into()));
    }
    let mut axis = 0;
    for (i, m) in mean.iter().enumerate() {
        if m.abs() > mean[axis].abs() {
            axis = i;
        }
    }
    let sign = if mean[axis] > 0.0 { 1 } else { -1 };
    let mut y = mean.to_vec();
    y.swap(0, axis);
    y[0] = mean[axis].abs();
    let exact = y
        .iter()
        .map(|&v| {
            Ratio::approximate_float(v).ok_or_else(|| Error::InvalidParameter(format!("mean entry {v} is not representable")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((Orientation { axis, sign }, exact))
}

/// Window indices of `D(2^k)` for each scale, with a membership mask.
#[derive(Debug, Clone)]
pub struct TubeGeometry {
    window: LatticeBox,
    k_min: u32,
    regions: Vec<Vec<usize>>,
    mask: Vec<u16>,
}

impl TubeGeometry {
    pub fn new(window: LatticeBox, mean: &[f64], k_min: u32, k_max: u32) -> Result<Self> {
        if mean.len() != window.dim {
            return Err(Error::DimensionMismatch(mean.len(), window.dim));
        }
        if k_min > k_max || k_max >= 16 + k_min || k_max > 40 {
            return Err(Error::InvalidParameter(format!("bad scale range {k_min}..={k_max}")));
        }
        if window.half_width <= 1i64 << k_max {
            return Err(Error::InvalidParameter(format!(
                "window half-width {} must exceed 2^{k_max}",
                window.half_width
            )));
        }
        let (orient, exact) = rotate_mean(mean)?;
        let mut mask = vec![0u16; window.len()];
        let regions = (k_min..=k_max)
            .map(|k| {
                let tube = DriftTube::new(1i64 << k, &exact)?;
                let idx: Vec<usize> = tube
                    .points()
                    .iter()
                    .map(|p| window.index_of(&orient.to_window(p.coords())).expect("tube lies inside the window"))
                    .collect();
                for &i in &idx {
                    mask[i] |= 1 << (k - k_min);
                }
                Ok(idx)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            window,
            k_min,
            regions,
            mask,
        })
    }

    pub fn scales(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.regions.len() as u32).map(move |i| self.k_min + i)
    }

    pub fn region(&self, k: u32) -> &[usize] {
        &self.regions[(k - self.k_min) as usize]
    }

    pub fn window(&self) -> LatticeBox {
        self.window
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeParams {
    /// Defaults to the label maximising `nu - mu`.
    #[serde(default)]
    pub xi: Option<usize>,
    pub mean: Vec<f64>,
    pub rho: f64,
    pub k_min: u32,
    pub k_max: u32,
    /// Null frequency of the events, estimated beforehand.
    pub gamma_hat: f64,
}

/// `1{B_k}` for each scale: the count of `xi` in `D(2^k)` reaches
/// `mu(xi) (|D| - rho sqrt|D|) + rho nu(xi) sqrt|D|`.
pub fn tube_events(
    scenery: &SceneryWindow,
    pair: &MeasurePair<f64>,
    params: &TubeParams,
    geometry: &TubeGeometry,
) -> Result<Vec<bool>> {
    check_scenery(scenery, pair)?;
    let xi = signal_label(pair, params.xi)?;
    if scenery.domain().as_box()? != geometry.window {
        return Err(Error::DomainMismatch("tube geometry was built for another window".into()));
    }
    let (mu, nu) = (pair.mu()[xi], pair.nu()[xi]);
    let labels = scenery.labels();
    Ok(geometry
        .regions
        .iter()
        .map(|region| {
            let size = region.len() as f64;
            let count = region.iter().filter(|&&i| labels[i] as usize == xi).count() as f64;
            let root = size.sqrt();
            count >= mu * (size - params.rho * root) + params.rho * nu * root
        })
        .collect())
}

/// Statistic is the fraction of scales with `B_k`; perturbed when it
/// exceeds `(gamma_hat + 1/2) / 2`.
pub fn drift_tube_detect(
    scenery: &SceneryWindow,
    pair: &MeasurePair<f64>,
    params: &TubeParams,
    geometry: &TubeGeometry,
) -> Result<DetectorOutcome> {
    if (params.k_min, params.k_max) != (geometry.k_min, geometry.k_min + geometry.regions.len() as u32 - 1) {
        return Err(Error::InvalidParameter("tube geometry scales differ from the parameters".into()));
    }
    if !(params.rho > 0.0) || !(0.0..=1.0).contains(&params.gamma_hat) {
        return Err(Error::InvalidParameter("need rho > 0 and gamma_hat in [0, 1]".into()));
    }
    let events = tube_events(scenery, pair, params, geometry)?;
    let statistic = events.iter().filter(|&&b| b).count() as f64 / events.len() as f64;
    let threshold = (params.gamma_hat + 0.5) / 2.0;
    let mut out = DetectorOutcome::new(
        "tube",
        statistic,
        threshold,
        json!({
            "xi": signal_label(pair, params.xi)?,
            "rho": params.rho,
            "gamma_hat": params.gamma_hat,
            "k_min": params.k_min,
            "k_max": params.k_max,
        }),
    );
    out.trajectory = Some(events.iter().map(|&b| f64::from(u8::from(b))).collect());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeCalibration {
    pub rho: f64,
    /// Per scale, the largest `rho` with `P(|[X] ∩ D| / sqrt|D| > rho) > rho`.
    pub per_scale: Vec<f64>,
    pub samples: usize,
}

/// Largest `r` with `#{x > r} / n > r`, i.e. `max_j min(x_(j), j / n)` over
/// the values sorted in decreasing order.
fn claim_rho(ratios: &mut [f64]) -> f64 {
    ratios.sort_by(|a, b| b.total_cmp(a));
    let n = ratios.len() as f64;
    ratios
        .iter()
        .enumerate()
        .map(|(j, &x)| x.min((j + 1) as f64 / n))
        .fold(0.0, f64::max)
}

/// Simulates hidden paths only and reports, per scale, the largest `rho`
/// passing the trace-count display; the returned `rho` is the lower
/// quartile across scales.
pub fn calibrate_tube_rho(geometry: &TubeGeometry, sampler: &PathSampler, samples: usize, seed: u64) -> Result<TubeCalibration> {
    if samples < 10 {
        return Err(Error::InvalidParameter("need at least 10 walks".into()));
    }
    let scales = geometry.regions.len();
    let counts: Vec<Vec<u32>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut c = vec![0u32; scales];
            let mut seen = rustc_hash::FxHashSet::default();
            sampler.trace(&mut stream_rng(seed, i), |p| {
                if let Some(j) = geometry.window.index_of(p.coords()) {
                    let m = geometry.mask[j];
                    if m != 0 && seen.insert(j) {
                        for (s, slot) in c.iter_mut().enumerate() {
                            *slot += u32::from((m >> s) & 1 == 1);
                        }
                    }
                }
            })?;
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let per_scale: Vec<f64> = (0..scales)
        .map(|s| {
            let root = (geometry.regions[s].len() as f64).sqrt();
            let mut ratios: Vec<f64> = counts.iter().map(|c| c[s] as f64 / root).collect();
            claim_rho(&mut ratios)
        })
        .collect();
    Ok(TubeCalibration {
        rho: quantile(&per_scale, 0.25),
        per_scale,
        samples,
    })
}
