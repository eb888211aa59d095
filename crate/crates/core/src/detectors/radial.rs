use serde_json::json;

use super::{check_scenery, DetectorOutcome};
use crate::error::{Error, Result};
use crate::measures::MeasurePair;
use crate::scenery::SceneryWindow;

fn shells_available(scenery: &SceneryWindow, shells: Option<usize>) -> Result<usize> {
    let window = scenery.domain().as_box()?;
    if window.dim != 2 {
        return Err(Error::Inapplicable(format!("radial statistic needs d = 2, got {}", window.dim)));
    }
    // shell k contains (k, 0), so it fits when k < n
    let max = (window.half_width - 1) as usize;
    let n = shells.unwrap_or(max);
    if n == 0 || n > max {
        return Err(Error::InvalidParameter(format!(
            "window of half-width {} holds shells 1..={max}, asked for {n}",
            window.half_width
        )));
    }
    Ok(n)
}

/// `U_n = sum_{k=1}^n (1/k) sum_{|v|_1 = k} f(omega(v))`.
pub fn radial_statistic(scenery: &SceneryWindow, pair: &MeasurePair<f64>, shells: Option<usize>) -> Result<f64> {
    check_scenery(scenery, pair)?;
    let n = shells_available(scenery, shells)?;
    let f = pair.centered_statistic_fn()?;
    let window = scenery.domain().as_box()?;
    let labels = scenery.labels();
    let inv: Vec<f64> = (0..=n).map(|k| if k == 0 { 0.0 } else { 1.0 / k as f64 }).collect();
    let ni = n as i64;
    let mut u = 0.0;
    for x in -ni..=ni {
        let rest = ni - x.abs();
        let row = window.index_of(&[x, 0]).unwrap();
        for y in -rest..=rest {
            let k = (x.abs() + y.abs()) as usize;
            let idx = (row as i64 + y) as usize;
            u += inv[k] * f[labels[idx] as usize];
        }
    }
    Ok(u)
}

/// `Var_P(U_n) = sum_k k^-2 4k Var_mu(f)`.
pub fn radial_null_variance(pair: &MeasurePair<f64>, shells: usize) -> Result<f64> {
    let f = pair.centered_statistic_fn()?;
    let var_f: f64 = pair.mu().iter().zip(&f).map(|(m, v)| m * v * v).sum();
    let harmonic: f64 = (1..=shells).map(|k| 1.0 / k as f64).sum();
    Ok(4.0 * var_f * harmonic)
}

/// Perturbed when `U_n > (1/2) sum_{k<=n} 1/k`. Uses every shell that fits
/// unless `shells` is given.
pub fn radial_detect(scenery: &SceneryWindow, pair: &MeasurePair<f64>, shells: Option<usize>) -> Result<DetectorOutcome> {
    let n = shells_available(scenery, shells)?;
    let u = radial_statistic(scenery, pair, Some(n))?;
    let threshold = 0.5 * (1..=n).map(|k| 1.0 / k as f64).sum::<f64>();
    Ok(DetectorOutcome::new("radial", u, threshold, json!({ "shells": n })))
}
