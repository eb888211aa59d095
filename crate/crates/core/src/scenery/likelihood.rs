use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SceneryWindow;
use crate::error::{Error, Result};
use crate::lattice::{diamond_order, PathSampler};
use crate::measures::MeasurePair;
use crate::scalar::Scalar;
use crate::seeds::stream_rng;
use crate::stats::{batch_means, Interval, Z95};
use crate::trees::FlowTree;

/// `g_0, g_1, ..., g_N` on a tree, revealing vertices in breadth-first
/// order. Revealing `v` moves the stubs below it (total mass `Psi(v)`) from
/// the product `A(parent)` to `A(v) = A(parent) r(omega(v))`, so each step
/// is one update.
pub fn exact_g_sequence<T: Scalar>(
    tree: &FlowTree<T>,
    scenery: &SceneryWindow,
    pair: &MeasurePair<T>,
) -> Result<Vec<T>> {
    scenery.domain().check_tree(tree)?;
    scenery.check_pair(pair)?;
    let r = pair.likelihood_ratios();
    let labels = scenery.labels();
    let mut prod = vec![T::one(); tree.len()];
    let mut g = T::one();
    let mut out = Vec::with_capacity(tree.len() + 1);
    out.push(g.clone());
    for v in tree.bfs_order() {
        let above = tree.parent(v).map_or_else(T::one, |p| prod[p].clone());
        prod[v] = above.clone() * r[labels[v] as usize].clone();
        g = g + tree.flow(v).clone() * (prod[v].clone() - above);
        out.push(g.clone());
    }
    Ok(out)
}

/// The reciprocal martingale `f_n = P(omega^(n)) / Q(omega^(n))`.
pub fn f_from_g<T: Scalar>(g: &T) -> Result<T> {
    if *g <= T::zero() {
        return Err(Error::InvalidParameter("g must be positive to invert".into()));
    }
    Ok(T::one() / g.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GEstimate {
    pub revealed: usize,
    pub replicas: usize,
    pub value: f64,
    pub std_error: f64,
    pub ci: Interval,
}

/// Monte Carlo `g_n` on a lattice window: the average over `replicas`
/// sampled paths of the product of `r(omega(z))` over the distinct trace
/// vertices among the first `n` in diamond order.
pub fn mc_g_estimate<R: Rng + ?Sized>(
    scenery: &SceneryWindow,
    pair: &MeasurePair<f64>,
    sampler: &PathSampler,
    n: usize,
    replicas: usize,
    rng: &mut R,
) -> Result<GEstimate> {
    scenery.check_pair(pair)?;
    let window = scenery.domain().as_box()?;
    if replicas < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 path replicas, got {replicas}")));
    }
    if n > window.len() {
        return Err(Error::InvalidParameter(format!("cannot reveal {n} of {} vertices", window.len())));
    }
    let mut revealed = vec![false; window.len()];
    for &i in &diamond_order(&window)[..n] {
        revealed[i] = true;
    }
    let r = pair.likelihood_ratios();
    let labels = scenery.labels();
    let base: u64 = rng.gen();
    let values: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let mut seen = rustc_hash::FxHashSet::default();
            let mut prod = 1.0;
            sampler.trace(&mut stream_rng(base, i), |p| {
                if let Some(j) = window.index_of(p.coords()) {
                    if revealed[j] && seen.insert(j) {
                        prod *= r[labels[j] as usize];
                    }
                }
            })?;
            Ok(prod)
        })
        .collect::<Result<_>>()?;
    let (value, se) = batch_means(&values, 20);
    let se = if se.is_finite() { se } else { 0.0 };
    Ok(GEstimate {
        revealed: n,
        replicas,
        value,
        std_error: se,
        ci: Interval {
            lo: value - Z95 * se,
            hi: value + Z95 * se,
        },
    })
}
