use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Cut, FlowTree};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seeds::stream_rng;

/// Root-to-stub vertex list `v_0 = root, v_1, ..., v_n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RayPrefix {
    vertices: Vec<usize>,
}

impl RayPrefix {
    pub fn new<T: Scalar>(tree: &FlowTree<T>, vertices: Vec<usize>) -> Result<Self> {
        if vertices.first() != Some(&0) {
            return Err(Error::InvalidParameter("ray must start at the root".into()));
        }
        for w in vertices.windows(2) {
            if w[1] >= tree.len() || tree.parent(w[1]) != Some(w[0]) {
                return Err(Error::InvalidParameter(format!("{} is not a child of {}", w[1], w[0])));
            }
        }
        Ok(Self { vertices })
    }

    /// Trusts the caller that consecutive entries are parent and child.
    pub(crate) fn from_vertices_unchecked(vertices: Vec<usize>) -> Self {
        Self { vertices }
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn depth(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn end(&self) -> usize {
        *self.vertices.last().unwrap()
    }
}

/// Descends from the root choosing child `c` of `v` with probability
/// `Psi(c) / Psi(v)`, so the prefix passes `v` with probability `Psi(v)`.
pub fn sample_ray<T: Scalar, R: Rng + ?Sized>(tree: &FlowTree<T>, rng: &mut R) -> RayPrefix {
    let mut v = 0;
    let mut vertices = vec![0];
    while !tree.is_stub(v) {
        let kids = tree.children(v);
        let weights: Vec<f64> = kids.iter().map(|&c| tree.flow(c).to_f64_lossy()).collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.gen::<f64>() * total;
        // fall back to the last positive child against rounding at the top end
        let mut pick = *kids
            .iter()
            .zip(&weights)
            .rev()
            .find(|(_, w)| **w > 0.0)
            .map(|(c, _)| c)
            .unwrap_or(&kids[0]);
        for (&c, &w) in kids.iter().zip(&weights) {
            if w > 0.0 && u < w {
                pick = c;
                break;
            }
            u -= w;
        }
        v = pick;
        vertices.push(v);
    }
    RayPrefix { vertices }
}

/// `min over n in [ceil(depth/2), depth] of -ln Psi(v_n) / n`, a finite-depth
/// stand-in for the liminf. A zero mass on the window gives `+inf`.
pub fn local_dimension_estimate<T: Scalar>(tree: &FlowTree<T>, ray: &RayPrefix) -> Result<f64> {
    let depth = ray.depth();
    if depth < 10 {
        return Err(Error::InvalidParameter(format!(
            "ray must reach depth >= 10, got {depth}"
        )));
    }
    let mut best = f64::INFINITY;
    for n in depth.div_ceil(2)..=depth {
        let psi = tree.flow(ray.vertices[n]).to_f64_lossy();
        let rate = if psi > 0.0 { -psi.ln() / n as f64 } else { f64::INFINITY };
        best = best.min(rate);
    }
    Ok(best)
}

/// Fractions of sampled rays whose dimension estimate lies above `H + gamma`,
/// below `H - gamma`, or in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionSplit {
    pub h: f64,
    pub gamma: f64,
    pub samples: usize,
    pub plus: f64,
    pub minus: f64,
    pub undecided: f64,
    /// Conditioning on a class is refused when its fraction is below
    /// `10 / samples`.
    pub plus_conditionable: bool,
    pub minus_conditionable: bool,
    pub estimates: Vec<f64>,
}

pub fn split_rays_by_dimension<T: Scalar, R: Rng + ?Sized>(
    tree: &FlowTree<T>,
    h: f64,
    gamma: f64,
    samples: usize,
    rng: &mut R,
) -> Result<DimensionSplit> {
    if !(gamma > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter("need finite H and gamma > 0".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one ray".into()));
    }
    let base: u64 = rng.gen();
    let estimates: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| local_dimension_estimate(tree, &sample_ray(tree, &mut stream_rng(base, i))))
        .collect::<Result<_>>()?;
    let n = samples as f64;
    let plus = estimates.iter().filter(|&&e| e > h + gamma).count() as f64 / n;
    let minus = estimates.iter().filter(|&&e| e < h - gamma).count() as f64 / n;
    let floor = 10.0 / n;
    Ok(DimensionSplit {
        h,
        gamma,
        samples,
        plus,
        minus,
        undecided: 1.0 - plus - minus,
        plus_conditionable: plus >= floor,
        minus_conditionable: minus >= floor,
        estimates,
    })
}

/// The vertices where rays make their `k`-th crossing below `H - gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingAntichain {
    pub k: usize,
    pub cut: Cut,
    /// Positive-mass stubs whose ray crosses fewer than `k` times.
    pub dropped_rays: usize,
    pub total_rays: usize,
}

/// A vertex `u` is a crossing when `-ln Psi(u) / |u| < H - gamma`. Every
/// stub is a ray; its `k`-th crossing depends only on its prefix, so rays
/// through the same crossing share it and the result is an antichain.
pub fn first_crossing_antichain<T: Scalar>(
    tree: &FlowTree<T>,
    h: f64,
    gamma: f64,
    k: usize,
) -> Result<CrossingAntichain> {
    if !(gamma > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter("need finite H and gamma > 0".into()));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("crossing index starts at 1".into()));
    }
    let threshold = h - gamma;
    let mut count = vec![0usize; tree.len()];
    let mut members = Vec::new();
    for v in tree.bfs_order().into_iter().skip(1) {
        let psi = tree.flow(v).to_f64_lossy();
        let crosses = psi > 0.0 && -psi.ln() / (tree.depth(v) as f64) < threshold;
        let p = tree.parent(v).unwrap();
        count[v] = count[p] + usize::from(crosses);
        if crosses && count[v] == k {
            members.push(v);
        }
    }
    let live: Vec<usize> = tree.stubs().filter(|&s| tree.flow(s).to_f64_lossy() > 0.0).collect();
    let dropped = live.iter().filter(|&&s| count[s] < k).count();
    let cut = Cut::new(members);
    debug_assert!(cut.is_antichain(tree));
    Ok(CrossingAntichain {
        k,
        cut,
        dropped_rays: dropped,
        total_rays: live.len(),
    })
}
