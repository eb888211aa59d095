//! Z^d geometry, nearest-neighbour walk samplers and range statistics.

mod geometry;
mod intersect;

pub use geometry::{diamond_order, l1_shell, DriftTube, LatticeBox};
pub use intersect::{
    estimate_intersection_tail, estimate_tail_with, intersection_at_cutoffs,
    oriented_intersection_via_difference, range_intersection, tail_from_counts, TailFit,
    TailReport, TailRow,
};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 8;

/// Default hard cap on walk length.
pub const DEFAULT_MAX_STEPS: u64 = 100_000_000;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticePoint {
    dim: u8,
    coords: [i64; MAX_DIM],
}

impl std::fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl Serialize for LatticePoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LatticePoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        LatticePoint::new(&v).map_err(serde::de::Error::custom)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if !(1..=MAX_DIM).contains(&dim) {
        return Err(Error::InvalidParameter(format!(
            "dimension must be in 1..={MAX_DIM}, got {dim}"
        )));
    }
    Ok(())
}

impl LatticePoint {
    pub fn origin(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim: dim as u8,
            coords: [0; MAX_DIM],
        })
    }

    pub fn new(coords: &[i64]) -> Result<Self> {
        check_dim(coords.len())?;
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Self {
            dim: coords.len() as u8,
            coords: c,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    pub fn l1_norm(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).sum()
    }

    pub fn sup_norm(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// Moves one unit along `axis` in direction `sign`, failing on overflow.
    #[inline]
    pub fn step(&self, axis: usize, positive: bool) -> Result<Self> {
        let mut next = *self;
        let c = &mut next.coords[axis];
        *c = if positive {
            c.checked_add(1)
        } else {
            c.checked_sub(1)
        }
        .ok_or(Error::CoordinateOverflow)?;
        Ok(next)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        let mut out = *self;
        for i in 0..self.dim() {
            out.coords[i] = self.coords[i]
                .checked_sub(other.coords[i])
                .ok_or(Error::CoordinateOverflow)?;
        }
        Ok(out)
    }

    pub fn is_origin(&self) -> bool {
        self.coords().iter().all(|&c| c == 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WalkKind {
    Simple,
    BiasedNearestNeighbor,
    Oriented,
}

/// Step law of a nearest-neighbour walk. `step_probs[2i]` is the weight of
/// `+e_i`, `step_probs[2i + 1]` that of `-e_i`.
#[derive(Debug, Clone)]
pub struct WalkSpec {
    dim: usize,
    kind: WalkKind,
    step_probs: Vec<f64>,
    uniform_support: Option<Vec<usize>>,
    sampler: WeightedIndex<f64>,
}

impl WalkSpec {
    pub fn simple(dim: usize) -> Result<Self> {
        Self::build(dim, WalkKind::Simple, vec![1.0 / (2 * dim) as f64; 2 * dim])
    }

    /// Simple oriented kernel: uniform over the `d` positive basis steps.
    pub fn oriented(dim: usize) -> Result<Self> {
        let mut p = vec![0.0; 2 * dim];
        for i in 0..dim {
            p[2 * i] = 1.0 / dim as f64;
        }
        Self::build(dim, WalkKind::Oriented, p)
    }

    /// Oriented walk with arbitrary weights on the positive basis steps.
    pub fn oriented_weighted(weights: &[f64]) -> Result<Self> {
        let dim = weights.len();
        let mut p = vec![0.0; 2 * dim];
        for (i, w) in weights.iter().enumerate() {
            p[2 * i] = *w;
        }
        Self::build(dim, WalkKind::Oriented, p)
    }

    pub fn biased(dim: usize, step_probs: Vec<f64>) -> Result<Self> {
        Self::build(dim, WalkKind::BiasedNearestNeighbor, step_probs)
    }

    fn build(dim: usize, kind: WalkKind, step_probs: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if step_probs.len() != 2 * dim {
            return Err(Error::InvalidWalk(format!(
                "expected {} step probabilities, got {}",
                2 * dim,
                step_probs.len()
            )));
        }
        if step_probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidWalk("step probabilities must be nonnegative".into()));
        }
        let total: f64 = step_probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidWalk(format!("step probabilities sum to {total}")));
        }
        if kind == WalkKind::Oriented && (0..dim).any(|i| step_probs[2 * i + 1] > 0.0) {
            return Err(Error::InvalidWalk("oriented walks only step along +e_i".into()));
        }
        let support: Vec<usize> = (0..2 * dim).filter(|&i| step_probs[i] > 0.0).collect();
        let first = step_probs[support[0]];
        let uniform_support = support
            .iter()
            .all(|&i| step_probs[i] == first)
            .then_some(support);
        let sampler = WeightedIndex::new(step_probs.iter().copied())
            .map_err(|e| Error::InvalidWalk(e.to_string()))?;
        Ok(Self {
            dim,
            kind,
            step_probs,
            uniform_support,
            sampler,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> WalkKind {
        self.kind
    }

    pub fn step_probs(&self) -> &[f64] {
        &self.step_probs
    }

    /// True when no step decreases a coordinate, which makes `|x|_1` equal
    /// the step count.
    pub fn is_oriented(&self) -> bool {
        (0..self.dim).all(|i| self.step_probs[2 * i + 1] == 0.0)
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|i| self.step_probs[2 * i] - self.step_probs[2 * i + 1])
            .collect()
    }

    /// Returns `(axis, positive)`.
    #[inline]
    pub fn sample_step<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, bool) {
        let k = match &self.uniform_support {
            Some(s) if s.len() == 1 => s[0],
            Some(s) => s[rng.gen_range(0..s.len())],
            None => self.sampler.sample(rng),
        };
        (k / 2, k % 2 == 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StopRule {
    /// Exactly `t` steps.
    FixedSteps { t: u64 },
    /// First time `|X_j|_inf = k`.
    SupNormExit { k: i64 },
    /// First time the walk leaves the box `[-n, n)^d`.
    WindowExit { half_width: i64 },
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StopRule::SupNormExit { k } if k < 1 => {
                Err(Error::InvalidParameter(format!("sup-norm exit level must be >= 1, got {k}")))
            }
            StopRule::WindowExit { half_width } if half_width < 1 => Err(Error::InvalidParameter(
                format!("window half-width must be >= 1, got {half_width}"),
            )),
            _ => Ok(()),
        }
    }

    #[inline]
    fn reached(&self, p: &LatticePoint, steps: u64) -> bool {
        match *self {
            StopRule::FixedSteps { t } => steps >= t,
            StopRule::SupNormExit { k } => p.sup_norm() >= k,
            StopRule::WindowExit { half_width } => {
                p.coords().iter().any(|&c| c < -half_width || c >= half_width)
            }
        }
    }
}

/// Streams the vertices of one walk, origin first, to `visit`. Returns the
/// number of steps taken. The final vertex is the one at which the stop rule
/// fires.
pub fn walk_trace<R, F>(
    spec: &WalkSpec,
    stop: StopRule,
    max_steps: u64,
    rng: &mut R,
    mut visit: F,
) -> Result<u64>
where
    R: Rng + ?Sized,
    F: FnMut(&LatticePoint),
{
    stop.validate()?;
    let mut x = LatticePoint::origin(spec.dim)?;
    let mut steps = 0u64;
    visit(&x);
    while !stop.reached(&x, steps) {
        if steps >= max_steps {
            return Err(Error::StepBudgetExceeded(max_steps));
        }
        let (axis, positive) = spec.sample_step(rng);
        x = x.step(axis, positive)?;
        steps += 1;
        visit(&x);
    }
    Ok(steps)
}

/// A sampled path: the ordered vertex list and its range `[X]`.
#[derive(Debug, Clone)]
pub struct PathSample {
    dim: usize,
    vertices: Vec<LatticePoint>,
    visited: FxHashSet<LatticePoint>,
}

impl PathSample {
    /// Validates that the list starts at the origin and moves by unit steps.
    pub fn from_vertices(vertices: Vec<LatticePoint>) -> Result<Self> {
        let first = vertices
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty path".into()))?;
        if !first.is_origin() {
            return Err(Error::InvalidParameter("path must start at the origin".into()));
        }
        let dim = first.dim();
        for w in vertices.windows(2) {
            let d = w[1].checked_sub(&w[0])?;
            if d.l1_norm() != 1 {
                return Err(Error::InvalidParameter(format!(
                    "{:?} -> {:?} is not a unit step",
                    w[0], w[1]
                )));
            }
        }
        let visited = vertices.iter().copied().collect();
        Ok(Self {
            dim,
            vertices,
            visited,
        })
    }

    pub fn from_coords(coords: &[&[i64]]) -> Result<Self> {
        let v = coords
            .iter()
            .map(|c| LatticePoint::new(c))
            .collect::<Result<Vec<_>>>()?;
        Self::from_vertices(v)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[LatticePoint] {
        &self.vertices
    }

    pub fn visited(&self) -> &FxHashSet<LatticePoint> {
        &self.visited
    }

    pub fn steps(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn range_size(&self) -> usize {
        self.visited.len()
    }

    /// Every step is `+e_i` for some `i`.
    pub fn is_oriented(&self) -> bool {
        self.vertices.windows(2).all(|w| {
            let mut up = 0;
            for i in 0..self.dim {
                match w[1].coords[i] - w[0].coords[i] {
                    0 => {}
                    1 => up += 1,
                    _ => return false,
                }
            }
            up == 1
        })
    }
}

pub fn sample_walk<R: Rng + ?Sized>(spec: &WalkSpec, stop: StopRule, rng: &mut R) -> Result<PathSample> {
    sample_walk_with_budget(spec, stop, DEFAULT_MAX_STEPS, rng)
}

pub fn sample_walk_with_budget<R: Rng + ?Sized>(
    spec: &WalkSpec,
    stop: StopRule,
    max_steps: u64,
    rng: &mut R,
) -> Result<PathSample> {
    let mut vertices = Vec::new();
    walk_trace(spec, stop, max_steps, rng, |p| vertices.push(*p))?;
    let visited = vertices.iter().copied().collect();
    Ok(PathSample {
        dim: spec.dim,
        vertices,
        visited,
    })
}

/// Source of hidden paths on a lattice.
#[derive(Debug, Clone)]
pub enum PathSampler {
    Walk {
        spec: WalkSpec,
        stop: StopRule,
        max_steps: u64,
    },
    /// Uniform choice among fixed paths.
    Uniform(Vec<PathSample>),
}

impl PathSampler {
    pub fn walk(spec: WalkSpec, stop: StopRule) -> Self {
        PathSampler::Walk {
            spec,
            stop,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            PathSampler::Walk { spec, .. } => spec.dim(),
            PathSampler::Uniform(paths) => paths.first().map_or(0, |p| p.dim()),
        }
    }

    pub fn trace<R, F>(&self, rng: &mut R, mut visit: F) -> Result<()>
    where
        R: Rng + ?Sized,
        F: FnMut(&LatticePoint),
    {
        match self {
            PathSampler::Walk {
                spec,
                stop,
                max_steps,
            } => walk_trace(spec, *stop, *max_steps, rng, visit).map(|_| ()),
            PathSampler::Uniform(paths) => {
                if paths.is_empty() {
                    return Err(Error::InvalidParameter("no paths to choose from".into()));
                }
                let p = &paths[rng.gen_range(0..paths.len())];
                p.vertices().iter().for_each(&mut visit);
                Ok(())
            }
        }
    }
}
