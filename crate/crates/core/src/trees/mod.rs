//! Rooted leafless trees truncated at a fixed depth and carrying a unit
//! boundary flow. Vertices at the truncation depth are boundary stubs; a
//! stub stands for every ray through it.

mod cuts;
mod dimension;
mod walk;

pub use cuts::{
    branching_number, min_cut, min_cut_sum, BranchingConfig, BranchingEstimate, Cut, CutSumSource,
    LevelProfile,
};
pub use dimension::{
    first_crossing_antichain, local_dimension_estimate, sample_ray, split_rays_by_dimension,
    CrossingAntichain, DimensionSplit, RayPrefix,
};
pub use walk::{
    estimate_tree_walk_tail, sample_tree_walk, tree_walk_intersection,
    tree_walk_intersection_at, TreeWalk,
};

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seeds::stream_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTree<T: Scalar> {
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    max_depth: usize,
    flow: Vec<T>,
}

/// How to grow a tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TreeGenerator {
    BAry { b: usize, depth: usize },
    /// Vertices at depth `k` have `child_counts[k % len]` children.
    SphericallySymmetric { child_counts: Vec<usize>, depth: usize },
    Explicit { edges: Vec<(usize, usize)> },
    /// Galton-Watson tree with offspring law `offspring[j] = P(j children)`,
    /// conditioned by rejection on reaching `depth`, then pruned to the
    /// branches that reach it.
    Random {
        offspring: Vec<f64>,
        depth: usize,
        seed: u64,
        #[serde(default = "default_max_nodes")]
        max_nodes: usize,
    },
}

fn default_max_nodes() -> usize {
    1 << 22
}

/// Flow to attach after building.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowSpec<T> {
    /// Each vertex splits its mass equally among its children.
    UniformSplit,
    /// Mass per vertex id.
    Explicit(Vec<T>),
    /// The unit flow minimising `max_v beta^{|v|} Psi(v)` over non-root `v`.
    MaxFlowForBeta(T),
}

impl<T: Scalar> FlowTree<T> {
    /// Builds from a parent array (root is vertex 0 with no parent) and
    /// attaches the uniform-split flow.
    pub fn from_parents(parent: Vec<Option<usize>>) -> Result<Self> {
        let n = parent.len();
        if n == 0 || parent[0].is_some() {
            return Err(Error::InvalidTree("vertex 0 must be the root".into()));
        }
        let mut children = vec![Vec::new(); n];
        for (v, p) in parent.iter().enumerate().skip(1) {
            let p = p.ok_or_else(|| Error::InvalidTree(format!("vertex {v} has no parent")))?;
            if p >= n {
                return Err(Error::InvalidTree(format!("parent {p} of {v} out of range")));
            }
            children[p].push(v);
        }
        let mut depth = vec![usize::MAX; n];
        depth[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for &c in &children[v] {
                depth[c] = depth[v] + 1;
                reached += 1;
                queue.push_back(c);
            }
        }
        if reached != n {
            return Err(Error::InvalidTree("not every vertex is connected to the root".into()));
        }
        let max_depth = *depth.iter().max().unwrap();
        if max_depth == 0 {
            return Err(Error::InvalidTree("tree must have depth >= 1".into()));
        }
        for v in 0..n {
            if children[v].is_empty() && depth[v] < max_depth {
                return Err(Error::InvalidTree(format!(
                    "vertex {v} at depth {} has no children (leafless trees end only at depth {max_depth})",
                    depth[v]
                )));
            }
        }
        let mut t = Self {
            parent,
            children,
            depth,
            max_depth,
            flow: Vec::new(),
        };
        t.flow = t.uniform_flow();
        Ok(t)
    }

    /// Edge list of `(parent, child)` pairs with root 0.
    pub fn from_edges(edges: &[(usize, usize)]) -> Result<Self> {
        let n = edges.iter().map(|&(a, b)| a.max(b)).max().map_or(1, |m| m + 1);
        let mut parent = vec![None; n];
        for &(p, c) in edges {
            if c == 0 {
                return Err(Error::InvalidTree("root 0 cannot be a child".into()));
            }
            if parent[c].replace(p).is_some() {
                return Err(Error::InvalidTree(format!("vertex {c} has two parents")));
            }
        }
        Self::from_parents(parent)
    }

    /// Parses one `parent child` pair per line; blank lines and `#` comments
    /// are skipped.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |s: Option<&str>| -> Result<usize> {
                s.and_then(|x| x.parse().ok()).ok_or_else(|| {
                    Error::InvalidTree(format!("line {}: expected `parent child`", lineno + 1))
                })
            };
            let p = parse(it.next())?;
            let c = parse(it.next())?;
            if it.next().is_some() {
                return Err(Error::InvalidTree(format!("line {}: trailing tokens", lineno + 1)));
            }
            edges.push((p, c));
        }
        Self::from_edges(&edges)
    }

    /// Level-by-level construction from per-depth child counts.
    fn from_level_counts(depth: usize, count_at: impl Fn(usize) -> usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidTree("tree must have depth >= 1".into()));
        }
        let mut parent = vec![None];
        let mut frontier = vec![0usize];
        for d in 0..depth {
            let c = count_at(d);
            if c == 0 {
                return Err(Error::InvalidTree(format!("zero children at depth {d}")));
            }
            let mut next = Vec::with_capacity(frontier.len() * c);
            for &v in &frontier {
                for _ in 0..c {
                    next.push(parent.len());
                    parent.push(Some(v));
                }
            }
            frontier = next;
        }
        Self::from_parents(parent)
    }

    pub fn build(generator: &TreeGenerator) -> Result<Self> {
        match generator {
            TreeGenerator::BAry { b, depth } => {
                if *b == 0 {
                    return Err(Error::InvalidTree("b must be >= 1".into()));
                }
                Self::from_level_counts(*depth, |_| *b)
            }
            TreeGenerator::SphericallySymmetric {
                child_counts,
                depth,
            } => {
                if child_counts.is_empty() {
                    return Err(Error::InvalidTree("empty child-count sequence".into()));
                }
                Self::from_level_counts(*depth, |d| child_counts[d % child_counts.len()])
            }
            TreeGenerator::Explicit { edges } => Self::from_edges(edges),
            TreeGenerator::Random {
                offspring,
                depth,
                seed,
                max_nodes,
            } => random_tree(offspring, *depth, *seed, *max_nodes),
        }
    }

    pub fn unary_path(depth: usize) -> Result<Self> {
        Self::from_level_counts(depth, |_| 1)
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    pub fn flow(&self, v: usize) -> &T {
        &self.flow[v]
    }

    pub fn flows(&self) -> &[T] {
        &self.flow
    }

    pub fn is_stub(&self, v: usize) -> bool {
        self.depth[v] == self.max_depth
    }

    pub fn stubs(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&v| self.is_stub(v))
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.max_depth + 1];
        for &d in &self.depth {
            sizes[d] += 1;
        }
        sizes
    }

    /// Vertex ids in breadth-first order (children in stored order).
    pub fn bfs_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut queue = VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            out.push(v);
            queue.extend(self.children[v].iter().copied());
        }
        out
    }

    /// Vertices from the root to `v`, inclusive.
    pub fn root_path(&self, mut v: usize) -> Vec<usize> {
        let mut path = vec![v];
        while let Some(p) = self.parent[v] {
            path.push(p);
            v = p;
        }
        path.reverse();
        path
    }

    /// `a` is an ancestor of `b` or equal to it.
    pub fn is_ancestor_or_self(&self, a: usize, mut b: usize) -> bool {
        if self.depth[a] > self.depth[b] {
            return false;
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].expect("non-root has a parent");
        }
        a == b
    }

    /// The tree cut off at `depth`, keeping the flow on surviving vertices.
    pub fn truncate(&self, depth: usize) -> Result<Self> {
        if depth == 0 || depth > self.max_depth {
            return Err(Error::InvalidParameter(format!(
                "truncation depth must be in 1..={}, got {depth}",
                self.max_depth
            )));
        }
        let keep: Vec<usize> = self.bfs_order().into_iter().filter(|&v| self.depth[v] <= depth).collect();
        let mut new_id = vec![usize::MAX; self.len()];
        for (i, &v) in keep.iter().enumerate() {
            new_id[v] = i;
        }
        let parent = keep.iter().map(|&v| self.parent[v].map(|p| new_id[p])).collect();
        let mut t = Self::from_parents(parent)?;
        t.flow = keep.iter().map(|&v| self.flow[v].clone()).collect();
        Ok(t)
    }

    fn uniform_flow(&self) -> Vec<T> {
        let mut flow = vec![T::zero(); self.len()];
        flow[0] = T::one();
        for v in self.bfs_order() {
            let k = self.children[v].len();
            if k == 0 {
                continue;
            }
            let share = flow[v].clone() / <T as Scalar>::from_usize(k);
            for &c in &self.children[v] {
                flow[c] = share.clone();
            }
        }
        flow
    }

    /// Checks `Psi(root) = 1`, nonnegativity and conservation at every
    /// non-stub vertex.
    pub fn check_flow(&self, flow: &[T]) -> Result<()> {
        if flow.len() != self.len() {
            return Err(Error::InvalidFlow(format!(
                "{} masses for {} vertices",
                flow.len(),
                self.len()
            )));
        }
        let tol = T::tolerance();
        if (flow[0].clone() - T::one()).abs() > tol {
            return Err(Error::InvalidFlow(format!("root mass is {:?}, not 1", flow[0])));
        }
        for v in 0..self.len() {
            if flow[v] < T::zero() {
                return Err(Error::InvalidFlow(format!("negative mass at vertex {v}")));
            }
            if self.is_stub(v) {
                continue;
            }
            let out = self.children[v]
                .iter()
                .fold(T::zero(), |a, &c| a + flow[c].clone());
            if (out.clone() - flow[v].clone()).abs() > tol {
                return Err(Error::InvalidFlow(format!(
                    "vertex {v} has mass {:?} but its children carry {out:?}",
                    flow[v]
                )));
            }
        }
        Ok(())
    }

    pub fn attach_flow(mut self, spec: FlowSpec<T>) -> Result<Self> {
        let flow = match spec {
            FlowSpec::UniformSplit => self.uniform_flow(),
            FlowSpec::Explicit(masses) => masses,
            FlowSpec::MaxFlowForBeta(beta) => self.max_flow_for_beta(&beta)?,
        };
        self.check_flow(&flow)?;
        self.flow = flow;
        Ok(self)
    }

    /// Maximum flow under vertex capacities `beta^{-|v|}` (root uncapped),
    /// rescaled to unit mass. Splits each vertex's mass in proportion to the
    /// children's maximal throughput, which keeps every vertex within
    /// capacity.
    fn max_flow_for_beta(&self, beta: &T) -> Result<Vec<T>> {
        if *beta <= T::zero() {
            return Err(Error::InvalidParameter("beta must be positive".into()));
        }
        let through = self.max_throughput(beta);
        let total = through[0].clone();
        let mut flow = vec![T::zero(); self.len()];
        flow[0] = T::one();
        for v in self.bfs_order() {
            if self.children[v].is_empty() {
                continue;
            }
            let denom = self.children[v]
                .iter()
                .fold(T::zero(), |a, &c| a + through[c].clone());
            for &c in &self.children[v] {
                flow[c] = flow[v].clone() * through[c].clone() / denom.clone();
            }
        }
        debug_assert!(total > T::zero());
        Ok(flow)
    }

    /// `F(v)`: the most flow the subtree of `v` can pass to the stubs.
    pub(crate) fn max_throughput(&self, beta: &T) -> Vec<T> {
        let mut f = vec![T::zero(); self.len()];
        let order = self.bfs_order();
        for &v in order.iter().rev() {
            let cap = beta.inv_pow(self.depth[v]);
            if self.is_stub(v) {
                f[v] = cap;
                continue;
            }
            let below = self.children[v]
                .iter()
                .fold(T::zero(), |a, &c| a + f[c].clone());
            f[v] = if v == 0 || below < cap { below } else { cap };
        }
        f
    }

    /// `max over non-root v of beta^{|v|} Psi(v)`.
    pub fn max_weighted_mass(&self, beta: &T) -> T {
        (1..self.len())
            .map(|v| beta.pow(self.depth[v]) * self.flow[v].clone())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    pub fn to_f64(&self) -> FlowTree<f64> {
        FlowTree {
            parent: self.parent.clone(),
            children: self.children.clone(),
            depth: self.depth.clone(),
            max_depth: self.max_depth,
            flow: self.flow.iter().map(Scalar::to_f64_lossy).collect(),
        }
    }

    /// Edge list text, one `parent child` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for v in 1..self.len() {
            s.push_str(&format!("{} {}\n", self.parent[v].unwrap(), v));
        }
        s
    }
}

fn random_tree<T: Scalar>(offspring: &[f64], depth: usize, seed: u64, max_nodes: usize) -> Result<FlowTree<T>> {
    if offspring.is_empty() || offspring.iter().any(|p| *p < 0.0) {
        return Err(Error::InvalidParameter("offspring law must be a probability vector".into()));
    }
    let total: f64 = offspring.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("offspring law sums to {total}")));
    }
    if offspring[0] == 1.0 {
        return Err(Error::InvalidParameter("offspring law is extinct at generation one".into()));
    }
    let mut law = offspring.to_vec();
    if law.len() < 2 {
        law.push(0.0);
    }
    let sampler = crate::measures::LabelSampler::new(&law)?;
    const MAX_ATTEMPTS: u64 = 10_000;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = stream_rng(seed, attempt);
        if let Some(parent) = grow(&sampler, depth, max_nodes, &mut rng)? {
            return prune_and_build(parent, depth);
        }
    }
    Err(Error::InvalidParameter(format!(
        "no surviving tree of depth {depth} in {MAX_ATTEMPTS} attempts"
    )))
}

/// One Galton-Watson sample down to `depth`, or `None` on extinction.
fn grow<R: Rng>(
    sampler: &crate::measures::LabelSampler,
    depth: usize,
    max_nodes: usize,
    rng: &mut R,
) -> Result<Option<Vec<(Option<usize>, usize)>>> {
    let mut nodes: Vec<(Option<usize>, usize)> = vec![(None, 0)];
    let mut frontier = vec![0usize];
    for d in 0..depth {
        let mut next = Vec::new();
        for &v in &frontier {
            let k = sampler.sample(rng) as usize;
            for _ in 0..k {
                next.push(nodes.len());
                nodes.push((Some(v), d + 1));
                if nodes.len() > max_nodes {
                    return Err(Error::InvalidParameter(format!(
                        "random tree exceeded {max_nodes} vertices; lower the depth"
                    )));
                }
            }
        }
        if next.is_empty() {
            return Ok(None);
        }
        frontier = next;
    }
    Ok(Some(nodes))
}

fn prune_and_build<T: Scalar>(nodes: Vec<(Option<usize>, usize)>, depth: usize) -> Result<FlowTree<T>> {
    let n = nodes.len();
    let mut alive = vec![false; n];
    // nodes are stored level by level, so a reverse sweep sees children first
    for v in (0..n).rev() {
        if nodes[v].1 == depth {
            alive[v] = true;
        }
        if alive[v] {
            if let Some(p) = nodes[v].0 {
                alive[p] = true;
            }
        }
    }
    let mut new_id = vec![usize::MAX; n];
    let mut parent = Vec::new();
    for v in 0..n {
        if alive[v] {
            new_id[v] = parent.len();
            parent.push(nodes[v].0.map(|p| new_id[p]));
        }
    }
    FlowTree::from_parents(parent)
}
