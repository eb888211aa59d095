use serde::{Deserialize, Serialize};

use super::{FlowTree, TreeGenerator};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A set of non-root vertices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cut {
    pub vertices: Vec<usize>,
}

impl Cut {
    pub fn new(mut vertices: Vec<usize>) -> Self {
        vertices.sort_unstable();
        vertices.dedup();
        Self { vertices }
    }

    /// All vertices at `depth`.
    pub fn level<T: Scalar>(tree: &FlowTree<T>, depth: usize) -> Result<Self> {
        if depth == 0 || depth > tree.max_depth() {
            return Err(Error::InvalidParameter(format!(
                "level cut depth must be in 1..={}, got {depth}",
                tree.max_depth()
            )));
        }
        Ok(Self::new((0..tree.len()).filter(|&v| tree.depth(v) == depth).collect()))
    }

    /// No member is a proper ancestor of another.
    pub fn is_antichain<T: Scalar>(&self, tree: &FlowTree<T>) -> bool {
        let mut marked = vec![false; tree.len()];
        for &v in &self.vertices {
            marked[v] = true;
        }
        self.vertices.iter().all(|&v| {
            let mut u = v;
            while let Some(p) = tree.parent(u) {
                if marked[p] {
                    return false;
                }
                u = p;
            }
            true
        })
    }

    /// Every stub has an ancestor-or-self in the cut.
    pub fn separates<T: Scalar>(&self, tree: &FlowTree<T>) -> bool {
        let mut marked = vec![false; tree.len()];
        for &v in &self.vertices {
            marked[v] = true;
        }
        tree.stubs().all(|s| tree.root_path(s).iter().any(|&u| marked[u]))
    }

    pub fn validate<T: Scalar>(&self, tree: &FlowTree<T>) -> Result<()> {
        if self.vertices.iter().any(|&v| v >= tree.len()) {
            return Err(Error::InvalidParameter("cut vertex out of range".into()));
        }
        if self.vertices.contains(&0) {
            return Err(Error::InvalidParameter("the root is never a cut vertex".into()));
        }
        if !self.is_antichain(tree) {
            return Err(Error::InvalidParameter("cut is not an antichain".into()));
        }
        if !self.separates(tree) {
            return Err(Error::InvalidParameter("cut does not separate the root from the stubs".into()));
        }
        Ok(())
    }

    pub fn weight<T: Scalar>(&self, tree: &FlowTree<T>, beta: &T) -> T {
        self.vertices
            .iter()
            .fold(T::zero(), |a, &v| a + beta.inv_pow(tree.depth(v)))
    }
}

fn check_beta<T: Scalar>(beta: &T) -> Result<()> {
    if *beta <= T::zero() {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta:?}")));
    }
    Ok(())
}

/// `min over cuts C of sum_{u in C} beta^{-|u|}`. Stubs cost `beta^{-D}`;
/// an inner vertex either joins the cut or defers to its children.
pub fn min_cut_sum<T: Scalar>(tree: &FlowTree<T>, beta: &T) -> Result<T> {
    check_beta(beta)?;
    Ok(tree.max_throughput(beta)[0].clone())
}

/// Optimal cut and its weight. Ties prefer the shallower vertex.
pub fn min_cut<T: Scalar>(tree: &FlowTree<T>, beta: &T) -> Result<(T, Cut)> {
    check_beta(beta)?;
    let val = tree.max_throughput(beta);
    let mut cut = Vec::new();
    let mut stack: Vec<usize> = tree.children(0).to_vec();
    while let Some(v) = stack.pop() {
        let cap = beta.inv_pow(tree.depth(v));
        if tree.is_stub(v) || val[v] == cap {
            cut.push(v);
        } else {
            stack.extend_from_slice(tree.children(v));
        }
    }
    Ok((val[0].clone(), Cut::new(cut)))
}

/// Anything that can report the minimal cut sum when truncated at a depth.
pub trait CutSumSource {
    fn max_depth(&self) -> usize;
    fn min_cut_sum_at(&self, depth: usize, beta: f64) -> Result<f64>;
}

/// Spherically symmetric tree given by per-depth child counts; the cut DP
/// collapses to one value per level, so depth is cheap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelProfile {
    pub child_counts: Vec<usize>,
    pub max_depth: usize,
}

impl LevelProfile {
    pub fn b_ary(b: usize, max_depth: usize) -> Self {
        Self {
            child_counts: vec![b],
            max_depth,
        }
    }

    pub fn from_generator(g: &TreeGenerator, max_depth: usize) -> Option<Self> {
        match g {
            TreeGenerator::BAry { b, .. } => Some(Self::b_ary(*b, max_depth)),
            TreeGenerator::SphericallySymmetric { child_counts, .. } => Some(Self {
                child_counts: child_counts.clone(),
                max_depth,
            }),
            _ => None,
        }
    }

    fn count(&self, depth: usize) -> f64 {
        self.child_counts[depth % self.child_counts.len()] as f64
    }
}

impl CutSumSource for LevelProfile {
    fn max_depth(&self) -> usize {
        self.max_depth
    }

    fn min_cut_sum_at(&self, depth: usize, beta: f64) -> Result<f64> {
        check_beta(&beta)?;
        if depth == 0 || self.child_counts.iter().any(|&c| c == 0) {
            return Err(Error::InvalidParameter("need depth >= 1 and positive child counts".into()));
        }
        let mut val = beta.powi(-(depth as i32));
        for k in (1..depth).rev() {
            val = beta.powi(-(k as i32)).min(self.count(k) * val);
        }
        Ok(self.count(0) * val)
    }
}

impl CutSumSource for FlowTree<f64> {
    fn max_depth(&self) -> usize {
        FlowTree::max_depth(self)
    }

    fn min_cut_sum_at(&self, depth: usize, beta: f64) -> Result<f64> {
        if depth == FlowTree::max_depth(self) {
            min_cut_sum(self, &beta)
        } else {
            min_cut_sum(&self.truncate(depth)?, &beta)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchingConfig {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
    pub start_depth: usize,
    pub depth_step: usize,
}

impl Default for BranchingConfig {
    fn default() -> Self {
        Self {
            lo: 1.0,
            hi: 8.0,
            tol: 0.01,
            start_depth: 5,
            depth_step: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchingEstimate {
    pub lo: f64,
    pub hi: f64,
    pub estimate: f64,
    pub depth_schedule: Vec<usize>,
    pub iterations: usize,
    /// Some classification disagreed between the full depth span and its
    /// deeper half, or the initial bracket did not straddle the threshold.
    pub inconclusive: bool,
}

/// Classifies `beta` as above the branching number when the minimal cut
/// sum shrinks from the shallowest to the deepest scheduled depth. Returns
/// `(above, stable)` where `stable` says the deeper half of the schedule
/// agrees.
fn classify(src: &dyn CutSumSource, schedule: &[usize], beta: f64) -> Result<(bool, bool)> {
    let sums: Vec<f64> = schedule
        .iter()
        .map(|&d| src.min_cut_sum_at(d, beta))
        .collect::<Result<_>>()?;
    let last = *sums.last().unwrap();
    let above = last < sums[0];
    let mid = sums[(sums.len() - 1) / 2];
    let above_half = last < mid;
    Ok((above, above == above_half || sums.len() < 3))
}

/// Bisection on `beta` for the threshold where minimal cut sums stop
/// vanishing with depth.
pub fn branching_number(src: &dyn CutSumSource, cfg: &BranchingConfig) -> Result<BranchingEstimate> {
    if !(cfg.tol > 0.0) || !(cfg.lo > 0.0) || !(cfg.hi > cfg.lo) {
        return Err(Error::InvalidParameter("need tol > 0 and 0 < lo < hi".into()));
    }
    if cfg.depth_step == 0 || cfg.start_depth == 0 {
        return Err(Error::InvalidParameter("depths must be positive".into()));
    }
    let schedule: Vec<usize> = (0..)
        .map(|i| cfg.start_depth + i * cfg.depth_step)
        .take_while(|&d| d <= src.max_depth())
        .collect();
    if schedule.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "max depth {} leaves fewer than two scheduled depths",
            src.max_depth()
        )));
    }
    let (mut lo, mut hi) = (cfg.lo, cfg.hi);
    let mut inconclusive = false;
    let (lo_above, s1) = classify(src, &schedule, lo)?;
    let (hi_above, s2) = classify(src, &schedule, hi)?;
    if lo_above || !hi_above || !s1 || !s2 {
        inconclusive = true;
    }
    let mut iterations = 0;
    while hi - lo > cfg.tol {
        let mid = 0.5 * (lo + hi);
        let (above, stable) = classify(src, &schedule, mid)?;
        inconclusive |= !stable;
        if above {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    Ok(BranchingEstimate {
        lo,
        hi,
        estimate: 0.5 * (lo + hi),
        depth_schedule: schedule,
        iterations,
        inconclusive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::stream_rng;
    use num_rational::BigRational;
    use rand::Rng;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    /// Every cut of the subtree below each root child, by recursion:
    /// a vertex either joins the cut or every child subtree contributes one.
    fn all_cuts<T: Scalar>(tree: &FlowTree<T>) -> Vec<Vec<usize>> {
        fn below<T: Scalar>(tree: &FlowTree<T>, v: usize) -> Vec<Vec<usize>> {
            let mut out = vec![vec![v]];
            if !tree.is_stub(v) {
                for combo in product(tree, tree.children(v)) {
                    out.push(combo);
                }
            }
            out
        }
        fn product<T: Scalar>(tree: &FlowTree<T>, kids: &[usize]) -> Vec<Vec<usize>> {
            let mut acc: Vec<Vec<usize>> = vec![vec![]];
            for &c in kids {
                let opts = below(tree, c);
                acc = acc
                    .iter()
                    .flat_map(|a| opts.iter().map(move |o| [a.clone(), o.clone()].concat()))
                    .collect();
            }
            acc
        }
        product(tree, tree.children(0))
    }

    fn random_tree(seed: u64) -> FlowTree<BigRational> {
        let mut rng = stream_rng(seed, 0);
        loop {
            let depth = rng.gen_range(1..=5);
            let mut parent = vec![None];
            let mut frontier = vec![0usize];
            for _ in 0..depth {
                let mut next = Vec::new();
                for &v in &frontier {
                    for _ in 0..rng.gen_range(1..=3) {
                        next.push(parent.len());
                        parent.push(Some(v));
                    }
                }
                frontier = next;
            }
            if parent.len() <= 20 {
                return FlowTree::from_parents(parent).unwrap();
            }
        }
    }

    #[test]
    fn examples() {
        let u: FlowTree<f64> = FlowTree::unary_path(10).unwrap();
        assert_eq!(min_cut_sum(&u, &2.0).unwrap(), 2f64.powi(-10));
        for d in 1..=4 {
            let t: FlowTree<BigRational> = FlowTree::build(&TreeGenerator::BAry { b: 2, depth: d }).unwrap();
            assert_eq!(min_cut_sum(&t, &q(1, 1)).unwrap(), q(2, 1));
            assert_eq!(min_cut_sum(&t, &q(4, 1)).unwrap(), Scalar::pow(&q(1, 2), d));
        }
        assert!(min_cut_sum(&u, &0.0).is_err());
    }

    #[test]
    fn dp_matches_exhaustive_enumeration() {
        for seed in 0..100 {
            let t = random_tree(seed);
            let cuts = all_cuts(&t);
            for beta in [q(1, 2), q(1, 1), q(3, 2), q(2, 1), q(7, 3)] {
                let brute = cuts
                    .iter()
                    .map(|c| Cut::new(c.clone()).weight(&t, &beta))
                    .min_by(|a, b| a.partial_cmp(b).unwrap())
                    .unwrap();
                assert_eq!(min_cut_sum(&t, &beta).unwrap(), brute, "seed {seed}");
                let (w, cut) = min_cut(&t, &beta).unwrap();
                assert_eq!(w, brute);
                assert_eq!(cut.weight(&t, &beta), brute);
                cut.validate(&t).unwrap();
            }
            for c in &cuts {
                Cut::new(c.clone()).validate(&t).unwrap();
            }
        }
    }

    #[test]
    fn cut_sum_nonincreasing_in_beta() {
        for seed in 0..20 {
            let t = random_tree(seed).to_f64();
            let mut prev = f64::INFINITY;
            for i in 1..40 {
                let v = min_cut_sum(&t, &(0.25 * i as f64)).unwrap();
                assert!(v <= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn cut_validation() {
        let t: FlowTree<f64> = FlowTree::build(&TreeGenerator::BAry { b: 2, depth: 2 }).unwrap();
        assert!(Cut::level(&t, 1).unwrap().validate(&t).is_ok());
        assert!(Cut::new(vec![1]).validate(&t).is_err());
        assert!(Cut::new(vec![1, 3, 4, 2]).validate(&t).is_err());
        assert!(Cut::new(vec![0]).validate(&t).is_err());
    }

    #[test]
    fn level_profile_agrees_with_explicit_tree() {
        let t: FlowTree<f64> = FlowTree::build(&TreeGenerator::SphericallySymmetric {
            child_counts: vec![1, 2, 3],
            depth: 9,
        })
        .unwrap();
        let p = LevelProfile {
            child_counts: vec![1, 2, 3],
            max_depth: 9,
        };
        for beta in [0.5, 1.0, 1.5, 1.8, 2.5] {
            for d in 1..=9 {
                let a = p.min_cut_sum_at(d, beta).unwrap();
                let b = t.min_cut_sum_at(d, beta).unwrap();
                assert!((a - b).abs() <= 1e-12 * a.max(b));
            }
        }
    }

    #[test]
    fn branching_examples() {
        let cfg = BranchingConfig {
            lo: 0.5,
            hi: 6.0,
            tol: 0.005,
            start_depth: 5,
            depth_step: 5,
        };
        for b in [2usize, 3, 4] {
            let est = branching_number(&LevelProfile::b_ary(b, 25), &cfg).unwrap();
            assert!((est.estimate - b as f64).abs() <= 0.01, "{est:?}");
            assert!(est.hi - est.lo <= cfg.tol);
            assert!(!est.inconclusive);
        }
        let unary = branching_number(&LevelProfile::b_ary(1, 25), &cfg).unwrap();
        assert!((unary.estimate - 1.0).abs() <= 0.01);
        let alt = LevelProfile {
            child_counts: vec![1, 2],
            max_depth: 25,
        };
        let est = branching_number(&alt, &cfg).unwrap();
        assert!((est.estimate - 2f64.sqrt()).abs() <= 0.02, "{est:?}");
        assert_eq!(est.depth_schedule, vec![5, 10, 15, 20, 25]);
    }
}
