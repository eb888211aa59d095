//! Simple random walk on the (b+1)-regular tree.

use rand::Rng;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{estimate_tail_with, TailReport};

const UP: u8 = u8::MAX;

/// A walk from the root, stored as moves: `UP` or the index of the child
/// stepped into. The root has `b + 1` children, every other vertex `b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeWalk {
    b: usize,
    moves: Vec<u8>,
}

impl TreeWalk {
    pub fn b(&self) -> usize {
        self.b
    }

    pub fn steps(&self) -> usize {
        self.moves.len()
    }

    /// Distance from the root after each step, starting with 0.
    pub fn depths(&self) -> Vec<usize> {
        let mut d = 0usize;
        let mut out = vec![0];
        for &m in &self.moves {
            if m == UP {
                d -= 1;
            } else {
                d += 1;
            }
            out.push(d);
        }
        out
    }

    pub fn range_size(&self) -> usize {
        let mut trie = Trie::default();
        let mut seen = FxHashSet::default();
        for v in trie.replay(self) {
            seen.insert(v);
        }
        seen.len()
    }
}

/// Shared vertex naming for walks on the same tree.
#[derive(Default)]
struct Trie {
    child: FxHashMap<(u32, u8), u32>,
    parent: Vec<u32>,
}

impl Trie {
    /// Vertex ids visited at times `0..=steps`.
    fn replay(&mut self, walk: &TreeWalk) -> Vec<u32> {
        if self.parent.is_empty() {
            self.parent.push(0);
        }
        let mut v = 0u32;
        let mut out = Vec::with_capacity(walk.moves.len() + 1);
        out.push(v);
        for &m in &walk.moves {
            v = if m == UP {
                self.parent[v as usize]
            } else {
                let next = self.parent.len() as u32;
                let id = *self.child.entry((v, m)).or_insert(next);
                if id == next {
                    self.parent.push(v);
                }
                id
            };
            out.push(v);
        }
        out
    }
}

pub fn sample_tree_walk<R: Rng + ?Sized>(b: usize, horizon: usize, rng: &mut R) -> Result<TreeWalk> {
    if !(2..UP as usize).contains(&b) {
        return Err(Error::InvalidParameter(format!("need 2 <= b < 255, got {b}")));
    }
    let mut moves = Vec::with_capacity(horizon);
    let mut depth = 0usize;
    for _ in 0..horizon {
        let k = rng.gen_range(0..=b);
        if depth == 0 {
            moves.push(k as u8);
            depth = 1;
        } else if k == b {
            moves.push(UP);
            depth -= 1;
        } else {
            moves.push(k as u8);
            depth += 1;
        }
    }
    Ok(TreeWalk { b, moves })
}

/// Shared range size when both walks are cut after `h` steps, for each
/// `h` in `cutoffs`.
pub fn tree_walk_intersection_at(a: &TreeWalk, b: &TreeWalk, cutoffs: &[usize]) -> Result<Vec<usize>> {
    if a.b != b.b {
        return Err(Error::InvalidParameter(format!(
            "walks live on different trees (b = {} vs {})",
            a.b, b.b
        )));
    }
    let mut trie = Trie::default();
    let mut first_a: FxHashMap<u32, usize> = FxHashMap::default();
    for (t, v) in trie.replay(a).into_iter().enumerate() {
        first_a.entry(v).or_insert(t);
    }
    let mut seen = FxHashSet::default();
    let mut counts = vec![0; cutoffs.len()];
    for (t2, v) in trie.replay(b).into_iter().enumerate() {
        if !seen.insert(v) {
            continue;
        }
        if let Some(&t1) = first_a.get(&v) {
            let t = t1.max(t2);
            for (c, &h) in counts.iter_mut().zip(cutoffs) {
                if t <= h {
                    *c += 1;
                }
            }
        }
    }
    Ok(counts)
}

pub fn tree_walk_intersection(a: &TreeWalk, b: &TreeWalk) -> Result<usize> {
    Ok(tree_walk_intersection_at(a, b, &[usize::MAX])?[0])
}

/// Empirical tail of the shared range of two independent walks.
pub fn estimate_tree_walk_tail<R: Rng + ?Sized>(
    b: usize,
    horizon: usize,
    samples: usize,
    window: Option<(usize, usize)>,
    rng: &mut R,
) -> Result<TailReport> {
    let half = horizon / 2;
    estimate_tail_with(samples, horizon, window, rng, |r| {
        let x = sample_tree_walk(b, horizon, r)?;
        let y = sample_tree_walk(b, horizon, r)?;
        let c = tree_walk_intersection_at(&x, &y, &[horizon, half])?;
        Ok((c[0], c[1]))
    })
}
