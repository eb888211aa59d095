use num_rational::Ratio;
use num_traits::{Signed, Zero};
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use super::{check_dim, LatticePoint};
use crate::error::{Error, Result};

/// The box `[-n, n)^d`, indexed row-major with the last axis fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBox {
    pub dim: usize,
    pub half_width: i64,
}

impl LatticeBox {
    pub fn new(dim: usize, half_width: i64) -> Result<Self> {
        check_dim(dim)?;
        if half_width < 1 {
            return Err(Error::InvalidParameter(format!(
                "box half-width must be >= 1, got {half_width}"
            )));
        }
        let b = Self { dim, half_width };
        if (2 * half_width as u128).pow(dim as u32) > usize::MAX as u128 / 2 {
            return Err(Error::InvalidParameter("box too large".into()));
        }
        Ok(b)
    }

    pub fn side(&self) -> usize {
        2 * self.half_width as usize
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index_of(&self, coords: &[i64]) -> Option<usize> {
        let n = self.half_width;
        let side = self.side();
        let mut idx = 0usize;
        for &c in coords {
            if c < -n || c >= n {
                return None;
            }
            idx = idx * side + (c + n) as usize;
        }
        Some(idx)
    }

    pub fn point_of(&self, mut index: usize) -> LatticePoint {
        let side = self.side();
        let mut c = vec![0i64; self.dim];
        for slot in c.iter_mut().rev() {
            *slot = (index % side) as i64 - self.half_width;
            index /= side;
        }
        LatticePoint::new(&c).expect("box dimension already checked")
    }
}

/// Box indices sorted by `|x|_1`, ties broken lexicographically on the
/// coordinates.
pub fn diamond_order(window: &LatticeBox) -> Vec<usize> {
    let mut keyed: Vec<(i64, LatticePoint, usize)> = (0..window.len())
        .map(|i| {
            let p = window.point_of(i);
            (p.l1_norm(), p, i)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.coords().cmp(b.1.coords())));
    keyed.into_iter().map(|(_, _, i)| i).collect()
}

/// The `4k` points of Z^2 with `|x|_1 = k`; `k = 0` gives the origin alone.
pub fn l1_shell(k: i64) -> Vec<LatticePoint> {
    if k == 0 {
        return vec![LatticePoint::origin(2).expect("d=2")];
    }
    let mut out = Vec::with_capacity(4 * k as usize);
    for i in 0..k {
        // walk the four edges of the diamond, each half-open
        out.push(LatticePoint::new(&[k - i, i]).unwrap());
        out.push(LatticePoint::new(&[-i, k - i]).unwrap());
        out.push(LatticePoint::new(&[-(k - i), -i]).unwrap());
        out.push(LatticePoint::new(&[i, -(k - i)]).unwrap());
    }
    out
}

type Q = Ratio<i128>;

/// Points of `(n/2, n] x [-n, n]^{d-1}` within l1 distance `< sqrt(n)` of
/// the ray `{k m : k = 0, 1, 2, ...}`.
#[derive(Debug, Clone)]
pub struct DriftTube {
    n: i64,
    mean: Vec<Q>,
}

impl DriftTube {
    /// `mean` must already be rotated so that `m_1 > 0` and
    /// `m_1 >= |m_i|` for all `i`.
    pub fn new(n: i64, mean: &[Ratio<i64>]) -> Result<Self> {
        check_dim(mean.len())?;
        if n < 1 {
            return Err(Error::InvalidParameter(format!("tube scale must be >= 1, got {n}")));
        }
        let mean: Vec<Q> = mean
            .iter()
            .map(|r| Q::new(*r.numer() as i128, *r.denom() as i128))
            .collect();
        if mean.iter().all(Zero::is_zero) {
            return Err(Error::Inapplicable("drift tube needs a nonzero mean".into()));
        }
        if !mean[0].is_positive() || mean.iter().any(|m| m.abs() > mean[0]) {
            return Err(Error::InvalidParameter(
                "mean must satisfy m_1 > 0 and m_1 >= |m_i|; rotate coordinates first".into(),
            ));
        }
        Ok(Self { n, mean })
    }

    pub fn n(&self) -> i64 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn in_box(&self, x: &[i64]) -> bool {
        let n = self.n;
        2 * x[0] > n && x[0] <= n && x[1..].iter().all(|&c| -n <= c && c <= n)
    }

    fn distance(&self, x: &[i64], k: i128) -> Q {
        x.iter()
            .zip(&self.mean)
            .map(|(&c, m)| (Q::from_integer(c as i128) - *m * Q::from_integer(k)).abs())
            .fold(Q::zero(), |a, b| a + b)
    }

    /// Minimum over integer `k >= 0` of `|x - k m|_1`. The map is convex and
    /// piecewise linear in `k`, so the minimum sits next to a breakpoint.
    fn min_distance(&self, x: &[i64]) -> Q {
        let mut candidates = vec![0i128];
        for (&c, m) in x.iter().zip(&self.mean) {
            if m.is_zero() {
                continue;
            }
            let bp = Q::from_integer(c as i128) / *m;
            candidates.push(bp.floor().to_integer());
            candidates.push(bp.ceil().to_integer());
        }
        candidates
            .into_iter()
            .filter(|k| *k >= 0)
            .map(|k| self.distance(x, k))
            .min()
            .expect("k = 0 is always a candidate")
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        if x.len() != self.dim() || !self.in_box(x) {
            return false;
        }
        let d = self.min_distance(x);
        d * d < Q::from_integer(self.n as i128)
    }

    /// All members, sorted. Visits only the neighbourhood of the ray.
    pub fn points(&self) -> Vec<LatticePoint> {
        let n = self.n as i128;
        let r = (self.n as f64).sqrt().ceil() as i64 + 1;
        let m1 = self.mean[0];
        let k_lo = ((Q::from_integer(n / 2 - r as i128)) / m1).floor().to_integer().max(0);
        let k_hi = ((Q::from_integer(n + r as i128)) / m1).ceil().to_integer();
        let mut found = FxHashSet::default();
        let d = self.dim();
        let mut offset = vec![0i64; d];
        for k in k_lo..=k_hi {
            let centre: Vec<i64> = self
                .mean
                .iter()
                .map(|m| (*m * Q::from_integer(k)).round().to_integer() as i64)
                .collect();
            // l1 ball of radius r + d around the rounded centre covers the
            // exact radius-sqrt(n) ball around k m
            let rad = r + d as i64;
            enumerate_ball(&mut offset, 0, rad, &mut |off| {
                let x: Vec<i64> = centre.iter().zip(off).map(|(c, o)| c + o).collect();
                if self.in_box(&x) && self.distance(&x, k) * self.distance(&x, k) < Q::from_integer(n) {
                    found.insert(LatticePoint::new(&x).unwrap());
                }
            });
        }
        let mut pts: Vec<LatticePoint> = found.into_iter().collect();
        pts.sort_by(|a, b| a.coords().cmp(b.coords()));
        pts
    }
}

fn enumerate_ball(offset: &mut [i64], axis: usize, budget: i64, f: &mut dyn FnMut(&[i64])) {
    if axis == offset.len() {
        f(offset);
        return;
    }
    for v in -budget..=budget {
        offset[axis] = v;
        enumerate_ball(offset, axis + 1, budget - v.abs(), f);
    }
    offset[axis] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Ratio<i64> {
        Ratio::new(n, d)
    }

    #[test]
    fn shells() {
        let s1: FxHashSet<Vec<i64>> = l1_shell(1).iter().map(|p| p.coords().to_vec()).collect();
        let want: FxHashSet<Vec<i64>> =
            [vec![1, 0], vec![-1, 0], vec![0, 1], vec![0, -1]].into_iter().collect();
        assert_eq!(s1, want);
        assert_eq!(l1_shell(3).len(), 12);
        for k in 1..=50 {
            let s = l1_shell(k);
            let set: FxHashSet<LatticePoint> = s.iter().copied().collect();
            assert_eq!(set.len(), 4 * k as usize);
            assert!(s.iter().all(|p| p.l1_norm() == k));
        }
        assert_eq!(l1_shell(0).len(), 1);
    }

    #[test]
    fn box_indexing_round_trips() {
        let b = LatticeBox::new(3, 2).unwrap();
        assert_eq!(b.len(), 64);
        for i in 0..b.len() {
            assert_eq!(b.index_of(b.point_of(i).coords()), Some(i));
        }
        assert_eq!(b.index_of(&[2, 0, 0]), None);
        assert_eq!(b.index_of(&[-2, -2, -2]), Some(0));
    }

    #[test]
    fn diamond_starts_at_origin() {
        let b = LatticeBox::new(2, 2).unwrap();
        let ord = diamond_order(&b);
        assert_eq!(ord.len(), 16);
        assert_eq!(b.point_of(ord[0]).coords(), &[0, 0]);
        let norms: Vec<i64> = ord.iter().map(|&i| b.point_of(i).l1_norm()).collect();
        assert!(norms.windows(2).all(|w| w[0] <= w[1]));
        // ties are lexicographic: (-1,0) < (0,-1)
        assert_eq!(b.point_of(ord[1]).coords(), &[-1, 0]);
        assert_eq!(b.point_of(ord[2]).coords(), &[0, -1]);
    }

    #[test]
    fn tube_examples() {
        let n = 100;
        let tube = DriftTube::new(n, &[r(1, 1), r(0, 1)]).unwrap();
        let x0 = (0.6 * n as f64).ceil() as i64;
        assert!(tube.contains(&[x0, 0]));
        assert!(!tube.contains(&[50, 0]));
        assert!(!tube.contains(&[-3, 0]));
        assert!(matches!(
            DriftTube::new(n, &[r(0, 1), r(0, 1)]),
            Err(Error::Inapplicable(_))
        ));
        assert!(DriftTube::new(n, &[r(1, 4), r(1, 2)]).is_err());
    }

    /// Brute-force scan of the whole box; independent of the ray-guided
    /// enumeration in `points`.
    fn brute_force(tube: &DriftTube) -> Vec<LatticePoint> {
        let mut out = Vec::new();
        let d = tube.dim();
        let mut x = vec![0i64; d];
        fn rec(t: &DriftTube, x: &mut Vec<i64>, axis: usize, out: &mut Vec<LatticePoint>) {
            let n = t.n();
            if axis == x.len() {
                if t.contains(x) {
                    out.push(LatticePoint::new(x).unwrap());
                }
                return;
            }
            let range = if axis == 0 { n / 2..=n } else { -n..=n };
            for v in range {
                x[axis] = v;
                rec(t, x, axis + 1, out);
            }
        }
        rec(tube, &mut x, 0, &mut out);
        out.sort_by(|a, b| a.coords().cmp(b.coords()));
        out
    }

    #[test]
    fn tube_size_matches_brute_force_scan() {
        let tube = DriftTube::new(100, &[r(1, 1), r(0, 1)]).unwrap();
        let bf = brute_force(&tube);
        // on-axis drift: for each x1 in 51..=100, |x2| <= 9 → 50 * 19
        assert_eq!(bf.len(), 950);
        assert_eq!(tube.points(), bf);

        for mean in [[r(1, 2), r(1, 2)], [r(2, 5), r(-1, 5)], [r(1, 3), r(0, 1)]] {
            let tube = DriftTube::new(64, &mean).unwrap();
            assert_eq!(tube.points(), brute_force(&tube));
        }
        let tube = DriftTube::new(16, &[r(1, 3), r(1, 3), r(1, 3)]).unwrap();
        assert_eq!(tube.points(), brute_force(&tube));
    }
}
