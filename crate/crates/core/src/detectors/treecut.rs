use serde_json::json;

use super::{check_scenery, DetectorOutcome};
use crate::error::{Error, Result};
use crate::measures::MeasurePair;
use crate::scenery::SceneryWindow;
use crate::trees::{Cut, FlowTree};

/// Per vertex `u`, whether `prod_{z on the root path to u} r(omega(z)) >=
/// e^{|u| H}`, the root included in the path. Compared in log space.
pub fn k_u_fires<T: crate::scalar::Scalar>(
    tree: &FlowTree<T>,
    scenery: &SceneryWindow,
    pair: &MeasurePair<f64>,
) -> Result<Vec<bool>> {
    check_scenery(scenery, pair)?;
    scenery.domain().check_tree(tree)?;
    let h = pair.relative_entropy();
    if h <= 0.0 {
        return Err(Error::Inapplicable("relative entropy is zero".into()));
    }
    let log_r: Vec<f64> = pair.likelihood_ratios().iter().map(|r| r.ln()).collect();
    let labels = scenery.labels();
    let mut sum = vec![0.0; tree.len()];
    let mut fires = vec![false; tree.len()];
    for v in tree.bfs_order() {
        let above = tree.parent(v).map_or(0.0, |p| sum[p]);
        sum[v] = above + log_r[labels[v] as usize];
        fires[v] = sum[v] >= tree.depth(v) as f64 * h;
    }
    Ok(fires)
}

/// For each cut, whether some member fires; perturbed when more than half
/// of the cuts fire.
pub fn tree_cut_detect<T: crate::scalar::Scalar>(
    scenery: &SceneryWindow,
    tree: &FlowTree<T>,
    pair: &MeasurePair<f64>,
    cuts: &[Cut],
) -> Result<DetectorOutcome> {
    if cuts.is_empty() {
        return Err(Error::InvalidParameter("no cuts supplied".into()));
    }
    for c in cuts {
        if c.vertices.iter().any(|&v| v == 0 || v >= tree.len()) || !c.is_antichain(tree) {
            return Err(Error::InvalidParameter("every cut must be an antichain of non-root vertices".into()));
        }
    }
    let fires = k_u_fires(tree, scenery, pair)?;
    let fired: Vec<f64> = cuts
        .iter()
        .map(|c| f64::from(u8::from(c.vertices.iter().any(|&u| fires[u]))))
        .collect();
    let statistic = fired.iter().sum::<f64>() / cuts.len() as f64;
    let mut out = DetectorOutcome::new(
        "treecut",
        statistic,
        0.5,
        json!({ "cuts": cuts.len(), "entropy": pair.relative_entropy() }),
    );
    out.trajectory = Some(fired);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenery::{sample_null, Domain, Provenance};
    use crate::trees::TreeGenerator;

    fn pair() -> MeasurePair<f64> {
        MeasurePair::new(vec![0.25; 4], vec![0.97, 0.01, 0.01, 0.01]).unwrap()
    }

    fn tree(depth: usize) -> FlowTree<f64> {
        FlowTree::build(&TreeGenerator::BAry { b: 2, depth }).unwrap()
    }

    #[test]
    fn favourable_path_fires() {
        let t = tree(6);
        let mut labels = vec![1u8; t.len()];
        let mut v = 0;
        labels[0] = 0;
        while !t.is_stub(v) {
            v = t.children(v)[1];
            labels[v] = 0;
        }
        let s = SceneryWindow::new(Domain::tree(&t), 4, labels, Provenance::Null, 0).unwrap();
        let cuts: Vec<Cut> = (1..=6).map(|d| Cut::level(&t, d).unwrap()).collect();
        let out = tree_cut_detect(&s, &t, &pair(), &cuts).unwrap();
        assert_eq!(out.statistic, 1.0);
        assert!(out.decision.is_perturbed());
        let off = SceneryWindow::new(Domain::tree(&t), 4, vec![1; t.len()], Provenance::Null, 0).unwrap();
        assert_eq!(tree_cut_detect(&off, &t, &pair(), &cuts).unwrap().statistic, 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = tree(3);
        let s = sample_null(Domain::tree(&t), &pair(), 0).unwrap();
        let same = MeasurePair::new(vec![0.25; 4], vec![0.25; 4]).unwrap();
        let cuts = vec![Cut::level(&t, 2).unwrap()];
        assert!(matches!(tree_cut_detect(&s, &t, &same, &cuts), Err(Error::Inapplicable(_))));
        assert!(tree_cut_detect(&s, &t, &pair(), &[]).is_err());
        let chain = Cut::new(vec![1, t.children(1)[0]]);
        assert!(tree_cut_detect(&s, &t, &pair(), &[chain]).is_err());
    }

    #[test]
    fn null_firing_below_union_bound() {
        let t = tree(5);
        let h = pair().relative_entropy();
        let cut = Cut::level(&t, 3).unwrap();
        let bound: f64 = cut.vertices.iter().map(|&u| (-(t.depth(u) as f64) * h).exp()).sum();
        let reps = 4000;
        let fired = (0..reps)
            .filter(|&seed| {
                let s = sample_null(Domain::tree(&t), &pair(), seed).unwrap();
                tree_cut_detect(&s, &t, &pair(), std::slice::from_ref(&cut)).unwrap().statistic > 0.0
            })
            .count();
        assert!((fired as f64 / reps as f64) <= 1.2 * bound);
    }
}
