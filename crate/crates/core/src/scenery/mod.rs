//! Labelled windows: i.i.d. `mu` labels everywhere (null law) or with the
//! trace of a hidden path relabelled i.i.d. `nu` (perturbed law).
//!
//! Every sampler takes a seed rather than a generator. Background labels,
//! the hidden path and the labels on the path each use their own stream of
//! that seed, so a perturbed window with `mu = nu` has exactly the law of a
//! null window.

mod io;
mod likelihood;

pub use io::{read_binary, read_json, write_binary, write_json};
pub use likelihood::{exact_g_sequence, f_from_g, mc_g_estimate, GEstimate};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, PathSampler};
use crate::measures::{Label, LabelSampler, MeasurePair};
use crate::scalar::Scalar;
use crate::seeds::stream_rng;
use crate::trees::{sample_ray, FlowTree, RayPrefix};

const BACKGROUND_STREAM: u64 = 0;
const PATH_STREAM: u64 = 1;
const TRACE_LABEL_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Domain {
    /// `[-n, n)^d`, labels row-major with the last axis fastest.
    Lattice { dim: usize, half_width: i64 },
    /// A flow tree with `vertices` nodes, labels indexed by vertex id.
    Tree { vertices: usize, depth: usize },
}

impl Domain {
    pub fn lattice(window: LatticeBox) -> Self {
        Domain::Lattice {
            dim: window.dim,
            half_width: window.half_width,
        }
    }

    pub fn tree<T: Scalar>(tree: &FlowTree<T>) -> Self {
        Domain::Tree {
            vertices: tree.len(),
            depth: tree.max_depth(),
        }
    }

    pub fn len(&self) -> Result<usize> {
        match *self {
            Domain::Lattice { dim, half_width } => Ok(LatticeBox::new(dim, half_width)?.len()),
            Domain::Tree { vertices, .. } => Ok(vertices),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_box(&self) -> Result<LatticeBox> {
        match *self {
            Domain::Lattice { dim, half_width } => LatticeBox::new(dim, half_width),
            Domain::Tree { .. } => Err(Error::DomainMismatch("expected a lattice window, got a tree".into())),
        }
    }

    pub fn check_tree<T: Scalar>(&self, tree: &FlowTree<T>) -> Result<()> {
        match *self {
            Domain::Tree { vertices, depth } if vertices == tree.len() && depth == tree.max_depth() => Ok(()),
            Domain::Tree { vertices, depth } => Err(Error::DomainMismatch(format!(
                "scenery is for a tree with {vertices} vertices and depth {depth}, got {} and {}",
                tree.len(),
                tree.max_depth()
            ))),
            Domain::Lattice { .. } => Err(Error::DomainMismatch("expected a tree, got a lattice window".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HiddenPath {
    /// In-window vertex indices in order of first visit. `trimmed` records
    /// that the path also left the window.
    Lattice { indices: Vec<usize>, trimmed: bool },
    Tree { ray: RayPrefix },
}

impl HiddenPath {
    pub fn indices(&self) -> &[usize] {
        match self {
            HiddenPath::Lattice { indices, .. } => indices,
            HiddenPath::Tree { ray } => ray.vertices(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    Null,
    Perturbed { hidden: HiddenPath },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneryWindow {
    domain: Domain,
    alphabet_size: usize,
    labels: Vec<Label>,
    provenance: Provenance,
    seed: u64,
}

impl SceneryWindow {
    /// Checks that every vertex has a label inside the alphabet.
    pub fn new(domain: Domain, alphabet_size: usize, labels: Vec<Label>, provenance: Provenance, seed: u64) -> Result<Self> {
        crate::measures::Alphabet::new(alphabet_size)?;
        let n = domain.len()?;
        if labels.len() != n {
            return Err(Error::Format(format!("{} labels for {n} vertices", labels.len())));
        }
        if let Some(&l) = labels.iter().find(|&&l| l as usize >= alphabet_size) {
            return Err(Error::LabelOutOfRange {
                label: l as usize,
                size: alphabet_size,
            });
        }
        if let Provenance::Perturbed { hidden } = &provenance {
            if hidden.indices().iter().any(|&i| i >= n) {
                return Err(Error::Format("hidden path leaves the domain".into()));
            }
        }
        Ok(Self {
            domain,
            alphabet_size,
            labels,
            provenance,
            seed,
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_perturbed(&self) -> bool {
        matches!(self.provenance, Provenance::Perturbed { .. })
    }

    /// Same labels with the hidden path dropped.
    pub fn blind(&self) -> Self {
        Self {
            provenance: Provenance::Null,
            ..self.clone()
        }
    }

    pub fn check_pair<T: Scalar>(&self, pair: &MeasurePair<T>) -> Result<()> {
        if pair.alphabet().size() != self.alphabet_size {
            return Err(Error::DomainMismatch(format!(
                "scenery alphabet has {} labels, pair has {}",
                self.alphabet_size,
                pair.alphabet().size()
            )));
        }
        Ok(())
    }
}

fn background<T: Scalar>(n: usize, pair: &MeasurePair<T>, seed: u64) -> Result<Vec<Label>> {
    let sampler = LabelSampler::new(pair.mu())?;
    let mut rng = stream_rng(seed, BACKGROUND_STREAM);
    Ok((0..n).map(|_| sampler.sample(&mut rng)).collect())
}

pub fn sample_null<T: Scalar>(domain: Domain, pair: &MeasurePair<T>, seed: u64) -> Result<SceneryWindow> {
    let labels = background(domain.len()?, pair, seed)?;
    SceneryWindow::new(domain, pair.alphabet().size(), labels, Provenance::Null, seed)
}

fn relabel<T: Scalar>(labels: &mut [Label], trace: &[usize], pair: &MeasurePair<T>, seed: u64) -> Result<()> {
    let sampler = LabelSampler::new(pair.nu())?;
    let mut rng = stream_rng(seed, TRACE_LABEL_STREAM);
    for &i in trace {
        labels[i] = sampler.sample(&mut rng);
    }
    Ok(())
}

/// Runs `sampler` from the origin and relabels its in-window trace with
/// `nu`. Labels depend only on the in-window trace, so this is exactly the
/// window marginal of the perturbed law.
pub fn sample_perturbed<T: Scalar>(
    window: LatticeBox,
    pair: &MeasurePair<T>,
    sampler: &PathSampler,
    seed: u64,
) -> Result<SceneryWindow> {
    if sampler.dim() != window.dim {
        return Err(Error::DimensionMismatch(sampler.dim(), window.dim));
    }
    let domain = Domain::lattice(window);
    let mut labels = background(window.len(), pair, seed)?;
    let mut seen = vec![false; window.len()];
    let mut trace = Vec::new();
    let mut trimmed = false;
    sampler.trace(&mut stream_rng(seed, PATH_STREAM), |p| match window.index_of(p.coords()) {
        Some(i) if !seen[i] => {
            seen[i] = true;
            trace.push(i);
        }
        Some(_) => {}
        None => trimmed = true,
    })?;
    relabel(&mut labels, &trace, pair, seed)?;
    let hidden = HiddenPath::Lattice { indices: trace, trimmed };
    SceneryWindow::new(domain, pair.alphabet().size(), labels, Provenance::Perturbed { hidden }, seed)
}

/// Tree version: the hidden path is a ray drawn from the flow, root
/// included.
pub fn sample_perturbed_tree<T: Scalar, U: Scalar>(
    tree: &FlowTree<U>,
    pair: &MeasurePair<T>,
    seed: u64,
) -> Result<SceneryWindow> {
    let domain = Domain::tree(tree);
    let mut labels = background(tree.len(), pair, seed)?;
    let ray = sample_ray(tree, &mut stream_rng(seed, PATH_STREAM));
    relabel(&mut labels, ray.vertices(), pair, seed)?;
    let hidden = HiddenPath::Tree { ray };
    SceneryWindow::new(domain, pair.alphabet().size(), labels, Provenance::Perturbed { hidden }, seed)
}
