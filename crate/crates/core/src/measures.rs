//! Finite-alphabet probability measures and the functionals of a pair
//! `(mu, nu)` that decide detectability: relative entropy, the chi-square
//! weight `zeta`, per-label likelihood ratios and a centered test function.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

pub type Label = u8;

/// Labels are `0..size`, at least two of them and at most 256.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    size: usize,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if !(2..=256).contains(&size) {
            return Err(Error::InvalidMeasure(format!(
                "alphabet size must be in 2..=256, got {size}"
            )));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn contains(&self, label: usize) -> bool {
        label < self.size
    }
}

fn validate_vector<T: Scalar>(name: &str, p: &[T], strict: bool) -> Result<()> {
    let mut total = T::zero();
    for (i, x) in p.iter().enumerate() {
        let bad = if strict { *x <= T::zero() } else { *x < T::zero() };
        if bad {
            return Err(Error::InvalidMeasure(format!(
                "{name}[{i}] = {x:?} is not {}",
                if strict { "strictly positive" } else { "nonnegative" }
            )));
        }
        total = total + x.clone();
    }
    let gap = (total.clone() - T::one()).abs();
    if gap > T::tolerance() {
        return Err(Error::InvalidMeasure(format!(
            "{name} sums to {total:?}, not 1"
        )));
    }
    Ok(())
}

/// Two strictly positive distributions on the same alphabet: `mu` is the
/// background law, `nu` the law of labels on the hidden path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPair<T>", into = "RawPair<T>")]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct MeasurePair<T: Scalar> {
    mu: Vec<T>,
    nu: Vec<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPair<T> {
    mu: Vec<T>,
    nu: Vec<T>,
}

impl<T: Scalar> TryFrom<RawPair<T>> for MeasurePair<T> {
    type Error = Error;
    fn try_from(raw: RawPair<T>) -> Result<Self> {
        MeasurePair::new(raw.mu, raw.nu)
    }
}

impl<T: Scalar> From<MeasurePair<T>> for RawPair<T> {
    fn from(p: MeasurePair<T>) -> Self {
        RawPair { mu: p.mu, nu: p.nu }
    }
}

impl<T: Scalar> MeasurePair<T> {
    /// Vectors that miss normalisation are rejected rather than rescaled.
    pub fn new(mu: Vec<T>, nu: Vec<T>) -> Result<Self> {
        if mu.len() != nu.len() {
            return Err(Error::InvalidMeasure(format!(
                "mu has {} entries but nu has {}",
                mu.len(),
                nu.len()
            )));
        }
        Alphabet::new(mu.len())?;
        validate_vector("mu", &mu, true)?;
        validate_vector("nu", &nu, true)?;
        Ok(Self { mu, nu })
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet { size: self.mu.len() }
    }

    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    pub fn nu(&self) -> &[T] {
        &self.nu
    }

    pub fn is_identical(&self) -> bool {
        self.mu == self.nu
    }

    /// `r(label) = nu(label) / mu(label)`.
    pub fn likelihood_ratio(&self, label: usize) -> Result<T> {
        if label >= self.mu.len() {
            return Err(Error::LabelOutOfRange {
                label,
                size: self.mu.len(),
            });
        }
        Ok(self.nu[label].clone() / self.mu[label].clone())
    }

    pub fn likelihood_ratios(&self) -> Vec<T> {
        self.mu
            .iter()
            .zip(&self.nu)
            .map(|(m, n)| n.clone() / m.clone())
            .collect()
    }

    /// `zeta = sum nu^2 / mu`, the second moment of `r` under `mu`.
    pub fn chi_square_zeta(&self) -> T {
        self.mu
            .iter()
            .zip(&self.nu)
            .fold(T::zero(), |acc, (m, n)| acc + n.clone() * n.clone() / m.clone())
    }

    /// `f = (r - 1) / (zeta - 1)`, normalised so that `E_mu f = 0` and
    /// `E_nu f = 1`.
    pub fn centered_statistic_fn(&self) -> Result<Vec<T>> {
        if self.is_identical() {
            return Err(Error::DegeneratePair);
        }
        let denom = self.chi_square_zeta() - T::one();
        if denom.is_zero() {
            return Err(Error::DegeneratePair);
        }
        Ok(self
            .likelihood_ratios()
            .into_iter()
            .map(|r| (r - T::one()) / denom.clone())
            .collect())
    }

    /// Label maximising `nu - mu` (lowest label on ties), provided the gap is
    /// positive.
    pub fn default_signal_label(&self) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for (i, (m, n)) in self.mu.iter().zip(&self.nu).enumerate() {
            let gap = n.clone() - m.clone();
            if gap <= T::zero() {
                continue;
            }
            match &best {
                Some((_, g)) if gap <= *g => {}
                _ => best = Some((i, gap)),
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn to_f64(&self) -> MeasurePair<f64> {
        MeasurePair {
            mu: self.mu.iter().map(Scalar::to_f64_lossy).collect(),
            nu: self.nu.iter().map(Scalar::to_f64_lossy).collect(),
        }
    }
}

impl<T: Real> MeasurePair<T> {
    /// `H(nu | mu) = sum nu log(nu / mu)` in nats.
    pub fn relative_entropy(&self) -> T {
        self.mu
            .iter()
            .zip(&self.nu)
            .fold(T::zero(), |acc, (&m, &n)| acc + n * (n / m).ln())
    }

    /// `log(1 / min mu)`, the largest entropy any `nu` can reach against `mu`.
    pub fn max_entropy_against_mu(&self) -> T {
        let min = self
            .mu
            .iter()
            .copied()
            .fold(T::infinity(), |a, b| if b < a { b } else { a });
        -(min.ln())
    }
}

/// Inverse-CDF sampler for one probability vector. Zero entries are allowed
/// (point masses are valid here).
#[derive(Debug, Clone)]
pub struct LabelSampler {
    index: WeightedIndex<f64>,
}

impl LabelSampler {
    pub fn new<T: Scalar>(probs: &[T]) -> Result<Self> {
        Alphabet::new(probs.len().max(2))?;
        validate_vector("probabilities", probs, false)?;
        let weights: Vec<f64> = probs.iter().map(Scalar::to_f64_lossy).collect();
        let index = WeightedIndex::new(weights)
            .map_err(|e| Error::InvalidMeasure(e.to_string()))?;
        Ok(Self { index })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Label {
        self.index.sample(rng) as Label
    }
}

/// One draw from `probs`.
pub fn sample_label<T: Scalar, R: Rng + ?Sized>(probs: &[T], rng: &mut R) -> Result<Label> {
    Ok(LabelSampler::new(probs)?.sample(rng))
}
