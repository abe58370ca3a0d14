//! Probabilistic primitives: detectors, beliefs, the binary observation
//! channel, Bayesian updating and closed-form expected information gain.
//!
//! All entropies are in bits. Probabilities are kept in linear space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower/upper clamp applied to beliefs stored in a [`BeliefState`] after an
/// update, so that no item becomes permanently absorbed at 0 or 1.
pub const BELIEF_FLOOR: f64 = 1e-12;

/// Belief assigned to every item before any observation.
pub const UNINFORMATIVE_PRIOR: f64 = 0.5;

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {p} is not in [0, 1]")))
    }
}

/// A noisy binary test characterised by its true and false positive rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorProfile {
    tpr: f64,
    fpr: f64,
}

impl DetectorProfile {
    pub fn new(tpr: f64, fpr: f64) -> Result<Self> {
        check_probability("tpr", tpr)?;
        check_probability("fpr", fpr)?;
        Ok(Self { tpr, fpr })
    }

    /// Zero-diagnosticity detector used to pad item/detector count mismatches.
    pub const fn dummy() -> Self {
        Self { tpr: 0.5, fpr: 0.5 }
    }

    /// Symmetric detector with `tpr = p` and `fpr = 1 - p`.
    pub fn symmetric(p: f64) -> Result<Self> {
        Self::new(p, 1.0 - p)
    }

    pub fn tpr(&self) -> f64 {
        self.tpr
    }

    pub fn fpr(&self) -> f64 {
        self.fpr
    }

    /// Signed gap `tpr - fpr`.
    pub fn delta(&self) -> f64 {
        self.tpr - self.fpr
    }

    /// `|tpr - fpr|` (Youden's J).
    pub fn diagnosticity(&self) -> f64 {
        self.delta().abs()
    }

    pub fn is_dummy(&self) -> bool {
        self.tpr == self.fpr
    }
}

/// Posterior relevance probability per item plus the number of completed rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    beliefs: Vec<f64>,
    round: usize,
}

impl BeliefState {
    /// Every item at the uninformative prior, round zero.
    pub fn uninformative(n: usize) -> Self {
        Self {
            beliefs: vec![UNINFORMATIVE_PRIOR; n],
            round: 0,
        }
    }

    pub fn from_beliefs(beliefs: Vec<f64>) -> Result<Self> {
        for (i, &b) in beliefs.iter().enumerate() {
            check_probability(&format!("belief[{i}]"), b)?;
        }
        Ok(Self { beliefs, round: 0 })
    }

    pub fn beliefs(&self) -> &[f64] {
        &self.beliefs
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Per-item uncertainty `H(b_i)`.
    pub fn entropies(&self) -> Vec<f64> {
        self.beliefs.iter().map(|&b| entropy_bits(b)).collect()
    }

    pub fn total_entropy(&self) -> f64 {
        self.beliefs.iter().map(|&b| entropy_bits(b)).sum()
    }

    /// Applies one round of observations: item `i` was tested by detector
    /// `assignment.detector_for(i)` and produced `observations[i]`. Beliefs are
    /// clamped to `[BELIEF_FLOOR, 1 - BELIEF_FLOOR]` afterwards.
    pub fn updated(
        &self,
        assignment: &Assignment,
        detectors: &[DetectorProfile],
        observations: &ObservationVector,
    ) -> Result<Self> {
        let n = self.len();
        if assignment.len() != n || observations.len() != n || detectors.len() != n {
            return Err(Error::Dimension(format!(
                "beliefs {n}, assignment {}, observations {}, detectors {}",
                assignment.len(),
                observations.len(),
                detectors.len()
            )));
        }
        let beliefs = self
            .beliefs
            .iter()
            .zip(observations.outcomes())
            .enumerate()
            .map(|(i, (&b, &o))| {
                let det = &detectors[assignment.detector_for(i)];
                bayes_update(b, det, o).clamp(BELIEF_FLOOR, 1.0 - BELIEF_FLOOR)
            })
            .collect();
        Ok(Self {
            beliefs,
            round: self.round + 1,
        })
    }
}

/// Hidden binary states of all items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    states: Vec<bool>,
    k: usize,
}

impl GroundTruth {
    pub fn new(states: Vec<bool>) -> Self {
        let k = states.iter().filter(|&&z| z).count();
        Self { states, k }
    }

    /// Builds a truth vector of length `n` with the given items relevant.
    pub fn from_relevant(n: usize, relevant: &[usize]) -> Result<Self> {
        let mut states = vec![false; n];
        for &i in relevant {
            if i >= n {
                return Err(Error::Domain(format!("relevant item {i} >= n = {n}")));
            }
            states[i] = true;
        }
        Ok(Self::new(states))
    }

    pub fn states(&self) -> &[bool] {
        &self.states
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn relevant(&self) -> impl Iterator<Item = usize> + '_ {
        self.states
            .iter()
            .enumerate()
            .filter_map(|(i, &z)| z.then_some(i))
    }
}

/// One round's pairing of items to detectors: `mapping[i]` is the detector
/// testing item `i`. Always a bijection.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Assignment {
    mapping: Vec<usize>,
}

impl Assignment {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &j in &mapping {
            if j >= n || std::mem::replace(&mut seen[j], true) {
                return Err(Error::Domain(format!(
                    "mapping {mapping:?} is not a permutation of 0..{n}"
                )));
            }
        }
        Ok(Self { mapping })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mapping: (0..n).collect(),
        }
    }

    pub(crate) fn from_permutation_unchecked(mapping: Vec<usize>) -> Self {
        debug_assert!(Self::new(mapping.clone()).is_ok());
        Self { mapping }
    }

    pub fn detector_for(&self, item: usize) -> usize {
        self.mapping[item]
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    /// `Σ_i info_gain(b_i, det_{σ(i)})`.
    pub fn total_gain(&self, beliefs: &BeliefState, detectors: &[DetectorProfile]) -> f64 {
        beliefs
            .beliefs()
            .iter()
            .zip(&self.mapping)
            .map(|(&b, &j)| info_gain(b, &detectors[j]))
            .sum()
    }
}

impl TryFrom<Vec<usize>> for Assignment {
    type Error = Error;

    fn try_from(mapping: Vec<usize>) -> Result<Self> {
        Self::new(mapping)
    }
}

impl From<Assignment> for Vec<usize> {
    fn from(a: Assignment) -> Self {
        a.mapping
    }
}

/// Outcomes of one round, indexed by item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationVector {
    outcomes: Vec<bool>,
}

impl ObservationVector {
    pub fn new(outcomes: Vec<bool>) -> Self {
        Self { outcomes }
    }

    pub fn outcomes(&self) -> &[bool] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }
}

/// Binary entropy in bits with `0 log 0 = 0`. Callers must pass `p` in `[0, 1]`.
pub(crate) fn entropy_bits(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

/// Binary entropy `H(p)` in bits.
pub fn binary_entropy(p: f64) -> Result<f64> {
    check_probability("p", p)?;
    Ok(entropy_bits(p))
}

/// `Pr(O = 1 | Z = z)` for the given detector.
pub fn likelihood(z: bool, det: &DetectorProfile) -> f64 {
    if z {
        det.tpr
    } else {
        det.fpr
    }
}

/// Draws one observation. Always consumes exactly one uniform variate so that
/// paired simulations stay aligned regardless of the detector.
pub fn sample_observation<R: Rng + ?Sized>(z: bool, det: &DetectorProfile, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    u < likelihood(z, det)
}

/// Posterior `Pr(Z = 1 | o)` from prior `b`. A zero evidence denominator
/// (an observation the model deems impossible) leaves `b` unchanged.
pub fn bayes_update(b: f64, det: &DetectorProfile, o: bool) -> f64 {
    let (l1, l0) = if o {
        (det.tpr, det.fpr)
    } else {
        (1.0 - det.tpr, 1.0 - det.fpr)
    };
    let num = b * l1;
    let den = num + (1.0 - b) * l0;
    if den > 0.0 {
        num / den
    } else {
        b
    }
}

/// Expected information gain (mutual information between the item state and
/// the observation) from testing an item with belief `b` on `det`:
///
/// `H(fpr + b·Δ) − (b·H(tpr) + (1 − b)·H(fpr))`
pub fn info_gain(b: f64, det: &DetectorProfile) -> f64 {
    let marginal = det.fpr + b * det.delta();
    let conditional = b * entropy_bits(det.tpr) + (1.0 - b) * entropy_bits(det.fpr);
    (entropy_bits(marginal) - conditional).max(0.0)
}

/// Dense row-major matrix of pairwise gains, `W[i][j]` for item `i` on detector `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl GainMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != n_cols) {
            return Err(Error::Dimension(format!(
                "row {bad} has {} columns, expected {n_cols}",
                rows[bad].len()
            )));
        }
        Ok(Self {
            rows: n_rows,
            cols: n_cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Sum of `W[i][σ(i)]`.
    pub fn weight_of(&self, assignment: &Assignment) -> f64 {
        assignment
            .mapping()
            .iter()
            .enumerate()
            .map(|(i, &j)| self.get(i, j))
            .sum()
    }

    /// Matrix with rows and columns reordered: entry `(r, c)` is
    /// `self[row_order[r]][col_order[c]]`.
    pub fn permuted(&self, row_order: &[usize], col_order: &[usize]) -> Self {
        Self::from_fn(row_order.len(), col_order.len(), |r, c| {
            self.get(row_order[r], col_order[c])
        })
    }
}

/// Builds `W[i][j] = info_gain(b_i, det_j)`. Lengths must match; pad detectors
/// first with [`crate::strategies::pad_detectors`] when they do not.
pub fn gain_matrix(beliefs: &BeliefState, detectors: &[DetectorProfile]) -> Result<GainMatrix> {
    let n = beliefs.len();
    if detectors.len() != n {
        return Err(Error::Dimension(format!(
            "{n} beliefs but {} detectors",
            detectors.len()
        )));
    }
    let b = beliefs.beliefs();
    Ok(GainMatrix::from_fn(n, n, |i, j| info_gain(b[i], &detectors[j])))
}
