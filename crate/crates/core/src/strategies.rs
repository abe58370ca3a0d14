//! Per-round assignment policies and the item/detector padding reduction.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::hungarian_solve;
use crate::model::{gain_matrix, Assignment, BeliefState, DetectorProfile, ObservationVector};

/// The four assignment policies. Serialized names are part of the config and
/// CSV interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    GoldPanning,
    HungarianIG,
    PSC,
    ThompsonSampling,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::GoldPanning,
        StrategyKind::HungarianIG,
        StrategyKind::PSC,
        StrategyKind::ThompsonSampling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::GoldPanning => "GoldPanning",
            StrategyKind::HungarianIG => "HungarianIG",
            StrategyKind::PSC => "PSC",
            StrategyKind::ThompsonSampling => "ThompsonSampling",
        }
    }

    /// Stable small integer used in seed derivation.
    pub fn id(self) -> u64 {
        match self {
            StrategyKind::GoldPanning => 0,
            StrategyKind::HungarianIG => 1,
            StrategyKind::PSC => 2,
            StrategyKind::ThompsonSampling => 3,
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Domain(format!(
                    "unknown strategy {s:?}; expected one of GoldPanning, HungarianIG, PSC, ThompsonSampling"
                ))
            })
    }
}

/// Balances detector count against item count. Missing detectors become
/// dummies (`tpr = fpr = 0.5`); surplus detectors are dropped, keeping the
/// `n_items` most diagnostic in their original order (ties favour the lower index).
pub fn pad_detectors(detectors: &[DetectorProfile], n_items: usize) -> Vec<DetectorProfile> {
    use std::cmp::Ordering;

    match detectors.len().cmp(&n_items) {
        Ordering::Equal => detectors.to_vec(),
        Ordering::Less => {
            let mut padded = detectors.to_vec();
            padded.resize(n_items, DetectorProfile::dummy());
            padded
        }
        Ordering::Greater => {
            let mut keep = rank_by_diagnosticity(detectors);
            keep.truncate(n_items);
            keep.sort_unstable();
            keep.into_iter().map(|j| detectors[j]).collect()
        }
    }
}

/// Detector indices by diagnosticity, descending, stable on ties.
fn rank_by_diagnosticity(detectors: &[DetectorProfile]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..detectors.len()).collect();
    order.sort_by(|&a, &b| {
        detectors[b]
            .diagnosticity()
            .total_cmp(&detectors[a].diagnosticity())
    });
    order
}

fn check_lengths(beliefs: &BeliefState, detectors: &[DetectorProfile]) -> Result<()> {
    if beliefs.len() != detectors.len() {
        return Err(Error::Dimension(format!(
            "{} beliefs but {} detectors",
            beliefs.len(),
            detectors.len()
        )));
    }
    Ok(())
}

/// Gold Panning: the k-th most uncertain item goes to the k-th most
/// diagnostic detector. Both sorts are stable, so ties keep index order.
pub fn gp_assign(beliefs: &BeliefState, detectors: &[DetectorProfile]) -> Result<Assignment> {
    check_lengths(beliefs, detectors)?;
    let entropies = beliefs.entropies();
    let mut items: Vec<usize> = (0..beliefs.len()).collect();
    items.sort_by(|&a, &b| entropies[b].total_cmp(&entropies[a]));
    let ranked_detectors = rank_by_diagnosticity(detectors);

    let mut mapping = vec![0usize; items.len()];
    for (item, det) in items.into_iter().zip(ranked_detectors) {
        mapping[item] = det;
    }
    Ok(Assignment::from_permutation_unchecked(mapping))
}

/// Exact one-step optimum: Hungarian matching on the full gain matrix.
pub fn hungarian_ig_assign(
    beliefs: &BeliefState,
    detectors: &[DetectorProfile],
) -> Result<Assignment> {
    let w = gain_matrix(beliefs, detectors)?;
    Ok(hungarian_solve(&w)?.assignment)
}

/// Uniformly random permutation (Fisher-Yates).
pub fn psc_assign<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Assignment {
    let mut mapping: Vec<usize> = (0..n).collect();
    mapping.shuffle(rng);
    Assignment::from_permutation_unchecked(mapping)
}

/// Beta posteriors over one detector's true and false positive rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorPosterior {
    pub alpha_t: f64,
    pub beta_t: f64,
    pub alpha_f: f64,
    pub beta_f: f64,
}

impl DetectorPosterior {
    pub const UNIFORM: Self = Self {
        alpha_t: 1.0,
        beta_t: 1.0,
        alpha_f: 1.0,
        beta_f: 1.0,
    };

    pub fn mean(&self) -> DetectorProfile {
        DetectorProfile::new(
            self.alpha_t / (self.alpha_t + self.beta_t),
            self.alpha_f / (self.alpha_f + self.beta_f),
        )
        .expect("Beta means lie in [0, 1]")
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DetectorProfile {
        let draw = |a: f64, b: f64, rng: &mut R| {
            Beta::new(a, b)
                .expect("posterior parameters stay positive")
                .sample(rng)
                .clamp(0.0, 1.0)
        };
        let tpr = draw(self.alpha_t, self.beta_t, rng);
        let fpr = draw(self.alpha_f, self.beta_f, rng);
        DetectorProfile::new(tpr, fpr).expect("clamped samples lie in [0, 1]")
    }
}

/// Thompson Sampling state: one [`DetectorPosterior`] per detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsState {
    posteriors: Vec<DetectorPosterior>,
}

impl TsState {
    /// Independent Beta(1, 1) priors for every rate.
    pub fn uniform(n_detectors: usize) -> Self {
        Self {
            posteriors: vec![DetectorPosterior::UNIFORM; n_detectors],
        }
    }

    pub fn from_posteriors(posteriors: Vec<DetectorPosterior>) -> Result<Self> {
        for (j, p) in posteriors.iter().enumerate() {
            let params = [p.alpha_t, p.beta_t, p.alpha_f, p.beta_f];
            if params.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
                return Err(Error::Domain(format!(
                    "detector {j}: Beta parameters must be positive, got {p:?}"
                )));
            }
        }
        Ok(Self { posteriors })
    }

    pub fn posteriors(&self) -> &[DetectorPosterior] {
        &self.posteriors
    }

    pub fn len(&self) -> usize {
        self.posteriors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posteriors.is_empty()
    }

    /// One joint draw of every detector's profile, detector by detector
    /// (tpr then fpr).
    pub fn sample_profiles<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<DetectorProfile> {
        self.posteriors.iter().map(|p| p.sample(rng)).collect()
    }
}

/// Thompson Sampling assignment. Returns the sampled profiles alongside the
/// assignment so callers can update beliefs under the same draw.
pub fn ts_assign_sampled<R: Rng + ?Sized>(
    beliefs: &BeliefState,
    ts: &TsState,
    rng: &mut R,
) -> Result<(Assignment, Vec<DetectorProfile>)> {
    if ts.len() != beliefs.len() {
        return Err(Error::Dimension(format!(
            "{} beliefs but Thompson state covers {} detectors",
            beliefs.len(),
            ts.len()
        )));
    }
    let sampled = ts.sample_profiles(rng);
    let assignment = hungarian_ig_assign(beliefs, &sampled)?;
    Ok((assignment, sampled))
}

/// Samples profiles from the posteriors and returns the Hungarian-optimal
/// assignment for that sample.
pub fn ts_assign<R: Rng + ?Sized>(
    beliefs: &BeliefState,
    ts: &TsState,
    rng: &mut R,
) -> Result<Assignment> {
    ts_assign_sampled(beliefs, ts, rng).map(|(a, _)| a)
}

/// Expected-sufficient-statistics update. `beliefs` are the posteriors after
/// this round's Bayes update; item `i` credits `b_i` of a count to its
/// detector's tpr Beta and `1 - b_i` to the fpr Beta, as a success when
/// `o_i = 1` and a failure otherwise.
pub fn ts_update(
    ts: &TsState,
    assignment: &Assignment,
    obs: &ObservationVector,
    beliefs: &BeliefState,
) -> Result<TsState> {
    let n = ts.len();
    if assignment.len() != n || obs.len() != n || beliefs.len() != n {
        return Err(Error::Dimension(format!(
            "Thompson state {n}, assignment {}, observations {}, beliefs {}",
            assignment.len(),
            obs.len(),
            beliefs.len()
        )));
    }
    let mut posteriors = ts.posteriors.clone();
    for (i, (&o, &b)) in obs.outcomes().iter().zip(beliefs.beliefs()).enumerate() {
        let p = &mut posteriors[assignment.detector_for(i)];
        if o {
            p.alpha_t += b;
            p.alpha_f += 1.0 - b;
        } else {
            p.beta_t += b;
            p.beta_f += 1.0 - b;
        }
    }
    Ok(TsState { posteriors })
}
