//! Per-position detector estimation from recorded trials.
//!
//! A trial places one gold item at `gold_position` among `n_positions` and
//! records which position (if any) the model cited. For position `j`:
//!
//! * `tpr_j` = trials citing `j` with gold at `j` / trials with gold at `j`
//! * `fpr_j` = trials citing `j` with gold elsewhere / trials with gold elsewhere
//!
//! A trial without a citation counts as "did not cite" for every position.
//!
//! Trial logs are JSON lines; profile files are a single JSON document. Both
//! layouts are documented in the README.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::model::DetectorProfile;

/// Trial identifier; logs may use either strings or integers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrialId {
    Number(u64),
    Text(String),
}

impl fmt::Display for TrialId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrialId::Number(n) => write!(f, "{n}"),
            TrialId::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub trial_id: TrialId,
    pub gold_position: usize,
    pub cited_position: Option<usize>,
    pub n_positions: usize,
}

impl TrialRecord {
    fn check(&self) -> std::result::Result<(), String> {
        if self.gold_position >= self.n_positions {
            return Err(format!(
                "trial {}: gold_position {} >= n_positions {}",
                self.trial_id, self.gold_position, self.n_positions
            ));
        }
        if let Some(c) = self.cited_position.filter(|&c| c >= self.n_positions) {
            return Err(format!(
                "trial {}: cited_position {c} >= n_positions {}",
                self.trial_id, self.n_positions
            ));
        }
        Ok(())
    }
}

fn probability<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    let value = Option::<f64>::deserialize(d)?;
    match value {
        Some(p) if !(0.0..=1.0).contains(&p) => Err(serde::de::Error::custom(format!(
            "probability {p} is not in [0, 1]"
        ))),
        _ => Ok(value),
    }
}

/// Estimate for one position. `tpr`/`fpr` are `None` when the corresponding
/// denominator is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionEstimate {
    pub position: usize,
    #[serde(deserialize_with = "probability")]
    pub tpr: Option<f64>,
    #[serde(deserialize_with = "probability")]
    pub fpr: Option<f64>,
    pub n_gold_trials: u64,
    pub n_nongold_trials: u64,
}

impl PositionEstimate {
    pub fn diagnosticity(&self) -> Option<f64> {
        Some((self.tpr? - self.fpr?).abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileFile {
    pub n_positions: usize,
    /// Whether add-one smoothing was applied to the ratios.
    #[serde(default)]
    pub smoothed: bool,
    pub positions: Vec<PositionEstimate>,
}

/// Ratio smoothing applied by [`estimate_profiles`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Smoothing {
    /// Raw ratios; zero denominators give undefined estimates.
    #[default]
    None,
    /// `(hits + 1) / (trials + 2)`; every estimate is defined and strictly inside (0, 1).
    AddOne,
}

/// What [`load_profiles`] does with undefined estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UndefinedEstimates {
    /// Fail with a schema error naming the position.
    #[default]
    Reject,
    /// Replace a missing rate with the other rate of the same position (or
    /// 0.5 when both are missing), which yields a zero-diagnosticity detector.
    FillDummy,
}

/// Hit/trial counts for one position. Partial counts merge by addition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PositionCounts {
    pub gold_trials: u64,
    pub gold_cited: u64,
    pub nongold_trials: u64,
    pub nongold_cited: u64,
}

impl PositionCounts {
    pub fn merge(self, other: Self) -> Self {
        Self {
            gold_trials: self.gold_trials + other.gold_trials,
            gold_cited: self.gold_cited + other.gold_cited,
            nongold_trials: self.nongold_trials + other.nongold_trials,
            nongold_cited: self.nongold_cited + other.nongold_cited,
        }
    }
}

/// Tallies per-position counts. Records must already share `n_positions`.
pub fn count_positions(records: &[TrialRecord], n_positions: usize) -> Vec<PositionCounts> {
    let mut counts = vec![PositionCounts::default(); n_positions];
    for r in records {
        for (j, c) in counts.iter_mut().enumerate() {
            let cited = r.cited_position == Some(j);
            if r.gold_position == j {
                c.gold_trials += 1;
                c.gold_cited += u64::from(cited);
            } else {
                c.nongold_trials += 1;
                c.nongold_cited += u64::from(cited);
            }
        }
    }
    counts
}

fn ratio(hits: u64, trials: u64, smoothing: Smoothing) -> Option<f64> {
    match smoothing {
        Smoothing::None => (trials > 0).then(|| hits as f64 / trials as f64),
        Smoothing::AddOne => Some((hits as f64 + 1.0) / (trials as f64 + 2.0)),
    }
}

/// Estimates every position's rates from a batch of trials.
pub fn estimate_profiles(records: &[TrialRecord], smoothing: Smoothing) -> Result<ProfileFile> {
    let first = records
        .first()
        .ok_or_else(|| Error::Schema("no trial records".into()))?;
    let n_positions = first.n_positions;
    if n_positions == 0 {
        return Err(Error::Schema("n_positions must be at least 1".into()));
    }
    for (idx, r) in records.iter().enumerate() {
        if r.n_positions != n_positions {
            return Err(Error::Schema(format!(
                "record {idx} (trial {}) has n_positions {}, expected {n_positions}",
                r.trial_id, r.n_positions
            )));
        }
        r.check()
            .map_err(|m| Error::Schema(format!("record {idx}: {m}")))?;
    }

    let positions = count_positions(records, n_positions)
        .into_iter()
        .enumerate()
        .map(|(position, c)| PositionEstimate {
            position,
            tpr: ratio(c.gold_cited, c.gold_trials, smoothing),
            fpr: ratio(c.nongold_cited, c.nongold_trials, smoothing),
            n_gold_trials: c.gold_trials,
            n_nongold_trials: c.nongold_trials,
        })
        .collect();

    Ok(ProfileFile {
        n_positions,
        smoothed: smoothing == Smoothing::AddOne,
        positions,
    })
}

/// Parses a JSON-lines trial log. Blank lines are skipped. Errors carry the
/// 1-based line number.
pub fn parse_trial_log(text: &str) -> Result<Vec<TrialRecord>> {
    let mut records: Vec<TrialRecord> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: TrialRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        record.check().map_err(|message| Error::Parse {
            line: line_no,
            message,
        })?;
        if let Some(expected) = records.first().map(|r| r.n_positions) {
            if record.n_positions != expected {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!(
                        "n_positions {} differs from earlier records ({expected})",
                        record.n_positions
                    ),
                });
            }
        }
        records.push(record);
    }
    Ok(records)
}

pub fn read_trial_log(path: impl AsRef<Path>) -> Result<Vec<TrialRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trial_log(&text)
}

pub fn write_trial_log(records: &[TrialRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("trial records always serialize"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

impl ProfileFile {
    /// Parses and validates a profile document.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProfileFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        file.validate()?;
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("profile files always serialize");
        s.push('\n');
        s
    }

    fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::Schema("positions list is empty".into()));
        }
        if self.positions.len() != self.n_positions {
            return Err(Error::Schema(format!(
                "n_positions is {} but {} positions are listed",
                self.n_positions,
                self.positions.len()
            )));
        }
        for (idx, p) in self.positions.iter().enumerate() {
            if p.position != idx {
                return Err(Error::Schema(format!(
                    "positions[{idx}].position is {}, expected {idx}",
                    p.position
                )));
            }
        }
        Ok(())
    }

    /// Converts to detector profiles in position order.
    pub fn detectors(&self, undefined: UndefinedEstimates) -> Result<Vec<DetectorProfile>> {
        self.positions
            .iter()
            .map(|p| {
                let (tpr, fpr) = match (p.tpr, p.fpr, undefined) {
                    (Some(t), Some(f), _) => (t, f),
                    (_, _, UndefinedEstimates::Reject) => {
                        let missing = if p.tpr.is_none() { "tpr" } else { "fpr" };
                        return Err(Error::Schema(format!(
                            "positions[{}].{missing} is undefined (no supporting trials)",
                            p.position
                        )));
                    }
                    (t, f, UndefinedEstimates::FillDummy) => {
                        let t = t.or(f).unwrap_or(0.5);
                        (t, f.unwrap_or(t))
                    }
                };
                DetectorProfile::new(tpr, fpr)
            })
            .collect()
    }
}

pub fn save_profiles(file: &ProfileFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, file.to_json()).map_err(|e| Error::io(path, e))
}

pub fn read_profile_file(path: impl AsRef<Path>) -> Result<ProfileFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ProfileFile::from_json(&text)
}

/// Loads a profile file as detector profiles in position order.
pub fn load_profiles(
    path: impl AsRef<Path>,
    undefined: UndefinedEstimates,
) -> Result<Vec<DetectorProfile>> {
    read_profile_file(path)?.detectors(undefined)
}

/// Where a synthetic calibration run places the gold item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GoldPlacement {
    /// 0%, 20%, 40%, 60%, 80% and 100% of the context, rounded to the
    /// nearest position.
    #[default]
    Grid,
    /// Every position.
    All,
}

pub const GOLD_GRID: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

impl GoldPlacement {
    pub fn positions(self, n_positions: usize) -> Vec<usize> {
        match self {
            GoldPlacement::All => (0..n_positions).collect(),
            GoldPlacement::Grid => {
                let last = n_positions.saturating_sub(1) as f64;
                let mut ps: Vec<usize> = GOLD_GRID
                    .iter()
                    .map(|f| (f * last).round() as usize)
                    .collect();
                ps.dedup();
                ps
            }
        }
    }
}

/// Generates a trial log from known per-position profiles.
///
/// Each trial cites at most one position: the gold position with
/// probability `tpr_gold`, each other position `j` with probability
/// `fpr_j`, and nothing otherwise. That requires
/// `tpr_g + Σ_{j≠g} fpr_j <= 1` for every gold position `g` used.
pub fn synthesize_trials<R: Rng + ?Sized>(
    profiles: &[DetectorProfile],
    trials_per_position: usize,
    placement: GoldPlacement,
    rng: &mut R,
) -> Result<Vec<TrialRecord>> {
    let n = profiles.len();
    if n == 0 {
        return Err(Error::Domain("at least one position is required".into()));
    }
    let fpr_total: f64 = profiles.iter().map(DetectorProfile::fpr).sum();
    let golds = placement.positions(n);
    for &g in &golds {
        let mass = profiles[g].tpr() + fpr_total - profiles[g].fpr();
        if mass > 1.0 + 1e-12 {
            return Err(Error::Domain(format!(
                "gold at {g}: citation probabilities sum to {mass} > 1"
            )));
        }
    }

    let mut records = Vec::with_capacity(golds.len() * trials_per_position);
    let mut next_id = 0u64;
    for &g in &golds {
        for _ in 0..trials_per_position {
            let u: f64 = rng.random();
            let mut acc = profiles[g].tpr();
            let mut cited = (u < acc).then_some(g);
            if cited.is_none() {
                for (j, p) in profiles.iter().enumerate().filter(|&(j, _)| j != g) {
                    acc += p.fpr();
                    if u < acc {
                        cited = Some(j);
                        break;
                    }
                }
            }
            records.push(TrialRecord {
                trial_id: TrialId::Number(next_id),
                gold_position: g,
                cited_position: cited,
                n_positions: n,
            });
            next_id += 1;
        }
    }
    Ok(records)
}
