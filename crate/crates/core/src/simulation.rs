//! Synthetic environments, multi-round trials and Monte Carlo aggregation.
//!
//! # Seeding
//!
//! Every run of an experiment draws from three independent ChaCha8 streams,
//! each seeded with [`derive_seed`]`(master_seed, stream, run_index)`:
//!
//! * environment (`STREAM_ENVIRONMENT`): detector profiles and ground truth
//! * observations (`STREAM_OBSERVATION`): one uniform per item per round
//! * policy (`STREAM_POLICY + strategy id`): shuffles, Thompson draws, noise
//!
//! The first two do not depend on the strategy, so all strategies of a run
//! face the same detectors, truth and observation uniforms.
//! `derive_seed` is a fixed SplitMix64 cascade and will not change.

use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{load_profiles, UndefinedEstimates};
use crate::error::{Error, Result};
use crate::model::{
    bayes_update, entropy_bits, sample_observation, Assignment, BeliefState, DetectorProfile,
    GroundTruth, ObservationVector,
};
use crate::strategies::{
    gp_assign, hungarian_ig_assign, pad_detectors, psc_assign, ts_assign_sampled, ts_update,
    StrategyKind, TsState,
};

/// Noise levels: perfect knowledge, then 95% of estimates within ±0.01, ±0.05, ±0.10.
pub const NOISE_LEVELS: [f64; 4] = [0.0, 0.0051, 0.0255, 0.0510];

pub const STREAM_ENVIRONMENT: u64 = 0x454E_5649_524F_4E00;
pub const STREAM_OBSERVATION: u64 = 0x4F42_5345_5256_4500;
pub const STREAM_POLICY: u64 = 0x504F_4C49_4359_0000;

/// `count` concentration values log-spaced over `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..count)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
                .collect()
        }
    }
}

/// Twenty concentrations from 0.1 to 100.
pub fn default_concentrations() -> Vec<f64> {
    log_spaced(0.1, 100.0, 20)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
}

pub fn stream_rng(master: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, index))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorSource {
    /// tpr and fpr independently uniform on [0, 1].
    Uniform,
    /// tpr and fpr independently Beta(alpha, alpha).
    Beta { alpha: f64 },
    /// Calibrated profile file, padded or trimmed to the item count.
    File { path: PathBuf },
}

/// How many items are relevant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KRule {
    /// k uniform on `1..=floor(sqrt(n))`.
    SqrtN,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub n_items: usize,
    pub detector_source: DetectorSource,
    pub k_rule: KRule,
    /// Std-dev of Gaussian noise on the agent-visible profiles.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl EnvironmentSpec {
    pub fn uniform(n_items: usize, seed: u64) -> Self {
        Self {
            n_items,
            detector_source: DetectorSource::Uniform,
            k_rule: KRule::SqrtN,
            noise_sigma: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_items == 0 {
            return Err(Error::Domain("n_items must be at least 1".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Domain(format!(
                "noise_sigma must be a non-negative number, got {}",
                self.noise_sigma
            )));
        }
        if let DetectorSource::Beta { alpha } = self.detector_source {
            if !(alpha.is_finite() && alpha > 0.0) {
                return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
            }
        }
        if let KRule::Fixed(k) = self.k_rule {
            if k == 0 || k > self.n_items {
                return Err(Error::Domain(format!(
                    "fixed k = {k} must lie in 1..={}",
                    self.n_items
                )));
            }
        }
        Ok(())
    }
}

/// Draws the true detector profiles for one environment.
pub fn gen_detectors<R: Rng + ?Sized>(
    spec: &EnvironmentSpec,
    rng: &mut R,
) -> Result<Vec<DetectorProfile>> {
    spec.validate()?;
    let n = spec.n_items;
    match &spec.detector_source {
        DetectorSource::Uniform => Ok((0..n)
            .map(|_| {
                let tpr: f64 = rng.random();
                let fpr: f64 = rng.random();
                DetectorProfile::new(tpr, fpr).expect("uniform draws lie in [0, 1)")
            })
            .collect()),
        DetectorSource::Beta { alpha } => {
            let beta = Beta::new(*alpha, *alpha)
                .map_err(|e| Error::Domain(format!("Beta({alpha}, {alpha}): {e}")))?;
            Ok((0..n)
                .map(|_| {
                    let tpr = beta.sample(rng).clamp(0.0, 1.0);
                    let fpr = beta.sample(rng).clamp(0.0, 1.0);
                    DetectorProfile::new(tpr, fpr).expect("clamped draws lie in [0, 1]")
                })
                .collect())
        }
        DetectorSource::File { path } => load_file_detectors(path, n),
    }
}

fn load_file_detectors(path: &Path, n_items: usize) -> Result<Vec<DetectorProfile>> {
    Ok(pad_detectors(
        &load_profiles(path, UndefinedEstimates::Reject)?,
        n_items,
    ))
}

/// Picks k by `k_rule`, then a uniform k-subset of items as relevant.
pub fn gen_ground_truth<R: Rng + ?Sized>(n: usize, k_rule: KRule, rng: &mut R) -> Result<GroundTruth> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    let k = match k_rule {
        KRule::SqrtN => rng.random_range(1..=n.isqrt()),
        KRule::Fixed(k) if (1..=n).contains(&k) => k,
        KRule::Fixed(k) => {
            return Err(Error::Domain(format!("fixed k = {k} must lie in 1..={n}")));
        }
    };
    let relevant = index::sample(rng, n, k).into_vec();
    GroundTruth::from_relevant(n, &relevant)
}

/// Agent-visible profiles: each rate plus independent N(0, sigma²) noise,
/// clamped to [0, 1]. `sigma = 0` returns the input and draws nothing.
pub fn inject_noise<R: Rng + ?Sized>(
    detectors: &[DetectorProfile],
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<DetectorProfile>> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Domain(format!("sigma must be non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(detectors.to_vec());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated above");
    Ok(detectors
        .iter()
        .map(|d| {
            let tpr = (d.tpr() + normal.sample(rng)).clamp(0.0, 1.0);
            let fpr = (d.fpr() + normal.sample(rng)).clamp(0.0, 1.0);
            DetectorProfile::new(tpr, fpr).expect("clamped")
        })
        .collect())
}

/// 1 iff the k highest beliefs (ties to the lower index) are exactly the
/// relevant items.
pub fn accuracy_at_k(beliefs: &BeliefState, truth: &GroundTruth) -> Result<bool> {
    if beliefs.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} beliefs but {} ground-truth states",
            beliefs.len(),
            truth.len()
        )));
    }
    let b = beliefs.beliefs();
    let mut order: Vec<usize> = (0..b.len()).collect();
    order.sort_by(|&x, &y| b[y].total_cmp(&b[x]));
    let states = truth.states();
    Ok(order[..truth.k()].iter().all(|&i| states[i]))
}

/// Expected total entropy after one round, computed exactly by enumerating
/// both outcomes of every item under the current belief marginals.
pub fn expected_next_entropy(
    beliefs: &BeliefState,
    assignment: &Assignment,
    detectors: &[DetectorProfile],
) -> f64 {
    beliefs
        .beliefs()
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let d = &detectors[assignment.detector_for(i)];
            let p1 = d.fpr() + b * d.delta();
            p1 * entropy_bits(bayes_update(b, d, true))
                + (1.0 - p1) * entropy_bits(bayes_update(b, d, false))
        })
        .sum()
}

/// Optional early-stopping thresholds. Stopping happens when any configured
/// criterion holds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stopping {
    /// Every belief is `<= delta` or `>= 1 - delta`.
    pub delta: Option<f64>,
    /// Total belief entropy below `epsilon`.
    pub epsilon: Option<f64>,
}

impl Stopping {
    pub fn is_disabled(&self) -> bool {
        self.delta.is_none() && self.epsilon.is_none()
    }

    pub fn is_met(&self, beliefs: &BeliefState) -> bool {
        let confident = self.delta.is_some_and(|d| {
            beliefs.beliefs().iter().all(|&b| b <= d || b >= 1.0 - d)
        });
        let settled = self
            .epsilon
            .is_some_and(|eps| beliefs.total_entropy() < eps);
        confident || settled
    }
}

/// Per-iteration metrics of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub accuracy_at_k: Vec<bool>,
    pub total_entropy: Vec<f64>,
    /// 1-based iteration after which the stopping rule held.
    pub converged_at: Option<usize>,
    pub final_beliefs: BeliefState,
}

/// One round of a traced trial: the information available to the agent and
/// what it observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub beliefs_before: BeliefState,
    /// Profiles the agent used for the Bayes update.
    pub agent_profiles: Vec<DetectorProfile>,
    pub assignment: Assignment,
    pub observations: ObservationVector,
}

/// A drawn environment: true detector profiles and hidden states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub detectors: Vec<DetectorProfile>,
    pub truth: GroundTruth,
}

impl Environment {
    pub fn generate<R: Rng + ?Sized>(spec: &EnvironmentSpec, rng: &mut R) -> Result<Self> {
        let detectors = gen_detectors(spec, rng)?;
        let truth = gen_ground_truth(spec.n_items, spec.k_rule, rng)?;
        Ok(Self { detectors, truth })
    }
}

/// Trial controls shared by every strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub iterations: usize,
    pub noise_sigma: f64,
    pub stopping: Stopping,
}

/// Runs one trial on a fixed environment. Observations draw from `obs_rng`
/// (one uniform per item per round, in item order); everything the policy
/// randomises draws from `policy_rng`.
pub fn simulate<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    env: &Environment,
    strategy: StrategyKind,
    config: &TrialConfig,
    obs_rng: &mut R1,
    policy_rng: &mut R2,
    mut trace: Option<&mut Vec<RoundRecord>>,
) -> Result<RunResult> {
    if config.iterations == 0 {
        return Err(Error::Domain("iterations must be at least 1".into()));
    }
    let n = env.truth.len();
    if env.detectors.len() != n {
        return Err(Error::Dimension(format!(
            "{} detectors for {n} items",
            env.detectors.len()
        )));
    }

    let mut beliefs = BeliefState::uninformative(n);
    let mut ts = TsState::uniform(n);
    let mut result = RunResult {
        accuracy_at_k: Vec::with_capacity(config.iterations),
        total_entropy: Vec::with_capacity(config.iterations),
        converged_at: None,
        final_beliefs: beliefs.clone(),
    };

    for t in 1..=config.iterations {
        let (assignment, agent_profiles) = match strategy {
            StrategyKind::ThompsonSampling => ts_assign_sampled(&beliefs, &ts, policy_rng)?,
            _ => {
                let visible = inject_noise(&env.detectors, config.noise_sigma, policy_rng)?;
                let assignment = match strategy {
                    StrategyKind::GoldPanning => gp_assign(&beliefs, &visible)?,
                    StrategyKind::HungarianIG => hungarian_ig_assign(&beliefs, &visible)?,
                    _ => psc_assign(n, policy_rng),
                };
                (assignment, visible)
            }
        };

        let observations = ObservationVector::new(
            env.truth
                .states()
                .iter()
                .enumerate()
                .map(|(i, &z)| {
                    sample_observation(z, &env.detectors[assignment.detector_for(i)], obs_rng)
                })
                .collect(),
        );

        let next = beliefs.updated(&assignment, &agent_profiles, &observations)?;
        if strategy == StrategyKind::ThompsonSampling {
            ts = ts_update(&ts, &assignment, &observations, &next)?;
        }
        if let Some(log) = trace.as_deref_mut() {
            log.push(RoundRecord {
                beliefs_before: beliefs,
                agent_profiles,
                assignment,
                observations,
            });
        }
        beliefs = next;

        result.accuracy_at_k.push(accuracy_at_k(&beliefs, &env.truth)?);
        result.total_entropy.push(beliefs.total_entropy());

        if config.stopping.is_met(&beliefs) {
            result.converged_at = Some(t);
            let (acc, ent) = (result.accuracy_at_k[t - 1], result.total_entropy[t - 1]);
            result.accuracy_at_k.resize(config.iterations, acc);
            result.total_entropy.resize(config.iterations, ent);
            break;
        }
    }
    result.final_beliefs = beliefs;
    Ok(result)
}

/// Draws an environment from `rng` and runs one trial, using the same
/// generator for observations and policy randomness.
pub fn run_trial<R: Rng + ?Sized>(
    spec: &EnvironmentSpec,
    strategy: StrategyKind,
    iterations: usize,
    stopping: Option<Stopping>,
    rng: &mut R,
) -> Result<RunResult> {
    let env = Environment::generate(spec, rng)?;
    let config = TrialConfig {
        iterations,
        noise_sigma: spec.noise_sigma,
        stopping: stopping.unwrap_or_default(),
    };
    let mut policy = ChaCha8Rng::seed_from_u64(rng.random());
    simulate(&env, strategy, &config, rng, &mut policy, None)
}

/// A full Monte Carlo experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub spec: EnvironmentSpec,
    pub strategies: Vec<StrategyKind>,
    pub iterations: usize,
    pub runs: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub stopping: Stopping,
    /// Worker threads. Does not affect results.
    #[serde(skip, default = "one")]
    pub parallelism: usize,
}

fn one() -> usize {
    1
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.strategies.is_empty() {
            return Err(Error::Domain("at least one strategy is required".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Domain("iterations must be at least 1".into()));
        }
        if self.runs == 0 {
            return Err(Error::Domain("runs must be at least 1".into()));
        }
        if self.parallelism == 0 {
            return Err(Error::Domain("parallelism must be at least 1".into()));
        }
        Ok(())
    }

    fn trial_config(&self) -> TrialConfig {
        TrialConfig {
            iterations: self.iterations,
            noise_sigma: self.spec.noise_sigma,
            stopping: self.stopping,
        }
    }
}

/// The spec with a file source replaced by its loaded contents, so the file
/// is read once per experiment rather than once per run.
enum ResolvedSource {
    Draw(EnvironmentSpec),
    Fixed(Vec<DetectorProfile>, EnvironmentSpec),
}

impl ResolvedSource {
    fn new(spec: &EnvironmentSpec) -> Result<Self> {
        Ok(match &spec.detector_source {
            DetectorSource::File { path } => {
                spec.validate()?;
                Self::Fixed(load_file_detectors(path, spec.n_items)?, spec.clone())
            }
            _ => Self::Draw(spec.clone()),
        })
    }

    fn environment(&self, rng: &mut ChaCha8Rng) -> Result<Environment> {
        match self {
            Self::Draw(spec) => Environment::generate(spec, rng),
            Self::Fixed(dets, spec) => Ok(Environment {
                detectors: dets.clone(),
                truth: gen_ground_truth(spec.n_items, spec.k_rule, rng)?,
            }),
        }
    }
}

/// One run of an experiment, all strategies on the same environment and
/// observation stream.
pub fn run_paired(exp: &Experiment, run_index: u64) -> Result<Vec<RunResult>> {
    run_paired_resolved(exp, &ResolvedSource::new(&exp.spec)?, run_index)
}

fn run_paired_resolved(
    exp: &Experiment,
    source: &ResolvedSource,
    run_index: u64,
) -> Result<Vec<RunResult>> {
    let mut env_rng = stream_rng(exp.master_seed, STREAM_ENVIRONMENT, run_index);
    let env = source.environment(&mut env_rng)?;
    let config = exp.trial_config();
    exp.strategies
        .iter()
        .map(|&s| {
            let mut obs = stream_rng(exp.master_seed, STREAM_OBSERVATION, run_index);
            let mut policy = stream_rng(exp.master_seed, STREAM_POLICY + s.id(), run_index);
            simulate(&env, s, &config, &mut obs, &mut policy, None)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    /// 1-based.
    pub iteration: usize,
    pub mean_accuracy: f64,
    /// Sample standard deviation of Accuracy@k over runs, divided by sqrt(runs).
    pub std_error: f64,
    pub mean_entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySeries {
    pub strategy: StrategyKind,
    pub points: Vec<IterationStats>,
}

impl StrategySeries {
    pub fn final_accuracy(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.mean_accuracy)
    }

    /// Mean accuracy at a 1-based iteration.
    pub fn accuracy_at(&self, iteration: usize) -> f64 {
        self.points[iteration - 1].mean_accuracy
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub experiment: Experiment,
    pub series: Vec<StrategySeries>,
}

impl AggregateResult {
    pub fn series_for(&self, strategy: StrategyKind) -> Option<&StrategySeries> {
        self.series.iter().find(|s| s.strategy == strategy)
    }
}

fn aggregate(strategy: StrategyKind, runs: &[&RunResult], iterations: usize) -> StrategySeries {
    let n = runs.len() as f64;
    let points = (0..iterations)
        .map(|t| {
            let hits = runs.iter().filter(|r| r.accuracy_at_k[t]).count() as f64;
            let mean = hits / n;
            let std_error = if runs.len() > 1 {
                // sum of squared deviations of a 0/1 sample
                let ss = hits * (1.0 - mean).powi(2) + (n - hits) * mean.powi(2);
                (ss / (n - 1.0)).sqrt() / n.sqrt()
            } else {
                0.0
            };
            let mean_entropy = runs.iter().map(|r| r.total_entropy[t]).sum::<f64>() / n;
            IterationStats {
                iteration: t + 1,
                mean_accuracy: mean,
                std_error,
                mean_entropy,
            }
        })
        .collect();
    StrategySeries { strategy, points }
}

/// Runs `exp.runs` paired trials per strategy across `exp.parallelism`
/// workers and reduces them in run order. The result depends only on the
/// experiment description, never on the worker count.
pub fn run_experiment(exp: &Experiment) -> Result<AggregateResult> {
    exp.validate()?;
    let source = ResolvedSource::new(&exp.spec)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(exp.parallelism)
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
    let per_run: Vec<Vec<RunResult>> = pool.install(|| {
        (0..exp.runs as u64)
            .into_par_iter()
            .map(|r| run_paired_resolved(exp, &source, r))
            .collect::<Result<_>>()
    })?;

    let series = exp
        .strategies
        .iter()
        .enumerate()
        .map(|(s, &kind)| {
            let runs: Vec<&RunResult> = per_run.iter().map(|r| &r[s]).collect();
            aggregate(kind, &runs, exp.iterations)
        })
        .collect();
    Ok(AggregateResult {
        experiment: exp.clone(),
        series,
    })
}

/// One experiment per noise level; environments are shared across levels.
pub fn sweep_noise(base: &Experiment, sigmas: &[f64]) -> Result<Vec<(f64, AggregateResult)>> {
    sigmas
        .iter()
        .map(|&sigma| {
            let mut exp = base.clone();
            exp.spec.noise_sigma = sigma;
            Ok((sigma, run_experiment(&exp)?))
        })
        .collect()
}

/// One experiment per Beta(alpha, alpha) detector distribution.
pub fn sweep_concentration(
    base: &Experiment,
    alphas: &[f64],
) -> Result<Vec<(f64, AggregateResult)>> {
    alphas
        .iter()
        .map(|&alpha| {
            let mut exp = base.clone();
            exp.spec.detector_source = DetectorSource::Beta { alpha };
            Ok((alpha, run_experiment(&exp)?))
        })
        .collect()
}
