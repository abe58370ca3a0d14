//! Acceptance suite. Each test prints one `PASS`/`FAIL` line and then asserts.
//!
//! Run with `cargo test -p gold-panning --test acceptance -- --nocapture`.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use gold_panning::calibration::{
    read_profile_file, synthesize_trials, write_trial_log, GoldPlacement,
};
use gold_panning::matching::{brute_force_match, hungarian_solve, is_anti_monge, ANTI_MONGE_TOL};
use gold_panning::model::{gain_matrix, info_gain, Assignment, BeliefState, DetectorProfile, GainMatrix};
use gold_panning::simulation::{
    expected_next_entropy, gen_ground_truth, run_experiment, simulate, stream_rng,
    sweep_concentration, sweep_noise, Environment, EnvironmentSpec, Experiment, KRule,
    RoundRecord, Stopping, TrialConfig, NOISE_LEVELS,
};
use gold_panning::strategies::{gp_assign, hungarian_ig_assign, StrategyKind};

const MASTER_SEED: u64 = 20_260_101;

fn report(id: u32, title: &str, pass: bool, elapsed: Duration, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} {verdict} [{:.2?}] {title}: {detail}", elapsed);
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, usize::from)
}

fn ln_entropy_bits(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.ln() };
    (term(p) + term(1.0 - p)) / std::f64::consts::LN_2
}

fn random_detector(rng: &mut impl Rng) -> DetectorProfile {
    DetectorProfile::new(rng.random(), rng.random()).unwrap()
}

fn random_beliefs(rng: &mut impl Rng, n: usize) -> BeliefState {
    BeliefState::from_beliefs((0..n).map(|_| rng.random()).collect()).unwrap()
}

/// Sorts indices by `key` descending, keeping index order among ties.
fn descending_order(keys: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]));
    order
}

#[test]
fn c01_mutual_information_identity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let b: f64 = rng.random();
        let (tpr, fpr): (f64, f64) = (rng.random(), rng.random());
        let det = DetectorProfile::new(tpr, fpr).unwrap();
        // enumerate both outcomes directly
        let mut expected_posterior_entropy = 0.0;
        for (p_given_1, p_given_0) in [(tpr, fpr), (1.0 - tpr, 1.0 - fpr)] {
            let p_o = b * p_given_1 + (1.0 - b) * p_given_0;
            if p_o > 0.0 {
                expected_posterior_entropy += p_o * ln_entropy_bits(b * p_given_1 / p_o);
            }
        }
        let mi = ln_entropy_bits(b) - expected_posterior_entropy;
        worst = worst.max((mi - info_gain(b, &det)).abs());
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-9 && elapsed < Duration::from_secs(1);
    report(1, "mutual-information identity", pass, elapsed, &format!("max |diff| = {worst:.3e} over 1000 triples"));
    assert!(pass);
}

#[test]
fn c02_hungarian_matches_brute_force() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED + 2);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(2..=7);
        let w = GainMatrix::from_fn(n, n, |_, _| rng.random());
        let h = hungarian_solve(&w).unwrap();
        let b = brute_force_match(&w).unwrap();
        worst = worst.max((h.total_weight - b.total_weight).abs());
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-12 && elapsed < Duration::from_secs(5);
    report(2, "Hungarian vs brute force", pass, elapsed, &format!("max |diff| = {worst:.3e} over 500 matrices"));
    assert!(pass);
}

#[test]
fn c03_greedy_is_optimal_for_symmetric_detectors() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED + 3);
    let mut worst = 0.0f64;
    let mut non_monge = 0;
    for case in 0..500 {
        let n = [5, 10, 20][case % 3];
        let beliefs = random_beliefs(&mut rng, n);
        let dets: Vec<DetectorProfile> = (0..n)
            .map(|_| DetectorProfile::symmetric(rng.random()).unwrap())
            .collect();
        let gp = gp_assign(&beliefs, &dets).unwrap().total_gain(&beliefs, &dets);
        let opt = hungarian_ig_assign(&beliefs, &dets).unwrap().total_gain(&beliefs, &dets);
        worst = worst.max((gp - opt).abs());

        let rows = descending_order(&beliefs.entropies());
        let cols = descending_order(&dets.iter().map(|d| d.diagnosticity()).collect::<Vec<_>>());
        let sorted = gain_matrix(&beliefs, &dets).unwrap().permuted(&rows, &cols);
        if !is_anti_monge(&sorted, ANTI_MONGE_TOL) {
            non_monge += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-9 && non_monge == 0 && elapsed < Duration::from_secs(10);
    report(
        3,
        "greedy equals optimal matching (symmetric detectors)",
        pass,
        elapsed,
        &format!("max |GP - Hungarian| = {worst:.3e}, non-anti-Monge sorted matrices = {non_monge}/500"),
    );
    assert!(pass);
}

struct PermutationAudit {
    violating_instances: usize,
    violating_permutations: usize,
    worst_shortfall: f64,
    below_mean: usize,
}

fn audit_greedy(rng: &mut ChaCha8Rng, symmetric: bool) -> PermutationAudit {
    let mut audit = PermutationAudit {
        violating_instances: 0,
        violating_permutations: 0,
        worst_shortfall: 0.0,
        below_mean: 0,
    };
    for _ in 0..200 {
        let n = rng.random_range(2..=20);
        let beliefs = random_beliefs(rng, n);
        let dets: Vec<DetectorProfile> = (0..n)
            .map(|_| {
                if symmetric {
                    DetectorProfile::symmetric(rng.random()).unwrap()
                } else {
                    random_detector(rng)
                }
            })
            .collect();
        let gp = gp_assign(&beliefs, &dets).unwrap().total_gain(&beliefs, &dets);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut violations = 0;
        let mut sum = 0.0;
        for _ in 0..100 {
            perm.shuffle(rng);
            let g = Assignment::new(perm.clone()).unwrap().total_gain(&beliefs, &dets);
            sum += g;
            if g > gp + 1e-9 {
                violations += 1;
                audit.worst_shortfall = audit.worst_shortfall.max(g - gp);
            }
        }
        if violations > 0 {
            audit.violating_instances += 1;
        }
        audit.violating_permutations += violations;
        if gp + 1e-9 < sum / 100.0 {
            audit.below_mean += 1;
        }
    }
    audit
}

#[test]
fn c04_greedy_dominates_sampled_permutations() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED + 4);
    let general = audit_greedy(&mut rng, false);
    let elapsed = start.elapsed();

    let symmetric = audit_greedy(&mut rng, true);
    println!(
        "criterion  4 info: symmetric detectors: {} violating instances, {} violating permutations",
        symmetric.violating_instances, symmetric.violating_permutations
    );
    println!(
        "criterion  4 info: general detectors: greedy below the sampled-permutation mean in {}/200 instances",
        general.below_mean
    );

    let pass = general.violating_permutations == 0 && elapsed < Duration::from_secs(10);
    report(
        4,
        "greedy one-step gain >= every sampled permutation",
        pass,
        elapsed,
        &format!(
            "{} of 20000 permutations beat greedy ({} of 200 instances), worst excess {:.3e} bits",
            general.violating_permutations, general.violating_instances, general.worst_shortfall
        ),
    );
    assert!(pass);
}

#[test]
fn c05_entropy_supermartingale() {
    let start = Instant::now();
    let mut rounds = 0usize;
    let mut worst = f64::NEG_INFINITY;
    let mut trial = 0u64;
    for &n in &[5usize, 20, 50] {
        for &sigma in &NOISE_LEVELS {
            for strategy in StrategyKind::ALL {
                for _ in 0..5 {
                    let spec = EnvironmentSpec::uniform(n, MASTER_SEED);
                    let mut env_rng = stream_rng(MASTER_SEED, 5, trial);
                    let env = Environment::generate(&spec, &mut env_rng).unwrap();
                    let mut obs = stream_rng(MASTER_SEED, 6, trial);
                    let mut policy = stream_rng(MASTER_SEED, 7, trial);
                    let config = TrialConfig {
                        iterations: 20,
                        noise_sigma: sigma,
                        stopping: Stopping::default(),
                    };
                    let mut trace: Vec<RoundRecord> = Vec::new();
                    simulate(&env, strategy, &config, &mut obs, &mut policy, Some(&mut trace)).unwrap();
                    for r in &trace {
                        let next = expected_next_entropy(&r.beliefs_before, &r.assignment, &r.agent_profiles);
                        worst = worst.max(next - r.beliefs_before.total_entropy());
                        rounds += 1;
                    }
                    trial += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-9;
    report(
        5,
        "expected next entropy never exceeds current entropy",
        pass,
        elapsed,
        &format!("{rounds} rounds over {trial} trials, max (E[H'] - H) = {worst:.3e}"),
    );
    assert!(pass);
}

fn desk_experiment(strategies: Vec<StrategyKind>) -> Experiment {
    Experiment {
        spec: EnvironmentSpec::uniform(50, MASTER_SEED),
        strategies,
        iterations: 20,
        runs: 2000,
        master_seed: MASTER_SEED,
        stopping: Stopping::default(),
        parallelism: workers(),
    }
}

#[test]
fn c06_uniform_detector_benchmark() {
    use StrategyKind::*;
    let start = Instant::now();
    let result = run_experiment(&desk_experiment(vec![GoldPanning, HungarianIG, PSC])).unwrap();
    let elapsed = start.elapsed();
    let gp = result.series_for(GoldPanning).unwrap();
    let hu = result.series_for(HungarianIG).unwrap();
    let psc = result.series_for(PSC).unwrap();

    let gp10 = gp.accuracy_at(10);
    let psc20 = psc.accuracy_at(20);
    let max_gap = gp
        .points
        .iter()
        .zip(&hu.points)
        .map(|(a, b)| (a.mean_accuracy - b.mean_accuracy).abs())
        .fold(0.0, f64::max);
    let (a, b, c) = (gp10 >= 0.70, psc20 < gp10, max_gap <= 0.03);
    let pass = a && b && c && elapsed <= Duration::from_secs(600);
    report(
        6,
        "N=50 uniform detectors, 2000 runs",
        pass,
        elapsed,
        &format!(
            "GP@10 = {gp10:.4} (>= 0.70: {a}), PSC@20 = {psc20:.4} (< GP@10: {b}), max |GP - Hungarian| = {max_gap:.4} (<= 0.03: {c})"
        ),
    );
    assert!(pass);
}

#[test]
fn c07_noise_sweep_ordering() {
    let start = Instant::now();
    let sweep = sweep_noise(&desk_experiment(vec![StrategyKind::GoldPanning]), &NOISE_LEVELS).unwrap();
    let elapsed = start.elapsed();
    let finals: Vec<f64> = sweep.iter().map(|(_, r)| r.series[0].final_accuracy()).collect();
    let ordered = finals.windows(2).all(|w| w[1] <= w[0] + 0.01);
    let close = (finals[0] - finals[1]).abs() <= 0.02;
    let pass = ordered && close;
    report(
        7,
        "noise sweep degrades gracefully",
        pass,
        elapsed,
        &format!(
            "final GP accuracy by sigma {:?}: {:?} (ordered: {ordered}, |perfect - low| <= 0.02: {close})",
            NOISE_LEVELS, finals
        ),
    );
    assert!(pass);
}

#[test]
fn c08_concentration_sweep_gap() {
    use StrategyKind::*;
    let start = Instant::now();
    let alphas = [0.1, 1.0, 10.0, 100.0];
    let sweep = sweep_concentration(&desk_experiment(vec![GoldPanning, PSC]), &alphas).unwrap();
    let elapsed = start.elapsed();
    let gaps: Vec<f64> = sweep
        .iter()
        .map(|(_, r)| {
            r.series_for(GoldPanning).unwrap().final_accuracy() - r.series_for(PSC).unwrap().final_accuracy()
        })
        .collect();
    let widening = gaps[0] >= gaps[3] + 0.05;
    let converged = gaps[3].abs() <= 0.02;
    let pass = widening && converged;
    report(
        8,
        "GP advantage shrinks as detectors homogenise",
        pass,
        elapsed,
        &format!(
            "final GP - PSC gap by alpha {alphas:?}: {:?} (gap(0.1) >= gap(100) + 0.05: {widening}, |gap(100)| <= 0.02: {converged})",
            gaps.iter().map(|g| (g * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    );
    assert!(pass);
}

/// Uniform (tpr, fpr) draws conditioned on diagnosticity >= `min_diag`.
fn diagnostic_detectors(rng: &mut impl Rng, n: usize, min_diag: f64) -> Vec<DetectorProfile> {
    (0..n)
        .map(|_| loop {
            let d = random_detector(rng);
            if d.diagnosticity() >= min_diag {
                break d;
            }
        })
        .collect()
}

#[test]
fn c09_posterior_consistency() {
    let start = Instant::now();
    let n = 50;
    let config = TrialConfig {
        iterations: 200,
        noise_sigma: 0.0,
        stopping: Stopping::default(),
    };
    let errors: Vec<f64> = (0..1000u64)
        .into_par_iter()
        .map(|run| {
            let mut env_rng = stream_rng(MASTER_SEED, 9, run);
            let detectors = diagnostic_detectors(&mut env_rng, n, 0.3);
            let truth = gen_ground_truth(n, KRule::SqrtN, &mut env_rng).unwrap();
            let env = Environment { detectors, truth };
            let mut obs = stream_rng(MASTER_SEED, 10, run);
            let mut policy = stream_rng(MASTER_SEED, 11, run);
            let result =
                simulate(&env, StrategyKind::GoldPanning, &config, &mut obs, &mut policy, None).unwrap();
            result
                .final_beliefs
                .beliefs()
                .iter()
                .zip(env.truth.states())
                .map(|(&b, &z)| (b - if z { 1.0 } else { 0.0 }).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let elapsed = start.elapsed();
    let converged = errors.iter().filter(|&&e| e < 0.01).count();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    let pass = converged >= 990;
    report(
        9,
        "posterior concentrates on the true states",
        pass,
        elapsed,
        &format!("{converged}/1000 runs with max |b - Z| < 0.01 after 200 rounds (worst {worst:.3e})"),
    );
    assert!(pass);
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_goldpan"))
        .args(args)
        .output()
        .expect("goldpan binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

#[test]
fn c10_calibration_recovery() {
    let start = Instant::now();
    let truth = [
        (0.72, 0.05),
        (0.55, 0.03),
        (0.40, 0.02),
        (0.45, 0.02),
        (0.60, 0.04),
        (0.70, 0.06),
    ]
    .map(|(t, f)| DetectorProfile::new(t, f).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED + 10);
    let records = synthesize_trials(&truth, 10_000, GoldPlacement::All, &mut rng).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("trials.jsonl");
    let out = dir.path().join("profiles.json");
    write_trial_log(&records, &log).unwrap();
    let status = run_cli(&["calibrate", path_str(&log), "--out", path_str(&out)]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));

    let file = read_profile_file(&out).unwrap();
    let mut worst = 0.0f64;
    for (est, true_profile) in file.positions.iter().zip(&truth) {
        worst = worst.max((est.tpr.unwrap() - true_profile.tpr()).abs());
        worst = worst.max((est.fpr.unwrap() - true_profile.fpr()).abs());
    }
    let elapsed = start.elapsed();
    let pass = file.positions.len() == truth.len() && worst <= 0.02;
    report(
        10,
        "calibration recovers known profiles",
        pass,
        elapsed,
        &format!("6 positions x 10^4 gold trials, max |estimate - truth| = {worst:.4}"),
    );
    assert!(pass);
}

#[test]
fn c11_cli_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (label, parallelism) in [("a", "1"), ("b", "1"), ("c", "8"), ("d", "8")] {
        let out = dir.path().join(format!("{label}.csv"));
        let status = run_cli(&[
            "simulate",
            "--seed",
            "424242",
            "--runs",
            "300",
            "--strategies",
            "GoldPanning,HungarianIG,PSC,ThompsonSampling",
            "--parallelism",
            parallelism,
            "--out",
            path_str(&out),
        ]);
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        outputs.push(std::fs::read(&out).unwrap());
    }
    let elapsed = start.elapsed();
    let identical = outputs.windows(2).all(|w| w[0] == w[1]);
    let pass = identical && !outputs[0].is_empty();
    report(
        11,
        "byte-identical CSV across invocations and parallelism",
        pass,
        elapsed,
        &format!("4 invocations (parallelism 1, 1, 8, 8), {} bytes each, identical: {identical}", outputs[0].len()),
    );
    assert!(pass);
}
