//! `goldpan` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 I/O error.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::calibration::{estimate_profiles, read_trial_log, save_profiles, Smoothing};
use crate::error::Error;
use crate::simulation::{
    default_concentrations, run_experiment, sweep_concentration, sweep_noise, AggregateResult,
    DetectorSource, EnvironmentSpec, Experiment, KRule, Stopping, NOISE_LEVELS,
};
use crate::strategies::StrategyKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub const CSV_HEADER: &str = "strategy,iteration,mean_accuracy,std_error,mean_entropy";

pub const DEFAULT_N_ITEMS: usize = 50;
pub const DEFAULT_ITERATIONS: usize = 20;
pub const DEFAULT_RUNS: usize = 2000;
pub const DEFAULT_OUTPUT: &str = "results.csv";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// `--seed` value: a fixed integer or `random`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSetting {
    Fixed(u64),
    Random(RandomSeed),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomSeed {
    Random,
}

impl FromStr for SeedSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "random" {
            return Ok(SeedSetting::Random(RandomSeed::Random));
        }
        s.parse()
            .map(SeedSetting::Fixed)
            .map_err(|_| format!("expected an unsigned 64-bit integer or `random`, got {s:?}"))
    }
}

impl SeedSetting {
    fn resolve(self) -> u64 {
        match self {
            SeedSetting::Fixed(s) => s,
            SeedSetting::Random(_) => rand::random(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Uniform,
    Beta,
    File,
}

/// Flat JSON experiment configuration. Every key is optional; command-line
/// flags override file values. The JSON sidecar written next to each CSV is
/// a fully resolved instance of this type and can be passed back via `--config`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Subcommand this config was resolved for; checked when present.
    pub command: Option<String>,
    pub n_items: Option<usize>,
    pub detector_source: Option<SourceKind>,
    pub alpha: Option<f64>,
    pub detector_file: Option<PathBuf>,
    /// Fixed number of relevant items; `null` draws k from `1..=floor(sqrt(n))`.
    pub k: Option<usize>,
    pub noise_sigma: Option<f64>,
    pub strategies: Option<Vec<StrategyKind>>,
    pub iterations: Option<usize>,
    pub runs: Option<usize>,
    pub seed: Option<SeedSetting>,
    pub output_path: Option<PathBuf>,
    pub parallelism: Option<usize>,
    pub stop_delta: Option<f64>,
    pub stop_epsilon: Option<f64>,
    pub sigmas: Option<Vec<f64>>,
    pub alphas: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Values set in `other` win.
    fn overlay(self, other: ExperimentConfig) -> Self {
        macro_rules! pick {
            ($($field:ident),*) => {
                ExperimentConfig { $($field: other.$field.or(self.$field)),* }
            };
        }
        pick!(
            command, n_items, detector_source, alpha, detector_file, k, noise_sigma, strategies,
            iterations, runs, seed, output_path, parallelism, stop_delta, stop_epsilon, sigmas,
            alphas
        )
    }
}

#[derive(Debug, Parser)]
#[command(name = "goldpan", version, about = "Belief-driven detector assignment experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo comparison of strategies; one CSV row per strategy and iteration.
    Simulate(SimulateArgs),
    /// Repeat `simulate` across agent-side noise levels.
    SweepNoise {
        #[command(flatten)]
        sim: SimulateArgs,
        /// Comma-separated noise standard deviations.
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
    },
    /// Repeat `simulate` across Beta(alpha, alpha) detector distributions.
    SweepConcentration {
        #[command(flatten)]
        sim: SimulateArgs,
        /// Comma-separated concentration parameters.
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
    },
    /// Estimate per-position detector profiles from a JSON-lines trial log.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV path. The resolved config is written alongside as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed (u64) or `random`.
    #[arg(long)]
    pub seed: Option<SeedSetting>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub n_items: Option<usize>,
    /// Comma-separated: GoldPanning, HungarianIG, PSC, ThompsonSampling.
    #[arg(long, value_delimiter = ',')]
    pub strategies: Option<Vec<StrategyKind>>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Use a calibrated profile file as the detector set.
    #[arg(long)]
    pub detector_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SmoothingArg {
    None,
    AddOne,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    /// JSON-lines trial log.
    pub log: PathBuf,
    /// Profile file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SmoothingArg::None)]
    pub smoothing: SmoothingArg,
}

impl SimulateArgs {
    fn as_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            n_items: self.n_items,
            detector_source: self.detector_file.as_ref().map(|_| SourceKind::File),
            detector_file: self.detector_file.clone(),
            strategies: self.strategies.clone(),
            iterations: self.iterations,
            runs: self.runs,
            seed: self.seed,
            output_path: self.out.clone(),
            parallelism: self.parallelism,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Simulate,
    SweepNoise,
    SweepConcentration,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::SweepNoise => "sweep-noise",
            Mode::SweepConcentration => "sweep-concentration",
        }
    }

    fn default_strategies(self) -> Vec<StrategyKind> {
        use StrategyKind::*;
        match self {
            Mode::Simulate => vec![GoldPanning, HungarianIG, PSC],
            Mode::SweepNoise => vec![GoldPanning],
            Mode::SweepConcentration => vec![GoldPanning, PSC],
        }
    }
}

/// A config with every value decided.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub experiment: Experiment,
    pub output: PathBuf,
    pub sweep: Vec<f64>,
    /// Echo written to the JSON sidecar.
    pub echo: ExperimentConfig,
}

fn field_err(field: &str, msg: impl fmt::Display) -> CliError {
    CliError::Usage(format!("config field `{field}`: {msg}"))
}

fn resolve(mode: Mode, cfg: ExperimentConfig) -> Result<ResolvedRun, CliError> {
    if let Some(cmd) = cfg.command.as_deref().filter(|&c| c != mode.name()) {
        return Err(field_err(
            "command",
            format!("config was written for `{cmd}`, not `{}`", mode.name()),
        ));
    }

    let n_items = cfg.n_items.unwrap_or(DEFAULT_N_ITEMS);
    if n_items == 0 {
        return Err(field_err("n_items", "must be at least 1"));
    }
    let iterations = cfg.iterations.unwrap_or(DEFAULT_ITERATIONS);
    if iterations == 0 {
        return Err(field_err("iterations", "must be at least 1"));
    }
    let runs = cfg.runs.unwrap_or(DEFAULT_RUNS);
    if runs == 0 {
        return Err(field_err("runs", "must be at least 1"));
    }
    let strategies = cfg.strategies.clone().unwrap_or_else(|| mode.default_strategies());
    if strategies.is_empty() {
        return Err(field_err("strategies", "must list at least one strategy"));
    }
    let parallelism = cfg.parallelism.unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, usize::from)
    });
    if parallelism == 0 {
        return Err(field_err("parallelism", "must be at least 1"));
    }
    let noise_sigma = cfg.noise_sigma.unwrap_or(0.0);
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(field_err("noise_sigma", "must be a non-negative number"));
    }
    if let Some(k) = cfg.k {
        if k == 0 || k > n_items {
            return Err(field_err("k", format!("must lie in 1..={n_items}")));
        }
    }
    for (field, value) in [("stop_delta", cfg.stop_delta), ("stop_epsilon", cfg.stop_epsilon)] {
        if value.is_some_and(|v| !(v.is_finite() && v >= 0.0)) {
            return Err(field_err(field, "must be a non-negative number"));
        }
    }

    let source_kind = cfg.detector_source.unwrap_or(if cfg.detector_file.is_some() {
        SourceKind::File
    } else if cfg.alpha.is_some() {
        SourceKind::Beta
    } else {
        SourceKind::Uniform
    });
    let detector_source = match source_kind {
        SourceKind::Uniform => DetectorSource::Uniform,
        SourceKind::Beta => {
            let alpha = cfg
                .alpha
                .ok_or_else(|| field_err("alpha", "required when detector_source is \"beta\""))?;
            if !(alpha.is_finite() && alpha > 0.0) {
                return Err(field_err("alpha", "must be positive"));
            }
            DetectorSource::Beta { alpha }
        }
        SourceKind::File => DetectorSource::File {
            path: cfg.detector_file.clone().ok_or_else(|| {
                field_err("detector_file", "required when detector_source is \"file\"")
            })?,
        },
    };

    let seed = cfg
        .seed
        .ok_or_else(|| {
            CliError::Usage(
                "no seed given: pass --seed <u64> or --seed random (or set \"seed\" in the config)"
                    .into(),
            )
        })?
        .resolve();

    let sweep = match mode {
        Mode::Simulate => Vec::new(),
        Mode::SweepNoise => {
            let sigmas = cfg.sigmas.clone().unwrap_or_else(|| NOISE_LEVELS.to_vec());
            if sigmas.is_empty() || sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                return Err(field_err("sigmas", "must be a non-empty list of non-negative numbers"));
            }
            sigmas
        }
        Mode::SweepConcentration => {
            let alphas = cfg.alphas.clone().unwrap_or_else(default_concentrations);
            if alphas.is_empty() || alphas.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                return Err(field_err("alphas", "must be a non-empty list of positive numbers"));
            }
            alphas
        }
    };

    let output = cfg
        .output_path
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));

    let experiment = Experiment {
        spec: EnvironmentSpec {
            n_items,
            detector_source,
            k_rule: cfg.k.map_or(KRule::SqrtN, KRule::Fixed),
            noise_sigma,
            seed,
        },
        strategies: strategies.clone(),
        iterations,
        runs,
        master_seed: seed,
        stopping: Stopping {
            delta: cfg.stop_delta,
            epsilon: cfg.stop_epsilon,
        },
        parallelism,
    };

    let echo = ExperimentConfig {
        command: Some(mode.name().to_string()),
        n_items: Some(n_items),
        detector_source: Some(source_kind),
        alpha: cfg.alpha,
        detector_file: cfg.detector_file,
        k: cfg.k,
        noise_sigma: Some(noise_sigma),
        strategies: Some(strategies),
        iterations: Some(iterations),
        runs: Some(runs),
        seed: Some(SeedSetting::Fixed(seed)),
        output_path: Some(output.clone()),
        parallelism: Some(parallelism),
        stop_delta: cfg.stop_delta,
        stop_epsilon: cfg.stop_epsilon,
        sigmas: (mode == Mode::SweepNoise).then(|| sweep.clone()),
        alphas: (mode == Mode::SweepConcentration).then(|| sweep.clone()),
    };

    Ok(ResolvedRun {
        experiment,
        output,
        sweep,
        echo,
    })
}

/// Sidecar path: the CSV path with its extension replaced by `json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    let candidate = csv.with_extension("json");
    if candidate == csv {
        let mut s = csv.as_os_str().to_owned();
        s.push(".config.json");
        PathBuf::from(s)
    } else {
        candidate
    }
}

fn push_rows(out: &mut String, prefix: Option<f64>, result: &AggregateResult) {
    use std::fmt::Write as _;
    for series in &result.series {
        for p in &series.points {
            if let Some(x) = prefix {
                let _ = write!(out, "{x:?},");
            }
            let _ = writeln!(
                out,
                "{},{},{:?},{:?},{:?}",
                series.strategy, p.iteration, p.mean_accuracy, p.std_error, p.mean_entropy
            );
        }
    }
}

/// CSV text for a single experiment.
pub fn render_csv(result: &AggregateResult) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    push_rows(&mut out, None, result);
    out
}

/// CSV text for a sweep, with a leading `column` holding the swept value.
pub fn render_sweep_csv(column: &str, results: &[(f64, AggregateResult)]) -> String {
    let mut out = format!("{column},{CSV_HEADER}\n");
    for (x, r) in results {
        push_rows(&mut out, Some(*x), r);
    }
    out
}

fn load_config(args: &SimulateArgs) -> Result<ExperimentConfig, CliError> {
    let base = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    Ok(base.overlay(args.as_config()))
}

fn write_outputs(run: &ResolvedRun, csv: &str) -> Result<(), CliError> {
    write_file(&run.output, csv)?;
    let mut echo = serde_json::to_string_pretty(&run.echo).expect("config always serializes");
    echo.push('\n');
    write_file(&sidecar_path(&run.output), &echo)
}

fn cmd_experiment(mode: Mode, args: &SimulateArgs, cfg: ExperimentConfig) -> Result<ResolvedRun, CliError> {
    let merged = load_config(args)?.overlay(cfg);
    let run = resolve(mode, merged)?;
    let csv = match mode {
        Mode::Simulate => render_csv(&run_experiment(&run.experiment)?),
        Mode::SweepNoise => render_sweep_csv("sigma", &sweep_noise(&run.experiment, &run.sweep)?),
        Mode::SweepConcentration => render_sweep_csv(
            "alpha",
            &sweep_concentration(&run.experiment, &run.sweep)?,
        ),
    };
    write_outputs(&run, &csv)?;
    Ok(run)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<ResolvedRun, CliError> {
    cmd_experiment(Mode::Simulate, args, ExperimentConfig::default())
}

pub fn cmd_sweep_noise(args: &SimulateArgs, sigmas: Option<Vec<f64>>) -> Result<ResolvedRun, CliError> {
    let flags = ExperimentConfig {
        sigmas,
        ..Default::default()
    };
    cmd_experiment(Mode::SweepNoise, args, flags)
}

pub fn cmd_sweep_concentration(
    args: &SimulateArgs,
    alphas: Option<Vec<f64>>,
) -> Result<ResolvedRun, CliError> {
    let flags = ExperimentConfig {
        alphas,
        ..Default::default()
    };
    cmd_experiment(Mode::SweepConcentration, args, flags)
}

fn fmt_rate(x: Option<f64>) -> String {
    x.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"))
}

/// Estimates profiles from `args.log`, writes them to `args.out` and prints a
/// per-position summary to `stdout`.
pub fn cmd_calibrate(args: &CalibrateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let records = read_trial_log(&args.log)?;
    let smoothing = match args.smoothing {
        SmoothingArg::None => Smoothing::None,
        SmoothingArg::AddOne => Smoothing::AddOne,
    };
    let file = estimate_profiles(&records, smoothing)?;
    save_profiles(&file, &args.out)?;

    let io = |e: std::io::Error| CliError::Io(format!("stdout: {e}"));
    writeln!(stdout, "{:>8}  {:>9}  {:>9}  {:>13}", "position", "tpr", "fpr", "diagnosticity")
        .map_err(io)?;
    for p in &file.positions {
        writeln!(
            stdout,
            "{:>8}  {:>9}  {:>9}  {:>13}",
            p.position,
            fmt_rate(p.tpr),
            fmt_rate(p.fpr),
            fmt_rate(p.diagnosticity())
        )
        .map_err(io)?;
    }
    Ok(())
}

/// Parses `args` and runs the selected subcommand, returning the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = write!(sink, "{rendered}");
            return code;
        }
    };

    let outcome = match &cli.command {
        Command::Simulate(sim) => cmd_simulate(sim).map(|r| report(stdout, &r)),
        Command::SweepNoise { sim, sigmas } => {
            cmd_sweep_noise(sim, sigmas.clone()).map(|r| report(stdout, &r))
        }
        Command::SweepConcentration { sim, alphas } => {
            cmd_sweep_concentration(sim, alphas.clone()).map(|r| report(stdout, &r))
        }
        Command::Calibrate(cal) => cmd_calibrate(cal, stdout),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            e.exit_code()
        }
    }
}

fn report(stdout: &mut dyn Write, run: &ResolvedRun) {
    let _ = writeln!(
        stdout,
        "wrote {} (config: {}, seed {})",
        run.output.display(),
        sidecar_path(&run.output).display(),
        run.experiment.master_seed
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_parsing() {
        assert_eq!("42".parse::<SeedSetting>().unwrap(), SeedSetting::Fixed(42));
        assert_eq!(
            "random".parse::<SeedSetting>().unwrap(),
            SeedSetting::Random(RandomSeed::Random)
        );
        assert!("-1".parse::<SeedSetting>().is_err());
        let cfg = ExperimentConfig::from_json(r#"{"seed": "random"}"#).unwrap();
        assert_eq!(cfg.seed, Some(SeedSetting::Random(RandomSeed::Random)));
        let cfg = ExperimentConfig::from_json(r#"{"seed": 7}"#).unwrap();
        assert_eq!(cfg.seed, Some(SeedSetting::Fixed(7)));
    }

    #[test]
    fn overlay_prefers_flags() {
        let file = ExperimentConfig {
            runs: Some(10),
            iterations: Some(5),
            ..Default::default()
        };
        let flags = ExperimentConfig {
            runs: Some(3),
            ..Default::default()
        };
        let merged = file.overlay(flags);
        assert_eq!(merged.runs, Some(3));
        assert_eq!(merged.iterations, Some(5));
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = ExperimentConfig::from_json(r#"{"n_item": 3}"#).unwrap_err();
        assert!(err.to_string().contains("n_item"), "{err}");
        assert_eq!(err.exit_code(), EXIT_USAGE);
    }

    #[test]
    fn resolution_errors_name_the_field() {
        let with_seed = |cfg: ExperimentConfig| ExperimentConfig {
            seed: Some(SeedSetting::Fixed(1)),
            ..cfg
        };
        let cases = [
            (ExperimentConfig { runs: Some(0), ..Default::default() }, "runs"),
            (ExperimentConfig { strategies: Some(vec![]), ..Default::default() }, "strategies"),
            (ExperimentConfig { detector_source: Some(SourceKind::Beta), ..Default::default() }, "alpha"),
            (ExperimentConfig { k: Some(100), ..Default::default() }, "k"),
            (ExperimentConfig { noise_sigma: Some(-1.0), ..Default::default() }, "noise_sigma"),
        ];
        for (cfg, field) in cases {
            let err = resolve(Mode::Simulate, with_seed(cfg)).unwrap_err();
            assert!(err.to_string().contains(field), "{err}");
            assert_eq!(err.exit_code(), EXIT_USAGE);
        }
        let err = resolve(Mode::Simulate, ExperimentConfig::default()).unwrap_err();
        assert!(err.to_string().contains("--seed"));
        let wrong_cmd = with_seed(ExperimentConfig {
            command: Some("sweep-noise".into()),
            ..Default::default()
        });
        assert!(resolve(Mode::Simulate, wrong_cmd).is_err());
    }

    #[test]
    fn defaults_and_random_seed() {
        let cfg = ExperimentConfig {
            seed: Some(SeedSetting::Random(RandomSeed::Random)),
            ..Default::default()
        };
        let run = resolve(Mode::SweepNoise, cfg).unwrap();
        assert_eq!(run.experiment.spec.n_items, DEFAULT_N_ITEMS);
        assert_eq!(run.experiment.runs, DEFAULT_RUNS);
        assert_eq!(run.experiment.iterations, DEFAULT_ITERATIONS);
        assert_eq!(run.sweep, NOISE_LEVELS.to_vec());
        assert_eq!(run.echo.seed, Some(SeedSetting::Fixed(run.experiment.master_seed)));
        assert_eq!(run.experiment.strategies, vec![StrategyKind::GoldPanning]);

        let conc = resolve(
            Mode::SweepConcentration,
            ExperimentConfig { seed: Some(SeedSetting::Fixed(0)), ..Default::default() },
        )
        .unwrap();
        assert_eq!(conc.sweep.len(), 20);
    }

    #[test]
    fn sidecar_naming() {
        assert_eq!(sidecar_path(Path::new("out/run.csv")), PathBuf::from("out/run.json"));
        assert_eq!(sidecar_path(Path::new("run")), PathBuf::from("run.json"));
        assert_eq!(sidecar_path(Path::new("run.json")), PathBuf::from("run.json.config.json"));
    }

    #[test]
    fn csv_layout() {
        let exp = Experiment {
            spec: EnvironmentSpec::uniform(3, 0),
            strategies: vec![StrategyKind::GoldPanning, StrategyKind::PSC],
            iterations: 2,
            runs: 3,
            master_seed: 1,
            stopping: Stopping::default(),
            parallelism: 1,
        };
        let result = run_experiment(&exp).unwrap();
        let csv = render_csv(&result);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 1 + 2 * 2);
        assert!(lines[1].starts_with("GoldPanning,1,"));
        assert!(lines[4].starts_with("PSC,2,"));

        let sweep = render_sweep_csv("sigma", &[(0.0051, result)]);
        assert!(sweep.starts_with("sigma,strategy,iteration,"));
        assert!(sweep.lines().nth(1).unwrap().starts_with("0.0051,GoldPanning,1,"));
    }
}
