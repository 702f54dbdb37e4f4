//! Command-line front end, shared by the `unisort` binary and the tests.
//!
//! Exit codes: `0` success, `1` usage error, `2` runtime or validation
//! failure. Every subcommand is a pure function of its arguments, the config
//! file and the seed, so repeated runs produce identical bytes.
//!
//! Seeds resolve in the order `--seed`, `seed` in the config file, the
//! `UNISORT_SEED` environment variable, then `0`.

mod config;

pub use config::{parse_list, RunConfig, KEYS};

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::pl::{PLParams, MAX_ENUMERATION_N};
use crate::relaxation::{
    classify_matrix, relaxed_sort, sort_permutation, MatrixClass, ScoreVector, Temperature,
};
use crate::rng::derive_seed;
use crate::tasks::{
    generate_rings, raw_knn_accuracy, train_knn, train_median, train_sort, variance_sweep,
    EpochRecord, KnnConfig, MedianConfig, MetricsRecord, Mode, RingsSpec, SequenceSplits,
    SortConfig, SweepConfig, SweepReport,
};
use crate::validate::{empirical_frequencies, exact_pmf, run_suite, total_variation, SuiteConfig};

/// Environment variable consulted when no seed is given.
pub const SEED_ENV: &str = "UNISORT_SEED";

/// Largest `n` accepted by `pl-check`.
pub const PL_CHECK_MAX_N: usize = 6;

#[derive(Debug, Parser)]
#[command(
    name = "unisort",
    version,
    about = "Relaxed sorting, Plackett-Luce sampling and their training tasks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact sort, relaxed sort, hard projection and matrix class of a score vector.
    #[command(allow_negative_numbers = true)]
    SortDemo {
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
        #[arg(required = true, value_name = "SCORE")]
        scores: Vec<f64>,
    },
    /// Compare the hard Plackett-Luce sampler with the exact pmf.
    #[command(allow_negative_numbers = true)]
    PlCheck {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(required = true, value_name = "SCORE")]
        scores: Vec<f64>,
    },
    /// Train one of the synthetic tasks; writes the epoch curve to --out and
    /// prints final metrics as JSON.
    Train {
        #[arg(value_enum)]
        task: Option<Task>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Log-variance of stochastic sort gradients against temperature.
    VarianceSweep {
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run the oracle suite and print one line per property.
    Validate {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Sort,
    Median,
    Knn,
}

#[derive(Debug, Args)]
#[command(next_help_heading = "Run options")]
struct RunFlags {
    /// key = value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    tau: Option<f64>,
    /// det, stoch or st.
    #[arg(long)]
    mode: Option<String>,
    /// Items per sequence, or kNN candidates per query.
    #[arg(long)]
    n: Option<usize>,
    /// Feature dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Neighbours in the kNN loss and vote.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    lr: Option<f64>,
    /// Monte Carlo samples per step (training) or per temperature (sweep).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    noise: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    valid_size: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    /// Comma-separated temperatures for the sweep.
    #[arg(long, allow_negative_numbers = true)]
    taus: Option<String>,
}

/// A failure, classified by exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = stdout.write_all(text.as_bytes());
                0
            } else {
                let _ = stderr.write_all(text.as_bytes());
                1
            };
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
        Err(Failure::Runtime(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Outcome {
    match cmd {
        Command::SortDemo { tau, json, scores } => sort_demo(&scores, tau, json, out),
        Command::PlCheck {
            samples,
            seed,
            beta,
            out: path,
            scores,
        } => {
            let seed = resolve_seed(seed, None)?;
            pl_check(&scores, beta, samples, seed, path.as_deref(), out)
        }
        Command::Train { task, flags } => {
            let cfg = flags.into_config()?;
            let task = match (task, cfg.task.as_deref()) {
                (Some(t), _) => t,
                (None, Some(name)) => Task::from_str(name, true).map_err(|_| {
                    Failure::Usage(format!(
                        "unknown task {name:?}; expected sort, median or knn"
                    ))
                })?,
                (None, None) => {
                    return Err(Failure::Usage(
                        "missing required argument <TASK> (sort, median or knn)".into(),
                    ))
                }
            };
            train(task, &cfg, out)
        }
        Command::VarianceSweep { flags } => sweep(&flags.into_config()?, out),
        Command::Validate { seed, json } => validate(resolve_seed(seed, None)?, json, out),
    }
}

impl RunFlags {
    /// Flags merged over the config file, range-checked.
    fn into_config(self) -> Result<RunConfig, Failure> {
        let file = match &self.config {
            Some(p) => RunConfig::from_file(p).map_err(Failure::Usage)?,
            None => RunConfig::default(),
        };
        let mode = self
            .mode
            .as_deref()
            .map(str::parse::<Mode>)
            .transpose()
            .map_err(|e| Failure::Usage(e.to_string()))?;
        let taus = self
            .taus
            .as_deref()
            .map(|t| parse_list("--taus", t))
            .transpose()
            .map_err(Failure::Usage)?;
        let flags = RunConfig {
            task: None,
            n: self.n,
            d: self.d,
            tau: self.tau,
            mode,
            k: self.k,
            epochs: self.epochs,
            lr: self.lr,
            samples: self.samples,
            seed: self.seed,
            out: self.out,
            noise: self.noise,
            hidden: self.hidden,
            batch_size: self.batch_size,
            momentum: self.momentum,
            train_size: self.train_size,
            valid_size: self.valid_size,
            test_size: self.test_size,
            taus,
        };
        let mut cfg = file.overridden_by(flags);
        cfg.check().map_err(Failure::Usage)?;
        cfg.seed = Some(resolve_seed(cfg.seed, None)?);
        Ok(cfg)
    }
}

/// `explicit`, else `UNISORT_SEED`, else `0`. `env` overrides the process
/// environment (for tests).
fn resolve_seed(explicit: Option<u64>, env: Option<&str>) -> Result<u64, Failure> {
    if let Some(s) = explicit {
        return Ok(s);
    }
    let from_env = match env {
        Some(v) => Some(v.to_string()),
        None => std::env::var(SEED_ENV).ok(),
    };
    match from_env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        None => Ok(0),
    }
}

/// Reals printed with 17 significant digits.
fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Outcome {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", p.display()))),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

#[derive(Serialize)]
struct SortDemoReport {
    scores: Vec<f64>,
    tau: f64,
    permutation: Vec<usize>,
    relaxed: Vec<Vec<f64>>,
    projection: Vec<usize>,
    classification: MatrixClass,
}

fn sort_demo(scores: &[f64], tau: f64, json: bool, out: &mut dyn Write) -> Outcome {
    let t = Temperature::new(tau).map_err(|e| Failure::Usage(e.to_string()))?;
    let s = ScoreVector::new(scores.to_vec()).map_err(|e| Failure::Usage(e.to_string()))?;
    let relaxed = relaxed_sort(&s, t);
    let report = SortDemoReport {
        scores: scores.to_vec(),
        tau,
        permutation: sort_permutation(&s).as_slice().to_vec(),
        relaxed: relaxed
            .entries()
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect(),
        projection: relaxed.project_hard().as_slice().to_vec(),
        classification: classify_matrix(relaxed.entries().view())?,
    };
    if json {
        writeln!(out, "{}", to_json(&report)?)?;
        return Ok(());
    }
    let mut text = String::new();
    let _ = writeln!(text, "scores:      {:?}", report.scores);
    let _ = writeln!(text, "tau:         {tau}");
    let _ = writeln!(text, "permutation: {:?}", report.permutation);
    let _ = writeln!(text, "relaxed:");
    for row in &report.relaxed {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.6}")).collect();
        let _ = writeln!(text, "  {}", cells.join("  "));
    }
    let _ = writeln!(text, "projection:  {:?}", report.projection);
    let c = &report.classification;
    let _ = writeln!(
        text,
        "class:       row_stochastic={} doubly_stochastic={} unimodal={} permutation={}",
        c.row_stochastic, c.doubly_stochastic, c.unimodal, c.permutation
    );
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn pl_check(
    scores: &[f64],
    beta: f64,
    samples: usize,
    seed: u64,
    path: Option<&Path>,
    out: &mut dyn Write,
) -> Outcome {
    if samples == 0 {
        return Err(Failure::Usage("--samples must be ≥ 1".into()));
    }
    let params =
        PLParams::with_beta(scores.to_vec(), beta).map_err(|e| Failure::Usage(e.to_string()))?;
    if params.n() > PL_CHECK_MAX_N {
        return Err(crate::Error::Capacity {
            n: params.n(),
            limit: PL_CHECK_MAX_N.min(MAX_ENUMERATION_N),
        }
        .into());
    }
    let exact = exact_pmf(&params)?;
    let freq = empirical_frequencies(&params, samples, seed);
    let m = samples as f64;
    let chi2: f64 = exact
        .iter()
        .zip(&freq)
        .map(|((_, p), f)| (m * f - m * p).powi(2) / (m * p))
        .sum();
    let df = exact.len() - 1;
    let mut text = String::from("permutation,exact_pmf,empirical_frequency\n");
    for ((z, p), f) in exact.iter().zip(&freq) {
        let label: Vec<String> = z.as_slice().iter().map(usize::to_string).collect();
        let _ = writeln!(text, "{},{},{}", label.join(" "), real(*p), real(*f));
    }
    let probs: Vec<f64> = exact.iter().map(|(_, p)| *p).collect();
    let _ = writeln!(text, "# samples={samples} seed={seed}");
    let _ = writeln!(
        text,
        "# total_variation={}",
        real(total_variation(&probs, &freq))
    );
    let _ = writeln!(text, "# chi_squared={} degrees_of_freedom={df}", real(chi2));
    if df > 0 {
        let p_value = 1.0 - ChiSquared::new(df as f64).expect("df > 0").cdf(chi2);
        let _ = writeln!(text, "# p_value={}", real(p_value));
    }
    emit(&text, path, out)
}

fn curve_csv(curve: &[EpochRecord]) -> String {
    let mut text = String::from("epoch,train_loss,valid_metric\n");
    for r in curve {
        let _ = writeln!(
            text,
            "{},{},{}",
            r.epoch,
            real(r.train_loss),
            real(r.valid_metric)
        );
    }
    text
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    task: Task,
    mode: &'a str,
    seed: u64,
    metrics: MetricsRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    raw_knn_accuracy: Option<f64>,
}

const DATA_TAG: u64 = 11;

fn train(task: Task, cfg: &RunConfig, out: &mut dyn Write) -> Outcome {
    let path = cfg
        .out
        .clone()
        .ok_or_else(|| Failure::Usage("missing required flag --out <PATH> for train".into()))?;
    let seed = cfg.seed.unwrap_or(0);
    let data_seed = derive_seed(seed, DATA_TAG);
    let sizes = |tr, va, te| {
        (
            cfg.train_size.unwrap_or(tr),
            cfg.valid_size.unwrap_or(va),
            cfg.test_size.unwrap_or(te),
        )
    };
    let (mode, curve, metrics, raw) = match task {
        Task::Sort => {
            let d = SortConfig::default();
            let c = SortConfig {
                hidden: cfg.hidden.unwrap_or(d.hidden),
                mode: cfg.mode.unwrap_or(d.mode),
                tau: cfg.tau.unwrap_or(d.tau),
                epochs: cfg.epochs.unwrap_or(d.epochs),
                lr: cfg.lr.unwrap_or(d.lr),
                momentum: cfg.momentum.unwrap_or(d.momentum),
                batch_size: cfg.batch_size.unwrap_or(d.batch_size),
                n_samples: cfg.samples.unwrap_or(d.n_samples),
                seed,
            };
            let data = SequenceSplits::generate(
                cfg.n.unwrap_or(5),
                cfg.d.unwrap_or(4),
                cfg.noise.unwrap_or(0.05),
                sizes(2000, 200, 1000),
                data_seed,
            )
            .map_err(|e| Failure::Usage(e.to_string()))?;
            let o = train_sort(&data, &c)?;
            (c.mode, o.curve, o.metrics, None)
        }
        Task::Median => {
            let d = MedianConfig::default();
            let c = MedianConfig {
                hidden: cfg.hidden.unwrap_or(d.hidden),
                mode: cfg.mode.unwrap_or(d.mode),
                tau: cfg.tau.unwrap_or(d.tau),
                epochs: cfg.epochs.unwrap_or(d.epochs),
                lr: cfg.lr.unwrap_or(d.lr),
                momentum: cfg.momentum.unwrap_or(d.momentum),
                batch_size: cfg.batch_size.unwrap_or(d.batch_size),
                n_samples: cfg.samples.unwrap_or(d.n_samples),
                seed,
            };
            let n = cfg.n.unwrap_or(5);
            if n.is_multiple_of(2) {
                return Err(Failure::Usage(format!(
                    "median task needs odd --n, got {n}"
                )));
            }
            let data = SequenceSplits::generate(
                n,
                cfg.d.unwrap_or(4),
                cfg.noise.unwrap_or(0.0),
                sizes(2000, 200, 1000),
                data_seed,
            )
            .map_err(|e| Failure::Usage(e.to_string()))?;
            let o = train_median(&data, &c)?;
            (c.mode, o.curve, o.metrics, None)
        }
        Task::Knn => {
            let d = KnnConfig::default();
            let c = KnnConfig {
                n_candidates: cfg.n.unwrap_or(d.n_candidates),
                k: cfg.k.unwrap_or(d.k),
                hidden: cfg.hidden.unwrap_or(d.hidden),
                embed_dim: d.embed_dim,
                mode: cfg.mode.unwrap_or(d.mode),
                tau: cfg.tau.unwrap_or(d.tau),
                epochs: cfg.epochs.unwrap_or(d.epochs),
                lr: cfg.lr.unwrap_or(d.lr),
                momentum: cfg.momentum.unwrap_or(d.momentum),
                batch_size: cfg.batch_size.unwrap_or(d.batch_size),
                n_samples: cfg.samples.unwrap_or(d.n_samples),
                seed,
            };
            let spec_default = RingsSpec::default();
            let dim = cfg.d.unwrap_or(2 + spec_default.nuisance_dims);
            if dim < 2 {
                return Err(Failure::Usage(format!("knn task needs --d ≥ 2, got {dim}")));
            }
            let spec = RingsSpec {
                nuisance_dims: dim - 2,
                radial_noise: cfg.noise.unwrap_or(0.1),
                ..spec_default
            };
            let (tr, va, te) = sizes(1000, 200, 1000);
            let train_set = generate_rings(tr, spec, derive_seed(data_seed, 0));
            let valid_set = generate_rings(va, spec, derive_seed(data_seed, 1));
            let test_set = generate_rings(te, spec, derive_seed(data_seed, 2));
            let o = train_knn(&train_set, &valid_set, &test_set, &c).map_err(|e| match e {
                crate::Error::InvalidArgument(m) => Failure::Usage(m),
                other => other.into(),
            })?;
            let raw = raw_knn_accuracy(&train_set, &test_set, c.k)?;
            (c.mode, o.curve, o.metrics, Some(raw))
        }
    };
    emit(&curve_csv(&curve), Some(&path), out)?;
    let summary = TrainSummary {
        task,
        mode: mode.as_str(),
        seed,
        metrics,
        raw_knn_accuracy: raw,
    };
    writeln!(out, "{}", to_json(&summary)?)?;
    Ok(())
}

/// The sweep as CSV with a trailing summary comment.
pub fn sweep_csv(report: &SweepReport) -> String {
    let mut text = String::from("tau,log_variance\n");
    for r in &report.rows {
        let _ = writeln!(text, "{},{}", real(r.tau), real(r.log_variance));
    }
    let _ = writeln!(
        text,
        "# monotone_non_increasing={} inversions={}",
        report.monotone_non_increasing, report.inversions
    );
    text
}

fn sweep(cfg: &RunConfig, out: &mut dyn Write) -> Outcome {
    if let Some(m) = cfg.mode {
        if m != Mode::Stochastic {
            return Err(Failure::Usage(format!(
                "variance-sweep runs in stochastic mode only, got --mode {m}"
            )));
        }
    }
    let d = SweepConfig::default();
    let c = SweepConfig {
        n: cfg.n.unwrap_or(d.n),
        d: cfg.d.unwrap_or(d.d),
        noise: cfg.noise.unwrap_or(d.noise),
        batch_size: cfg.batch_size.unwrap_or(d.batch_size),
        hidden: cfg.hidden.unwrap_or(d.hidden),
        taus: cfg.taus.clone().unwrap_or(d.taus),
        n_samples: cfg.samples.unwrap_or(d.n_samples),
        seed: cfg.seed.unwrap_or(0),
        noise_seed: None,
    };
    let report = variance_sweep(&c).map_err(|e| match e {
        crate::Error::InvalidArgument(m) => Failure::Usage(m),
        other => other.into(),
    })?;
    emit(&sweep_csv(&report), cfg.out.as_deref(), out)
}

fn validate(seed: u64, json: bool, out: &mut dyn Write) -> Outcome {
    let report = run_suite(&SuiteConfig {
        seed,
        ..SuiteConfig::default()
    });
    if json {
        writeln!(out, "{}", to_json(&report)?)?;
    } else {
        for r in &report.results {
            let status = if r.passed { "PASS" } else { "FAIL" };
            writeln!(out, "{status} {} (cases: {}) {}", r.name, r.cases, r.detail)?;
            if let Some(c) = &r.counterexample {
                writeln!(out, "     counterexample: {c}")?;
            }
        }
    }
    if report.all_passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .results
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.name)
            .collect();
        Err(Failure::Runtime(format!(
            "properties failed: {}",
            failed.join(", ")
        )))
    }
}
