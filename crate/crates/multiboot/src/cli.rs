//! Command-line surface.
//!
//! Exit codes: 0 on success, 2 for input-format and alignment errors, 3 for
//! statistical errors (degenerate metrics, insufficient runs, oversized
//! oracle instances).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::agreement::{agreement_matrix, TaskKind};
use crate::engine::{
    multibootstrap, paired_bootstrap, point_estimate, unpaired_bootstrap, RngStream,
};
use crate::inference::{summarize, ComparisonReport, PerArm};
use crate::io::{
    histogram_csv, read_labels, read_predictions, read_scenario, report_csv_summary, report_json,
    InputError, ScenarioMode,
};
use crate::model::{
    align_paired, build_prediction_set, Axis, Design, DesignSpec, MetricKind, MetricSpec,
    PredictionSet,
};
use crate::simulate::{coverage_study, exhaustive_oracle, generate};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_STATISTICAL: i32 = 3;

#[derive(Parser)]
#[command(
    name = "multiboot",
    about = "Bootstrap inference over pretraining seeds and test examples",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a single model's performance with a bootstrap CI.
    Estimate(EstimateArgs),
    /// Compare two training procedures (paired, unpaired, or fixed baseline).
    Compare(CompareArgs),
    /// Per-example agreement between runs, split by shared pretraining seed.
    Agreement(AgreementArgs),
    /// Run the synthetic calibration harness from a scenario file.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Accuracy,
    Pearson,
    #[value(name = "mean-of-scores")]
    MeanOfScores,
}

impl MetricArg {
    fn spec(self) -> MetricSpec {
        MetricSpec::new(match self {
            MetricArg::Accuracy => MetricKind::Accuracy,
            MetricArg::Pearson => MetricKind::Pearson,
            MetricArg::MeanOfScores => MetricKind::MeanOfScores,
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Both,
    Seeds,
    Examples,
}

impl AxisArg {
    fn axis(self) -> Axis {
        match self {
            AxisArg::Both => Axis::Both,
            AxisArg::Seeds => Axis::SeedsOnly,
            AxisArg::Examples => Axis::ExamplesOnly,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignArg {
    Paired,
    Unpaired,
    Baseline,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    #[value(name = "csv-summary")]
    CsvSummary,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Classification,
    Regression,
}

#[derive(Args)]
struct SamplingArgs {
    /// Resampling axis.
    #[arg(long, value_enum, default_value = "both")]
    axis: AxisArg,
    /// Resample group blocks instead of individual examples.
    #[arg(long)]
    groups: bool,
    /// Number of bootstrap samples.
    #[arg(long, default_value_t = 1000)]
    nboot: usize,
    /// Confidence level for the percentile interval.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Master RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct OutputArgs {
    /// Report file path.
    #[arg(long)]
    out: PathBuf,
    /// Report format.
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Also write the sample histogram as CSV to this path.
    #[arg(long)]
    histogram: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, value_enum)]
    metric: MetricArg,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, value_enum)]
    design: DesignArg,
    /// Base-arm predictions (the multi-seed arm for --design baseline).
    #[arg(long)]
    predictions: PathBuf,
    /// Intervention-arm predictions (paired/unpaired only).
    #[arg(long = "predictions-b")]
    predictions_b: Option<PathBuf>,
    /// Fixed baseline performance value (baseline design only).
    #[arg(long = "baseline-value")]
    baseline_value: Option<f64>,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, value_enum)]
    metric: MetricArg,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct AgreementArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, value_enum, default_value = "classification")]
    task: TaskArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Scenario file (flat key = value format).
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario's replication count.
    #[arg(long)]
    replications: Option<usize>,
    #[command(flatten)]
    sampling: SamplingArgs,
    /// Which design the coverage study exercises.
    #[arg(long, value_enum, default_value = "single")]
    design: ValidateDesignArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ValidateDesignArg {
    Single,
    Paired,
    Unpaired,
}

enum CliError {
    Input(String),
    Statistical(String),
}

impl From<InputError> for CliError {
    fn from(e: InputError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            // Alignment and construction problems are data bugs.
            Error::MissingCell { .. }
            | Error::DuplicateCell { .. }
            | Error::DuplicateExample(_)
            | Error::UnknownExample(_)
            | Error::NonFiniteValue { .. }
            | Error::NonFiniteLabel(_)
            | Error::InconsistentGroups(_)
            | Error::ExampleMismatch(_)
            | Error::LabelMismatch(_)
            | Error::SeedMismatch(_) => CliError::Input(e.to_string()),
            other => CliError::Statistical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Estimate(args) => cmd_estimate(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Agreement(args) => cmd_agreement(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            EXIT_INPUT
        }
        Err(CliError::Statistical(msg)) => {
            eprintln!("error: {msg}");
            EXIT_STATISTICAL
        }
    }
}

fn load_set(predictions: &Path, labels: &Path) -> std::result::Result<PredictionSet, CliError> {
    let rows = read_predictions(predictions)?;
    let label_rows = read_labels(labels)?;
    Ok(build_prediction_set(&rows, &label_rows)?)
}

fn design_spec(design: Design, sampling: &SamplingArgs) -> DesignSpec {
    DesignSpec {
        design,
        axis: sampling.axis.axis(),
        nboot: sampling.nboot,
        ci_level: sampling.level,
        master_seed: sampling.seed,
        baseline_value: None,
        use_groups: sampling.groups,
    }
}

fn write_report(
    report: &ComparisonReport,
    output: &OutputArgs,
) -> std::result::Result<(), CliError> {
    let text = match output.format {
        FormatArg::Json => report_json(report),
        FormatArg::CsvSummary => report_csv_summary(report),
    };
    std::fs::write(&output.out, text)?;
    if let Some(path) = &output.histogram {
        std::fs::write(path, histogram_csv(&report.sample_histogram))?;
    }
    Ok(())
}

fn cmd_estimate(args: EstimateArgs) -> std::result::Result<(), CliError> {
    let preds = load_set(&args.predictions, &args.labels)?;
    let metric = args.metric.spec();
    let design = design_spec(Design::Single, &args.sampling);
    let samples = multibootstrap(&preds, metric, &design)?;
    let point = point_estimate(&preds, metric)?;
    let report = summarize(point, &samples, &design, None)?;
    write_report(&report, &args.output)?;
    println!(
        "theta = {:.6}  {:.0}% CI [{:.6}, {:.6}]  (nboot = {})",
        report.point_estimate,
        design.ci_level * 100.0,
        report.ci_lower,
        report.ci_upper,
        report.nboot
    );
    Ok(())
}

fn render_comparison(report: &ComparisonReport) {
    println!("{:<22}{:>12}", "", "value");
    if let Some(t) = report.theta_base {
        println!("{:<22}{:>12.6}", "theta_base", t);
    }
    if let Some(t) = report.theta_intervention {
        println!("{:<22}{:>12.6}", "theta_intervention", t);
    }
    if let Some(d) = report.delta {
        println!("{:<22}{:>12.6}", "delta", d);
    }
    println!(
        "{:<22}{:>12}",
        "ci",
        format!("[{:.6}, {:.6}]", report.ci_lower, report.ci_upper)
    );
    if let Some(p) = report.p_value {
        println!("{:<22}{:>12.6}", "p_value", p);
    }
}

fn cmd_compare(args: CompareArgs) -> std::result::Result<(), CliError> {
    let metric = args.metric.spec();
    let report = match args.design {
        DesignArg::Paired | DesignArg::Unpaired => {
            let predictions_b = args.predictions_b.as_ref().ok_or_else(|| {
                CliError::Input("--predictions-b is required for paired/unpaired designs".into())
            })?;
            let base = load_set(&args.predictions, &args.labels)?;
            let intervention = load_set(predictions_b, &args.labels)?;
            let (design, samples) = match args.design {
                DesignArg::Paired => {
                    let design = design_spec(Design::Paired, &args.sampling);
                    let pair = align_paired(&base, &intervention)?;
                    (design.clone(), paired_bootstrap(&pair, metric, &design)?)
                }
                _ => {
                    let design = design_spec(Design::Unpaired, &args.sampling);
                    (
                        design.clone(),
                        unpaired_bootstrap(&base, &intervention, metric, &design)?,
                    )
                }
            };
            let theta_base = point_estimate(&base, metric)?;
            let theta_intervention = point_estimate(&intervention, metric)?;
            summarize(
                theta_intervention - theta_base,
                &samples.delta,
                &design,
                Some(PerArm {
                    theta_base,
                    theta_intervention,
                }),
            )?
        }
        DesignArg::Baseline => {
            let baseline = args.baseline_value.ok_or_else(|| {
                CliError::Input("--baseline-value is required for the baseline design".into())
            })?;
            if args.predictions_b.is_some() {
                return Err(CliError::Input(
                    "--predictions-b is not accepted with the baseline design".into(),
                ));
            }
            let preds = load_set(&args.predictions, &args.labels)?;
            let mut design = design_spec(Design::FixedBaseline, &args.sampling);
            design.baseline_value = Some(baseline);
            let theta_samples = multibootstrap(&preds, metric, &design)?;
            let delta_samples: Vec<f64> = theta_samples.iter().map(|t| t - baseline).collect();
            let theta = point_estimate(&preds, metric)?;
            summarize(
                theta - baseline,
                &delta_samples,
                &design,
                Some(PerArm {
                    theta_base: baseline,
                    theta_intervention: theta,
                }),
            )?
        }
    };
    write_report(&report, &args.output)?;
    render_comparison(&report);
    Ok(())
}

fn cmd_agreement(args: AgreementArgs) -> std::result::Result<(), CliError> {
    let preds = load_set(&args.predictions, &args.labels)?;
    let task = match args.task {
        TaskArg::Classification => TaskKind::Classification,
        TaskArg::Regression => TaskKind::Regression,
    };
    let report = agreement_matrix(&preds, task)?;
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    std::fs::write(&args.out, json)?;
    println!("{:<12}{:>10}{:>10}", "", "mean", "pairs");
    println!(
        "{:<12}{:>10.6}{:>10}",
        "same", report.same_seed_mean, report.n_same_pairs
    );
    println!(
        "{:<12}{:>10.6}{:>10}",
        "diff", report.diff_seed_mean, report.n_diff_pairs
    );
    println!("{:<12}{:>10.6}", "gap", report.gap);
    Ok(())
}

#[derive(Serialize)]
struct OracleCheck {
    exact_mean: f64,
    exact_variance: f64,
    mc_mean: f64,
    mc_variance: f64,
    nboot: usize,
}

fn cmd_validate(args: ValidateArgs) -> std::result::Result<(), CliError> {
    let file = read_scenario(&args.scenario)?;
    let n_replications = args.replications.unwrap_or(file.n_replications);
    let design_kind = match args.design {
        ValidateDesignArg::Single => Design::Single,
        ValidateDesignArg::Paired => Design::Paired,
        ValidateDesignArg::Unpaired => Design::Unpaired,
    };
    let design = design_spec(design_kind, &args.sampling);
    match file.mode {
        ScenarioMode::Coverage => {
            let result = coverage_study(&file.scenario, &design, n_replications, design.master_seed)?;
            let mut json = serde_json::to_string_pretty(&result).expect("result serializes");
            json.push('\n');
            std::fs::write(&args.out, json)?;
            println!(
                "coverage = {:.4} (nominal {:.2}, mc stderr {:.4}), variance_ratio = {:.4}",
                result.empirical_coverage,
                result.nominal_level,
                result.mc_stderr,
                result.variance_ratio
            );
        }
        ScenarioMode::Oracle => {
            let metric = MetricSpec::new(MetricKind::MeanOfScores);
            let preds = generate(&file.scenario, RngStream::new(design.master_seed, 0));
            let (exact_mean, exact_variance) = exhaustive_oracle(&preds, metric)?;
            let samples = multibootstrap(&preds, metric, &design)?;
            let n = samples.len() as f64;
            let mc_mean = samples.iter().sum::<f64>() / n;
            let mc_variance =
                samples.iter().map(|s| (s - mc_mean).powi(2)).sum::<f64>() / (n - 1.0);
            let check = OracleCheck {
                exact_mean,
                exact_variance,
                mc_mean,
                mc_variance,
                nboot: samples.len(),
            };
            let mut json = serde_json::to_string_pretty(&check).expect("check serializes");
            json.push('\n');
            std::fs::write(&args.out, json)?;
            println!(
                "oracle mean {exact_mean:.6} vs mc {mc_mean:.6}; oracle var {exact_variance:.6e} vs mc {mc_variance:.6e}"
            );
        }
    }
    Ok(())
}
