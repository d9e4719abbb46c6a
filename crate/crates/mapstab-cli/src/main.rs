//! `mapstab` — temporal-stability evaluation for vectorized map predictions.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use mapstab::config::EvalConfig;
use mapstab::config::LocMap;
use mapstab::eval::{evaluate, EvalError};
use mapstab::io::{
    emit_plot_data, load_sequences, load_split, render_human, sha256_hex_file, write_sequences,
    PlotKind, ReportFile, SequenceParts,
};
use mapstab::matching::ClassLabel;
use mapstab::seq::Sequence;
use mapstab::synth::{generate_gt, perturb, presets, PerturbationSpec};

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_EMPTY: u8 = 3;

const EXIT_HELP: &str = "Exit codes:
  0  success
  1  usage error (bad flags or flag values)
  2  input error (unreadable, malformed, or inconsistent files; unwritable output)
  3  no evaluable frame pairs (every scene shorter than m + 1 frames)";

/// A command either succeeds or carries the exit code its error deserves.
type CmdResult = Result<(), (u8, anyhow::Error)>;

#[derive(Parser)]
#[command(name = "mapstab", version, about, after_help = EXIT_HELP)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Score temporal stability (and single-frame AP) for a sequence corpus
    Eval(EvalArgs),
    /// Generate a synthetic corpus with controlled degradations
    Gen(GenArgs),
    /// Evaluate one corpus at several temporal windows m
    Sweep(SweepArgs),
    /// Flatten report JSON into CSV tables for plotting
    PlotData(PlotArgs),
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// `key = value` config file, applied before the flags below
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Temporal window: each anchor frame pairs with one of the next m frames
    #[arg(long)]
    m: Option<u32>,
    /// Points per element for resampling and Chamfer densification
    #[arg(long)]
    n_samples: Option<usize>,
    /// Confidence threshold for the presence score
    #[arg(long)]
    tau: Option<f64>,
    /// Lateral deviation (meters) mapping to a localization score of zero
    #[arg(long)]
    beta: Option<f64>,
    /// Weight of localization vs shape in the combined score
    #[arg(long)]
    omega: Option<f64>,
    /// Chamfer-cost gate (meters) for cross-frame matching
    #[arg(long)]
    match_gate: Option<f64>,
    /// Seed for deterministic pair sampling
    #[arg(long)]
    seed: Option<u64>,
    /// Deviation-to-score curve: linear or exp
    #[arg(long, value_name = "CURVE")]
    loc_map: Option<LocMap>,
}

impl ConfigArgs {
    /// Defaults, then the config file, then individual flags. A bad file is
    /// an input error; a bad flag value is a usage error.
    fn resolve(&self) -> Result<(EvalConfig, Option<String>), (u8, anyhow::Error)> {
        let mut config = EvalConfig::default();
        let mut digest = None;
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| {
                (
                    EXIT_INPUT,
                    anyhow!("cannot read config {}: {e}", path.display()),
                )
            })?;
            let file_err = |e| (EXIT_INPUT, anyhow!("config {}: {e}", path.display()));
            config.apply_file(&text).map_err(file_err)?;
            config.validate().map_err(file_err)?;
            digest = Some(sha_digest(path)?);
        }
        if let Some(v) = self.m {
            config.m = v;
        }
        if let Some(v) = self.n_samples {
            config.n_samples = v;
        }
        if let Some(v) = self.tau {
            config.tau = v;
        }
        if let Some(v) = self.beta {
            config.beta = v;
        }
        if let Some(v) = self.omega {
            config.omega = v;
        }
        if let Some(v) = self.match_gate {
            config.match_gate = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.loc_map {
            config.loc_map = v;
        }
        config.validate().map_err(|e| (EXIT_USAGE, anyhow!(e)))?;
        Ok((config, digest))
    }
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum Format {
    /// Table with scores on the 0–100 scale
    Human,
    /// The report JSON itself (scores on their native 0–1 scale)
    Machine,
}

#[derive(Args)]
struct EvalArgs {
    /// Combined JSONL file (frames carry predictions and ground truth)
    #[arg(value_name = "INPUT", required_unless_present = "pred", conflicts_with = "pred")]
    input: Option<PathBuf>,
    /// Predictions-only JSONL (use with --gt)
    #[arg(long, value_name = "FILE", requires = "gt", conflicts_with = "input")]
    pred: Option<PathBuf>,
    /// Ground-truth-only JSONL (use with --pred)
    #[arg(long, value_name = "FILE", requires = "pred")]
    gt: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Also write the JSON report to this path
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// What to print on stdout
    #[arg(long, value_enum, default_value_t = Format::Human)]
    format: Format,
}

#[derive(ValueEnum, Clone, Copy)]
enum Preset {
    /// Straight corridor: collinear lane lines plus crosswalk dashes
    Straight,
    /// Constant-curvature corridor of tangential dashes
    Arc,
    /// Field of short two-point dashes in all classes
    Dashes,
    /// One long parallel line per class
    Lanes,
}

#[derive(Args)]
struct GenArgs {
    /// Scenario family
    #[arg(long, value_enum)]
    preset: Preset,
    /// Number of scenes (ids are <prefix>-<index>)
    #[arg(long, default_value_t = 1)]
    scenes: usize,
    /// Scene id prefix
    #[arg(long, default_value = "scene")]
    scene_prefix: String,
    /// Frames per scene
    #[arg(long, default_value_t = 50)]
    length: usize,
    /// Ego speed in meters per frame
    #[arg(long, default_value_t = 2.0)]
    speed: f64,
    /// Arc radius in meters (arc preset only)
    #[arg(long, default_value_t = 150.0)]
    radius: f64,
    /// Perturbation stream seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Probability a prediction's confidence flickers low
    #[arg(long, default_value_t = 0.0)]
    flicker: f64,
    /// Per-vertex lateral noise std-dev in meters, redrawn each frame
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// Hinge angle in radians at the element midpoint
    #[arg(long, default_value_t = 0.0)]
    bend: f64,
    /// Probability a prediction is omitted
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    /// Lateral random-walk step std-dev in meters per frame
    #[arg(long, default_value_t = 0.0)]
    drift: f64,
    /// Constant lateral offset in meters
    #[arg(long, default_value_t = 0.0)]
    offset_bias: f64,
    /// Confidence of unflickered predictions
    #[arg(long, default_value_t = 0.9)]
    score_base: f64,
    /// Perturb only these classes (comma-separated; default all)
    #[arg(long, value_delimiter = ',', value_name = "CLASS")]
    classes: Vec<ClassLabel>,
    /// Combined output JSONL
    #[arg(long, value_name = "FILE", required_unless_present = "pred_out", conflicts_with = "pred_out")]
    out: Option<PathBuf>,
    /// Predictions-only output (use with --gt-out)
    #[arg(long, value_name = "FILE", requires = "gt_out")]
    pred_out: Option<PathBuf>,
    /// Ground-truth-only output (use with --pred-out)
    #[arg(long, value_name = "FILE", requires = "pred_out", conflicts_with = "out")]
    gt_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Combined JSONL file (frames carry predictions and ground truth)
    #[arg(value_name = "INPUT", required_unless_present = "pred", conflicts_with = "pred")]
    input: Option<PathBuf>,
    /// Predictions-only JSONL (use with --gt)
    #[arg(long, value_name = "FILE", requires = "gt", conflicts_with = "input")]
    pred: Option<PathBuf>,
    /// Ground-truth-only JSONL (use with --pred)
    #[arg(long, value_name = "FILE", requires = "pred")]
    gt: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Temporal windows to evaluate (comma-separated; overrides --m)
    #[arg(long, value_delimiter = ',', required = true, value_name = "M")]
    m_values: Vec<u32>,
    /// Directory for the per-m reports and the summary CSV
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Table to emit: scatter_map_mas, per_class_bars, or m_sweep
    #[arg(long, value_name = "KIND")]
    kind: PlotKind,
    /// Report JSON files from `eval --out` or `sweep`
    #[arg(value_name = "REPORT", required = true)]
    reports: Vec<PathBuf>,
    /// One label per report (comma-separated; default: the file stem)
    #[arg(long, value_delimiter = ',', value_name = "LABEL")]
    labels: Vec<String>,
    /// Output CSV path (default: stdout)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version also land here; they print on stdout and
            // exit 0, while real parse errors go to stderr and exit 1.
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.cmd {
        Cmd::Eval(args) => cmd_eval(args),
        Cmd::Gen(args) => cmd_gen(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::PlotData(args) => cmd_plot_data(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}

fn input_err(e: impl Into<anyhow::Error>) -> (u8, anyhow::Error) {
    (EXIT_INPUT, e.into())
}

fn sha_digest(path: &Path) -> Result<String, (u8, anyhow::Error)> {
    sha256_hex_file(path).map_err(input_err)
}

/// Loads the corpus from whichever input mode clap let through, recording a
/// digest per input role for the report's provenance block.
fn load_corpus(
    input: &Option<PathBuf>,
    pred: &Option<PathBuf>,
    gt: &Option<PathBuf>,
) -> Result<(Vec<Sequence>, BTreeMap<String, String>), (u8, anyhow::Error)> {
    let mut inputs = BTreeMap::new();
    let sequences = match (input, pred, gt) {
        (Some(path), None, None) => {
            inputs.insert("combined".into(), sha_digest(path)?);
            load_sequences(path).map_err(input_err)?
        }
        (None, Some(pred), Some(gt)) => {
            inputs.insert("pred".into(), sha_digest(pred)?);
            inputs.insert("gt".into(), sha_digest(gt)?);
            load_split(pred, gt).map_err(input_err)?
        }
        _ => unreachable!("clap enforces INPUT xor --pred/--gt"),
    };
    Ok((sequences, inputs))
}

fn map_eval_err(e: EvalError) -> (u8, anyhow::Error) {
    let code = match e {
        EvalError::NoEvaluablePairs { .. } => EXIT_EMPTY,
        EvalError::Config(_) => EXIT_USAGE,
    };
    (code, anyhow!(e))
}

fn cmd_eval(args: &EvalArgs) -> CmdResult {
    let (config, config_digest) = args.config.resolve()?;
    let (sequences, mut inputs) = load_corpus(&args.input, &args.pred, &args.gt)?;
    if let Some(digest) = config_digest {
        inputs.insert("config".into(), digest);
    }
    let output = evaluate(&sequences, &config).map_err(map_eval_err)?;
    let report = ReportFile::new(inputs, output.stability, output.ap);
    if let Some(path) = &args.out {
        report.write_json_file(path).map_err(input_err)?;
    }
    match args.format {
        Format::Human => print!("{}", render_human(&report)),
        Format::Machine => print!("{}", report.to_json()),
    }
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> CmdResult {
    let usage = |msg: String| (EXIT_USAGE, anyhow!(msg));
    if args.scenes == 0 {
        return Err(usage("--scenes must be at least 1".into()));
    }
    if args.length == 0 {
        return Err(usage("--length must be at least 1".into()));
    }
    if !args.speed.is_finite() || args.speed <= 0.0 {
        return Err(usage(format!("--speed must be positive, got {}", args.speed)));
    }
    if matches!(args.preset, Preset::Arc) && !(args.radius.is_finite() && args.radius > 20.0) {
        return Err(usage(format!(
            "--radius must exceed 20 m for the arc preset, got {}",
            args.radius
        )));
    }
    let pert = PerturbationSpec {
        flicker_prob: args.flicker,
        jitter_sigma: args.jitter,
        shape_noise: args.bend,
        dropout_prob: args.dropout,
        score_base: args.score_base,
        drift_sigma: args.drift,
        offset_bias: args.offset_bias,
        classes: if args.classes.is_empty() {
            None
        } else {
            Some(args.classes.iter().cloned().collect())
        },
    };
    pert.validate().map_err(usage)?;

    let mut sequences = Vec::with_capacity(args.scenes);
    for i in 0..args.scenes {
        let scene_id = format!("{}-{:03}", args.scene_prefix, i);
        let mut spec = match args.preset {
            Preset::Straight => presets::straight_corridor(&scene_id, args.length, args.speed),
            Preset::Arc => presets::arc_corridor(&scene_id, args.length, args.radius, args.speed),
            Preset::Dashes => presets::dash_field(&scene_id, args.length, args.speed),
            Preset::Lanes => presets::parallel_lanes(&scene_id, args.length, args.speed),
        };
        spec.seed = args.seed;
        sequences.push(perturb(&generate_gt(&spec), &pert, args.seed));
    }
    let frames: usize = sequences.iter().map(|s| s.frames.len()).sum();

    match (&args.out, &args.pred_out, &args.gt_out) {
        (Some(path), None, None) => {
            write_sequences(path, &sequences, SequenceParts::Combined).map_err(input_err)?;
            eprintln!(
                "wrote {} scene(s), {frames} frame(s) to {}",
                sequences.len(),
                path.display()
            );
        }
        (None, Some(pred), Some(gt)) => {
            write_sequences(pred, &sequences, SequenceParts::PredictionsOnly)
                .map_err(input_err)?;
            write_sequences(gt, &sequences, SequenceParts::GroundTruthOnly).map_err(input_err)?;
            eprintln!(
                "wrote {} scene(s), {frames} frame(s) to {} + {}",
                sequences.len(),
                pred.display(),
                gt.display()
            );
        }
        _ => unreachable!("clap enforces --out xor --pred-out/--gt-out"),
    }
    Ok(())
}

fn fmt_opt_score(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:.2}", v * 100.0),
        None => "-".into(),
    }
}

fn cmd_sweep(args: &SweepArgs) -> CmdResult {
    let mut ms = args.m_values.clone();
    ms.sort_unstable();
    ms.dedup();
    let (base, config_digest) = args.config.resolve()?;
    let (sequences, mut inputs) = load_corpus(&args.input, &args.pred, &args.gt)?;
    if let Some(digest) = config_digest {
        inputs.insert("config".into(), digest);
    }
    fs::create_dir_all(&args.out_dir).map_err(|e| {
        (
            EXIT_INPUT,
            anyhow!("cannot create {}: {e}", args.out_dir.display()),
        )
    })?;

    let mut reports = Vec::with_capacity(ms.len());
    for &m in &ms {
        let config = EvalConfig { m, ..base.clone() };
        config
            .validate()
            .map_err(|e| (EXIT_USAGE, anyhow!("--m-values {m}: {e}")))?;
        let output = evaluate(&sequences, &config).map_err(map_eval_err)?;
        let report = ReportFile::new(inputs.clone(), output.stability, output.ap);
        let path = args.out_dir.join(format!("report-m{m}.json"));
        report.write_json_file(&path).map_err(input_err)?;
        println!(
            "m={m}  mAS={}  mAP={}",
            fmt_opt_score(report.stability.mas),
            fmt_opt_score(report.ap.map)
        );
        reports.push((format!("m={m}"), report));
    }

    let csv_path = args.out_dir.join("m_sweep.csv");
    let file = fs::File::create(&csv_path)
        .map_err(|e| (EXIT_INPUT, anyhow!("cannot create {}: {e}", csv_path.display())))?;
    emit_plot_data(PlotKind::MSweep, &reports, file).map_err(input_err)?;
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn cmd_plot_data(args: &PlotArgs) -> CmdResult {
    if !args.labels.is_empty() && args.labels.len() != args.reports.len() {
        return Err((
            EXIT_USAGE,
            anyhow!(
                "{} label(s) given for {} report(s)",
                args.labels.len(),
                args.reports.len()
            ),
        ));
    }
    let mut rows = Vec::with_capacity(args.reports.len());
    for (i, path) in args.reports.iter().enumerate() {
        let label = match args.labels.get(i) {
            Some(label) => label.clone(),
            None => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
        };
        let report = ReportFile::from_json_file(path).map_err(input_err)?;
        rows.push((label, report));
    }
    // Kind/report-set mismatches (wrong count, missing sections) are usage
    // errors: the files are fine, the request is not.
    let plot_err = |e| (EXIT_USAGE, anyhow::Error::from(e));
    match &args.out {
        Some(path) => {
            let file = fs::File::create(path)
                .map_err(|e| (EXIT_INPUT, anyhow!("cannot create {}: {e}", path.display())))?;
            emit_plot_data(args.kind, &rows, file).map_err(plot_err)?;
        }
        None => {
            emit_plot_data(args.kind, &rows, std::io::stdout().lock()).map_err(plot_err)?;
        }
    }
    Ok(())
}
