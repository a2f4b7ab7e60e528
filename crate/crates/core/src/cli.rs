//! Command-line verbs: `generate`, `run`, `eval`, `compare-policies` and
//! `trace-dump`. Exit codes: 0 success, 1 usage, 2 data error, 3 numeric error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bench::{compare_policies, comparison_csv, comparison_table, corruption_suite, PolicyReport, SuiteScene};
use crate::config::{ConfidenceSource, PipelineConfig, Policy};
use crate::error::{Error, Result};
use crate::memory::{CounterMode, MemoryMode};
use crate::metrics::{evaluate, MetricsReport, TemporalAggregation};
use crate::raster::{read_pfm_file, write_pfm_file};
use crate::refine::{run_sequence, ConfidenceModel, Losses};
use crate::synth::{generate_scene, RandomSceneParams, SceneSpec};
use crate::trace::{read_trace, to_csv, to_table, write_trace};
use crate::video::{load_manifest_sequence, write_sequence, Manifest};

#[derive(Debug, Parser)]
#[command(name = "ppmstereo", version, about = "Pick-and-play memory stereo video toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a scene spec into PFM frames and a manifest.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate disparity for every frame of a manifest.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Score predicted disparities against a manifest's ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,3")]
        thresholds: Vec<f64>,
        #[arg(long, value_enum, default_value_t = AggregationArg::PixelMean)]
        aggregation: AggregationArg,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Compare memory policies over manifests or a generated suite.
    ComparePolicies {
        #[arg(long = "manifest")]
        manifests: Vec<PathBuf>,
        /// Generate this many random corrupted-frame scenes.
        #[arg(long)]
        suite: Option<usize>,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "full,latest,random,ppm,pick-only,play-only"
        )]
        policies: Vec<String>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print a selection trace as a table, CSV or JSON.
    TraceDump {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AggregationArg {
    PixelMean,
    PerStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Offline,
    Causal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CounterArg {
    Reset,
    Persist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConfidenceArg {
    Proxy,
    Head,
}

/// Flags that override keys of the config file.
#[derive(Debug, Default, Args)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long = "T")]
    frames: Option<usize>,
    #[arg(long = "N")]
    iterations: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    counter_mode: Option<CounterArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    confidence: Option<ConfidenceArg>,
    #[arg(long)]
    head: Option<PathBuf>,
    #[arg(long)]
    no_memory: bool,
}

impl Overrides {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.k {
            c.k = v;
        }
        if let Some(v) = self.frames {
            c.frames = Some(v);
        }
        if let Some(v) = self.iterations {
            c.iterations = v;
        }
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(p) = &self.policy {
            c.policy = p.parse()?;
        }
        if let Some(m) = self.mode {
            c.memory_mode = match m {
                ModeArg::Offline => MemoryMode::Offline,
                ModeArg::Causal => MemoryMode::Causal,
            };
        }
        if let Some(m) = self.counter_mode {
            c.counter_mode = match m {
                CounterArg::Reset => CounterMode::Reset,
                CounterArg::Persist => CounterMode::Persist,
            };
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(src) = self.confidence {
            c.confidence = match src {
                ConfidenceArg::Proxy => ConfidenceSource::Proxy,
                ConfidenceArg::Head => ConfidenceSource::Head,
            };
        }
        if let Some(p) = &self.head {
            c.head_path = Some(p.clone());
        }
        if self.no_memory {
            c.memory = false;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Renders `spec` with `seed` into `out`.
pub fn cmd_generate(spec: &Path, seed: u64, out: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(spec).map_err(|e| Error::io(spec, e))?;
    let spec_value: SceneSpec =
        serde_json::from_str(&text).map_err(|e| Error::Scene(format!("{}: {e}", spec.display())))?;
    let seq = generate_scene(&spec_value, seed)?;
    write_sequence(out, &seq, &spec_value.corrupted_frames())
}

/// Written next to the disparities as `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: PipelineConfig,
    pub frames: usize,
    pub outputs: Vec<PathBuf>,
    pub trace: PathBuf,
    pub frame_confidence: Vec<f64>,
    pub losses: Option<LossSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub disparity: f64,
    pub confidence: f64,
    pub total: f64,
}

impl From<Losses> for LossSummary {
    fn from(l: Losses) -> Self {
        Self {
            disparity: l.disparity,
            confidence: l.confidence,
            total: l.total,
        }
    }
}

pub fn disparity_file(t: usize) -> String {
    format!("disp_{t:04}.pfm")
}

/// Runs the pipeline on a manifest and writes `disp_NNNN.pfm`,
/// `trace.jsonl` and `run.json` into `out`.
pub fn cmd_run(manifest: &Path, config: &PipelineConfig, out: &Path) -> Result<RunSummary> {
    let (_, seq) = load_manifest_sequence(manifest)?;
    let result = run_sequence(&seq, config)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut outputs = Vec::with_capacity(result.disparities.len());
    for (t, d) in result.disparities.iter().enumerate() {
        let name = PathBuf::from(disparity_file(t));
        write_pfm_file(out.join(&name), d)?;
        outputs.push(name);
    }
    let trace = PathBuf::from("trace.jsonl");
    write_trace(out.join(&trace), &result.traces)?;
    let summary = RunSummary {
        config: config.clone(),
        frames: outputs.len(),
        outputs,
        trace,
        frame_confidence: result.frame_confidence,
        losses: result.losses.map(LossSummary::from),
    };
    let run_path = out.join("run.json");
    fs::write(&run_path, serde_json::to_string_pretty(&summary)? + "\n").map_err(|e| Error::io(&run_path, e))?;
    Ok(summary)
}

/// Evaluates `pred/disp_NNNN.pfm` against the manifest's ground truth.
pub fn cmd_eval(
    pred: &Path,
    manifest: &Path,
    thresholds: &[f64],
    aggregation: TemporalAggregation,
) -> Result<MetricsReport> {
    let (_, seq) = load_manifest_sequence(manifest)?;
    let gt = seq
        .gt_disparity()
        .ok_or_else(|| Error::Missing(format!("{} has no ground truth", manifest.display())))?;
    let preds = (0..seq.len())
        .map(|t| read_pfm_file(pred.join(disparity_file(t))))
        .collect::<Result<Vec<_>>>()?;
    evaluate(&preds, gt, thresholds, aggregation)
}

/// Where the compared scenes come from.
pub enum SceneSource<'a> {
    Manifests(&'a [PathBuf]),
    Suite { count: usize, seed: u64 },
}

pub fn cmd_compare_policies(
    source: SceneSource<'_>,
    config: &PipelineConfig,
    policies: &[Policy],
) -> Result<Vec<PolicyReport>> {
    let scenes = match source {
        SceneSource::Manifests(paths) => paths
            .iter()
            .map(|p| {
                let (m, sequence) = load_manifest_sequence(p)?;
                Ok(SuiteScene {
                    name: p.display().to_string(),
                    sequence,
                    corrupted: m.corrupted,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        SceneSource::Suite { count, seed } => corruption_suite(count, seed, &RandomSceneParams::default())?,
    };
    if scenes.is_empty() {
        return Err(Error::Config("compare-policies needs --manifest or --suite".into()));
    }
    let model = ConfidenceModel::from_config(config)?;
    compare_policies(&scenes, config, &model, policies)
}

pub fn cmd_trace_dump(trace: &Path, format: Format) -> Result<String> {
    let records = read_trace(trace)?;
    Ok(match format {
        Format::Table => to_table(&records),
        Format::Csv => to_csv(&records),
        Format::Json => serde_json::to_string_pretty(&records)? + "\n",
    })
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let emit = |out: &mut dyn Write, text: &str| -> Result<()> {
        out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
    };
    match cli.command {
        Command::Generate { spec, seed, out: dir } => {
            let m = cmd_generate(&spec, seed, &dir)?;
            emit(out, &format!("wrote {} frames to {}\n", m.frames.len(), dir.display()))
        }
        Command::Run {
            manifest,
            out: dir,
            overrides,
        } => {
            let config = overrides.resolve()?;
            let s = cmd_run(&manifest, &config, &dir)?;
            emit(
                out,
                &format!("wrote {} disparity maps to {}\n", s.frames, dir.display()),
            )
        }
        Command::Eval {
            pred,
            manifest,
            thresholds,
            aggregation,
            format,
        } => {
            let aggregation = match aggregation {
                AggregationArg::PixelMean => TemporalAggregation::PixelMean,
                AggregationArg::PerStep => TemporalAggregation::PerStep,
            };
            let r = cmd_eval(&pred, &manifest, &thresholds, aggregation)?;
            emit(
                out,
                &if format == Format::Json {
                    r.to_json() + "\n"
                } else {
                    r.to_table()
                },
            )
        }
        Command::ComparePolicies {
            manifests,
            suite,
            policies,
            format,
            overrides,
        } => {
            let config = overrides.resolve()?;
            let policies = policies.iter().map(|p| p.parse()).collect::<Result<Vec<Policy>>>()?;
            let source = match suite {
                Some(count) => SceneSource::Suite {
                    count,
                    seed: config.seed,
                },
                None => SceneSource::Manifests(&manifests),
            };
            let reports = cmd_compare_policies(source, &config, &policies)?;
            let text = match format {
                Format::Table => comparison_table(&reports),
                Format::Csv => comparison_csv(&reports),
                Format::Json => serde_json::to_string_pretty(&reports)? + "\n",
            };
            emit(out, &text)
        }
        Command::TraceDump { trace, format } => emit(out, &cmd_trace_dump(&trace, format)?),
    }
}

/// Parses `args` (including the program name), runs the verb and returns
/// the process exit code. Results go to `out`, diagnostics to stderr.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
