use std::path::PathBuf;
use std::str::FromStr;

use apfix_core::calibration::CalibrationMethod;
use apfix_core::io::ReportFormat;
use apfix_core::metrics::SweepAxis;
use apfix_core::{EvalConfig, FrequencyGroup, Interpolation, RankingPolicy};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "apfix",
    version,
    about = "Large-vocabulary detection evaluation: AP variants, ranking policies, calibration"
)]
pub struct Cli {
    /// Worker threads (defaults to all cores). Never changes numeric output.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Omit the runtime block from reports so reruns are byte-identical.
    #[arg(long, global = true)]
    pub no_timestamp: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate a results file against groundtruth.
    Evaluate(EvaluateArgs),
    /// Re-evaluate while varying one ranking limit.
    Sweep(SweepArgs),
    /// Compare a per-image cap against the same cap after a per-class cut.
    Game(GameArgs),
    /// Evaluate only the categories of some frequency groups.
    Subset(SubsetArgs),
    /// Fit per-category score calibrators.
    Calibrate(CalibrateArgs),
    /// Rewrite detection scores with a calibration model.
    Apply(ApplyArgs),
    /// Score statistics per frequency group.
    ScoreDist(ScoreDistArgs),
    /// Reproduce the two-scenario toy example and check its values.
    Toy(ToyArgs),
}

/// A detection limit: a positive count or `none`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limit(pub Option<usize>);

impl FromStr for Limit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "none" | "inf" => Ok(Limit(None)),
            v => match v.parse::<usize>() {
                Ok(0) => Err("limit must be positive or `none`".into()),
                Ok(n) => Ok(Limit(Some(n))),
                Err(_) => Err(format!("expected a count or `none`, got {v:?}")),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[allow(clippy::enum_variant_names)]
pub enum Preset {
    /// 300 detections per image, no per-class cap.
    ApOld,
    /// 10,000 detections per class, no per-image cap.
    ApFixed,
    /// ap-fixed plus pooled AP.
    ApPool,
}

impl Preset {
    pub fn config(self) -> EvalConfig {
        match self {
            Preset::ApOld => EvalConfig::ap_old(),
            Preset::ApFixed => EvalConfig::ap_fixed(),
            Preset::ApPool => EvalConfig::ap_pool(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
            Format::Table => ReportFormat::Table,
        }
    }
}

fn parse_interp(s: &str) -> Result<Interpolation, String> {
    s.parse().map_err(|e: apfix_core::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<CalibrationMethod, String> {
    s.parse().map_err(|e: apfix_core::Error| e.to_string())
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse().map_err(|e: apfix_core::Error| e.to_string())
}

fn parse_group(s: &str) -> Result<FrequencyGroup, String> {
    match s.parse() {
        Ok(FrequencyGroup::Unknown) => Err("groups are r, c and f".into()),
        Ok(g) => Ok(g),
        Err(e) => Err(apfix_core::Error::to_string(&e)),
    }
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Groundtruth annotations (COCO or LVIS JSON).
    #[arg(long)]
    pub gt: PathBuf,
    /// Detection results array.
    #[arg(long)]
    pub dets: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct PolicyArgs {
    /// Named metric configuration.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Per-image detection cap.
    #[arg(long, value_name = "N|none", conflicts_with = "preset")]
    pub dets_per_image: Option<Limit>,
    /// Per-class detection cap over the whole dataset.
    #[arg(long, value_name = "K|none", conflicts_with = "preset")]
    pub dets_per_class: Option<Limit>,
    /// Comma-separated IoU thresholds.
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub iou: Option<Vec<f64>>,
    /// AP integration: `exact` or `sampled:N`.
    #[arg(long, value_parser = parse_interp, value_name = "exact|sampled:N")]
    pub interp: Option<Interpolation>,
    /// Also report pooled AP.
    #[arg(long)]
    pub pooled: bool,
}

impl PolicyArgs {
    /// Resolves the configuration: preset (default ap-fixed), then explicit
    /// limits, thresholds and interpolation on top. Explicit limit flags
    /// replace the preset's policy as a whole.
    pub fn config(&self) -> EvalConfig {
        let mut cfg = self.preset.unwrap_or(Preset::ApFixed).config();
        if self.dets_per_image.is_some() || self.dets_per_class.is_some() {
            cfg.ranking_policy = RankingPolicy::new(
                self.dets_per_image.and_then(|l| l.0),
                self.dets_per_class.and_then(|l| l.0),
            );
        }
        if let Some(t) = &self.iou {
            cfg.iou_thresholds = t.clone();
        }
        if let Some(i) = self.interp {
            cfg.interpolation = i;
        }
        cfg.include_pooled |= self.pooled;
        cfg
    }
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Restrict to these frequency groups, as `subset` does.
    #[arg(long, value_delimiter = ',', value_parser = parse_group, value_name = "r,c,f")]
    pub groups: Option<Vec<FrequencyGroup>>,
    /// Pooled PR curves at the first IoU threshold as CSV point series.
    #[arg(long, value_name = "PATH")]
    pub curves: Option<PathBuf>,
    /// Pooled PR curves at the first IoU threshold as SVG.
    #[arg(long, value_name = "PATH")]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Which limit to vary.
    #[arg(long, value_parser = parse_axis, default_value = "dets-per-image")]
    pub axis: SweepAxis,
    /// Comma-separated limit values; `none` removes the limit.
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub values: Option<Vec<Limit>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fixture {
    /// Single-image toy with classes A and B, scored over two scenarios.
    Toy,
    /// Bundled frequency-skewed corpus where the per-class cut pays off.
    Gameable,
}

#[derive(Args, Debug)]
pub struct GameArgs {
    /// Built-in corpus instead of --gt/--dets.
    #[arg(long, value_enum, conflicts_with_all = ["gt", "dets"])]
    pub fixture: Option<Fixture>,
    /// Groundtruth annotations, instead of a bundled fixture.
    #[arg(long, required_unless_present = "fixture")]
    pub gt: Option<PathBuf>,
    /// Detection results array, instead of a bundled fixture.
    #[arg(long, required_unless_present = "fixture")]
    pub dets: Option<PathBuf>,
    /// Per-image cap N shared by both rows.
    #[arg(long, value_name = "N|none")]
    pub dets_per_image: Option<Limit>,
    /// Per-class cap K applied first in the second row.
    #[arg(long, value_name = "K|none")]
    pub dets_per_class: Option<Limit>,
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub iou: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_interp, value_name = "exact|sampled:N")]
    pub interp: Option<Interpolation>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SubsetArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Frequency groups to keep.
    #[arg(long, value_delimiter = ',', value_parser = parse_group, value_name = "r,c,f", required = true)]
    pub groups: Vec<FrequencyGroup>,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Calibrator family fitted to every category.
    #[arg(long, value_parser = parse_method, value_name = "platt|isotonic|histbin|beta|bbq")]
    pub method: CalibrationMethod,
    #[command(flatten)]
    pub input: InputArgs,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Labeled detections a category needs before it is fitted.
    #[arg(long, default_value_t = 5)]
    pub min_samples: usize,
    /// Equal-width bins for the ECE summary.
    #[arg(long, default_value_t = 15)]
    pub ece_bins: usize,
    /// Summary format.
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct ApplyArgs {
    /// Model written by `calibrate`.
    #[arg(long)]
    pub model: PathBuf,
    /// Detection results array to rescore.
    #[arg(long)]
    pub dets: PathBuf,
    /// Calibrated results file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ScoreDistArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Equal-width score bins per group.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Per-group histograms as SVG.
    #[arg(long, value_name = "PATH")]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ToyArgs {
    #[command(flatten)]
    pub output: OutputArgs,
}
