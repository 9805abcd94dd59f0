use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use apfix_core::calibration::{
    apply_calibration, fit_per_class, label_for_calibration, mean_per_class_ece, CalibrationModel, FitOptions,
};
use apfix_core::io::{self, GameComparison, ReportFormat};
use apfix_core::matching::match_dataset;
use apfix_core::metrics::{
    federated_filter, pooled_curves, report_from_matches, score_distribution, subset_evaluate, sweep, EvalCounts,
    EvalReport, RuntimeStats, SweepAxis,
};
use apfix_core::ranking::apply_policy;
use apfix_core::toy::{self, ToyOutcome};
use apfix_core::{synth, Dataset, DetectionSet, EvalConfig, FrequencyGroup, RankingPolicy};

use crate::args::*;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

const TOY_TOLERANCE: f64 = 1e-9;

pub struct Context {
    pub no_timestamp: bool,
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| {
            CliError::Input(apfix_core::Error::Io {
                path: path.to_path_buf(),
                source: e,
            })
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    emit(text, Some(path))
}

fn load(input: &InputArgs) -> Result<(Dataset, DetectionSet)> {
    let dataset = io::load_dataset(&input.gt)?;
    let dets = io::load_detections(&input.dets, &dataset)?;
    log::info!(
        "loaded {} images, {} categories, {} annotations, {} detections",
        dataset.images().len(),
        dataset.categories().len(),
        dataset.annotations().len(),
        dets.len()
    );
    Ok((dataset, dets))
}

fn stamp(report: &mut EvalReport, started: Instant, ctx: &Context) {
    if ctx.no_timestamp {
        return;
    }
    let generated_unix_s = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    report.runtime = Some(RuntimeStats {
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        generated_unix_s,
    });
}

fn validated(cfg: EvalConfig) -> Result<EvalConfig> {
    cfg.validate()?;
    Ok(cfg)
}

pub fn evaluate(args: &EvaluateArgs, ctx: &Context) -> Result<()> {
    let started = Instant::now();
    let cfg = validated(args.policy.config())?;
    let (dataset, dets) = load(&args.input)?;
    let (dataset, dets) = match &args.groups {
        Some(groups) => restrict(&dataset, &dets, groups, &cfg),
        None => (dataset, dets),
    };
    let filtered = federated_filter(&dataset, &dets);
    let kept = apply_policy(&filtered, &cfg.ranking_policy);
    let matches = match_dataset(&dataset, &kept, &cfg.iou_thresholds);
    let counts = EvalCounts {
        images: dataset.images().len(),
        detections_input: dets.len(),
        detections_evaluated: filtered.len(),
        detections_kept: kept.len(),
        categories_evaluated: 0,
    };
    let mut report = report_from_matches(&dataset, &matches, &cfg, counts);
    if args.curves.is_some() || args.svg.is_some() {
        let curves = pooled_curves(&dataset, &matches, &cfg, 0);
        let refs: Vec<(String, &_)> = curves.iter().map(|(l, c)| (l.clone(), c)).collect();
        if let Some(path) = &args.curves {
            write_file(path, &io::render_curves_csv(&refs))?;
        }
        if let Some(path) = &args.svg {
            let title = format!("pooled PR, IoU {}", cfg.iou_thresholds[0]);
            write_file(path, &io::svg::pr_curves(&title, &refs))?;
        }
    }
    stamp(&mut report, started, ctx);
    emit(
        &io::render_report(&report, args.output.format.into()),
        args.output.out.as_deref(),
    )
}

/// Same restriction as `subset`, applied before evaluation.
fn restrict(
    dataset: &Dataset,
    dets: &DetectionSet,
    groups: &[FrequencyGroup],
    cfg: &EvalConfig,
) -> (Dataset, DetectionSet) {
    let groups: BTreeSet<FrequencyGroup> = groups.iter().copied().collect();
    let keep: BTreeSet<u64> = dataset
        .categories()
        .iter()
        .filter(|c| groups.contains(&cfg.frequency_thresholds.classify(c.image_count)))
        .map(|c| c.id)
        .collect();
    (
        dataset.restrict_categories(|c| keep.contains(&c.id)),
        dets.filtered(|d| keep.contains(&d.category_id)),
    )
}

fn default_sweep_values(axis: SweepAxis) -> Vec<Option<usize>> {
    match axis {
        SweepAxis::DetsPerImage => vec![Some(100), Some(300), Some(1000), None],
        SweepAxis::DetsPerClass => vec![Some(1000), Some(3000), Some(10_000), None],
    }
}

pub fn sweep_cmd(args: &SweepArgs, _ctx: &Context) -> Result<()> {
    let cfg = validated(args.policy.config())?;
    let values: Vec<Option<usize>> = match &args.values {
        Some(v) => v.iter().map(|l| l.0).collect(),
        None => default_sweep_values(args.axis),
    };
    let (dataset, dets) = load(&args.input)?;
    let table = sweep(&dataset, &dets, args.axis, &values, &cfg)?;
    emit(
        &io::render_sweep(&table, args.output.format.into()),
        args.output.out.as_deref(),
    )
}

pub fn subset(args: &SubsetArgs, ctx: &Context) -> Result<()> {
    let started = Instant::now();
    let cfg = validated(args.policy.config())?;
    let (dataset, dets) = load(&args.input)?;
    let groups: BTreeSet<FrequencyGroup> = args.groups.iter().copied().collect();
    let mut report = subset_evaluate(&dataset, &dets, &groups, &cfg)?;
    stamp(&mut report, started, ctx);
    emit(
        &io::render_report(&report, args.output.format.into()),
        args.output.out.as_deref(),
    )
}

pub fn game(args: &GameArgs, _ctx: &Context) -> Result<()> {
    let format: ReportFormat = args.output.format.into();
    if args.fixture == Some(Fixture::Toy) {
        let image = args.dets_per_image.map_or(Some(2), |l| l.0);
        let class = args.dets_per_class.map_or(Some(1), |l| l.0);
        let interp = args.interp.unwrap_or(apfix_core::Interpolation::Exact);
        let outcomes = vec![
            toy::evaluate_policy_with(RankingPolicy::new(image, None), interp)?,
            toy::evaluate_policy_with(RankingPolicy::new(image, class), interp)?,
        ];
        return emit(&io::render_toy(&outcomes, format), args.output.out.as_deref());
    }
    if args.fixture.is_none() && args.dets_per_class.is_none() {
        return Err(CliError::Usage("game on user files needs --dets-per-class".into()));
    }
    let (default_n, default_k) = match args.fixture {
        Some(Fixture::Gameable) => (synth::GAMEABLE_DETS_PER_IMAGE, synth::GAMEABLE_DETS_PER_CLASS),
        _ => (RankingPolicy::AP_OLD_DETS_PER_IMAGE, 0),
    };
    let image = args.dets_per_image.map_or(Some(default_n), |l| l.0);
    let class = args.dets_per_class.map_or(Some(default_k), |l| l.0);
    let mut base = EvalConfig::ap_old();
    if let Some(t) = &args.iou {
        base.iou_thresholds = t.clone();
    }
    if let Some(i) = args.interp {
        base.interpolation = i;
    }
    base.ranking_policy = RankingPolicy::new(image, None);
    let base = validated(base)?;
    let gamed_cfg = EvalConfig {
        ranking_policy: RankingPolicy::new(image, class),
        ..base.clone()
    };
    let (dataset, dets) = match args.fixture {
        Some(Fixture::Gameable) => synth::gameable_corpus(),
        _ => load(&InputArgs {
            gt: args.gt.clone().expect("required without --fixture"),
            dets: args.dets.clone().expect("required without --fixture"),
        })?,
    };
    let cmp = GameComparison {
        baseline: apfix_core::metrics::evaluate(&dataset, &dets, &base)?,
        gamed: apfix_core::metrics::evaluate(&dataset, &dets, &gamed_cfg)?,
    };
    emit(&io::render_game(&cmp, format), args.output.out.as_deref())
}

pub fn calibrate(args: &CalibrateArgs, _ctx: &Context) -> Result<()> {
    let (dataset, dets) = load(&args.input)?;
    let opts = FitOptions {
        min_samples: args.min_samples,
    };
    let model = fit_per_class(&dataset, &dets, args.method, &opts);
    let labels_before = label_for_calibration(&dataset, &dets);
    let (calibrated, _) = apply_calibration(&dets, &model);
    let labels_after = label_for_calibration(&dataset, &calibrated);
    let summary = CalibrationSummary {
        method: args.method.to_string(),
        categories: model.categories.len(),
        fitted: model.categories.len() - model.fallback_count(),
        fallbacks: model.fallback_count(),
        non_monotone: model.categories.values().filter(|c| !c.fit.monotone).count(),
        labeled_detections: labels_before.len(),
        ece_bins: args.ece_bins,
        mean_class_ece_before: mean_per_class_ece(&labels_before, args.ece_bins),
        mean_class_ece_after: mean_per_class_ece(&labels_after, args.ece_bins),
    };
    io::write_json(&model, &args.out)?;
    emit(&summary.render(args.format.into()), None)
}

#[derive(serde::Serialize)]
struct CalibrationSummary {
    method: String,
    categories: usize,
    fitted: usize,
    fallbacks: usize,
    non_monotone: usize,
    labeled_detections: usize,
    ece_bins: usize,
    mean_class_ece_before: Option<f64>,
    mean_class_ece_after: Option<f64>,
}

impl CalibrationSummary {
    fn render(&self, format: ReportFormat) -> String {
        let ece = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        match format {
            ReportFormat::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
                s.push('\n');
                s
            }
            ReportFormat::Csv => format!(
                "method,categories,fitted,fallbacks,non_monotone,labeled_detections,ece_before,ece_after\n{},{},{},{},{},{},{},{}\n",
                self.method,
                self.categories,
                self.fitted,
                self.fallbacks,
                self.non_monotone,
                self.labeled_detections,
                ece(self.mean_class_ece_before),
                ece(self.mean_class_ece_after)
            ),
            ReportFormat::Table => {
                let mut s = String::new();
                let _ = writeln!(s, "method              {}", self.method);
                let _ = writeln!(s, "categories          {}", self.categories);
                let _ = writeln!(s, "fitted              {}", self.fitted);
                let _ = writeln!(s, "fallbacks           {}", self.fallbacks);
                let _ = writeln!(s, "non-monotone fits   {}", self.non_monotone);
                let _ = writeln!(s, "labeled detections  {}", self.labeled_detections);
                let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
                let _ = writeln!(
                    s,
                    "mean class ECE      {} -> {} ({} bins)",
                    f(self.mean_class_ece_before),
                    f(self.mean_class_ece_after),
                    self.ece_bins
                );
                s
            }
        }
    }
}

pub fn apply(args: &ApplyArgs, _ctx: &Context) -> Result<()> {
    let model: CalibrationModel = io::read_json(&args.model)?;
    let (dets, _) = io::load_detections_unchecked(&args.dets)?;
    let (calibrated, summary) = apply_calibration(&dets, &model);
    if summary.unknown_detections > 0 {
        eprintln!(
            "warning: {} detections in {} categories without a calibrator kept their scores",
            summary.unknown_detections,
            summary.unknown_categories.len()
        );
    }
    io::write_detections(&calibrated, &args.out)?;
    Ok(())
}

pub fn score_dist(args: &ScoreDistArgs, _ctx: &Context) -> Result<()> {
    let cfg = validated(args.policy.config())?;
    let (dataset, dets) = load(&args.input)?;
    let kept = apply_policy(&federated_filter(&dataset, &dets), &cfg.ranking_policy);
    let dist = score_distribution(&kept, &dataset, cfg.frequency_thresholds, args.bins);
    for w in &dist.warnings {
        log::warn!("{w}");
    }
    if let Some(path) = &args.svg {
        write_file(
            path,
            &io::svg::score_histograms("score distribution by frequency group", &dist),
        )?;
    }
    emit(
        &io::render_distribution(&dist, args.output.format.into()),
        args.output.out.as_deref(),
    )
}

/// Golden values of the toy: per ranking, AP in scenario 1 and 2, the
/// expectation, and the expected AP of class B.
const TOY_GOLDEN: [(&str, [f64; 2], f64, f64); 2] = [
    ("ranking 1", [0.5, 0.5], 0.5, 0.0),
    ("ranking 2", [0.75, 0.25], 0.65, 0.8),
];

pub fn toy_check(outcomes: &[ToyOutcome]) -> Vec<String> {
    let mut failures = Vec::new();
    for (o, (name, per_scenario, expected, expected_b)) in outcomes.iter().zip(TOY_GOLDEN) {
        let mut check = |what: &str, got: f64, want: f64| {
            if (got - want).abs() > TOY_TOLERANCE {
                failures.push(format!("{name} {what}: got {got}, expected {want}"));
            }
        };
        for (k, s) in o.scenarios.iter().enumerate() {
            check(&format!("scenario {} AP", k + 1), s.ap, per_scenario[k]);
        }
        check("expected AP", o.expected_ap, expected);
        check("expected AP_B", o.expected_ap_b, expected_b);
    }
    failures
}

pub fn toy_cmd(args: &ToyArgs, _ctx: &Context) -> Result<()> {
    let outcomes = vec![
        toy::evaluate_policy(toy::ranking_one())?,
        toy::evaluate_policy(toy::ranking_two())?,
    ];
    emit(
        &io::render_toy(&outcomes, args.output.format.into()),
        args.output.out.as_deref(),
    )?;
    let failures = toy_check(&outcomes);
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Regression(failures.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_values_pass_the_check() {
        let outcomes = vec![
            toy::evaluate_policy(toy::ranking_one()).unwrap(),
            toy::evaluate_policy(toy::ranking_two()).unwrap(),
        ];
        assert!(toy_check(&outcomes).is_empty());
    }

    #[test]
    fn toy_check_flags_deviations() {
        let mut outcomes = vec![
            toy::evaluate_policy(toy::ranking_one()).unwrap(),
            toy::evaluate_policy(toy::ranking_two()).unwrap(),
        ];
        outcomes[1].expected_ap += 1e-6;
        assert_eq!(toy_check(&outcomes).len(), 1);
    }
}
