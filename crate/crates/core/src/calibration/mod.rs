//! Per-category score calibration fit from IoU-0.5 true/false-positive
//! labels, and the expected calibration error diagnostic.

mod binning;
mod isotonic;
mod logistic;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::match_dataset;
use crate::metrics::federated_filter;
use crate::model::{Dataset, DetectionSet};
use crate::par;

pub use binning::{bbq_candidates, BbqComponent, HistogramBins};
pub use isotonic::{pav, IsotonicBlock};

/// IoU threshold at which calibration labels are assigned.
pub const LABEL_IOU: f64 = 0.5;
/// Clamp applied to scores before the beta calibrator's logarithms.
pub const BETA_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledScore {
    pub score: f64,
    pub label: bool,
    pub category_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationMethod {
    Platt,
    Isotonic,
    Histbin,
    Beta,
    Bbq,
}

impl CalibrationMethod {
    pub const ALL: [CalibrationMethod; 5] = [
        CalibrationMethod::Platt,
        CalibrationMethod::Isotonic,
        CalibrationMethod::Histbin,
        CalibrationMethod::Beta,
        CalibrationMethod::Bbq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CalibrationMethod::Platt => "platt",
            CalibrationMethod::Isotonic => "isotonic",
            CalibrationMethod::Histbin => "histbin",
            CalibrationMethod::Beta => "beta",
            CalibrationMethod::Bbq => "bbq",
        }
    }
}

impl fmt::Display for CalibrationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CalibrationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CalibrationMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "calibration method must be platt, isotonic, histbin, beta or bbq, got {s:?}"
                ))
            })
    }
}

/// A score transform for one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Calibrator {
    Identity,
    /// `sigmoid(a s + b)`.
    Platt {
        a: f64,
        b: f64,
    },
    /// Knots `[score, value]` sorted by score, interpolated linearly.
    Isotonic {
        breakpoints: Vec<[f64; 2]>,
    },
    Histbin(HistogramBins),
    /// `sigmoid(a ln s - b ln(1 - s) + c)` on the clamped score.
    Beta {
        a: f64,
        b: f64,
        c: f64,
    },
    /// Weighted average of histogram components.
    Bbq {
        components: Vec<BbqComponent>,
    },
}

impl Calibrator {
    /// Calibrated score, clamped to `[0, 1]`.
    pub fn apply(&self, score: f64) -> f64 {
        let out = match self {
            Calibrator::Identity => score,
            Calibrator::Platt { a, b } => logistic::sigmoid(a * score + b),
            Calibrator::Isotonic { breakpoints } => isotonic::interpolate(breakpoints, score),
            Calibrator::Histbin(bins) => bins.apply(score),
            Calibrator::Beta { a, b, c } => {
                let s = score.clamp(BETA_EPSILON, 1.0 - BETA_EPSILON);
                logistic::sigmoid(a * s.ln() - b * (1.0 - s).ln() + c)
            }
            Calibrator::Bbq { components } => components.iter().map(|c| c.weight * c.bins.apply(score)).sum(),
        };
        out.clamp(0.0, 1.0)
    }

    /// Whether the map is non-decreasing on `[0, 1]`.
    pub fn is_monotone(&self) -> bool {
        match self {
            Calibrator::Identity => true,
            Calibrator::Platt { a, .. } => *a >= 0.0,
            Calibrator::Isotonic { breakpoints } => breakpoints.windows(2).all(|w| w[0][1] <= w[1][1]),
            Calibrator::Histbin(bins) => bins.is_monotone(),
            Calibrator::Beta { a, b, .. } => *a >= 0.0 && *b >= 0.0,
            Calibrator::Bbq { components } => {
                // Piecewise constant: checking every edge of every component covers all steps.
                let mut points: Vec<f64> = components
                    .iter()
                    .flat_map(|c| c.bins.edges.iter().copied())
                    .chain([0.0, 1.0])
                    .collect();
                points.sort_by(f64::total_cmp);
                points.windows(2).all(|w| self.apply(w[0]) <= self.apply(w[1]))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub min_samples: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { min_samples: 5 }
    }
}

/// Why a fit degraded to a simpler calibrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Fallback {
    /// Fewer labeled samples than the minimum; Identity used.
    InsufficientData { n_samples: usize, min_samples: usize },
    /// Only one label value present; constant smoothed rate used.
    Separable { label: bool },
}

impl fmt::Display for Fallback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fallback::InsufficientData { n_samples, min_samples } => {
                write!(f, "{n_samples} labeled detections, need {min_samples}")
            }
            Fallback::Separable { label } => {
                let which = if *label { "true" } else { "false" };
                write!(f, "only {which} positives present")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub calibrator: Calibrator,
    pub fallback: Option<Fallback>,
}

impl Fit {
    fn ok(calibrator: Calibrator) -> Self {
        Fit {
            calibrator,
            fallback: None,
        }
    }
}

fn to_pairs(samples: &[LabeledScore]) -> Vec<(f64, f64)> {
    samples
        .iter()
        .map(|s| (s.score, f64::from(u8::from(s.label))))
        .collect()
}

fn sorted_pairs(samples: &[LabeledScore]) -> Vec<(f64, f64)> {
    let mut pairs = to_pairs(samples);
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pairs
}

fn gate(samples: &[LabeledScore], opts: &FitOptions) -> Option<Fit> {
    (samples.len() < opts.min_samples).then_some(Fit {
        calibrator: Calibrator::Identity,
        fallback: Some(Fallback::InsufficientData {
            n_samples: samples.len(),
            min_samples: opts.min_samples,
        }),
    })
}

/// Constant smoothed-rate calibrator when one label is absent.
fn separable(samples: &[LabeledScore]) -> Option<Fit> {
    let n = samples.len() as f64;
    let pos = samples.iter().filter(|s| s.label).count();
    let label = match pos {
        0 => false,
        p if p == samples.len() => true,
        _ => return None,
    };
    let rate = if label { (n + 1.0) / (n + 2.0) } else { 1.0 / (n + 2.0) };
    Some(Fit {
        calibrator: Calibrator::Platt {
            a: 0.0,
            b: logistic::logit(rate),
        },
        fallback: Some(Fallback::Separable { label }),
    })
}

pub fn fit_platt(samples: &[LabeledScore], opts: &FitOptions) -> Fit {
    if let Some(f) = gate(samples, opts).or_else(|| separable(samples)) {
        return f;
    }
    let pairs = to_pairs(samples);
    let x: Vec<[f64; 2]> = pairs.iter().map(|p| [p.0, 1.0]).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let [a, b] = logistic::fit(&x, &y, [0.0, 0.0]);
    if a >= 0.0 {
        return Fit::ok(Calibrator::Platt { a, b });
    }
    let ones = vec![[1.0]; y.len()];
    let [b] = logistic::fit(&ones, &y, [0.0]);
    Fit::ok(Calibrator::Platt { a: 0.0, b })
}

/// PAV blocks for the samples, exposed for diagnostics.
pub fn isotonic_blocks(samples: &[LabeledScore]) -> Vec<IsotonicBlock> {
    pav(&to_pairs(samples))
}

pub fn fit_isotonic(samples: &[LabeledScore], opts: &FitOptions) -> Fit {
    if let Some(f) = gate(samples, opts) {
        return f;
    }
    let breakpoints = isotonic_blocks(samples)
        .into_iter()
        .map(|b| [b.center, b.value])
        .collect();
    Fit::ok(Calibrator::Isotonic { breakpoints })
}

pub fn fit_histogram(samples: &[LabeledScore], opts: &FitOptions) -> Fit {
    if let Some(f) = gate(samples, opts) {
        return f;
    }
    let sorted = sorted_pairs(samples);
    let (bins, _) = binning::equal_frequency(&sorted, binning::histogram_bin_count(sorted.len()));
    Fit::ok(Calibrator::Histbin(bins))
}

pub fn fit_beta(samples: &[LabeledScore], opts: &FitOptions) -> Fit {
    if let Some(f) = gate(samples, opts).or_else(|| separable(samples)) {
        return f;
    }
    let pairs = to_pairs(samples);
    let feats: Vec<[f64; 2]> = pairs
        .iter()
        .map(|p| {
            let s = p.0.clamp(BETA_EPSILON, 1.0 - BETA_EPSILON);
            [s.ln(), -(1.0 - s).ln()]
        })
        .collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let full: Vec<[f64; 3]> = feats.iter().map(|f| [f[0], f[1], 1.0]).collect();
    let [a, b, c] = logistic::fit(&full, &y, [0.0, 0.0, 0.0]);
    if a >= 0.0 && b >= 0.0 {
        return Fit::ok(Calibrator::Beta { a, b, c });
    }
    // Drop each negative coefficient, refit the rest, and repeat.
    let refit_one = |k: usize| -> Option<Calibrator> {
        let x: Vec<[f64; 2]> = feats.iter().map(|f| [f[k], 1.0]).collect();
        let [w, c] = logistic::fit(&x, &y, [0.0, 0.0]);
        (w >= 0.0).then_some({
            if k == 0 {
                Calibrator::Beta { a: w, b: 0.0, c }
            } else {
                Calibrator::Beta { a: 0.0, b: w, c }
            }
        })
    };
    let keep = if a < 0.0 && b < 0.0 {
        None
    } else if a < 0.0 {
        refit_one(1)
    } else {
        refit_one(0)
    };
    keep.map(Fit::ok).unwrap_or_else(|| {
        let ones = vec![[1.0]; y.len()];
        let [c] = logistic::fit(&ones, &y, [0.0]);
        Fit::ok(Calibrator::Beta { a: 0.0, b: 0.0, c })
    })
}

pub fn fit_bbq(samples: &[LabeledScore], opts: &FitOptions) -> Fit {
    if let Some(f) = gate(samples, opts) {
        return f;
    }
    let components = binning::fit_components(&sorted_pairs(samples));
    Fit::ok(Calibrator::Bbq { components })
}

pub fn fit(method: CalibrationMethod, samples: &[LabeledScore], opts: &FitOptions) -> Fit {
    match method {
        CalibrationMethod::Platt => fit_platt(samples, opts),
        CalibrationMethod::Isotonic => fit_isotonic(samples, opts),
        CalibrationMethod::Histbin => fit_histogram(samples, opts),
        CalibrationMethod::Beta => fit_beta(samples, opts),
        CalibrationMethod::Bbq => fit_bbq(samples, opts),
    }
}

/// Labels every evaluated detection by matching at IoU 0.5 with no ranking
/// limits. Ignored outcomes are dropped. Output is grouped by category and
/// rank ordered within each.
pub fn label_for_calibration(dataset: &Dataset, dets: &DetectionSet) -> Vec<LabeledScore> {
    let filtered = federated_filter(dataset, dets);
    let matches = match_dataset(dataset, &filtered, &[LABEL_IOU]);
    matches
        .categories()
        .iter()
        .flat_map(|cat| {
            cat.labels(0).map(move |(score, _, tp)| LabeledScore {
                score,
                label: tp,
                category_id: cat.category_id,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub n_samples: usize,
    pub n_positive: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<Fallback>,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCalibration {
    pub calibrator: Calibrator,
    pub fit: FitMetadata,
}

/// Per-category calibrators. Every dataset category has an explicit entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub method: CalibrationMethod,
    pub min_samples: usize,
    pub categories: BTreeMap<u64, CategoryCalibration>,
}

impl CalibrationModel {
    pub fn calibrator(&self, category_id: u64) -> Option<&Calibrator> {
        self.categories.get(&category_id).map(|c| &c.calibrator)
    }

    pub fn fallback_count(&self) -> usize {
        self.categories.values().filter(|c| c.fit.fallback.is_some()).count()
    }
}

pub fn fit_labels_per_class(
    category_ids: impl IntoIterator<Item = u64>,
    labels: &[LabeledScore],
    method: CalibrationMethod,
    opts: &FitOptions,
) -> CalibrationModel {
    let mut grouped: BTreeMap<u64, Vec<LabeledScore>> = category_ids.into_iter().map(|id| (id, Vec::new())).collect();
    for l in labels {
        grouped.entry(l.category_id).or_default().push(*l);
    }
    let groups: Vec<(u64, Vec<LabeledScore>)> = grouped.into_iter().collect();
    let fitted = par::map(&groups, |(id, samples)| {
        let f = fit(method, samples, opts);
        let fit = FitMetadata {
            n_samples: samples.len(),
            n_positive: samples.iter().filter(|s| s.label).count(),
            fallback: f.fallback,
            monotone: f.calibrator.is_monotone(),
        };
        (
            *id,
            CategoryCalibration {
                calibrator: f.calibrator,
                fit,
            },
        )
    });
    CalibrationModel {
        method,
        min_samples: opts.min_samples,
        categories: fitted.into_iter().collect(),
    }
}

/// Labels the corpus and fits one calibrator per category.
pub fn fit_per_class(
    dataset: &Dataset,
    dets: &DetectionSet,
    method: CalibrationMethod,
    opts: &FitOptions,
) -> CalibrationModel {
    let labels = label_for_calibration(dataset, dets);
    fit_labels_per_class(dataset.categories().iter().map(|c| c.id), &labels, method, opts)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ApplySummary {
    /// Categories absent from the model; their scores pass through.
    pub unknown_categories: BTreeSet<u64>,
    pub unknown_detections: usize,
}

/// Replaces every score with its category's calibrated value. Ids, boxes
/// and record order are untouched.
pub fn apply_calibration(dets: &DetectionSet, model: &CalibrationModel) -> (DetectionSet, ApplySummary) {
    let mut summary = ApplySummary::default();
    let out = dets
        .iter()
        .map(|d| {
            let mut d = *d;
            match model.calibrator(d.category_id) {
                Some(c) => d.score = c.apply(d.score),
                None => {
                    summary.unknown_categories.insert(d.category_id);
                    summary.unknown_detections += 1;
                    d.score = d.score.clamp(0.0, 1.0);
                }
            }
            d
        })
        .collect();
    for id in &summary.unknown_categories {
        log::warn!("category {id} has no calibrator; scores left unchanged");
    }
    (out, summary)
}

/// Equal-width-bin ECE over `[0, 1]`. `None` for an empty sample.
pub fn expected_calibration_error(samples: &[LabeledScore], n_bins: usize) -> Option<f64> {
    if samples.is_empty() || n_bins == 0 {
        return None;
    }
    let mut count = vec![0usize; n_bins];
    let mut score_sum = vec![0.0; n_bins];
    let mut pos = vec![0usize; n_bins];
    for s in samples {
        let b = ((s.score.clamp(0.0, 1.0) * n_bins as f64) as usize).min(n_bins - 1);
        count[b] += 1;
        score_sum[b] += s.score;
        pos[b] += usize::from(s.label);
    }
    let n = samples.len() as f64;
    let ece = (0..n_bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let c = count[b] as f64;
            (c / n) * (pos[b] as f64 / c - score_sum[b] / c).abs()
        })
        .sum();
    Some(ece)
}

/// Mean of the per-category ECE over categories with at least one sample.
pub fn mean_per_class_ece(samples: &[LabeledScore], n_bins: usize) -> Option<f64> {
    let mut grouped: BTreeMap<u64, Vec<LabeledScore>> = BTreeMap::new();
    for s in samples {
        grouped.entry(s.category_id).or_default().push(*s);
    }
    let values: Vec<f64> = grouped
        .values()
        .filter_map(|g| expected_calibration_error(g, n_bins))
        .collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}
