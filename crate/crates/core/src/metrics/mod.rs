//! Per-class (macro) AP, pooled (micro) AP, frequency-group breakdowns,
//! sweeps over ranking limits, and score-distribution diagnostics.

mod curve;
mod distribution;
mod pooled;
mod sweep;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use curve::{average_precision, pr_curve, PrCurve, PrPoint};
pub use distribution::{score_distribution, GroupScoreStats, ScoreDistribution};
pub use pooled::{evaluate_pooled, pooled_curves, pooled_from_matches, PooledReport};
pub use sweep::{subset_evaluate, sweep, SweepAxis, SweepRow, SweepTable};

use crate::error::Result;
use crate::matching::{match_dataset, MatchSet};
use crate::model::{frequency_group, Dataset, DetectionSet, EvalConfig, FrequencyGroup};
use crate::par;
use crate::ranking::apply_policy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryResult {
    pub category_id: u64,
    pub name: String,
    pub group: FrequencyGroup,
    pub n_gt: usize,
    /// Detections that entered matching for this category.
    pub n_detections: usize,
    /// AP averaged over IoU thresholds; `None` when the category has no
    /// groundtruth in the evaluated universe.
    pub ap: Option<f64>,
    pub ap_per_threshold: Vec<Option<f64>>,
}

/// Mean AP of the rare, common and frequent subsets.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GroupBreakdown {
    pub rare: Option<f64>,
    pub common: Option<f64>,
    pub frequent: Option<f64>,
}

impl GroupBreakdown {
    pub fn get(&self, group: FrequencyGroup) -> Option<f64> {
        match group {
            FrequencyGroup::Rare => self.rare,
            FrequencyGroup::Common => self.common,
            FrequencyGroup::Frequent => self.frequent,
            FrequencyGroup::Unknown => None,
        }
    }

    fn set(&mut self, group: FrequencyGroup, value: Option<f64>) {
        match group {
            FrequencyGroup::Rare => self.rare = value,
            FrequencyGroup::Common => self.common = value,
            FrequencyGroup::Frequent => self.frequent = value,
            FrequencyGroup::Unknown => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalCounts {
    pub images: usize,
    pub detections_input: usize,
    /// After dropping detections outside each image's evaluation universe.
    pub detections_evaluated: usize,
    /// After the ranking policy.
    pub detections_kept: usize,
    pub categories_evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeStats {
    pub elapsed_ms: f64,
    pub generated_unix_s: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    /// Macro mean over categories with groundtruth, averaged over IoU
    /// thresholds.
    pub ap: Option<f64>,
    pub ap_per_threshold: Vec<Option<f64>>,
    pub groups: GroupBreakdown,
    pub pooled: Option<PooledReport>,
    pub categories: Vec<CategoryResult>,
    pub counts: EvalCounts,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime: Option<RuntimeStats>,
}

impl EvalReport {
    pub fn group_ap(&self, group: FrequencyGroup) -> Option<f64> {
        self.groups.get(group)
    }

    pub fn category(&self, category_id: u64) -> Option<&CategoryResult> {
        self.categories.iter().find(|c| c.category_id == category_id)
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Drops detections that are not evaluated under federated semantics,
/// including those citing unknown images or categories.
pub fn federated_filter(dataset: &Dataset, dets: &DetectionSet) -> DetectionSet {
    dets.filtered(|d| dataset.category(d.category_id).is_some() && dataset.evaluates(d.image_id, d.category_id))
}

/// Federated filter, ranking policy, matching, then per-class and pooled AP.
pub fn evaluate(dataset: &Dataset, dets: &DetectionSet, config: &EvalConfig) -> Result<EvalReport> {
    config.validate()?;
    let filtered = federated_filter(dataset, dets);
    let kept = apply_policy(&filtered, &config.ranking_policy);
    let matches = match_dataset(dataset, &kept, &config.iou_thresholds);
    let counts = EvalCounts {
        images: dataset.images().len(),
        detections_input: dets.len(),
        detections_evaluated: filtered.len(),
        detections_kept: kept.len(),
        categories_evaluated: 0,
    };
    Ok(report_from_matches(dataset, &matches, config, counts))
}

/// Builds the report for an already matched corpus. `counts` is echoed with
/// `categories_evaluated` filled in.
pub fn report_from_matches(
    dataset: &Dataset,
    matches: &MatchSet,
    config: &EvalConfig,
    mut counts: EvalCounts,
) -> EvalReport {
    let n_t = matches.thresholds().len();
    let categories: Vec<CategoryResult> = par::map(matches.categories(), |cm| {
        let category = dataset
            .category(cm.category_id)
            .expect("match set built from this dataset");
        let ap_per_threshold: Vec<Option<f64>> = (0..n_t)
            .map(|t| {
                let flags = cm.labels(t).map(|(_, _, tp)| tp);
                PrCurve::from_ranked(flags, cm.n_gt)
                    .ok()
                    .map(|c| average_precision(&c, config.interpolation))
            })
            .collect();
        CategoryResult {
            category_id: cm.category_id,
            name: category.name.clone(),
            group: frequency_group(category, config.frequency_thresholds),
            n_gt: cm.n_gt,
            n_detections: cm.len(),
            ap: mean(ap_per_threshold.iter().flatten().copied()),
            ap_per_threshold,
        }
    });

    let ap_per_threshold = (0..n_t)
        .map(|t| mean(categories.iter().filter_map(|c| c.ap_per_threshold[t])))
        .collect();
    let ap = mean(categories.iter().filter_map(|c| c.ap));
    let mut groups = GroupBreakdown::default();
    for g in FrequencyGroup::KNOWN {
        groups.set(g, mean(categories.iter().filter(|c| c.group == g).filter_map(|c| c.ap)));
    }
    counts.categories_evaluated = categories.iter().filter(|c| c.ap.is_some()).count();
    let mut flags = Vec::new();
    if counts.categories_evaluated == 0 {
        flags.push("no categories with groundtruth were evaluated".to_string());
    }
    let pooled = config
        .include_pooled
        .then(|| pooled_from_matches(dataset, matches, config));
    EvalReport {
        config: config.clone(),
        ap,
        ap_per_threshold,
        groups,
        pooled,
        categories,
        counts,
        flags,
        runtime: None,
    }
}

/// Categories of `dataset` whose frequency group is in `groups`.
pub(crate) fn categories_in_groups(
    dataset: &Dataset,
    groups: &BTreeSet<FrequencyGroup>,
    config: &EvalConfig,
) -> BTreeSet<u64> {
    dataset
        .categories()
        .iter()
        .filter(|c| groups.contains(&frequency_group(c, config.frequency_thresholds)))
        .map(|c| c.id)
        .collect()
}
