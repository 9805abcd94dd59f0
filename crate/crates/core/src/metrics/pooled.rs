//! Pooled AP: one precision/recall curve over the detections of every
//! category, so every groundtruth instance carries equal weight and the
//! metric rewards consistent scores across categories.

use serde::{Deserialize, Serialize};

use super::{average_precision, federated_filter, mean, GroupBreakdown, PrCurve};
use crate::error::Result;
use crate::matching::{match_dataset, MatchSet, Outcome};
use crate::model::{frequency_group, rank_order, Dataset, DetectionSet, EvalConfig, FrequencyGroup};
use crate::par;
use crate::ranking::apply_policy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledReport {
    pub ap: Option<f64>,
    pub ap_per_threshold: Vec<Option<f64>>,
    /// Pooled AP restricted to the categories of each frequency group.
    pub groups: GroupBreakdown,
}

pub fn evaluate_pooled(dataset: &Dataset, dets: &DetectionSet, config: &EvalConfig) -> Result<PooledReport> {
    config.validate()?;
    let kept = apply_policy(&federated_filter(dataset, dets), &config.ranking_policy);
    let matches = match_dataset(dataset, &kept, &config.iou_thresholds);
    Ok(pooled_from_matches(dataset, &matches, config))
}

struct PooledEntry {
    score: f64,
    detection_id: u64,
    category: u32,
    index: u32,
}

/// Every matched detection of a corpus in one global rank order.
struct PooledRanking<'a> {
    matches: &'a MatchSet,
    groups: Vec<FrequencyGroup>,
    merged: Vec<PooledEntry>,
}

impl<'a> PooledRanking<'a> {
    fn new(dataset: &Dataset, matches: &'a MatchSet, config: &EvalConfig) -> Self {
        let cats = matches.categories();
        let groups = cats
            .iter()
            .map(|c| {
                let category = dataset.category(c.category_id).expect("category of this dataset");
                frequency_group(category, config.frequency_thresholds)
            })
            .collect();
        let mut merged: Vec<PooledEntry> = cats
            .iter()
            .enumerate()
            .flat_map(|(ci, cm)| {
                cm.detections().iter().enumerate().map(move |(i, d)| PooledEntry {
                    score: d.score,
                    detection_id: d.detection_id,
                    category: ci as u32,
                    index: i as u32,
                })
            })
            .collect();
        par::sort_by(&mut merged, |a, b| {
            rank_order(a.score, a.detection_id, b.score, b.detection_id)
                .then((a.category, a.index).cmp(&(b.category, b.index)))
        });
        PooledRanking {
            matches,
            groups,
            merged,
        }
    }

    /// Pooled curve over the categories admitted by `keep`, or `None` when
    /// they hold no groundtruth.
    fn curve(&self, t: usize, keep: &(dyn Fn(FrequencyGroup) -> bool + Sync)) -> Option<PrCurve> {
        let cats = self.matches.categories();
        let n_gt: usize = cats
            .iter()
            .zip(&self.groups)
            .filter(|(_, g)| keep(**g))
            .map(|(c, _)| c.n_gt)
            .sum();
        let flags = self
            .merged
            .iter()
            .filter(|e| keep(self.groups[e.category as usize]))
            .filter_map(|e| match cats[e.category as usize].outcome(e.index as usize, t) {
                Outcome::Ignored => None,
                o => Some(o.is_tp()),
            });
        PrCurve::from_ranked(flags, n_gt).ok()
    }

    fn ap_per_threshold(
        &self,
        config: &EvalConfig,
        keep: &(dyn Fn(FrequencyGroup) -> bool + Sync),
    ) -> Vec<Option<f64>> {
        let thresholds: Vec<usize> = (0..self.matches.thresholds().len()).collect();
        par::map(&thresholds, |&t| {
            self.curve(t, keep).map(|c| average_precision(&c, config.interpolation))
        })
    }
}

pub fn pooled_from_matches(dataset: &Dataset, matches: &MatchSet, config: &EvalConfig) -> PooledReport {
    let ranking = PooledRanking::new(dataset, matches, config);
    let ap_per_threshold = ranking.ap_per_threshold(config, &|_| true);
    let mut breakdown = GroupBreakdown::default();
    for g in FrequencyGroup::KNOWN {
        let per_t = ranking.ap_per_threshold(config, &|x| x == g);
        breakdown.set(g, mean(per_t.into_iter().flatten()));
    }
    PooledReport {
        ap: mean(ap_per_threshold.iter().flatten().copied()),
        ap_per_threshold,
        groups: breakdown,
    }
}

/// Pooled curves at one threshold: all categories first, then each
/// frequency group that holds groundtruth. Labels are `all`, `r`, `c`, `f`.
pub fn pooled_curves(
    dataset: &Dataset,
    matches: &MatchSet,
    config: &EvalConfig,
    threshold_index: usize,
) -> Vec<(String, PrCurve)> {
    let ranking = PooledRanking::new(dataset, matches, config);
    let mut out = Vec::new();
    if let Some(c) = ranking.curve(threshold_index, &|_| true) {
        out.push(("all".to_string(), c));
    }
    for g in FrequencyGroup::KNOWN {
        if let Some(c) = ranking.curve(threshold_index, &|x| x == g) {
            out.push((g.suffix().to_string(), c));
        }
    }
    out
}
