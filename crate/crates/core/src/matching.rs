//! Greedy confidence-ordered matching of detections to groundtruth.
//!
//! Within an (image, category) pair detections are visited by score
//! descending, ties broken by ascending detection id. Each detection takes
//! the unmatched, non-ignore groundtruth of highest IoU at or above the
//! threshold (lower groundtruth id on equal IoU). Failing that it may fall
//! into an ignore region, which absorbs it without counting. Anything else
//! is a false positive, except on not-exhaustively annotated pairs where it
//! is ignored.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::model::{rank_order, BoundingBox, Dataset, Detection, DetectionSet, GroundTruthInstance};
use crate::par;

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = (a.right().min(b.right()) - a.x.max(b.x)).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    /// Matched the groundtruth instance with this id.
    TruePositive(u64),
    FalsePositive,
    Ignored,
}

impl Outcome {
    pub fn is_tp(self) -> bool {
        matches!(self, Outcome::TruePositive(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub detection_id: u64,
    pub category_id: u64,
    pub image_id: u64,
    pub score: f64,
    pub iou_threshold: f64,
    pub outcome: Outcome,
}

// Compact per-threshold outcome: a groundtruth slot index, or one of two
// sentinels.
const FP: u32 = u32::MAX;
const IGNORED: u32 = u32::MAX - 1;

/// Greedy assignment for one (image, category) pair at several thresholds.
///
/// `dets` must already be in rank order and `gts` sorted by id. Returns
/// `dets.len() * thresholds.len()` codes, row-major per detection, where a
/// code below `IGNORED` is an index into `gts`.
fn assign(dets: &[&Detection], gts: &[&GroundTruthInstance], thresholds: &[f64], not_exhaustive: bool) -> Vec<u32> {
    let n_t = thresholds.len();
    let unmatched = if not_exhaustive { IGNORED } else { FP };
    if gts.is_empty() {
        return vec![unmatched; dets.len() * n_t];
    }
    let ious: Vec<f64> = dets
        .iter()
        .flat_map(|d| gts.iter().map(move |g| iou(&d.bbox, &g.bbox)))
        .collect();
    let n_g = gts.len();
    let mut codes = vec![unmatched; dets.len() * n_t];
    let mut taken = vec![false; n_g];
    for (t_idx, &threshold) in thresholds.iter().enumerate() {
        taken.iter_mut().for_each(|t| *t = false);
        for d in 0..dets.len() {
            let row = &ious[d * n_g..(d + 1) * n_g];
            let mut best: Option<(usize, f64)> = None;
            for (g, gt) in gts.iter().enumerate() {
                if gt.ignore || taken[g] || row[g] < threshold {
                    continue;
                }
                if best.is_none_or(|(_, b)| row[g] > b) {
                    best = Some((g, row[g]));
                }
            }
            let code = if let Some((g, _)) = best {
                taken[g] = true;
                g as u32
            } else if gts.iter().zip(row).any(|(gt, &v)| gt.ignore && v >= threshold) {
                IGNORED
            } else {
                unmatched
            };
            codes[d * n_t + t_idx] = code;
        }
    }
    codes
}

/// Matches one (image, category) group at a single threshold. Records come
/// back in processing order.
pub fn match_group(
    dets: &[Detection],
    gts: &[GroundTruthInstance],
    threshold: f64,
    not_exhaustive: bool,
) -> Vec<MatchRecord> {
    let mut order: Vec<&Detection> = dets.iter().collect();
    order.sort_by(|a, b| rank_order(a.score, a.id, b.score, b.id));
    let mut targets: Vec<&GroundTruthInstance> = gts.iter().collect();
    targets.sort_by_key(|g| g.id);
    let codes = assign(&order, &targets, &[threshold], not_exhaustive);
    order
        .iter()
        .zip(codes)
        .map(|(d, code)| MatchRecord {
            detection_id: d.id,
            category_id: d.category_id,
            image_id: d.image_id,
            score: d.score,
            iou_threshold: threshold,
            outcome: decode(code, |g| targets[g].id),
        })
        .collect()
}

fn decode(code: u32, gt_id: impl Fn(usize) -> u64) -> Outcome {
    match code {
        FP => Outcome::FalsePositive,
        IGNORED => Outcome::Ignored,
        g => Outcome::TruePositive(gt_id(g as usize)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedDetection {
    pub detection_id: u64,
    pub image_id: u64,
    pub score: f64,
}

/// Match results for one category across all thresholds, in rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryMatches {
    pub category_id: u64,
    /// Non-ignore groundtruth instances on images evaluating the category.
    pub n_gt: usize,
    n_thresholds: usize,
    detections: Vec<MatchedDetection>,
    // Row-major `detections.len() x n_thresholds`; codes index `gt_ids`.
    codes: Vec<u32>,
    gt_ids: Vec<u64>,
}

impl CategoryMatches {
    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn detections(&self) -> &[MatchedDetection] {
        &self.detections
    }

    pub fn outcome(&self, det: usize, threshold_index: usize) -> Outcome {
        let code = self.codes[det * self.n_thresholds + threshold_index];
        decode(code, |g| self.gt_ids[g])
    }

    /// (score, detection id, is true positive) for every non-ignored record
    /// at a threshold, in rank order.
    pub fn labels(&self, threshold_index: usize) -> impl Iterator<Item = (f64, u64, bool)> + '_ {
        self.detections.iter().enumerate().filter_map(move |(i, d)| {
            match self.codes[i * self.n_thresholds + threshold_index] {
                IGNORED => None,
                FP => Some((d.score, d.detection_id, false)),
                _ => Some((d.score, d.detection_id, true)),
            }
        })
    }

    pub fn records(&self, threshold_index: usize, threshold: f64) -> Vec<MatchRecord> {
        self.detections
            .iter()
            .enumerate()
            .map(|(i, d)| MatchRecord {
                detection_id: d.detection_id,
                category_id: self.category_id,
                image_id: d.image_id,
                score: d.score,
                iou_threshold: threshold,
                outcome: self.outcome(i, threshold_index),
            })
            .collect()
    }
}

/// Match results for a whole corpus, one entry per dataset category in
/// dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSet {
    thresholds: Vec<f64>,
    categories: Vec<CategoryMatches>,
}

impl MatchSet {
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn categories(&self) -> &[CategoryMatches] {
        &self.categories
    }

    pub fn category(&self, category_id: u64) -> Option<&CategoryMatches> {
        self.categories.iter().find(|c| c.category_id == category_id)
    }

    pub fn records(&self, category_id: u64, threshold_index: usize) -> Vec<MatchRecord> {
        self.category(category_id)
            .map(|c| c.records(threshold_index, self.thresholds[threshold_index]))
            .unwrap_or_default()
    }

    pub fn record_count(&self) -> usize {
        self.categories.iter().map(|c| c.len()).sum::<usize>() * self.thresholds.len()
    }
}

/// Splits a slice sorted by `key` into runs of equal keys.
fn runs<T, K: PartialEq>(items: &[T], key: impl Fn(&T) -> K) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=items.len() {
        if i == items.len() || key(&items[i]) != key(&items[start]) {
            if start < i {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

/// Matches every (image, category) group at every threshold.
///
/// Detections on unknown images or categories, or outside an image's
/// evaluation universe, are skipped. The result does not depend on the
/// number of worker threads.
pub fn match_dataset(dataset: &Dataset, dets: &DetectionSet, thresholds: &[f64]) -> MatchSet {
    // (category position, image position) keyed views of both sides.
    let mut keyed_dets: Vec<(u32, u32, &Detection)> = dets
        .iter()
        .filter_map(|d| {
            let c = dataset.category_position(d.category_id)?;
            let i = dataset.image_position(d.image_id)?;
            dataset.images()[i]
                .evaluates(d.category_id)
                .then_some((c as u32, i as u32, d))
        })
        .collect();
    par::sort_by(&mut keyed_dets, |a, b| {
        (a.0, a.1)
            .cmp(&(b.0, b.1))
            .then_with(|| rank_order(a.2.score, a.2.id, b.2.score, b.2.id))
    });
    let mut keyed_gts: Vec<(u32, u32, &GroundTruthInstance)> = dataset
        .annotations()
        .iter()
        .filter_map(|g| {
            let c = dataset.category_position(g.category_id)?;
            let i = dataset.image_position(g.image_id)?;
            dataset.images()[i]
                .evaluates(g.category_id)
                .then_some((c as u32, i as u32, g))
        })
        .collect();
    keyed_gts.sort_unstable_by_key(|&(c, i, g)| (c, i, g.id));

    let n_cats = dataset.categories().len();
    let mut det_ranges = vec![0..0; n_cats];
    for r in runs(&keyed_dets, |x| x.0) {
        det_ranges[keyed_dets[r.start].0 as usize] = r.clone();
    }
    let mut gt_ranges = vec![0..0; n_cats];
    for r in runs(&keyed_gts, |x| x.0) {
        gt_ranges[keyed_gts[r.start].0 as usize] = r.clone();
    }

    let jobs: Vec<usize> = (0..n_cats).collect();
    let categories = par::map(&jobs, |&c| {
        match_category(
            dataset,
            c,
            &keyed_dets[det_ranges[c].clone()],
            &keyed_gts[gt_ranges[c].clone()],
            thresholds,
        )
    });
    MatchSet {
        thresholds: thresholds.to_vec(),
        categories,
    }
}

fn match_category(
    dataset: &Dataset,
    cat_pos: usize,
    dets: &[(u32, u32, &Detection)],
    gts: &[(u32, u32, &GroundTruthInstance)],
    thresholds: &[f64],
) -> CategoryMatches {
    let category_id = dataset.categories()[cat_pos].id;
    let n_t = thresholds.len();
    let n_gt = gts.iter().filter(|g| !g.2.ignore).count();
    let gt_ids: Vec<u64> = gts.iter().map(|g| g.2.id).collect();

    let mut detections = Vec::with_capacity(dets.len());
    let mut codes = Vec::with_capacity(dets.len() * n_t);
    let gt_runs = runs(gts, |g| g.1);
    let mut gi = 0;
    for r in runs(dets, |d| d.1) {
        let image_pos = dets[r.start].1;
        while gi < gt_runs.len() && gts[gt_runs[gi].start].1 < image_pos {
            gi += 1;
        }
        let gt_range = match gt_runs.get(gi) {
            Some(g) if gts[g.start].1 == image_pos => g.clone(),
            _ => 0..0,
        };
        let group_dets: Vec<&Detection> = dets[r].iter().map(|d| d.2).collect();
        let group_gts: Vec<&GroundTruthInstance> = gts[gt_range.clone()].iter().map(|g| g.2).collect();
        let not_exhaustive = dataset.images()[image_pos as usize].is_not_exhaustive(category_id);
        let group_codes = assign(&group_dets, &group_gts, thresholds, not_exhaustive);
        detections.extend(group_dets.iter().map(|d| MatchedDetection {
            detection_id: d.id,
            image_id: d.image_id,
            score: d.score,
        }));
        // Re-base gt slot indices from the group to the category.
        codes.extend(
            group_codes
                .into_iter()
                .map(|c| if c >= IGNORED { c } else { c + gt_range.start as u32 }),
        );
    }

    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        let (a, b) = (&detections[a], &detections[b]);
        rank_order(a.score, a.detection_id, b.score, b.detection_id)
    });
    let sorted_dets = order.iter().map(|&i| detections[i]).collect();
    let sorted_codes = order
        .iter()
        .flat_map(|&i| codes[i * n_t..(i + 1) * n_t].iter().copied())
        .collect();
    CategoryMatches {
        category_id,
        n_gt,
        n_thresholds: n_t,
        detections: sorted_dets,
        codes: sorted_codes,
        gt_ids,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn det(id: u64, b: BoundingBox, score: f64) -> Detection {
        Detection {
            id,
            image_id: 1,
            category_id: 1,
            bbox: b,
            score,
        }
    }

    fn gt(id: u64, b: BoundingBox, ignore: bool) -> GroundTruthInstance {
        GroundTruthInstance {
            id,
            image_id: 1,
            category_id: 1,
            bbox: b,
            ignore,
        }
    }

    #[test]
    fn iou_examples() {
        let a = bx(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bx(5.0, 5.0, 1.0, 1.0)), 0.0);
        assert!((iou(&a, &bx(1.0, 1.0, 2.0, 2.0)) - 1.0 / 7.0).abs() < 1e-15);
        let empty = bx(0.0, 0.0, 0.0, 0.0);
        assert_eq!(iou(&empty, &empty), 0.0);
    }

    #[test]
    fn single_true_positive() {
        let g = gt(10, bx(0.0, 0.0, 10.0, 10.0), false);
        let d = det(0, bx(0.0, 0.0, 10.0, 9.0), 0.7);
        let r = match_group(&[d], &[g], 0.5, false);
        assert_eq!(r[0].outcome, Outcome::TruePositive(10));
    }

    #[test]
    fn one_to_one_constraint() {
        let g = gt(10, bx(0.0, 0.0, 10.0, 10.0), false);
        let lo = det(0, bx(0.0, 0.0, 10.0, 9.0), 0.6);
        let hi = det(1, bx(0.0, 0.0, 9.0, 10.0), 0.9);
        let r = match_group(&[lo, hi], &[g], 0.5, false);
        assert_eq!(r[0].detection_id, 1);
        assert_eq!(r[0].outcome, Outcome::TruePositive(10));
        assert_eq!(r[1].outcome, Outcome::FalsePositive);
    }

    #[test]
    fn threshold_is_inclusive() {
        let g = gt(1, bx(0.0, 0.0, 2.0, 1.0), false);
        let d = det(0, bx(0.0, 0.0, 1.0, 1.0), 0.5);
        assert_eq!(iou(&g.bbox, &d.bbox), 0.5);
        assert!(match_group(&[d], &[g], 0.5, false)[0].outcome.is_tp());
    }

    #[test]
    fn equal_iou_prefers_lower_gt_id() {
        let d = det(0, bx(1.0, 0.0, 2.0, 2.0), 0.9);
        let left = gt(7, bx(0.0, 0.0, 2.0, 2.0), false);
        let right = gt(3, bx(2.0, 0.0, 2.0, 2.0), false);
        let r = match_group(&[d], &[left, right], 0.3, false);
        assert_eq!(r[0].outcome, Outcome::TruePositive(3));
    }

    #[test]
    fn ignore_region_only_after_real_targets() {
        let crowd = gt(1, bx(0.0, 0.0, 10.0, 10.0), true);
        let real = gt(2, bx(0.0, 0.0, 10.0, 8.0), false);
        let a = det(0, bx(0.0, 0.0, 10.0, 10.0), 0.9);
        let b = det(1, bx(0.0, 0.0, 10.0, 10.0), 0.8);
        let r = match_group(&[a, b], &[crowd, real], 0.5, false);
        assert_eq!(r[0].outcome, Outcome::TruePositive(2));
        assert_eq!(r[1].outcome, Outcome::Ignored);
    }

    #[test]
    fn not_exhaustive_pairs_ignore_unmatched() {
        let g = gt(1, bx(0.0, 0.0, 10.0, 10.0), false);
        let a = det(0, bx(0.0, 0.0, 10.0, 10.0), 0.9);
        let b = det(1, bx(50.0, 50.0, 10.0, 10.0), 0.8);
        let r = match_group(&[a, b], &[g], 0.5, true);
        assert!(r[0].outcome.is_tp());
        assert_eq!(r[1].outcome, Outcome::Ignored);
    }
}
