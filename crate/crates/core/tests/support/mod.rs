//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use std::collections::HashSet;

use apfix_core::matching::{match_dataset, Outcome};
use apfix_core::metrics::{federated_filter, PrCurve};
use apfix_core::ranking::apply_policy;
use apfix_core::{BoundingBox, Dataset, Detection, DetectionSet, EvalConfig, GroundTruthInstance};
use rand::Rng;

/// Integer box: x, y, w, h.
pub type IBox = [i64; 4];

pub struct Instance {
    pub dets: Vec<(u64, IBox, f64)>,
    pub gts: Vec<(u64, IBox, bool)>,
    pub not_exhaustive: bool,
}

pub fn random_box<R: Rng>(rng: &mut R) -> IBox {
    [
        rng.gen_range(0..8),
        rng.gen_range(0..8),
        rng.gen_range(1..7),
        rng.gen_range(1..7),
    ]
}

pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let n_det = rng.gen_range(0..=5);
    let n_gt = rng.gen_range(0..=5);
    // Few score levels so ties are common.
    let dets = (0..n_det)
        .map(|i| (i as u64, random_box(rng), f64::from(rng.gen_range(0..4u8)) / 4.0))
        .collect();
    let mut ids: Vec<u64> = (1..=20).collect();
    let gts = (0..n_gt)
        .map(|_| {
            let id = ids.swap_remove(rng.gen_range(0..ids.len()));
            (id, random_box(rng), rng.gen_bool(0.2))
        })
        .collect();
    Instance {
        dets,
        gts,
        not_exhaustive: rng.gen_bool(0.2),
    }
}

/// Intersection and union areas in integers; IoU is their single f64 quotient.
pub fn oracle_iou(a: IBox, b: IBox) -> f64 {
    let iw = ((a[0] + a[2]).min(b[0] + b[2]) - a[0].max(b[0])).max(0);
    let ih = ((a[1] + a[3]).min(b[1] + b[3]) - a[1].max(b[1])).max(0);
    let inter = iw * ih;
    let union = a[2] * a[3] + b[2] * b[3] - inter;
    inter as f64 / union as f64
}

/// Plain greedy matching written from the rules: detections by score
/// descending then id ascending; each takes the free non-ignore target of
/// highest IoU at or above the threshold (lowest id on ties); otherwise an
/// ignore region at or above the threshold makes it Ignored; otherwise it is
/// a false positive, or Ignored when the pair is not exhaustively annotated.
pub fn oracle(inst: &Instance, t: f64) -> Vec<(u64, Outcome)> {
    let mut order: Vec<&(u64, IBox, f64)> = inst.dets.iter().collect();
    order.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
    let mut used: HashSet<u64> = HashSet::new();
    let mut out = Vec::new();
    for d in order {
        let mut candidates: Vec<(f64, u64)> = inst
            .gts
            .iter()
            .filter(|g| !g.2 && !used.contains(&g.0))
            .map(|g| (oracle_iou(d.1, g.1), g.0))
            .filter(|(v, _)| *v >= t)
            .collect();
        candidates.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let outcome = if let Some(&(_, id)) = candidates.first() {
            used.insert(id);
            Outcome::TruePositive(id)
        } else if inst.not_exhaustive || inst.gts.iter().any(|g| g.2 && oracle_iou(d.1, g.1) >= t) {
            Outcome::Ignored
        } else {
            Outcome::FalsePositive
        };
        out.push((d.0, outcome));
    }
    out
}

pub fn to_box(b: IBox) -> BoundingBox {
    BoundingBox::new(b[0] as f64, b[1] as f64, b[2] as f64, b[3] as f64).unwrap()
}

pub fn production_inputs(inst: &Instance) -> (Vec<Detection>, Vec<GroundTruthInstance>) {
    let dets = inst
        .dets
        .iter()
        .map(|&(id, b, score)| Detection {
            id,
            image_id: 1,
            category_id: 1,
            bbox: to_box(b),
            score,
        })
        .collect();
    let gts = inst
        .gts
        .iter()
        .map(|&(id, b, ignore)| GroundTruthInstance {
            id,
            image_id: 1,
            category_id: 1,
            bbox: to_box(b),
            ignore,
        })
        .collect();
    (dets, gts)
}

/// Exact AP from rank-ordered flags: each true positive contributes
/// 1/n_gt times the best precision at its rank or later.
pub fn oracle_ap(flags: &[bool], n_gt: usize) -> f64 {
    let prec: Vec<f64> = (0..flags.len())
        .map(|i| flags[..=i].iter().filter(|&&f| f).count() as f64 / (i + 1) as f64)
        .collect();
    (0..flags.len())
        .filter(|&i| flags[i])
        .map(|i| prec[i..].iter().cloned().fold(0.0, f64::max))
        .sum::<f64>()
        / n_gt as f64
}

/// Least-squares monotone fit by the min-max formula
/// `f_i = max_{j <= i} min_{k >= i} mean(y_j..=y_k)`, weighted by `w`.
pub fn isotonic_oracle(y: &[f64], w: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mean = |j: usize, k: usize| {
        let sw: f64 = w[j..=k].iter().sum();
        y[j..=k].iter().zip(&w[j..=k]).map(|(a, b)| a * b).sum::<f64>() / sw
    };
    (0..n)
        .map(|i| {
            (0..=i)
                .map(|j| (i..n).map(|k| mean(j, k)).fold(f64::INFINITY, f64::min))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Per-category PR curves at every threshold, keyed by category id.
pub fn curves(ds: &Dataset, dets: &DetectionSet, cfg: &EvalConfig) -> Vec<(u64, Vec<Option<PrCurve>>)> {
    let kept = apply_policy(&federated_filter(ds, dets), &cfg.ranking_policy);
    let matches = match_dataset(ds, &kept, &cfg.iou_thresholds);
    matches
        .categories()
        .iter()
        .map(|cm| {
            let per_t = (0..cfg.iou_thresholds.len())
                .map(|t| PrCurve::from_ranked(cm.labels(t).map(|l| l.2), cm.n_gt).ok())
                .collect();
            (cm.category_id, per_t)
        })
        .collect()
}

/// One strictly increasing map per category, drawn from a few families.
pub fn random_transforms<R: Rng>(rng: &mut R, n: usize) -> Vec<Box<dyn Fn(f64) -> f64>> {
    (0..n)
        .map(|_| -> Box<dyn Fn(f64) -> f64> {
            let a = rng.gen_range(0.1..3.0);
            let b = rng.gen_range(-2.0..2.0);
            match rng.gen_range(0..4) {
                0 => Box::new(move |s| a * s + b),
                1 => Box::new(move |s: f64| s.powf(a)),
                2 => Box::new(move |s: f64| 1.0 / (1.0 + (-(a * 4.0 * (s - 0.5) + b)).exp())),
                _ => Box::new(move |s: f64| (a * s).exp() + b),
            }
        })
        .collect()
}

/// Applies `fs[position of category]` to every score.
pub fn transform_scores(ds: &Dataset, dets: &DetectionSet, fs: &[Box<dyn Fn(f64) -> f64>]) -> DetectionSet {
    dets.iter()
        .map(|d| {
            let mut d = *d;
            d.score = fs[ds.category_position(d.category_id).unwrap()](d.score);
            d
        })
        .collect()
}
