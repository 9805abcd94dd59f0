mod support;

use apfix_core::matching::match_dataset;
use apfix_core::metrics::{evaluate, evaluate_pooled, federated_filter};
use apfix_core::ranking::apply_policy;
use apfix_core::synth::{self, CorpusParams};
use apfix_core::{DetectionSet, EvalConfig, FrequencyGroup, Interpolation};
use rand::Rng;
use support::oracle_ap;

fn exact(mut cfg: EvalConfig) -> EvalConfig {
    cfg.interpolation = Interpolation::Exact;
    cfg
}

#[test]
fn single_category_pool_equals_class_ap() {
    let mut rng = synth::rng(91);
    let mut compared = 0;
    for _ in 0..200 {
        let params = CorpusParams {
            images: rng.gen_range(1..10),
            categories: 1,
            ..Default::default()
        };
        let (ds, dets) = synth::random_corpus(&mut rng, &params);
        for cfg in [EvalConfig::ap_pool(), exact(EvalConfig::ap_pool())] {
            let report = evaluate(&ds, &dets, &cfg).unwrap();
            let pooled = report.pooled.as_ref().unwrap();
            match (report.ap, pooled.ap) {
                (Some(a), Some(p)) => {
                    assert!((a - p).abs() <= 1e-12, "{a} vs {p}");
                    compared += 1;
                }
                (a, p) => assert_eq!(a, p),
            }
        }
    }
    assert!(compared > 300);
}

#[test]
fn perfect_detector_pools_to_one() {
    let mut rng = synth::rng(92);
    for _ in 0..100 {
        let params = CorpusParams {
            images: rng.gen_range(1..15),
            categories: rng.gen_range(1..10),
            ..Default::default()
        };
        let (ds, _) = synth::random_corpus(&mut rng, &params);
        let dets = DetectionSet::from_entries(
            ds.annotations()
                .iter()
                .filter(|a| !a.ignore && ds.evaluates(a.image_id, a.category_id))
                .map(|a| (a.image_id, a.category_id, a.bbox, rng.gen_range(0.01..1.0))),
        );
        for cfg in [EvalConfig::ap_pool(), exact(EvalConfig::ap_pool())] {
            let pooled = evaluate_pooled(&ds, &dets, &cfg).unwrap();
            if ds
                .annotations()
                .iter()
                .any(|a| !a.ignore && ds.evaluates(a.image_id, a.category_id))
            {
                assert_eq!(pooled.ap, Some(1.0));
            } else {
                assert_eq!(pooled.ap, None);
            }
        }
    }
}

#[test]
fn pooled_matches_merged_curve_oracle() {
    let mut rng = synth::rng(93);
    for _ in 0..100 {
        let params = CorpusParams {
            images: rng.gen_range(2..12),
            categories: rng.gen_range(2..8),
            score_levels: 20,
            ..Default::default()
        };
        let (ds, dets) = synth::random_corpus(&mut rng, &params);
        let cfg = exact(EvalConfig::ap_pool());
        let pooled = evaluate_pooled(&ds, &dets, &cfg).unwrap();
        let kept = apply_policy(&federated_filter(&ds, &dets), &cfg.ranking_policy);
        let matches = match_dataset(&ds, &kept, &cfg.iou_thresholds);
        let groups = ds.frequency_groups(cfg.frequency_thresholds);
        let group_of = |id: u64| groups[ds.category_position(id).unwrap()];
        let pool_for = |t: usize, keep: &dyn Fn(FrequencyGroup) -> bool| -> Option<f64> {
            let mut entries: Vec<(f64, u64, bool)> = Vec::new();
            let mut n_gt = 0;
            for cm in matches.categories() {
                if !keep(group_of(cm.category_id)) {
                    continue;
                }
                n_gt += cm.n_gt;
                entries.extend(cm.labels(t));
            }
            entries.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let flags: Vec<bool> = entries.iter().map(|e| e.2).collect();
            (n_gt > 0).then(|| oracle_ap(&flags, n_gt))
        };
        for t in 0..cfg.iou_thresholds.len() {
            let want = pool_for(t, &|_| true);
            let got = pooled.ap_per_threshold[t];
            match (want, got) {
                (Some(w), Some(g)) => assert!((w - g).abs() <= 1e-12),
                (w, g) => assert_eq!(w, g),
            }
        }
        for g in FrequencyGroup::KNOWN {
            let per_t: Vec<f64> = (0..cfg.iou_thresholds.len())
                .filter_map(|t| pool_for(t, &|x| x == g))
                .collect();
            let want = (!per_t.is_empty()).then(|| per_t.iter().sum::<f64>() / per_t.len() as f64);
            match (want, pooled.groups.get(g)) {
                (Some(w), Some(v)) => assert!((w - v).abs() <= 1e-12),
                (w, v) => assert_eq!(w, v),
            }
        }
    }
}
