use std::collections::{BTreeSet, HashSet};

use apfix_core::metrics::{evaluate, subset_evaluate, sweep, SweepAxis};
use apfix_core::synth::{self, CorpusParams};
use apfix_core::{Category, Dataset, EvalConfig, FrequencyGroup, ImageRecord, RankingPolicy};
use rand::Rng;

#[test]
fn sweep_rows_equal_standalone_evaluations() {
    let (ds, dets) = synth::random_corpus(
        &mut synth::rng(5),
        &CorpusParams {
            images: 20,
            ..Default::default()
        },
    );
    let values = [Some(1), Some(3), Some(10), None];
    for axis in [SweepAxis::DetsPerImage, SweepAxis::DetsPerClass] {
        let table = sweep(&ds, &dets, axis, &values, &EvalConfig::ap_old()).unwrap();
        assert_eq!(table.rows.len(), values.len());
        for row in &table.rows {
            let mut cfg = EvalConfig::ap_old();
            match axis {
                SweepAxis::DetsPerImage => cfg.ranking_policy.max_dets_per_image = row.limit,
                SweepAxis::DetsPerClass => cfg.ranking_policy.max_dets_per_class = row.limit,
            }
            assert_eq!(row.report, evaluate(&ds, &dets, &cfg).unwrap());
        }
    }
}

#[test]
fn raising_image_limit_never_drops_kept_detections() {
    let (ds, dets) = synth::random_corpus(
        &mut synth::rng(6),
        &CorpusParams {
            images: 20,
            ..Default::default()
        },
    );
    let values: Vec<Option<usize>> = (1..12).map(Some).chain([None]).collect();
    let table = sweep(&ds, &dets, SweepAxis::DetsPerImage, &values, &EvalConfig::ap_old()).unwrap();
    let kept: Vec<usize> = table.rows.iter().map(|r| r.report.counts.detections_kept).collect();
    assert!(kept.windows(2).all(|w| w[0] <= w[1]), "{kept:?}");
}

/// Builds the restricted corpus from scratch rather than through the library.
fn manual_restrict(ds: &Dataset, keep: &HashSet<u64>) -> Dataset {
    let filter = |s: &BTreeSet<u64>| s.iter().copied().filter(|c| keep.contains(c)).collect();
    let images: Vec<ImageRecord> = ds
        .images()
        .iter()
        .map(|i| ImageRecord {
            id: i.id,
            positive_category_ids: filter(&i.positive_category_ids),
            negative_category_ids: filter(&i.negative_category_ids),
            not_exhaustive_category_ids: filter(&i.not_exhaustive_category_ids),
            federated: i.federated,
        })
        .collect();
    let cats: Vec<Category> = ds
        .categories()
        .iter()
        .filter(|c| keep.contains(&c.id))
        .cloned()
        .collect();
    let anns = ds
        .annotations()
        .iter()
        .filter(|a| keep.contains(&a.category_id))
        .copied()
        .collect();
    Dataset::new(images, cats, anns).unwrap()
}

#[test]
fn subset_matches_manual_restriction() {
    let mut rng = synth::rng(7);
    for _ in 0..30 {
        let (mut ds, dets) = synth::random_corpus(
            &mut rng,
            &CorpusParams {
                images: 15,
                categories: 9,
                ..Default::default()
            },
        );
        // Spread categories over the three groups.
        let cats: Vec<Category> = ds
            .categories()
            .iter()
            .map(|c| Category {
                image_count: Some([3, 50, 500][rng.gen_range(0..3)]),
                ..c.clone()
            })
            .collect();
        ds = Dataset::new(ds.images().to_vec(), cats, ds.annotations().to_vec()).unwrap();
        let cfg = EvalConfig {
            ranking_policy: RankingPolicy::new(Some(4), None),
            ..EvalConfig::ap_old()
        };
        for groups in [
            BTreeSet::from([FrequencyGroup::Rare]),
            BTreeSet::from([FrequencyGroup::Common, FrequencyGroup::Frequent]),
        ] {
            let keep: HashSet<u64> = ds
                .categories()
                .iter()
                .filter(|c| groups.contains(&cfg.frequency_thresholds.classify(c.image_count)))
                .map(|c| c.id)
                .collect();
            let restricted = manual_restrict(&ds, &keep);
            let kept_dets = dets.filtered(|d| keep.contains(&d.category_id));
            let want = evaluate(&restricted, &kept_dets, &cfg).unwrap();
            let got = subset_evaluate(&ds, &dets, &groups, &cfg).unwrap();
            assert_eq!(got.ap, want.ap);
            assert_eq!(got.categories, want.categories);
        }
    }
}

#[test]
fn gameable_fixture_rewards_class_limit() {
    let (ds, dets) = synth::gameable_corpus();
    assert_eq!(ds.images().len(), 50);
    assert_eq!(ds.categories().len(), 30);
    let base = EvalConfig {
        ranking_policy: RankingPolicy::new(Some(synth::GAMEABLE_DETS_PER_IMAGE), None),
        ..EvalConfig::ap_old()
    };
    let gamed = EvalConfig {
        ranking_policy: RankingPolicy::new(
            Some(synth::GAMEABLE_DETS_PER_IMAGE),
            Some(synth::GAMEABLE_DETS_PER_CLASS),
        ),
        ..EvalConfig::ap_old()
    };
    let a = evaluate(&ds, &dets, &base).unwrap();
    let b = evaluate(&ds, &dets, &gamed).unwrap();
    let delta = b.ap.unwrap() - a.ap.unwrap();
    assert!(delta >= 0.005, "delta {delta}");
    assert!(b.group_ap(FrequencyGroup::Rare).unwrap() > a.group_ap(FrequencyGroup::Rare).unwrap());
    // No class limit: both policies coincide.
    let same = evaluate(&ds, &dets, &base).unwrap();
    assert_eq!(same, a);
}
