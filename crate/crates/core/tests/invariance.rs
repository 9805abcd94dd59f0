mod support;

use apfix_core::calibration::{apply_calibration, fit_per_class, CalibrationMethod, FitOptions};
use apfix_core::metrics::evaluate;
use apfix_core::synth::{self, CorpusParams};
use apfix_core::{EvalConfig, Interpolation, RankingPolicy};
use rand::Rng;
use support::{curves, random_transforms, transform_scores};

fn configs() -> Vec<EvalConfig> {
    let mut exact = EvalConfig::ap_fixed();
    exact.interpolation = Interpolation::Exact;
    let mut tight = EvalConfig::ap_fixed();
    // A class limit that binds on these corpora.
    tight.ranking_policy = RankingPolicy::new(None, Some(4));
    vec![EvalConfig::ap_fixed(), exact, tight]
}

#[test]
fn ap_fixed_is_invariant_under_per_class_monotone_transforms() {
    let mut rng = synth::rng(77);
    for corpus in 0..100 {
        let params = CorpusParams {
            images: rng.gen_range(2..12),
            categories: rng.gen_range(1..8),
            score_levels: 1000,
            ..Default::default()
        };
        let (ds, dets) = synth::random_corpus(&mut rng, &params);
        let fs = random_transforms(&mut rng, params.categories);
        let transformed = transform_scores(&ds, &dets, &fs);
        for cfg in configs() {
            assert_eq!(
                curves(&ds, &dets, &cfg),
                curves(&ds, &transformed, &cfg),
                "corpus {corpus}"
            );
            let before = evaluate(&ds, &dets, &cfg).unwrap();
            let after = evaluate(&ds, &transformed, &cfg).unwrap();
            for (x, y) in before.categories.iter().zip(&after.categories) {
                assert_eq!(x.category_id, y.category_id);
                match (x.ap, y.ap) {
                    (Some(p), Some(q)) => assert!((p - q).abs() <= 1e-12),
                    (p, q) => assert_eq!(p, q),
                }
            }
            match (before.ap, after.ap) {
                (Some(p), Some(q)) => assert!((p - q).abs() <= 1e-12),
                (p, q) => assert_eq!(p, q),
            }
        }
    }
}

#[test]
fn monotone_calibrators_preserve_per_class_ap() {
    let mut rng = synth::rng(78);
    let mut checked = 0;
    for _ in 0..20 {
        let params = CorpusParams {
            images: 30,
            categories: 4,
            score_levels: 1000,
            ..Default::default()
        };
        let (ds, dets) = synth::random_corpus(&mut rng, &params);
        let cfg = EvalConfig::ap_fixed();
        let base = evaluate(&ds, &dets, &cfg).unwrap();
        for method in [
            CalibrationMethod::Platt,
            CalibrationMethod::Beta,
            CalibrationMethod::Isotonic,
        ] {
            let model = fit_per_class(&ds, &dets, method, &FitOptions::default());
            let (calibrated, _) = apply_calibration(&dets, &model);
            let after = evaluate(&ds, &calibrated, &cfg).unwrap();
            for (x, y) in base.categories.iter().zip(&after.categories) {
                let c = &model.categories[&x.category_id];
                assert!(c.fit.monotone);
                // A non-decreasing map that keeps this category's distinct
                // scores distinct preserves its ranking exactly.
                let mut scores: Vec<f64> = dets
                    .iter()
                    .filter(|d| d.category_id == x.category_id)
                    .map(|d| d.score)
                    .collect();
                scores.sort_by(f64::total_cmp);
                scores.dedup();
                let mapped: Vec<f64> = scores.iter().map(|&s| c.calibrator.apply(s)).collect();
                if mapped.windows(2).all(|w| w[0] < w[1]) {
                    checked += 1;
                    match (x.ap, y.ap) {
                        (Some(p), Some(q)) => assert!((p - q).abs() <= 1e-12, "{method}: {p} vs {q}"),
                        (p, q) => assert_eq!(p, q),
                    }
                }
            }
        }
    }
    assert!(checked > 100, "only {checked} categories checked");
}
