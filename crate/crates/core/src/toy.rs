//! Two-class, one-image fixture showing how a shared per-image budget
//! rewards an unintuitive ranking.
//!
//! A perfectly calibrated model predicts A1 and A2 with confidence 1.0 and
//! B1 with confidence 0.8. Class A has two instances, both found. Class B
//! has one instance, which B1 hits with probability 0.8 (scenario 1) and
//! misses otherwise (scenario 2). With two detections allowed per image,
//! ranking by confidence keeps {A1, A2}; capping each class at one
//! detection first keeps {A1, B1} and scores higher in expectation.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::{evaluate, EvalReport};
use crate::model::{
    BoundingBox, Category, Dataset, DetectionSet, EvalConfig, GroundTruthInstance, ImageRecord, Interpolation,
};
use crate::ranking::RankingPolicy;

pub const IMAGE: u64 = 1;
pub const CAT_A: u64 = 1;
pub const CAT_B: u64 = 2;
pub const A1: u64 = 0;
pub const A2: u64 = 1;
pub const B1: u64 = 2;
/// B1's confidence, which for a calibrated model is its hit probability.
pub const B1_SCORE: f64 = 0.8;

fn bx(x: f64, y: f64) -> BoundingBox {
    BoundingBox::new(x, y, 10.0, 10.0).expect("valid box")
}

pub fn predictions() -> DetectionSet {
    DetectionSet::from_entries([
        (IMAGE, CAT_A, bx(0.0, 0.0), 1.0),
        (IMAGE, CAT_A, bx(20.0, 0.0), 1.0),
        (IMAGE, CAT_B, bx(50.0, 50.0), B1_SCORE),
    ])
}

/// Groundtruth for the scenario where B1 is correct (`true`) or not.
pub fn scenario(b1_correct: bool) -> Dataset {
    let categories = vec![
        Category {
            id: CAT_A,
            name: "A".into(),
            image_count: None,
        },
        Category {
            id: CAT_B,
            name: "B".into(),
            image_count: None,
        },
    ];
    let b_box = if b1_correct { bx(50.0, 50.0) } else { bx(80.0, 80.0) };
    let gt = |id, category_id, bbox| GroundTruthInstance {
        id,
        image_id: IMAGE,
        category_id,
        bbox,
        ignore: false,
    };
    let annotations = vec![
        gt(1, CAT_A, bx(0.0, 0.0)),
        gt(2, CAT_A, bx(20.0, 0.0)),
        gt(3, CAT_B, b_box),
    ];
    Dataset::new(vec![ImageRecord::exhaustive(IMAGE)], categories, annotations).expect("toy dataset is valid")
}

/// `(probability, b1_correct)` for both scenarios.
pub fn scenarios() -> [(f64, bool); 2] {
    [(B1_SCORE, true), (1.0 - B1_SCORE, false)]
}

/// Confidence order under the two-per-image cap.
pub fn ranking_one() -> RankingPolicy {
    RankingPolicy::new(Some(2), None)
}

/// One detection per class, then the two-per-image cap.
pub fn ranking_two() -> RankingPolicy {
    RankingPolicy::new(Some(2), Some(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub probability: f64,
    pub b1_correct: bool,
    pub ap: f64,
    pub ap_a: f64,
    pub ap_b: f64,
    #[serde(skip)]
    pub report: Option<Box<EvalReport>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyOutcome {
    pub policy: RankingPolicy,
    pub scenarios: Vec<ScenarioOutcome>,
    pub expected_ap: f64,
    pub expected_ap_a: f64,
    pub expected_ap_b: f64,
}

/// Evaluates both scenarios under `policy` with exact integration at IoU
/// 0.5 and combines them by scenario probability.
pub fn evaluate_policy(policy: RankingPolicy) -> Result<ToyOutcome> {
    evaluate_policy_with(policy, Interpolation::Exact)
}

pub fn evaluate_policy_with(policy: RankingPolicy, interpolation: Interpolation) -> Result<ToyOutcome> {
    let dets = predictions();
    let mut config = EvalConfig::single_threshold(policy);
    config.interpolation = interpolation;
    let mut scenarios = Vec::new();
    for (probability, b1_correct) in self::scenarios() {
        let report = evaluate(&scenario(b1_correct), &dets, &config)?;
        let ap_of = |c| report.category(c).and_then(|r| r.ap).unwrap_or(0.0);
        scenarios.push(ScenarioOutcome {
            probability,
            b1_correct,
            ap: report.ap.unwrap_or(0.0),
            ap_a: ap_of(CAT_A),
            ap_b: ap_of(CAT_B),
            report: Some(Box::new(report)),
        });
    }
    let expect = |f: fn(&ScenarioOutcome) -> f64| scenarios.iter().map(|s| s.probability * f(s)).sum();
    Ok(ToyOutcome {
        policy,
        expected_ap: expect(|s| s.ap),
        expected_ap_a: expect(|s| s.ap_a),
        expected_ap_b: expect(|s| s.ap_b),
        scenarios,
    })
}
