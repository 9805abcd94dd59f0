use apfix_web::{calibration_json, gameability_json, toy_policy_json};
use serde_json::Value;

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.unwrap()).unwrap()
}

#[test]
fn toy_policy_reproduces_both_rankings() {
    let one = parse(toy_policy_json(2, 0, true));
    let two = parse(toy_policy_json(2, 1, true));
    assert!((one["expected_ap"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!((two["expected_ap"].as_f64().unwrap() - 0.65).abs() < 1e-9);
    assert!((two["expected_ap_b"].as_f64().unwrap() - 0.8).abs() < 1e-9);
    assert_eq!(two["scenarios"].as_array().unwrap().len(), 2);
}

#[test]
fn gameability_shows_the_class_cut_gain() {
    let v = parse(gameability_json(15, 20));
    assert!(v["delta"].as_f64().unwrap() > 0.005);
    let same = parse(gameability_json(15, 0));
    assert_eq!(same["delta"].as_f64(), Some(0.0));
    assert_eq!(same["gamed"]["dets_per_class"], Value::Null);
}

#[test]
fn calibration_improves_pooled_ap_and_returns_curves() {
    for method in ["platt", "isotonic", "histbin", "beta", "bbq"] {
        let v = parse(calibration_json(method, 1000));
        assert!(
            v["pooled_ap_after"].as_f64() > v["pooled_ap_before"].as_f64(),
            "{method}"
        );
        let curves = v["curves"].as_array().unwrap();
        assert_eq!(curves.len(), 2);
        assert_eq!(curves[0]["points"].as_array().unwrap().len(), 51);
    }
}

#[test]
fn unknown_method_is_an_error() {
    assert!(calibration_json("softmax", 100).is_err());
}
