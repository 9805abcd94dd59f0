use apfix_core::calibration::{fit_per_class, CalibrationMethod, FitOptions};
use apfix_core::metrics::evaluate;
use apfix_core::synth::{self, CorpusParams};
use apfix_core::EvalConfig;

fn run_all(seed: u64) -> String {
    let params = CorpusParams {
        images: 40,
        categories: 12,
        score_levels: 30,
        ..Default::default()
    };
    let (ds, dets) = synth::random_corpus(&mut synth::rng(seed), &params);
    let mut out = String::new();
    for cfg in [EvalConfig::ap_old(), EvalConfig::ap_fixed(), EvalConfig::ap_pool()] {
        out += &serde_json::to_string(&evaluate(&ds, &dets, &cfg).unwrap()).unwrap();
    }
    for m in CalibrationMethod::ALL {
        out += &serde_json::to_string(&fit_per_class(&ds, &dets, m, &FitOptions::default())).unwrap();
    }
    out
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let one = pool(1);
    let eight = pool(8);
    for seed in 0..20 {
        let a = one.install(|| run_all(seed));
        let b = eight.install(|| run_all(seed));
        assert!(a == b, "seed {seed} differs across thread counts");
    }
}
