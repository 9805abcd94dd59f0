use apfix_core::calibration::{
    apply_calibration, fit_per_class, label_for_calibration, mean_per_class_ece, CalibrationMethod, FitOptions,
};
use apfix_core::metrics::evaluate_pooled;
use apfix_core::synth;
use apfix_core::EvalConfig;

const ECE_BINS: usize = 15;

#[test]
fn per_class_calibration_raises_pooled_ap_on_held_out_split() {
    let (fit_ds, fit_dets) = synth::shifted_scale_corpus(1, 2000);
    let (target_ds, target_dets) = synth::shifted_scale_corpus(2, 2000);
    let cfg = EvalConfig::ap_pool();
    let before = evaluate_pooled(&target_ds, &target_dets, &cfg).unwrap().ap.unwrap();
    let ece_before = mean_per_class_ece(&label_for_calibration(&target_ds, &target_dets), ECE_BINS).unwrap();
    for method in CalibrationMethod::ALL {
        let model = fit_per_class(&fit_ds, &fit_dets, method, &FitOptions::default());
        let (calibrated, _) = apply_calibration(&target_dets, &model);
        let after = evaluate_pooled(&target_ds, &calibrated, &cfg).unwrap().ap.unwrap();
        let ece_after = mean_per_class_ece(&label_for_calibration(&target_ds, &calibrated), ECE_BINS).unwrap();
        assert!(after > before, "{method}: pooled AP {before} -> {after}");
        assert!(
            ece_after <= 0.5 * ece_before,
            "{method}: ECE {ece_before} -> {ece_after}"
        );
    }
}
