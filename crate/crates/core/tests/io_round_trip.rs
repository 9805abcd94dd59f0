use apfix_core::io::{read_dataset, read_detections, write_dataset_to, write_detections_to};
use apfix_core::synth::{self, CorpusParams};
use proptest::prelude::*;
use std::path::Path;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dataset_and_detections_round_trip(
        seed in any::<u64>(),
        images in 1usize..15,
        categories in 1usize..10,
        federated in any::<bool>(),
    ) {
        let params = CorpusParams { images, categories, federated, ..Default::default() };
        let (ds, dets) = synth::random_corpus(&mut synth::rng(seed), &params);
        let mut buf = Vec::new();
        write_dataset_to(&ds, &mut buf).unwrap();
        let (back, _) = read_dataset(buf.as_slice(), Path::new("mem")).unwrap();
        prop_assert_eq!(&back, &ds);

        let mut buf = Vec::new();
        write_detections_to(&dets, &mut buf).unwrap();
        let (dets_back, summary) = read_detections(buf.as_slice(), &ds, Path::new("mem")).unwrap();
        prop_assert_eq!(summary.clamped_scores, 0);
        prop_assert_eq!(dets_back, dets);
    }
}
