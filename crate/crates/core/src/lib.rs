//! Batch evaluation of large-vocabulary object detectors.
//!
//! The crate covers the full pipeline from COCO/LVIS-style JSON files to
//! reports:
//!
//! * [`io`] parses groundtruth and result files (the detections file is
//!   streamed) and writes reports and calibration models.
//! * [`ranking`] decides which detections survive: a per-image cap
//!   (`AP^Old`), a dataset-wide per-class cap (`AP^Fixed`), or both.
//! * [`matching`] greedily assigns detections to groundtruth per
//!   (image, category, IoU threshold).
//! * [`metrics`] builds precision/recall curves, macro-averaged AP, pooled
//!   (micro-averaged) AP, frequency-group breakdowns, sweeps and score
//!   distributions.
//! * [`calibration`] fits per-category score calibrators from matched
//!   true/false-positive labels.
//!
//! [`toy`] and [`synth`] provide the small embedded fixtures and seeded
//! random corpora used by the command line tool, the browser demo and the
//! test suites.

pub mod calibration;
pub mod error;
pub mod io;
pub mod matching;
pub mod metrics;
pub mod model;
mod par;
pub mod ranking;
pub mod synth;
pub mod toy;

pub use error::{Error, Result};
pub use model::{
    BoundingBox, Category, Dataset, Detection, DetectionSet, EvalConfig, EvalUniverse, FrequencyGroup,
    FrequencyThresholds, GroundTruthInstance, ImageRecord, Interpolation,
};
pub use ranking::RankingPolicy;
