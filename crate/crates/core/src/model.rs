//! Domain types shared by every stage of the pipeline.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranking::RankingPolicy;

/// Axis-aligned box in COCO `[x, y, w, h]` form (left, top, width, height).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    /// Returns `None` for non-finite coordinates or a negative extent.
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Option<Self> {
        let finite = x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite();
        (finite && w >= 0.0 && h >= 0.0).then_some(BoundingBox { x, y, w, h })
    }

    pub fn from_xywh(v: [f64; 4]) -> Option<Self> {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_xywh(self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: u64,
    pub name: String,
    /// Number of training images containing the category, when known.
    pub image_count: Option<u64>,
}

/// Rare / common / frequent binning of categories by training-image count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyGroup {
    Rare,
    Common,
    Frequent,
    Unknown,
}

impl FrequencyGroup {
    pub const KNOWN: [FrequencyGroup; 3] = [FrequencyGroup::Rare, FrequencyGroup::Common, FrequencyGroup::Frequent];

    /// Single-letter suffix used in column names (`AP_r`, `AP_c`, `AP_f`).
    pub fn suffix(self) -> &'static str {
        match self {
            FrequencyGroup::Rare => "r",
            FrequencyGroup::Common => "c",
            FrequencyGroup::Frequent => "f",
            FrequencyGroup::Unknown => "u",
        }
    }
}

impl fmt::Display for FrequencyGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FrequencyGroup::Rare => "rare",
            FrequencyGroup::Common => "common",
            FrequencyGroup::Frequent => "frequent",
            FrequencyGroup::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

impl FromStr for FrequencyGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "r" | "rare" => Ok(FrequencyGroup::Rare),
            "c" | "common" => Ok(FrequencyGroup::Common),
            "f" | "frequent" => Ok(FrequencyGroup::Frequent),
            "u" | "unknown" => Ok(FrequencyGroup::Unknown),
            other => Err(Error::InvalidConfig(format!("unknown frequency group {other:?}"))),
        }
    }
}

/// Upper bounds (inclusive) of the rare and common bins, in training images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyThresholds {
    pub rare_max: u64,
    pub common_max: u64,
}

impl Default for FrequencyThresholds {
    fn default() -> Self {
        FrequencyThresholds {
            rare_max: 10,
            common_max: 100,
        }
    }
}

impl FrequencyThresholds {
    pub fn new(rare_max: u64, common_max: u64) -> Result<Self> {
        if rare_max >= common_max {
            return Err(Error::InvalidConfig(format!(
                "rare_max ({rare_max}) must be below common_max ({common_max})"
            )));
        }
        Ok(FrequencyThresholds { rare_max, common_max })
    }

    pub fn classify(&self, image_count: Option<u64>) -> FrequencyGroup {
        match image_count {
            None | Some(0) => FrequencyGroup::Unknown,
            Some(n) if n <= self.rare_max => FrequencyGroup::Rare,
            Some(n) if n <= self.common_max => FrequencyGroup::Common,
            Some(_) => FrequencyGroup::Frequent,
        }
    }
}

pub fn frequency_group(category: &Category, thresholds: FrequencyThresholds) -> FrequencyGroup {
    thresholds.classify(category.image_count)
}

/// Which categories are evaluated on an image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalUniverse {
    /// Plain COCO image: every category is evaluated.
    All,
    /// Federated (LVIS) image: only the listed categories are evaluated.
    Only(BTreeSet<u64>),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ImageRecord {
    pub id: u64,
    /// Categories exhaustively annotated on this image.
    pub positive_category_ids: BTreeSet<u64>,
    /// Categories verified absent.
    pub negative_category_ids: BTreeSet<u64>,
    /// Categories present but not exhaustively annotated. Unmatched
    /// detections of these categories are ignored rather than counted as
    /// false positives.
    pub not_exhaustive_category_ids: BTreeSet<u64>,
    /// Whether the image carries federated annotation metadata at all.
    pub federated: bool,
}

impl ImageRecord {
    /// A plain COCO image on which every category is evaluated.
    pub fn exhaustive(id: u64) -> Self {
        ImageRecord {
            id,
            ..Default::default()
        }
    }

    pub fn evaluation_universe(&self) -> EvalUniverse {
        if !self.federated {
            return EvalUniverse::All;
        }
        let mut ids = self.positive_category_ids.clone();
        ids.extend(&self.negative_category_ids);
        ids.extend(&self.not_exhaustive_category_ids);
        EvalUniverse::Only(ids)
    }

    pub fn evaluates(&self, category_id: u64) -> bool {
        !self.federated
            || self.positive_category_ids.contains(&category_id)
            || self.negative_category_ids.contains(&category_id)
            || self.not_exhaustive_category_ids.contains(&category_id)
    }

    pub fn is_not_exhaustive(&self, category_id: u64) -> bool {
        self.not_exhaustive_category_ids.contains(&category_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthInstance {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: BoundingBox,
    /// Crowd or ignore region: may absorb detections but never counts
    /// towards recall.
    pub ignore: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Zero-based position in the source results file. Breaks score ties.
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: BoundingBox,
    pub score: f64,
}

/// Ordering used everywhere detections are ranked: score descending, then
/// detection id ascending.
pub fn rank_order(a_score: f64, a_id: u64, b_score: f64, b_id: u64) -> std::cmp::Ordering {
    b_score.total_cmp(&a_score).then(a_id.cmp(&b_id))
}

/// Detections in input order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionSet {
    detections: Vec<Detection>,
}

impl DetectionSet {
    pub fn new(detections: Vec<Detection>) -> Self {
        DetectionSet { detections }
    }

    /// Builds a set from `(image_id, category_id, bbox, score)` tuples,
    /// assigning sequence ids in order.
    pub fn from_entries(entries: impl IntoIterator<Item = (u64, u64, BoundingBox, f64)>) -> Self {
        let detections = entries
            .into_iter()
            .enumerate()
            .map(|(i, (image_id, category_id, bbox, score))| Detection {
                id: i as u64,
                image_id,
                category_id,
                bbox,
                score,
            })
            .collect();
        DetectionSet { detections }
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Detection> {
        self.detections.iter()
    }

    pub fn as_slice(&self) -> &[Detection] {
        &self.detections
    }

    pub fn into_vec(self) -> Vec<Detection> {
        self.detections
    }

    /// Keeps detections for which `keep` holds, preserving order.
    pub fn filtered(&self, mut keep: impl FnMut(&Detection) -> bool) -> DetectionSet {
        DetectionSet {
            detections: self.detections.iter().filter(|d| keep(d)).copied().collect(),
        }
    }
}

impl FromIterator<Detection> for DetectionSet {
    fn from_iter<I: IntoIterator<Item = Detection>>(iter: I) -> Self {
        DetectionSet {
            detections: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a DetectionSet {
    type Item = &'a Detection;
    type IntoIter = std::slice::Iter<'a, Detection>;

    fn into_iter(self) -> Self::IntoIter {
        self.detections.iter()
    }
}

/// Groundtruth corpus with id indexes.
#[derive(Debug, Clone)]
pub struct Dataset {
    images: Vec<ImageRecord>,
    categories: Vec<Category>,
    annotations: Vec<GroundTruthInstance>,
    image_index: HashMap<u64, usize>,
    category_index: HashMap<u64, usize>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.images == other.images && self.categories == other.categories && self.annotations == other.annotations
    }
}

impl Dataset {
    /// Validates id uniqueness and referential integrity.
    pub fn new(
        images: Vec<ImageRecord>,
        categories: Vec<Category>,
        annotations: Vec<GroundTruthInstance>,
    ) -> Result<Self> {
        let mut image_index = HashMap::with_capacity(images.len());
        for (i, img) in images.iter().enumerate() {
            if image_index.insert(img.id, i).is_some() {
                return Err(Error::InvalidDataset(format!("duplicate image id {}", img.id)));
            }
            if let Some(c) = img
                .positive_category_ids
                .intersection(&img.negative_category_ids)
                .next()
            {
                return Err(Error::InvalidDataset(format!(
                    "image {} lists category {c} as both positive and negative",
                    img.id
                )));
            }
        }
        let mut category_index = HashMap::with_capacity(categories.len());
        for (i, cat) in categories.iter().enumerate() {
            if category_index.insert(cat.id, i).is_some() {
                return Err(Error::InvalidDataset(format!("duplicate category id {}", cat.id)));
            }
        }
        let mut seen = std::collections::HashSet::with_capacity(annotations.len());
        for ann in &annotations {
            if !seen.insert(ann.id) {
                return Err(Error::InvalidDataset(format!("duplicate annotation id {}", ann.id)));
            }
            if !image_index.contains_key(&ann.image_id) {
                return Err(Error::InvalidDataset(format!(
                    "annotation {} references unknown image {}",
                    ann.id, ann.image_id
                )));
            }
            if !category_index.contains_key(&ann.category_id) {
                return Err(Error::InvalidDataset(format!(
                    "annotation {} references unknown category {}",
                    ann.id, ann.category_id
                )));
            }
        }
        Ok(Dataset {
            images,
            categories,
            annotations,
            image_index,
            category_index,
        })
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn annotations(&self) -> &[GroundTruthInstance] {
        &self.annotations
    }

    pub fn image(&self, id: u64) -> Option<&ImageRecord> {
        self.image_index.get(&id).map(|&i| &self.images[i])
    }

    pub fn category(&self, id: u64) -> Option<&Category> {
        self.category_index.get(&id).map(|&i| &self.categories[i])
    }

    pub fn image_position(&self, id: u64) -> Option<usize> {
        self.image_index.get(&id).copied()
    }

    pub fn category_position(&self, id: u64) -> Option<usize> {
        self.category_index.get(&id).copied()
    }

    /// Whether `category_id` is evaluated on `image_id` under federated
    /// semantics. Unknown images are never evaluated.
    pub fn evaluates(&self, image_id: u64, category_id: u64) -> bool {
        self.image(image_id).is_some_and(|img| img.evaluates(category_id))
    }

    pub fn frequency_groups(&self, thresholds: FrequencyThresholds) -> Vec<FrequencyGroup> {
        self.categories.iter().map(|c| frequency_group(c, thresholds)).collect()
    }

    /// Drops categories (and their annotations and federated references)
    /// for which `keep` is false.
    pub fn restrict_categories(&self, mut keep: impl FnMut(&Category) -> bool) -> Dataset {
        let categories: Vec<Category> = self.categories.iter().filter(|c| keep(c)).cloned().collect();
        let kept: std::collections::HashSet<u64> = categories.iter().map(|c| c.id).collect();
        let retain =
            |set: &BTreeSet<u64>| -> BTreeSet<u64> { set.iter().copied().filter(|c| kept.contains(c)).collect() };
        let images = self
            .images
            .iter()
            .map(|img| ImageRecord {
                id: img.id,
                positive_category_ids: retain(&img.positive_category_ids),
                negative_category_ids: retain(&img.negative_category_ids),
                not_exhaustive_category_ids: retain(&img.not_exhaustive_category_ids),
                federated: img.federated,
            })
            .collect();
        let annotations = self
            .annotations
            .iter()
            .filter(|a| kept.contains(&a.category_id))
            .copied()
            .collect();
        Dataset::new(images, categories, annotations).expect("restricting a valid dataset keeps it valid")
    }
}

/// How a precision/recall curve is reduced to a single AP value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "points")]
pub enum Interpolation {
    /// Area under the precision envelope, integrated at every recall step.
    Exact,
    /// Mean of the envelope at `n` evenly spaced recall values in `[0, 1]`.
    Sampled(usize),
}

impl Default for Interpolation {
    fn default() -> Self {
        Interpolation::Sampled(101)
    }
}

impl fmt::Display for Interpolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interpolation::Exact => f.write_str("exact"),
            Interpolation::Sampled(n) => write!(f, "sampled:{n}"),
        }
    }
}

impl FromStr for Interpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("exact") {
            return Ok(Interpolation::Exact);
        }
        let n = s
            .strip_prefix("sampled:")
            .and_then(|n| n.parse::<usize>().ok())
            .ok_or_else(|| Error::InvalidConfig(format!("interpolation must be exact or sampled:N, got {s:?}")))?;
        if n < 2 {
            return Err(Error::InvalidConfig(format!(
                "sampled interpolation needs N >= 2, got {n}"
            )));
        }
        Ok(Interpolation::Sampled(n))
    }
}

/// `0.50, 0.55, ..., 0.95`.
pub fn default_iou_thresholds() -> Vec<f64> {
    (0..10).map(|k| (50 + 5 * k) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub iou_thresholds: Vec<f64>,
    pub ranking_policy: RankingPolicy,
    pub interpolation: Interpolation,
    pub frequency_thresholds: FrequencyThresholds,
    pub include_pooled: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig::ap_fixed()
    }
}

impl EvalConfig {
    fn with_policy(policy: RankingPolicy) -> Self {
        EvalConfig {
            iou_thresholds: default_iou_thresholds(),
            ranking_policy: policy,
            interpolation: Interpolation::default(),
            frequency_thresholds: FrequencyThresholds::default(),
            include_pooled: false,
        }
    }

    /// Per-image cap of 300, no per-class cap.
    pub fn ap_old() -> Self {
        Self::with_policy(RankingPolicy::ap_old())
    }

    /// Per-class cap of 10,000 over the dataset, no per-image cap.
    pub fn ap_fixed() -> Self {
        Self::with_policy(RankingPolicy::ap_fixed())
    }

    /// `ap_fixed` plus the pooled block.
    pub fn ap_pool() -> Self {
        EvalConfig {
            include_pooled: true,
            ..Self::ap_fixed()
        }
    }

    /// Single IoU threshold of 0.5 with exact integration, as used by the
    /// toy fixtures.
    pub fn single_threshold(policy: RankingPolicy) -> Self {
        EvalConfig {
            iou_thresholds: vec![0.5],
            interpolation: Interpolation::Exact,
            ..Self::with_policy(policy)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iou_thresholds.is_empty() {
            return Err(Error::InvalidConfig("at least one IoU threshold is required".into()));
        }
        for t in &self.iou_thresholds {
            if !(*t > 0.0 && *t <= 1.0) {
                return Err(Error::InvalidConfig(format!("IoU threshold {t} outside (0, 1]")));
            }
        }
        if self.iou_thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "IoU thresholds must be strictly increasing".into(),
            ));
        }
        if let Interpolation::Sampled(n) = self.interpolation {
            if n < 2 {
                return Err(Error::InvalidConfig(format!(
                    "sampled interpolation needs N >= 2, got {n}"
                )));
            }
        }
        if self.frequency_thresholds.rare_max >= self.frequency_thresholds.common_max {
            return Err(Error::InvalidConfig("rare_max must be below common_max".into()));
        }
        self.ranking_policy.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat(count: Option<u64>) -> Category {
        Category {
            id: 1,
            name: "c".into(),
            image_count: count,
        }
    }

    #[test]
    fn frequency_group_examples() {
        let t = FrequencyThresholds::new(10, 100).unwrap();
        assert_eq!(frequency_group(&cat(Some(5)), t), FrequencyGroup::Rare);
        assert_eq!(frequency_group(&cat(Some(10)), t), FrequencyGroup::Rare);
        assert_eq!(frequency_group(&cat(Some(11)), t), FrequencyGroup::Common);
        assert_eq!(frequency_group(&cat(Some(100)), t), FrequencyGroup::Common);
        assert_eq!(frequency_group(&cat(Some(569)), t), FrequencyGroup::Frequent);
        assert_eq!(frequency_group(&cat(None), t), FrequencyGroup::Unknown);
        assert_eq!(frequency_group(&cat(Some(0)), t), FrequencyGroup::Unknown);
    }

    #[test]
    fn thresholds_must_be_ordered() {
        assert!(FrequencyThresholds::new(100, 100).is_err());
        assert!(FrequencyThresholds::new(100, 10).is_err());
    }

    #[test]
    fn box_rejects_negative_extent() {
        assert!(BoundingBox::new(0.0, 0.0, -1.0, 2.0).is_none());
        assert!(BoundingBox::new(0.0, f64::NAN, 1.0, 2.0).is_none());
        assert_eq!(BoundingBox::new(1.0, 2.0, 3.0, 4.0).unwrap().area(), 12.0);
    }

    #[test]
    fn interpolation_parsing() {
        assert_eq!("exact".parse::<Interpolation>().unwrap(), Interpolation::Exact);
        assert_eq!(
            "sampled:101".parse::<Interpolation>().unwrap(),
            Interpolation::Sampled(101)
        );
        assert!("sampled:1".parse::<Interpolation>().is_err());
        assert!("linear".parse::<Interpolation>().is_err());
    }

    #[test]
    fn default_thresholds() {
        let t = default_iou_thresholds();
        assert_eq!(t.len(), 10);
        assert_eq!(t[0], 0.5);
        assert_eq!(t[9], 0.95);
        assert!(EvalConfig::default().validate().is_ok());
    }

    #[test]
    fn config_rejects_unsorted_thresholds() {
        let mut cfg = EvalConfig::ap_old();
        cfg.iou_thresholds = vec![0.75, 0.5];
        assert!(cfg.validate().is_err());
        cfg.iou_thresholds = vec![0.5, 0.5];
        assert!(cfg.validate().is_err());
        cfg.iou_thresholds = vec![0.0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn federated_universe() {
        let mut img = ImageRecord::exhaustive(1);
        assert_eq!(img.evaluation_universe(), EvalUniverse::All);
        assert!(img.evaluates(42));
        img.federated = true;
        img.negative_category_ids.insert(7);
        img.positive_category_ids.insert(3);
        assert_eq!(
            img.evaluation_universe(),
            EvalUniverse::Only([3, 7].into_iter().collect())
        );
        assert!(img.evaluates(7));
        assert!(!img.evaluates(42));
    }

    #[test]
    fn dataset_rejects_conflicting_sets() {
        let mut img = ImageRecord::exhaustive(1);
        img.federated = true;
        img.positive_category_ids.insert(3);
        img.negative_category_ids.insert(3);
        assert!(Dataset::new(vec![img], vec![], vec![]).is_err());
    }
}
