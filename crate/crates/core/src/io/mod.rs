//! COCO/LVIS JSON ingestion and output.
//!
//! Groundtruth files follow the COCO annotation layout. The LVIS image-level
//! `neg_category_ids` and `not_exhaustive_category_ids` lists and the
//! category-level `image_count` field are honoured when present. Result
//! files are JSON arrays of `{image_id, category_id, bbox, score}` and are
//! parsed one element at a time.

mod report;
pub mod svg;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::{self, DeserializeSeed, IgnoredAny, MapAccess, SeqAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

pub use report::{
    render_curves_csv, render_distribution, render_game, render_report, render_sweep, render_toy, write_report,
    GameComparison, ReportFormat,
};

use crate::error::{Error, Result};
use crate::model::{BoundingBox, Category, Dataset, Detection, DetectionSet, GroundTruthInstance, ImageRecord};

const BUF_SIZE: usize = 1 << 20;

/// Non-fatal findings from a load.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadSummary {
    /// JSON keys the loader does not use (top-level keys for groundtruth,
    /// per-entry keys for results).
    pub unknown_fields: usize,
    /// Scores outside `[0, 1]` that were clamped.
    pub clamped_scores: usize,
}

fn classify(path: &Path, err: serde_json::Error) -> Error {
    use serde_json::error::Category as C;
    match err.classify() {
        C::Data => Error::SchemaViolation {
            path: path.to_path_buf(),
            message: err.to_string(),
        },
        C::Io => Error::Io {
            path: path.to_path_buf(),
            source: err.into(),
        },
        C::Syntax | C::Eof => Error::MalformedFile {
            path: path.to_path_buf(),
            source: err,
        },
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::with_capacity(BUF_SIZE, file))
}

// ---------------------------------------------------------------------------
// Groundtruth

#[derive(Deserialize)]
struct RawImage {
    id: u64,
    #[serde(default)]
    pos_category_ids: Option<Vec<u64>>,
    #[serde(default)]
    neg_category_ids: Option<Vec<u64>>,
    #[serde(default)]
    not_exhaustive_category_ids: Option<Vec<u64>>,
}

#[derive(Deserialize)]
struct RawCategory {
    id: u64,
    #[serde(default)]
    name: String,
    #[serde(default)]
    image_count: Option<u64>,
}

/// COCO writes `iscrowd` as 0/1; some tools emit booleans.
#[derive(Deserialize, Default)]
#[serde(untagged)]
enum Flag {
    #[default]
    Absent,
    Bool(bool),
    Int(i64),
}

impl Flag {
    fn is_set(&self) -> bool {
        match self {
            Flag::Absent => false,
            Flag::Bool(b) => *b,
            Flag::Int(i) => *i != 0,
        }
    }
}

#[derive(Deserialize)]
struct RawAnnotation {
    id: u64,
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
    #[serde(default)]
    iscrowd: Flag,
    #[serde(default)]
    ignore: Flag,
}

struct RawDataset {
    images: Vec<RawImage>,
    annotations: Vec<RawAnnotation>,
    categories: Vec<RawCategory>,
    unknown_fields: usize,
}

impl<'de> Deserialize<'de> for RawDataset {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct TopLevel;

        impl<'de> Visitor<'de> for TopLevel {
            type Value = RawDataset;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an annotation object with images, annotations and categories")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<RawDataset, A::Error> {
                let (mut images, mut annotations, mut categories) = (None, None, None);
                let mut unknown_fields = 0;
                while let Some(key) = map.next_key::<String>()? {
                    match key.as_str() {
                        "images" => images = Some(map.next_value()?),
                        "annotations" => annotations = Some(map.next_value()?),
                        "categories" => categories = Some(map.next_value()?),
                        _ => {
                            map.next_value::<IgnoredAny>()?;
                            unknown_fields += 1;
                        }
                    }
                }
                Ok(RawDataset {
                    images: images.ok_or_else(|| de::Error::missing_field("images"))?,
                    annotations: annotations.ok_or_else(|| de::Error::missing_field("annotations"))?,
                    categories: categories.ok_or_else(|| de::Error::missing_field("categories"))?,
                    unknown_fields,
                })
            }
        }

        deserializer.deserialize_map(TopLevel)
    }
}

fn schema(path: &Path, message: impl Into<String>) -> Error {
    Error::SchemaViolation {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn build_dataset(raw: RawDataset, path: &Path) -> Result<Dataset> {
    let category_ids: std::collections::HashSet<u64> = raw.categories.iter().map(|c| c.id).collect();
    let image_ids: std::collections::HashSet<u64> = raw.images.iter().map(|i| i.id).collect();

    let mut annotations = Vec::with_capacity(raw.annotations.len());
    let mut annotated: HashMap<u64, BTreeSet<u64>> = HashMap::new();
    for a in raw.annotations {
        if !image_ids.contains(&a.image_id) {
            return Err(Error::DanglingReference {
                path: path.to_path_buf(),
                kind: "annotation",
                id: a.id,
                target: "image",
                target_id: a.image_id,
            });
        }
        if !category_ids.contains(&a.category_id) {
            return Err(Error::DanglingReference {
                path: path.to_path_buf(),
                kind: "annotation",
                id: a.id,
                target: "category",
                target_id: a.category_id,
            });
        }
        let bbox = BoundingBox::from_xywh(a.bbox)
            .ok_or_else(|| schema(path, format!("annotation {} has an invalid bbox {:?}", a.id, a.bbox)))?;
        annotated.entry(a.image_id).or_default().insert(a.category_id);
        annotations.push(GroundTruthInstance {
            id: a.id,
            image_id: a.image_id,
            category_id: a.category_id,
            bbox,
            ignore: a.iscrowd.is_set() || a.ignore.is_set(),
        });
    }

    let images = raw
        .images
        .into_iter()
        .map(|img| {
            let federated = img.pos_category_ids.is_some()
                || img.neg_category_ids.is_some()
                || img.not_exhaustive_category_ids.is_some();
            if !federated {
                return ImageRecord::exhaustive(img.id);
            }
            let not_exhaustive: BTreeSet<u64> = img
                .not_exhaustive_category_ids
                .unwrap_or_default()
                .into_iter()
                .collect();
            let mut positive: BTreeSet<u64> = annotated.get(&img.id).cloned().unwrap_or_default();
            positive.extend(img.pos_category_ids.unwrap_or_default());
            positive.retain(|c| !not_exhaustive.contains(c));
            ImageRecord {
                id: img.id,
                positive_category_ids: positive,
                negative_category_ids: img.neg_category_ids.unwrap_or_default().into_iter().collect(),
                not_exhaustive_category_ids: not_exhaustive,
                federated: true,
            }
        })
        .collect();

    let categories = raw
        .categories
        .into_iter()
        .map(|c| Category {
            id: c.id,
            name: c.name,
            image_count: c.image_count,
        })
        .collect();

    Dataset::new(images, categories, annotations).map_err(|e| match e {
        Error::InvalidDataset(msg) => schema(path, msg),
        other => other,
    })
}

/// Parses an annotation file from any reader; `origin` labels errors.
pub fn read_dataset(reader: impl Read, origin: &Path) -> Result<(Dataset, LoadSummary)> {
    let raw: RawDataset = serde_json::from_reader(reader).map_err(|e| classify(origin, e))?;
    let summary = LoadSummary {
        unknown_fields: raw.unknown_fields,
        clamped_scores: 0,
    };
    Ok((build_dataset(raw, origin)?, summary))
}

pub fn load_dataset_with_summary(path: impl AsRef<Path>) -> Result<(Dataset, LoadSummary)> {
    let path = path.as_ref();
    read_dataset(open(path)?, path)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let (dataset, summary) = load_dataset_with_summary(path)?;
    if summary.unknown_fields > 0 {
        log::info!(
            "{}: ignored {} unknown top-level fields",
            path.display(),
            summary.unknown_fields
        );
    }
    Ok(dataset)
}

#[derive(Serialize)]
struct OutImage<'a> {
    id: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pos_category_ids: Option<&'a BTreeSet<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    neg_category_ids: Option<&'a BTreeSet<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    not_exhaustive_category_ids: Option<&'a BTreeSet<u64>>,
}

#[derive(Serialize)]
struct OutCategory<'a> {
    id: u64,
    name: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    image_count: Option<u64>,
}

#[derive(Serialize)]
struct OutAnnotation {
    id: u64,
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
    area: f64,
    iscrowd: u8,
}

#[derive(Serialize)]
struct OutDataset<'a> {
    images: Vec<OutImage<'a>>,
    annotations: Vec<OutAnnotation>,
    categories: Vec<OutCategory<'a>>,
}

/// Writes `dataset` in the layout [`load_dataset`] reads. Federated images
/// also carry an explicit `pos_category_ids` list so the round trip is exact.
pub fn write_dataset_to(dataset: &Dataset, writer: impl Write) -> serde_json::Result<()> {
    let out = OutDataset {
        images: dataset
            .images()
            .iter()
            .map(|img| {
                let fed = |s| img.federated.then_some(s);
                OutImage {
                    id: img.id,
                    pos_category_ids: fed(&img.positive_category_ids),
                    neg_category_ids: fed(&img.negative_category_ids),
                    not_exhaustive_category_ids: fed(&img.not_exhaustive_category_ids),
                }
            })
            .collect(),
        annotations: dataset
            .annotations()
            .iter()
            .map(|a| OutAnnotation {
                id: a.id,
                image_id: a.image_id,
                category_id: a.category_id,
                bbox: a.bbox.to_xywh(),
                area: a.bbox.area(),
                iscrowd: a.ignore as u8,
            })
            .collect(),
        categories: dataset
            .categories()
            .iter()
            .map(|c| OutCategory {
                id: c.id,
                name: &c.name,
                image_count: c.image_count,
            })
            .collect(),
    };
    serde_json::to_writer(writer, &out)
}

pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_dataset_to(dataset, &mut w).map_err(|e| classify(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Detections

#[derive(Deserialize)]
#[serde(field_identifier, rename_all = "snake_case")]
enum DetectionKey {
    ImageId,
    CategoryId,
    Bbox,
    Score,
    #[serde(other)]
    Other,
}

struct RawDetection {
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
    score: f64,
    unknown_fields: usize,
}

impl<'de> Deserialize<'de> for RawDetection {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct Entry;

        impl<'de> Visitor<'de> for Entry {
            type Value = RawDetection;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a detection object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<RawDetection, A::Error> {
                let (mut image_id, mut category_id, mut bbox, mut score) = (None, None, None, None);
                let mut unknown_fields = 0;
                while let Some(key) = map.next_key::<DetectionKey>()? {
                    match key {
                        DetectionKey::ImageId => image_id = Some(map.next_value()?),
                        DetectionKey::CategoryId => category_id = Some(map.next_value()?),
                        DetectionKey::Bbox => bbox = Some(map.next_value()?),
                        DetectionKey::Score => score = Some(map.next_value()?),
                        DetectionKey::Other => {
                            map.next_value::<IgnoredAny>()?;
                            unknown_fields += 1;
                        }
                    }
                }
                Ok(RawDetection {
                    image_id: image_id.ok_or_else(|| de::Error::missing_field("image_id"))?,
                    category_id: category_id.ok_or_else(|| de::Error::missing_field("category_id"))?,
                    bbox: bbox.ok_or_else(|| de::Error::missing_field("bbox"))?,
                    score: score.ok_or_else(|| de::Error::missing_field("score"))?,
                    unknown_fields,
                })
            }
        }

        deserializer.deserialize_map(Entry)
    }
}

/// Error raised inside the streaming visitor that is not a JSON error.
enum Rejection {
    Dangling {
        index: u64,
        target: &'static str,
        target_id: u64,
    },
    Invalid(String),
}

struct DetectionStream<'a> {
    /// When present, image and category references are checked against it.
    dataset: Option<&'a Dataset>,
    out: &'a mut Vec<Detection>,
    summary: &'a mut LoadSummary,
    rejection: &'a mut Option<Rejection>,
}

impl<'de> DeserializeSeed<'de> for DetectionStream<'_> {
    type Value = ();

    fn deserialize<D: Deserializer<'de>>(self, deserializer: D) -> std::result::Result<(), D::Error> {
        deserializer.deserialize_seq(self)
    }
}

impl<'de> Visitor<'de> for DetectionStream<'_> {
    type Value = ();

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("an array of detections")
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<(), A::Error> {
        while let Some(raw) = seq.next_element::<RawDetection>()? {
            let index = self.out.len() as u64;
            self.summary.unknown_fields += raw.unknown_fields;
            let mut reject = |r| {
                *self.rejection = Some(r);
                de::Error::custom("rejected detection")
            };
            if self.dataset.is_some_and(|d| d.image(raw.image_id).is_none()) {
                return Err(reject(Rejection::Dangling {
                    index,
                    target: "image",
                    target_id: raw.image_id,
                }));
            }
            if self.dataset.is_some_and(|d| d.category(raw.category_id).is_none()) {
                return Err(reject(Rejection::Dangling {
                    index,
                    target: "category",
                    target_id: raw.category_id,
                }));
            }
            let Some(bbox) = BoundingBox::from_xywh(raw.bbox) else {
                return Err(reject(Rejection::Invalid(format!(
                    "detection {index} has an invalid bbox {:?}",
                    raw.bbox
                ))));
            };
            if raw.score.is_nan() {
                return Err(reject(Rejection::Invalid(format!("detection {index} has a NaN score"))));
            }
            let score = raw.score.clamp(0.0, 1.0);
            if score != raw.score {
                self.summary.clamped_scores += 1;
            }
            self.out.push(Detection {
                id: index,
                image_id: raw.image_id,
                category_id: raw.category_id,
                bbox,
                score,
            });
        }
        Ok(())
    }
}

/// Streams a results array from any reader. Detections get sequence ids in
/// file order.
pub fn read_detections(reader: impl Read, dataset: &Dataset, origin: &Path) -> Result<(DetectionSet, LoadSummary)> {
    stream_detections(reader, Some(dataset), origin)
}

/// Like [`read_detections`] but without checking image and category ids.
pub fn read_detections_unchecked(reader: impl Read, origin: &Path) -> Result<(DetectionSet, LoadSummary)> {
    stream_detections(reader, None, origin)
}

fn stream_detections(
    reader: impl Read,
    dataset: Option<&Dataset>,
    origin: &Path,
) -> Result<(DetectionSet, LoadSummary)> {
    let mut out = Vec::new();
    let mut summary = LoadSummary::default();
    let mut rejection = None;
    let mut de = serde_json::Deserializer::from_reader(reader);
    let stream = DetectionStream {
        dataset,
        out: &mut out,
        summary: &mut summary,
        rejection: &mut rejection,
    };
    let parsed = stream.deserialize(&mut de).and_then(|()| de.end());
    if let Err(err) = parsed {
        return Err(match rejection {
            Some(Rejection::Dangling {
                index,
                target,
                target_id,
            }) => Error::DanglingReference {
                path: origin.to_path_buf(),
                kind: "detection",
                id: index,
                target,
                target_id,
            },
            Some(Rejection::Invalid(msg)) => schema(origin, msg),
            None => classify(origin, err),
        });
    }
    Ok((DetectionSet::new(out), summary))
}

pub fn load_detections_with_summary(path: impl AsRef<Path>, dataset: &Dataset) -> Result<(DetectionSet, LoadSummary)> {
    let path = path.as_ref();
    read_detections(open(path)?, dataset, path)
}

pub fn load_detections_unchecked(path: impl AsRef<Path>) -> Result<(DetectionSet, LoadSummary)> {
    let path = path.as_ref();
    read_detections_unchecked(open(path)?, path)
}

pub fn load_detections(path: impl AsRef<Path>, dataset: &Dataset) -> Result<DetectionSet> {
    let path = path.as_ref();
    let (dets, summary) = load_detections_with_summary(path, dataset)?;
    if summary.clamped_scores > 0 {
        log::warn!(
            "{}: clamped {} scores into [0, 1]",
            path.display(),
            summary.clamped_scores
        );
    }
    if summary.unknown_fields > 0 {
        log::info!(
            "{}: ignored {} unknown detection fields",
            path.display(),
            summary.unknown_fields
        );
    }
    Ok(dets)
}

#[derive(Serialize)]
struct OutDetection {
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
    score: f64,
}

/// Writes detections as a results array, in set order.
pub fn write_detections_to(dets: &DetectionSet, writer: impl Write) -> std::io::Result<()> {
    let mut w = writer;
    w.write_all(b"[")?;
    for (i, d) in dets.iter().enumerate() {
        if i > 0 {
            w.write_all(b",\n")?;
        }
        let entry = OutDetection {
            image_id: d.image_id,
            category_id: d.category_id,
            bbox: d.bbox.to_xywh(),
            score: d.score,
        };
        serde_json::to_writer(&mut w, &entry)?;
    }
    w.write_all(b"]\n")?;
    w.flush()
}

pub fn write_detections(dets: &DetectionSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_detections_to(dets, BufWriter::with_capacity(BUF_SIZE, file)).map_err(|e| Error::io(path, e))
}

/// Serializes any value as pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|e| classify(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    serde_json::from_reader(open(path)?).map_err(|e| classify(path, e))
}
