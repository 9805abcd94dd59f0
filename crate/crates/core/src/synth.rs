//! Seeded synthetic corpora.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{BoundingBox, Category, Dataset, Detection, DetectionSet, GroundTruthInstance, ImageRecord};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct CorpusParams {
    pub images: usize,
    pub categories: usize,
    /// Upper bound on annotated categories per image.
    pub max_categories_per_image: usize,
    pub max_instances_per_pair: usize,
    /// Unmatched detections per image.
    pub false_positives_per_image: usize,
    /// Whether images carry federated (LVIS) metadata.
    pub federated: bool,
    pub ignore_probability: f64,
    /// Scores are drawn from this many levels, so small values force ties.
    pub score_levels: u32,
}

impl Default for CorpusParams {
    fn default() -> Self {
        CorpusParams {
            images: 8,
            categories: 6,
            max_categories_per_image: 3,
            max_instances_per_pair: 3,
            false_positives_per_image: 3,
            federated: true,
            ignore_probability: 0.05,
            score_levels: 1000,
        }
    }
}

fn random_box<R: Rng>(rng: &mut R) -> BoundingBox {
    let x = rng.gen_range(0.0..200.0f64).round();
    let y = rng.gen_range(0.0..200.0f64).round();
    let w = rng.gen_range(4.0..60.0f64).round();
    let h = rng.gen_range(4.0..60.0f64).round();
    BoundingBox::new(x, y, w, h).expect("positive extent")
}

fn jitter<R: Rng>(rng: &mut R, b: &BoundingBox) -> BoundingBox {
    let s = 0.35 * b.w.min(b.h);
    let dx = rng.gen_range(-s..=s);
    let dy = rng.gen_range(-s..=s);
    let sw = rng.gen_range(0.7..1.3);
    let sh = rng.gen_range(0.7..1.3);
    BoundingBox::new(b.x + dx, b.y + dy, b.w * sw, b.h * sh).expect("positive extent")
}

/// A random corpus and detection set. Detections include near-duplicates of
/// groundtruth boxes, background boxes, and detections for categories
/// outside an image's evaluation universe.
pub fn random_corpus<R: Rng>(rng: &mut R, p: &CorpusParams) -> (Dataset, DetectionSet) {
    let categories: Vec<Category> = (0..p.categories)
        .map(|c| Category {
            id: 100 + c as u64,
            name: format!("class_{c}"),
            image_count: match rng.gen_range(0..4) {
                0 => Some(rng.gen_range(1..=10)),
                1 => Some(rng.gen_range(11..=100)),
                2 => Some(rng.gen_range(101..=2000)),
                _ => {
                    if rng.gen_bool(0.2) {
                        None
                    } else {
                        Some(rng.gen_range(1..=2000))
                    }
                }
            },
        })
        .collect();
    let cat_ids: Vec<u64> = categories.iter().map(|c| c.id).collect();
    let level = |rng: &mut R| rng.gen_range(0..=p.score_levels) as f64 / p.score_levels as f64;

    let mut images = Vec::new();
    let mut annotations = Vec::new();
    let mut entries = Vec::new();
    let mut next_gt = 1u64;
    for i in 0..p.images {
        let image_id = 1 + i as u64;
        let k = rng.gen_range(0..=p.max_categories_per_image.min(cat_ids.len()));
        let annotated: Vec<u64> = cat_ids.choose_multiple(rng, k).copied().collect();
        let mut record = ImageRecord::exhaustive(image_id);
        if p.federated {
            record.federated = true;
            for &c in &annotated {
                if rng.gen_bool(0.15) {
                    record.not_exhaustive_category_ids.insert(c);
                } else {
                    record.positive_category_ids.insert(c);
                }
            }
            for &c in &cat_ids {
                if !annotated.contains(&c) && rng.gen_bool(0.4) {
                    record.negative_category_ids.insert(c);
                }
            }
        }
        for &c in &annotated {
            for _ in 0..rng.gen_range(1..=p.max_instances_per_pair) {
                let bbox = random_box(rng);
                annotations.push(GroundTruthInstance {
                    id: next_gt,
                    image_id,
                    category_id: c,
                    bbox,
                    ignore: rng.gen_bool(p.ignore_probability),
                });
                next_gt += 1;
                let hits = rng.gen_range(0..=2);
                for _ in 0..hits {
                    let b = jitter(rng, &bbox);
                    let s = level(rng);
                    entries.push((image_id, c, b, s));
                }
            }
        }
        for _ in 0..p.false_positives_per_image {
            let c = *cat_ids.choose(rng).expect("at least one category");
            let b = random_box(rng);
            let s = level(rng);
            entries.push((image_id, c, b, s));
        }
        images.push(record);
    }
    entries.shuffle(rng);
    let dataset = Dataset::new(images, categories, annotations).expect("generated corpus is valid");
    (dataset, DetectionSet::from_entries(entries))
}

pub const GAMEABLE_SEED: u64 = 20_210_611;
pub const GAMEABLE_DETS_PER_IMAGE: usize = 15;
pub const GAMEABLE_DETS_PER_CLASS: usize = 20;

/// 50 images, 30 categories (10 frequent, 10 common, 10 rare).
///
/// Frequent categories flood every image with confident detections, while
/// rare and common categories produce accurate but low-scoring ones. Under
/// a 15-per-image cap the rare and common hits are crowded out; capping
/// each category at 20 detections across the set first frees the budget.
pub fn gameable_corpus() -> (Dataset, DetectionSet) {
    let mut rng = rng(GAMEABLE_SEED);
    let n_images = 50u64;
    let mut categories = Vec::new();
    for c in 0..30u64 {
        let (name, count) = match c {
            0..=9 => (format!("frequent_{c}"), 400 + 20 * c),
            10..=19 => (format!("common_{c}"), 20 + 5 * c),
            _ => (format!("rare_{c}"), 1 + c % 10),
        };
        categories.push(Category {
            id: c + 1,
            name,
            image_count: Some(count),
        });
    }
    let mut images = Vec::new();
    let mut annotations: Vec<GroundTruthInstance> = Vec::new();
    let mut entries = Vec::new();
    // Grid slots keep objects on one image disjoint.
    let slot =
        |k: usize| BoundingBox::new((k % 8) as f64 * 50.0, (k / 8) as f64 * 50.0, 40.0, 40.0).expect("valid box");
    let background = |k: usize| {
        BoundingBox::new((k % 8) as f64 * 50.0, 1000.0 + (k / 8) as f64 * 50.0, 40.0, 40.0).expect("valid box")
    };
    for image_id in 1..=n_images {
        images.push(ImageRecord::exhaustive(image_id));
        let mut present: BTreeSet<u64> = BTreeSet::new();
        while present.len() < 3 {
            present.insert(rng.gen_range(1..=10));
        }
        if rng.gen_bool(0.4) {
            present.insert(rng.gen_range(11..=20));
        }
        if rng.gen_bool(0.3) {
            present.insert(rng.gen_range(21..=30));
        }
        let mut free_bg = 0usize;
        for (k, &c) in present.iter().enumerate() {
            let b = slot(k);
            annotations.push(GroundTruthInstance {
                id: annotations.len() as u64 + 1,
                image_id,
                category_id: c,
                bbox: b,
                ignore: false,
            });
            let (lo, hi, fps) = match c {
                1..=10 => (0.75, 0.99, 5),
                11..=20 => (0.30, 0.55, 1),
                _ => (0.20, 0.40, 0),
            };
            entries.push((image_id, c, b, rng.gen_range(lo..hi)));
            for _ in 0..fps {
                entries.push((image_id, c, background(free_bg), rng.gen_range(0.45..0.74)));
                free_bg += 1;
            }
        }
        // Extra confident false positives for frequent categories absent here.
        for _ in 0..6 {
            let c = rng.gen_range(1..=10);
            if !present.contains(&c) {
                entries.push((image_id, c, background(free_bg), rng.gen_range(0.45..0.74)));
                free_bg += 1;
            }
        }
    }
    entries.shuffle(&mut rng);
    let dataset = Dataset::new(images, categories, annotations).expect("fixture is valid");
    (dataset, DetectionSet::from_entries(entries))
}

/// Two categories with the same accuracy profile but different score
/// scales. Each detection has a latent hit probability `p` uniform in
/// `[0, 1]` and is a true positive with that probability. The first
/// category reports `0.5 + 0.5 p` (over-confident), the second `0.5 p`
/// (under-confident). Different seeds give disjoint splits.
pub fn shifted_scale_corpus(seed: u64, detections_per_category: usize) -> (Dataset, DetectionSet) {
    let mut rng = rng(seed);
    let categories = vec![
        Category {
            id: 1,
            name: "overconfident".into(),
            image_count: Some(500),
        },
        Category {
            id: 2,
            name: "underconfident".into(),
            image_count: Some(500),
        },
    ];
    let per_image = 20usize;
    let total = 2 * detections_per_category;
    let n_images = total.div_ceil(per_image);
    let images = (1..=n_images as u64).map(ImageRecord::exhaustive).collect();
    let mut annotations = Vec::new();
    let mut entries = Vec::new();
    for k in 0..total {
        let category_id = 1 + (k % 2) as u64;
        let image_id = 1 + (k / per_image) as u64;
        let slot = k % per_image;
        let hit_box = BoundingBox::new(slot as f64 * 50.0, 0.0, 40.0, 40.0).expect("valid box");
        let miss_box = BoundingBox::new(slot as f64 * 50.0, 500.0, 40.0, 40.0).expect("valid box");
        let p: f64 = rng.gen();
        let hit = rng.gen_bool(p);
        let score = if category_id == 1 { 0.5 + 0.5 * p } else { 0.5 * p };
        if hit {
            annotations.push(GroundTruthInstance {
                id: annotations.len() as u64 + 1,
                image_id,
                category_id,
                bbox: hit_box,
                ignore: false,
            });
        }
        entries.push((image_id, category_id, if hit { hit_box } else { miss_box }, score));
    }
    let dataset = Dataset::new(images, categories, annotations).expect("fixture is valid");
    (dataset, DetectionSet::from_entries(entries))
}

/// Large corpus for throughput checks: `images` images, `categories`
/// categories and roughly `detections` detections, about a tenth of which
/// overlap groundtruth.
pub fn bulk_corpus(seed: u64, images: usize, categories: usize, detections: usize) -> (Dataset, DetectionSet) {
    let mut rng = rng(seed);
    let cats: Vec<Category> = (0..categories)
        .map(|c| Category {
            id: c as u64 + 1,
            name: format!("class_{c}"),
            image_count: Some(match c % 3 {
                0 => 1 + (c as u64 % 10),
                1 => 11 + (c as u64 % 90),
                _ => 101 + c as u64,
            }),
        })
        .collect();
    let per_image = detections / images.max(1);
    let mut image_records = Vec::with_capacity(images);
    let mut annotations = Vec::new();
    let mut dets = Vec::with_capacity(detections);
    for i in 0..images {
        let image_id = i as u64 + 1;
        let mut record = ImageRecord::exhaustive(image_id);
        record.federated = true;
        let present: Vec<u64> = (0..6).map(|_| rng.gen_range(1..=categories as u64)).collect();
        for &c in &present {
            let bbox = random_box(&mut rng);
            annotations.push(GroundTruthInstance {
                id: annotations.len() as u64 + 1,
                image_id,
                category_id: c,
                bbox,
                ignore: false,
            });
            record.positive_category_ids.insert(c);
        }
        for _ in 0..20 {
            let c = rng.gen_range(1..=categories as u64);
            if !record.positive_category_ids.contains(&c) {
                record.negative_category_ids.insert(c);
            }
        }
        let universe: Vec<u64> = record
            .positive_category_ids
            .iter()
            .chain(&record.negative_category_ids)
            .copied()
            .collect();
        for k in 0..per_image {
            let (c, bbox) = if k < present.len() * 3 {
                let g = &annotations[annotations.len() - present.len() + k % present.len()];
                (g.category_id, jitter(&mut rng, &g.bbox))
            } else if k % 4 == 0 {
                (rng.gen_range(1..=categories as u64), random_box(&mut rng))
            } else {
                (*universe.choose(&mut rng).expect("non-empty"), random_box(&mut rng))
            };
            dets.push(Detection {
                id: dets.len() as u64,
                image_id,
                category_id: c,
                bbox,
                score: rng.gen(),
            });
        }
        image_records.push(record);
    }
    let dataset = Dataset::new(image_records, cats, annotations).expect("bulk corpus is valid");
    (dataset, DetectionSet::new(dets))
}
