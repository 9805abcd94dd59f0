//! Ranking policies: which detections enter evaluation.
//!
//! A per-image cap makes categories compete for a shared budget on every
//! image, so the surviving set depends on scores across categories. A
//! dataset-wide per-class cap gives every category an independent budget.
//! When both are set the per-class cap runs first.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{rank_order, Detection, DetectionSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RankingPolicy {
    pub max_dets_per_image: Option<usize>,
    /// Dataset-wide budget per category.
    pub max_dets_per_class: Option<usize>,
}

impl RankingPolicy {
    pub const AP_OLD_DETS_PER_IMAGE: usize = 300;
    pub const AP_FIXED_DETS_PER_CLASS: usize = 10_000;

    pub fn new(max_dets_per_image: Option<usize>, max_dets_per_class: Option<usize>) -> Self {
        RankingPolicy {
            max_dets_per_image,
            max_dets_per_class,
        }
    }

    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn ap_old() -> Self {
        Self::new(Some(Self::AP_OLD_DETS_PER_IMAGE), None)
    }

    pub fn ap_fixed() -> Self {
        Self::new(None, Some(Self::AP_FIXED_DETS_PER_CLASS))
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_dets_per_image == Some(0) || self.max_dets_per_class == Some(0) {
            return Err(Error::InvalidConfig("detection limits must be at least 1".into()));
        }
        Ok(())
    }
}

impl fmt::Display for RankingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: Option<usize>| v.map_or_else(|| "none".to_string(), |v| v.to_string());
        write!(
            f,
            "dets/class={} dets/im={}",
            show(self.max_dets_per_class),
            show(self.max_dets_per_image)
        )
    }
}

/// Keeps the `n` best detections (score desc, id asc) within each group,
/// returning the set in input order.
fn limit_per_group<K: Hash + Eq>(dets: &DetectionSet, n: usize, key: impl Fn(&Detection) -> K) -> DetectionSet {
    assert!(n >= 1, "detection limit must be at least 1");
    let all = dets.as_slice();
    let mut groups: HashMap<K, Vec<u32>> = HashMap::new();
    for (i, d) in all.iter().enumerate() {
        groups.entry(key(d)).or_default().push(i as u32);
    }
    let mut keep = vec![true; all.len()];
    let by_rank = |a: &u32, b: &u32| {
        let (a, b) = (&all[*a as usize], &all[*b as usize]);
        rank_order(a.score, a.id, b.score, b.id)
    };
    for members in groups.values_mut() {
        if members.len() <= n {
            continue;
        }
        members.select_nth_unstable_by(n - 1, by_rank);
        for &i in &members[n..] {
            keep[i as usize] = false;
        }
    }
    all.iter().zip(&keep).filter(|(_, k)| **k).map(|(d, _)| *d).collect()
}

/// Per image, keeps the `n` highest-ranked detections across all categories.
pub fn limit_per_image(dets: &DetectionSet, n: usize) -> DetectionSet {
    limit_per_group(dets, n, |d| d.image_id)
}

/// Per category, keeps the `k` highest-ranked detections over the whole set.
pub fn limit_per_class(dets: &DetectionSet, k: usize) -> DetectionSet {
    limit_per_group(dets, k, |d| d.category_id)
}

pub fn apply_policy(dets: &DetectionSet, policy: &RankingPolicy) -> DetectionSet {
    let after_class = match policy.max_dets_per_class {
        Some(k) => limit_per_class(dets, k),
        None => dets.clone(),
    };
    match policy.max_dets_per_image {
        Some(n) => limit_per_image(&after_class, n),
        None => after_class,
    }
}
