use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{categories_in_groups, evaluate, EvalReport};
use crate::error::{Error, Result};
use crate::model::{Dataset, DetectionSet, EvalConfig, FrequencyGroup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    DetsPerImage,
    DetsPerClass,
}

impl SweepAxis {
    /// Column header used in text tables.
    pub fn header(self) -> &'static str {
        match self {
            SweepAxis::DetsPerImage => "dets/im",
            SweepAxis::DetsPerClass => "dets/class",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::DetsPerImage => "dets-per-image",
            SweepAxis::DetsPerClass => "dets-per-class",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dets-per-image" | "dets_per_image" | "image" => Ok(SweepAxis::DetsPerImage),
            "dets-per-class" | "dets_per_class" | "class" => Ok(SweepAxis::DetsPerClass),
            other => Err(Error::InvalidConfig(format!(
                "sweep axis must be dets-per-image or dets-per-class, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `None` means the limit on this axis is lifted.
    pub limit: Option<usize>,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

/// Evaluates once per limit on `axis`, keeping the other axis of the
/// configured policy. Every value is matched from scratch: a tighter
/// per-image cap changes which detections compete in greedy matching, so
/// outcomes from a looser run cannot be reused.
pub fn sweep(
    dataset: &Dataset,
    dets: &DetectionSet,
    axis: SweepAxis,
    values: &[Option<usize>],
    config: &EvalConfig,
) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one value".into()));
    }
    let rows = values
        .iter()
        .map(|&limit| {
            let mut cfg = config.clone();
            match axis {
                SweepAxis::DetsPerImage => cfg.ranking_policy.max_dets_per_image = limit,
                SweepAxis::DetsPerClass => cfg.ranking_policy.max_dets_per_class = limit,
            }
            Ok(SweepRow {
                limit,
                report: evaluate(dataset, dets, &cfg)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepTable { axis, rows })
}

/// Evaluates only the categories in `groups`: other categories are removed
/// from groundtruth and detections before the ranking policy runs, so they
/// no longer compete for per-image budget.
pub fn subset_evaluate(
    dataset: &Dataset,
    dets: &DetectionSet,
    groups: &BTreeSet<FrequencyGroup>,
    config: &EvalConfig,
) -> Result<EvalReport> {
    if groups.is_empty() {
        return Err(Error::InvalidConfig("subset needs at least one frequency group".into()));
    }
    let keep = categories_in_groups(dataset, groups, config);
    let restricted = dataset.restrict_categories(|c| keep.contains(&c.id));
    let kept_dets = dets.filtered(|d| keep.contains(&d.category_id));
    let mut report = evaluate(&restricted, &kept_dets, config)?;
    if restricted.categories().is_empty() {
        report.flags.push("subset selects no categories".to_string());
    }
    Ok(report)
}
