use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{MatchRecord, Outcome};
use crate::model::{rank_order, Interpolation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// Precision/recall trace in rank order plus its interpolated envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    points: Vec<PrPoint>,
    /// `envelope[i]` is the highest precision at rank `i` or later.
    envelope: Vec<f64>,
    n_gt: usize,
}

impl PrCurve {
    /// Builds the curve from true-positive flags already in rank order.
    pub fn from_ranked(tp_flags: impl IntoIterator<Item = bool>, n_gt: usize) -> Result<Self> {
        if n_gt == 0 {
            return Err(Error::UndefinedCurve);
        }
        let mut tp = 0usize;
        let mut seen = 0usize;
        let points: Vec<PrPoint> = tp_flags
            .into_iter()
            .map(|is_tp| {
                seen += 1;
                tp += is_tp as usize;
                PrPoint {
                    recall: tp as f64 / n_gt as f64,
                    precision: tp as f64 / seen as f64,
                }
            })
            .collect();
        let mut envelope: Vec<f64> = points.iter().map(|p| p.precision).collect();
        for i in (0..envelope.len().saturating_sub(1)).rev() {
            envelope[i] = envelope[i].max(envelope[i + 1]);
        }
        Ok(PrCurve { points, envelope, n_gt })
    }

    pub fn points(&self) -> &[PrPoint] {
        &self.points
    }

    pub fn envelope(&self) -> &[f64] {
        &self.envelope
    }

    pub fn n_gt(&self) -> usize {
        self.n_gt
    }

    pub fn max_recall(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.recall)
    }

    /// Envelope value at recall `r`: highest precision among points with
    /// recall at least `r`, or zero past the end of the curve.
    pub fn envelope_at(&self, r: f64) -> f64 {
        let idx = self.points.partition_point(|p| p.recall < r);
        self.envelope.get(idx).copied().unwrap_or(0.0)
    }
}

/// Builds a curve from match records of one (category, threshold). Ignored
/// records are skipped.
pub fn pr_curve(records: &[MatchRecord], n_gt: usize) -> Result<PrCurve> {
    let mut ranked: Vec<&MatchRecord> = records.iter().filter(|r| r.outcome != Outcome::Ignored).collect();
    ranked.sort_by(|a, b| rank_order(a.score, a.detection_id, b.score, b.detection_id));
    PrCurve::from_ranked(ranked.iter().map(|r| r.outcome.is_tp()), n_gt)
}

pub fn average_precision(curve: &PrCurve, interpolation: Interpolation) -> f64 {
    match interpolation {
        Interpolation::Exact => {
            let mut prev_recall = 0.0;
            let mut area = 0.0;
            for (p, env) in curve.points.iter().zip(&curve.envelope) {
                if p.recall > prev_recall {
                    area += (p.recall - prev_recall) * env;
                    prev_recall = p.recall;
                }
            }
            area
        }
        Interpolation::Sampled(n) => {
            let n = n.max(2);
            let last = (n - 1) as f64;
            let sum: f64 = (0..n).map(|k| curve.envelope_at(k as f64 / last)).sum();
            sum / n as f64
        }
    }
}
