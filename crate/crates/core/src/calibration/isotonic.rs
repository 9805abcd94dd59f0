use serde::{Deserialize, Serialize};

/// One pooled block of the isotonic fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsotonicBlock {
    pub lowest_score: f64,
    pub highest_score: f64,
    /// Mean score of the block's samples; the interpolation knot.
    pub center: f64,
    /// Positive rate of the block.
    pub value: f64,
    pub weight: f64,
}

/// Pool-adjacent-violators over `(score, label)` pairs.
///
/// Samples sharing a score are merged first so equal inputs always receive
/// equal outputs. Adjacent blocks are pooled whenever the earlier value is
/// not strictly below the later one, which leaves a strictly increasing
/// sequence of block values.
pub fn pav(samples: &[(f64, f64)]) -> Vec<IsotonicBlock> {
    let mut sorted: Vec<(f64, f64)> = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    struct Acc {
        lo: f64,
        hi: f64,
        w: f64,
        sum_y: f64,
        sum_s: f64,
    }
    let mut stack: Vec<Acc> = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i].0;
        let mut acc = Acc {
            lo: s,
            hi: s,
            w: 0.0,
            sum_y: 0.0,
            sum_s: 0.0,
        };
        while i < sorted.len() && sorted[i].0 == s {
            acc.w += 1.0;
            acc.sum_y += sorted[i].1;
            acc.sum_s += s;
            i += 1;
        }
        while let Some(prev) = stack.last() {
            if prev.sum_y / prev.w >= acc.sum_y / acc.w {
                let prev = stack.pop().expect("non-empty");
                acc = Acc {
                    lo: prev.lo,
                    hi: acc.hi,
                    w: prev.w + acc.w,
                    sum_y: prev.sum_y + acc.sum_y,
                    sum_s: prev.sum_s + acc.sum_s,
                };
            } else {
                break;
            }
        }
        stack.push(acc);
    }
    stack
        .into_iter()
        .map(|a| IsotonicBlock {
            lowest_score: a.lo,
            highest_score: a.hi,
            center: a.sum_s / a.w,
            value: a.sum_y / a.w,
            weight: a.w,
        })
        .collect()
}

/// Piecewise-linear interpolation through `(center, value)` knots, constant
/// beyond the ends.
pub(crate) fn interpolate(knots: &[[f64; 2]], s: f64) -> f64 {
    let Some(first) = knots.first() else {
        return s;
    };
    let last = knots[knots.len() - 1];
    if s <= first[0] {
        return first[1];
    }
    if s >= last[0] {
        return last[1];
    }
    let hi = knots.partition_point(|k| k[0] < s);
    let (a, b) = (knots[hi - 1], knots[hi]);
    if b[0] == a[0] {
        return b[1];
    }
    a[1] + (b[1] - a[1]) * (s - a[0]) / (b[0] - a[0])
}
