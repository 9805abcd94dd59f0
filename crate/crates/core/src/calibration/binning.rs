use serde::{Deserialize, Serialize};

/// Equal-frequency bins over the sorted scores with Laplace-smoothed rates.
///
/// `edges` holds the `rates.len() - 1` interior boundaries; a score lands in
/// the first bin whose upper edge exceeds it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBins {
    pub edges: Vec<f64>,
    pub rates: Vec<f64>,
}

impl HistogramBins {
    pub fn bin(&self, score: f64) -> usize {
        self.edges.partition_point(|&e| e <= score)
    }

    pub fn apply(&self, score: f64) -> f64 {
        self.rates[self.bin(score)]
    }

    pub fn is_monotone(&self) -> bool {
        self.rates.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Bins sorted samples into `bins` contiguous groups whose sizes differ by at
/// most one. Returns the bins and each group's `(count, positives)`.
pub(crate) fn equal_frequency(sorted: &[(f64, f64)], bins: usize) -> (HistogramBins, Vec<(f64, f64)>) {
    let n = sorted.len();
    let bins = bins.clamp(1, n.max(1));
    let bound = |k: usize| k * n / bins;
    let mut edges = Vec::with_capacity(bins - 1);
    let mut rates = Vec::with_capacity(bins);
    let mut tallies = Vec::with_capacity(bins);
    for k in 0..bins {
        let group = &sorted[bound(k)..bound(k + 1)];
        let count = group.len() as f64;
        let pos: f64 = group.iter().map(|s| s.1).sum();
        rates.push((pos + 1.0) / (count + 2.0));
        tallies.push((count, pos));
        if k + 1 < bins {
            let last = sorted[bound(k + 1) - 1].0;
            let next = sorted[bound(k + 1)].0;
            edges.push(0.5 * (last + next));
        }
    }
    (HistogramBins { edges, rates }, tallies)
}

pub(crate) fn histogram_bin_count(n: usize) -> usize {
    (n / 10).clamp(1, 15)
}

/// Largest integer whose cube does not exceed `n`.
fn icbrt(n: usize) -> usize {
    let mut r = (n as f64).cbrt().round() as usize;
    while r * r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Candidate bin counts `max(1, floor(cbrt(n)/2)) ..= ceil(2 cbrt(n))`,
/// capped at `n`. Integer arithmetic keeps perfect cubes exact.
pub fn bbq_candidates(n: usize) -> std::ops::RangeInclusive<usize> {
    let lo = (icbrt(n) / 2).max(1);
    // ceil(2 * cbrt(n)) = smallest m with m^3 >= 8n.
    let mut hi = 2 * icbrt(n);
    while hi * hi * hi < 8 * n {
        hi += 1;
    }
    let hi = hi.min(n).max(lo);
    lo..=hi
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BbqComponent {
    pub weight: f64,
    pub aic: f64,
    pub bins: HistogramBins,
}

pub(crate) fn fit_components(sorted: &[(f64, f64)]) -> Vec<BbqComponent> {
    let mut comps: Vec<BbqComponent> = bbq_candidates(sorted.len())
        .map(|b| {
            let (bins, tallies) = equal_frequency(sorted, b);
            let log_l: f64 = tallies
                .iter()
                .zip(&bins.rates)
                .map(|(&(count, pos), &r)| pos * r.ln() + (count - pos) * (1.0 - r).ln())
                .sum();
            let aic = 2.0 * bins.rates.len() as f64 - 2.0 * log_l;
            BbqComponent { weight: 0.0, aic, bins }
        })
        .collect();
    let best = comps.iter().map(|c| c.aic).fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = comps.iter().map(|c| (-(c.aic - best) / 2.0).exp()).collect();
    let total: f64 = raw.iter().sum();
    for (c, w) in comps.iter_mut().zip(raw) {
        c.weight = w / total;
    }
    comps
}
