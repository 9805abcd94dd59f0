use serde::{Deserialize, Serialize};

use crate::model::{frequency_group, Dataset, DetectionSet, FrequencyGroup, FrequencyThresholds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScoreStats {
    pub group: FrequencyGroup,
    pub count: usize,
    pub mean: Option<f64>,
    /// Mean divided by the frequent group's mean.
    pub normalized_mean: Option<f64>,
    /// Equal-width bins over `[0, 1]`; a score of exactly 1 lands in the
    /// last bin.
    pub histogram: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub bins: usize,
    pub groups: Vec<GroupScoreStats>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ScoreDistribution {
    pub fn group(&self, group: FrequencyGroup) -> Option<&GroupScoreStats> {
        self.groups.iter().find(|g| g.group == group)
    }
}

/// Per frequency group: detection count, mean score and histogram. Detections
/// whose category is not in the dataset are skipped. The unknown group is
/// reported only when it has detections.
pub fn score_distribution(
    dets: &DetectionSet,
    dataset: &Dataset,
    thresholds: FrequencyThresholds,
    bins: usize,
) -> ScoreDistribution {
    let bins = bins.max(1);
    let all = [
        FrequencyGroup::Rare,
        FrequencyGroup::Common,
        FrequencyGroup::Frequent,
        FrequencyGroup::Unknown,
    ];
    let mut sums = [0.0f64; 4];
    let mut counts = [0usize; 4];
    let mut hists = vec![vec![0usize; bins]; 4];
    for d in dets {
        let Some(cat) = dataset.category(d.category_id) else {
            continue;
        };
        let g = all
            .iter()
            .position(|g| *g == frequency_group(cat, thresholds))
            .expect("every group listed");
        sums[g] += d.score;
        counts[g] += 1;
        let bin = ((d.score * bins as f64) as usize).min(bins - 1);
        hists[g][bin] += 1;
    }
    let means: Vec<Option<f64>> = (0..4)
        .map(|g| (counts[g] > 0).then(|| sums[g] / counts[g] as f64))
        .collect();
    let frequent_mean = means[2].filter(|m| *m > 0.0);

    let mut warnings = Vec::new();
    let mut groups = Vec::new();
    for (g, group) in all.iter().enumerate() {
        if *group == FrequencyGroup::Unknown && counts[g] == 0 {
            continue;
        }
        if counts[g] == 0 {
            warnings.push(format!("empty group: no detections for {group} categories"));
        }
        groups.push(GroupScoreStats {
            group: *group,
            count: counts[g],
            mean: means[g],
            normalized_mean: means[g].zip(frequent_mean).map(|(m, f)| m / f),
            histogram: hists[g].clone(),
        });
    }
    ScoreDistribution { bins, groups, warnings }
}
