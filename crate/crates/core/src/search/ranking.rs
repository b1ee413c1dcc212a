//! Ranking policies over trial records.
//!
//! * meanMAE: ascending mean of each configuration's MAEs.
//! * medianMAE: ascending median.
//! * bagging: per trial the `k` lowest MAEs are marked; descending count of
//!   marks (`f_topk`), ties by mean MAE.
//!
//! Remaining ties fall back to the configuration string.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TrialRecord;
use crate::error::{Error, Result};
use crate::ingest::median;
use crate::models::ModelConfig;

pub const RANKING_SCHEMA: &str = "scour.ranking/1";
pub const DEFAULT_TOP_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Policy {
    #[serde(rename = "meanMAE")]
    MeanMae,
    #[serde(rename = "medianMAE")]
    MedianMae,
    #[serde(rename = "bagging")]
    Bagging,
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "meanMAE" => Ok(Policy::MeanMae),
            "medianMAE" => Ok(Policy::MedianMae),
            "bagging" => Ok(Policy::Bagging),
            other => Err(Error::Config(format!("unknown policy `{other}`"))),
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Policy::MeanMae => "meanMAE",
            Policy::MedianMae => "medianMAE",
            Policy::Bagging => "bagging",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    /// 1-based position.
    pub rank: usize,
    pub config: ModelConfig,
    /// The policy's statistic: mean MAE, median MAE, or `f_topk`.
    pub statistic: f64,
    pub mean_mae: f64,
    pub median_mae: f64,
    /// Number of records of this configuration.
    pub f: usize,
    /// Number of trials in which this configuration was among the `k` best.
    pub f_topk: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRanking {
    pub schema: String,
    pub policy: Policy,
    /// Cut-off used for `f_topk`.
    pub k: usize,
    pub entries: Vec<RankEntry>,
    /// Configurations of the search space that never appeared in a trial.
    pub unobserved: Vec<ModelConfig>,
}

impl PolicyRanking {
    pub fn top(&self, n: usize) -> Vec<ModelConfig> {
        self.entries.iter().take(n).map(|e| e.config).collect()
    }

    /// Lists the members of `space` that have no records.
    pub fn with_unobserved(mut self, space: &[ModelConfig]) -> Self {
        self.unobserved = space.iter().filter(|c| !self.entries.iter().any(|e| e.config == **c)).copied().collect();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ranking serialises")
    }
}

struct Stats {
    maes: Vec<f64>,
    f_topk: usize,
}

/// Counts top-`k` markings per trial; `strict` requires every trial to hold
/// at least `k` records.
fn gather(records: &[TrialRecord], k: usize, strict: bool) -> Result<BTreeMap<ModelConfig, Stats>> {
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    let mut by_cfg: BTreeMap<ModelConfig, Stats> = BTreeMap::new();
    let mut by_trial: BTreeMap<usize, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        by_cfg.entry(r.config).or_insert(Stats { maes: Vec::new(), f_topk: 0 }).maes.push(r.val_mae);
        by_trial.entry(r.trial_index).or_default().push(r);
    }
    for (trial, mut recs) in by_trial {
        if strict && recs.len() < k {
            return Err(Error::TrialTooSmall { trial, size: recs.len(), k });
        }
        recs.sort_by(|a, b| a.val_mae.total_cmp(&b.val_mae).then_with(|| a.config.cmp(&b.config)));
        for r in recs.iter().take(k) {
            by_cfg.get_mut(&r.config).expect("config gathered").f_topk += 1;
        }
    }
    Ok(by_cfg)
}

fn rank(policy: Policy, k: usize, stats: BTreeMap<ModelConfig, Stats>) -> PolicyRanking {
    let mut entries: Vec<RankEntry> = stats
        .into_iter()
        .map(|(config, mut s)| {
            let mean_mae = s.maes.iter().sum::<f64>() / s.maes.len() as f64;
            let f = s.maes.len();
            let median_mae = median(&mut s.maes);
            let statistic = match policy {
                Policy::MeanMae => mean_mae,
                Policy::MedianMae => median_mae,
                Policy::Bagging => s.f_topk as f64,
            };
            RankEntry { rank: 0, config, statistic, mean_mae, median_mae, f, f_topk: s.f_topk }
        })
        .collect();
    let by_config = |a: &RankEntry, b: &RankEntry| a.config.cmp(&b.config);
    entries.sort_by(|a, b| -> Ordering {
        match policy {
            Policy::MeanMae | Policy::MedianMae => a.statistic.total_cmp(&b.statistic),
            Policy::Bagging => b.f_topk.cmp(&a.f_topk).then_with(|| a.mean_mae.total_cmp(&b.mean_mae)),
        }
        .then_with(|| by_config(a, b))
    });
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    PolicyRanking { schema: RANKING_SCHEMA.to_string(), policy, k, entries, unobserved: Vec::new() }
}

/// Ascending mean MAE; `f_topk` is reported with `k = 3`.
pub fn rank_mean_mae(records: &[TrialRecord]) -> Result<PolicyRanking> {
    Ok(rank(Policy::MeanMae, DEFAULT_TOP_K, gather(records, DEFAULT_TOP_K, false)?))
}

/// Ascending median MAE; `f_topk` is reported with `k = 3`.
pub fn rank_median_mae(records: &[TrialRecord]) -> Result<PolicyRanking> {
    Ok(rank(Policy::MedianMae, DEFAULT_TOP_K, gather(records, DEFAULT_TOP_K, false)?))
}

/// Descending top-`k` frequency across trials.
pub fn rank_bagging(records: &[TrialRecord], k: usize) -> Result<PolicyRanking> {
    if k == 0 {
        return Err(Error::Config("bagging needs k >= 1".into()));
    }
    Ok(rank(Policy::Bagging, k, gather(records, k, true)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::parse_config;

    fn rec(cfg: &str, trial: usize, mae: f64) -> TrialRecord {
        TrialRecord { config: parse_config(cfg).unwrap(), trial_index: trial, val_mae: mae }
    }

    const A: &str = "ss-(168,168)-32-0";
    const B: &str = "ss-(336,168)-64-0";
    const C: &str = "ss-(720,168)-128-0.2";

    #[test]
    fn mean_and_median_diverge() {
        let records =
            vec![rec(A, 0, 1.0), rec(A, 1, 1.0), rec(A, 2, 10.0), rec(B, 0, 2.0), rec(B, 1, 2.0), rec(B, 2, 2.0)];
        let mean = rank_mean_mae(&records).unwrap();
        assert_eq!(mean.top(2), vec![parse_config(B).unwrap(), parse_config(A).unwrap()]);
        assert_eq!(mean.entries[0].statistic, 2.0);
        assert_eq!(mean.entries[1].statistic, 4.0);
        let med = rank_median_mae(&records).unwrap();
        assert_eq!(med.top(2), vec![parse_config(A).unwrap(), parse_config(B).unwrap()]);
        assert_eq!(med.entries[0].statistic, 1.0);
        assert_eq!(med.entries[1].statistic, 2.0);
        assert_eq!(med.entries[0].f, 3);
    }

    #[test]
    fn single_config_and_ties() {
        let one = rank_mean_mae(&[rec(B, 0, 0.5)]).unwrap();
        assert_eq!(one.entries.len(), 1);
        assert_eq!(one.entries[0].rank, 1);
        let tied = rank_mean_mae(&[rec(C, 0, 1.0), rec(B, 0, 1.0), rec(A, 0, 1.0)]).unwrap();
        let mut names: Vec<String> = [A, B, C].iter().map(|s| s.to_string()).collect();
        names.sort();
        let got: Vec<String> = tied.entries.iter().map(|e| e.config.to_string()).collect();
        assert_eq!(got, names);
        assert_eq!(rank_mean_mae(&[]).unwrap_err(), Error::NoRecords);
    }

    #[test]
    fn bagging_counts_top_k_marks() {
        let records = vec![
            rec(A, 0, 1.0),
            rec(B, 0, 2.0),
            rec(C, 0, 3.0),
            rec(A, 1, 1.0),
            rec(B, 1, 3.0),
            rec(C, 1, 2.0),
            rec(A, 2, 1.0),
            rec(C, 2, 2.0),
        ];
        let r = rank_bagging(&records, 1).unwrap();
        assert_eq!(r.entries[0].config, parse_config(A).unwrap());
        assert_eq!(r.entries[0].f_topk, 3);
        let r2 = rank_bagging(&records, 2).unwrap();
        let f: Vec<usize> = r2.entries.iter().map(|e| e.f_topk).collect();
        assert_eq!(f, vec![3, 2, 1]);
        assert_eq!(r2.top(2), vec![parse_config(A).unwrap(), parse_config(C).unwrap()]);
        assert_eq!(rank_bagging(&records, 3).unwrap_err(), Error::TrialTooSmall { trial: 2, size: 2, k: 3 });
    }

    #[test]
    fn saturated_bagging_orders_by_frequency_then_mean() {
        let records = vec![rec(A, 0, 5.0), rec(B, 0, 1.0), rec(A, 1, 5.0), rec(B, 1, 1.0), rec(C, 1, 0.1)];
        let r = rank_bagging(&records, 2).unwrap();
        let got: Vec<(String, usize)> = r.entries.iter().map(|e| (e.config.to_string(), e.f_topk)).collect();
        assert_eq!(got, vec![(B.into(), 2), (C.into(), 1), (A.into(), 1)]);
    }

    #[test]
    fn unobserved_configs_are_listed() {
        let space: Vec<ModelConfig> = [A, B, C].iter().map(|s| parse_config(s).unwrap()).collect();
        let r = rank_mean_mae(&[rec(A, 0, 1.0)]).unwrap().with_unobserved(&space);
        assert_eq!(r.unobserved, space[1..].to_vec());
    }

    #[test]
    fn policy_names() {
        for p in [Policy::MeanMae, Policy::MedianMae, Policy::Bagging] {
            assert_eq!(p.to_string().parse::<Policy>().unwrap(), p);
        }
        assert!("best".parse::<Policy>().is_err());
    }
}
