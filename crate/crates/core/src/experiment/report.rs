//! Aggregation and rendering of experiment results.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::matrix::Setting;
use super::stats::{permutation_test, PermutationTest};
use crate::asrsim::AlignmentStats;
use crate::error::Result;
use crate::nnet::Objective;
use crate::slu::metrics::mean_std;

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Test-set metrics of one fine-tuning run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub objective: Objective,
    pub setting: Setting,
    pub seed: u64,
    /// Epoch whose parameters were kept.
    pub epoch: usize,
    pub intent_acc: f64,
    pub slot_f1: f64,
    pub joint_acc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    IntentAcc,
    SlotF1,
    JointAcc,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::IntentAcc, Metric::SlotF1, Metric::JointAcc];

    pub fn of(self, r: &RunRecord) -> f64 {
        match self {
            Metric::IntentAcc => r.intent_acc,
            Metric::SlotF1 => r.slot_f1,
            Metric::JointAcc => r.joint_acc,
        }
    }

    pub fn header(self) -> &'static str {
        match self {
            Metric::IntentAcc => "intent",
            Metric::SlotF1 => "slot F1",
            Metric::JointAcc => "joint",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSummary {
    pub train: AlignmentStats,
    pub val: AlignmentStats,
    pub test: AlignmentStats,
    pub fully_deleted: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub objective: Objective,
    pub setting: Setting,
    pub metric: Metric,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

/// WLM minus MLM on one setting and metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub setting: Setting,
    pub metric: Metric,
    pub wlm_minus_mlm: f64,
    pub p_value: f64,
    pub exact: bool,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub runs: Vec<RunRecord>,
    pub noise: NoiseSummary,
}

impl ExperimentReport {
    /// Runs are sorted by (objective, setting, seed).
    pub fn new(mut runs: Vec<RunRecord>, noise: NoiseSummary) -> Self {
        runs.sort_by(|a, b| {
            (a.objective.as_str(), a.setting, a.seed).cmp(&(b.objective.as_str(), b.setting, b.seed))
        });
        ExperimentReport { runs, noise }
    }

    pub fn objectives(&self) -> Vec<Objective> {
        let mut o: Vec<Objective> = self.runs.iter().map(|r| r.objective).collect();
        o.dedup();
        o
    }

    pub fn settings(&self) -> Vec<Setting> {
        let mut s: Vec<Setting> = self.runs.iter().map(|r| r.setting).collect();
        s.sort();
        s.dedup();
        s
    }

    pub fn values(&self, objective: Objective, setting: Setting, metric: Metric) -> Vec<f64> {
        self.runs
            .iter()
            .filter(|r| r.objective == objective && r.setting == setting)
            .map(|r| metric.of(r))
            .collect()
    }

    pub fn cell(&self, objective: Objective, setting: Setting, metric: Metric) -> Option<CellSummary> {
        let v = self.values(objective, setting, metric);
        if v.is_empty() {
            return None;
        }
        let (mean, std) = mean_std(&v);
        Some(CellSummary {
            objective,
            setting,
            metric,
            n: v.len(),
            mean,
            std,
        })
    }

    pub fn summaries(&self) -> Vec<CellSummary> {
        let mut out = Vec::new();
        for o in self.objectives() {
            for s in self.settings() {
                out.extend(Metric::ALL.iter().filter_map(|&m| self.cell(o, s, m)));
            }
        }
        out
    }

    pub fn significance(&self) -> Vec<Significance> {
        let mut out = Vec::new();
        for s in self.settings() {
            for m in Metric::ALL {
                let mlm = self.values(Objective::Mlm, s, m);
                let wlm = self.values(Objective::Wlm, s, m);
                if mlm.is_empty() || wlm.is_empty() {
                    continue;
                }
                let PermutationTest { difference, p_value, exact } = permutation_test(&mlm, &wlm);
                out.push(Significance {
                    setting: s,
                    metric: m,
                    wlm_minus_mlm: difference,
                    p_value,
                    exact,
                    significant: p_value < SIGNIFICANCE_LEVEL,
                });
            }
        }
        out
    }

    /// One JSON object per line: runs, then cell summaries, then tests.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for r in &self.runs {
            s.push_str(&serde_json::to_string(r)?);
            s.push('\n');
        }
        for c in self.summaries() {
            s.push_str(&serde_json::to_string(&c)?);
            s.push('\n');
        }
        for t in self.significance() {
            s.push_str(&serde_json::to_string(&t)?);
            s.push('\n');
        }
        s.push_str(&serde_json::to_string(&self.noise)?);
        s.push('\n');
        Ok(s)
    }

    /// Fixed-width table in percent: objectives down, settings × metrics
    /// across, `mean±std` over seeds. `*` marks a WLM cell that differs
    /// from MLM at the significance level.
    pub fn render_table(&self) -> String {
        const CELL: usize = 14;
        let settings = self.settings();
        let sig = self.significance();
        let mut out = String::new();
        let _ = write!(out, "{:<10}", "");
        for s in &settings {
            let _ = write!(out, "| {:^w$}", s.as_str(), w = CELL * 3);
        }
        out.push('\n');
        let _ = write!(out, "{:<10}", "objective");
        for _ in &settings {
            out.push_str("| ");
            for m in Metric::ALL {
                let _ = write!(out, "{:^CELL$}", m.header());
            }
        }
        out.push('\n');
        out.push_str(&"-".repeat(10 + settings.len() * (CELL * 3 + 2)));
        out.push('\n');
        for o in self.objectives() {
            let _ = write!(out, "{:<10}", o.as_str().to_uppercase());
            for &s in &settings {
                out.push_str("| ");
                for m in Metric::ALL {
                    let text = match self.cell(o, s, m) {
                        Some(c) => {
                            let mark = o == Objective::Wlm
                                && sig.iter().any(|t| t.setting == s && t.metric == m && t.significant);
                            format!("{:.2}±{:.2}{}", c.mean * 100.0, c.std * 100.0, if mark { "*" } else { "" })
                        }
                        None => "-".to_string(),
                    };
                    let _ = write!(out, "{text:^CELL$}");
                }
            }
            out.push('\n');
        }
        if !sig.is_empty() {
            out.push('\n');
            for t in &sig {
                let _ = writeln!(
                    out,
                    "{:<12} {:<8} WLM-MLM {:+7.2}  p = {:.4}{}",
                    t.setting.as_str(),
                    t.metric.header(),
                    (t.wlm_minus_mlm * 1e8).round() / 1e6 + 0.0,
                    t.p_value,
                    if t.significant { "  *" } else { "" }
                );
            }
        }
        let n = &self.noise;
        let _ = writeln!(
            out,
            "\nnoise WER: train {:.3}, val {:.3}, test {:.3}; fully deleted utterances: {}",
            n.train.wer, n.val.wer, n.test.wer, n.fully_deleted
        );
        out
    }
}
