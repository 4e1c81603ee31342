//! Scoring (P@K with the multi-gold rule, MRR) and the χ² significance
//! comparison between two systems.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::Prediction;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction for {0:?} has no gold entry")]
    UnknownQuery(String),
    #[error("invalid eval config: {0}")]
    BadConfig(String),
    #[error("invalid counts: {0}")]
    BadCounts(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// K values for P@K, strictly ascending, all >= 1.
    pub ks: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { ks: vec![1, 5] }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.ks.iter().any(|&k| k == 0) {
            return Err(EvalError::BadConfig("every K must be >= 1".into()));
        }
        if self.ks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EvalError::BadConfig("ks must be strictly ascending".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemDetail {
    pub query: String,
    pub predicted: Option<String>,
    pub correct_at_1: bool,
    /// 1-based rank of the first gold hit in candidates_ranked.
    pub first_gold_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_items: usize,
    pub p_at_k: BTreeMap<usize, f64>,
    pub mrr: f64,
    /// Per-query correctness at K=1, in input order.
    pub correctness: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_item: Option<Vec<ItemDetail>>,
}

impl EvalReport {
    pub fn correct_at_1(&self) -> usize {
        self.correctness.iter().filter(|&&c| c).count()
    }

    /// Aligned text table with metrics scaled by 100.
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<8}{:>10}\n", "items", self.n_items));
        for (k, v) in &self.p_at_k {
            out.push_str(&format!("{:<8}{:>10.2}\n", format!("P@{k}"), v * 100.0));
        }
        out.push_str(&format!("{:<8}{:>10.2}\n", "MRR", self.mrr * 100.0));
        out
    }
}

pub type GoldMap = BTreeMap<String, BTreeSet<String>>;

fn is_gold(word: &str, golds: &BTreeSet<String>) -> bool {
    let lower = word.to_lowercase();
    golds.iter().any(|g| g.to_lowercase() == lower)
}

/// Score predictions against a multi-gold dictionary: an item is correct at K
/// when any of its top-K candidates matches any gold translation (lowercase
/// comparison). K=1 judges the `predicted` field; larger K truncate
/// `candidates_ranked`. MRR uses the first gold hit in `candidates_ranked`,
/// contributing 0 when there is none. Missing predictions count as incorrect.
pub fn score(
    predictions: &[Prediction],
    gold: &GoldMap,
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    cfg.validate()?;
    let n = predictions.len();
    let mut hits_at_k: BTreeMap<usize, usize> = cfg.ks.iter().map(|&k| (k, 0)).collect();
    let mut correctness = Vec::with_capacity(n);
    let mut per_item = Vec::with_capacity(n);
    let mut rr_sum = 0.0;

    for pred in predictions {
        let golds = gold
            .get(&pred.query)
            .ok_or_else(|| EvalError::UnknownQuery(pred.query.clone()))?;
        let correct_at_1 = pred
            .predicted
            .as_deref()
            .is_some_and(|w| is_gold(w, golds));
        let first_gold_rank = pred
            .candidates_ranked
            .iter()
            .position(|c| is_gold(c, golds))
            .map(|i| i + 1);
        for (&k, hits) in hits_at_k.iter_mut() {
            let hit = if k == 1 {
                correct_at_1
            } else {
                first_gold_rank.is_some_and(|r| r <= k)
            };
            if hit {
                *hits += 1;
            }
        }
        if let Some(rank) = first_gold_rank {
            rr_sum += 1.0 / rank as f64;
        }
        correctness.push(correct_at_1);
        per_item.push(ItemDetail {
            query: pred.query.clone(),
            predicted: pred.predicted.clone(),
            correct_at_1,
            first_gold_rank,
        });
    }

    let frac = |hits: usize| if n == 0 { 0.0 } else { hits as f64 / n as f64 };
    Ok(EvalReport {
        n_items: n,
        p_at_k: hits_at_k.into_iter().map(|(k, h)| (k, frac(h))).collect(),
        mrr: if n == 0 { 0.0 } else { rr_sum / n as f64 },
        correctness,
        per_item: Some(per_item),
    })
}

/// Survival function of χ² with 1 degree of freedom.
fn chi2_sf_1df(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    statrs::function::gamma::gamma_ur(0.5, x / 2.0)
}

/// Pearson χ² (1 dof, no continuity correction) on the 2×2 table
/// `[[correct_a, wrong_a], [correct_b, wrong_b]]`, p-value from the χ²(1)
/// survival function. A zero marginal (both systems all-correct or
/// all-wrong) is degenerate: the statistic is undefined, so this logs a
/// warning and reports (0.0, 1.0) — no evidence of a difference.
pub fn chi_square_compare(
    correct_a: u64,
    total_a: u64,
    correct_b: u64,
    total_b: u64,
) -> Result<(f64, f64), EvalError> {
    if total_a == 0 || total_b == 0 {
        return Err(EvalError::BadCounts("totals must be positive".into()));
    }
    if correct_a > total_a || correct_b > total_b {
        return Err(EvalError::BadCounts("correct exceeds total".into()));
    }
    let a = correct_a as f64;
    let b = (total_a - correct_a) as f64;
    let c = correct_b as f64;
    let d = (total_b - correct_b) as f64;
    let n = a + b + c + d;
    let col_correct = a + c;
    let col_wrong = b + d;
    if col_correct == 0.0 || col_wrong == 0.0 {
        log::warn!(
            "degenerate 2x2 table ({correct_a}/{total_a} vs {correct_b}/{total_b}): \
             a column marginal is zero; reporting chi2=0, p=1"
        );
        return Ok((0.0, 1.0));
    }
    let chi2 = n * (a * d - b * c).powi(2) / ((a + b) * (c + d) * col_correct * col_wrong);
    Ok((chi2, chi2_sf_1df(chi2)))
}

/// The conventional significance label for a p-value, if any threshold is met.
pub fn significance_label(p: f64) -> Option<&'static str> {
    if p < 1e-3 {
        Some("statistically highly significant (p < 1e-3)")
    } else if p < 0.05 {
        Some("statistically significant (p < 0.05)")
    } else {
        None
    }
}
