//! Turning factors into belief labels and scoring them against ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorize::FactorPair;
use crate::linalg::DenseMatrix;

/// Row-wise argmax labels of `M` (claims) and `U` (sources).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub claim_labels: Vec<usize>,
    pub claim_scores: Vec<f64>,
    pub source_labels: Vec<usize>,
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn argmax_rows(a: &DenseMatrix) -> (Vec<usize>, Vec<f64>) {
    a.rows()
        .map(|r| {
            let i = argmax(r);
            (i, r[i])
        })
        .unzip()
}

pub fn assign(f: &FactorPair) -> Assignment {
    let (claim_labels, claim_scores) = argmax_rows(&f.m);
    let (source_labels, _) = argmax_rows(&f.u);
    Assignment { claim_labels, claim_scores, source_labels }
}

/// `confusion[p][t]` counts items predicted `p` with truth `t`.
pub fn confusion(pred: &[usize], truth: &[usize], k: usize) -> Vec<Vec<u64>> {
    let mut c = vec![vec![0u64; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        c[p][t] += 1;
    }
    c
}

fn check_labels(pred: &[usize], truth: &[usize], k: usize) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::shape("labels", format!("{} predictions vs {} truths", pred.len(), truth.len())));
    }
    if let Some(l) = pred.iter().chain(truth).find(|&&l| l >= k) {
        return Err(Error::Argument(format!("label {l} out of range for k = {k}")));
    }
    Ok(())
}

/// Minimum-cost perfect assignment on a square cost matrix (Kuhn-Munkres
/// with row/column potentials). Returns `col_of_row`.
fn min_cost_assignment(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    const INF: i64 = i64::MAX / 4;
    // 1-based internally; index 0 is a virtual column
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0; n];
    for j in 1..=n {
        if row_of_col[j] > 0 {
            col_of_row[row_of_col[j] - 1] = j - 1;
        }
    }
    col_of_row
}

/// Relabeling `perm[predicted] = truth label` that maximizes agreement.
///
/// With `pin_overlap`, predicted region 0 is kept on truth region 0 and only
/// the remaining regions are matched.
pub fn align(pred: &[usize], truth: &[usize], k: usize, pin_overlap: bool) -> Result<Vec<usize>> {
    check_labels(pred, truth, k)?;
    let conf = confusion(pred, truth, k);
    let offset = usize::from(pin_overlap && k > 0);
    let cost: Vec<Vec<i64>> = (offset..k).map(|p| (offset..k).map(|t| -(conf[p][t] as i64)).collect()).collect();
    let mut perm: Vec<usize> = (0..offset).collect();
    perm.extend(min_cost_assignment(&cost).into_iter().map(|t| t + offset));
    Ok(perm)
}

pub fn apply_permutation(pred: &[usize], perm: &[usize]) -> Vec<usize> {
    pred.iter().map(|&p| perm[p]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    #[serde(rename = "macro")]
    pub macro_avg: Averages,
    pub weighted: Averages,
    /// `permutation[predicted] = truth label` applied before scoring.
    pub permutation: Vec<usize>,
    pub n_scored: usize,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class, macro and support-weighted precision/recall/F1 of labels that
/// are already aligned. Empty denominators score 0.
pub fn score(pred: &[usize], truth: &[usize], k: usize) -> Result<MetricsReport> {
    check_labels(pred, truth, k)?;
    let conf = confusion(pred, truth, k);
    let n = pred.len();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = conf[c][c];
            let predicted: u64 = conf[c].iter().sum();
            let actual: u64 = conf.iter().map(|r| r[c]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, actual);
            let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            ClassMetrics { precision, recall, f1, support: actual as usize }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| {
        if k == 0 {
            0.0
        } else {
            per_class.iter().map(f).sum::<f64>() / k as f64
        }
    };
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        if n == 0 {
            0.0
        } else {
            per_class.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / n as f64
        }
    };
    let correct: u64 = (0..k).map(|c| conf[c][c]).sum();
    Ok(MetricsReport {
        accuracy: ratio(correct, n as u64),
        macro_avg: Averages { precision: mean(|c| c.precision), recall: mean(|c| c.recall), f1: mean(|c| c.f1) },
        weighted: Averages {
            precision: weighted(|c| c.precision),
            recall: weighted(|c| c.recall),
            f1: weighted(|c| c.f1),
        },
        per_class,
        permutation: (0..k).collect(),
        n_scored: n,
    })
}

/// Aligns `pred` to `truth` and scores the relabeled predictions.
pub fn evaluate(pred: &[usize], truth: &[usize], k: usize, pin_overlap: bool) -> Result<MetricsReport> {
    let perm = align(pred, truth, k, pin_overlap)?;
    let mut report = score(&apply_permutation(pred, &perm), truth, k)?;
    report.permutation = perm;
    Ok(report)
}

/// Clustering accuracy under the best relabeling.
pub fn aligned_accuracy(pred: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    Ok(evaluate(pred, truth, k, false)?.accuracy)
}

/// Claims assigned to `region`, strongest first, at most `k` of them. Ties
/// keep ascending claim index.
pub fn top_k_claims(f: &FactorPair, region: usize, k: usize) -> Result<Vec<usize>> {
    if region >= f.m.n_cols() {
        return Err(Error::Argument(format!("region {region} out of range for K = {}", f.m.n_cols())));
    }
    let mut members: Vec<(usize, f64)> =
        f.m.rows().enumerate().filter(|(_, r)| argmax(r) == region).map(|(j, r)| (j, r[region])).collect();
    // stable sort keeps index order among equal scores
    members.sort_by(|a, b| b.1.total_cmp(&a.1));
    members.truncate(k);
    Ok(members.into_iter().map(|(j, _)| j).collect())
}
