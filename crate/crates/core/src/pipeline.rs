//! End-to-end runs: dataset to endorsement estimate to factors to scores,
//! plus the on-disk artifacts of a run.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::belief::BeliefMixture;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{apply_permutation, assign, evaluate, top_k_claims, Assignment, MetricsReport};
use crate::factorize::{fit, FactorPair, FitConfig, FitResult};
use crate::linalg::DenseMatrix;
use crate::propagation::{build_operator, convolve, PropagationOperator};
use crate::similarity::{interpolate, RbfParams};

/// Which preprocessing stages run and how results are reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    /// Similarity interpolation of missing endorsements.
    pub use_m: bool,
    /// One-hop smoothing over the retweet graph.
    pub use_s: bool,
    pub symmetrize_graph: bool,
    /// Keep predicted region 0 mapped to true region 0 when aligning.
    pub pin_overlap: bool,
    /// Claims listed per region in reports.
    pub top_k: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self { use_m: true, use_s: true, symmetrize_graph: false, pin_overlap: false, top_k: 10 }
    }
}

impl PipelineOptions {
    /// Name of the ablation variant these stage flags select.
    pub fn variant(&self) -> &'static str {
        match (self.use_m, self.use_s) {
            (true, true) => "BSMF",
            (false, true) => "BSMF-M",
            (true, false) => "BSMF-S",
            (false, false) => "BSMF-MS",
        }
    }
}

/// The matrix handed to the factorizer, `X^MS`, with stages skipped as requested.
pub fn endorsement_matrix(ds: &Dataset, cfg: &FitConfig, opts: &PipelineOptions) -> Result<DenseMatrix> {
    let x = ds.source_claim_matrix();
    let xm = if opts.use_m { interpolate(&x, &ds.bow_table()?, &RbfParams::new(cfg.eps_rbf, cfg.cutoff)?)? } else { x };
    let op = if opts.use_s {
        let g = ds.social_graph()?;
        build_operator(&if opts.symmetrize_graph { g.symmetrized() } else { g })
    } else {
        PropagationOperator::identity(ds.n_sources())
    };
    convolve(&op, &xm)
}

/// Everything a fit produced, self-contained enough to be scored later
/// without the original dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitBundle {
    pub config: FitConfig,
    pub options: PipelineOptions,
    pub belief: BeliefMixture,
    pub dataset_metadata: BTreeMap<String, serde_json::Value>,
    pub source_ids: Vec<String>,
    pub claim_ids: Vec<String>,
    /// Ground truth carried over from the dataset, keyed by claim index.
    pub labels: BTreeMap<usize, usize>,
    pub factors: FactorPair,
    pub loss_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    pub assignment: Assignment,
}

impl FitBundle {
    pub fn fit_result(&self) -> FitResult {
        FitResult {
            factors: self.factors.clone(),
            loss_trace: self.loss_trace.clone(),
            iterations_run: self.iterations_run,
            converged: self.converged,
            config: self.config.clone(),
        }
    }
}

pub fn run_fit(ds: &Dataset, belief: &BeliefMixture, cfg: &FitConfig, opts: &PipelineOptions) -> Result<FitBundle> {
    ds.validate()?;
    let x = endorsement_matrix(ds, cfg, opts)?;
    let r = fit(&x, belief, cfg)?;
    let assignment = assign(&r.factors);
    Ok(FitBundle {
        config: r.config,
        options: opts.clone(),
        belief: belief.clone(),
        dataset_metadata: ds.metadata.clone(),
        source_ids: ds.sources.clone(),
        claim_ids: ds.claims.iter().map(|c| c.id.clone()).collect(),
        labels: ds.labels.clone(),
        factors: r.factors,
        loss_trace: r.loss_trace,
        iterations_run: r.iterations_run,
        converged: r.converged,
        assignment,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedClaim {
    pub claim_id: String,
    pub score: f64,
    /// Ground-truth region after alignment, when the claim is labeled.
    pub truth: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    /// Region index in ground-truth numbering when labels exist.
    pub region: usize,
    pub name: Option<String>,
    pub n_claims: usize,
    pub n_sources: usize,
    pub top_claims: Vec<RankedClaim>,
    /// Share of labeled top claims whose truth is this region.
    pub top_k_precision: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: FitConfig,
    pub options: PipelineOptions,
    pub dataset_metadata: BTreeMap<String, serde_json::Value>,
    pub n_claims: usize,
    pub n_labeled: usize,
    /// Fraction of claims that carry a label and were scored.
    pub coverage: f64,
    pub metrics: Option<MetricsReport>,
    pub regions: Vec<RegionSummary>,
}

/// Scores a fit against the labels it carries and lists the strongest
/// claims of each region. Without labels only the region listing is made.
pub fn evaluate_bundle(bundle: &FitBundle) -> Result<EvalReport> {
    let k = bundle.factors.k();
    let labels = &bundle.labels;
    let metrics = if labels.is_empty() {
        None
    } else {
        let pred: Vec<usize> = labels.keys().map(|&c| bundle.assignment.claim_labels[c]).collect();
        let truth: Vec<usize> = labels.values().copied().collect();
        if let Some(&t) = truth.iter().find(|&&t| t >= k) {
            return Err(Error::Input(format!("label {t} out of range for K = {k}")));
        }
        Some(evaluate(&pred, &truth, k, bundle.options.pin_overlap)?)
    };
    let perm: Vec<usize> = metrics.as_ref().map_or_else(|| (0..k).collect(), |m| m.permutation.clone());

    let claim_regions = apply_permutation(&bundle.assignment.claim_labels, &perm);
    let source_regions = apply_permutation(&bundle.assignment.source_labels, &perm);
    let mut regions = Vec::with_capacity(k);
    for predicted in 0..k {
        let region = perm[predicted];
        let top: Vec<RankedClaim> = top_k_claims(&bundle.factors, predicted, bundle.options.top_k)?
            .into_iter()
            .map(|j| RankedClaim {
                claim_id: bundle.claim_ids[j].clone(),
                score: bundle.factors.m.get(j, predicted),
                truth: labels.get(&j).copied(),
            })
            .collect();
        let labeled: Vec<usize> = top.iter().filter_map(|c| c.truth).collect();
        let top_k_precision = (!labeled.is_empty())
            .then(|| labeled.iter().filter(|&&t| t == region).count() as f64 / labeled.len() as f64);
        regions.push(RegionSummary {
            region,
            name: bundle.belief.names().get(region).cloned(),
            n_claims: claim_regions.iter().filter(|&&r| r == region).count(),
            n_sources: source_regions.iter().filter(|&&r| r == region).count(),
            top_claims: top,
            top_k_precision,
        });
    }
    regions.sort_by_key(|r| r.region);

    let n_claims = bundle.claim_ids.len();
    Ok(EvalReport {
        config: bundle.config.clone(),
        options: bundle.options.clone(),
        dataset_metadata: bundle.dataset_metadata.clone(),
        n_claims,
        n_labeled: labels.len(),
        coverage: if n_claims == 0 { 0.0 } else { labels.len() as f64 / n_claims as f64 },
        metrics,
        regions,
    })
}

/// Fit followed by evaluation.
pub fn run_pipeline(
    ds: &Dataset,
    belief: &BeliefMixture,
    cfg: &FitConfig,
    opts: &PipelineOptions,
) -> Result<(FitBundle, EvalReport)> {
    let bundle = run_fit(ds, belief, cfg, opts)?;
    let report = evaluate_bundle(&bundle)?;
    Ok((bundle, report))
}

pub const FIT_FILE: &str = "fit.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const U_FILE: &str = "U.csv";
pub const M_FILE: &str = "M.csv";
pub const B_TILDE_FILE: &str = "B_tilde.csv";
pub const ASSIGNMENTS_FILE: &str = "assignments.csv";
pub const LOSS_FILE: &str = "loss_trace.csv";

/// Writes the factors, assignments and loss trace as CSV and the bundle and
/// report as JSON. Both JSON files carry the full configuration.
pub fn write_artifacts(dir: &Path, bundle: &FitBundle, report: Option<&EvalReport>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join(FIT_FILE), bundle)?;
    if let Some(r) = report {
        write_json(&dir.join(METRICS_FILE), r)?;
    }
    write_factor(&dir.join(U_FILE), "source_id", &bundle.source_ids, &bundle.factors.u)?;
    write_factor(&dir.join(M_FILE), "claim_id", &bundle.claim_ids, &bundle.factors.m)?;
    if let Some(bt) = &bundle.factors.b_tilde {
        let ids: Vec<String> = (0..bt.n_rows()).map(|p| p.to_string()).collect();
        write_factor(&dir.join(B_TILDE_FILE), "belief", &ids, bt)?;
    }

    let mut w = csv::Writer::from_path(dir.join(ASSIGNMENTS_FILE)).map_err(csv_err)?;
    w.write_record(["kind", "id", "region", "score"]).map_err(csv_err)?;
    let a = &bundle.assignment;
    for (j, id) in bundle.claim_ids.iter().enumerate() {
        w.write_record(["claim", id, &a.claim_labels[j].to_string(), &a.claim_scores[j].to_string()])
            .map_err(csv_err)?;
    }
    for (i, id) in bundle.source_ids.iter().enumerate() {
        let score = bundle.factors.u.get(i, a.source_labels[i]);
        w.write_record(["source", id, &a.source_labels[i].to_string(), &score.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join(LOSS_FILE)).map_err(csv_err)?;
    w.write_record(["iteration", "loss"]).map_err(csv_err)?;
    for (t, j) in bundle.loss_trace.iter().enumerate() {
        w.write_record([(t + 1).to_string(), j.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_factor(path: &Path, id_header: &str, ids: &[String], a: &DenseMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec![id_header.to_string()];
    header.extend((0..a.n_cols()).map(|q| format!("k{q}")));
    w.write_record(&header).map_err(csv_err)?;
    for (id, row) in ids.iter().zip(a.rows()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
