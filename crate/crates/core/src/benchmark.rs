//! Repeated synthetic runs comparing BSMF against NMF and NMTF, and the
//! stage ablation.
//!
//! Round `i` generates its dataset with seed `spec.seed + i` and initializes
//! every fit with seed `cfg.seed + i`, so rounds are independent and can run
//! in any order without changing the output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::BeliefMixture;
use crate::error::{Error, Result};
use crate::eval::{assign, evaluate};
use crate::factorize::{fit, FitConfig, Mode, StepSize};
use crate::pipeline::{csv_err, endorsement_matrix, PipelineOptions};
use crate::synthetic::{generate, SynthSpec};

/// Solver settings the synthetic benchmark uses unless told otherwise:
/// multiplicative steps, which leave no room for the L1 term.
pub fn default_config(k: usize) -> FitConfig {
    FitConfig { step: StepSize::Multiplicative, lambda2: 0.0, ..FitConfig::new(k, Mode::Bsmf) }
}

/// One fit inside a round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: String,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub round: usize,
    pub data_seed: u64,
    pub init_seed: u64,
    pub runs: Vec<MethodRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_macro_f1: f64,
    pub mean_iterations: f64,
    /// Share of rounds that met the tolerance before the iteration cap.
    pub converged_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub spec: SynthSpec,
    pub config: FitConfig,
    pub options: PipelineOptions,
    pub rounds: Vec<Round>,
    pub summary: Vec<MethodSummary>,
}

impl BenchmarkReport {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == name)
    }

    /// One line per round and method.
    pub fn rounds_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "round",
            "data_seed",
            "init_seed",
            "method",
            "accuracy",
            "macro_f1",
            "iterations",
            "converged",
        ])
        .map_err(csv_err)?;
        for r in &self.rounds {
            for m in &r.runs {
                w.write_record([
                    r.round.to_string(),
                    r.data_seed.to_string(),
                    r.init_seed.to_string(),
                    m.method.clone(),
                    m.accuracy.to_string(),
                    m.macro_f1.to_string(),
                    m.iterations.to_string(),
                    m.converged.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        finish(w)
    }

    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "method",
            "rounds",
            "mean_accuracy",
            "std_accuracy",
            "mean_macro_f1",
            "mean_iterations",
            "converged_share",
        ])
        .map_err(csv_err)?;
        for s in &self.summary {
            w.write_record([
                s.method.clone(),
                self.rounds.len().to_string(),
                s.mean_accuracy.to_string(),
                s.std_accuracy.to_string(),
                s.mean_macro_f1.to_string(),
                s.mean_iterations.to_string(),
                s.converged_share.to_string(),
            ])
            .map_err(csv_err)?;
        }
        finish(w)
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// A fit to run on every round's data: a label, the stage flags and the
/// factorization mode.
#[derive(Debug, Clone)]
struct Arm {
    name: String,
    use_m: bool,
    use_s: bool,
    mode: Mode,
}

/// BSMF, NMF and NMTF on the same `X^MS` each round.
pub fn benchmark(rounds: usize, spec: &SynthSpec, cfg: &FitConfig, opts: &PipelineOptions) -> Result<BenchmarkReport> {
    let arms = [Mode::Bsmf, Mode::Nmf, Mode::Nmtf].map(|mode| Arm {
        name: mode.to_string().to_uppercase(),
        use_m: opts.use_m,
        use_s: opts.use_s,
        mode,
    });
    run_arms(rounds, spec, cfg, opts, &arms)
}

/// BSMF with each combination of the similarity and social stages.
pub fn ablation(rounds: usize, spec: &SynthSpec, cfg: &FitConfig, opts: &PipelineOptions) -> Result<BenchmarkReport> {
    let arms: Vec<Arm> = [(true, true), (false, true), (true, false), (false, false)]
        .into_iter()
        .map(|(use_m, use_s)| {
            let o = PipelineOptions { use_m, use_s, ..opts.clone() };
            Arm { name: o.variant().to_string(), use_m, use_s, mode: Mode::Bsmf }
        })
        .collect();
    run_arms(rounds, spec, cfg, opts, &arms)
}

fn run_arms(
    rounds: usize,
    spec: &SynthSpec,
    cfg: &FitConfig,
    opts: &PipelineOptions,
    arms: &[Arm],
) -> Result<BenchmarkReport> {
    if rounds == 0 {
        return Err(Error::Argument("rounds must be at least 1".into()));
    }
    spec.validate()?;
    cfg.validate()?;
    if cfg.k != spec.k {
        return Err(Error::Argument(format!("fit k = {} but the generator makes {} regions", cfg.k, spec.k)));
    }
    let star = BeliefMixture::star(spec.k)?;
    let results: Vec<Round> =
        (0..rounds).into_par_iter().map(|i| run_round(i, spec, cfg, opts, arms, &star)).collect::<Result<_>>()?;

    let summary = arms
        .iter()
        .enumerate()
        .map(|(a, arm)| {
            let runs: Vec<&MethodRun> = results.iter().map(|r| &r.runs[a]).collect();
            let n = runs.len() as f64;
            let acc: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
            let mean = acc.iter().sum::<f64>() / n;
            // population deviation, so a single round reports 0
            let var = acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
            MethodSummary {
                method: arm.name.clone(),
                mean_accuracy: mean,
                std_accuracy: var.sqrt(),
                mean_macro_f1: runs.iter().map(|r| r.macro_f1).sum::<f64>() / n,
                mean_iterations: runs.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
                converged_share: runs.iter().filter(|r| r.converged).count() as f64 / n,
            }
        })
        .collect();
    Ok(BenchmarkReport { spec: spec.clone(), config: cfg.clone(), options: opts.clone(), rounds: results, summary })
}

fn run_round(
    i: usize,
    spec: &SynthSpec,
    cfg: &FitConfig,
    opts: &PipelineOptions,
    arms: &[Arm],
    star: &BeliefMixture,
) -> Result<Round> {
    let data_seed = spec.seed.wrapping_add(i as u64);
    let init_seed = cfg.seed.wrapping_add(i as u64);
    let ds = generate(&SynthSpec { seed: data_seed, ..spec.clone() })?;
    let truth: Vec<usize> = ds.labels.values().copied().collect();
    let claims: Vec<usize> = ds.labels.keys().copied().collect();

    let mut matrices: Vec<((bool, bool), crate::linalg::DenseMatrix)> = Vec::new();
    let mut runs = Vec::with_capacity(arms.len());
    for arm in arms {
        let key = (arm.use_m, arm.use_s);
        if !matrices.iter().any(|(k, _)| *k == key) {
            let o = PipelineOptions { use_m: arm.use_m, use_s: arm.use_s, ..opts.clone() };
            matrices.push((key, endorsement_matrix(&ds, cfg, &o)?));
        }
        let x = &matrices.iter().find(|(k, _)| *k == key).expect("just inserted").1;
        let c = FitConfig { mode: arm.mode, seed: init_seed, ..cfg.clone() };
        let r = fit(x, star, &c)?;
        let labels = assign(&r.factors).claim_labels;
        let pred: Vec<usize> = claims.iter().map(|&j| labels[j]).collect();
        let report = evaluate(&pred, &truth, spec.k, opts.pin_overlap)?;
        runs.push(MethodRun {
            method: arm.name.clone(),
            accuracy: report.accuracy,
            macro_f1: report.macro_avg.f1,
            iterations: r.iterations_run,
            converged: r.converged,
        });
    }
    Ok(Round { round: i, data_seed, init_seed, runs })
}
