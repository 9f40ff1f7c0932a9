//! `bsmf` command line: synthesize or ingest data, fit, evaluate, benchmark.
//!
//! Commands read JSON from a file or stdin and write JSON to stdout, so
//! `bsmf synth | bsmf fit | bsmf eval` works as a pipe. Failures print a JSON
//! object on stderr and exit with 2 for bad input or 3 for divergence.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bsmf::benchmark::{ablation, benchmark, BenchmarkReport};
use bsmf::factorize::{FitConfig, Mode, StepSize};
use bsmf::pipeline::{evaluate_bundle, run_fit, write_artifacts, EvalReport, FitBundle, PipelineOptions};
use bsmf::synthetic::{generate, SynthSpec};
use bsmf::{ingest, BeliefSpec, Dataset, Error, IngestPaths, Result};
use clap::{Args, Parser, Subcommand};

mod report;

#[derive(Parser)]
#[command(name = "bsmf", version, about = "Belief-structured matrix factorization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset.
    Synth {
        #[command(flatten)]
        synth: SynthArgs,
        /// Alias of --data-seed.
        #[arg(long, conflicts_with = "data_seed")]
        seed: Option<u64>,
        /// Also write the CSV/JSONL directory layout here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Read claims, incidences, edges and labels into a dataset bundle.
    Ingest(IngestArgs),
    /// Build the endorsement estimate and factorize it.
    Fit {
        /// Dataset JSON; `-` or omitted reads stdin.
        #[arg(long, short)]
        input: Option<PathBuf>,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        stages: StageArgs,
        /// Write factors, assignments, loss trace and metrics here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Score a fit bundle against the labels it carries.
    Eval {
        /// Fit bundle JSON; `-` or omitted reads stdin.
        #[arg(long, short)]
        input: Option<PathBuf>,
        /// Claims listed per region.
        #[arg(long)]
        top_k: Option<usize>,
        /// Keep predicted region 0 as the overlap region when aligning.
        #[arg(long)]
        pin_overlap: bool,
    },
    /// Compare BSMF, NMF and NMTF over repeated synthetic rounds.
    Benchmark {
        #[arg(long, default_value_t = 200)]
        rounds: usize,
        /// Run the stage ablation (BSMF, BSMF-M, BSMF-S, BSMF-MS) instead.
        #[arg(long)]
        ablation: bool,
        #[command(flatten)]
        synth: SynthArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        stages: StageArgs,
        /// Write rounds.csv, summary.csv and benchmark.json here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Render a fit, eval or benchmark JSON document as text.
    Report {
        #[arg(long, short)]
        input: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// Belief regions, the overlap region included.
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = SynthSpec::default().users_per_group)]
    users_per_group: usize,
    #[arg(long, default_value_t = SynthSpec::default().messages_per_user)]
    messages_per_user: usize,
    #[arg(long, default_value_t = SynthSpec::default().vocab_per_corpus)]
    vocab_per_corpus: usize,
    #[arg(long, default_value_t = SynthSpec::default().message_length.0)]
    min_length: usize,
    #[arg(long, default_value_t = SynthSpec::default().message_length.1)]
    max_length: usize,
    #[arg(long, default_value_t = SynthSpec::default().overlap_mix)]
    overlap_mix: f64,
    /// Seed of the generator; round `i` of a benchmark uses this plus `i`.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
}

impl SynthArgs {
    fn spec(&self) -> SynthSpec {
        SynthSpec {
            k: self.k,
            users_per_group: self.users_per_group,
            messages_per_user: self.messages_per_user,
            vocab_per_corpus: self.vocab_per_corpus,
            message_length: (self.min_length, self.max_length),
            overlap_mix: self.overlap_mix,
            seed: self.data_seed,
        }
    }
}

#[derive(Args)]
struct IngestArgs {
    /// Directory holding claims.jsonl, incidences.csv and optionally
    /// edges.csv, labels.csv, metadata.json.
    #[arg(long, required_unless_present_all = ["claims", "incidences"])]
    dir: Option<PathBuf>,
    #[arg(long)]
    claims: Option<PathBuf>,
    #[arg(long)]
    incidences: Option<PathBuf>,
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    metadata: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// `star:K`, `identity:K` or `file:PATH`.
    #[arg(long, default_value = "star:4")]
    belief: BeliefSpec,
    /// `bsmf`, `nmf` (B fixed to the identity) or `nmtf` (B learned).
    #[arg(long, default_value_t = Mode::Bsmf)]
    mode: Mode,
    /// L2 weight on U and M [default: 0.1].
    #[arg(long)]
    lambda1: Option<f64>,
    /// L1 weight on U and M [default: 0 with multiplicative steps, else 0.1].
    #[arg(long)]
    lambda2: Option<f64>,
    /// Constant step size, or `mult` (the default) for multiplicative steps.
    #[arg(long)]
    eta: Option<StepSize>,
    #[arg(long, default_value_t = FitConfig::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = FitConfig::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = FitConfig::DEFAULT_EPS_RBF)]
    eps_rbf: f64,
    #[arg(long, default_value_t = bsmf::RbfParams::DEFAULT_CUTOFF)]
    cutoff: f64,
    /// Seed of the factor initialization; benchmark round `i` adds `i`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl FitArgs {
    fn config(&self, k: usize) -> FitConfig {
        let base = FitConfig::new(k, self.mode);
        let step = self.eta.unwrap_or(StepSize::Multiplicative);
        // multiplicative steps cannot carry the L1 term
        let default_l2 = if step == StepSize::Multiplicative { 0.0 } else { base.lambda2 };
        FitConfig {
            lambda1: self.lambda1.unwrap_or(base.lambda1),
            lambda2: self.lambda2.unwrap_or(default_l2),
            step,
            max_iters: self.max_iters,
            tol: self.tol,
            eps_rbf: self.eps_rbf,
            cutoff: self.cutoff,
            seed: self.seed,
            ..base
        }
    }
}

#[derive(Args)]
struct StageArgs {
    /// Skip similarity interpolation.
    #[arg(long)]
    no_m: bool,
    /// Skip social-graph smoothing.
    #[arg(long)]
    no_s: bool,
    /// Add the transposed retweet graph before normalizing.
    #[arg(long)]
    symmetrize_graph: bool,
    /// Claims listed per region in reports.
    #[arg(long, default_value_t = PipelineOptions::default().top_k)]
    top_k: usize,
    /// Keep predicted region 0 as the overlap region when aligning.
    #[arg(long)]
    pin_overlap: bool,
}

impl StageArgs {
    fn options(&self) -> PipelineOptions {
        PipelineOptions {
            use_m: !self.no_m,
            use_s: !self.no_s,
            symmetrize_graph: self.symmetrize_graph,
            pin_overlap: self.pin_overlap,
            top_k: self.top_k,
        }
    }
}

fn read_input(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) if p != Path::new("-") => Ok(fs::read_to_string(p)?),
        _ => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

fn emit<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { synth, seed, out_dir } => {
            let mut spec = synth.spec();
            spec.seed = seed.unwrap_or(spec.seed);
            let ds = generate(&spec)?;
            if let Some(dir) = out_dir {
                ds.write_dir(&dir)?;
            }
            emit(&ds)
        }
        Command::Ingest(a) => {
            let mut paths = match &a.dir {
                Some(d) => IngestPaths::in_dir(d),
                None => IngestPaths {
                    claims: a.claims.clone().expect("required by clap"),
                    incidences: a.incidences.clone().expect("required by clap"),
                    edges: None,
                    labels: None,
                    metadata: None,
                },
            };
            if let Some(p) = a.claims {
                paths.claims = p;
            }
            if let Some(p) = a.incidences {
                paths.incidences = p;
            }
            paths.edges = a.edges.or(paths.edges);
            paths.labels = a.labels.or(paths.labels);
            paths.metadata = a.metadata.or(paths.metadata);
            emit(&ingest(&paths)?)
        }
        Command::Fit { input, fit, stages, out_dir } => {
            let ds = Dataset::from_json(&read_input(input.as_deref())?)?;
            let belief = fit.belief.resolve()?;
            let cfg = fit.config(belief.k());
            let bundle = run_fit(&ds, &belief, &cfg, &stages.options())?;
            if let Some(dir) = out_dir {
                let report = evaluate_bundle(&bundle)?;
                write_artifacts(&dir, &bundle, Some(&report))?;
            }
            emit(&bundle)
        }
        Command::Eval { input, top_k, pin_overlap } => {
            let mut bundle: FitBundle = serde_json::from_str(&read_input(input.as_deref())?)?;
            if let Some(k) = top_k {
                bundle.options.top_k = k;
            }
            bundle.options.pin_overlap |= pin_overlap;
            emit(&evaluate_bundle(&bundle)?)
        }
        Command::Benchmark { rounds, ablation: abl, synth, fit, stages, out_dir } => {
            let spec = synth.spec();
            let cfg = fit.config(spec.k);
            let opts = stages.options();
            let report =
                if abl { ablation(rounds, &spec, &cfg, &opts)? } else { benchmark(rounds, &spec, &cfg, &opts)? };
            if let Some(dir) = out_dir {
                fs::create_dir_all(&dir)?;
                fs::write(dir.join("rounds.csv"), report.rounds_csv()?)?;
                fs::write(dir.join("summary.csv"), report.summary_csv()?)?;
                fs::write(dir.join("benchmark.json"), serde_json::to_string_pretty(&report)? + "\n")?;
            }
            io::stdout().write_all(report.summary_csv()?.as_bytes())?;
            Ok(())
        }
        Command::Report { input } => {
            let text = read_input(input.as_deref())?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let rendered = if value.get("summary").is_some() {
                report::benchmark(&serde_json::from_value::<BenchmarkReport>(value)?)
            } else if value.get("regions").is_some() {
                report::eval(&serde_json::from_value::<EvalReport>(value)?)
            } else if value.get("factors").is_some() {
                report::eval(&evaluate_bundle(&serde_json::from_value::<FitBundle>(value)?)?)
            } else {
                return Err(Error::Input("expected a fit, eval or benchmark document".into()));
            };
            io::stdout().write_all(rendered.as_bytes())?;
            Ok(())
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{body}");
            ExitCode::from(exit_code(&e))
        }
    }
}
