//! Plain-text rendering of eval and benchmark documents.

use std::fmt::Write;

use bsmf::benchmark::BenchmarkReport;
use bsmf::pipeline::EvalReport;

pub fn eval(r: &EvalReport) -> String {
    let mut s = String::new();
    let c = &r.config;
    writeln!(
        s,
        "mode {} k {} step {:?} lambda1 {} lambda2 {} seed {}",
        c.mode, c.k, c.step, c.lambda1, c.lambda2, c.seed
    )
    .unwrap();
    writeln!(s, "stages: {}", r.options.variant()).unwrap();
    writeln!(s, "claims {} labeled {} coverage {:.3}", r.n_claims, r.n_labeled, r.coverage).unwrap();
    if let Some(m) = &r.metrics {
        writeln!(s, "accuracy {:.4}", m.accuracy).unwrap();
        writeln!(s, "{:<10}{:>10}{:>10}{:>10}{:>10}", "class", "precision", "recall", "f1", "support").unwrap();
        for (q, pc) in m.per_class.iter().enumerate() {
            writeln!(s, "{:<10}{:>10.4}{:>10.4}{:>10.4}{:>10}", q, pc.precision, pc.recall, pc.f1, pc.support).unwrap();
        }
        for (name, a) in [("macro", &m.macro_avg), ("weighted", &m.weighted)] {
            writeln!(s, "{:<10}{:>10.4}{:>10.4}{:>10.4}", name, a.precision, a.recall, a.f1).unwrap();
        }
    }
    for region in &r.regions {
        let name = region.name.as_deref().map(|n| format!(" ({n})")).unwrap_or_default();
        write!(s, "\nregion {}{name}: {} claims, {} sources", region.region, region.n_claims, region.n_sources)
            .unwrap();
        if let Some(p) = region.top_k_precision {
            write!(s, ", top-k precision {p:.3}").unwrap();
        }
        s.push('\n');
        for c in &region.top_claims {
            let truth = c.truth.map(|t| format!(" [truth {t}]")).unwrap_or_default();
            writeln!(s, "  {:.4}  {}{truth}", c.score, c.claim_id).unwrap();
        }
    }
    s
}

pub fn benchmark(r: &BenchmarkReport) -> String {
    let mut s = String::new();
    writeln!(s, "{} rounds, k {}, {} users per group", r.rounds.len(), r.spec.k, r.spec.users_per_group).unwrap();
    writeln!(s, "{:<10}{:>10}{:>10}{:>10}{:>10}{:>11}", "method", "mean acc", "std", "macro f1", "iters", "converged")
        .unwrap();
    for m in &r.summary {
        writeln!(
            s,
            "{:<10}{:>10.4}{:>10.4}{:>10.4}{:>10.1}{:>11.2}",
            m.method, m.mean_accuracy, m.std_accuracy, m.mean_macro_f1, m.mean_iterations, m.converged_share
        )
        .unwrap();
    }
    s
}
