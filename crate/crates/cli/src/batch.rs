use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use dimgp::evolve::GenerationStats;
use dimgp::run::{self, Mode};
use dimgp::stats::{self, welch_t_test};

use crate::{CliResult, Failure, Inputs, RunConfig};

#[derive(Debug, Clone, Serialize)]
pub struct RunFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: Mode,
    pub seeds: Vec<u64>,
    /// Test-set gain per seed, `None` where the run failed.
    pub gains: Vec<Option<f64>>,
    pub failures: Vec<RunFailure>,
    /// Over the successful runs; absent with fewer than two.
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl MethodSummary {
    fn successful(&self) -> Vec<f64> {
        self.gains.iter().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub a: Mode,
    pub b: Mode,
    pub t: f64,
    pub dof: f64,
    pub p: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    pub methods: Vec<MethodSummary>,
    pub comparisons: Vec<Comparison>,
}

impl BatchSummary {
    /// Per-seed gains as CSV: `method,seed,gain,status`.
    pub fn gains_csv(&self) -> String {
        let mut out = String::from("method,seed,gain,status\n");
        for m in &self.methods {
            for (seed, g) in m.seeds.iter().zip(&m.gains) {
                match g {
                    Some(g) => out.push_str(&format!("{},{seed},{g},ok\n", m.method)),
                    None => out.push_str(&format!("{},{seed},,failed\n", m.method)),
                }
            }
        }
        out
    }
}

/// Runs every `(method, seed)` pair, `jobs` at a time, and compares the
/// methods' test gains pairwise with Welch's t-test. Each run writes to
/// `<out>/<method>/seed_<seed>/`.
pub fn cmd_batch(
    cfg: &RunConfig,
    methods: &[Mode],
    seeds: &[u64],
    out: Option<&Path>,
    jobs: usize,
) -> CliResult<BatchSummary> {
    if seeds.len() < 2 {
        return Err(Failure::invalid("a batch needs at least two seeds"));
    }
    if methods.is_empty() {
        return Err(Failure::invalid("a batch needs at least one method"));
    }
    cfg.evolution.validate().map_err(Failure::invalid)?;
    cfg.fitness.validate().map_err(Failure::invalid)?;
    let inputs = Inputs::load(cfg)?;
    let setups = methods
        .iter()
        .map(|&m| inputs.setup(m, cfg.evolution.depth_max).map(|(s, _)| s))
        .collect::<CliResult<Vec<_>>>()?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output());
    let settings = cfg.settings();

    let tasks: Vec<(usize, u64)> = (0..methods.len())
        .flat_map(|m| seeds.iter().map(move |&s| (m, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(Failure::runtime)?;
    let results: Vec<Result<(f64, Vec<GenerationStats>), String>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(m, seed)| {
                let o = run::run(methods[m], &settings, &setups[m], seed, 1)
                    .map_err(|e| e.to_string())?;
                let dir = out.join(methods[m].name()).join(format!("seed_{seed}"));
                run::write_outputs(&o, &dir).map_err(|e| e.to_string())?;
                Ok((o.report.test.gain, o.report.generations))
            })
            .collect()
    });

    let mut summaries = Vec::new();
    for (m, &method) in methods.iter().enumerate() {
        let mut gains = Vec::new();
        let mut failures = Vec::new();
        let mut curves = Vec::new();
        for (&(tm, seed), r) in tasks.iter().zip(&results) {
            if tm != m {
                continue;
            }
            match r {
                Ok((g, hist)) => {
                    gains.push(Some(*g));
                    curves.push(hist.as_slice());
                }
                Err(e) => {
                    gains.push(None);
                    failures.push(RunFailure {
                        seed,
                        error: e.clone(),
                    });
                }
            }
        }
        let ok: Vec<f64> = gains.iter().flatten().copied().collect();
        let (mean, std) = if ok.len() >= 2 {
            (Some(stats::mean(&ok)), Some(stats::std_dev(&ok)))
        } else {
            (None, None)
        };
        if !curves.is_empty() {
            fs::create_dir_all(&out).map_err(Failure::runtime)?;
            fs::write(
                out.join(format!("learning_curve_{method}.csv")),
                run::learning_curve(&curves),
            )
            .map_err(Failure::runtime)?;
        }
        summaries.push(MethodSummary {
            method,
            seeds: seeds.to_vec(),
            gains,
            failures,
            mean,
            std,
        });
    }

    let mut comparisons = Vec::new();
    for i in 0..summaries.len() {
        for j in i + 1..summaries.len() {
            let (a, b) = (summaries[i].successful(), summaries[j].successful());
            if a.len() < 2 || b.len() < 2 {
                continue;
            }
            let w = welch_t_test(&a, &b);
            comparisons.push(Comparison {
                a: summaries[i].method,
                b: summaries[j].method,
                t: w.t,
                dof: w.dof,
                p: w.p,
                degenerate: w.degenerate,
            });
        }
    }
    let summary = BatchSummary {
        methods: summaries,
        comparisons,
    };
    fs::create_dir_all(&out).map_err(Failure::runtime)?;
    fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(&summary).map_err(Failure::runtime)?,
    )
    .map_err(Failure::runtime)?;
    fs::write(out.join("gains.csv"), summary.gains_csv()).map_err(Failure::runtime)?;
    Ok(summary)
}
