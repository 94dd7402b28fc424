//! The evolutionary loop: ramped half-and-half initialization, mutation and
//! crossover, evaluation of new individuals, and tournament selection over
//! parents and offspring together.

mod operators;

pub use operators::{crossover, mutate, mutate_at, mutate_tree, MutationKind, MUTATION_KINDS};

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitness::{FitnessFn, GainMode};
use crate::grammar::{Grammar, TransitionModel};
use crate::rng::{self, purpose};
use crate::stats;
use crate::tree::{render_infix, ExprTree, Method, Node, Sampler};

/// A fixed-length list of constructed features.
#[derive(Debug, Clone)]
pub struct Individual {
    pub trees: Vec<ExprTree>,
    /// Score in points; `None` until evaluated.
    pub fitness: Option<f64>,
    pub valid: bool,
}

impl Individual {
    pub fn new(trees: Vec<ExprTree>) -> Individual {
        Individual {
            trees,
            fitness: None,
            valid: true,
        }
    }

    pub fn size(&self) -> usize {
        self.trees.iter().map(ExprTree::size).sum()
    }

    pub fn invalidate(&mut self) {
        self.fitness = None;
        self.valid = true;
    }

    pub fn formulas(&self, g: &Grammar) -> Vec<String> {
        self.trees.iter().map(|t| render_infix(t, g)).collect()
    }

    /// Identity for fitness caching: rendered formulas with their types.
    /// Constants render exactly, so equal keys mean equal features.
    pub fn key(&self, g: &Grammar) -> String {
        self.trees
            .iter()
            .map(|t| format!("{}:{}", g.type_name(t.return_type), render_infix(t, g)))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn score(&self) -> f64 {
        self.fitness.expect("individual evaluated")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub generations: usize,
    pub p_mutation: f64,
    pub p_crossover: f64,
    pub n_features: usize,
    pub depth_min: usize,
    pub depth_max: usize,
    pub tournament_size: usize,
    /// Shift added to node weights so the best nodes can still be picked.
    pub floor: f64,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            population_size: 500,
            generations: 150,
            p_mutation: 0.6,
            p_crossover: 0.6,
            n_features: 1,
            depth_min: 2,
            depth_max: 8,
            tournament_size: 3,
            floor: 0.1,
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.population_size == 0 {
            return bad("population_size must be at least 1".into());
        }
        if self.n_features == 0 {
            return bad("n_features must be at least 1".into());
        }
        if self.depth_min == 0 || self.depth_max < self.depth_min {
            return bad(format!(
                "need 1 <= depth_min <= depth_max, got {}..{}",
                self.depth_min, self.depth_max
            ));
        }
        if self.tournament_size == 0 {
            return bad("tournament_size must be at least 1".into());
        }
        for (name, p) in [
            ("p_mutation", self.p_mutation),
            ("p_crossover", self.p_crossover),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if self.floor.is_nan() || self.floor <= 0.0 {
            return bad("floor must be positive".into());
        }
        Ok(())
    }
}

/// Ramped half-and-half: each tree gets a target depth uniform in
/// `[depth_min, depth_max]` and grow or full with equal odds.
pub fn init_population<R: Rng + ?Sized>(
    cfg: &EvolutionConfig,
    s: &Sampler,
    rng: &mut R,
) -> Result<Vec<Individual>> {
    Ok(init_population_with_plan(cfg, s, rng)?.0)
}

/// [`init_population`], also returning the `(method, target depth)` drawn
/// for every tree.
#[allow(clippy::type_complexity)]
pub fn init_population_with_plan<R: Rng + ?Sized>(
    cfg: &EvolutionConfig,
    s: &Sampler,
    rng: &mut R,
) -> Result<(Vec<Individual>, Vec<Vec<(Method, usize)>>)> {
    let mut pop = Vec::with_capacity(cfg.population_size);
    let mut plan = Vec::with_capacity(cfg.population_size);
    for _ in 0..cfg.population_size {
        let mut trees = Vec::with_capacity(cfg.n_features);
        let mut p = Vec::with_capacity(cfg.n_features);
        for _ in 0..cfg.n_features {
            let method = if rng.random::<bool>() {
                Method::Grow
            } else {
                Method::Full
            };
            let target = rng.random_range(cfg.depth_min..=cfg.depth_max);
            trees.push(s.sample_tree_at(rng, method, target, cfg.depth_min, None)?);
            p.push((method, target));
        }
        pop.push(Individual::new(trees));
        plan.push(p);
    }
    Ok((pop, plan))
}

/// Orders by fitness, then fewer nodes, then earlier index.
fn better(pool: &[Individual], i: usize, j: usize) -> bool {
    let (a, b) = (pool[i].score(), pool[j].score());
    if a != b {
        return a > b;
    }
    let (sa, sb) = (pool[i].size(), pool[j].size());
    if sa != sb {
        return sa < sb;
    }
    i < j
}

/// Index of the winner of one tournament of `k` uniform draws with
/// replacement.
pub fn tournament_select<R: Rng + ?Sized>(pool: &[Individual], k: usize, rng: &mut R) -> usize {
    let mut best = rng.random_range(0..pool.len());
    for _ in 1..k {
        let c = rng.random_range(0..pool.len());
        if better(pool, c, best) {
            best = c;
        }
    }
    best
}

fn best_index(pool: &[Individual]) -> usize {
    (1..pool.len()).fold(0, |b, i| if better(pool, i, b) { i } else { b })
}

/// True when no parent→child pair in `t` has probability 0 in `tm`.
pub fn respects_transitions(t: &ExprTree, g: &Grammar, tm: &TransitionModel) -> bool {
    fn walk(n: &Node, parent: Option<usize>, g: &Grammar, tm: &TransitionModel) -> bool {
        if let Some(id) = n.production() {
            if tm.probability(parent, id, g.production(id).return_type) == 0.0 {
                return false;
            }
            return n.children.iter().all(|c| walk(c, Some(id), g, tm));
        }
        true
    }
    walk(&t.root, None, g, tm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub std: f64,
    /// Best fitness seen so far, including earlier generations.
    pub hall_of_fame: f64,
    pub offspring: usize,
    pub evaluations: usize,
}

pub struct EvolutionResult {
    pub best: Individual,
    pub history: Vec<GenerationStats>,
    pub population: Vec<Individual>,
    /// Fitness computations actually run (cache hits excluded).
    pub evaluations: usize,
}

struct Evaluation<'f> {
    fitness: &'f dyn FitnessFn,
    pool: rayon::ThreadPool,
    cache: HashMap<String, (f64, bool)>,
    count: usize,
}

impl Evaluation<'_> {
    /// Scores every unevaluated individual. New keys are computed in
    /// parallel; results are stored in input order, so the outcome does not
    /// depend on the number of workers.
    fn run(&mut self, g: &Grammar, inds: &mut [Individual]) -> usize {
        let keys: Vec<Option<String>> = inds
            .iter()
            .map(|i| i.fitness.is_none().then(|| i.key(g)))
            .collect();
        let mut todo: Vec<usize> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (k, key) in keys.iter().enumerate() {
            if let Some(key) = key {
                if !self.cache.contains_key(key) && seen.insert(key.clone()) {
                    todo.push(k);
                }
            }
        }
        let fitness = self.fitness;
        let results: Vec<(f64, bool)> = self.pool.install(|| {
            todo.par_iter()
                .map(|&k| {
                    let r = fitness.evaluate(&inds[k].trees);
                    (r.score, r.valid)
                })
                .collect()
        });
        for (&k, r) in todo.iter().zip(results) {
            self.cache.insert(keys[k].clone().expect("pending key"), r);
        }
        self.count += todo.len();
        let gain_of = |score: f64| match fitness.gain_mode() {
            GainMode::Baseline => score - fitness.baseline(),
            GainMode::Absolute => score,
        };
        for (ind, key) in inds.iter_mut().zip(&keys) {
            if let Some(key) = key {
                let (score, valid) = self.cache[key];
                ind.fitness = Some(score);
                ind.valid = valid;
                for t in &mut ind.trees {
                    t.record_gain(gain_of(score));
                }
            }
        }
        todo.len()
    }
}

fn generation_stats(
    pop: &[Individual],
    generation: usize,
    hof: f64,
    offspring: usize,
    evaluations: usize,
) -> GenerationStats {
    let f: Vec<f64> = pop.iter().map(Individual::score).collect();
    GenerationStats {
        generation,
        best: f.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: stats::mean(&f),
        std: stats::pop_std_dev(&f),
        hall_of_fame: hof,
        offspring,
        evaluations,
    }
}

/// Runs the generation loop. `workers` only sets evaluation parallelism;
/// the result is identical for any value.
pub fn evolve(
    cfg: &EvolutionConfig,
    g: &Grammar,
    tm: &TransitionModel,
    fitness: &dyn FitnessFn,
    workers: usize,
) -> Result<EvolutionResult> {
    cfg.validate()?;
    let s = Sampler::new(g, tm);
    let mut eval = Evaluation {
        fitness,
        pool: rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
        cache: HashMap::new(),
        count: 0,
    };

    let mut pop = init_population(cfg, &s, &mut rng::stream(cfg.seed, 0, purpose::INIT))?;
    let n0 = eval.run(g, &mut pop);
    let mut hof = pop[best_index(&pop)].clone();
    let mut history = vec![generation_stats(&pop, 0, hof.score(), pop.len(), n0)];

    for generation in 1..=cfg.generations {
        let gen = generation as u64;
        let mu = pop.len();
        let mut flags = rng::stream(cfg.seed, gen, purpose::PAIRING);
        let mut mut_flag = vec![false; mu];
        let mut cross_flag = vec![false; mu];
        for i in 0..mu {
            mut_flag[i] = flags.random::<f64>() < cfg.p_mutation;
            cross_flag[i] = flags.random::<f64>() < cfg.p_crossover;
        }

        let mut copies: Vec<Individual> = pop.clone();
        let mut modified = vec![false; mu];

        let mut flagged: Vec<usize> = (0..mu).filter(|&i| cross_flag[i]).collect();
        flagged.shuffle(&mut flags);
        if flagged.len() % 2 == 1 {
            let others: Vec<usize> = (0..mu).filter(|&i| !cross_flag[i]).collect();
            if others.is_empty() {
                flagged.pop();
            } else {
                flagged.push(others[flags.random_range(0..others.len())]);
            }
        }
        for (p, pair) in flagged.chunks_exact(2).enumerate() {
            let (i, j) = (pair[0], pair[1]);
            let mut r = rng::stream(cfg.seed, gen, (1 << 31) + p as u64);
            let (x, y) = crossover(&s, &copies[i], &copies[j], cfg, &mut r);
            copies[i] = x;
            copies[j] = y;
            modified[i] = true;
            modified[j] = true;
        }
        for i in 0..mu {
            if mut_flag[i] {
                let mut r = rng::stream(cfg.seed, gen, i as u64);
                mutate(&s, &mut copies[i], cfg, &mut r)?;
                modified[i] = true;
            }
        }
        let mut offspring: Vec<Individual> = copies
            .into_iter()
            .zip(&modified)
            .filter(|(_, &m)| m)
            .map(|(c, _)| c)
            .collect();
        let n_eval = eval.run(g, &mut offspring);
        let n_off = offspring.len();

        let mut pool = pop;
        pool.extend(offspring);
        let best_now = best_index(&pool);
        if pool[best_now].score() > hof.score() {
            hof = pool[best_now].clone();
        }
        let mut sel = rng::stream(cfg.seed, gen, purpose::SELECTION);
        let chosen: Vec<usize> = (0..mu)
            .map(|_| tournament_select(&pool, cfg.tournament_size, &mut sel))
            .collect();
        pop = chosen.into_iter().map(|i| pool[i].clone()).collect();
        history.push(generation_stats(
            &pop,
            generation,
            hof.score(),
            n_off,
            n_eval,
        ));
    }

    Ok(EvolutionResult {
        best: hof,
        history,
        population: pop,
        evaluations: eval.count,
    })
}
