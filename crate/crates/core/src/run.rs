//! One end-to-end run: split, bind the grammar, evolve on the training part
//! and score the hall of fame on the held-out part.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{export_augmented, split, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::evolve::{evolve, EvolutionConfig, GenerationStats, Individual};
use crate::fitness::{holdout_gain, Evaluator, FitnessFn, FitnessSpec, TestScore};
use crate::grammar::{parse_transitions, validate_grammar, Grammar, Issue, TransitionModel};
use crate::stats;

/// Which constraints the search runs under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// One universal type, no transition model.
    Simple,
    /// Typed grammar, uniform transitions.
    Gggp,
    /// Typed grammar and a transition model.
    Pgggp,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Simple, Mode::Gggp, Mode::Pgggp];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Simple => "simple",
            Mode::Gggp => "gggp",
            Mode::Pgggp => "pgggp",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s.trim().to_ascii_lowercase().as_str() {
            "simple" => Ok(Mode::Simple),
            "gggp" => Ok(Mode::Gggp),
            "pgggp" => Ok(Mode::Pgggp),
            other => Err(Error::Config(format!(
                "unknown method {other:?} (expected simple, gggp or pgggp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub split: SplitSpec,
    pub evolution: EvolutionConfig,
    pub fitness: FitnessSpec,
}

/// Grammar, transitions and data prepared for one mode.
pub struct Setup {
    pub grammar: Grammar,
    pub transitions: TransitionModel,
    pub data: Dataset,
}

/// Binds `grammar` to the columns of `data` for `mode`. Simple mode
/// collapses everything to the universal type and ignores `transitions`.
pub fn setup(
    mode: Mode,
    grammar: &Grammar,
    transitions: Option<&str>,
    data: &Dataset,
) -> Result<Setup> {
    let data = match mode {
        Mode::Simple => data.retyped(crate::grammar::UNIVERSAL_TYPE),
        _ => data.clone(),
    };
    let base = match mode {
        Mode::Simple => grammar.universal(),
        _ => grammar.clone(),
    };
    let schema = data.schema();
    let g = base.bind(schema.iter().map(|(n, u)| (n.as_str(), u.as_str())));
    let transitions = match (mode, transitions) {
        (Mode::Pgggp, Some(text)) => parse_transitions(text, &g)?,
        (Mode::Pgggp, None) => {
            return Err(Error::Config("pgggp needs a transitions file".into()));
        }
        _ => TransitionModel::uniform(&g),
    };
    Ok(Setup {
        grammar: g,
        transitions,
        data,
    })
}

/// Validator issues for a prepared setup.
pub fn check(s: &Setup, depth_max: usize) -> Vec<Issue> {
    validate_grammar(&s.grammar, &s.data.schema(), depth_max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub mode: Mode,
    pub seed: u64,
    pub config: RunSettings,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Cross-validated training score of the base columns.
    pub baseline_cv: f64,
    /// Training fitness of the hall-of-fame individual.
    pub best_cv: f64,
    pub formulas: Vec<String>,
    pub test: TestScore,
    pub generations: Vec<GenerationStats>,
    pub evaluations: usize,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    /// The JSON report with the timing set to zero, for comparisons.
    pub fn timeless_json(&self) -> String {
        let mut r = self.clone();
        r.wall_clock_seconds = 0.0;
        serde_json::to_string_pretty(&r).expect("report serializes")
    }
}

pub struct RunOutcome {
    pub report: RunReport,
    pub best: Individual,
    pub grammar: Grammar,
    pub train: Dataset,
    pub test: Dataset,
}

/// Runs one seed. The seed replaces `settings.evolution.seed`; it also
/// seeds the split unless the split names its own seed.
pub fn run(
    mode: Mode,
    settings: &RunSettings,
    s: &Setup,
    seed: u64,
    workers: usize,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let mut cfg = settings.evolution.clone();
    cfg.seed = seed;
    cfg.validate()?;
    settings.fitness.validate()?;
    let errors: Vec<String> = check(s, cfg.depth_max)
        .into_iter()
        .filter(Issue::is_error)
        .map(|i| i.message)
        .collect();
    if !errors.is_empty() {
        return Err(Error::Grammar(errors.join("; ")));
    }

    let (train, test) = split(&s.data, &settings.split, seed)?;
    let fitness = Evaluator::new(&settings.fitness, &s.grammar, &train, seed)?;
    let result = evolve(&cfg, &s.grammar, &s.transitions, &fitness, workers)?;
    let best = result.best;
    let test_score = holdout_gain(&settings.fitness, &s.grammar, &train, &test, &best.trees)?;

    let mut config = settings.clone();
    config.evolution.seed = seed;
    let report = RunReport {
        mode,
        seed,
        config,
        train_rows: train.n_rows(),
        test_rows: test.n_rows(),
        baseline_cv: fitness.baseline(),
        best_cv: best.fitness.unwrap_or(0.0),
        formulas: best.formulas(&s.grammar),
        test: test_score,
        generations: result.history,
        evaluations: result.evaluations,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(RunOutcome {
        report,
        best,
        grammar: s.grammar.clone(),
        train,
        test,
    })
}

/// Mean and standard deviation over runs of the best fitness of the
/// population at each generation, as CSV.
pub fn learning_curve(runs: &[&[GenerationStats]]) -> String {
    let mut out = String::from("generation,best_mean,best_std\n");
    let len = runs.iter().map(|r| r.len()).min().unwrap_or(0);
    for g in 0..len {
        let best: Vec<f64> = runs.iter().map(|r| r[g].best).collect();
        let sd = if best.len() > 1 {
            stats::std_dev(&best)
        } else {
            0.0
        };
        out.push_str(&format!(
            "{},{},{}\n",
            runs[0][g].generation,
            stats::mean(&best),
            sd
        ));
    }
    out
}

/// Writes `report.json`, `learning_curve.csv`, `generations.csv`,
/// `formulas.txt` and the augmented `train.csv` / `test.csv` into `dir`.
pub fn write_outputs(o: &RunOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&o.report)?,
    )?;
    fs::write(
        dir.join("learning_curve.csv"),
        learning_curve(&[&o.report.generations]),
    )?;
    let mut gens = String::from("generation,best,mean,std,hall_of_fame,offspring,evaluations\n");
    for s in &o.report.generations {
        gens.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.generation, s.best, s.mean, s.std, s.hall_of_fame, s.offspring, s.evaluations
        ));
    }
    fs::write(dir.join("generations.csv"), gens)?;
    let mut formulas = o.report.formulas.join("\n");
    formulas.push('\n');
    fs::write(dir.join("formulas.txt"), formulas)?;
    export_augmented(&o.train, &o.grammar, &o.best.trees, dir.join("train.csv"))?;
    export_augmented(&o.test, &o.grammar, &o.best.trees, dir.join("test.csv"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{cone_dataset, ConeSpec};
    use crate::grammar::parse_grammar;

    fn grammar() -> Grammar {
        parse_grammar(include_str!("../fixtures/higgs.grammar")).unwrap()
    }

    fn small() -> RunSettings {
        RunSettings {
            evolution: EvolutionConfig {
                population_size: 12,
                generations: 2,
                ..EvolutionConfig::default()
            },
            ..RunSettings::default()
        }
    }

    #[test]
    fn zero_generations_reports_the_initial_best() {
        let d = cone_dataset(&ConeSpec {
            rows: 300,
            ..ConeSpec::default()
        })
        .unwrap();
        let s = setup(Mode::Gggp, &grammar(), None, &d).unwrap();
        let mut settings = small();
        settings.evolution.generations = 0;
        let o = run(Mode::Gggp, &settings, &s, 3, 1).unwrap();
        assert_eq!(o.report.generations.len(), 1);
        assert_eq!(o.report.best_cv, o.report.generations[0].best);
        assert_eq!(o.report.train_rows + o.report.test_rows, 300);
    }

    #[test]
    fn simple_mode_uses_one_type() {
        let d = cone_dataset(&ConeSpec {
            rows: 300,
            ..ConeSpec::default()
        })
        .unwrap();
        let s = setup(Mode::Simple, &grammar(), None, &d).unwrap();
        assert_eq!(s.grammar.types().len(), 1);
        assert!(s.data.columns().iter().all(|c| c.unit == "F"));
        let o = run(Mode::Simple, &small(), &s, 1, 2).unwrap();
        assert_eq!(o.report.generations.len(), 3);
    }

    #[test]
    fn pgggp_requires_transitions() {
        let d = cone_dataset(&ConeSpec {
            rows: 50,
            ..ConeSpec::default()
        })
        .unwrap();
        assert!(setup(Mode::Pgggp, &grammar(), None, &d).is_err());
        assert_eq!("PGGGP".parse::<Mode>().unwrap(), Mode::Pgggp);
    }

    #[test]
    fn learning_curve_over_runs() {
        let row = |generation, best| GenerationStats {
            generation,
            best,
            mean: 0.0,
            std: 0.0,
            hall_of_fame: best,
            offspring: 0,
            evaluations: 0,
        };
        let a = [row(0, 1.0), row(1, 3.0)];
        let b = [row(0, 3.0), row(1, 3.0)];
        let csv = learning_curve(&[&a, &b]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], format!("0,2,{}", 2f64.sqrt()));
        assert_eq!(lines[2], "1,3,0");
    }
}
