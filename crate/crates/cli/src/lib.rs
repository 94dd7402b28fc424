//! Command implementations behind the `dimgp` binary.
//!
//! Every command takes a JSON [`RunConfig`]. Relative paths inside a config
//! file are resolved against the directory holding it.

mod batch;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dimgp::data::{self, cone_dataset, histogram, split, write_csv, ConeSpec, Dataset, SplitSpec};
use dimgp::evolve::EvolutionConfig;
use dimgp::fitness::{holdout_gain, Evaluator, FitnessFn, FitnessSpec, TestScore};
use dimgp::grammar::{parse_grammar, Grammar, Issue};
use dimgp::run::{self, Mode, RunReport, RunSettings, Setup};
use dimgp::tree::{evaluate, parse_expression, render_infix, type_check, ExprTree};

pub use batch::{cmd_batch, BatchSummary, Comparison, MethodSummary, RunFailure};

/// A command failure, mapped to the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Configuration, grammar, transitions or data did not validate.
    Invalid(Vec<String>),
    /// Something broke after validation.
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn invalid(e: impl fmt::Display) -> Failure {
        Failure::Invalid(vec![e.to_string()])
    }

    fn runtime(e: impl fmt::Display) -> Failure {
        Failure::Runtime(e.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(issues) => {
                writeln!(f, "validation failed:")?;
                for i in issues {
                    writeln!(f, "  {i}")?;
                }
                Ok(())
            }
            Failure::Runtime(m) => write!(f, "run failed: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

pub type CliResult<T> = Result<T, Failure>;

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grammar_path: PathBuf,
    /// Absent: uniform transitions. `"none"`: simple GP. Otherwise a path.
    #[serde(default)]
    pub transitions_path: Option<String>,
    pub dataset_path: PathBuf,
    #[serde(default)]
    pub schema_path: Option<PathBuf>,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub fitness: FitnessSpec,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> CliResult<RunConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        RunConfig::from_json(&text, base)
    }

    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> CliResult<RunConfig> {
        let mut cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Failure::invalid(format!("config: {e}")))?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn transitions_file(&self) -> Option<PathBuf> {
        match self.transitions_path.as_deref() {
            None => None,
            Some(s) if s.eq_ignore_ascii_case("none") => None,
            Some(s) => Some(self.resolve(Path::new(s))),
        }
    }

    /// The mode the config describes on its own.
    pub fn mode(&self) -> Mode {
        match self.transitions_path.as_deref() {
            None => Mode::Gggp,
            Some(s) if s.eq_ignore_ascii_case("none") => Mode::Simple,
            Some(_) => Mode::Pgggp,
        }
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings {
            split: self.split,
            evolution: self.evolution.clone(),
            fitness: self.fitness.clone(),
        }
    }

    pub fn output(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }
}

/// Everything a config points at, loaded once.
pub struct Inputs {
    pub grammar: Grammar,
    pub transitions: Option<String>,
    pub data: Dataset,
}

impl Inputs {
    pub fn load(cfg: &RunConfig) -> CliResult<Inputs> {
        let mut issues = Vec::new();
        let gpath = cfg.resolve(&cfg.grammar_path);
        let grammar = fs::read_to_string(&gpath)
            .map_err(|e| format!("{}: {e}", gpath.display()))
            .and_then(|t| parse_grammar(&t).map_err(|e| format!("{}: {e}", gpath.display())));
        let transitions = match cfg.transitions_file() {
            Some(p) => match fs::read_to_string(&p) {
                Ok(t) => Some(t),
                Err(e) => {
                    issues.push(format!("{}: {e}", p.display()));
                    None
                }
            },
            None => None,
        };
        let schema = cfg.schema_path.as_ref().map(|p| cfg.resolve(p));
        let data = data::load(cfg.resolve(&cfg.dataset_path), schema.as_deref())
            .map_err(|e| e.to_string());
        if let Err(e) = &grammar {
            issues.push(e.clone());
        }
        if let Err(e) = &data {
            issues.push(e.clone());
        }
        if !issues.is_empty() {
            return Err(Failure::Invalid(issues));
        }
        Ok(Inputs {
            grammar: grammar.expect("checked"),
            transitions,
            data: data.expect("checked"),
        })
    }

    /// Prepares `mode` and runs the validators; errors become
    /// [`Failure::Invalid`], warnings are returned.
    pub fn setup(&self, mode: Mode, depth_max: usize) -> CliResult<(Setup, Vec<Issue>)> {
        let s = run::setup(mode, &self.grammar, self.transitions.as_deref(), &self.data)
            .map_err(Failure::invalid)?;
        let issues = run::check(&s, depth_max);
        let errors: Vec<String> = issues
            .iter()
            .filter(|i| i.is_error())
            .map(|i| i.to_string())
            .collect();
        if !errors.is_empty() {
            return Err(Failure::Invalid(errors));
        }
        Ok((s, issues))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub mode: Mode,
    pub rows: usize,
    pub columns: usize,
    pub warnings: Vec<String>,
}

/// Loads and checks everything `run` would need.
pub fn cmd_validate(cfg: &RunConfig) -> CliResult<ValidationReport> {
    let mut issues = Vec::new();
    if let Err(e) = cfg.evolution.validate() {
        issues.push(e.to_string());
    }
    if let Err(e) = cfg.fitness.validate() {
        issues.push(e.to_string());
    }
    let inputs = match Inputs::load(cfg) {
        Ok(i) => Some(i),
        Err(Failure::Invalid(more)) => {
            issues.extend(more);
            None
        }
        Err(e) => return Err(e),
    };
    let mut warnings = Vec::new();
    if let Some(inputs) = &inputs {
        match inputs.setup(cfg.mode(), cfg.evolution.depth_max) {
            Ok((_, w)) => warnings = w.iter().map(Issue::to_string).collect(),
            Err(Failure::Invalid(more)) => issues.extend(more),
            Err(e) => return Err(e),
        }
    }
    if !issues.is_empty() {
        return Err(Failure::Invalid(issues));
    }
    let inputs = inputs.expect("loaded");
    Ok(ValidationReport {
        mode: cfg.mode(),
        rows: inputs.data.n_rows(),
        columns: inputs.data.columns().len(),
        warnings,
    })
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: usize,
    pub mode: Option<Mode>,
}

/// One run; writes the report, learning curve, formulas and augmented
/// train/test CSVs to the output directory.
pub fn cmd_run(cfg: &RunConfig, opts: &RunOptions) -> CliResult<RunReport> {
    cfg.evolution.validate().map_err(Failure::invalid)?;
    cfg.fitness.validate().map_err(Failure::invalid)?;
    let inputs = Inputs::load(cfg)?;
    let mode = opts.mode.unwrap_or(cfg.mode());
    let (setup, _) = inputs.setup(mode, cfg.evolution.depth_max)?;
    let seed = opts.seed.unwrap_or(cfg.evolution.seed);
    let outcome = run::run(mode, &cfg.settings(), &setup, seed, opts.workers.max(1))
        .map_err(Failure::runtime)?;
    let out = opts.out.clone().unwrap_or_else(|| cfg.output());
    run::write_outputs(&outcome, &out).map_err(Failure::runtime)?;
    Ok(outcome.report)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub mode: Mode,
    pub seed: u64,
    pub formulas: Vec<String>,
    pub valid: bool,
    pub baseline_cv: f64,
    pub cv: f64,
    pub test: TestScore,
}

fn read_formulas(path: &Path, s: &Setup) -> CliResult<Vec<ExprTree>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    let schema = s.data.schema();
    let mut trees = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let t = parse_expression(line, &s.grammar, &schema)
            .and_then(|t| type_check(&t, &s.grammar).map(|_| t))
            .map_err(|e| Failure::invalid(format!("{}:{}: {e}", path.display(), i + 1)))?;
        trees.push(t);
    }
    if trees.is_empty() {
        return Err(Failure::invalid(format!("{}: no formulas", path.display())));
    }
    Ok(trees)
}

/// Scores a formulas file (one expression per line) the way a run scores
/// its hall of fame: training fitness and held-out gain.
pub fn cmd_eval(cfg: &RunConfig, formulas: &Path, opts: &RunOptions) -> CliResult<EvalReport> {
    cfg.fitness.validate().map_err(Failure::invalid)?;
    let inputs = Inputs::load(cfg)?;
    let mode = opts.mode.unwrap_or(cfg.mode());
    let (s, _) = inputs.setup(mode, cfg.evolution.depth_max)?;
    let trees = read_formulas(formulas, &s)?;
    let seed = opts.seed.unwrap_or(cfg.evolution.seed);
    let (train, test) = split(&s.data, &cfg.split, seed).map_err(Failure::runtime)?;
    let ev = Evaluator::new(&cfg.fitness, &s.grammar, &train, seed).map_err(Failure::runtime)?;
    let r = ev.evaluate(&trees);
    let test =
        holdout_gain(&cfg.fitness, &s.grammar, &train, &test, &trees).map_err(Failure::runtime)?;
    Ok(EvalReport {
        mode,
        seed,
        formulas: trees.iter().map(|t| render_infix(t, &s.grammar)).collect(),
        valid: r.valid,
        baseline_cv: r.baseline,
        cv: r.score,
        test,
    })
}

/// Per-class histogram of a column or formula over the whole dataset, as
/// CSV.
pub fn cmd_histogram(
    cfg: &RunConfig,
    feature: &str,
    bins: usize,
    mode: Option<Mode>,
) -> CliResult<String> {
    let inputs = Inputs::load(cfg)?;
    let mode = mode.unwrap_or(cfg.mode());
    let (s, _) = inputs.setup(mode, cfg.evolution.depth_max)?;
    let values = match s.data.column(feature) {
        Some(c) => c.values.clone(),
        None => {
            let t = parse_expression(feature, &s.grammar, &s.data.schema())
                .map_err(Failure::invalid)?;
            evaluate(&t, &s.grammar, &s.data).map_err(Failure::runtime)?
        }
    };
    let h =
        histogram(&values, s.data.labels(), s.data.n_classes(), bins).map_err(Failure::runtime)?;
    Ok(h.to_csv())
}

/// Writes the synthetic cone dataset as a typed CSV.
pub fn cmd_synth(spec: &ConeSpec, out: &Path) -> CliResult<Dataset> {
    let d = cone_dataset(spec).map_err(Failure::invalid)?;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Failure::runtime)?;
    }
    write_csv(&d, out).map_err(Failure::runtime)?;
    Ok(d)
}

/// Parses `"1,2,5"`, `"0..20"` (end excluded) or a mix of both.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a
                .trim()
                .parse()
                .map_err(|_| format!("bad seed range {part:?}"))?;
            let b: u64 = b
                .trim()
                .parse()
                .map_err(|_| format!("bad seed range {part:?}"))?;
            out.extend(a..b);
        } else {
            out.push(part.parse().map_err(|_| format!("bad seed {part:?}"))?);
        }
    }
    if out.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(out)
}

pub fn parse_methods(s: &str) -> Result<Vec<Mode>, String> {
    let methods = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<Mode>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    if methods.is_empty() {
        return Err("no methods given".into());
    }
    Ok(methods)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_and_methods() {
        assert_eq!(parse_seeds("0..3,7").unwrap(), vec![0, 1, 2, 7]);
        assert!(parse_seeds("x").is_err());
        assert_eq!(
            parse_methods("simple, PGGGP").unwrap(),
            vec![Mode::Simple, Mode::Pgggp]
        );
        assert!(parse_methods("gp").is_err());
    }

    #[test]
    fn mode_from_transitions_path() {
        let base = r#"{"grammar_path":"g","dataset_path":"d""#;
        let cfg = |extra: &str| RunConfig::from_json(&format!("{base}{extra}}}"), "").unwrap();
        assert_eq!(cfg("").mode(), Mode::Gggp);
        assert_eq!(cfg(r#","transitions_path":"none""#).mode(), Mode::Simple);
        assert_eq!(cfg(r#","transitions_path":"t.json""#).mode(), Mode::Pgggp);
        assert!(
            RunConfig::from_json(r#"{"grammar_path":"g","dataset_path":"d","bogus":1}"#, "")
                .is_err()
        );
    }

    #[test]
    fn relative_paths_follow_the_config() {
        let cfg = RunConfig::from_json(
            r#"{"grammar_path":"g.txt","dataset_path":"/abs/d.csv"}"#,
            "/cfg",
        )
        .unwrap();
        assert_eq!(cfg.resolve(&cfg.grammar_path), PathBuf::from("/cfg/g.txt"));
        assert_eq!(cfg.resolve(&cfg.dataset_path), PathBuf::from("/abs/d.csv"));
    }
}
