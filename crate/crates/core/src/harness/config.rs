//! Experiment configuration: a line-oriented `key = value` format with
//! `[section]` headers. `#` starts a comment. Every key is optional; the
//! defaults describe the four-room experiment.
//!
//! ```text
//! [env]
//! layout = builtin:four_room        # or a path, relative to the config file
//! variant = multi_agent             # single_agent | multi_agent
//!
//! [transfer]                        # optional: teacher trained elsewhere
//! source_layout = builtin:four_room_clear
//! source_variant = single_agent
//!
//! [teacher]
//! source = train                    # train | load
//! path = teacher.qt                 # used by `load`
//! episodes = 3000
//! seed = 0
//! check = true                      # require the teacher to reach the optimum
//!
//! [learner]
//! algorithm = q_learning            # q_learning | sarsa
//! learning_rate = 0.1
//! discount = 0.95
//! epsilon_start = 1
//! epsilon_end = 0.05
//! epsilon_decay_fraction = 0.6
//!
//! [distill]
//! iterations = 10
//! rollouts = 20
//! resample_size = 2000
//! max_depth = 12
//! eval_episodes = 50
//!
//! [advising]
//! mode = eaa                        # eaa | aa | eaa_always_accept | eaa_explore | none
//! heuristic = early                 # early | alternative | importance | mistake_correcting
//! budget = 1000
//! decay = 0.999
//! storage_threshold = 0.8
//! importance_threshold = 1
//! period = 4
//! warm_start = false                # seed student rows from the teacher's values
//! pretrain_episodes = 1000          # eaa_explore: source-side episodes building the partial tree
//!
//! [experiment]
//! episodes = 4000
//! trials = 5
//! seeds = 0, 1, 2, 3, 4
//! eval_cadence = 10
//! eval_episodes = 20
//! smoothing = 50
//! trace = false
//! out = runs/four_room
//!
//! [compare]
//! modes = eaa, aa, none
//! heuristics = early
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::advising::{AdvisingParams, Heuristic, Mode};
use crate::distill::DistillConfig;
use crate::gridworld::{builtin, Layout, LayoutError, Variant};
use crate::tabular_rl::{Algorithm, LearnerConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("layout {name}: {source}")]
    Layout { name: String, source: LayoutError },
}

/// Where a layout comes from: a shipped layout or a file.
#[derive(Clone, Debug, PartialEq)]
pub enum LayoutSource {
    Builtin(String),
    File(PathBuf),
}

impl LayoutSource {
    fn parse(value: &str, base: &Path) -> Result<Self, String> {
        match value.strip_prefix("builtin:") {
            Some(name) => {
                if builtin::by_name(name).is_none() {
                    return Err(format!("unknown builtin layout `{name}`"));
                }
                Ok(LayoutSource::Builtin(name.to_string()))
            }
            None => {
                let p = Path::new(value);
                Ok(LayoutSource::File(if p.is_absolute() {
                    p.to_path_buf()
                } else {
                    base.join(p)
                }))
            }
        }
    }

    pub fn load(&self) -> Result<Layout, ConfigError> {
        match self {
            LayoutSource::Builtin(name) => {
                let text = builtin::by_name(name)
                    .ok_or_else(|| ConfigError::Invalid(format!("unknown builtin `{name}`")))?;
                Layout::parse(text).map_err(|source| ConfigError::Layout {
                    name: self.to_string(),
                    source,
                })
            }
            LayoutSource::File(p) => Layout::load(p).map_err(|source| ConfigError::Layout {
                name: self.to_string(),
                source,
            }),
        }
    }
}

impl std::fmt::Display for LayoutSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LayoutSource::Builtin(name) => write!(f, "builtin:{name}"),
            LayoutSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub layout: LayoutSource,
    pub variant: Variant,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TeacherSource {
    Train,
    Load(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TeacherSpec {
    pub source: TeacherSource,
    pub episodes: usize,
    pub seed: u64,
    pub check: bool,
}

/// Advising settings before a heuristic is chosen; `compare` varies mode and
/// heuristic over the same base.
#[derive(Clone, Debug, PartialEq)]
pub struct AdvisingSpec {
    pub mode: Mode,
    pub heuristic: String,
    pub budget: usize,
    pub decay: f64,
    pub storage_threshold: f64,
    pub importance_threshold: f64,
    pub period: usize,
    pub warm_start: bool,
    pub pretrain_episodes: usize,
}

impl AdvisingSpec {
    pub fn heuristic_named(&self, name: &str) -> Result<Heuristic, ConfigError> {
        Heuristic::from_name(name, self.period, self.importance_threshold)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown heuristic `{name}`")))
    }

    pub fn params(&self, mode: Mode, heuristic: &str) -> Result<AdvisingParams, ConfigError> {
        let params = AdvisingParams {
            mode,
            heuristic: self.heuristic_named(heuristic)?,
            budget: self.budget,
            decay: self.decay,
            storage_threshold: self.storage_threshold,
        };
        params
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(params)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub eval_cadence: usize,
    pub eval_episodes: usize,
    pub smoothing: usize,
    pub trace: bool,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub transfer: Option<EnvSpec>,
    pub teacher: TeacherSpec,
    pub learner: LearnerConfig<f64>,
    pub distill: DistillConfig,
    pub advising: AdvisingSpec,
    pub experiment: ExperimentSpec,
    pub compare_modes: Vec<Mode>,
    pub compare_heuristics: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            env: EnvSpec {
                layout: LayoutSource::Builtin("four_room".into()),
                variant: Variant::MultiAgent,
            },
            transfer: None,
            teacher: TeacherSpec {
                source: TeacherSource::Train,
                episodes: 3000,
                seed: 0,
                check: true,
            },
            learner: LearnerConfig::default(),
            distill: DistillConfig::default(),
            advising: AdvisingSpec {
                mode: Mode::Eaa,
                heuristic: "early".into(),
                budget: 1000,
                decay: 0.999,
                storage_threshold: 0.8,
                importance_threshold: 1.0,
                period: 4,
                warm_start: false,
                pretrain_episodes: 1000,
            },
            experiment: ExperimentSpec {
                episodes: 4000,
                seeds: (0..5).collect(),
                eval_cadence: 10,
                eval_episodes: 20,
                smoothing: 50,
                trace: false,
                out: PathBuf::from("runs/default"),
            },
            compare_modes: vec![Mode::Eaa, Mode::Aa, Mode::None],
            compare_heuristics: vec!["early".into()],
        }
    }
}

const KEYS: &[&str] = &[
    "env.layout",
    "env.variant",
    "transfer.source_layout",
    "transfer.source_variant",
    "teacher.source",
    "teacher.path",
    "teacher.episodes",
    "teacher.seed",
    "teacher.check",
    "learner.algorithm",
    "learner.learning_rate",
    "learner.discount",
    "learner.epsilon_start",
    "learner.epsilon_end",
    "learner.epsilon_decay_fraction",
    "distill.iterations",
    "distill.rollouts",
    "distill.resample_size",
    "distill.max_depth",
    "distill.eval_episodes",
    "advising.mode",
    "advising.heuristic",
    "advising.budget",
    "advising.decay",
    "advising.storage_threshold",
    "advising.importance_threshold",
    "advising.period",
    "advising.warm_start",
    "advising.pretrain_episodes",
    "experiment.episodes",
    "experiment.trials",
    "experiment.seeds",
    "experiment.eval_cadence",
    "experiment.eval_episodes",
    "experiment.smoothing",
    "experiment.trace",
    "experiment.out",
    "compare.modes",
    "compare.heuristics",
];

/// Raw `section.key -> (value, line)` pairs.
fn tokenize(text: &str) -> Result<BTreeMap<String, (String, usize)>, ConfigError> {
    let mut section = String::new();
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Parse {
                    line,
                    message: "unclosed section header".into(),
                })?
                .trim();
            section = name.to_string();
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let full = format!("{section}.{}", key.trim());
        if !KEYS.contains(&full.as_str()) {
            return Err(ConfigError::Parse {
                line,
                message: format!("unknown key `{full}`"),
            });
        }
        if out
            .insert(full.clone(), (value.trim().to_string(), line))
            .is_some()
        {
            return Err(ConfigError::Parse {
                line,
                message: format!("duplicate key `{full}`"),
            });
        }
    }
    Ok(out)
}

struct Values {
    map: BTreeMap<String, (String, usize)>,
}

impl Values {
    fn get<T>(
        &self,
        key: &str,
        parse: impl FnOnce(&str) -> Result<T, String>,
    ) -> Result<Option<T>, ConfigError> {
        match self.map.get(key) {
            None => Ok(None),
            Some((v, line)) => parse(v).map(Some).map_err(|message| ConfigError::Parse {
                line: *line,
                message: format!("{key}: {message}"),
            }),
        }
    }

    fn set<T>(
        &self,
        key: &str,
        target: &mut T,
        parse: impl FnOnce(&str) -> Result<T, String>,
    ) -> Result<(), ConfigError> {
        if let Some(v) = self.get(key, parse)? {
            *target = v;
        }
        Ok(())
    }
}

fn num<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("invalid number `{s}`"))
}

fn boolean(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, found `{s}`")),
    }
}

fn variant(s: &str) -> Result<Variant, String> {
    Variant::parse(s).ok_or_else(|| format!("unknown variant `{s}`"))
}

fn list(s: &str) -> Vec<String> {
    s.split(',')
        .map(|x| x.trim().to_string())
        .filter(|x| !x.is_empty())
        .collect()
}

impl ExperimentConfig {
    /// Parses `text`; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let v = Values {
            map: tokenize(text)?,
        };
        let mut c = ExperimentConfig::default();

        v.set("env.layout", &mut c.env.layout, |s| {
            LayoutSource::parse(s, base)
        })?;
        v.set("env.variant", &mut c.env.variant, variant)?;

        let src_layout = v.get("transfer.source_layout", |s| LayoutSource::parse(s, base))?;
        let src_variant = v.get("transfer.source_variant", variant)?;
        c.transfer = match (src_layout, src_variant) {
            (Some(layout), variant) => Some(EnvSpec {
                layout,
                variant: variant.unwrap_or(Variant::SingleAgent),
            }),
            (None, Some(_)) => {
                return Err(ConfigError::Invalid(
                    "transfer.source_variant needs transfer.source_layout".into(),
                ))
            }
            (None, None) => None,
        };

        let source = v.get("teacher.source", |s| match s {
            "train" | "load" => Ok(s.to_string()),
            _ => Err(format!("expected train or load, found `{s}`")),
        })?;
        let path = v.get("teacher.path", |s| Ok(base.join(s)))?;
        c.teacher.source = match (source.as_deref(), path) {
            (Some("load"), Some(p)) => TeacherSource::Load(p),
            (Some("load"), None) => {
                return Err(ConfigError::Invalid(
                    "teacher.source = load needs teacher.path".into(),
                ))
            }
            _ => TeacherSource::Train,
        };
        v.set("teacher.episodes", &mut c.teacher.episodes, num)?;
        v.set("teacher.seed", &mut c.teacher.seed, num)?;
        c.distill.seed = c.teacher.seed;
        v.set("teacher.check", &mut c.teacher.check, boolean)?;

        v.set("learner.algorithm", &mut c.learner.algorithm, |s| {
            Algorithm::parse(s).ok_or_else(|| format!("unknown algorithm `{s}`"))
        })?;
        v.set("learner.learning_rate", &mut c.learner.learning_rate, num)?;
        v.set("learner.discount", &mut c.learner.discount, num)?;
        v.set("learner.epsilon_start", &mut c.learner.epsilon_start, num)?;
        v.set("learner.epsilon_end", &mut c.learner.epsilon_end, num)?;
        v.set(
            "learner.epsilon_decay_fraction",
            &mut c.learner.epsilon_decay_fraction,
            num,
        )?;

        v.set("distill.iterations", &mut c.distill.iterations, num)?;
        v.set("distill.rollouts", &mut c.distill.rollouts, num)?;
        v.set("distill.resample_size", &mut c.distill.resample_size, num)?;
        v.set("distill.max_depth", &mut c.distill.max_depth, num)?;
        v.set("distill.eval_episodes", &mut c.distill.eval_episodes, num)?;

        v.set("advising.mode", &mut c.advising.mode, |s| {
            Mode::parse(s).ok_or_else(|| format!("unknown mode `{s}`"))
        })?;
        v.set("advising.heuristic", &mut c.advising.heuristic, |s| {
            Ok(s.to_string())
        })?;
        v.set("advising.budget", &mut c.advising.budget, num)?;
        v.set("advising.decay", &mut c.advising.decay, num)?;
        v.set(
            "advising.storage_threshold",
            &mut c.advising.storage_threshold,
            num,
        )?;
        v.set(
            "advising.importance_threshold",
            &mut c.advising.importance_threshold,
            num,
        )?;
        v.set("advising.period", &mut c.advising.period, num)?;
        v.set("advising.warm_start", &mut c.advising.warm_start, boolean)?;
        v.set(
            "advising.pretrain_episodes",
            &mut c.advising.pretrain_episodes,
            num,
        )?;

        v.set("experiment.episodes", &mut c.experiment.episodes, num)?;
        let trials: Option<usize> = v.get("experiment.trials", num)?;
        let seeds: Option<Vec<u64>> = v.get("experiment.seeds", |s| {
            list(s).iter().map(|x| num(x)).collect()
        })?;
        c.experiment.seeds = match (trials, seeds) {
            (Some(n), Some(seeds)) if n != seeds.len() => {
                return Err(ConfigError::Invalid(format!(
                    "experiment.trials = {n} but {} seeds listed",
                    seeds.len()
                )))
            }
            (_, Some(seeds)) => seeds,
            (Some(n), None) => (0..n as u64).collect(),
            (None, None) => c.experiment.seeds,
        };
        v.set(
            "experiment.eval_cadence",
            &mut c.experiment.eval_cadence,
            num,
        )?;
        v.set(
            "experiment.eval_episodes",
            &mut c.experiment.eval_episodes,
            num,
        )?;
        v.set("experiment.smoothing", &mut c.experiment.smoothing, num)?;
        v.set("experiment.trace", &mut c.experiment.trace, boolean)?;
        c.experiment.out = base.join(&c.experiment.out);
        v.set(
            "experiment.out",
            &mut c.experiment.out,
            |s| Ok(base.join(s)),
        )?;

        v.set("compare.modes", &mut c.compare_modes, |s| {
            list(s)
                .iter()
                .map(|m| Mode::parse(m).ok_or_else(|| format!("unknown mode `{m}`")))
                .collect()
        })?;
        v.set("compare.heuristics", &mut c.compare_heuristics, |s| {
            Ok(list(s))
        })?;

        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.experiment.episodes == 0 {
            return invalid("experiment.episodes must be at least 1".into());
        }
        if self.experiment.seeds.is_empty() {
            return invalid("at least one trial seed is required".into());
        }
        let mut sorted = self.experiment.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.experiment.seeds.len() {
            return invalid("trial seeds must be distinct".into());
        }
        if self.experiment.eval_cadence == 0 || self.experiment.eval_episodes == 0 {
            return invalid("eval_cadence and eval_episodes must be at least 1".into());
        }
        if self.experiment.smoothing == 0 {
            return invalid("smoothing window must be at least 1".into());
        }
        if self.teacher.episodes == 0 {
            return invalid("teacher.episodes must be at least 1".into());
        }
        let mut learner = self.learner.clone();
        learner.episodes = self.experiment.episodes;
        learner
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.distill
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.advising
            .params(self.advising.mode, &self.advising.heuristic)?;
        for h in &self.compare_heuristics {
            self.advising.heuristic_named(h)?;
        }
        if self.compare_modes.is_empty() || self.compare_heuristics.is_empty() {
            return invalid("compare needs at least one mode and one heuristic".into());
        }
        Ok(())
    }

    /// Learner settings for student trials.
    pub fn student_learner(&self) -> LearnerConfig<f64> {
        LearnerConfig {
            episodes: self.experiment.episodes,
            ..self.learner.clone()
        }
    }

    /// Learner settings for teacher training.
    pub fn teacher_learner(&self) -> LearnerConfig<f64> {
        LearnerConfig {
            episodes: self.teacher.episodes,
            ..self.learner.clone()
        }
    }

    /// Environment the teacher is trained in.
    pub fn teacher_env(&self) -> &EnvSpec {
        self.transfer.as_ref().unwrap_or(&self.env)
    }

    /// Overrides the teacher and distillation seeds with `seed` and the
    /// trial seeds with `seed, seed + 1, ...` (same count).
    pub fn with_seed(mut self, seed: u64) -> Self {
        let n = self.experiment.seeds.len() as u64;
        self.teacher.seed = seed;
        self.distill.seed = seed;
        self.experiment.seeds = (seed..seed + n).collect();
        self
    }

    /// The fully resolved configuration in the input format. Parsing it
    /// back yields the same configuration.
    pub fn to_lock(&self) -> String {
        let mut o = String::new();
        let c = self;
        let _ = writeln!(
            o,
            "[env]\nlayout = {}\nvariant = {}\n",
            c.env.layout,
            c.env.variant.name()
        );
        if let Some(t) = &c.transfer {
            let _ = writeln!(
                o,
                "[transfer]\nsource_layout = {}\nsource_variant = {}\n",
                t.layout,
                t.variant.name()
            );
        }
        let _ = writeln!(o, "[teacher]");
        match &c.teacher.source {
            TeacherSource::Train => {
                let _ = writeln!(o, "source = train");
            }
            TeacherSource::Load(p) => {
                let _ = writeln!(o, "source = load\npath = {}", p.display());
            }
        }
        let _ = writeln!(
            o,
            "episodes = {}\nseed = {}\ncheck = {}\n",
            c.teacher.episodes, c.teacher.seed, c.teacher.check
        );
        let l = &c.learner;
        let _ = writeln!(
            o,
            "[learner]\nalgorithm = {}\nlearning_rate = {}\ndiscount = {}\nepsilon_start = {}\nepsilon_end = {}\nepsilon_decay_fraction = {}\n",
            l.algorithm.name(),
            l.learning_rate,
            l.discount,
            l.epsilon_start,
            l.epsilon_end,
            l.epsilon_decay_fraction
        );
        let d = &c.distill;
        let _ = writeln!(
            o,
            "[distill]\niterations = {}\nrollouts = {}\nresample_size = {}\nmax_depth = {}\neval_episodes = {}\n",
            d.iterations, d.rollouts, d.resample_size, d.max_depth, d.eval_episodes
        );
        let a = &c.advising;
        let _ = writeln!(
            o,
            "[advising]\nmode = {}\nheuristic = {}\nbudget = {}\ndecay = {}\nstorage_threshold = {}\nimportance_threshold = {}\nperiod = {}\nwarm_start = {}\npretrain_episodes = {}\n",
            a.mode.name(),
            a.heuristic,
            a.budget,
            a.decay,
            a.storage_threshold,
            a.importance_threshold,
            a.period,
            a.warm_start,
            a.pretrain_episodes
        );
        let e = &c.experiment;
        let seeds: Vec<String> = e.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(
            o,
            "[experiment]\nepisodes = {}\ntrials = {}\nseeds = {}\neval_cadence = {}\neval_episodes = {}\nsmoothing = {}\ntrace = {}\nout = {}\n",
            e.episodes,
            e.seeds.len(),
            seeds.join(", "),
            e.eval_cadence,
            e.eval_episodes,
            e.smoothing,
            e.trace,
            e.out.display()
        );
        let modes: Vec<&str> = c.compare_modes.iter().map(|m| m.name()).collect();
        let _ = write!(
            o,
            "[compare]\nmodes = {}\nheuristics = {}\n",
            modes.join(", "),
            c.compare_heuristics.join(", ")
        );
        o
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_text() {
        let c = ExperimentConfig::parse("", Path::new("/x")).unwrap();
        let mut expected = ExperimentConfig::default();
        expected.experiment.out = PathBuf::from("/x/runs/default");
        assert_eq!(c, expected);
    }

    #[test]
    fn sections_and_comments() {
        let text = "\
# four-room, plain advising
[env]
layout = maps/a.layout   # relative
variant = single_agent
[advising]
mode = aa
heuristic = importance
importance_threshold = 2.5
[experiment]
seeds = 3, 9
";
        let c = ExperimentConfig::parse(text, Path::new("/cfg")).unwrap();
        assert_eq!(
            c.env.layout,
            LayoutSource::File(PathBuf::from("/cfg/maps/a.layout"))
        );
        assert_eq!(c.env.variant, Variant::SingleAgent);
        assert_eq!(c.advising.mode, Mode::Aa);
        assert_eq!(
            c.advising.params(Mode::Aa, "importance").unwrap().heuristic,
            Heuristic::Importance { threshold: 2.5 }
        );
        assert_eq!(c.experiment.seeds, vec![3, 9]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = ExperimentConfig::parse("[env]\nvariant = both\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }), "{err}");
        let err = ExperimentConfig::parse("[env]\n\ncolour = red\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 3, .. }), "{err}");
        let err = ExperimentConfig::parse("[experiment]\ntrials = 2\nseeds = 1\n", Path::new("."))
            .unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)), "{err}");
        assert!(ExperimentConfig::parse("[advising]\ndecay = 1.5\n", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("[env]\nlayout = builtin:moon\n", Path::new(".")).is_err());
    }

    #[test]
    fn lock_round_trips() {
        let text = "\
[transfer]
source_layout = builtin:four_room_clear
[teacher]
source = load
path = t.qt
[advising]
mode = eaa_explore
[compare]
modes = eaa, eaa_always_accept
heuristics = early, alternative
";
        let c = ExperimentConfig::parse(text, Path::new("/base")).unwrap();
        let lock = c.to_lock();
        let back = ExperimentConfig::parse(&lock, Path::new("/elsewhere")).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_lock(), lock);
    }

    #[test]
    fn seed_override() {
        let c = ExperimentConfig::default().with_seed(40);
        assert_eq!(c.experiment.seeds, vec![40, 41, 42, 43, 44]);
        assert_eq!(c.teacher.seed, 40);
        assert_eq!(c.distill.seed, 40);
    }
}
