//! Experiment runner: builds the teacher artifacts once, runs seeded trials
//! in parallel, and writes a run directory.
//!
//! ```text
//! <out>/config.lock          resolved configuration
//! <out>/teacher.qt           teacher Q-tables
//! <out>/teacher.tree         distilled trees, one per agent
//! <out>/candidates.csv       every distillation candidate with its score
//! <out>/candidates/<agent>_<iteration>.tree
//! <out>/trial_<seed>.csv     `run`: one file per trial
//! <out>/<label>/trial_<seed>.csv   `compare`: one directory per arm
//! <out>/curve_<label>.csv    per-episode statistics across trials
//! <out>/eval_<label>.csv     greedy evaluation statistics
//! ```

mod config;
mod curve;
mod trial;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

pub use config::{
    AdvisingSpec, ConfigError, EnvSpec, ExperimentConfig, ExperimentSpec, LayoutSource,
    TeacherSource, TeacherSpec,
};
pub use curve::{
    aggregate, aggregate_eval, export_csv, export_eval_csv, mean_std, read_curve_csv, smooth,
    CurveRow, EvalRow, CURVE_HEADER,
};
pub use trial::{
    exhaustion_episode, final_mean_reward, first_eval_reaching, read_trial_csv, run_trial,
    write_trial_csv, Artifacts, EpisodeRecord, Trial, TrialSpec,
};

use crate::advising::{write_trace, AdvisingError, AdvisingParams, Mode, TransferConfig};
use crate::distill::{candidates_csv, viper, AgentDistillation, DistillError, TreeTeam};
use crate::gridworld::{EnvError, Gridworld};
use crate::tabular_rl::{
    evaluate_team, train_teacher, train_team, LearnerError, QTableFormatError, TeamQ, TrainError,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    ConfigFile(#[from] ConfigError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Advising(#[from] AdvisingError),
    #[error(transparent)]
    Distill(#[from] DistillError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("teacher file: {0}")]
    TeacherFormat(#[from] QTableFormatError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("trials have different lengths ({expected} vs {got} episodes)")]
    Ragged { expected: usize, got: usize },
    #[error("{0}")]
    Format(String),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| HarnessError::File {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| HarnessError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_file(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|source| HarnessError::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Student and teacher environments.
pub fn build_envs(cfg: &ExperimentConfig) -> Result<(Gridworld, Gridworld), HarnessError> {
    let env = Gridworld::new(cfg.env.layout.load()?, cfg.env.variant)?;
    let spec = cfg.teacher_env();
    let teacher_env = Gridworld::new(spec.layout.load()?, spec.variant)?;
    Ok((env, teacher_env))
}

/// Trains (or loads) the teacher in its environment. Returns the team and
/// its greedy evaluation reward.
pub fn obtain_teacher(
    cfg: &ExperimentConfig,
    teacher_env: &Gridworld,
) -> Result<(TeamQ<f64>, f64), HarnessError> {
    let team = match &cfg.teacher.source {
        TeacherSource::Load(path) => {
            let team = TeamQ::from_text(&read_file(path)?)?;
            if team.agents() != teacher_env.agents() {
                return Err(HarnessError::Config(format!(
                    "{} holds agents {:?}, the teacher environment has {:?}",
                    path.display(),
                    team.agents(),
                    teacher_env.agents()
                )));
            }
            team
        }
        TeacherSource::Train if cfg.teacher.check => {
            train_teacher(teacher_env, &cfg.teacher_learner(), cfg.teacher.seed)?
        }
        TeacherSource::Train => {
            train_team(teacher_env, &cfg.teacher_learner(), cfg.teacher.seed, None)?
        }
    };
    let reward = evaluate_team(teacher_env, &team, cfg.teacher.seed);
    Ok((team, reward))
}

/// Everything trials share, plus what produced it.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub artifacts: Artifacts<f64>,
    pub teacher_reward: f64,
    pub distillation: Option<Vec<AgentDistillation<f64>>>,
}

/// Builds environments, the teacher and, when `distill` is set, the
/// distilled trees.
pub fn prepare(cfg: &ExperimentConfig, distill: bool) -> Result<Prepared, HarnessError> {
    let (env, teacher_env) = build_envs(cfg)?;
    let (teacher, teacher_reward) = obtain_teacher(cfg, &teacher_env)?;
    let distillation = if distill {
        Some(viper(&teacher_env, &teacher, &cfg.distill)?)
    } else {
        None
    };
    let transfer = cfg.transfer.as_ref().map(|_| {
        TransferConfig::new(
            teacher_env.feature_space(),
            &teacher_env.active_features(),
            env.feature_space(),
            &env.active_features(),
        )
    });
    Ok(Prepared {
        artifacts: Artifacts {
            trees: distillation.as_deref().map(TreeTeam::from_distillation),
            env,
            teacher_env,
            teacher,
            transfer,
        },
        teacher_reward,
        distillation,
    })
}

/// Writes `teacher.qt` and, when present, the trees and every candidate.
pub fn write_teacher_artifacts(dir: &Path, prepared: &Prepared) -> Result<(), HarnessError> {
    write_file(
        &dir.join("teacher.qt"),
        prepared.artifacts.teacher.to_text(),
    )?;
    if let Some(runs) = &prepared.distillation {
        write_file(
            &dir.join("teacher.tree"),
            TreeTeam::from_distillation(runs).to_text(),
        )?;
        write_file(&dir.join("candidates.csv"), candidates_csv(runs))?;
        for run in runs {
            for c in &run.candidates {
                let name = format!("{}_{}.tree", run.agent.name(), c.iteration);
                write_file(&dir.join("candidates").join(name), c.tree.to_text())?;
            }
        }
    }
    Ok(())
}

pub fn trial_spec(cfg: &ExperimentConfig, params: AdvisingParams) -> TrialSpec<f64> {
    TrialSpec {
        learner: cfg.student_learner(),
        params,
        eval_cadence: cfg.experiment.eval_cadence,
        eval_episodes: cfg.experiment.eval_episodes,
        warm_start: cfg.advising.warm_start,
        pretrain_episodes: cfg.advising.pretrain_episodes,
        trace: cfg.experiment.trace,
    }
}

/// All seeds in parallel; results in seed-list order.
pub fn run_trials(
    art: &Artifacts<f64>,
    spec: &TrialSpec<f64>,
    seeds: &[u64],
) -> Result<Vec<Trial<f64>>, HarnessError> {
    seeds.par_iter().map(|&s| run_trial(art, spec, s)).collect()
}

/// Results of one arm (mode and heuristic) of an experiment.
#[derive(Clone, Debug)]
pub struct ArmResult {
    pub label: String,
    pub params: AdvisingParams,
    pub trials: Vec<Trial<f64>>,
    pub curve: Vec<CurveRow>,
}

impl ArmResult {
    pub fn records(&self) -> Vec<Vec<EpisodeRecord<f64>>> {
        self.trials.iter().map(|t| t.records.clone()).collect()
    }
}

/// Writes trial files under `trial_dir` and the smoothed curve plus the
/// evaluation summary under `curve_dir`.
fn write_arm(
    arm: &ArmResult,
    trial_dir: &Path,
    curve_dir: &Path,
    smoothing: usize,
) -> Result<(), HarnessError> {
    for t in &arm.trials {
        let mut buf = Vec::new();
        write_trial_csv(&t.records, &mut buf)?;
        write_file(&trial_dir.join(format!("trial_{}.csv", t.seed)), buf)?;
        if !t.trace.is_empty() {
            let mut buf = Vec::new();
            write_trace(&t.trace, &mut buf)?;
            write_file(&trial_dir.join(format!("trace_{}.csv", t.seed)), buf)?;
        }
    }
    write_curves(&arm.label, &arm.records(), curve_dir, smoothing)
}

fn write_curves(
    label: &str,
    records: &[Vec<EpisodeRecord<f64>>],
    dir: &Path,
    smoothing: usize,
) -> Result<(), HarnessError> {
    let mut buf = Vec::new();
    export_csv(&smooth(&aggregate(records)?, smoothing), &mut buf)?;
    write_file(&dir.join(format!("curve_{label}.csv")), buf)?;
    let mut buf = Vec::new();
    export_eval_csv(&aggregate_eval(records)?, &mut buf)?;
    write_file(&dir.join(format!("eval_{label}.csv")), buf)
}

fn run_arm(
    cfg: &ExperimentConfig,
    art: &Artifacts<f64>,
    params: AdvisingParams,
) -> Result<ArmResult, HarnessError> {
    let spec = trial_spec(cfg, params.clone());
    let trials = run_trials(art, &spec, &cfg.experiment.seeds)?;
    let records: Vec<_> = trials.iter().map(|t| t.records.clone()).collect();
    Ok(ArmResult {
        label: params.label(),
        curve: aggregate(&records)?,
        params,
        trials,
    })
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub teacher_reward: f64,
    pub arms: Vec<ArmResult>,
}

fn needs_trees(modes: &[Mode]) -> bool {
    modes.iter().any(|m| m.uses_partial())
}

/// `run`: the configured mode and heuristic.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let out = &cfg.experiment.out;
    let prepared = prepare(cfg, needs_trees(&[cfg.advising.mode]))?;
    write_file(&out.join("config.lock"), cfg.to_lock())?;
    write_teacher_artifacts(out, &prepared)?;
    let params = cfg
        .advising
        .params(cfg.advising.mode, &cfg.advising.heuristic)?;
    let arm = run_arm(cfg, &prepared.artifacts, params)?;
    write_arm(&arm, out, out, cfg.experiment.smoothing)?;
    Ok(RunOutput {
        dir: out.clone(),
        teacher_reward: prepared.teacher_reward,
        arms: vec![arm],
    })
}

/// The (mode, heuristic) arms `compare` runs. Modes that never consult the
/// teacher run once.
pub fn compare_arms(cfg: &ExperimentConfig) -> Result<Vec<AdvisingParams>, HarnessError> {
    let mut arms = Vec::new();
    for &mode in &cfg.compare_modes {
        if mode.has_teacher() {
            for h in &cfg.compare_heuristics {
                arms.push(cfg.advising.params(mode, h)?);
            }
        } else {
            arms.push(cfg.advising.params(mode, &cfg.advising.heuristic)?);
        }
    }
    Ok(arms)
}

/// `compare`: every arm against the same teacher artifacts and seed list.
pub fn compare(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let out = &cfg.experiment.out;
    let arms = compare_arms(cfg)?;
    let modes: Vec<Mode> = arms.iter().map(|a| a.mode).collect();
    let prepared = prepare(cfg, needs_trees(&modes))?;
    write_file(&out.join("config.lock"), cfg.to_lock())?;
    write_teacher_artifacts(out, &prepared)?;
    let mut results = Vec::with_capacity(arms.len());
    for params in arms {
        let arm = run_arm(cfg, &prepared.artifacts, params)?;
        write_arm(&arm, &out.join(&arm.label), out, cfg.experiment.smoothing)?;
        results.push(arm);
    }
    Ok(RunOutput {
        dir: out.clone(),
        teacher_reward: prepared.teacher_reward,
        arms: results,
    })
}

/// Reads every `trial_<seed>.csv` in `dir`, in seed order.
pub fn read_trials(dir: &Path) -> Result<Vec<Vec<EpisodeRecord<f64>>>, HarnessError> {
    let mut seeds: Vec<u64> = fs::read_dir(dir)
        .map_err(|source| HarnessError::File {
            path: dir.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            name.strip_prefix("trial_")?
                .strip_suffix(".csv")?
                .parse()
                .ok()
        })
        .collect();
    seeds.sort_unstable();
    seeds
        .into_iter()
        .map(|s| {
            read_trial_csv(
                s,
                read_file(&dir.join(format!("trial_{s}.csv")))?.as_bytes(),
            )
        })
        .collect()
}

/// `export`: rebuilds curve files from the trial files of a run directory.
/// Top-level trials take their label from `config.lock`; each
/// subdirectory holding trials is an arm named after the directory.
/// Returns the labels written.
pub fn export(dir: &Path, smoothing: usize) -> Result<Vec<String>, HarnessError> {
    let mut labels = Vec::new();
    let top = read_trials(dir)?;
    if !top.is_empty() {
        let cfg = ExperimentConfig::parse(&read_file(&dir.join("config.lock"))?, dir)?;
        let label = cfg
            .advising
            .params(cfg.advising.mode, &cfg.advising.heuristic)?
            .label();
        write_curves(&label, &top, dir, smoothing)?;
        labels.push(label);
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    for sub in subdirs {
        let trials = read_trials(&sub)?;
        if trials.is_empty() {
            continue;
        }
        let label = sub
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        write_curves(&label, &trials, dir, smoothing)?;
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(HarnessError::MissingArtifact(format!(
            "no trial files under {}",
            dir.display()
        )));
    }
    Ok(labels)
}
