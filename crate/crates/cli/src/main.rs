//! `eaa`: train teachers, distill trees, run advising experiments and export
//! learning curves.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use eaa_core::distill::agreement;
use eaa_core::harness::{self, ExperimentConfig, RunOutput, TeacherSource};
use eaa_core::rollout;

#[derive(Parser, Debug)]
#[command(
    name = "eaa",
    version,
    about = "Explainable action advising experiments"
)]
struct Cli {
    /// Experiment configuration; defaults describe the four-room experiment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Teacher and distillation seed; trial seeds become seed, seed+1, ...
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding `experiment.out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the teacher and write `teacher.qt`.
    TrainTeacher,
    /// Train (or load) the teacher and distill one tree per agent.
    Distill {
        /// Load the teacher from this file instead of training it.
        #[arg(long)]
        teacher: Option<PathBuf>,
    },
    /// Run the configured advising mode over every trial seed.
    Run {
        #[arg(long)]
        teacher: Option<PathBuf>,
    },
    /// Run every configured mode and heuristic against the same teacher.
    Compare {
        #[arg(long)]
        teacher: Option<PathBuf>,
    },
    /// Rebuild curve files from the trial files of a run directory.
    Export {
        /// Run directory; defaults to the output directory.
        dir: Option<PathBuf>,
        /// Trailing smoothing window; defaults to `experiment.smoothing`.
        #[arg(long)]
        smoothing: Option<usize>,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            ExperimentConfig::load(path).with_context(|| format!("config {}", path.display()))?
        }
        None => ExperimentConfig::parse("", Path::new("."))?,
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg.experiment.out = out.clone();
    }
    Ok(cfg)
}

fn use_teacher(cfg: &mut ExperimentConfig, teacher: &Option<PathBuf>) {
    if let Some(path) = teacher {
        cfg.teacher.source = TeacherSource::Load(path.clone());
    }
}

fn summarize(out: &RunOutput) {
    println!("teacher reward {:.3}", out.teacher_reward);
    for arm in &out.arms {
        let finals: Vec<f64> = arm
            .trials
            .iter()
            .map(|t| harness::final_mean_reward(&t.records, 1000))
            .collect();
        let (mean, std) = harness::mean_std(&finals);
        let exhausted: Vec<String> = arm
            .trials
            .iter()
            .map(|t| harness::exhaustion_episode(&t.records).map_or("-".into(), |e| e.to_string()))
            .collect();
        println!(
            "{:<24} final mean reward {mean:.3} (std {std:.3}), budget exhausted at [{}]",
            arm.label,
            exhausted.join(", ")
        );
    }
    println!("wrote {}", out.dir.display());
}

fn execute(cli: &Cli) -> Result<()> {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::TrainTeacher => {
            let prepared = harness::prepare(&cfg, false)?;
            let out = &cfg.experiment.out;
            harness::write_file(&out.join("config.lock"), cfg.to_lock())?;
            harness::write_teacher_artifacts(out, &prepared)?;
            println!("teacher reward {:.3}", prepared.teacher_reward);
            println!("wrote {}", out.join("teacher.qt").display());
        }
        Command::Distill { teacher } => {
            use_teacher(&mut cfg, teacher);
            let prepared = harness::prepare(&cfg, true)?;
            let out = &cfg.experiment.out;
            harness::write_file(&out.join("config.lock"), cfg.to_lock())?;
            harness::write_teacher_artifacts(out, &prepared)?;
            let art = &prepared.artifacts;
            let trees = art
                .trees
                .as_ref()
                .context("distillation produced no trees")?;
            for run in prepared.distillation.iter().flatten() {
                let c = &run.candidates[run.selected];
                println!(
                    "{}: iteration {} selected, score {:.3}, {} nodes, depth {}",
                    run.agent.name(),
                    c.iteration,
                    c.score,
                    c.tree.len(),
                    c.tree.depth()
                );
            }
            let eval_seed =
                eaa_core::seed::derive(cfg.teacher.seed, eaa_core::seed::stream::EVAL_RESET);
            let reward: f64 = rollout::evaluate(&art.teacher_env, trees, 100, eval_seed);
            let agree = agreement(&art.teacher_env, &art.teacher, trees, 100, eval_seed);
            println!("teacher reward {:.3}", prepared.teacher_reward);
            println!("tree reward {reward:.3}, agreement {agree:.4}");
            println!("wrote {}", out.join("teacher.tree").display());
        }
        Command::Run { teacher } => {
            use_teacher(&mut cfg, teacher);
            summarize(&harness::run(&cfg)?);
        }
        Command::Compare { teacher } => {
            use_teacher(&mut cfg, teacher);
            summarize(&harness::compare(&cfg)?);
        }
        Command::Export { dir, smoothing } => {
            let dir = dir.clone().unwrap_or_else(|| cfg.experiment.out.clone());
            let labels = harness::export(&dir, smoothing.unwrap_or(cfg.experiment.smoothing))?;
            for label in labels {
                println!("wrote {}", dir.join(format!("curve_{label}.csv")).display());
            }
        }
    }
    Ok(())
}

/// The error chain on one line, skipping causes their wrapper already
/// printed.
fn one_line(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg.replace('\n', " ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::FAILURE
        }
    }
}
