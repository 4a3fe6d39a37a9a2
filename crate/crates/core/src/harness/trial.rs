//! One seeded training run of a student team under an advising mode.

use std::io;

use super::HarnessError;
use crate::advising::{
    decide, AdvisingParams, AdvisingSession, AgentTeacher, Mode, StepInput, TraceRow,
    TransferConfig,
};
use crate::distill::TreeTeam;
use crate::dtree::{Fingerprint, PartialTree};
use crate::gridworld::{Gridworld, StateFeatures};
use crate::rollout::evaluate;
use crate::scalar::Scalar;
use crate::seed::{self, stream};
use crate::tabular_rl::{apply_transition, LearnerConfig, TeamQ, Transition};

/// Read-only artifacts shared by every trial of an experiment.
#[derive(Clone, Debug)]
pub struct Artifacts<F: Scalar> {
    /// Where students train.
    pub env: Gridworld,
    /// Where the teacher was trained; the student environment unless
    /// advice crosses environments.
    pub teacher_env: Gridworld,
    pub teacher: TeamQ<F>,
    pub trees: Option<TreeTeam<F>>,
    pub transfer: Option<TransferConfig>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialSpec<F: Scalar> {
    pub learner: LearnerConfig<F>,
    pub params: AdvisingParams,
    pub eval_cadence: usize,
    pub eval_episodes: usize,
    /// Unseen student rows start from the teacher's values at the same
    /// (projected) state.
    pub warm_start: bool,
    /// Episodes of explainable advising in the teacher's environment that
    /// build the partial trees an [`Mode::EaaExplore`] student starts with.
    pub pretrain_episodes: usize,
    pub trace: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord<F: Scalar> {
    pub seed: u64,
    pub episode: usize,
    pub reward: F,
    pub length: usize,
    /// Cumulative over the trial and over agents.
    pub advice_issued: usize,
    pub advice_reused: usize,
    pub advice_rejected: usize,
    /// Every advised agent has spent its budget.
    pub budget_exhausted: bool,
    /// Greedy evaluation of the student's own values, every
    /// `eval_cadence` episodes.
    pub eval_reward: Option<F>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trial<F: Scalar> {
    pub seed: u64,
    pub records: Vec<EpisodeRecord<F>>,
    pub trace: Vec<TraceRow>,
    pub student: TeamQ<F>,
}

struct Agents<'a, F: Scalar> {
    sessions: Vec<AdvisingSession>,
    partials: Vec<PartialTree<F>>,
    teachers: Vec<AgentTeacher<'a, F>>,
}

impl<'a, F: Scalar> Agents<'a, F> {
    fn new(
        art: &'a Artifacts<F>,
        params: &AdvisingParams,
        env: &Gridworld,
        cross: bool,
    ) -> Result<Self, HarnessError> {
        let mut sessions = Vec::new();
        let mut partials = Vec::new();
        let mut teachers = Vec::new();
        for agent in env.agents() {
            let ti = art.teacher.agents().iter().position(|a| a == agent);
            let tree = match (ti, &art.trees) {
                (Some(ti), Some(trees)) => Some(trees.tree(ti)),
                _ => None,
            };
            sessions.push(AdvisingSession::new(params.clone())?);
            partials.push(match tree {
                Some(t) => PartialTree::for_tree(t),
                None => PartialTree::new(Fingerprint(0)),
            });
            teachers.push(AgentTeacher {
                q: ti.map(|ti| art.teacher.table(ti)),
                tree,
                transfer: if cross { art.transfer.as_ref() } else { None },
            });
        }
        Ok(Agents {
            sessions,
            partials,
            teachers,
        })
    }

    fn exhausted(&self) -> bool {
        let mut advised = self
            .sessions
            .iter()
            .zip(&self.teachers)
            .filter(|(s, t)| s.mode().has_teacher() && t.q.is_some())
            .peekable();
        advised.peek().is_some() && advised.all(|(s, _)| s.exhausted())
    }
}

struct LoopSpec<'s, F: Scalar> {
    learner: &'s LearnerConfig<F>,
    episodes: usize,
    seed: u64,
    reset_stream: u64,
    act_stream: u64,
    eval: Option<(usize, usize)>,
    warm_start: bool,
    trace: bool,
}

/// The training loop shared by trials and pretraining.
fn train_loop<F: Scalar>(
    env: &Gridworld,
    agents: &mut Agents<'_, F>,
    student: &mut TeamQ<F>,
    spec: &LoopSpec<'_, F>,
) -> Result<(Vec<EpisodeRecord<F>>, Vec<TraceRow>), HarnessError> {
    let n = env.num_agents();
    let mut rng = seed::rng(seed::derive(spec.seed, spec.act_stream));
    let reset_base = seed::derive(spec.seed, spec.reset_stream);
    let eval_base = seed::derive(spec.seed, stream::TRIAL_EVAL);
    let mut buffers: Vec<Vec<Transition<F>>> = vec![Vec::new(); n];
    let mut records = Vec::with_capacity(spec.episodes);
    let mut trace = Vec::new();
    let mut t = 0usize;

    for episode in 0..spec.episodes {
        let epsilon = spec.learner.epsilon(episode);
        let mut state = env.reset(seed::derive(reset_base, episode as u64));
        for b in &mut buffers {
            b.clear();
        }
        let mut reward = F::zero();
        let mut current = observe(env, &state);
        while !state.done {
            let mut ids = Vec::with_capacity(n);
            for (i, (s, valid)) in current.iter().enumerate() {
                if spec.warm_start {
                    warm(student, i, &agents.teachers[i], s);
                }
                let d = decide(
                    &mut agents.sessions[i],
                    &mut agents.partials[i],
                    &agents.teachers[i],
                    student.table(i),
                    StepInput {
                        state: s,
                        valid,
                        t,
                        epsilon,
                    },
                    &mut rng,
                )?;
                if spec.trace {
                    trace.push(TraceRow {
                        episode,
                        step: state.step_count,
                        agent: env.agents()[i].name().to_string(),
                        source: d.source,
                        action: d.action,
                        remaining: agents.sessions[i].remaining(),
                        rejected: d.rejected_advice,
                    });
                }
                ids.push(if valid.contains(&d.action) {
                    d.action
                } else {
                    0
                });
            }
            let outcome = env.step(&state, &env.decode_actions(&ids))?;
            let r = outcome.reward::<F>();
            reward += r;
            let next = observe(env, &outcome.state);
            for i in 0..n {
                if let Some(prev) = buffers[i].last_mut() {
                    prev.next_action = Some(ids[i]);
                }
                buffers[i].push(Transition {
                    state: current[i].0.clone(),
                    action: ids[i],
                    reward: r,
                    next_state: next[i].0.clone(),
                    next_valid: next[i].1.clone(),
                    next_action: None,
                    done: outcome.done,
                });
            }
            state = outcome.state;
            current = next;
            t += 1;
        }
        for (i, buffer) in buffers.iter().enumerate() {
            for tr in buffer {
                apply_transition(student.table_mut(i), tr, spec.learner);
            }
        }
        for s in &mut agents.sessions {
            s.advance_iteration();
        }
        let eval_reward = spec.eval.and_then(|(cadence, episodes)| {
            ((episode + 1) % cadence == 0).then(|| {
                evaluate(
                    env,
                    &*student,
                    episodes,
                    seed::derive(eval_base, episode as u64),
                )
            })
        });
        records.push(EpisodeRecord {
            seed: spec.seed,
            episode,
            reward,
            length: state.step_count,
            advice_issued: agents
                .sessions
                .iter()
                .map(AdvisingSession::advice_issued)
                .sum(),
            advice_reused: agents
                .sessions
                .iter()
                .map(AdvisingSession::advice_reused)
                .sum(),
            advice_rejected: agents
                .sessions
                .iter()
                .map(AdvisingSession::advice_rejected)
                .sum(),
            budget_exhausted: agents.exhausted(),
            eval_reward,
        });
    }
    Ok((records, trace))
}

fn observe<F: Scalar>(
    env: &Gridworld,
    state: &crate::gridworld::EnvState,
) -> Vec<(StateFeatures<F>, Vec<usize>)> {
    env.agents()
        .iter()
        .map(|&a| (env.featurize(state, a), env.valid_action_ids(state, a)))
        .collect()
}

fn warm<F: Scalar>(
    student: &mut TeamQ<F>,
    i: usize,
    teacher: &AgentTeacher<'_, F>,
    s: &StateFeatures<F>,
) {
    let Some(q) = teacher.q else { return };
    if student.table(i).row(s).is_some() {
        return;
    }
    let view = teacher.view(s);
    if let Some(row) = q.row(&view) {
        let row = row.to_vec();
        let table = student.table_mut(i);
        for (a, v) in row.into_iter().enumerate() {
            table.set(s, a, v);
        }
    }
}

/// Runs one trial. Everything random derives from `seed`, so the same
/// artifacts, spec and seed reproduce the same records.
pub fn run_trial<F: Scalar>(
    art: &Artifacts<F>,
    spec: &TrialSpec<F>,
    seed: u64,
) -> Result<Trial<F>, HarnessError> {
    spec.learner.validate()?;
    if spec.eval_cadence == 0 || spec.eval_episodes == 0 {
        return Err(HarnessError::Config(
            "evaluation cadence and episodes must be at least 1".into(),
        ));
    }
    let mode = spec.params.mode;
    if mode.uses_partial() && art.trees.is_none() {
        return Err(HarnessError::MissingArtifact(format!(
            "mode {mode} needs distilled teacher trees"
        )));
    }
    let mut agents = Agents::new(art, &spec.params, &art.env, true)?;

    if mode == Mode::EaaExplore {
        let built = pretrain(art, spec, seed)?;
        for (i, agent) in art.env.agents().iter().enumerate() {
            if let Some(ti) = art.teacher_env.agents().iter().position(|a| a == agent) {
                agents.partials[i] = built[ti].clone();
            }
        }
    }

    let mut student = TeamQ::new(&art.env);
    let (records, trace) = train_loop(
        &art.env,
        &mut agents,
        &mut student,
        &LoopSpec {
            learner: &spec.learner,
            episodes: spec.learner.episodes,
            seed,
            reset_stream: stream::TRIAL_RESET,
            act_stream: stream::TRIAL_ACT,
            eval: Some((spec.eval_cadence, spec.eval_episodes)),
            warm_start: spec.warm_start,
            trace: spec.trace,
        },
    )?;
    Ok(Trial {
        seed,
        records,
        trace,
        student,
    })
}

/// Explainable advising in the teacher's own environment, kept only for the
/// partial trees it builds.
fn pretrain<F: Scalar>(
    art: &Artifacts<F>,
    spec: &TrialSpec<F>,
    seed: u64,
) -> Result<Vec<PartialTree<F>>, HarnessError> {
    let params = AdvisingParams {
        mode: Mode::Eaa,
        ..spec.params.clone()
    };
    let env = &art.teacher_env;
    let mut agents = Agents::new(art, &params, env, false)?;
    let mut student = TeamQ::new(env);
    let learner = LearnerConfig {
        episodes: spec.pretrain_episodes.max(1),
        ..spec.learner.clone()
    };
    if spec.pretrain_episodes > 0 {
        train_loop(
            env,
            &mut agents,
            &mut student,
            &LoopSpec {
                learner: &learner,
                episodes: spec.pretrain_episodes,
                seed: seed::derive(seed, stream::PRETRAIN),
                reset_stream: stream::TRIAL_RESET,
                act_stream: stream::TRIAL_ACT,
                eval: None,
                warm_start: false,
                trace: false,
            },
        )?;
    }
    Ok(agents.partials)
}

/// First episode at which every advised agent had spent its budget.
pub fn exhaustion_episode<F: Scalar>(records: &[EpisodeRecord<F>]) -> Option<usize> {
    records
        .iter()
        .find(|r| r.budget_exhausted)
        .map(|r| r.episode)
}

/// First evaluated episode whose greedy evaluation reached `target`.
pub fn first_eval_reaching<F: Scalar>(records: &[EpisodeRecord<F>], target: f64) -> Option<usize> {
    records
        .iter()
        .find(|r| {
            r.eval_reward
                .is_some_and(|e| e.to_f64().unwrap_or(f64::NAN) >= target)
        })
        .map(|r| r.episode)
}

/// Mean training reward over the last `n` episodes.
pub fn final_mean_reward<F: Scalar>(records: &[EpisodeRecord<F>], n: usize) -> f64 {
    let tail = &records[records.len().saturating_sub(n)..];
    if tail.is_empty() {
        return 0.0;
    }
    tail.iter()
        .map(|r| r.reward.to_f64().unwrap_or(0.0))
        .sum::<f64>()
        / tail.len() as f64
}

const TRIAL_HEADER: [&str; 8] = [
    "episode",
    "reward",
    "length",
    "advice_issued",
    "advice_reused",
    "advice_rejected",
    "budget_exhausted",
    "eval_reward",
];

/// Per-trial CSV; `eval_reward` is empty on episodes without evaluation.
pub fn write_trial_csv<F: Scalar, W: io::Write>(
    records: &[EpisodeRecord<F>],
    out: W,
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIAL_HEADER)?;
    for r in records {
        w.write_record([
            r.episode.to_string(),
            r.reward.to_string(),
            r.length.to_string(),
            r.advice_issued.to_string(),
            r.advice_reused.to_string(),
            r.advice_rejected.to_string(),
            u8::from(r.budget_exhausted).to_string(),
            r.eval_reward.map(|e| e.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trial_csv<F: Scalar, R: io::Read>(
    seed: u64,
    input: R,
) -> Result<Vec<EpisodeRecord<F>>, HarnessError> {
    let mut rd = csv::Reader::from_reader(input);
    if rd.headers()?.iter().ne(TRIAL_HEADER) {
        return Err(HarnessError::Format("unexpected trial CSV header".into()));
    }
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row?;
        let bad = |what: &str| HarnessError::Format(format!("row {}: bad {what}", i + 2));
        let int = |k: usize, what: &str| row[k].parse::<usize>().map_err(|_| bad(what));
        let real = |k: usize, what: &str| row[k].parse::<F>().map_err(|_| bad(what));
        out.push(EpisodeRecord {
            seed,
            episode: int(0, "episode")?,
            reward: real(1, "reward")?,
            length: int(2, "length")?,
            advice_issued: int(3, "advice_issued")?,
            advice_reused: int(4, "advice_reused")?,
            advice_rejected: int(5, "advice_rejected")?,
            budget_exhausted: match &row[6] {
                "0" => false,
                "1" => true,
                _ => return Err(bad("budget_exhausted")),
            },
            eval_reward: if row[7].is_empty() {
                None
            } else {
                Some(real(7, "eval_reward")?)
            },
        });
    }
    Ok(out)
}
