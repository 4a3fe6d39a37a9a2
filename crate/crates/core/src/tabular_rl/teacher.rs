use std::fmt::Write as _;

use thiserror::Error;

use super::{
    act_epsilon_greedy, apply_transition, LearnerConfig, LearnerError, QTable, QTableFormatError,
    Transition,
};
use crate::gridworld::{Agent, Gridworld, StateFeatures};
use crate::rollout::{self, JointPolicy};
use crate::scalar::Scalar;
use crate::seed::{self, stream};

/// Evaluation episodes used to certify a trained teacher.
pub const TEACHER_EVAL_EPISODES: usize = 100;
/// Fraction of the layout optimum a teacher must reach.
pub const TEACHER_TOLERANCE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error("teacher did not converge after {episodes} episodes: greedy mean reward {reward} (target {target})")]
    NotConverged {
        episodes: usize,
        reward: f64,
        target: f64,
    },
}

/// One Q-table per agent, in [`Gridworld::agents`] order. Acting greedily it
/// is a [`JointPolicy`].
#[derive(Clone, Debug, PartialEq)]
pub struct TeamQ<F: Scalar> {
    agents: Vec<Agent>,
    tables: Vec<QTable<F>>,
}

impl<F: Scalar> TeamQ<F> {
    pub fn new(env: &Gridworld) -> Self {
        TeamQ {
            agents: env.agents().to_vec(),
            tables: env
                .agents()
                .iter()
                .map(|_| QTable::new(env.num_actions(), F::zero()))
                .collect(),
        }
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn table(&self, agent_index: usize) -> &QTable<F> {
        &self.tables[agent_index]
    }

    pub fn table_mut(&mut self, agent_index: usize) -> &mut QTable<F> {
        &mut self.tables[agent_index]
    }

    pub fn greedy(&self, agent_index: usize, s: &StateFeatures<F>, valid: &[usize]) -> usize {
        self.tables[agent_index]
            .greedy_action(s, valid)
            .unwrap_or(0)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("eaa-qtable v1\n");
        let _ = writeln!(out, "agents {}", self.agents.len());
        for (agent, table) in self.agents.iter().zip(&self.tables) {
            let _ = writeln!(out, "agent {}", agent.name());
            table.write_body(&mut out);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, QTableFormatError> {
        let err = |line: usize, message: String| QTableFormatError::Parse { line, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();
        match lines.next() {
            Some((_, "eaa-qtable v1")) => {}
            _ => return Err(err(1, "expected `eaa-qtable v1` header".into())),
        }
        let (line, count) = lines
            .next()
            .ok_or_else(|| err(2, "missing `agents` line".into()))?;
        let n: usize = count
            .strip_prefix("agents ")
            .and_then(|c| c.trim().parse().ok())
            .ok_or_else(|| err(line, "expected `agents <n>`".into()))?;
        let mut agents = Vec::with_capacity(n);
        let mut tables = Vec::with_capacity(n);
        for _ in 0..n {
            let (line, head) = lines
                .next()
                .ok_or_else(|| err(0, "missing `agent` line".into()))?;
            let agent = head
                .strip_prefix("agent ")
                .and_then(|a| Agent::parse(a.trim()))
                .ok_or_else(|| {
                    err(
                        line,
                        format!("expected `agent <medic|engineer>`, found `{head}`"),
                    )
                })?;
            agents.push(agent);
            tables.push(QTable::read_body(&mut lines)?);
        }
        Ok(TeamQ { agents, tables })
    }
}

impl<F: Scalar> JointPolicy<F> for TeamQ<F> {
    fn act(&self, agent_index: usize, features: &StateFeatures<F>, valid: &[usize]) -> usize {
        self.greedy(agent_index, features, valid)
    }
}

/// Trains independent learners, one per agent, on the shared team reward.
/// Each agent's transitions are backed up at the end of its episode, in step
/// order. Starts from `init` when given (warm start).
pub fn train_team<F: Scalar>(
    env: &Gridworld,
    cfg: &LearnerConfig<F>,
    seed: u64,
    init: Option<TeamQ<F>>,
) -> Result<TeamQ<F>, LearnerError> {
    cfg.validate()?;
    let mut team = init.unwrap_or_else(|| TeamQ::new(env));
    let mut rng = seed::rng(seed::derive(seed, stream::TRAIN_ACT));
    let reset_base = seed::derive(seed, stream::TRAIN_RESET);
    let n = env.num_agents();
    let mut buffers: Vec<Vec<Transition<F>>> = vec![Vec::new(); n];

    for episode in 0..cfg.episodes {
        let epsilon = cfg.epsilon(episode);
        let mut state = env.reset(seed::derive(reset_base, episode as u64));
        for b in &mut buffers {
            b.clear();
        }
        let mut current: Vec<(StateFeatures<F>, Vec<usize>)> = env
            .agents()
            .iter()
            .map(|&a| (env.featurize(&state, a), env.valid_action_ids(&state, a)))
            .collect();
        while !state.done {
            let mut ids = Vec::with_capacity(n);
            for (i, (features, valid)) in current.iter().enumerate() {
                ids.push(act_epsilon_greedy(
                    team.table(i),
                    features,
                    valid,
                    epsilon,
                    &mut rng,
                )?);
            }
            let outcome = env
                .step(&state, &env.decode_actions(&ids))
                .expect("live episode");
            let reward = outcome.reward::<F>();
            let next: Vec<(StateFeatures<F>, Vec<usize>)> = env
                .agents()
                .iter()
                .map(|&a| {
                    (
                        env.featurize(&outcome.state, a),
                        env.valid_action_ids(&outcome.state, a),
                    )
                })
                .collect();
            for i in 0..n {
                if let Some(prev) = buffers[i].last_mut() {
                    prev.next_action = Some(ids[i]);
                }
                buffers[i].push(Transition {
                    state: current[i].0.clone(),
                    action: ids[i],
                    reward,
                    next_state: next[i].0.clone(),
                    next_valid: next[i].1.clone(),
                    next_action: None,
                    done: outcome.done,
                });
            }
            state = outcome.state;
            current = next;
        }
        for (i, buffer) in buffers.iter().enumerate() {
            for t in buffer {
                apply_transition(team.table_mut(i), t, cfg);
            }
        }
    }
    Ok(team)
}

/// Greedy mean reward of `team` over [`TEACHER_EVAL_EPISODES`] resets.
pub fn evaluate_team<F: Scalar>(env: &Gridworld, team: &TeamQ<F>, seed: u64) -> F {
    rollout::evaluate(
        env,
        team,
        TEACHER_EVAL_EPISODES,
        seed::derive(seed, stream::EVAL_RESET),
    )
}

/// Trains a teacher and certifies that its greedy policy reaches the layout
/// optimum within [`TEACHER_TOLERANCE`].
pub fn train_teacher<F: Scalar>(
    env: &Gridworld,
    cfg: &LearnerConfig<F>,
    seed: u64,
) -> Result<TeamQ<F>, TrainError> {
    let team = train_team(env, cfg, seed, None)?;
    let reward = evaluate_team(env, &team, seed).to_f64().unwrap_or(0.0);
    let optimum = env.layout().optimal_return();
    if reward < optimum * (1.0 - TEACHER_TOLERANCE) {
        return Err(TrainError::NotConverged {
            episodes: cfg.episodes,
            reward,
            target: optimum,
        });
    }
    Ok(team)
}
