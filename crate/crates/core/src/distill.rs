//! Distilling a tabular teacher into decision trees, one per agent.
//!
//! Each agent's tree is extracted by an iterative imitation loop: roll out,
//! label every visited state with the teacher's greedy action, aggregate,
//! resample by how much the action choice matters, fit a tree, and keep the
//! best-scoring candidate.

use std::fmt::Write as _;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dtree::{fit_cart, CartParams, DecisionTreePolicy, LabeledSample, TreeError};
use crate::gridworld::{Agent, Gridworld, StateFeatures};
use crate::rollout::{evaluate, run_episode, JointPolicy};
use crate::scalar::Scalar;
use crate::seed;
use crate::tabular_rl::{importance, TeamQ};

#[derive(Debug, Error, PartialEq)]
pub enum DistillError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("invalid distillation config: {0}")]
    Config(String),
    #[error("cannot resample an empty dataset")]
    EmptyDataset,
    #[error("teacher has {teacher} agents, environment has {env}")]
    AgentMismatch { teacher: usize, env: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistillConfig {
    pub iterations: usize,
    /// Episodes sampled per iteration.
    pub rollouts: usize,
    pub resample_size: usize,
    pub max_depth: usize,
    pub eval_episodes: usize,
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            iterations: 10,
            rollouts: 20,
            resample_size: 2000,
            max_depth: 12,
            eval_episodes: 50,
            seed: 0,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<(), DistillError> {
        for (name, v) in [
            ("iterations", self.iterations),
            ("rollouts", self.rollouts),
            ("resample_size", self.resample_size),
            ("max_depth", self.max_depth),
            ("eval_episodes", self.eval_episodes),
        ] {
            if v == 0 {
                return Err(DistillError::Config(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    fn cart(&self) -> CartParams {
        CartParams {
            max_depth: Some(self.max_depth),
            min_samples_split: 2,
        }
    }
}

/// Spread between the greedy value and the worst action value: how much it
/// costs to get this state wrong.
pub fn viper_loss<F: Scalar>(q_row: &[F]) -> F {
    let Some(first) = q_row.first() else {
        return F::zero();
    };
    let (lo, hi) = q_row
        .iter()
        .fold((*first, *first), |(lo, hi), &q| (lo.min(q), hi.max(q)));
    hi - lo
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedRecord<F: Scalar> {
    pub features: StateFeatures<F>,
    pub action: usize,
    pub weight: F,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightedDataset<F: Scalar> {
    pub records: Vec<WeightedRecord<F>>,
}

impl<F: Scalar> WeightedDataset<F> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn extend(&mut self, other: WeightedDataset<F>) {
        self.records.extend(other.records);
    }

    pub fn labeled(&self) -> Vec<LabeledSample<F>> {
        self.records
            .iter()
            .map(|r| (r.features.clone(), r.action))
            .collect()
    }
}

/// Draws `size` records with replacement, proportional to weight. Falls back
/// to uniform draws when no weight is positive.
pub fn resample<F: Scalar, R: Rng + ?Sized>(
    data: &WeightedDataset<F>,
    size: usize,
    rng: &mut R,
) -> Result<Vec<LabeledSample<F>>, DistillError> {
    if data.is_empty() {
        return Err(DistillError::EmptyDataset);
    }
    let weights: Vec<f64> = data
        .records
        .iter()
        .map(|r| {
            let w = r.weight.to_f64().unwrap_or(0.0);
            if w.is_finite() && w > 0.0 {
                w
            } else {
                0.0
            }
        })
        .collect();
    let pick = |i: usize| (data.records[i].features.clone(), data.records[i].action);
    match WeightedIndex::new(&weights) {
        Ok(dist) => Ok((0..size).map(|_| pick(dist.sample(rng))).collect()),
        Err(_) => Ok((0..size)
            .map(|_| pick(rng.gen_range(0..data.len())))
            .collect()),
    }
}

/// Joint policy where one agent follows a tree and the rest follow the
/// teacher greedily.
struct Mixed<'a, F: Scalar> {
    teacher: &'a TeamQ<F>,
    tree: Option<(usize, &'a DecisionTreePolicy<F>)>,
}

impl<F: Scalar> JointPolicy<F> for Mixed<'_, F> {
    fn act(&self, agent_index: usize, features: &StateFeatures<F>, valid: &[usize]) -> usize {
        match self.tree {
            Some((i, tree)) if i == agent_index => tree_action(tree, features),
            _ => self.teacher.greedy(agent_index, features, valid),
        }
    }
}

fn tree_action<F: Scalar>(tree: &DecisionTreePolicy<F>, features: &StateFeatures<F>) -> usize {
    tree.predict(features).map(|(a, _)| a).unwrap_or(0)
}

/// Rolls out `m` episodes and records every state `agent_index` visits,
/// labelled with the teacher's greedy action and weighted by [`viper_loss`]
/// over the valid actions. With `tree` the agent acts by the tree (later
/// iterations); otherwise by the teacher. Episode `k` resets from
/// `derive(seed, k)`.
pub fn sample_trajectories<F: Scalar>(
    env: &Gridworld,
    teacher: &TeamQ<F>,
    agent_index: usize,
    tree: Option<&DecisionTreePolicy<F>>,
    m: usize,
    seed: u64,
) -> WeightedDataset<F> {
    let policy = Mixed {
        teacher,
        tree: tree.map(|t| (agent_index, t)),
    };
    let episodes: Vec<Vec<WeightedRecord<F>>> = (0..m)
        .into_par_iter()
        .map(|k| {
            let mut records = Vec::new();
            run_episode(env, &policy, seed::derive(seed, k as u64), |v| {
                if v.agent_index != agent_index {
                    return;
                }
                let table = teacher.table(agent_index);
                records.push(WeightedRecord {
                    features: v.features.clone(),
                    action: teacher.greedy(agent_index, v.features, v.valid),
                    weight: viper_loss(&table.values_for(v.features, v.valid)),
                });
            });
            records
        })
        .collect();
    WeightedDataset {
        records: episodes.into_iter().flatten().collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate<F: Scalar> {
    pub iteration: usize,
    pub tree: DecisionTreePolicy<F>,
    /// Mean environment reward with this agent acting by the tree.
    pub score: F,
    pub dataset_size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentDistillation<F: Scalar> {
    pub agent: Agent,
    pub candidates: Vec<Candidate<F>>,
    pub selected: usize,
}

impl<F: Scalar> AgentDistillation<F> {
    pub fn tree(&self) -> &DecisionTreePolicy<F> {
        &self.candidates[self.selected].tree
    }
}

/// Extracts a tree for one agent while the other agents follow the teacher.
pub fn viper_agent<F: Scalar>(
    env: &Gridworld,
    teacher: &TeamQ<F>,
    agent_index: usize,
    cfg: &DistillConfig,
) -> Result<AgentDistillation<F>, DistillError> {
    cfg.validate()?;
    if teacher.agents().len() != env.num_agents() {
        return Err(DistillError::AgentMismatch {
            teacher: teacher.agents().len(),
            env: env.num_agents(),
        });
    }
    let base = seed::derive(
        seed::derive(cfg.seed, seed::stream::DISTILL),
        agent_index as u64,
    );
    let names = env.feature_space().names().to_vec();
    let mut rng = seed::rng(seed::derive(base, 0));
    let mut data = WeightedDataset::default();
    let mut candidates: Vec<Candidate<F>> = Vec::with_capacity(cfg.iterations);

    for i in 0..cfg.iterations {
        let rollout_tree = candidates.last().map(|c| &c.tree);
        let iter_seed = seed::derive(base, 1 + 2 * i as u64);
        data.extend(sample_trajectories(
            env,
            teacher,
            agent_index,
            rollout_tree,
            cfg.rollouts,
            iter_seed,
        ));
        let train = resample(&data, cfg.resample_size, &mut rng)?;
        let tree = fit_cart(&train, cfg.cart(), names.clone())?;
        let policy = Mixed {
            teacher,
            tree: Some((agent_index, &tree)),
        };
        let score = evaluate(
            env,
            &policy,
            cfg.eval_episodes,
            seed::derive(base, 2 + 2 * i as u64),
        );
        candidates.push(Candidate {
            iteration: i,
            tree,
            score,
            dataset_size: data.len(),
        });
    }

    let mut selected = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.score > candidates[selected].score {
            selected = i;
        }
    }
    Ok(AgentDistillation {
        agent: env.agents()[agent_index],
        candidates,
        selected,
    })
}

/// One distilled tree per agent of `env`.
pub fn viper<F: Scalar>(
    env: &Gridworld,
    teacher: &TeamQ<F>,
    cfg: &DistillConfig,
) -> Result<Vec<AgentDistillation<F>>, DistillError> {
    (0..env.num_agents())
        .map(|i| viper_agent(env, teacher, i, cfg))
        .collect()
}

/// Distilled trees for every agent, acting greedily by prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeTeam<F: Scalar> {
    agents: Vec<Agent>,
    trees: Vec<DecisionTreePolicy<F>>,
}

const TEAM_MAGIC: &str = "eaa-tree-team v1";

impl<F: Scalar> TreeTeam<F> {
    pub fn new(agents: Vec<Agent>, trees: Vec<DecisionTreePolicy<F>>) -> Self {
        assert_eq!(agents.len(), trees.len(), "one tree per agent");
        TreeTeam { agents, trees }
    }

    pub fn from_distillation(runs: &[AgentDistillation<F>]) -> Self {
        TreeTeam {
            agents: runs.iter().map(|r| r.agent).collect(),
            trees: runs.iter().map(|r| r.tree().clone()).collect(),
        }
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn tree(&self, agent_index: usize) -> &DecisionTreePolicy<F> {
        &self.trees[agent_index]
    }

    pub fn trees(&self) -> &[DecisionTreePolicy<F>] {
        &self.trees
    }

    /// ```text
    /// eaa-tree-team v1
    /// agents 2
    /// agent medic
    /// features ...        (tree body, as in DecisionTreePolicy::to_text)
    /// agent engineer
    /// ...
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{TEAM_MAGIC}");
        let _ = writeln!(out, "agents {}", self.agents.len());
        for (agent, tree) in self.agents.iter().zip(&self.trees) {
            let _ = writeln!(out, "agent {}", agent.name());
            tree.write_body(&mut out);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, DistillError> {
        let err = |line: usize, message: String| DistillError::Parse { line, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();
        match lines.next() {
            Some((_, l)) if l.trim() == TEAM_MAGIC => {}
            _ => return Err(err(1, format!("expected `{TEAM_MAGIC}`"))),
        }
        let (line, head) = lines
            .next()
            .ok_or_else(|| err(2, "missing `agents` line".into()))?;
        let n: usize = head
            .strip_prefix("agents ")
            .and_then(|c| c.trim().parse().ok())
            .ok_or_else(|| err(line, "expected `agents <n>`".into()))?;
        let mut agents = Vec::with_capacity(n);
        let mut trees = Vec::with_capacity(n);
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
            trees.push(DecisionTreePolicy::read_body(&mut lines)?);
        }
        Ok(TreeTeam { agents, trees })
    }
}

impl<F: Scalar> JointPolicy<F> for TreeTeam<F> {
    fn act(&self, agent_index: usize, features: &StateFeatures<F>, _valid: &[usize]) -> usize {
        tree_action(&self.trees[agent_index], features)
    }
}

/// Fraction of agent decisions in `episodes` teacher rollouts where each
/// agent's tree predicts the teacher's greedy action.
pub fn agreement<F: Scalar>(
    env: &Gridworld,
    teacher: &TeamQ<F>,
    trees: &TreeTeam<F>,
    episodes: usize,
    seed: u64,
) -> f64 {
    let (mut same, mut total) = (0usize, 0usize);
    for k in 0..episodes {
        run_episode(env, teacher, seed::derive(seed, k as u64), |v| {
            total += 1;
            if tree_action(trees.tree(v.agent_index), v.features) == v.action {
                same += 1;
            }
        });
    }
    if total == 0 {
        1.0
    } else {
        same as f64 / total as f64
    }
}

/// Candidate scores as CSV: `agent,iteration,dataset_size,score,selected`.
pub fn candidates_csv<F: Scalar>(runs: &[AgentDistillation<F>]) -> String {
    let mut out = String::from("agent,iteration,dataset_size,score,selected\n");
    for run in runs {
        for (i, c) in run.candidates.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                run.agent.name(),
                c.iteration,
                c.dataset_size,
                c.score,
                u8::from(i == run.selected)
            );
        }
    }
    out
}

/// Greedy importance of the teacher at `s` for `agent_index`.
pub fn teacher_importance<F: Scalar>(
    teacher: &TeamQ<F>,
    agent_index: usize,
    s: &StateFeatures<F>,
    valid: &[usize],
) -> F {
    importance(teacher.table(agent_index), s, valid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{Layout, Variant};
    use crate::tabular_rl::{train_team, LearnerConfig};

    #[test]
    fn loss_examples() {
        assert!((viper_loss(&[1.0, 0.2]) - 0.8f64).abs() < 1e-12);
        assert_eq!(viper_loss(&[3.0f64, 3.0, 3.0]), 0.0);
        assert_eq!(viper_loss::<f64>(&[]), 0.0);
    }

    fn ds(weights: &[f64]) -> WeightedDataset<f64> {
        WeightedDataset {
            records: weights
                .iter()
                .enumerate()
                .map(|(i, w)| WeightedRecord {
                    features: StateFeatures::new(vec![i as f64]),
                    action: i,
                    weight: *w,
                })
                .collect(),
        }
    }

    #[test]
    fn zero_weight_never_drawn() {
        let mut rng = seed::rng(1);
        let out = resample(&ds(&[1.0, 0.0]), 500, &mut rng).unwrap();
        assert!(out.iter().all(|(_, a)| *a == 0));
    }

    #[test]
    fn proportional_frequency() {
        let mut rng = seed::rng(2);
        let out = resample(&ds(&[3.0, 1.0]), 10_000, &mut rng).unwrap();
        let first = out.iter().filter(|(_, a)| *a == 0).count() as f64 / 10_000.0;
        assert!((first - 0.75).abs() <= 0.02, "{first}");
    }

    #[test]
    fn all_zero_falls_back_to_uniform() {
        let mut rng = seed::rng(3);
        let out = resample(&ds(&[0.0, 0.0, 0.0, 0.0]), 8000, &mut rng).unwrap();
        for a in 0..4 {
            let f = out.iter().filter(|(_, b)| *b == a).count() as f64 / 8000.0;
            assert!((f - 0.25).abs() < 0.03, "{a}: {f}");
        }
        assert_eq!(
            resample(&ds(&[]), 3, &mut rng).unwrap_err(),
            DistillError::EmptyDataset
        );
    }

    #[test]
    fn config_rejects_zero_counts() {
        let cfg = DistillConfig {
            rollouts: 0,
            ..DistillConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    fn clear_env() -> Gridworld {
        let layout = Layout::parse(crate::gridworld::builtin::FOUR_ROOM_CLEAR).unwrap();
        Gridworld::new(layout, Variant::SingleAgent).unwrap()
    }

    fn teacher(env: &Gridworld) -> TeamQ<f64> {
        let cfg = LearnerConfig {
            episodes: 600,
            ..LearnerConfig::default()
        };
        train_team(env, &cfg, 11, None).unwrap()
    }

    #[test]
    fn trajectories_are_teacher_labelled_and_deterministic() {
        let env = clear_env();
        let t = teacher(&env);
        let a = sample_trajectories(&env, &t, 0, None, 5, 42);
        let b = sample_trajectories(&env, &t, 0, None, 5, 42);
        assert_eq!(a, b);
        assert!(!a.is_empty());
        for r in &a.records {
            assert!(r.weight >= 0.0);
        }
        // One record per step of a single episode.
        let one = sample_trajectories(&env, &t, 0, None, 1, 42);
        let len = run_episode(&env, &t, seed::derive(42, 0), |_| {}).length;
        assert_eq!(one.len(), len);
    }

    #[test]
    fn selected_candidate_scores_highest() {
        let env = clear_env();
        let t = teacher(&env);
        let cfg = DistillConfig {
            iterations: 4,
            rollouts: 5,
            eval_episodes: 10,
            ..DistillConfig::default()
        };
        let run = viper_agent(&env, &t, 0, &cfg).unwrap();
        assert_eq!(run.candidates.len(), 4);
        let best = &run.candidates[run.selected];
        for (i, c) in run.candidates.iter().enumerate() {
            assert!(best.score >= c.score);
            if c.score == best.score {
                assert!(run.selected <= i);
            }
        }
        for w in run.candidates.windows(2) {
            assert!(w[0].dataset_size <= w[1].dataset_size);
        }
        assert_eq!(viper_agent(&env, &t, 0, &cfg).unwrap(), run);
    }

    #[test]
    fn team_text_round_trip() {
        let env = clear_env();
        let t = teacher(&env);
        let cfg = DistillConfig {
            iterations: 2,
            rollouts: 3,
            eval_episodes: 5,
            ..DistillConfig::default()
        };
        let team = TreeTeam::from_distillation(&viper(&env, &t, &cfg).unwrap());
        let back = TreeTeam::<f64>::from_text(&team.to_text()).unwrap();
        assert_eq!(back, team);
        assert!(TreeTeam::<f64>::from_text("nope").is_err());
    }
}
