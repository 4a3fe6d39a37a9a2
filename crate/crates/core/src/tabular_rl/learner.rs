use rand::Rng;
use thiserror::Error;

use super::QTable;
use crate::gridworld::StateFeatures;
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LearnerError {
    #[error("no valid actions to choose from")]
    EmptyActionSet,
    #[error("invalid learner config: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    QLearning,
    Sarsa,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::QLearning => "q_learning",
            Algorithm::Sarsa => "sarsa",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "q_learning" | "q-learning" | "qlearning" => Some(Algorithm::QLearning),
            "sarsa" => Some(Algorithm::Sarsa),
            _ => None,
        }
    }
}

/// Hyperparameters of a tabular learner.
///
/// Defaults: Q-learning, learning rate 0.1, discount 0.95, epsilon decaying
/// linearly from 1.0 to 0.05 over the first 60% of `episodes`.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnerConfig<F> {
    pub algorithm: Algorithm,
    pub learning_rate: F,
    pub discount: F,
    pub epsilon_start: F,
    pub epsilon_end: F,
    /// Fraction of `episodes` over which epsilon decays.
    pub epsilon_decay_fraction: F,
    pub episodes: usize,
}

impl<F: Scalar> Default for LearnerConfig<F> {
    fn default() -> Self {
        LearnerConfig {
            algorithm: Algorithm::QLearning,
            learning_rate: F::lit(0.1),
            discount: F::lit(0.95),
            epsilon_start: F::one(),
            epsilon_end: F::lit(0.05),
            epsilon_decay_fraction: F::lit(0.6),
            episodes: 3000,
        }
    }
}

impl<F: Scalar> LearnerConfig<F> {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let unit = |x: F| x >= F::zero() && x <= F::one();
        if !(self.learning_rate > F::zero() && self.learning_rate <= F::one()) {
            return Err(LearnerError::Config(
                "learning_rate must be in (0, 1]".into(),
            ));
        }
        if !(self.discount > F::zero() && self.discount <= F::one()) {
            return Err(LearnerError::Config("discount must be in (0, 1]".into()));
        }
        if !unit(self.epsilon_start)
            || !unit(self.epsilon_end)
            || !unit(self.epsilon_decay_fraction)
        {
            return Err(LearnerError::Config(
                "epsilon_start, epsilon_end and epsilon_decay_fraction must be in [0, 1]".into(),
            ));
        }
        if self.episodes == 0 {
            return Err(LearnerError::Config("episodes must be at least 1".into()));
        }
        Ok(())
    }

    /// Exploration rate for a 0-based training episode.
    pub fn epsilon(&self, episode: usize) -> F {
        let span = self.epsilon_decay_fraction * F::from_usize_lossy(self.episodes);
        if span <= F::zero() {
            return self.epsilon_end;
        }
        let progress = (F::from_usize_lossy(episode) / span).min(F::one());
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * progress
    }
}

/// One recorded step of a single agent.
#[derive(Clone, Debug)]
pub struct Transition<F: Scalar> {
    pub state: StateFeatures<F>,
    pub action: usize,
    pub reward: F,
    pub next_state: StateFeatures<F>,
    pub next_valid: Vec<usize>,
    /// Action actually taken in `next_state`; SARSA bootstraps from it.
    pub next_action: Option<usize>,
    pub done: bool,
}

/// Q-learning backup:
/// `Q(s,a) += lr * (r + discount * max_a' Q(s',a') * (1 - done) - Q(s,a))`.
#[allow(clippy::too_many_arguments)]
pub fn q_update<F: Scalar>(
    table: &mut QTable<F>,
    s: &StateFeatures<F>,
    a: usize,
    r: F,
    s_next: &StateFeatures<F>,
    next_valid: &[usize],
    done: bool,
    learning_rate: F,
    discount: F,
) {
    let bootstrap = if done {
        F::zero()
    } else {
        table.max_value(s_next, next_valid)
    };
    backup(table, s, a, r + discount * bootstrap, learning_rate);
}

/// SARSA backup bootstrapping from the action taken in `s_next`.
#[allow(clippy::too_many_arguments)]
pub fn sarsa_update<F: Scalar>(
    table: &mut QTable<F>,
    s: &StateFeatures<F>,
    a: usize,
    r: F,
    s_next: &StateFeatures<F>,
    a_next: usize,
    done: bool,
    learning_rate: F,
    discount: F,
) {
    let bootstrap = if done {
        F::zero()
    } else {
        table.get(s_next, a_next)
    };
    backup(table, s, a, r + discount * bootstrap, learning_rate);
}

fn backup<F: Scalar>(table: &mut QTable<F>, s: &StateFeatures<F>, a: usize, target: F, lr: F) {
    if lr == F::zero() {
        return;
    }
    let q = table.get(s, a);
    table.set(s, a, q + lr * (target - q));
}

/// Applies the configured backup for one transition.
pub fn apply_transition<F: Scalar>(
    table: &mut QTable<F>,
    t: &Transition<F>,
    cfg: &LearnerConfig<F>,
) {
    match (cfg.algorithm, t.next_action) {
        (Algorithm::Sarsa, Some(a_next)) => sarsa_update(
            table,
            &t.state,
            t.action,
            t.reward,
            &t.next_state,
            a_next,
            t.done,
            cfg.learning_rate,
            cfg.discount,
        ),
        _ => q_update(
            table,
            &t.state,
            t.action,
            t.reward,
            &t.next_state,
            &t.next_valid,
            t.done,
            cfg.learning_rate,
            cfg.discount,
        ),
    }
}

/// With probability `epsilon` a uniform valid action, otherwise the greedy
/// one (lowest id on ties). Always consumes two draws from `rng` so the
/// stream stays aligned regardless of the branch taken.
pub fn act_epsilon_greedy<F: Scalar, R: Rng + ?Sized>(
    table: &QTable<F>,
    s: &StateFeatures<F>,
    valid: &[usize],
    epsilon: F,
    rng: &mut R,
) -> Result<usize, LearnerError> {
    if valid.is_empty() {
        return Err(LearnerError::EmptyActionSet);
    }
    let u: f64 = rng.gen();
    let pick = rng.gen_range(0..valid.len());
    if u < epsilon.to_f64().unwrap_or(0.0) {
        Ok(valid[pick])
    } else {
        Ok(table.greedy_action(s, valid).expect("non-empty action set"))
    }
}

/// State importance: spread between the best and worst Q-value over the
/// valid actions.
pub fn importance<F: Scalar>(table: &QTable<F>, s: &StateFeatures<F>, valid: &[usize]) -> F {
    let values = table.values_for(s, valid);
    let max = values.iter().copied().reduce(F::max);
    let min = values.iter().copied().reduce(F::min);
    match (max, min) {
        (Some(hi), Some(lo)) => hi - lo,
        _ => F::zero(),
    }
}
