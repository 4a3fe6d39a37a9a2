//! Deterministic episode rollouts for evaluating joint policies.

use crate::gridworld::{EnvState, Gridworld, StateFeatures};
use crate::scalar::Scalar;
use crate::seed;

/// A deterministic policy for every agent of an environment.
pub trait JointPolicy<F: Scalar> {
    /// Action id for the agent at `agent_index` (position in
    /// [`Gridworld::agents`]). Ids outside `valid` are executed as `NoOp`.
    fn act(&self, agent_index: usize, features: &StateFeatures<F>, valid: &[usize]) -> usize;
}

impl<F: Scalar, P: JointPolicy<F> + ?Sized> JointPolicy<F> for &P {
    fn act(&self, agent_index: usize, features: &StateFeatures<F>, valid: &[usize]) -> usize {
        (**self).act(agent_index, features, valid)
    }
}

/// What an observer sees for each agent at each step, before acting.
pub struct Visit<'a, F: Scalar> {
    pub state: &'a EnvState,
    pub agent_index: usize,
    pub features: &'a StateFeatures<F>,
    pub valid: &'a [usize],
    pub action: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeStats<F> {
    pub reward: F,
    pub length: usize,
}

/// Runs one episode from `env.reset(reset_seed)`, reporting every agent
/// decision to `observe`.
pub fn run_episode<F, P>(
    env: &Gridworld,
    policy: &P,
    reset_seed: u64,
    mut observe: impl FnMut(Visit<'_, F>),
) -> EpisodeStats<F>
where
    F: Scalar,
    P: JointPolicy<F> + ?Sized,
{
    let mut state = env.reset(reset_seed);
    let mut reward = F::zero();
    let mut ids = Vec::with_capacity(env.num_agents());
    while !state.done {
        ids.clear();
        for (i, &agent) in env.agents().iter().enumerate() {
            let features: StateFeatures<F> = env.featurize(&state, agent);
            let valid = env.valid_action_ids(&state, agent);
            let action = policy.act(i, &features, &valid);
            observe(Visit {
                state: &state,
                agent_index: i,
                features: &features,
                valid: &valid,
                action,
            });
            ids.push(if valid.contains(&action) { action } else { 0 });
        }
        let outcome = env
            .step(&state, &env.decode_actions(&ids))
            .expect("stepping a live episode with one action per agent");
        reward += outcome.reward::<F>();
        state = outcome.state;
    }
    EpisodeStats {
        reward,
        length: state.step_count,
    }
}

/// Mean episode reward over `episodes` evaluation resets derived from `seed`.
pub fn evaluate<F, P>(env: &Gridworld, policy: &P, episodes: usize, seed: u64) -> F
where
    F: Scalar,
    P: JointPolicy<F> + ?Sized,
{
    if episodes == 0 {
        return F::zero();
    }
    let total = (0..episodes).fold(F::zero(), |acc, k| {
        acc + run_episode(env, policy, seed::derive(seed, k as u64), |_| {}).reward
    });
    total / F::from_usize_lossy(episodes)
}
