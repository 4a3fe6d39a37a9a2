//! Room-graph urban search-and-rescue environments.
//!
//! A medic heals victims; in the two-agent variant an engineer clears the
//! rubble that blocks them. The team earns [`HEAL_REWARD`] per healed victim
//! and nothing else. Within one step the engineer acts first, so clearing and
//! healing the same room in the same step succeeds.

mod features;
mod layout;

/// Layouts shipped with the crate.
pub mod builtin {
    /// Four-room ring, rubble everywhere, medic and engineer.
    pub const FOUR_ROOM: &str = include_str!("../../../../layouts/four_room.layout");
    /// Four-room ring without rubble, for the medic alone.
    pub const FOUR_ROOM_CLEAR: &str = include_str!("../../../../layouts/four_room_clear.layout");
    /// Fourteen rooms off a lobby and two halls, two victims.
    pub const FOURTEEN_ROOM: &str = include_str!("../../../../layouts/fourteen_room.layout");

    /// Looks a builtin up by file stem.
    pub fn by_name(name: &str) -> Option<&'static str> {
        match name {
            "four_room" => Some(FOUR_ROOM),
            "four_room_clear" => Some(FOUR_ROOM_CLEAR),
            "fourteen_room" => Some(FOURTEEN_ROOM),
            _ => None,
        }
    }
}

use std::collections::{BTreeSet, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use features::{FeatureSpace, StateFeatures};
pub use layout::{Layout, LayoutError, RoomId};

use crate::scalar::Scalar;

pub const HEAL_REWARD: f64 = 10.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnvError {
    #[error("episode already finished after {0} steps")]
    EpisodeDone(usize),
    #[error("expected {expected} actions (one per agent), got {got}")]
    ActionCount { expected: usize, got: usize },
    #[error("{0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Medic alone in a rubble-free layout.
    SingleAgent,
    /// Medic and engineer sharing the team reward.
    MultiAgent,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::SingleAgent => "single_agent",
            Variant::MultiAgent => "multi_agent",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "single_agent" | "single" => Some(Variant::SingleAgent),
            "multi_agent" | "multi" => Some(Variant::MultiAgent),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Agent {
    Medic,
    Engineer,
}

impl Agent {
    pub fn name(self) -> &'static str {
        match self {
            Agent::Medic => "medic",
            Agent::Engineer => "engineer",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "medic" => Some(Agent::Medic),
            "engineer" => Some(Agent::Engineer),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VictimStatus {
    Absent,
    Unhealed,
    Healed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AgentAction {
    NoOp,
    MoveTo(RoomId),
    Heal,
    ClearRubble,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EnvState {
    pub medic_room: RoomId,
    pub engineer_room: Option<RoomId>,
    pub victims: Vec<VictimStatus>,
    pub rubble: Vec<bool>,
    pub step_count: usize,
    pub done: bool,
}

impl EnvState {
    pub fn unhealed_count(&self) -> usize {
        self.victims
            .iter()
            .filter(|v| **v == VictimStatus::Unhealed)
            .count()
    }

    pub fn healed_count(&self) -> usize {
        self.victims
            .iter()
            .filter(|v| **v == VictimStatus::Healed)
            .count()
    }

    pub fn rubble_count(&self) -> usize {
        self.rubble.iter().filter(|r| **r).count()
    }

    /// Room of `agent`; the engineer has no room in the single-agent variant.
    pub fn room_of(&self, agent: Agent) -> Option<RoomId> {
        match agent {
            Agent::Medic => Some(self.medic_room),
            Agent::Engineer => self.engineer_room,
        }
    }

    /// The state with the step counter cleared; identifies the underlying
    /// configuration for enumeration.
    fn configuration(&self) -> EnvState {
        EnvState {
            step_count: 0,
            done: false,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: EnvState,
    pub healed: usize,
    pub done: bool,
}

impl StepOutcome {
    pub fn reward<F: Scalar>(&self) -> F {
        F::lit(HEAL_REWARD) * F::from_usize_lossy(self.healed)
    }
}

/// An environment instance: a layout plus the agent variant.
#[derive(Clone, Debug)]
pub struct Gridworld {
    layout: Layout,
    variant: Variant,
    features: FeatureSpace,
}

impl Gridworld {
    pub fn new(layout: Layout, variant: Variant) -> Result<Self, EnvError> {
        match variant {
            Variant::SingleAgent => {
                if layout.rubble_rooms().next().is_some() {
                    return Err(EnvError::Config(
                        "single-agent variant requires a rubble-free layout".into(),
                    ));
                }
            }
            Variant::MultiAgent => {
                if layout.engineer_start().is_none() {
                    return Err(EnvError::Config(
                        "multi-agent variant requires `start engineer`".into(),
                    ));
                }
            }
        }
        let features = FeatureSpace::new(&layout, variant);
        Ok(Gridworld {
            layout,
            variant,
            features,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn feature_space(&self) -> &FeatureSpace {
        &self.features
    }

    pub fn agents(&self) -> &'static [Agent] {
        match self.variant {
            Variant::SingleAgent => &[Agent::Medic],
            Variant::MultiAgent => &[Agent::Medic, Agent::Engineer],
        }
    }

    pub fn num_agents(&self) -> usize {
        self.agents().len()
    }

    /// Size of each agent's action-id space: `NoOp`, one `MoveTo` per room,
    /// and the agent's role action (`Heal` or `ClearRubble`).
    pub fn num_actions(&self) -> usize {
        self.layout.num_rooms() + 2
    }

    pub fn action_id(&self, action: AgentAction) -> usize {
        match action {
            AgentAction::NoOp => 0,
            AgentAction::MoveTo(room) => 1 + room.0,
            AgentAction::Heal | AgentAction::ClearRubble => self.layout.num_rooms() + 1,
        }
    }

    pub fn action_from_id(&self, agent: Agent, id: usize) -> Option<AgentAction> {
        let rooms = self.layout.num_rooms();
        match id {
            0 => Some(AgentAction::NoOp),
            i if i <= rooms => Some(AgentAction::MoveTo(RoomId(i - 1))),
            i if i == rooms + 1 => Some(match agent {
                Agent::Medic => AgentAction::Heal,
                Agent::Engineer => AgentAction::ClearRubble,
            }),
            _ => None,
        }
    }

    /// Human-readable action name, e.g. `move:c` or `heal`.
    pub fn action_label(&self, agent: Agent, id: usize) -> String {
        match self.action_from_id(agent, id) {
            Some(AgentAction::NoOp) => "noop".into(),
            Some(AgentAction::MoveTo(r)) => format!("move:{}", self.layout.room_name(r)),
            Some(AgentAction::Heal) => "heal".into(),
            Some(AgentAction::ClearRubble) => "clear".into(),
            None => format!("invalid:{id}"),
        }
    }

    /// Victims are placed uniformly without replacement over the candidate
    /// rooms; rubble fills every rubble room.
    pub fn reset(&self, seed: u64) -> EnvState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let placed: Vec<RoomId> = self
            .layout
            .victim_candidates()
            .choose_multiple(&mut rng, self.layout.num_victims())
            .copied()
            .collect();
        self.initial_state(&placed)
    }

    fn initial_state(&self, victim_rooms: &[RoomId]) -> EnvState {
        let n = self.layout.num_rooms();
        let mut victims = vec![VictimStatus::Absent; n];
        for r in victim_rooms {
            victims[r.0] = VictimStatus::Unhealed;
        }
        EnvState {
            medic_room: self.layout.medic_start(),
            engineer_room: match self.variant {
                Variant::SingleAgent => None,
                Variant::MultiAgent => self.layout.engineer_start(),
            },
            victims,
            rubble: (0..n).map(|r| self.layout.has_rubble(RoomId(r))).collect(),
            step_count: 0,
            done: false,
        }
    }

    /// Features of `state` as observed by `agent`. Observation is full, so
    /// every agent sees the same vector.
    pub fn featurize<F: Scalar>(&self, state: &EnvState, _agent: Agent) -> StateFeatures<F> {
        self.features.encode(state)
    }

    pub fn valid_actions(&self, state: &EnvState, agent: Agent) -> Vec<AgentAction> {
        let Some(room) = state.room_of(agent) else {
            return Vec::new();
        };
        let mut actions = vec![AgentAction::NoOp];
        actions.extend(
            self.layout
                .neighbors(room)
                .iter()
                .map(|r| AgentAction::MoveTo(*r)),
        );
        actions.push(match agent {
            Agent::Medic => AgentAction::Heal,
            Agent::Engineer => AgentAction::ClearRubble,
        });
        actions
    }

    /// Valid action ids in ascending order.
    pub fn valid_action_ids(&self, state: &EnvState, agent: Agent) -> Vec<usize> {
        self.valid_actions(state, agent)
            .into_iter()
            .map(|a| self.action_id(a))
            .collect()
    }

    /// Maps per-agent action ids to actions; ids outside the agent's action
    /// space become `NoOp`.
    pub fn decode_actions(&self, ids: &[usize]) -> Vec<AgentAction> {
        ids.iter()
            .zip(self.agents())
            .map(|(&id, &agent)| self.action_from_id(agent, id).unwrap_or(AgentAction::NoOp))
            .collect()
    }

    /// Advances one step. `actions` holds one action per agent in
    /// [`Gridworld::agents`] order.
    pub fn step(&self, state: &EnvState, actions: &[AgentAction]) -> Result<StepOutcome, EnvError> {
        if state.done {
            return Err(EnvError::EpisodeDone(state.step_count));
        }
        if actions.len() != self.num_agents() {
            return Err(EnvError::ActionCount {
                expected: self.num_agents(),
                got: actions.len(),
            });
        }
        let (mut next, healed) = self.transition(state, actions);
        next.step_count = state.step_count + 1;
        next.done = next.unhealed_count() == 0 || next.step_count >= self.layout.max_steps();
        Ok(StepOutcome {
            done: next.done,
            state: next,
            healed,
        })
    }

    fn transition(&self, state: &EnvState, actions: &[AgentAction]) -> (EnvState, usize) {
        let mut next = state.clone();
        // Engineer resolves before the medic.
        if let (Some(&action), Some(room)) = (actions.get(1), state.engineer_room) {
            match action {
                AgentAction::MoveTo(to) if self.layout.adjacent(room, to) => {
                    next.engineer_room = Some(to)
                }
                AgentAction::ClearRubble => next.rubble[room.0] = false,
                _ => {}
            }
        }
        let mut healed = 0;
        let room = state.medic_room;
        match actions[0] {
            AgentAction::MoveTo(to) if self.layout.adjacent(room, to) => next.medic_room = to,
            AgentAction::Heal
                if next.victims[room.0] == VictimStatus::Unhealed && !next.rubble[room.0] =>
            {
                next.victims[room.0] = VictimStatus::Healed;
                healed = 1;
            }
            _ => {}
        }
        (next, healed)
    }

    /// Every configuration reachable from any initial victim placement, with
    /// the step counter zeroed. Terminal (all-healed) configurations are
    /// included but not expanded.
    pub fn reachable_states(&self) -> Vec<EnvState> {
        let mut seen: HashSet<EnvState> = HashSet::new();
        let mut order = Vec::new();
        let mut queue = VecDeque::new();
        for placement in combinations(self.layout.victim_candidates(), self.layout.num_victims()) {
            let s = self.initial_state(&placement);
            if seen.insert(s.clone()) {
                queue.push_back(s.clone());
                order.push(s);
            }
        }
        while let Some(s) = queue.pop_front() {
            if s.unhealed_count() == 0 {
                continue;
            }
            for joint in self.joint_actions(&s) {
                let (next, _) = self.transition(&s, &joint);
                let next = next.configuration();
                if seen.insert(next.clone()) {
                    queue.push_back(next.clone());
                    order.push(next);
                }
            }
        }
        order
    }

    fn joint_actions(&self, state: &EnvState) -> Vec<Vec<AgentAction>> {
        let mut joint: Vec<Vec<AgentAction>> = vec![Vec::new()];
        for &agent in self.agents() {
            let options = self.valid_actions(state, agent);
            joint = joint
                .into_iter()
                .flat_map(|prefix| {
                    options.iter().map(move |a| {
                        let mut v = prefix.clone();
                        v.push(*a);
                        v
                    })
                })
                .collect();
        }
        joint
    }

    /// Indices of features that carry information in this environment: the
    /// agent positions present in the variant, victim flags of candidate
    /// rooms, and rubble flags of rubble rooms.
    pub fn active_features(&self) -> BTreeSet<usize> {
        self.features.active(&self.layout, self.variant)
    }
}

fn combinations(items: &[RoomId], k: usize) -> Vec<Vec<RoomId>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if items.len() < k {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (i, first) in items.iter().enumerate() {
        for mut rest in combinations(&items[i + 1..], k - 1) {
            rest.insert(0, *first);
            out.push(rest);
        }
    }
    out
}
