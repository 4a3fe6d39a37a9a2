use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};
use std::ops::Deref;

use super::{EnvState, Layout, RoomId, Variant, VictimStatus};
use crate::scalar::Scalar;

/// Fixed-length numeric feature vector. Equality and hashing use the exact
/// bit patterns of the values, so vectors can key a Q-table.
#[derive(Clone, Debug, Default)]
pub struct StateFeatures<F> {
    values: Vec<F>,
}

impl<F: Scalar> StateFeatures<F> {
    pub fn new(values: Vec<F>) -> Self {
        StateFeatures { values }
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn into_values(self) -> Vec<F> {
        self.values
    }

    /// Lexicographic order on the values; used to sort keys for output.
    pub fn cmp_lex(&self, other: &Self) -> std::cmp::Ordering {
        for (a, b) in self.values.iter().zip(&other.values) {
            match a.partial_cmp(b) {
                Some(std::cmp::Ordering::Equal) | None => continue,
                Some(o) => return o,
            }
        }
        self.values.len().cmp(&other.values.len())
    }
}

impl<F: Scalar> Deref for StateFeatures<F> {
    type Target = [F];

    fn deref(&self) -> &[F] {
        &self.values
    }
}

impl<F: Scalar> PartialEq for StateFeatures<F> {
    fn eq(&self, other: &Self) -> bool {
        self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.key_bits() == b.key_bits())
    }
}

impl<F: Scalar> Eq for StateFeatures<F> {}

impl<F: Scalar> Hash for StateFeatures<F> {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.values.len().hash(state);
        for v in &self.values {
            v.key_bits().hash(state);
        }
    }
}

impl<F: Scalar> From<Vec<F>> for StateFeatures<F> {
    fn from(values: Vec<F>) -> Self {
        StateFeatures::new(values)
    }
}

/// Names and positions of the features of a layout.
///
/// Order: `medic_room`, `engineer_room` (multi-agent only), then per room
/// `victim_present[r]`, `victim_healed[r]` and `rubble[r]` blocks. Rubble
/// flags are present for every room even in rubble-free layouts, so source
/// and target layouts with the same rooms share one feature space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureSpace {
    names: Vec<String>,
    rooms: usize,
    has_engineer: bool,
}

impl FeatureSpace {
    pub fn new(layout: &Layout, variant: Variant) -> Self {
        let has_engineer = variant == Variant::MultiAgent;
        let mut names = vec!["medic_room".to_string()];
        if has_engineer {
            names.push("engineer_room".into());
        }
        for prefix in ["victim_present", "victim_healed", "rubble"] {
            names.extend(layout.rooms().iter().map(|r| format!("{prefix}[{r}]")));
        }
        FeatureSpace {
            names,
            rooms: layout.num_rooms(),
            has_engineer,
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn offset(&self) -> usize {
        1 + usize::from(self.has_engineer)
    }

    pub fn victim_present_index(&self, room: RoomId) -> usize {
        self.offset() + room.0
    }

    pub fn victim_healed_index(&self, room: RoomId) -> usize {
        self.offset() + self.rooms + room.0
    }

    pub fn rubble_index(&self, room: RoomId) -> usize {
        self.offset() + 2 * self.rooms + room.0
    }

    pub(super) fn encode<F: Scalar>(&self, state: &EnvState) -> StateFeatures<F> {
        let flag = |b: bool| if b { F::one() } else { F::zero() };
        let mut v = Vec::with_capacity(self.names.len());
        v.push(F::from_usize_lossy(state.medic_room.0));
        if self.has_engineer {
            v.push(F::from_usize_lossy(state.engineer_room.map_or(0, |r| r.0)));
        }
        v.extend(
            state
                .victims
                .iter()
                .map(|s| flag(*s == VictimStatus::Unhealed)),
        );
        v.extend(
            state
                .victims
                .iter()
                .map(|s| flag(*s == VictimStatus::Healed)),
        );
        v.extend(state.rubble.iter().map(|r| flag(*r)));
        StateFeatures::new(v)
    }

    pub(super) fn active(&self, layout: &Layout, variant: Variant) -> BTreeSet<usize> {
        let mut set = BTreeSet::from([0]);
        if variant == Variant::MultiAgent {
            set.insert(1);
        }
        for r in layout.victim_candidates() {
            set.insert(self.victim_present_index(*r));
            set.insert(self.victim_healed_index(*r));
        }
        for r in layout.rubble_rooms() {
            set.insert(self.rubble_index(r));
        }
        set
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::FOUR_ROOM;
    use super::super::{AgentAction, Gridworld};
    use super::*;
    use crate::gridworld::Agent;

    fn env() -> Gridworld {
        Gridworld::new(Layout::parse(FOUR_ROOM).unwrap(), Variant::MultiAgent).unwrap()
    }

    #[test]
    fn names_follow_layout() {
        let env = env();
        let fs = env.feature_space();
        assert_eq!(fs.len(), 2 + 3 * 4);
        assert_eq!(fs.names()[0], "medic_room");
        assert_eq!(fs.names()[1], "engineer_room");
        assert_eq!(
            fs.names()[fs.victim_present_index(RoomId(2))],
            "victim_present[c]"
        );
        assert_eq!(fs.names()[fs.rubble_index(RoomId(3))], "rubble[d]");
    }

    #[test]
    fn medic_room_locality() {
        let env = env();
        let s = env.reset(4);
        let mut moved = s.clone();
        moved.medic_room = RoomId(1);
        let a: StateFeatures<f64> = env.featurize(&s, Agent::Medic);
        let b: StateFeatures<f64> = env.featurize(&moved, Agent::Medic);
        let diff: Vec<usize> = (0..a.len()).filter(|&i| a[i] != b[i]).collect();
        assert_eq!(diff, vec![0]);
    }

    #[test]
    fn healed_flags() {
        let env = env();
        let s = env.reset(9);
        let fs = env.feature_space();
        let f: StateFeatures<f64> = env.featurize(&s, Agent::Medic);
        for r in 0..4 {
            assert_eq!(f[fs.victim_healed_index(RoomId(r))], 0.0);
        }
        // Scripted heal: both agents walk to the victim, clear, heal.
        let v = RoomId(
            s.victims
                .iter()
                .position(|v| *v == VictimStatus::Unhealed)
                .unwrap(),
        );
        let mut state = s;
        while state.medic_room != v {
            let next = *env
                .layout()
                .neighbors(state.medic_room)
                .iter()
                .min_by_key(|n| ring_distance(n.0, v.0))
                .unwrap();
            let step = [AgentAction::MoveTo(next), AgentAction::MoveTo(next)];
            state = env.step(&state, &step).unwrap().state;
        }
        let out = env
            .step(&state, &[AgentAction::Heal, AgentAction::ClearRubble])
            .unwrap();
        assert_eq!(out.healed, 1);
        let f: StateFeatures<f64> = env.featurize(&out.state, Agent::Medic);
        let healed: Vec<usize> = (0..4)
            .filter(|&r| f[fs.victim_healed_index(RoomId(r))] == 1.0)
            .collect();
        assert_eq!(healed, vec![v.0]);
    }

    fn ring_distance(a: usize, b: usize) -> usize {
        let d = a.abs_diff(b);
        d.min(4 - d)
    }

    #[test]
    fn featurize_is_injective_on_reachable_states() {
        let env = env();
        let states = env.reachable_states();
        let keys: std::collections::HashSet<StateFeatures<f32>> = states
            .iter()
            .map(|s| env.featurize(s, Agent::Medic))
            .collect();
        assert_eq!(keys.len(), states.len());
    }

    #[test]
    fn active_features_depend_on_rubble() {
        let env = env();
        let fs = env.feature_space();
        let active = env.active_features();
        assert!(active.contains(&fs.rubble_index(RoomId(0))));
        let no_rubble: String = FOUR_ROOM
            .lines()
            .filter(|l| !l.starts_with("rubble"))
            .map(|l| format!("{l}\n"))
            .collect();
        let clean =
            Gridworld::new(Layout::parse(&no_rubble).unwrap(), Variant::MultiAgent).unwrap();
        assert_eq!(clean.feature_space(), fs);
        let clean_active = clean.active_features();
        assert!(!clean_active.contains(&fs.rubble_index(RoomId(0))));
        assert_eq!(active.difference(&clean_active).count(), 4);
    }

    #[test]
    fn negative_zero_hashes_like_zero() {
        let a = StateFeatures::new(vec![0.0f64, 1.0]);
        let b = StateFeatures::new(vec![-0.0f64, 1.0]);
        assert_eq!(a, b);
    }
}
