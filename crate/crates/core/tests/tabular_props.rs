use eaa_core::gridworld::{builtin, Gridworld, Layout, StateFeatures, Variant};
use eaa_core::tabular_rl::{
    act_epsilon_greedy, evaluate_team, importance, q_update, train_teacher, LearnerConfig, QTable,
    TeamQ,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn key(xs: &[i8]) -> StateFeatures<f64> {
    StateFeatures::new(xs.iter().map(|&x| x as f64).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn text_round_trip(entries in prop::collection::vec((prop::collection::vec(-3i8..3, 3), 0usize..4, -1e6f64..1e6), 0..40)) {
        let mut q = QTable::new(4, 0.0);
        for (s, a, v) in &entries {
            q.set(&key(s), *a, *v);
        }
        let back: QTable<f64> = QTable::from_text(&q.to_text()).unwrap();
        prop_assert_eq!(back.to_text(), q.to_text());
        for (s, a, _) in &entries {
            prop_assert_eq!(back.get(&key(s), *a).to_bits(), q.get(&key(s), *a).to_bits());
        }
    }

    /// The backup against the textbook formula.
    #[test]
    fn q_update_matches_formula(
        q0 in -10.0f64..10.0, next in prop::collection::vec(-10.0f64..10.0, 3), r in -1.0f64..10.0,
        lr in 0.01f64..=1.0, discount in 0.01f64..=1.0, done in any::<bool>(),
    ) {
        let (s, s2) = (key(&[0]), key(&[1]));
        let mut q = QTable::new(3, 0.0);
        q.set(&s, 1, q0);
        for (a, v) in next.iter().enumerate() {
            q.set(&s2, a, *v);
        }
        q_update(&mut q, &s, 1, r, &s2, &[0, 2], done, lr, discount);
        let boot = if done { 0.0 } else { next[0].max(next[2]) };
        let want = q0 + lr * (r + discount * boot - q0);
        prop_assert!((q.get(&s, 1) - want).abs() < 1e-9);
    }

    #[test]
    fn greedy_and_importance_agree_with_row(values in prop::collection::vec(-5i32..5, 5), mask in 1u8..32) {
        let s = key(&[0]);
        let mut q = QTable::new(5, 0.0);
        for (a, v) in values.iter().enumerate() {
            q.set(&s, a, *v as f64);
        }
        let valid: Vec<usize> = (0..5).filter(|a| mask & (1 << a) != 0).collect();
        let best = valid.iter().map(|&a| values[a]).max().unwrap();
        let worst = valid.iter().map(|&a| values[a]).min().unwrap();
        let first_best = *valid.iter().find(|&&a| values[a] == best).unwrap();
        prop_assert_eq!(q.greedy_action(&s, &valid), Some(first_best));
        prop_assert_eq!(importance(&q, &s, &valid), (best - worst) as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        prop_assert_eq!(act_epsilon_greedy(&q, &s, &valid, 0.0, &mut rng).unwrap(), first_best);
        let explored = act_epsilon_greedy(&q, &s, &valid, 1.0, &mut rng).unwrap();
        prop_assert!(valid.contains(&explored));
    }
}

#[test]
fn teacher_certification() {
    let env = Gridworld::new(
        Layout::parse(builtin::FOUR_ROOM).unwrap(),
        Variant::MultiAgent,
    )
    .unwrap();
    let team: TeamQ<f64> = train_teacher(&env, &LearnerConfig::default(), 0).unwrap();
    assert_eq!(evaluate_team(&env, &team, 0), 10.0);
    let back: TeamQ<f64> = TeamQ::from_text(&team.to_text()).unwrap();
    assert_eq!(back.to_text(), team.to_text());

    let short = LearnerConfig {
        episodes: 5,
        ..LearnerConfig::default()
    };
    assert!(train_teacher::<f64>(&env, &short, 0).is_err());
}
