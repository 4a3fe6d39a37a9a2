//! Tabular Q-learning and SARSA. The same learners train teachers and act as
//! advised students.

mod learner;
mod qtable;
mod teacher;

pub use learner::{
    act_epsilon_greedy, apply_transition, importance, q_update, sarsa_update, Algorithm,
    LearnerConfig, LearnerError, Transition,
};
pub use qtable::{QTable, QTableFormatError};
pub use teacher::{
    evaluate_team, train_teacher, train_team, TeamQ, TrainError, TEACHER_EVAL_EPISODES,
    TEACHER_TOLERANCE,
};
