//! Q-Learning, Robust-Q, ARQ-Learning and PRQ-Learning on tabular environments.

mod generative;
mod maxstate;
mod train;
mod update;

pub use generative::{generative_learning, rescaled_linear_step};
pub use maxstate::{max_state_report, MaxStateReport, MaxStateRow};
pub use train::{
    arq_train, prq_train, q_train, robust_q_train, train_tabular, EpsilonSchedule, LogRow,
    TabularAlgorithm, TabularRun, TrainConfig, TrainLog,
};
pub use update::{
    arq_update, max_state_value, prq_pessimistic_update, prq_robust_update, q_learning_update,
    robust_q_update, TabularDoubleTransition, TabularTransition,
};
