//! The training loop: losses, schedules and one-iteration driver.

mod config;
mod eval;
pub mod loss;
mod nets;
mod trainer;

pub use config::{schedule, ConfigOverrides, Mode, ModeArg, ScheduleKind, TrainConfig};
pub use eval::{evaluate, ActionSelection, EvalSummary, Policy, UniformPolicy};
pub use loss::{loss_and_gradients, surrogate_loss, unified_loss, LossBreakdown, LossCoefficients, Minibatch};
pub use nets::{Agent, PolicyValueNet};
pub use trainer::{
    collect_segments, model_predictions, normalize_in_place, IterationReport, RolloutRecord, Trainer,
    RETURN_WINDOW,
};
