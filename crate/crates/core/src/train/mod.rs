//! Optimizers and training loops.

mod adam;
pub mod dfo;
mod fit;
mod gradcheck;
mod mlp;

pub use adam::Adam;
pub use dfo::{DfoOptions, DfoResult};
pub use fit::{
    batch_value_grad, evaluate, evaluate_mlp, fit, fit_mlp, mean_loss, Encoded, EpochRecord, Evaluation,
    OptimizerKind, Task, TrainConfig, TrainReport, DFO_MAX_PARAMS, KINK_TOL,
};
pub use gradcheck::{admissible, random_grad_check, GradCheckRun, KINK_MARGIN, MIN_MODULUS};
pub use mlp::MlpSpec;
