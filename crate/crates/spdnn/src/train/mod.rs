//! Training machinery: direct and indirect losses with exact gradients,
//! least-squares stress recovery, data scaling, and optimizers.

pub mod data;
pub mod direct;
pub mod indirect;
pub mod optim;
pub mod recovery;

pub use data::{
    acceleration_fd, scale_dataset, unscale_dataset, DirectDataset, DirectSequence, IndirectCase,
};
pub use direct::{direct_loss, linear_ls_fit, predict_one_step, pretrain};
pub use indirect::{indirect_loss, indirect_loss_opt, IndirectContext};
pub use optim::{
    minimize, write_training_log, IterRecord, Method, MinimizeResult, MinimizeStatus,
    OptimizerConfig,
};
pub use recovery::{stress_recovery, RecoveredStress};
