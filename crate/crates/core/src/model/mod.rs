//! Residual autoencoder built from a sampling hierarchy, plus losses, Adam,
//! training and checkpoints.

mod autoencoder;
mod block;
mod checkpoint;
mod latent;
mod loss;
mod optim;
mod train;

pub use autoencoder::{
    auto_basis_size, build_autoencoder, AutoencoderModel, BasisPlan, LayerCount, ModelConfig, Network,
};
pub use block::ResidualBlock;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use latent::{interpolate_latent, mix_latent, LatentCode};
pub use loss::{l1_loss, laplacian_loss, loss_l1, loss_laplacian, mean_euclidean_error, LaplacianOperator};
pub use optim::{lr_schedule, Adam};
pub use train::{evaluate_l1, stack_samples, train, EpochRecord, StepRecord, TrainConfig, TrainState, Trainer, TrainingLog};
