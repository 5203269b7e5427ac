//! Dense action-value approximator, loss family and optimizer.

mod adam;
mod loss;
mod net;

pub use adam::Adam;
pub use loss::{huber_loss, mse_loss, weighted_batch_loss, LossKind};
pub use net::{DenseNet, Sample};
