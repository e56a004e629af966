pub mod adam;
pub mod loss;

pub use adam::AdamState;
pub use loss::{mse_loss, softmax_rows, softmax_xent, Loss, LossValue};
