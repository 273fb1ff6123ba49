//! Convolutional Q-network with hand-written gradients, Adam and
//! checkpoint IO.

pub mod adam;
pub mod checkpoint;
pub mod loss;
pub mod network;
pub mod tensor;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use loss::{argmax, softmax_cross_entropy};
pub use network::{ConvSpec, ForwardPass, NetConfig, NetInput, QNetwork, TensorInfo};
pub use tensor::{conv2d_backward, conv2d_forward, Tensor};
