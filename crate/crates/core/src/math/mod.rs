//! Numerical building blocks. Everything here is pure or mutates only
//! caller-owned state; gradients are hand-derived for the exact computations
//! the rest of the crate performs.

mod gradcheck;
mod gumbel;
mod linear;
mod loss;
mod matrix;
mod optim;
mod rng;

pub use gradcheck::finite_difference_check;
pub use gumbel::{
    gumbel_sigmoid_from_uniform, gumbel_sigmoid_sample, gumbel_sigmoid_with_noise, logistic_noise,
    sigmoid, GumbelSample, UNIFORM_CLAMP,
};
pub use linear::{linear_backward, linear_forward, LinearGrads};
pub use loss::{softmax, softmax_cross_entropy};
pub use matrix::DenseMatrix;
pub use optim::{OptimizerKind, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use rng::RngStream;
