//! Dense tensors, a reverse-mode tape, finite-difference checking and Adam.

mod gradcheck;
mod optim;
mod tape;
mod tensor;

pub use gradcheck::grad_check;
pub use optim::Adam;
pub use tape::{Gradients, Tape, Var};
pub use tensor::{softmax, Tensor};
