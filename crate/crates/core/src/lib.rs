pub mod error;
pub mod gestalt;
pub mod harness;
pub mod model;
pub mod numeric;
pub mod region;
pub mod scalar;
pub mod text;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor64 = numeric::Tensor<f64>;
pub type Tensor32 = numeric::Tensor<f32>;
pub type Tape64 = numeric::Tape<f64>;
pub type Image64 = region::Image<f64>;
pub type RegionGraph64 = region::RegionGraph<f64>;
pub type GestaltPrior64 = gestalt::GestaltPrior<f64>;
pub type Model64 = model::Model<f64>;
