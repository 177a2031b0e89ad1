pub mod autodiff;
pub mod error;
pub mod features;
pub mod geometry;
pub mod layout;
pub mod model;
pub mod optimizer;
pub mod oracle;
pub mod scalar;
pub mod seed;
pub mod tasks;

pub use error::{Error, Result};
pub use scalar::Real;

/// Tape, model and rect types at the two supported precisions.
pub type Tape64 = autodiff::Tape<f64>;
pub type Tape32 = autodiff::Tape<f32>;
pub type Model64 = model::ModelParams<f64>;
pub type Model32 = model::ModelParams<f32>;
pub type TrainReport64 = model::TrainReport<f64>;
pub type TrainReport32 = model::TrainReport<f32>;
pub type Rect64 = geometry::Rect<f64>;
pub type Rect32 = geometry::Rect<f32>;
