//! Label distribution learning with a joint expectation-regression objective,
//! baseline heads, a small MLP backbone, and the surrounding training tooling.

pub mod backbone;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod heads;
pub mod interpret;
pub mod label;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod pool;
pub mod train;

pub use error::{Error, Result};
pub use label::{Distribution, GridSpec, LabelSpace};
