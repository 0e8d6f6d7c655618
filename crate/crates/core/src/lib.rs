//! Random walks in a Bernoulli random environment, the Brox diffusion, and the
//! bilinear forms that connect them.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the experiment harness uses.

pub mod config;
pub mod coupling;
pub mod diffusion;
pub mod environment;
pub mod forms;
pub mod error;
pub mod grid;
pub mod harness;
pub mod quadrature;
pub mod scalar;
pub mod seed;
pub mod semigroup;
pub mod stats;
pub mod test_function;
pub mod walk;

pub use config::{Command, RunConfig};
pub use error::{Error, Result};
pub use grid::{Orientation, PathGrid};
pub use scalar::Real;
pub use seed::Seed;
pub use test_function::{Smoothness, TestFunction};

pub type Grid = PathGrid<f64>;
pub type Grid32 = PathGrid<f32>;
pub type Scaling = environment::ScalingConfig<f64>;
pub type TestFn = TestFunction<f64>;
pub type Path = diffusion::DiffusionPath<f64>;
pub type Form = forms::FormResult<f64>;
pub type Scale = diffusion::ScaleFunction<f64>;
