//! Gaussian processes whose sample paths solve the 3D wave equation.
//!
//! Covariances are built by pushing initial-data kernels through the Kirchhoff
//! formula on a sphere quadrature; [`verify`] checks linear constraints in the
//! weak sense for kernels, posterior means and sample paths.

pub mod config;
pub mod error;
pub mod gpr;
pub mod kernel;
pub mod linalg;
pub mod sphere;
pub mod verify;
pub mod wave;
pub mod wave_sample;

pub use error::{Error, Result};
pub use gpr::{fit_posterior, sample_prior, ObservationSet, Posterior, PriorSampler};
pub use kernel::{Covariance, Family, KernelSpec, Point3};
pub use sphere::SphereRule;
pub use wave::{kirchhoff_propagate, SpacetimePoint, WaveModel, WaveModelSpec};
pub use wave_sample::{sample_wave_field, WaveFieldSample, WaveFieldSampler};

/// Written into every output header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
