//! Perfect simulation of Gibbs point processes by backward exploration of
//! clans of ancestors followed by forward thinning.

pub mod contour;
pub mod coupling;
pub mod diluteness;
pub mod error;
pub mod ffg;
pub mod measure;
pub mod model;
pub mod models;
pub mod numerics;
pub mod oracle;
pub mod pirogov_sinai;
pub mod parallel;
pub mod rng;
pub mod space;
pub mod stats;

pub use error::{FfgError, Result};
pub use model::{DilutedModel, Energy, ModelRef};
pub use rng::RngStreams;
pub use space::{Location, Norm, Particle, ParticleConfiguration, Spin, SpinSet, Window};
