//! Particle, kinetic and hydrodynamic models of flocking with nonlinear p-alignment,
//! plus the transport metrics used to compare them.

pub mod align;
pub mod config;
pub mod error;
pub mod experiments;
pub mod hydro;
pub mod initial;
pub mod kinetic;
pub mod metrics;
pub mod particle;
pub mod series;

pub use align::{AlignmentMap, CommunicationKernel, GaussianProfile, KernelFamily, MapKind};
pub use error::{Error, Result};
pub use hydro::{EulerGrid, HydroState, Markers};
pub use kinetic::{MomentFields, PhaseDensity};
pub use metrics::DiscreteMeasure;
pub use particle::{Domain, ParticleEnsemble};
pub use series::{DiagnosticSeries, Table};
