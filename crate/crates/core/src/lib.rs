//! Pseudospectral simulation of the defocusing Hartree equation
//! `i u_t + Δu = (|x|^-γ * |u|²) u` on periodic boxes in one and two dimensions,
//! together with numerical scattering operators, the perturbation hierarchy
//! around a base solution, and the ε–σ scaling experiments built on them.

pub mod duhamel;
pub mod error;
pub mod experiments;
pub mod functionals;
pub mod hierarchy;
pub mod propagator;
pub mod scattering;
pub mod spectral;
pub mod trajectory;

pub use duhamel::{Anchor, IterationControl, TimeGrid};
pub use error::{Error, Result};
pub use functionals::{NormLedger, StrichartzExponents};
pub use hierarchy::{GronwallSequence, HierarchyCoefficients, HierarchyConfig};
pub use propagator::{evolve, interaction_profile, step_strang, Scheme, SolverConfig};
pub use scattering::{roundtrip_check, scattering_state, wave_operator, ScatterOptions, ScatterResult};
pub use spectral::{ComplexField, Direction, Grid, HartreeKernel, Representation, ZeroModePolicy};
pub use trajectory::{Picture, Trajectory};
