//! Continuous-measurement quantum state tomography.
//!
//! A state is probed by repeatedly measuring a Heisenberg-evolved observable.
//! The record determines the state on the span of the evolved operators; the
//! remaining directions are fixed by positivity. The crate covers the whole
//! pipeline (dynamics, estimation, informational quantifiers, Krylov analysis,
//! model mismatch and random-matrix baselines) plus a config-driven experiment
//! runner.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod krylov;
pub mod linalg;
pub mod operator_space;
pub mod perturbation;
pub mod phase_space;
pub mod quantifiers;
pub mod rmt;
pub mod tomography;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64};
