//! Survival and level-crossing probabilities for spectrally negative Markov
//! additive risk processes whose ruin is only detected at the epochs of a
//! state-dependent Poisson observer.
//!
//! The main entry point is [`RuinEngine`], which assembles the first-passage
//! generators, the matrix scale function and the occupation matrix of a
//! [`MapModel`] and answers reach and survival queries. [`montecarlo`]
//! provides an independent simulation check of every quantity.

pub mod error;
pub mod model;
pub mod montecarlo;
pub mod numerics;
pub mod ruin;
pub mod scale;
pub mod spectral;
pub mod tol;
pub mod verify;

pub use ruin::{RuinEngine, SurvivalCurve};
pub use scale::ScaleFunction;
pub use spectral::{OccupationMatrix, SpectralData};

pub use error::{Error, Result};
pub use model::{DriftReport, MapModel, PhaseType};



