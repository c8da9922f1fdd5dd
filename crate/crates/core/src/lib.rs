//! Bent Scherk towers as approximate self-shrinkers.
//!
//! The library works on the Scherk surface `sin y = sinh x sinh z`, parametrised
//! through its Gauss map by a punctured sphere. On top of that chart it builds the
//! bent and rescaled immersions, the graph geometry of normal perturbations, a
//! finite element and jet-collocation discretisation, spectral tools for the
//! linearised operator, and a Newton solver for the self-shrinker equation.

pub mod discretize;
pub mod error;
pub mod graphgeom;
pub mod io;
pub mod scherk;
pub mod solver;
pub mod spectral;
pub mod taylor;
pub mod transforms;

pub use error::{Error, Result};
