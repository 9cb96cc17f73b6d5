//! Target-oriented opinion word extraction as BIO sequence labelling:
//! corpus handling, input features, text encoders, a residual GCN over
//! dependency trees, training and exact-span evaluation.

pub mod autograd;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod featurize;
pub mod gcn;
pub mod gradcheck;
pub mod model;
pub mod params;
pub mod synthetic;

pub use error::{Error, Result};
