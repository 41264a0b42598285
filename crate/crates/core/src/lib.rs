//! Masked additive models with instant Shapley and interaction attributions.

pub mod anova;
pub mod data;
pub mod gam;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod indices;
pub mod masking;
pub mod nn;
mod par;
pub mod poly;
pub mod subset;
pub mod synthetic;

pub use error::{Error, Result};
pub use subset::{FeatureSet, PurifiedTable, SetFunctionTable, WeightTable};
