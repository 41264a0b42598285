//! Additive models over arbitrary frontiers: bases, training objectives, amortized heads,
//! instant attributions and persistence.

pub mod basis;
pub mod fastshap;
pub mod instant;
pub mod io;
pub mod model;
pub mod train;

pub use basis::{build_shapes, AxisBasis, BasisConfig, ShapeFunction, MAX_SHAPE_ORDER};
pub use fastshap::{train_fastshap, AmortizedHead, FastShapConfig, HeadArch};
pub use instant::{instant_shap, select_frontier, FrontierSearch, Scorer};
pub use io::{load, save, SavedModel, FORMAT_VERSION};
pub use model::{AdditiveModel, Objective, TrainingMeta};
pub use train::{train_gam, train_gam_with, GamTarget, Optimizer, TrainConfig};
