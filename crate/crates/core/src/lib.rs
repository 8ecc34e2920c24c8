//! Interaction-network hypotheses over staggered cell complexes: typing, search,
//! compilation to stencil pipelines and fitting of the unknown functions.

pub mod basis;
pub mod fixtures;
pub mod forms;
pub mod interpret;
pub mod linalg;
pub mod phenomenology;
pub mod pipeline;
pub mod scalar;
pub mod search;
pub mod symbolic;
pub mod topology;

pub type Dataset64 = interpret::Dataset<f64>;
pub type Dataset32 = interpret::Dataset<f32>;
pub type EvaluatedCochain64 = interpret::cochain::EvaluatedCochain<f64>;
pub type EvaluatedCochain32 = interpret::cochain::EvaluatedCochain<f32>;
pub type FitResult64 = phenomenology::FitResult<f64>;
pub type FitResult32 = phenomenology::FitResult<f32>;
pub type FeatureMatrix64 = phenomenology::FeatureMatrix<f64>;
pub type Evaluation64 = pipeline::Evaluation<f64>;
pub type Evaluation32 = pipeline::Evaluation<f32>;
pub type Matrix64 = linalg::Matrix<f64>;
