//! Renewable (streaming) estimation and testing for high-dimensional mediation
//! analysis with linear or logistic outcome models.
//!
//! Data arrive in batches. Each batch updates a fixed-size summary state of
//! coefficient estimates and accumulated information matrices, after which the
//! raw batch can be discarded. At any point the state yields coefficient
//! estimates, standard errors and four tests of the product `α_j β_j` for every
//! mediator: Sobel, adjusted Sobel, joint significance (MaxP) and adjusted
//! joint significance.

pub mod engine;
pub mod error;
pub mod linalg;
pub mod linear;
pub mod logistic;
pub mod mediation;
pub mod model;
pub mod normal;
pub mod sim;

pub use engine::{Analysis, MediationStream, OutcomeModel, StreamConfig};
pub use error::{Error, Result};
pub use linear::{CoefficientSummary, LinearOutcomeState, MediatorState};
pub use logistic::{LogisticOutcomeState, NewtonSettings};
pub use mediation::{
    decompose_effects, select_mediators, test_all, test_mediator, threshold_lambda, EffectDecomposition, EffectScale,
    MediatorTestResult, Regime, SelectionSets, TestConfig,
};
pub use model::{BatchData, ModelDims};
