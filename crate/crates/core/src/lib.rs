//! Stability and generalization experiments for shallow neural networks
//! trained by GD and SGD.
//!
//! The network is f_W(x) = Σ_k μ_k φ(⟨w_k, x⟩) with fixed output signs
//! μ_k = ±1/√m, trained on the squared loss. The crate provides the model
//! with exact derivatives, synthetic teacher data, the two trainers,
//! coupled runs on neighboring samples, stability estimators, every bound
//! and width threshold the analysis uses, and a small experiment runner.

// `!(x >= a)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod activation;
pub mod data;
pub mod error;
pub mod lab;
pub mod model;
pub mod optim;
pub mod seed;
pub mod stability;
pub mod theory;
pub mod weights;

pub use activation::{certify_bounds, ActivationKind, ActivationSpec};
pub use data::{
    make_neighbor, population_risk_mc, sample_dataset, Dataset, InputLaw, NeighborSet,
    TeacherDistribution, TeacherSpec,
};
pub use error::{LabError, Result};
pub use model::{Example, InitPolicy, ModelSpec, ModelState, Network, SignPattern};
pub use optim::{
    coupled_run, gd_run, sgd_run, Algorithm, DistanceTrace, IndexStream, TrainConfig, Trajectory,
};
pub use weights::Weights;
