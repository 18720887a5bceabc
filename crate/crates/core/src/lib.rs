//! Geometric data augmentation by boundary search on transformation Lie groups.
//!
//! The core is generic over the scalar type ([`Real`], implemented for `f32` and
//! `f64`); the aliases below fix it for the common cases.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod error;
pub mod geodesic;
pub mod group;
pub mod image;
pub mod linalg;
pub mod manifool;
pub mod pipeline;
pub mod scalar;
pub mod seeds;
pub mod warp;

pub use classifier::{Architecture, Classifier, LabeledDataset, Model, TrainConfig};
pub use error::{Error, Result};
pub use geodesic::RobustnessReport;
pub use group::{AlgebraVector, GeneratorSet, GroupKind, Transform};
pub use image::Image;
pub use manifool::{CraftConfig, Crafter, ManiFoolResult};
pub use scalar::Real;

pub type Image32 = Image<f32>;
pub type Image64 = Image<f64>;
pub type Transform32 = Transform<f32>;
pub type Transform64 = Transform<f64>;
pub type GeneratorSet32 = GeneratorSet<f32>;
pub type GeneratorSet64 = GeneratorSet<f64>;
pub type AlgebraVector32 = AlgebraVector<f32>;
pub type AlgebraVector64 = AlgebraVector<f64>;
pub type Model32 = Model<f32>;
pub type Model64 = Model<f64>;
pub type Dataset32 = LabeledDataset<f32>;
pub type Dataset64 = LabeledDataset<f64>;
pub type ManiFoolResult64 = ManiFoolResult<f64>;
