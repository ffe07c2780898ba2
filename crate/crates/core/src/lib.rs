//! Synthetic loop-parallelizability corpora and the classifiers trained on them.
//!
//! The pipeline runs in stages:
//!
//! - [`codegen`] evolves labeled programs with a genetic algorithm,
//! - [`lang`] lexes, validates and id-encodes them,
//! - [`dataset`] turns encoded programs into a fixed-width numeric matrix,
//! - [`pca`] reduces it to a retained-variance subspace,
//! - [`neural`] trains the dense and convolutional classifiers,
//! - [`stats`] and [`experiments`] run and summarize the repeated evaluation.

pub mod codegen;
pub mod lang;
pub mod dataset;
pub mod pca;
pub mod neural;
pub mod stats;
pub mod experiments;
