//! Oracles shared by the integration tests. Nothing here calls into the
//! library's own analysis code.

#![allow(dead_code)]

pub mod finite_diff;
pub mod python;
pub mod reuse_oracle;
