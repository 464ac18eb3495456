//! # coarsekit
//!
//! Finite-truncation tooling for the kernel side of coarse geometry:
//! positive-definite and negative-type kernels on discrete metric spaces,
//! Schoenberg transforms and approximate units, the Akemann–Walter
//! synthesis of a proper negative-type function from an approximate unit,
//! Hilbert-space embeddings with their compression envelopes, the uniform
//! Roe algebra of finite-width operators on word-metric balls, and the
//! translation between kernels on Γ×Γ and functions on the transformation
//! groupoid βΓ⋊Γ (sampled on the dense orbit Γ).
//!
//! Everything runs on finite spaces. Statements that are really about
//! infinity (properness, vanishing at infinity, approximate units) are
//! reported as envelope tables over realized distances instead of booleans.
//!
//! ## Modules
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`spaces`] | validated metrics, graph metrics, Cayley balls with a margin |
//! | [`kernels`] | PD / negative-type checks, Schoenberg, approximate units, synthesis |
//! | [`embeddings`] | Gram factorization, compression profiles, expander certificates |
//! | [`roe`] | band operators, left regular representation, CP maps, `T ↦ u` |
//! | [`groupoid`] | `α*` / `β*`, groupoid PD / NT checks, Haagerup certificates |
//! | [`pipeline`] | the end-to-end chain NT → Schoenberg → synthesis → embedding |
//! | [`cli`] | command-line front end and run reports |
//!
//! ## Quick start
//!
//! ```rust
//! use std::sync::Arc;
//! use coarsekit::kernels::{check_negative_type, schoenberg_transform, check_positive_definite, Kernel};
//! use coarsekit::spaces::graph_metric;
//!
//! let path = Arc::new(graph_metric(3, &[(0, 1), (1, 2)]).unwrap());
//! let h = Kernel::metric(path);
//! assert!(check_negative_type(&h, 1e-9).unwrap().verdict);
//! let phi = schoenberg_transform(&h, 1.0).unwrap();
//! assert!(check_positive_definite(&phi, 1e-9).unwrap().verdict);
//! ```

pub mod cli;
pub mod embeddings;
pub mod formats;
pub mod groupoid;
pub mod kernels;
mod linalg;
pub mod pipeline;
pub mod random;
pub mod roe;
pub mod spaces;

pub use nalgebra::Complex;

/// Complex scalar used for all kernel and operator values.
pub type C64 = Complex<f64>;
