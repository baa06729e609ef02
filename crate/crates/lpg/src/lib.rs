//! Spectral inference for latent position random graphs.
//!
//! A latent position graph draws i.i.d. latent vectors, forms the edge
//! probability matrix `P[i][j] = rho * kappa(X_i, X_j)` from a symmetric
//! kernel bounded in `[0, 1]`, and samples a symmetric Bernoulli adjacency
//! matrix. This crate simulates such graphs, computes modulus-ordered
//! eigendecompositions (dense or Lanczos), selects the embedding dimension
//! from eigengaps, estimates edge probabilities by spectral truncation,
//! verifies first-order eigenvector perturbation expansions, and runs a
//! rank-adaptive two-sample test for equality of latent positions with
//! weighted chi-square calibration.
//!
//! The `harness` module drives Monte Carlo experiments (eigenvalue decay,
//! null histograms, size/power tables, estimation sweeps) and backs the
//! `lpg` command line tool.

extern crate openblas_src;

pub mod harness;
pub mod inference;
mod lapack;
pub mod linalg;
pub mod lptest;
pub mod model;
pub mod theory;
