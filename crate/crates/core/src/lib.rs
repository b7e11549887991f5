//! # maxenergy
//!
//! Maximization of a kernel interaction energy over bounded densities, and the
//! matching discrete problem for finite point configurations.
//!
//! The continuous problem: given a compact domain Ω, a radial kernel
//! k(x, y) = f(|x - y|) and bounds ρ₋ ≤ |Ω|⁻¹ ≤ ρ₊, maximize
//!
//! ```text
//! E[ρ] = ½ ∫∫ k(x, y) ρ(x) ρ(y) dx dy     subject to  ∫ρ = 1,  ρ₋ ≤ ρ ≤ ρ₊.
//! ```
//!
//! Maximizers are bang-bang (ρ ∈ {ρ₋, ρ₊}); [`rearrange::solve`] finds
//! stationary points by alternating the integral operator with a
//! volume-preserving threshold, and every non-stationary step strictly
//! increases the energy.
//!
//! The discrete problem places n points with pairwise separation at least
//! r·n^{-1/d} such that every closed ball of radius R·n^{-1/d} centered in Ω
//! contains a point, maximizing (1/2n²) Σ_{i≠j} k(x_i, x_j). See [`pointset`].
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`geometry`] | discretized domains (nodes, quadrature weights, metric) |
//! | [`kernels`] | the radial kernel families |
//! | [`energy`] | the operator K, energy, potential and KKT residual |
//! | [`rearrange`] | volume-preserving threshold and the rearrangement iteration |
//! | [`oracles`] | closed-form optima used to validate the solver |
//! | [`pointset`] | configurations, admissibility, discrete energy, brute force |
//! | [`analysis`] | shape statistics of ρ₊-regions |
//! | [`io`] | CSV formats for domains, fields and configurations |

pub mod analysis;
pub mod energy;
mod error;
pub mod geometry;
pub mod io;
pub mod kernels;
pub mod oracles;
pub mod pointset;
pub mod rearrange;

pub use energy::{DensityField, Field, KernelOperator};
pub use error::{Error, Result};
pub use geometry::{Domain, Metric};
pub use kernels::Kernel;
pub use pointset::Configuration;
pub use rearrange::{DensityBounds, SolveReport, SolverSettings, StopReason};
