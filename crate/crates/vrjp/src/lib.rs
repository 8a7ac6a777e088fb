//! Simulation and verification toolkit for the vertex-reinforced jump
//! process (VRJP) and its environments.
//!
//! The VRJP on a weighted graph jumps from its current vertex `i` to a
//! neighbour `j` at rate `W_ij * L_j(s)`, where `L_j` is one plus the local
//! time accumulated at `j`. After an explicit time change, the process
//! becomes a mixture of ordinary Markov jump processes whose random jump
//! rates are built from a correlated random potential `beta` and the Green
//! function of the Schrödinger operator `H_beta = 2 beta - W`.
//!
//! Everything in that sentence is computable at finite size, and this crate
//! computes all of it:
//!
//! * [`graph`] — weighted graphs, rooted trees, lattice boxes, and the wired
//!   and per-branch boundary restrictions.
//! * [`beta`] — the potential law `nu_V^{W,eta}`: density, closed-form
//!   Laplace transform, restriction and conditioning, and an exact
//!   sequential sampler.
//! * [`green`] — `H_beta`, Green matrices, `F`-ratios, `psi` vectors, Schur
//!   complements, and harmonic residuals.
//! * [`paths`] — truncated sums over walks, used as independent oracles for
//!   the linear-algebra identities.
//! * [`sim`] — exact simulation of the VRJP, its time change, Markov jump
//!   processes in a fixed environment, and the Radon–Nikodym density
//!   between the two.
//! * [`tree`] — branch-resolved harmonic decompositions (`chi`), boundary
//!   coupling matrices, and harmonic measures on trees.
//! * [`rep`] — the wired, free-tree, and generation-`m` environment
//!   families, plus reconstruction of `(beta, gamma, u, h)` from raw rates.
//! * [`stats`] — seeded goodness-of-fit machinery (KS, chi-square,
//!   distance correlation) producing reproducible [`stats::TestReport`]s.
//! * [`verify`] — the experiment harness tying the pieces together into
//!   runnable suites with machine-readable reports.

pub mod beta;
pub mod error;
pub mod graph;
pub mod green;
pub mod linalg;
pub mod paths;
pub mod rep;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod tree;
pub mod verify;

pub use error::{Error, Result};
