//! Deterministic discrete-velocity solver and inequality-verification
//! toolkit for a quantum kinetic collision model with soft potentials.
//!
//! The model interpolates between the classical Boltzmann gas and a
//! saturated (exclusion-limited) gas through a quantum parameter
//! `delta` in `[0, 1]`; states obey `0 <= F <= 1/delta`. The crate
//! discretizes the collision integral on a truncated velocity lattice
//! with a product sphere rule, advances the mild form of the equation by
//! a damped, bound-preserving fixed-point iteration, and ships a
//! verification suite for the model's structural inequalities.
//!
//! The `book/` directory holds a narrative guide whose code snippets are
//! compiled and run as documentation tests of this crate.

pub mod collision;
pub mod config;
pub mod diagnostics;
pub mod equilibrium;
pub mod field;
pub mod grid;
pub mod linearized;
pub mod params;
pub mod projection;
pub mod rng;
pub mod runio;
pub mod solver;
pub mod verifier;

// The guide's chapters double as documentation tests, keeping the book's
// snippets in sync with the library.
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
pub struct BookIntroduction;
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/grids.md")]
pub struct BookGrids;
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/equilibrium.md")]
pub struct BookEquilibrium;
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/collision.md")]
pub struct BookCollision;
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/linearized.md")]
pub struct BookLinearized;
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/solver.md")]
pub struct BookSolver;
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/diagnostics.md")]
pub struct BookDiagnostics;
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/verification.md")]
pub struct BookVerification;
