//! Real-parameter Ehrhart functions of rational polytopes.
//!
//! `L_P(s) = #(sP ∩ Z^d)` for real `s > 0` is a step function with rational
//! breakpoints. This crate computes it exactly, checks the jump, lifting and
//! pseudopyramid identities on random instances, and rebuilds the
//! right-hand sides of a hidden polytope from an oracle that answers
//! `L_{P+w}` on bounded windows.

pub mod ehrhart;
pub mod exactmath;
pub mod harness;
pub mod polytope;
pub mod reconstruct;

pub mod cli;

pub use ehrhart::{QStepFunction, StepFn};
pub use exactmath::{IMat, IVec, Int, QVec, Rat};
pub use polytope::HPolytope;
