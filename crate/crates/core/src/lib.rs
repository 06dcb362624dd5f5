//! Asymptotic soliton-like solutions of the singularly perturbed
//! Benjamin–Bona–Mahony equation with variable coefficients,
//! `a u_t + b u_x + c u u_x - eps^2 u_xxt = 0`, together with the checks
//! that measure their accuracy.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assemble;
pub mod cli;
pub mod exprdsl;
pub mod jet;
pub mod numerics;
pub mod output;
pub mod phase;
pub mod regular;
pub mod scenario;
pub mod singular;
pub mod verify;
