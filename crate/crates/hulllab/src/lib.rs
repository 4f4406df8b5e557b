//! Numerical laboratory for the convex relaxation of ideal MHD in
//! Elsasser variables, pointwise in state space.
//!
//! The library decides, for a state z = (alpha, beta, M) and sphere radii
//! (r, s) with pressure offset p:
//!
//! * membership in the constraint set K (both vectors on their spheres and
//!   the flux matrix consistent with their tensor product),
//! * membership in the lamination hull of K, constructively, by producing
//!   a laminate tree of depth at most three whose leaves lie in K,
//! * membership in the nuclear-norm upper set U that bounds the relaxation
//!   from above, together with the convex certificate family H_gamma,
//! * and for states on the boundary of U, whether they witness the gap
//!   between the two estimates.
//!
//! Modules are layered: `numeric` (vectors, matrices, SVD, kernels),
//! `state` (states, parameters, defect quantities), `wave_cone` (plane-wave
//! directions and witnesses), `laminates` (decomposition trees),
//! `hull` (upper set, certificates, classification), `sampler`
//! (deterministic Monte Carlo), and `io` (JSON/CSV formats).

pub mod hull;
pub mod io;
pub mod laminates;
pub mod numeric;
pub mod sampler;
pub mod state;
pub mod wave_cone;
