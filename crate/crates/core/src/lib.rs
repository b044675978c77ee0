//! Simulation and analysis toolkit for processor-sharing networks whose users
//! roam between nodes while in service.
//!
//! Users arrive at node `k` at rate `λ_k`, each node serves its users in
//! processor sharing at capacity `μ_k`, and every user independently moves
//! between nodes according to a continuous-time Markov chain with generator
//! `Q`. The crate provides:
//!
//! * [`mobility`]: the single-user chain, its mixing profile and mixing times.
//! * [`network`]: exact event-driven simulation, including the coupled
//!   construction of the open network, the closed network and the dominating
//!   M/M/1 queue, tagged-user sojourn times and regenerative stationary
//!   estimation.
//! * [`path`]: first-passage times, shifts, stopping and the diffusive scaling.
//! * [`diffusion`]: reflected Brownian motion and Poisson tail references.
//! * [`martingale`]: the spectral functional and the integral martingale.
//! * [`experiments`]: configurable experiments with pass/fail verdicts, also
//!   exposed through the `mobnet` binary.

pub mod diffusion;
pub mod experiments;
pub mod martingale;
pub mod mobility;
pub mod network;
pub mod path;
pub mod rng;
pub mod stats;

pub use mobility::{MobilityError, MobilityProfile};
pub use rng::{StreamClass, StreamKey};
