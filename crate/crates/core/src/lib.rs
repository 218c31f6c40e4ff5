//! Joint analog beamformer, RIS phase-shift and NOMA power-allocation design
//! for a single-RF-chain transmitter under imperfect CSI.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`]: Saleh-Valenzuela mmWave channels, steering vectors and the
//!   Gaussian CSI error model.
//! - [`metrics`]: SINR, rate, energy-efficiency and feasibility evaluators.
//! - [`fp`]: quadratic-transform coefficient builders and closed-form
//!   auxiliary-variable updates for every subproblem.
//! - [`solver`]: convex subproblem solvers (dense barrier method for the
//!   beamformer and power allocation, certified low-rank SDP for the RIS).
//! - [`algorithms`]: alternating-optimization drivers for sum rate and
//!   energy efficiency.
//! - [`baselines`]: SVD/water-filling fully digital, TDMA, and the WMSE oracle.
//! - [`harness`]: experiment configuration, Monte Carlo sweeps, CSV and plots.

pub mod algorithms;
pub mod baselines;
pub mod channel;
pub mod fp;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod solver;

pub use algorithms::{algorithm1_sum_rate, algorithm2_ee, AoSettings, AoTrace};
pub use channel::{sample_channels, ChannelSet, Design, PowerModel, SystemConfig};
pub use metrics::{Architecture, RateReport};
