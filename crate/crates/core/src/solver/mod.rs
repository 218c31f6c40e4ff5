//! Convex subproblem solvers.
//!
//! The beamformer and power-allocation problems are small smooth concave
//! programs with convex quadratic and affine constraints; they go through a
//! dense primal barrier method ([`barrier`]). The RIS relaxation is an SDP
//! with a unit diagonal; it is solved in factored form with a dual
//! certificate ([`sdp`]).

pub mod barrier;
pub mod beamformer;
pub mod power;
pub mod sdp;

use std::fmt;

pub use beamformer::{solve_beamformer, BeamformerOutcome};
pub use power::{solve_min_power, solve_pa_ee, solve_pa_sr};
pub use sdp::{solve_ris_sdp, SdpSolution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iters: usize,
    pub feasibility_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { abs_tol: 1e-6, rel_tol: 1e-6, max_iters: 5000, feasibility_tol: 1e-7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    Inaccurate,
    Infeasible,
    IterLimit,
}

impl SolveStatus {
    pub fn is_optimal(self) -> bool {
        self == SolveStatus::Optimal
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Inaccurate => "inaccurate",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::IterLimit => "iter_limit",
        };
        f.write_str(s)
    }
}

/// Result of one subproblem solve. `objective` is always recomputed from
/// `solution`; for non-optimal statuses `solution` is a best effort.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome<T> {
    pub status: SolveStatus,
    pub objective: f64,
    pub solution: T,
    /// Largest constraint violation at `solution`.
    pub max_residual: f64,
    pub iterations: usize,
}
