//! Hybrid constrained weighted least squares: float solution, conditional
//! attitude update, constrained ambiguity search and SO(3) fixing, plus
//! the standalone GNSS and 5G solvers.

pub mod float;
pub mod lambda;
pub mod model;
pub mod search;
pub mod so3fix;
pub mod solvers;

pub use float::{conditional_attitude, solve_float, FloatSolution};
pub use lambda::{decorrelate, ils_enumerate, Candidate, Decorrelation, IlsSearch};
pub use model::{assemble_hybrid, HybridModel};
pub use search::{constrained_search, FixedSolution};
pub use so3fix::{so3_cost, weighted_so3_fix, weighted_so3_fix_admissible, weighted_so3_fix_from};
pub use solvers::{fiveg_only_solve, gnss_only_solve, hybrid_solve};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tuning of the constrained search and the SO(3) refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchControl {
    pub initial_candidate_count: usize,
    pub expansion_factor: f64,
    pub max_candidates: usize,
    pub so3_tolerance: f64,
    pub so3_max_iterations: usize,
}

impl Default for SearchControl {
    fn default() -> Self {
        SearchControl {
            initial_candidate_count: 2,
            expansion_factor: 2.0,
            max_candidates: 10_000,
            so3_tolerance: 1e-10,
            so3_max_iterations: 100,
        }
    }
}

impl SearchControl {
    pub fn validate(&self) -> Result<()> {
        if self.initial_candidate_count == 0 || self.max_candidates == 0 || self.so3_max_iterations == 0 {
            return Err(Error::Config("search counts must be positive".into()));
        }
        if !(self.expansion_factor > 1.0) || !self.expansion_factor.is_finite() {
            return Err(Error::Config("expansion_factor must exceed 1".into()));
        }
        if !(self.so3_tolerance > 0.0) {
            return Err(Error::Config("so3_tolerance must be positive".into()));
        }
        Ok(())
    }
}
