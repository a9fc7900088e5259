//! Majorizing measures on finite metric spaces.
//!
//! The crate evaluates the functional `γ_h(μ) = max_x ∫₀^∞ h(μ(B(x, r))) dr`
//! for a chaining functional `h`, approximately minimizes it with a
//! first-order saddle-point solver, and rounds the primal and dual solutions
//! into combinatorial certificates: chaining trees (upper bounds) and packing
//! trees (lower bounds). The [`certify`] module runs the whole pipeline and
//! checks each proved inequality on the instance at hand.

pub mod certify;
pub mod error;
pub mod evaluate;
pub mod functional;
pub mod metric;
pub mod reduce;
pub mod rounding;
pub mod solve;
pub mod text;

pub use certify::{run_pipeline, verify_weak_duality, CertificateReport};
pub use error::{Error, Result};
pub use evaluate::{entropic_dual_value, gamma_value, h_point, simplified_dual_value};
pub use functional::ChainingFunctional;
pub use metric::{Measure, MetricOptions, MetricSpace};
pub use solve::{solve_saddle_point, SaddleSolution, SolverParams};
