//! Energy-minimizing rotations of the Cosserat shear–stretch energy
//!
//! ```text
//! W(R; F) = μ‖sym(RᵀF − 1)‖² + μc‖skew(RᵀF − 1)‖²,   R ∈ SO(3),
//! ```
//!
//! the relaxed polar factors that realize its minimum, the full catalog of
//! critical points in the limit case `(μ, μc) = (1, 0)` and a Monte Carlo
//! check of global optimality.

pub mod branches;
pub mod energy;
pub mod error;
pub mod relax;
pub mod rotcore;
pub mod sampling;

pub use branches::{
    branch_energy, branch_multiplier, classify_branch, enumerate_branches, minimal_branch,
    verify_branch, BranchId, Classification, CriticalBranch,
};
pub use energy::{energy, lifted_energy, relative_energy, Extended, MaterialParams, Regime};
pub use error::{Error, Result};
pub use relax::{reduced_energy, relaxed_polar, Domain, RelaxedRotations};
pub use rotcore::{polar_factor, svd_ordered, Decomposition, Mat3, Quat, UnitQuaternion, Vec3};
pub use sampling::{run_validation, RngState, ValidationConfig, ValidationReport};
