//! Small dense complex linear algebra (2×2 and 4×4) and the adaptive ODE
//! integrator shared by the rest of the crate.

pub mod cmat;
pub mod linalg;
pub mod ode;

pub use cmat::{pauli, CMat, CMat2, CMat4, CVec, CVec2, CVec4};
pub use linalg::{
    eig_general, gram_eig2, herm_eig, inv2, psd_sqrt, sylvester_solve, GeneralEigen, HermEigen,
};
pub use ode::{integrate_ode, uniform_grid, DenseSolution, IntegratorConfig};
