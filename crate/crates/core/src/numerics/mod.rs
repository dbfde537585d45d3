//! Numerical kernels: polynomial roots, matrix exponential, Sylvester
//! equations, null vectors and stationary laws.

mod matrix;
mod poly;
mod polymatrix;
mod sylvester;

pub use matrix::{
    adjugate, cond, cond_complex, inverse, inverse_complex, mat_exp, normalize_phase,
    null_vector, real_part, stationary_of_generator, to_complex, CMatrix, RMatrix,
};
pub use poly::{poly_roots, Polynomial};
pub use polymatrix::poly_det;
pub use sylvester::{solve_sylvester, spectral_separation};
