//! Dense linear algebra and the seeded random stream shared by every other module.

mod matrix;
mod rng;

pub use matrix::{
    cholesky, dot, l2_normalize, matmul, matmul_tn, norm, pairwise_sq_dist, solve_spd, sq_dist,
    DenseMatrix,
};
pub use rng::Rng;
