pub mod conic;
pub mod error;
pub mod exact;
pub mod formulation;
pub mod mbadmm;
pub mod netmodel;
pub mod qubo;
pub mod scalar;
pub mod socp;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ConicProgram64 = conic::ConicProgram<f64>;
pub type ConicProgram32 = conic::ConicProgram<f32>;
pub type SocpSolution64 = socp::SocpSolution<f64>;
pub type SolverSettings64 = socp::SolverSettings<f64>;
