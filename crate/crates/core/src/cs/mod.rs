//! Compressive sampling: orthonormal sensing transforms, random
//! coefficient selection, and ISTA / equality-constrained TV recovery.

mod measurement;
mod solver;
mod transform;

pub use measurement::{
    build_measurement_op, build_measurement_op_with, measure, measure_seeded, MeasurementOp,
    Measurements, SamplingPattern,
};
pub use solver::{
    divergence, gradient, reconstruct_ista, reconstruct_tveq, soft_threshold, total_variation,
    tv_gradient_pair, tv_value, Reconstruction, SolverConfig,
};
pub use transform::{
    conjugate_index, transform_forward, transform_inverse, Haar, SensingDomain, Transform2d,
};
