//! Manifold backends, exact tensor calculus and geodesic distance.

mod backend;
mod calculus;
mod curvature;
mod fields;
mod quadrature;

pub use backend::{Backend, BackendKind, FourierWeight, SampleGrid};
pub use calculus::{lichnerowicz_apply, linearized_curvature, CurvatureSource, SyntheticCurvature};
pub use curvature::{
    curvature_at, curvature_bundle, scalar_from_ricci, two_tensor_norm_sq, CurvatureBundle,
    CurvatureNorms, PointCurvature, Riemann,
};
pub use fields::{sym_index, sym_pairs, Field, SymTensorField, TangentField};
pub use quadrature::gauss_legendre;

/// Geodesic distance between two chart points.
pub fn geodesic_distance(backend: &Backend, x: &[f64], y: &[f64]) -> f64 {
    backend.geodesic_distance(x, y)
}
