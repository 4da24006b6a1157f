//! Heat-kernel embeddings of compact Riemannian manifolds.
//!
//! A manifold backend supplies charts, metric and quadrature ([`geometry`]);
//! its Laplace–Beltrami eigenbasis ([`spectral`]) defines the truncated,
//! normalized heat-kernel map `Ψ_t` ([`embedding`]). The jet matrix of a map
//! and its canonical right inverse live in [`freeness`]; [`guenther`] runs the
//! smoothing-operator fixed-point iteration that perturbs a free map to an
//! exact isometric one; [`diagnostics`] holds extrinsic-geometry reports,
//! injectivity scans and the discrete Hölder norm.

pub mod error;
pub mod fit;
pub mod fourier;
pub mod geometry;
pub mod embedding;
pub mod spectral;
pub mod freeness;
pub mod diagnostics;
pub mod guenther;

pub use error::{Error, Result};
