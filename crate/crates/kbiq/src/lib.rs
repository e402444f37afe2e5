//! Kernel-based interpolation quadrature with projection-DPP nodes.
//!
//! The crate implements, for the periodic Sobolev space of order `s` on
//! `[0, 1]` with the uniform reference measure:
//!
//! - the Mercer data of the kernel `k_s` ([`spectral`]),
//! - exact sampling of the projection DPP whose marginal kernel is the
//!   rank-N projection onto the leading eigenfunctions ([`dpp`]),
//! - the EZQ, OKQ and general KBIQ weight rules ([`weights`]),
//! - exact worst-case integration error evaluation and the deterministic
//!   identities that hold for every configuration ([`wce`]),
//! - a reproducible Monte-Carlo engine that measures convergence rates and
//!   verifies the expectation identities statistically ([`harness`]).
//!
//! The numeric core is generic over the scalar type; the aliases below fix
//! `f64`, which the command-line tool and the experiment engine use.

pub mod dpp;
pub mod error;
pub mod gexpr;
pub mod harness;
pub mod linalg;
pub mod plot;
pub mod scalar;
pub mod spectral;
pub mod wce;
pub mod weights;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` spectral model, the default working precision.
pub type SpectralModel64 = spectral::SpectralModel<f64>;
/// `f32` spectral model, for reduced-precision experimentation.
pub type SpectralModel32 = spectral::SpectralModel<f32>;
pub type Matrix64 = linalg::Matrix<f64>;
pub type NodeSet64 = dpp::NodeSet<f64>;
pub type CoefficientVector64 = weights::CoefficientVector<f64>;
pub type WeightVector64 = weights::WeightVector<f64>;
pub type WceReport64 = wce::WceReport<f64>;
