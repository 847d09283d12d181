//! Plane and cone arithmetic for unions of m-planes meeting along a common
//! (m-2)-dimensional spine: principal angles, canonical rotations, pruning and
//! layering of plane families, point clustering with separation guarantees,
//! L² excess functionals on weighted point clouds and a dyadic Whitney
//! decomposition of the spine neighborhood.
//!
//! Every algorithm returns a certificate whose inequalities can be re-evaluated
//! independently; the [`campaign`] module drives randomized checks of those
//! certificates.

pub mod campaign;
pub mod clustering;
pub mod cone;
pub mod error;
pub mod excess;
pub mod geometry;
pub mod random;
pub mod sampling;
pub mod whitney;

pub use error::{Error, Result};
pub use geometry::{AffinePlane, AngleSpectrum, Subspace};

/// Relative slack used when certificates compare computed quantities.
pub const CERT_SLACK: f64 = 1e-12;

/// `a ≤ b` up to [`CERT_SLACK`] relative to the magnitudes involved (and at
/// least `CERT_SLACK` in absolute terms).
pub fn approx_le(a: f64, b: f64) -> bool {
    a <= b + CERT_SLACK * a.abs().max(b.abs()).max(1.0)
}
