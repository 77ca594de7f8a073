//! Location-information-assisted robust beamforming for RIS-aided mmWave
//! links.
//!
//! The crate builds geometric channels from BS/RIS/UE coordinates, derives
//! a CSI-error radius from a bounded user-location error, and solves the
//! worst-case max-min transmit/passive beamforming problem with an
//! alternating scheme: a bisection search on the inner Lagrange dual
//! variable and a semidefinite-relaxation or branch-and-bound solve for the
//! RIS phase shifts. A small dense interior-point SDP engine backs every
//! convex subproblem.
//!
//! Modules map onto the pipeline stages:
//!
//! - [`geometry`]: element positions, path loss, LoS/Rician channels
//! - [`bound`]: CSI-error bound from the location uncertainty radius
//! - [`sdp`]: dense primal-dual interior-point SDP solver
//! - [`robust`]: inner-minimization machinery (dual bisection, worst case)
//! - [`phase`]: outer phase-shift solvers (SDR and branch-and-bound)
//! - [`algorithm`]: the full alternating loop, baseline and SNR metric

pub mod algorithm;
pub mod bound;
pub mod error;
pub mod geometry;
pub mod phase;
pub mod robust;
pub mod sdp;

pub use error::{Error, Result};

/// Derive a child seed for a parallel work item (splitmix64 over the pair).
///
/// Independent streams for Monte Carlo trials and sweep points all hang off
/// one user-facing seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
