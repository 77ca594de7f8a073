//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by channel construction, bound derivation and the
/// optimization stack.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar or structural parameter violates its documented range.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Path loss or LoS phase requested at a non-positive distance.
    #[error("non-positive distance {0} in path-loss evaluation")]
    NonPositiveDistance(f64),

    /// The UE position coincides with an RIS element.
    #[error("UE position coincides with RIS element {index}")]
    UeOnRisElement { index: usize },

    /// Lemma-style bound matrices need ||v_j - p_hat|| > eps_dp for every j.
    #[error(
        "UE uncertainty ball touches RIS: element {index} at distance {distance} <= eps_dp {eps_dp}"
    )]
    UncertaintyTouchesRis {
        index: usize,
        distance: f64,
        eps_dp: f64,
    },

    /// A matrix expected to be Hermitian failed validation.
    #[error("matrix is not Hermitian: max asymmetry {max_asymmetry}")]
    NotHermitian { max_asymmetry: f64 },

    /// The dual-variable search found no root: the channel-error ball can
    /// null the effective channel, so the inner minimum is zero.
    #[error(
        "error-dominated regime: sup of the constraint quadratic form {sup} does not exceed eps^2 = {eps_sq}"
    )]
    ErrorDominatedRegime { sup: f64, eps_sq: f64 },

    /// Bisection could not reach the requested tolerance.
    #[error("bisection stalled at mu={mu}: |quadform - eps^2| = {residual} > tol")]
    BisectionStalled { mu: f64, residual: f64 },

    /// Effective cascaded channel vanished; beamformer direction undefined.
    #[error("effective channel has zero norm")]
    ZeroChannel,

    /// The SDP engine stopped without an optimality certificate.
    #[error("SDP solver did not converge: {status:?}, residuals {residuals}")]
    SdpNotConverged {
        status: crate::sdp::SdpStatus,
        residuals: String,
    },

    /// The relaxed phase problem has an empty feasible set.
    #[error("relaxed constraint infeasible: attainable constraint value {attainable} < eps^2 = {eps_sq}")]
    RelaxedConstraintInfeasible { attainable: f64, eps_sq: f64 },

    /// Rank-one extraction found no candidate satisfying the constraint.
    #[error("no feasible phase candidate found (best constraint value {best_constraint} < eps^2 = {eps_sq})")]
    NoFeasiblePhaseCandidate { best_constraint: f64, eps_sq: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
