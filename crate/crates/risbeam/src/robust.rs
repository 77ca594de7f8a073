//! Inner-minimization machinery for the worst-case design.
//!
//! For a fixed phase vector the worst channel error solves a norm-ball QCQP
//! whose KKT system gives a closed-form error as a function of the dual
//! variable `mu`; the active-constraint equation is a strictly decreasing
//! scalar root problem solved by bisection. A matrix-inversion-lemma
//! rewrite turns the objective and constraint into quadratic forms
//! `theta^T Upsilon(mu) theta^*` and `theta^T Gamma(mu) theta^*` whose
//! matrices do not depend on the phases; the unsimplified explicit-inverse
//! formulas are kept as an equivalence oracle.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

pub(crate) fn wrap_angle(a: f64) -> f64 {
    a.rem_euclid(TWO_PI)
}

/// Circular distance between two angles.
pub(crate) fn circ_dist(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(TWO_PI - d)
}

/// Admissible set for phase-shift arguments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseSet {
    /// The full circle.
    Full,
    /// A closed interval `[lower, upper]` with `lower < upper`.
    Interval { lower: f64, upper: f64 },
    /// `levels` evenly spaced values `{0, step, ..., (levels-1) step}` with
    /// `step = 2 pi / levels`.
    Discrete { levels: usize },
}

impl PhaseSet {
    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::InvalidParameter {
                name: "phase_set",
                reason: format!("interval requires lower < upper, got [{lower}, {upper}]"),
            });
        }
        Ok(Self::Interval { lower, upper })
    }

    pub fn discrete(levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidParameter {
                name: "phase_set",
                reason: format!("discrete set requires at least two levels, got {levels}"),
            });
        }
        Ok(Self::Discrete { levels })
    }

    /// Whether `arg` (any real) lands in the set modulo `2 pi`.
    pub fn contains(&self, arg: f64, tol: f64) -> bool {
        match *self {
            PhaseSet::Full => true,
            PhaseSet::Interval { lower, upper } => {
                upper - lower >= TWO_PI || wrap_angle(arg - lower) <= (upper - lower) + tol
            }
            PhaseSet::Discrete { levels } => {
                let step = TWO_PI / levels as f64;
                let k = (wrap_angle(arg) / step).round();
                circ_dist(arg, k * step) <= tol
            }
        }
    }

    /// Nearest admissible argument in circular distance.
    ///
    /// Interval ties go to the lower endpoint, which reproduces the
    /// wrap-around rounding rules used for restricted-set comparisons
    /// (for `[0, pi]`: `(pi, 3pi/2)` maps to `pi` and `[3pi/2, 2pi]` maps
    /// to `0`).
    pub fn project(&self, arg: f64) -> f64 {
        match *self {
            PhaseSet::Full => wrap_angle(arg),
            PhaseSet::Interval { lower, upper } => {
                if upper - lower >= TWO_PI {
                    return lower + wrap_angle(arg - lower);
                }
                let offset = wrap_angle(arg - lower);
                if offset <= upper - lower {
                    lower + offset
                } else if circ_dist(arg, lower) <= circ_dist(arg, upper) {
                    lower
                } else {
                    upper
                }
            }
            PhaseSet::Discrete { levels } => {
                let step = TWO_PI / levels as f64;
                let k = (wrap_angle(arg) / step).round() as usize % levels;
                k as f64 * step
            }
        }
    }
}

/// Constant-modulus phase vector with its admissible argument set.
#[derive(Debug, Clone)]
pub struct PhaseVector {
    /// Diagonal of the reflection matrix, `theta_i = beta e^{j arg_i}`.
    pub theta: DVector<Complex64>,
    pub beta: f64,
    pub argument_set: PhaseSet,
}

impl PhaseVector {
    /// Build from arguments, enforcing the modulus by construction.
    pub fn from_args(args: &[f64], beta: f64, argument_set: PhaseSet) -> Self {
        let theta = DVector::from_iterator(
            args.len(),
            args.iter().map(|&a| Complex64::from_polar(beta, a)),
        );
        Self {
            theta,
            beta,
            argument_set,
        }
    }

    /// All-zero-phase initialization at modulus `beta`.
    pub fn flat(n: usize, beta: f64, argument_set: PhaseSet) -> Self {
        Self::from_args(&vec![0.0; n], beta, argument_set)
    }

    pub fn args(&self) -> Vec<f64> {
        self.theta.iter().map(|t| wrap_angle(t.arg())).collect()
    }

    /// Check the modulus and argument-set invariants.
    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.theta.iter().enumerate() {
            if (t.norm() - self.beta).abs() > 1e-9 * self.beta.max(1.0) {
                return Err(Error::InvalidParameter {
                    name: "theta",
                    reason: format!("element {i} has modulus {} != beta {}", t.norm(), self.beta),
                });
            }
            if !self.argument_set.contains(t.arg(), 1e-9) {
                return Err(Error::InvalidParameter {
                    name: "theta",
                    reason: format!("element {i} argument {} outside the set", t.arg()),
                });
            }
        }
        Ok(())
    }
}

/// The phase-independent quadratic-form matrices at a fixed dual variable.
#[derive(Debug, Clone)]
pub struct SpectralForms {
    pub mu: f64,
    /// Objective matrix: `theta^T Upsilon theta^*` is the inner minimum.
    pub upsilon: DMatrix<Complex64>,
    /// Constraint matrix: the active-set equation reads
    /// `theta^T Gamma theta^* = eps^2`.
    pub gamma: DMatrix<Complex64>,
    /// Deflated channel factor entering `Upsilon`.
    pub z: DMatrix<Complex64>,
    /// Error-response kernel entering `Gamma`.
    pub x: DMatrix<Complex64>,
}

fn hermitize(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()) * Complex64::from(0.5)
}

/// Sandwich a Hermitian kernel between `diag(conj(h))` and `diag(h)`.
fn diag_sandwich(kernel: &DMatrix<Complex64>, h: &DVector<Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(kernel.nrows(), kernel.ncols(), |j, k| {
        h[j].conj() * kernel[(j, k)] * h[k]
    })
}

fn hpd_cholesky(a: &DMatrix<Complex64>) -> Result<nalgebra::Cholesky<Complex64, nalgebra::Dyn>> {
    nalgebra::Cholesky::new(a.clone()).ok_or(Error::InvalidParameter {
        name: "hpd_solve",
        reason: "matrix not positive definite".into(),
    })
}

/// Real quadratic form `theta^T M theta^*` of a Hermitian matrix.
pub fn quad_form(m: &DMatrix<Complex64>, theta: &DVector<Complex64>) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..m.nrows() {
        for k in 0..m.ncols() {
            acc += theta[j] * m[(j, k)] * theta[k].conj();
        }
    }
    acc.re
}

/// Assemble `Upsilon(mu)`, `Gamma(mu)` and their kernels.
///
/// `Z = [I - H H^H (beta^-2 mu I + H H^H)^-1] H` and
/// `X = beta^2 H H^H (mu I + beta^2 H H^H)^-2 H H^H`, both sandwiched
/// between the reconstructed-channel diagonals.
pub fn assemble_spectral_forms(
    h_br: &DMatrix<Complex64>,
    h_ru_hat: &DVector<Complex64>,
    beta: f64,
    mu: f64,
) -> Result<SpectralForms> {
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter {
            name: "mu",
            reason: format!("dual variable must be positive, got {mu}"),
        });
    }
    let n = h_br.nrows();
    let g = h_br * h_br.adjoint();
    let beta_sq = beta * beta;

    // Z = H - G (G + mu/beta^2 I)^{-1} H
    let k = &g + DMatrix::identity(n, n) * Complex64::from(mu / beta_sq);
    let z = h_br - &g * hpd_cholesky(&k)?.solve(h_br);
    let upsilon = hermitize(&diag_sandwich(&(&z * z.adjoint()), h_ru_hat));

    // X = beta^2 A^H A with A = (mu I + beta^2 G)^{-1} G
    let m2 = &g * Complex64::from(beta_sq) + DMatrix::identity(n, n) * Complex64::from(mu);
    let a = hpd_cholesky(&m2)?.solve(&g);
    let x = hermitize(&((a.adjoint() * &a) * Complex64::from(beta_sq)));
    let gamma = hermitize(&diag_sandwich(&x, h_ru_hat));

    Ok(SpectralForms {
        mu,
        upsilon,
        gamma,
        z,
        x,
    })
}

/// Reflection-scaled channel `Theta H` (row `j` scaled by `theta_j`).
pub(crate) fn reflected(
    h_br: &DMatrix<Complex64>,
    theta: &DVector<Complex64>,
) -> DMatrix<Complex64> {
    let mut th = h_br.clone();
    for j in 0..th.nrows() {
        for i in 0..th.ncols() {
            th[(j, i)] *= theta[j];
        }
    }
    th
}

/// Objective and active-constraint values from the unsimplified formulas.
///
/// Uses the explicit inverse of `Theta H H^H Theta^H + mu I` with no
/// algebraic simplification; this is the equivalence oracle for the
/// spectral forms, so fidelity beats efficiency here.
pub fn direct_objective_and_constraint(
    h_br: &DMatrix<Complex64>,
    h_ru_hat: &DVector<Complex64>,
    theta: &DVector<Complex64>,
    mu: f64,
    eps: f64,
) -> Result<(f64, f64)> {
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter {
            name: "mu",
            reason: format!("dual variable must be positive, got {mu}"),
        });
    }
    let n = h_br.nrows();
    let th = reflected(h_br, theta);
    let b_theta = &th * th.adjoint();
    let shifted = &b_theta + DMatrix::identity(n, n) * Complex64::from(mu);
    let inv = shifted.try_inverse().ok_or(Error::InvalidParameter {
        name: "direct_objective_and_constraint",
        reason: "shifted Gram matrix unexpectedly singular".into(),
    })?;

    let bh = &b_theta * h_ru_hat;
    let inv_bh = &inv * &bh;

    // F = || (h_hat - inv B h_hat)^H Theta H ||^2
    let w_vec = h_ru_hat - &inv_bh;
    let f = (th.adjoint() * &w_vec).norm_squared();

    // C = h_hat^H B inv inv B h_hat - eps^2
    let c = (&inv * &inv_bh).dotc(&bh).re - eps * eps;
    Ok((f, c))
}

/// Closed-form worst-case channel error at dual variable `mu`.
pub fn worst_case_delta_h(
    h_br: &DMatrix<Complex64>,
    h_ru_hat: &DVector<Complex64>,
    theta: &DVector<Complex64>,
    mu: f64,
) -> Result<DVector<Complex64>> {
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter {
            name: "mu",
            reason: format!("dual variable must be positive, got {mu}"),
        });
    }
    let n = h_br.nrows();
    let th = reflected(h_br, theta);
    let b_theta = &th * th.adjoint();
    let shifted = &b_theta + DMatrix::identity(n, n) * Complex64::from(mu);
    let rhs = &b_theta * h_ru_hat;
    Ok(-hpd_cholesky(&shifted)?.solve(&rhs))
}

/// Constraint quadratic form `theta^T Gamma(mu) theta^*` without building
/// the whole matrix.
pub fn constraint_quadform(
    h_br: &DMatrix<Complex64>,
    h_ru_hat: &DVector<Complex64>,
    theta: &DVector<Complex64>,
    beta: f64,
    mu: f64,
) -> Result<f64> {
    let n = h_br.nrows();
    let g = h_br * h_br.adjoint();
    let v = DVector::from_fn(n, |j, _| h_ru_hat[j] * theta[j].conj());
    let m2 = &g * Complex64::from(beta * beta) + DMatrix::identity(n, n) * Complex64::from(mu);
    let gv = &g * &v;
    let av = hpd_cholesky(&m2)?.solve(&gv);
    Ok(beta * beta * av.norm_squared())
}

/// Default relative tolerance of the dual bisection.
pub const BISECT_TOL: f64 = 1e-10;

/// Find the dual variable activating the error-norm constraint.
///
/// The constraint quadratic form is strictly decreasing in `mu`, so a
/// doubling bracket from `lambda_max(beta^2 H H^H)` followed by bisection
/// converges to the unique root of `quadform(mu) = eps^2`. Fails with an
/// error-dominated diagnostic when even `mu -> 0` cannot reach `eps^2`.
pub fn bisect_mu(
    h_br: &DMatrix<Complex64>,
    h_ru_hat: &DVector<Complex64>,
    theta: &DVector<Complex64>,
    beta: f64,
    eps: f64,
    tol: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: format!("the dual search needs a positive error radius, got {eps}"),
        });
    }
    let eps_sq = eps * eps;
    let g = h_br * h_br.adjoint();
    let lambda_top = nalgebra::SymmetricEigen::new(g)
        .eigenvalues
        .iter()
        .copied()
        .fold(0.0f64, f64::max)
        * beta
        * beta;
    if lambda_top <= 0.0 {
        return Err(Error::ErrorDominatedRegime { sup: 0.0, eps_sq });
    }
    let quad = |mu: f64| constraint_quadform(h_br, h_ru_hat, theta, beta, mu);

    let mu_min = 1e-12 * lambda_top;
    let sup = quad(mu_min)?;
    if sup <= eps_sq {
        return Err(Error::ErrorDominatedRegime { sup, eps_sq });
    }

    let mu0 = lambda_top;
    let (mut lo, mut hi);
    if quad(mu0)? > eps_sq {
        lo = mu0;
        hi = 2.0 * mu0;
        while quad(hi)? > eps_sq {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::BisectionStalled {
                    mu: hi,
                    residual: f64::INFINITY,
                });
            }
        }
    } else {
        lo = mu_min;
        hi = mu0;
    }

    let mut mid = 0.5 * (lo + hi);
    for _ in 0..300 {
        mid = 0.5 * (lo + hi);
        let val = quad(mid)?;
        if (val - eps_sq).abs() <= tol * eps_sq {
            return Ok(mid);
        }
        if val > eps_sq {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= f64::EPSILON * hi {
            break;
        }
    }
    let residual = (quad(mid)? - eps_sq).abs();
    if residual <= 1e3 * tol * eps_sq {
        Ok(mid)
    } else {
        Err(Error::BisectionStalled { mu: mid, residual })
    }
}

/// Worst-case direct BS-UE channel for a given effective RIS-UE channel.
///
/// Anti-aligned with the cascaded channel so the triangle bound holds with
/// equality; zero when the configured norm is zero.
pub fn worst_case_h_bu(
    h_br: &DMatrix<Complex64>,
    h_eff_ru: &DVector<Complex64>,
    theta: &DVector<Complex64>,
    delta_bu: f64,
) -> Result<DVector<Complex64>> {
    let th = reflected(h_br, theta);
    let u = th.adjoint() * h_eff_ru;
    let norm = u.norm();
    if norm == 0.0 {
        return Err(Error::ZeroChannel);
    }
    if delta_bu == 0.0 {
        return Ok(DVector::zeros(h_br.ncols()));
    }
    Ok(u * Complex64::from(-delta_bu / norm))
}

/// Unit-norm transmit beamformer matched to the combined channel.
pub fn matched_beamformer(
    h_br: &DMatrix<Complex64>,
    h_eff_ru: &DVector<Complex64>,
    theta: &DVector<Complex64>,
    h_bu: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    let th = reflected(h_br, theta);
    let combined = th.adjoint() * h_eff_ru + h_bu;
    let norm = combined.norm();
    if norm == 0.0 {
        return Err(Error::ZeroChannel);
    }
    Ok(combined / Complex64::from(norm))
}
