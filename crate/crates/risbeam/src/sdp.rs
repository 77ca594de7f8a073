//! Dense primal-dual interior-point solver for small semidefinite programs.
//!
//! Solves, over a list of symmetric PSD variable blocks `X_b`,
//!
//! ```text
//!   maximize   sum_b tr(C_b X_b)
//!   subject to sum_b tr(A_{i,b} X_b)  {=, >=}  b_i     for each constraint i
//!              X_b >= 0
//! ```
//!
//! Inequalities are absorbed into nonnegative slack scalars (1x1 blocks).
//! The engine is an infeasible-start path-following method with
//! Nesterov-Todd scaling, a Mehrotra-style centering heuristic and dense
//! factorizations throughout. Instances in this crate stay below a few
//! hundred rows, so no sparsity is exploited and all linear algebra is
//! deterministic.
//!
//! Complex Hermitian data enters through [`embed_hermitian`]; the embedding
//! doubles traces, so coefficient matrices built with
//! [`embed_hermitian_coeff`] carry a factor 1/2 and trace values match the
//! complex convention everywhere.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Constraint sense for [`SdpConstraint`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintSense {
    Eq,
    Ge,
}

/// One linear trace constraint `sum_b tr(coeffs[b] * X_b) sense rhs`.
#[derive(Debug, Clone)]
pub struct SdpConstraint {
    /// One symmetric coefficient matrix per variable block (zeros allowed).
    pub coeffs: Vec<DMatrix<f64>>,
    pub sense: ConstraintSense,
    pub rhs: f64,
}

/// A block-structured semidefinite program in maximization form.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub block_sizes: Vec<usize>,
    /// Symmetric objective coefficient matrix per block.
    pub objective: Vec<DMatrix<f64>>,
    pub constraints: Vec<SdpConstraint>,
}

/// Solver exit condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    /// KKT residuals at or below the requested tolerance.
    Optimal,
    /// An improving-ray certificate of primal infeasibility was found.
    Infeasible,
    /// Iteration budget exhausted before the tolerance was met.
    MaxIters,
}

/// Scaled KKT residuals of a primal-dual pair.
#[derive(Debug, Clone, Copy)]
pub struct KktResiduals {
    /// Worst normalized constraint violation (incl. PSD violation of X).
    pub primal: f64,
    /// Normalized dual equation violation (incl. PSD violation of Z).
    pub dual: f64,
    /// Normalized complementary slackness `<X, Z>`.
    pub complementarity: f64,
    /// Normalized primal-dual objective gap.
    pub gap: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal
            .max(self.dual)
            .max(self.complementarity)
            .max(self.gap)
    }
}

impl std::fmt::Display for KktResiduals {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "primal={:.3e} dual={:.3e} compl={:.3e} gap={:.3e}",
            self.primal, self.dual, self.complementarity, self.gap
        )
    }
}

/// Primal-dual solution returned by [`solve_sdp`].
#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// Primal blocks (PSD), one per problem block.
    pub blocks: Vec<DMatrix<f64>>,
    /// Dual multiplier per constraint (`<= 0` for satisfied `>=` rows).
    pub dual: Vec<f64>,
    /// Dual slack matrix per block, `Z_b = sum_i y_i A_{i,b} - C_b`.
    pub dual_blocks: Vec<DMatrix<f64>>,
    /// Primal objective value.
    pub objective: f64,
    /// Dual objective value `b^T y`.
    pub dual_objective: f64,
    pub status: SdpStatus,
    pub residuals: KktResiduals,
    pub iterations: usize,
}

const EIG_FLOOR: f64 = 1e-250;

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Frobenius inner product; equals `tr(A B)` for symmetric arguments.
fn ddot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    nalgebra::SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Matrix power of a symmetric PSD matrix through its eigendecomposition.
fn sym_power(m: &DMatrix<f64>, exponent: f64) -> DMatrix<f64> {
    if m.nrows() == 1 {
        return DMatrix::from_element(1, 1, m[(0, 0)].max(EIG_FLOOR).powf(exponent));
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let powered = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| l.max(EIG_FLOOR).powf(exponent)),
    );
    let q = &eig.eigenvectors;
    sym(&(q * DMatrix::from_diagonal(&powered) * q.transpose()))
}

/// Largest step `alpha` keeping `X + alpha * D` positive semidefinite,
/// capped at `cap`.
fn step_to_boundary(x: &DMatrix<f64>, d: &DMatrix<f64>, cap: f64) -> f64 {
    let x_inv_sqrt = sym_power(x, -0.5);
    let s = sym(&(&x_inv_sqrt * d * &x_inv_sqrt));
    let lmin = min_eig(&s);
    if lmin >= -1e-300 {
        cap
    } else {
        (-1.0 / lmin).min(cap)
    }
}

/// Internal equality-only standard form with slack blocks appended.
struct Standard {
    sizes: Vec<usize>,
    c: Vec<DMatrix<f64>>,
    a: Vec<Vec<DMatrix<f64>>>,
    b: Vec<f64>,
    /// Objective scale factor taken out of `c`.
    gamma_c: f64,
    /// Per-constraint scale factors taken out of `(a, b)`.
    gamma: Vec<f64>,
    n_public_blocks: usize,
}

fn validate(problem: &SdpProblem) -> Result<()> {
    if problem.block_sizes.is_empty() || problem.block_sizes.iter().any(|&s| s == 0) {
        return Err(Error::InvalidParameter {
            name: "block_sizes",
            reason: "need at least one nonempty block".into(),
        });
    }
    if problem.objective.len() != problem.block_sizes.len() {
        return Err(Error::InvalidParameter {
            name: "objective",
            reason: "one objective matrix per block required".into(),
        });
    }
    if problem.constraints.is_empty() {
        return Err(Error::InvalidParameter {
            name: "constraints",
            reason: "unconstrained SDP is unbounded; need at least one constraint".into(),
        });
    }
    let check_sym = |m: &DMatrix<f64>, size: usize, name: &'static str| -> Result<()> {
        if m.nrows() != size || m.ncols() != size {
            return Err(Error::InvalidParameter {
                name,
                reason: format!("expected {size}x{size}, got {}x{}", m.nrows(), m.ncols()),
            });
        }
        let scale = 1.0 + m.amax();
        let asym = (m - m.transpose()).amax();
        if asym > 1e-9 * scale {
            return Err(Error::InvalidParameter {
                name,
                reason: format!("matrix not symmetric (asymmetry {asym:.3e})"),
            });
        }
        Ok(())
    };
    for (b, m) in problem.objective.iter().enumerate() {
        check_sym(m, problem.block_sizes[b], "objective")?;
    }
    for con in &problem.constraints {
        if con.coeffs.len() != problem.block_sizes.len() {
            return Err(Error::InvalidParameter {
                name: "constraint",
                reason: "one coefficient matrix per block required".into(),
            });
        }
        if !con.rhs.is_finite() {
            return Err(Error::InvalidParameter {
                name: "rhs",
                reason: "must be finite".into(),
            });
        }
        for (b, m) in con.coeffs.iter().enumerate() {
            check_sym(m, problem.block_sizes[b], "constraint")?;
        }
    }
    Ok(())
}

fn standardize(problem: &SdpProblem) -> Standard {
    let n_public = problem.block_sizes.len();
    let mut sizes = problem.block_sizes.clone();
    let slack_of: Vec<Option<usize>> = problem
        .constraints
        .iter()
        .map(|con| {
            if con.sense == ConstraintSense::Ge {
                sizes.push(1);
                Some(sizes.len() - 1)
            } else {
                None
            }
        })
        .collect();

    let gamma_c = problem
        .objective
        .iter()
        .map(|m| m.norm())
        .fold(0.0f64, f64::max)
        .max(1e-30);
    let mut c: Vec<DMatrix<f64>> = problem
        .objective
        .iter()
        .map(|m| sym(m) / gamma_c)
        .collect();
    c.extend(sizes[n_public..].iter().map(|&s| DMatrix::zeros(s, s)));

    let mut a = Vec::with_capacity(problem.constraints.len());
    let mut b = Vec::with_capacity(problem.constraints.len());
    let mut gamma = Vec::with_capacity(problem.constraints.len());
    for (i, con) in problem.constraints.iter().enumerate() {
        let g = con
            .coeffs
            .iter()
            .map(|m| m.norm())
            .fold(0.0f64, f64::max)
            .max(1e-30);
        let mut row: Vec<DMatrix<f64>> = con.coeffs.iter().map(|m| sym(m) / g).collect();
        for (k, &s) in sizes[n_public..].iter().enumerate() {
            let block = n_public + k;
            if slack_of[i] == Some(block) {
                row.push(DMatrix::from_element(1, 1, -1.0 / g));
            } else {
                row.push(DMatrix::zeros(s, s));
            }
        }
        a.push(row);
        b.push(con.rhs / g);
        gamma.push(g);
    }

    Standard {
        sizes,
        c,
        a,
        b,
        gamma_c,
        gamma,
        n_public_blocks: n_public,
    }
}

/// Recompute scaled KKT residuals of a solution from scratch.
///
/// Primal: per-constraint violation over `1 + |b_i| + ||A_i|| ||X||`, plus
/// any PSD violation of the primal blocks. Dual: violation of
/// `sum_i y_i A_i - Z = C` over `1 + ||C||`, sign violations of multipliers
/// of `>=` rows, plus PSD violation of `Z`. Complementarity and gap are
/// normalized by `1 + |p_obj| + |d_obj|`.
pub fn kkt_residuals(problem: &SdpProblem, solution: &SdpSolution) -> KktResiduals {
    let x = &solution.blocks;
    let y = &solution.dual;
    let z = &solution.dual_blocks;

    let p_obj: f64 = problem
        .objective
        .iter()
        .zip(x.iter())
        .map(|(c, xb)| ddot(c, xb))
        .sum();
    let d_obj: f64 = problem
        .constraints
        .iter()
        .zip(y.iter())
        .map(|(con, yi)| con.rhs * yi)
        .sum();

    let x_norm: f64 = x.iter().map(|m| m.norm()).sum::<f64>().max(1e-30);
    let mut primal = 0.0f64;
    let mut compl_slack = 0.0f64;
    for (con, &yi) in problem.constraints.iter().zip(y.iter()) {
        let val: f64 = con
            .coeffs
            .iter()
            .zip(x.iter())
            .map(|(a, xb)| ddot(a, xb))
            .sum();
        let a_norm: f64 = con.coeffs.iter().map(|m| m.norm()).sum();
        let denom = 1.0 + con.rhs.abs() + a_norm * x_norm;
        let viol = match con.sense {
            ConstraintSense::Eq => (val - con.rhs).abs(),
            ConstraintSense::Ge => {
                // slack s = val - rhs pairs with multiplier -y
                compl_slack += (val - con.rhs).max(0.0) * (-yi).max(0.0);
                primal = primal.max((-yi).min(0.0).abs() / (1.0 + yi.abs()));
                (con.rhs - val).max(0.0)
            }
        };
        primal = primal.max(viol / denom);
    }
    for xb in x {
        primal = primal.max((-min_eig(xb)).max(0.0) / (1.0 + xb.norm()));
    }

    let c_norm: f64 = problem.objective.iter().map(|m| m.norm()).sum();
    let mut dual = 0.0f64;
    for (b, zb) in z.iter().enumerate() {
        let mut lhs = -problem.objective[b].clone();
        for (con, &yi) in problem.constraints.iter().zip(y.iter()) {
            lhs += &con.coeffs[b] * yi;
        }
        lhs -= zb;
        let y_a_norm: f64 = problem
            .constraints
            .iter()
            .zip(y.iter())
            .map(|(con, yi)| con.coeffs[b].norm() * yi.abs())
            .sum();
        dual = dual.max(lhs.norm() / (1.0 + c_norm + y_a_norm));
        dual = dual.max((-min_eig(zb)).max(0.0) / (1.0 + zb.norm()));
    }
    // multipliers of >= rows must be nonpositive in maximization form
    for (con, &yi) in problem.constraints.iter().zip(y.iter()) {
        if con.sense == ConstraintSense::Ge {
            dual = dual.max(yi.max(0.0) / (1.0 + yi.abs()));
        }
    }

    let obj_scale = 1.0 + p_obj.abs() + d_obj.abs();
    let xz: f64 = x.iter().zip(z.iter()).map(|(xb, zb)| ddot(xb, zb)).sum();
    KktResiduals {
        primal,
        dual,
        complementarity: (xz + compl_slack).abs() / obj_scale,
        gap: (d_obj - p_obj).abs() / obj_scale,
    }
}

fn make_solution(
    problem: &SdpProblem,
    std_form: &Standard,
    x: &[DMatrix<f64>],
    y: &[f64],
    status: SdpStatus,
    iterations: usize,
) -> SdpSolution {
    let blocks: Vec<DMatrix<f64>> = x[..std_form.n_public_blocks].to_vec();
    let dual: Vec<f64> = y
        .iter()
        .zip(std_form.gamma.iter())
        .map(|(yi, g)| yi * std_form.gamma_c / g)
        .collect();
    // dual slack defined by the dual equality on the public blocks
    let dual_blocks: Vec<DMatrix<f64>> = (0..std_form.n_public_blocks)
        .map(|b| {
            let mut zb = -problem.objective[b].clone();
            for (con, &yi) in problem.constraints.iter().zip(dual.iter()) {
                zb += &con.coeffs[b] * yi;
            }
            sym(&zb)
        })
        .collect();
    let objective: f64 = problem
        .objective
        .iter()
        .zip(blocks.iter())
        .map(|(c, xb)| ddot(c, xb))
        .sum();
    let dual_objective: f64 = problem
        .constraints
        .iter()
        .zip(dual.iter())
        .map(|(con, yi)| con.rhs * yi)
        .sum();
    let mut solution = SdpSolution {
        blocks,
        dual,
        dual_blocks,
        objective,
        dual_objective,
        status,
        residuals: KktResiduals {
            primal: f64::NAN,
            dual: f64::NAN,
            complementarity: f64::NAN,
            gap: f64::NAN,
        },
        iterations,
    };
    solution.residuals = kkt_residuals(problem, &solution);
    solution
}

/// Check an improving-ray certificate of primal infeasibility:
/// `sum y_i A_i >= 0` with `b^T y < 0` proves emptiness.
fn infeasibility_certificate(std_form: &Standard, y: &[f64]) -> bool {
    let norm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-8 {
        return false;
    }
    let b_y: f64 = std_form.b.iter().zip(y.iter()).map(|(b, y)| b * y).sum();
    if b_y / norm > -1e-7 {
        return false;
    }
    for b in 0..std_form.sizes.len() {
        let mut m = DMatrix::zeros(std_form.sizes[b], std_form.sizes[b]);
        for (row, &yi) in std_form.a.iter().zip(y.iter()) {
            m += &row[b] * (yi / norm);
        }
        if min_eig(&m) < -1e-7 {
            return false;
        }
    }
    true
}

/// Solve a block SDP to the given scaled-residual tolerance.
///
/// Returns `Err` only for malformed problems; infeasibility and iteration
/// exhaustion are reported through [`SdpSolution::status`]. The run is
/// deterministic for fixed inputs.
pub fn solve_sdp(problem: &SdpProblem, tol: f64, max_iters: usize) -> Result<SdpSolution> {
    validate(problem)?;
    let sf = standardize(problem);
    let n_blocks = sf.sizes.len();
    let n_total: usize = sf.sizes.iter().sum();
    let m = sf.b.len();

    let b_scale = sf.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let xi_p = b_scale.max(1.0);
    let xi_d = (1.0 + sf.c.iter().map(|c| c.norm()).fold(0.0f64, f64::max)).max(1.0);

    let mut x: Vec<DMatrix<f64>> = sf
        .sizes
        .iter()
        .map(|&s| DMatrix::identity(s, s) * xi_p)
        .collect();
    let mut z: Vec<DMatrix<f64>> = sf
        .sizes
        .iter()
        .map(|&s| DMatrix::identity(s, s) * xi_d)
        .collect();
    let mut y = vec![0.0f64; m];

    let mut iterations = 0;
    for iter in 0..max_iters {
        iterations = iter + 1;

        // exact residual check on the original problem
        let candidate = make_solution(problem, &sf, &x, &y, SdpStatus::Optimal, iterations - 1);
        if candidate.residuals.max() <= tol {
            return Ok(candidate);
        }

        if infeasibility_certificate(&sf, &y) {
            return Ok(make_solution(
                problem,
                &sf,
                &x,
                &y,
                SdpStatus::Infeasible,
                iterations,
            ));
        }

        // scaled-space residuals
        let nu: f64 = x.iter().zip(z.iter()).map(|(xb, zb)| ddot(xb, zb)).sum::<f64>() / n_total as f64;
        let r_p: Vec<f64> = (0..m)
            .map(|i| {
                sf.b[i]
                    - sf.a[i]
                        .iter()
                        .zip(x.iter())
                        .map(|(a, xb)| ddot(a, xb))
                        .sum::<f64>()
            })
            .collect();
        let r_d: Vec<DMatrix<f64>> = (0..n_blocks)
            .map(|b| {
                let mut rb = &sf.c[b] + &z[b];
                for (row, &yi) in sf.a.iter().zip(y.iter()) {
                    rb -= &row[b] * yi;
                }
                rb
            })
            .collect();

        // NT scaling point per block
        let w: Vec<DMatrix<f64>> = x
            .iter()
            .zip(z.iter())
            .map(|(xb, zb)| {
                let xs = sym_power(xb, 0.5);
                let mi = sym_power(&sym(&(&xs * zb * &xs)), -0.5);
                sym(&(&xs * mi * &xs))
            })
            .collect();
        let z_inv: Vec<DMatrix<f64>> = z.iter().map(|zb| sym_power(zb, -1.0)).collect();

        // Schur complement H_{ij} = sum_b <A_i, W A_j W>
        let waw: Vec<Vec<DMatrix<f64>>> = sf
            .a
            .iter()
            .map(|row| {
                row.iter()
                    .zip(w.iter())
                    .map(|(a, wb)| sym(&(wb * a * wb)))
                    .collect()
            })
            .collect();
        let mut h = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let v: f64 = (0..n_blocks).map(|b| ddot(&sf.a[i][b], &waw[j][b])).sum();
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let h_scale = h.diagonal().amax().max(1e-30);
        let mut ridge = 0.0;
        let chol = loop {
            let reg = &h + DMatrix::identity(m, m) * (ridge * h_scale);
            match nalgebra::Cholesky::new(reg) {
                Some(c) => break c,
                None => {
                    ridge = if ridge == 0.0 { 1e-14 } else { ridge * 100.0 };
                    if ridge > 1e-4 {
                        return Ok(make_solution(
                            problem,
                            &sf,
                            &x,
                            &y,
                            SdpStatus::MaxIters,
                            iterations,
                        ));
                    }
                }
            }
        };

        let w_rd_w: Vec<DMatrix<f64>> = (0..n_blocks)
            .map(|b| sym(&(&w[b] * &r_d[b] * &w[b])))
            .collect();

        let solve_direction = |rc: &[DMatrix<f64>]| {
            let rhs = DVector::from_iterator(
                m,
                (0..m).map(|i| {
                    let t1: f64 = (0..n_blocks).map(|b| ddot(&sf.a[i][b], &rc[b])).sum();
                    let t2: f64 = (0..n_blocks).map(|b| ddot(&sf.a[i][b], &w_rd_w[b])).sum();
                    t1 + t2 - r_p[i]
                }),
            );
            let dy = chol.solve(&rhs);
            let dz: Vec<DMatrix<f64>> = (0..n_blocks)
                .map(|b| {
                    let mut m_b = -r_d[b].clone();
                    for (row, &dyi) in sf.a.iter().zip(dy.iter()) {
                        m_b += &row[b] * dyi;
                    }
                    sym(&m_b)
                })
                .collect();
            let dx: Vec<DMatrix<f64>> = (0..n_blocks)
                .map(|b| sym(&(&rc[b] - &(&w[b] * &dz[b] * &w[b]))))
                .collect();
            (dy, dz, dx)
        };

        // predictor: pure Newton step towards complementarity zero
        let rc_aff: Vec<DMatrix<f64>> = x.iter().map(|xb| -xb.clone()).collect();
        let (_, dz_aff, dx_aff) = solve_direction(&rc_aff);
        let ap_aff = x
            .iter()
            .zip(dx_aff.iter())
            .map(|(xb, dxb)| step_to_boundary(xb, dxb, 1.0))
            .fold(1.0f64, f64::min);
        let ad_aff = z
            .iter()
            .zip(dz_aff.iter())
            .map(|(zb, dzb)| step_to_boundary(zb, dzb, 1.0))
            .fold(1.0f64, f64::min);
        let nu_aff: f64 = x
            .iter()
            .zip(dx_aff.iter())
            .zip(z.iter().zip(dz_aff.iter()))
            .map(|((xb, dxb), (zb, dzb))| ddot(&(xb + dxb * ap_aff), &(zb + dzb * ad_aff)))
            .sum::<f64>()
            / n_total as f64;
        let mut sigma = (nu_aff.max(0.0) / nu).powi(3).clamp(1e-10, 0.99);
        if ap_aff.min(ad_aff) < 0.05 {
            sigma = sigma.max(0.9);
        }

        // combined centering step
        let rc: Vec<DMatrix<f64>> = (0..n_blocks)
            .map(|b| sym(&(&z_inv[b] * (sigma * nu) - &x[b])))
            .collect();
        let (dy, dz, dx) = solve_direction(&rc);
        let tau = 0.98;
        let ap = x
            .iter()
            .zip(dx.iter())
            .map(|(xb, dxb)| tau * step_to_boundary(xb, dxb, 1.0 / tau))
            .fold(1.0f64, f64::min);
        let ad = z
            .iter()
            .zip(dz.iter())
            .map(|(zb, dzb)| tau * step_to_boundary(zb, dzb, 1.0 / tau))
            .fold(1.0f64, f64::min);

        for b in 0..n_blocks {
            x[b] = sym(&(&x[b] + &dx[b] * ap));
            z[b] = sym(&(&z[b] + &dz[b] * ad));
        }
        for i in 0..m {
            y[i] += ad * dy[i];
        }

        // divergence guard
        let y_norm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !y_norm.is_finite() || y_norm > 1e14 {
            let status = if infeasibility_certificate(&sf, &y) {
                SdpStatus::Infeasible
            } else {
                SdpStatus::MaxIters
            };
            return Ok(make_solution(problem, &sf, &x, &y, status, iterations));
        }
    }

    let final_candidate = make_solution(problem, &sf, &x, &y, SdpStatus::Optimal, iterations);
    if final_candidate.residuals.max() <= tol {
        return Ok(final_candidate);
    }
    let status = if infeasibility_certificate(&sf, &y) {
        SdpStatus::Infeasible
    } else {
        SdpStatus::MaxIters
    };
    Ok(make_solution(problem, &sf, &x, &y, status, iterations))
}

/// Default solver tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default iteration budget.
pub const DEFAULT_MAX_ITERS: usize = 200;

/// Real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]` of a Hermitian
/// matrix. PSD is preserved both ways and traces double:
/// `tr(embed(A) embed(B)) = 2 tr(A B)`.
pub fn embed_hermitian(h: &DMatrix<Complex64>) -> Result<DMatrix<f64>> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::InvalidParameter {
            name: "embed_hermitian",
            reason: "matrix must be square".into(),
        });
    }
    let scale = 1.0 + h.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    let mut max_asym = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            max_asym = max_asym.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    if max_asym > 1e-10 * scale {
        return Err(Error::NotHermitian {
            max_asymmetry: max_asym,
        });
    }
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let re = 0.5 * (h[(i, j)].re + h[(j, i)].re);
            let im = 0.5 * (h[(i, j)].im - h[(j, i)].im);
            out[(i, j)] = re;
            out[(n + i, n + j)] = re;
            out[(i, n + j)] = -im;
            out[(n + i, j)] = im;
        }
    }
    Ok(out)
}

/// Coefficient form of the embedding: `embed_hermitian(h) / 2`, so that
/// `<embed_hermitian_coeff(A), embed_hermitian(B)> = tr(A B)` and complex
/// trace values carry over unchanged to the embedded problem.
pub fn embed_hermitian_coeff(h: &DMatrix<Complex64>) -> Result<DMatrix<f64>> {
    Ok(embed_hermitian(h)? * 0.5)
}

/// Recover a Hermitian matrix from a symmetric `2n x 2n` solution block.
///
/// Averages the two real copies, which projects any symmetric PSD matrix
/// onto the embedded subspace without changing trace functionals of
/// Hermitian data.
pub fn extract_hermitian(x: &DMatrix<f64>) -> DMatrix<Complex64> {
    let n = x.nrows() / 2;
    DMatrix::from_fn(n, n, |i, j| {
        Complex64::new(
            0.5 * (x[(i, j)] + x[(n + i, n + j)]),
            0.5 * (x[(n + i, j)] - x[(i, n + j)]),
        )
    })
}

/// Render a problem in a plain-text sparse triplet format for external
/// cross-checks.
///
/// Format, one record per line:
/// `sdp <#blocks> <#constraints>`, then `block <idx> <size>` per block,
/// `obj <block> <row> <col> <value>` for upper-triangle objective entries,
/// `con <idx> <=|>=> <rhs>` per constraint followed by its
/// `coef <con> <block> <row> <col> <value>` entries.
pub fn dump_problem(problem: &SdpProblem) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "sdp {} {}",
        problem.block_sizes.len(),
        problem.constraints.len()
    );
    for (b, size) in problem.block_sizes.iter().enumerate() {
        let _ = writeln!(s, "block {b} {size}");
    }
    let triplets = |tag: &str, extra: Option<usize>, m: &DMatrix<f64>, b: usize, out: &mut String| {
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                if m[(i, j)] != 0.0 {
                    match extra {
                        Some(k) => {
                            let _ = writeln!(out, "{tag} {k} {b} {i} {j} {:.17e}", m[(i, j)]);
                        }
                        None => {
                            let _ = writeln!(out, "{tag} {b} {i} {j} {:.17e}", m[(i, j)]);
                        }
                    }
                }
            }
        }
    };
    for (b, m) in problem.objective.iter().enumerate() {
        triplets("obj", None, m, b, &mut s);
    }
    for (k, con) in problem.constraints.iter().enumerate() {
        let sense = match con.sense {
            ConstraintSense::Eq => "=",
            ConstraintSense::Ge => ">=",
        };
        let _ = writeln!(s, "con {k} {sense} {:.17e}", con.rhs);
        for (b, m) in con.coeffs.iter().enumerate() {
            triplets("coef", Some(k), m, b, &mut s);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trace_matrix(n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n)
    }

    fn lambda_max_problem(c: DMatrix<f64>) -> SdpProblem {
        let n = c.nrows();
        SdpProblem {
            block_sizes: vec![n],
            objective: vec![c],
            constraints: vec![SdpConstraint {
                coeffs: vec![trace_matrix(n)],
                sense: ConstraintSense::Eq,
                rhs: 1.0,
            }],
        }
    }

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        sym(&m)
    }

    #[test]
    fn diag_objective_picks_largest_entry() {
        let c = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let sol = solve_sdp(&lambda_max_problem(c), 1e-8, 200).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert_relative_eq!(sol.objective, 3.0, epsilon = 1e-7);
        assert_relative_eq!(sol.blocks[0][(0, 0)], 1.0, epsilon = 1e-6);
        assert!(sol.blocks[0][(1, 1)].abs() < 1e-6);
    }

    #[test]
    fn lambda_max_characterization_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let n = rng.gen_range(2..6);
            let c = random_symmetric(&mut rng, n);
            let lmax = nalgebra::SymmetricEigen::new(c.clone())
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            let sol = solve_sdp(&lambda_max_problem(c), 1e-10, 200).unwrap();
            assert_eq!(sol.status, SdpStatus::Optimal);
            assert_relative_eq!(sol.objective, lmax, epsilon = 1e-8, max_relative = 1e-8);
            assert!(sol.residuals.max() <= 1e-8, "{}", sol.residuals);
            // weak duality on the returned pair
            assert!(sol.dual_objective >= sol.objective - 1e-9 * (1.0 + sol.objective.abs()));
        }
    }

    #[test]
    fn inequality_trace_ball_matches_eigenvalue_identity() {
        // max tr(R P) s.t. tr(P) <= r  ->  r * max(lambda_max(R), 0)
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let r_mat = random_symmetric(&mut rng, 3);
            let radius = rng.gen_range(0.1..2.0);
            let problem = SdpProblem {
                block_sizes: vec![3],
                objective: vec![r_mat.clone()],
                constraints: vec![SdpConstraint {
                    coeffs: vec![trace_matrix(3)],
                    sense: ConstraintSense::Ge,
                    rhs: -radius, // tr(P) <= radius  <=>  tr(-P) >= -radius
                }],
            };
            // flip: encode tr(P) <= radius via -tr(P) >= -radius
            let problem = SdpProblem {
                constraints: vec![SdpConstraint {
                    coeffs: vec![-trace_matrix(3)],
                    ..problem.constraints[0].clone()
                }],
                ..problem
            };
            let lmax = nalgebra::SymmetricEigen::new(r_mat)
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            let expect = radius * lmax.max(0.0);
            let sol = solve_sdp(&problem, 1e-9, 200).unwrap();
            assert_eq!(sol.status, SdpStatus::Optimal);
            assert_relative_eq!(sol.objective, expect, epsilon = 1e-7, max_relative = 1e-7);
        }
    }

    #[test]
    fn scale_invariance_of_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = random_symmetric(&mut rng, 4);
        let p1 = lambda_max_problem(c.clone());
        let p2 = lambda_max_problem(c * 37.5);
        let s1 = solve_sdp(&p1, 1e-10, 200).unwrap();
        let s2 = solve_sdp(&p2, 1e-10, 200).unwrap();
        assert_relative_eq!(s2.objective, 37.5 * s1.objective, max_relative = 1e-7);
        assert!((&s1.blocks[0] - &s2.blocks[0]).amax() < 1e-6);
    }

    #[test]
    fn perturbed_primal_reports_positive_residual() {
        let c = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let problem = lambda_max_problem(c);
        let sol = solve_sdp(&problem, 1e-8, 200).unwrap();

        // trace-preserving perturbation: feasible but no longer complementary
        let mut bent = sol.clone();
        bent.blocks[0] = (bent.blocks[0].clone() + DMatrix::identity(2, 2) * 0.1) / 1.2;
        let res = kkt_residuals(&problem, &bent);
        assert!(res.primal < 1e-8, "renormalized point stays feasible: {res}");
        assert!(res.complementarity > 1e-3, "perturbation not detected: {res}");

        // plain shift breaks the trace constraint
        let mut shifted = sol;
        shifted.blocks[0] += DMatrix::identity(2, 2) * 0.1;
        let res = kkt_residuals(&problem, &shifted);
        assert!(res.primal > 1e-3, "primal violation not reported: {res}");
    }

    #[test]
    fn max_iters_reports_residuals_without_panic() {
        let c = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let sol = solve_sdp(&lambda_max_problem(c), 1e-12, 2).unwrap();
        assert_eq!(sol.status, SdpStatus::MaxIters);
        assert!(sol.residuals.max().is_finite());
    }

    #[test]
    fn contradictory_traces_detected_infeasible() {
        let problem = SdpProblem {
            block_sizes: vec![2],
            objective: vec![DMatrix::identity(2, 2)],
            constraints: vec![
                SdpConstraint {
                    coeffs: vec![trace_matrix(2)],
                    sense: ConstraintSense::Eq,
                    rhs: 1.0,
                },
                SdpConstraint {
                    coeffs: vec![trace_matrix(2)],
                    sense: ConstraintSense::Eq,
                    rhs: 2.0,
                },
            ],
        };
        let sol = solve_sdp(&problem, 1e-8, 200).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
    }

    #[test]
    fn infeasible_inequality_detected() {
        // tr(X) = 1 and tr(2X) >= 5 cannot hold together
        let problem = SdpProblem {
            block_sizes: vec![2],
            objective: vec![DMatrix::identity(2, 2)],
            constraints: vec![
                SdpConstraint {
                    coeffs: vec![trace_matrix(2)],
                    sense: ConstraintSense::Eq,
                    rhs: 1.0,
                },
                SdpConstraint {
                    coeffs: vec![trace_matrix(2) * 2.0],
                    sense: ConstraintSense::Ge,
                    rhs: 5.0,
                },
            ],
        };
        let sol = solve_sdp(&problem, 1e-8, 200).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
    }

    #[test]
    fn two_block_problem_splits_budget() {
        // max tr(X1) + 2 tr(X2), tr(X1) + tr(X2) = 1 -> put all mass in X2
        let problem = SdpProblem {
            block_sizes: vec![2, 2],
            objective: vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2) * 2.0],
            constraints: vec![SdpConstraint {
                coeffs: vec![trace_matrix(2), trace_matrix(2)],
                sense: ConstraintSense::Eq,
                rhs: 1.0,
            }],
        };
        let sol = solve_sdp(&problem, 1e-8, 200).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert_relative_eq!(sol.objective, 2.0, epsilon = 1e-7);
        assert!(sol.blocks[0].trace() < 1e-6);
    }

    #[test]
    fn embed_identity_and_pure_imaginary() {
        let h = DMatrix::from_diagonal_element(2, 2, Complex64::new(1.0, 0.0));
        let e = embed_hermitian(&h).unwrap();
        assert_eq!(e, DMatrix::identity(4, 4));

        // [[0, i], [-i, 0]] has eigenvalues +-1, duplicated by the embedding
        let h = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        let e = embed_hermitian(&h).unwrap();
        let mut evs: Vec<f64> = nalgebra::SymmetricEigen::new(e)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        evs.sort_by(f64::total_cmp);
        assert_relative_eq!(evs[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(evs[1], -1.0, epsilon = 1e-12);
        assert_relative_eq!(evs[2], 1.0, epsilon = 1e-12);
        assert_relative_eq!(evs[3], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn embed_rejects_non_hermitian() {
        let h = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 1.0), // imaginary diagonal is not Hermitian
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
        );
        assert!(matches!(embed_hermitian(&h), Err(Error::NotHermitian { .. })));
    }

    fn random_hermitian_psd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<Complex64> {
        let a = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        &a * a.adjoint()
    }

    #[test]
    fn embedding_preserves_psd_and_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let h = random_hermitian_psd(&mut rng, 4);
            let e = embed_hermitian(&h).unwrap();
            assert!(min_eig(&e) > -1e-10);
            let back = extract_hermitian(&e);
            let diff: f64 = (&back - &h).iter().map(|c| c.norm()).fold(0.0, f64::max);
            assert!(diff < 1e-10);
            let e2 = embed_hermitian(&back).unwrap();
            assert!((&e2 - &e).amax() < 1e-10);
        }
    }

    #[test]
    fn coeff_embedding_matches_complex_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_hermitian_psd(&mut rng, 3);
        let b = random_hermitian_psd(&mut rng, 3);
        let lhs = ddot(
            &embed_hermitian_coeff(&a).unwrap(),
            &embed_hermitian(&b).unwrap(),
        );
        let rhs = (&a * &b).trace().re;
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
    }

    #[test]
    fn dump_format_mentions_all_sections() {
        let c = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let text = dump_problem(&lambda_max_problem(c));
        assert!(text.starts_with("sdp 1 1"));
        assert!(text.contains("block 0 2"));
        assert!(text.contains("obj 0 0 0"));
        assert!(text.contains("con 0 ="));
        assert!(text.contains("coef 0 0 0 0"));
    }
}
