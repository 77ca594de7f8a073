//! Outer phase-shift solvers.
//!
//! Two routes solve the relaxed phase problem
//! `max theta^T Upsilon theta^*` s.t. `theta^T Gamma theta^* >= eps^2`,
//! `|theta_i| = beta`, `arg(theta_i) in S`:
//!
//! - semidefinite relaxation with rank-one extraction (full-circle sets),
//! - a best-first branch-and-bound over per-element argument boxes with
//!   convex-envelope node relaxations (interval and discrete sets).
//!
//! BnB nodes lift `theta` into a bordered PSD block
//! `[[C, theta^*], [theta^T, 1]]` so `C >= theta^* theta^T` is a Schur
//! complement; elements whose box collapses are substituted out of the node
//! problem, which keeps every node SDP strictly feasible.

use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::robust::{circ_dist, quad_form, wrap_angle, PhaseSet, PhaseVector};
use crate::sdp::{
    self, embed_hermitian_coeff, extract_hermitian, ConstraintSense, SdpConstraint, SdpProblem,
    SdpStatus,
};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
/// Numerical rank-one certificate threshold `lambda_2 / lambda_1`.
pub const RANK_ONE_RATIO: f64 = 1e-6;
/// Default number of Gaussian randomization draws.
pub const DEFAULT_RANDOMIZATION_TRIALS: usize = 200;
/// Default absolute bound-gap tolerance of the branch-and-bound search.
pub const DEFAULT_BNB_TOL: f64 = 2e-4;
/// Default node budget of the branch-and-bound search.
pub const DEFAULT_MAX_NODES: usize = 1000;
/// Constraint slack tolerance when judging candidate feasibility.
const FEAS_TOL: f64 = 1e-9;
/// Interval width below which an element is pinned to its midpoint.
const PIN_WIDTH: f64 = 1e-9;

/// Outcome of a phase solve (either route).
#[derive(Debug, Clone)]
pub struct PhaseSolveResult {
    pub theta: PhaseVector,
    /// Achieved objective `theta^T Upsilon theta^*`.
    pub objective: f64,
    /// Optimal value of the convex relaxation (an upper bound).
    pub relaxation_objective: f64,
    /// Whether the SDR returned a numerically rank-one matrix.
    pub rank_one_certified: bool,
    /// `relaxation_objective - objective`.
    pub gap: f64,
    /// Relaxations solved (zero for the plain SDR route).
    pub node_count: usize,
    /// True when the node budget ran out before the gap closed.
    pub degraded: bool,
}

/// Solve the full-circle phase problem by semidefinite relaxation.
///
/// A nonpositive `eps` drops the constraint row entirely (it is implied by
/// positive semidefiniteness of `Gamma`), which is how the non-robust
/// baseline reuses this routine.
pub fn sdr_phase_solve(
    upsilon: &DMatrix<Complex64>,
    gamma: &DMatrix<Complex64>,
    eps: f64,
    beta: f64,
) -> Result<PhaseSolveResult> {
    sdr_phase_solve_with(upsilon, gamma, eps, beta, DEFAULT_RANDOMIZATION_TRIALS, 0)
}

/// [`sdr_phase_solve`] with explicit randomization budget and seed.
pub fn sdr_phase_solve_with(
    upsilon: &DMatrix<Complex64>,
    gamma: &DMatrix<Complex64>,
    eps: f64,
    beta: f64,
    trials: usize,
    seed: u64,
) -> Result<PhaseSolveResult> {
    let n = upsilon.nrows();
    let beta_sq = beta * beta;
    let mut constraints = Vec::with_capacity(n + 1);
    if eps > 0.0 {
        constraints.push(SdpConstraint {
            coeffs: vec![embed_hermitian_coeff(gamma)?],
            sense: ConstraintSense::Ge,
            rhs: eps * eps,
        });
    }
    for i in 0..n {
        let mut e = DMatrix::zeros(2 * n, 2 * n);
        e[(i, i)] = 0.5;
        e[(n + i, n + i)] = 0.5;
        constraints.push(SdpConstraint {
            coeffs: vec![e],
            sense: ConstraintSense::Eq,
            rhs: beta_sq,
        });
    }
    let problem = SdpProblem {
        block_sizes: vec![2 * n],
        objective: vec![embed_hermitian_coeff(upsilon)?],
        constraints,
    };
    let sol = sdp::solve_sdp(&problem, sdp::DEFAULT_TOL, sdp::DEFAULT_MAX_ITERS)?;
    if sol.status != SdpStatus::Optimal {
        // classify: is the constraint level simply unattainable?
        if eps > 0.0 {
            let attainable = max_constraint_value(gamma, beta)?;
            if attainable < eps * eps {
                return Err(Error::RelaxedConstraintInfeasible {
                    attainable,
                    eps_sq: eps * eps,
                });
            }
        }
        return Err(Error::SdpNotConverged {
            status: sol.status,
            residuals: sol.residuals.to_string(),
        });
    }
    let c_bar = extract_hermitian(&sol.blocks[0]);
    let eig = nalgebra::SymmetricEigen::new(c_bar.clone());
    let mut evs: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    evs.sort_by(|a, b| b.total_cmp(a));
    let rank_one_certified = evs[0] > 0.0
        && evs
            .get(1)
            .map(|v| v.max(0.0) <= RANK_ONE_RATIO * evs[0])
            .unwrap_or(true);

    let theta = extract_rank_one(&c_bar, upsilon, gamma, eps, beta, trials, seed)?;
    let objective = quad_form(upsilon, &theta.theta);
    Ok(PhaseSolveResult {
        theta,
        objective,
        relaxation_objective: sol.objective,
        rank_one_certified,
        gap: sol.objective - objective,
        node_count: 0,
        degraded: false,
    })
}

/// Largest attainable `tr(Gamma C)` under the modulus constraints; used to
/// certify infeasibility of the relaxed constraint level.
fn max_constraint_value(gamma: &DMatrix<Complex64>, beta: f64) -> Result<f64> {
    let n = gamma.nrows();
    let mut constraints = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = DMatrix::zeros(2 * n, 2 * n);
        e[(i, i)] = 0.5;
        e[(n + i, n + i)] = 0.5;
        constraints.push(SdpConstraint {
            coeffs: vec![e],
            sense: ConstraintSense::Eq,
            rhs: beta * beta,
        });
    }
    let problem = SdpProblem {
        block_sizes: vec![2 * n],
        objective: vec![embed_hermitian_coeff(gamma)?],
        constraints,
    };
    let sol = sdp::solve_sdp(&problem, sdp::DEFAULT_TOL, sdp::DEFAULT_MAX_ITERS)?;
    if sol.status != SdpStatus::Optimal {
        return Err(Error::SdpNotConverged {
            status: sol.status,
            residuals: sol.residuals.to_string(),
        });
    }
    Ok(sol.objective)
}

/// Recover a constant-modulus phase vector from a relaxation solution.
///
/// Rank-one matrices yield the eigenvector projection directly; otherwise
/// Gaussian randomization draws `trials` candidates from the matrix as a
/// covariance, projects each to the modulus sphere and keeps the best draw
/// satisfying the constraint, falling back to the eigenvector projection.
pub fn extract_rank_one(
    c_bar: &DMatrix<Complex64>,
    upsilon: &DMatrix<Complex64>,
    gamma: &DMatrix<Complex64>,
    eps: f64,
    beta: f64,
    trials: usize,
    seed: u64,
) -> Result<PhaseVector> {
    let n = c_bar.nrows();
    let eps_sq = eps * eps;
    let eig = nalgebra::SymmetricEigen::new(c_bar.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = order[0];

    // the lifted matrix approximates conj(theta) theta^T, so candidates are
    // conjugated back to theta
    let project = |draw: &DVector<Complex64>| -> DVector<Complex64> {
        DVector::from_fn(n, |i, _| {
            let v = draw[i];
            if v.norm() == 0.0 {
                Complex64::from(beta)
            } else {
                (v / v.norm()).conj() * beta
            }
        })
    };
    let feasible = |theta: &DVector<Complex64>| -> (bool, f64) {
        if eps <= 0.0 {
            return (true, 0.0);
        }
        let val = quad_form(gamma, theta);
        (val >= eps_sq * (1.0 - FEAS_TOL), val)
    };

    let principal = project(&DVector::from_fn(n, |i, _| eig.eigenvectors[(i, top)]));
    let rank_one = eig.eigenvalues[top] > 0.0
        && order
            .get(1)
            .map(|&i| eig.eigenvalues[i].max(0.0) <= RANK_ONE_RATIO * eig.eigenvalues[top])
            .unwrap_or(true);

    let mut best: Option<(f64, DVector<Complex64>)> = None;
    let mut best_constraint = f64::NEG_INFINITY;
    let mut consider = |theta: DVector<Complex64>| {
        let (ok, con) = feasible(&theta);
        best_constraint = best_constraint.max(if eps <= 0.0 { 0.0 } else { con });
        if ok {
            let obj = quad_form(upsilon, &theta);
            if best.as_ref().map(|(b, _)| obj > *b).unwrap_or(true) {
                best = Some((obj, theta));
            }
        }
    };

    consider(principal.clone());
    if !rank_one {
        // square root of the PSD part for covariance sampling
        let sqrt = {
            let mut m: DMatrix<Complex64> = DMatrix::zeros(n, n);
            for &k in &order {
                let lam = eig.eigenvalues[k].max(0.0);
                if lam > 0.0 {
                    let col = eig.eigenvectors.column(k);
                    let s = lam.sqrt();
                    for i in 0..n {
                        for j in 0..n {
                            m[(i, j)] += col[i] * col[j].conj() * Complex64::from(s);
                        }
                    }
                }
            }
            m
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..trials {
            let g = DVector::from_fn(n, |_, _| {
                Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                    * Complex64::from(std::f64::consts::FRAC_1_SQRT_2)
            });
            consider(project(&(&sqrt * g)));
        }
    }

    match best {
        Some((_, theta)) => Ok(PhaseVector {
            theta,
            beta,
            argument_set: PhaseSet::Full,
        }),
        None => Err(Error::NoFeasiblePhaseCandidate {
            best_constraint,
            eps_sq,
        }),
    }
}

/// Project a relaxed vector onto the modulus sphere and argument set.
///
/// Already-feasible vectors pass through unchanged up to angle wrapping;
/// interval sets follow the wrap-around endpoint rules.
pub fn argument_rounding(
    theta_relaxed: &DVector<Complex64>,
    phase_set: PhaseSet,
    beta: f64,
) -> PhaseVector {
    let args: Vec<f64> = theta_relaxed
        .iter()
        .map(|t| phase_set.project(t.arg()))
        .collect();
    PhaseVector::from_args(&args, beta, phase_set)
}

/// Per-element argument domain of a branch-and-bound node.
#[derive(Debug, Clone)]
pub enum NodeDomain {
    /// Contiguous angle boxes `[left_i, right_i]`.
    Intervals(Vec<(f64, f64)>),
    /// Contiguous level-index ranges of a uniform grid with spacing `step`.
    Levels {
        step: f64,
        ranges: Vec<(usize, usize)>,
    },
}

impl NodeDomain {
    fn len(&self) -> usize {
        match self {
            NodeDomain::Intervals(v) => v.len(),
            NodeDomain::Levels { ranges, .. } => ranges.len(),
        }
    }

    /// Angular box of element `i`.
    fn bounds(&self, i: usize) -> (f64, f64) {
        match self {
            NodeDomain::Intervals(v) => v[i],
            NodeDomain::Levels { step, ranges } => {
                (ranges[i].0 as f64 * step, ranges[i].1 as f64 * step)
            }
        }
    }

    fn width(&self, i: usize) -> f64 {
        let (l, r) = self.bounds(i);
        r - l
    }

    fn splittable(&self, i: usize) -> bool {
        match self {
            NodeDomain::Intervals(_) => self.width(i) > PIN_WIDTH,
            NodeDomain::Levels { ranges, .. } => ranges[i].1 > ranges[i].0,
        }
    }

    /// Split element `i`, producing the two child domains.
    fn split(&self, i: usize) -> (NodeDomain, NodeDomain) {
        match self {
            NodeDomain::Intervals(v) => {
                let (l, r) = v[i];
                let mid = 0.5 * (l + r);
                let mut a = v.clone();
                let mut b = v.clone();
                a[i] = (l, mid);
                b[i] = (mid, r);
                (NodeDomain::Intervals(a), NodeDomain::Intervals(b))
            }
            NodeDomain::Levels { step, ranges } => {
                let (lo, hi) = ranges[i];
                let mid = (lo + hi) / 2;
                let mut a = ranges.clone();
                let mut b = ranges.clone();
                a[i] = (lo, mid);
                b[i] = (mid + 1, hi);
                (
                    NodeDomain::Levels {
                        step: *step,
                        ranges: a,
                    },
                    NodeDomain::Levels {
                        step: *step,
                        ranges: b,
                    },
                )
            }
        }
    }

    /// Nearest admissible argument for element `i` within the node.
    fn project(&self, i: usize, arg: f64) -> f64 {
        match self {
            NodeDomain::Intervals(v) => {
                let (l, r) = v[i];
                let offset = wrap_angle(arg - l);
                if offset <= r - l {
                    l + offset
                } else if circ_dist(arg, l) <= circ_dist(arg, r) {
                    l
                } else {
                    r
                }
            }
            NodeDomain::Levels { step, ranges } => {
                let (lo, hi) = ranges[i];
                let mut best = lo;
                let mut best_d = f64::INFINITY;
                for k in lo..=hi {
                    let d = circ_dist(arg, k as f64 * step);
                    if d < best_d {
                        best_d = d;
                        best = k;
                    }
                }
                best as f64 * step
            }
        }
    }
}

/// One node of the best-first search tree.
#[derive(Debug, Clone)]
pub struct BnBNode {
    /// Per-element argument domain.
    pub domain: NodeDomain,
    /// Node relaxation value (a valid bound for every feasible point in
    /// the box, nonincreasing down the tree).
    pub upper_bound: f64,
    /// Rounded feasible arguments found at this node, if any.
    pub incumbent_args: Option<Vec<f64>>,
    /// Objective of the rounded point.
    pub incumbent_objective: Option<f64>,
}

enum NodeRelaxation {
    Solved {
        bound: f64,
        theta_relaxed: DVector<Complex64>,
    },
    Infeasible,
}

/// Solve the node relaxation with collapsed elements substituted out.
fn solve_node(
    upsilon: &DMatrix<Complex64>,
    gamma: &DMatrix<Complex64>,
    eps: f64,
    beta: f64,
    domain: &NodeDomain,
) -> Result<NodeRelaxation> {
    let n = upsilon.nrows();
    let eps_sq = eps * eps;
    let beta_sq = beta * beta;
    let mut free = Vec::new();
    let mut theta_full: DVector<Complex64> = DVector::zeros(n);
    for i in 0..n {
        let (l, r) = domain.bounds(i);
        if r - l <= PIN_WIDTH {
            theta_full[i] = Complex64::from_polar(beta, 0.5 * (l + r));
        } else {
            free.push(i);
        }
    }

    if free.is_empty() {
        let feasible = eps <= 0.0 || quad_form(gamma, &theta_full) >= eps_sq * (1.0 - FEAS_TOL);
        if !feasible {
            return Ok(NodeRelaxation::Infeasible);
        }
        return Ok(NodeRelaxation::Solved {
            bound: quad_form(upsilon, &theta_full),
            theta_relaxed: theta_full,
        });
    }

    let f = free.len();
    let dim = f + 1;
    let is_free = {
        let mut mask = vec![false; n];
        for &i in &free {
            mask[i] = true;
        }
        mask
    };

    // partition a Hermitian form against the pinned assignment:
    // theta^T M theta^* = tr(M_ff C_f) + 2 Re(theta_f^T c) + const
    let reduce = |m: &DMatrix<Complex64>| -> (DMatrix<Complex64>, f64) {
        let mut coeff = DMatrix::zeros(dim, dim);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                coeff[(a, b)] = m[(i, j)];
            }
        }
        for (a, &i) in free.iter().enumerate() {
            let mut c = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if !is_free[j] {
                    c += m[(i, j)] * theta_full[j].conj();
                }
            }
            coeff[(a, f)] = c;
            coeff[(f, a)] = c.conj();
        }
        let mut constant = Complex64::new(0.0, 0.0);
        for i in 0..n {
            if is_free[i] {
                continue;
            }
            for j in 0..n {
                if is_free[j] {
                    continue;
                }
                constant += theta_full[i] * m[(i, j)] * theta_full[j].conj();
            }
        }
        (coeff, constant.re)
    };

    let (obj_coeff, obj_const) = reduce(upsilon);
    let mut constraints = Vec::new();

    // t = 1 on the border element
    let mut t_mat = DMatrix::<Complex64>::zeros(dim, dim);
    t_mat[(f, f)] = Complex64::new(1.0, 0.0);
    constraints.push(SdpConstraint {
        coeffs: vec![embed_hermitian_coeff(&t_mat)?],
        sense: ConstraintSense::Eq,
        rhs: 1.0,
    });

    // unit-modulus diagonal on free elements
    for a in 0..f {
        let mut e = DMatrix::<Complex64>::zeros(dim, dim);
        e[(a, a)] = Complex64::new(1.0, 0.0);
        constraints.push(SdpConstraint {
            coeffs: vec![embed_hermitian_coeff(&e)?],
            sense: ConstraintSense::Eq,
            rhs: beta_sq,
        });
    }

    if eps > 0.0 {
        let (gam_coeff, gam_const) = reduce(gamma);
        constraints.push(SdpConstraint {
            coeffs: vec![embed_hermitian_coeff(&gam_coeff)?],
            sense: ConstraintSense::Ge,
            rhs: eps_sq - gam_const,
        });
    }

    // convex envelopes Re{conj(a_i) theta_i} >= beta cos(w_i / 2)
    for (a_idx, &i) in free.iter().enumerate() {
        let (l, r) = domain.bounds(i);
        let centre = Complex64::from_polar(1.0, 0.5 * (l + r));
        let mut env = DMatrix::<Complex64>::zeros(dim, dim);
        env[(a_idx, f)] = centre.conj() * Complex64::from(0.5);
        env[(f, a_idx)] = centre * Complex64::from(0.5);
        constraints.push(SdpConstraint {
            coeffs: vec![embed_hermitian_coeff(&env)?],
            sense: ConstraintSense::Ge,
            rhs: beta * (0.5 * (r - l)).cos(),
        });
    }

    let problem = SdpProblem {
        block_sizes: vec![2 * dim],
        objective: vec![embed_hermitian_coeff(&obj_coeff)?],
        constraints,
    };
    let sol = sdp::solve_sdp(&problem, sdp::DEFAULT_TOL, sdp::DEFAULT_MAX_ITERS)?;
    match sol.status {
        SdpStatus::Optimal => {
            let y = extract_hermitian(&sol.blocks[0]);
            for (a, &i) in free.iter().enumerate() {
                theta_full[i] = y[(f, a)];
            }
            Ok(NodeRelaxation::Solved {
                bound: sol.objective + obj_const,
                theta_relaxed: theta_full,
            })
        }
        SdpStatus::Infeasible => Ok(NodeRelaxation::Infeasible),
        SdpStatus::MaxIters => Err(Error::SdpNotConverged {
            status: sol.status,
            residuals: sol.residuals.to_string(),
        }),
    }
}

/// Split a requested set into root domains of angular span at most pi.
fn root_domains(n: usize, phase_set: PhaseSet) -> Vec<NodeDomain> {
    match phase_set {
        PhaseSet::Full => root_domains(
            n,
            PhaseSet::Interval {
                lower: 0.0,
                upper: TWO_PI,
            },
        ),
        PhaseSet::Interval { lower, upper } => {
            let mut out = Vec::new();
            let mut left = lower;
            while upper - left > std::f64::consts::PI + 1e-12 {
                let right = left + std::f64::consts::PI;
                out.push(NodeDomain::Intervals(vec![(left, right); n]));
                left = right;
            }
            out.push(NodeDomain::Intervals(vec![(left, upper); n]));
            out
        }
        PhaseSet::Discrete { levels } => {
            let step = TWO_PI / levels as f64;
            let max_span = (std::f64::consts::PI / step).floor() as usize;
            let mut out = Vec::new();
            let mut lo = 0;
            while lo < levels {
                let hi = (lo + max_span).min(levels - 1);
                out.push(NodeDomain::Levels {
                    step,
                    ranges: vec![(lo, hi); n],
                });
                lo = hi + 1;
            }
            out
        }
    }
}

struct HeapEntry {
    bound: f64,
    order: usize,
    node: BnBNode,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.order == other.order
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // max-heap on bound; FIFO on ties for determinism
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.order.cmp(&self.order))
    }
}

/// Best-first branch-and-bound over argument boxes.
///
/// The requested set is first split into independent sub-searches of span
/// at most pi; each runs its own incumbent and terminates when its bound
/// gap falls below `tol_bnb` or the shared node budget runs out. The final
/// answer is the best incumbent across sub-searches. A spent budget
/// degrades the result (gap reported) instead of failing.
pub fn bnb_phase_solve(
    upsilon: &DMatrix<Complex64>,
    gamma: &DMatrix<Complex64>,
    eps: f64,
    beta: f64,
    phase_set: PhaseSet,
    tol_bnb: f64,
    max_nodes: usize,
) -> Result<PhaseSolveResult> {
    let n = upsilon.nrows();
    let eps_sq = eps * eps;
    let mut node_count = 0usize;
    let mut order = 0usize;
    let mut degraded = false;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut best_constraint = f64::NEG_INFINITY;
    let mut root_bound = f64::NEG_INFINITY;
    let mut remaining_bound = f64::NEG_INFINITY;

    let feasible = |args: &[f64]| -> (bool, f64) {
        if eps <= 0.0 {
            return (true, 0.0);
        }
        let theta = DVector::from_iterator(n, args.iter().map(|&a| Complex64::from_polar(beta, a)));
        let val = quad_form(gamma, &theta);
        (val >= eps_sq * (1.0 - FEAS_TOL), val)
    };
    let objective_of = |args: &[f64]| -> f64 {
        let theta = DVector::from_iterator(n, args.iter().map(|&a| Complex64::from_polar(beta, a)));
        quad_form(upsilon, &theta)
    };

    for domain in root_domains(n, phase_set) {
        // independent incumbent per sub-search
        let mut incumbent: Option<(f64, Vec<f64>)> = None;
        let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();

        let push_node = |domain: NodeDomain,
                             parent_bound: f64,
                             heap: &mut BinaryHeap<HeapEntry>,
                             incumbent: &mut Option<(f64, Vec<f64>)>,
                             node_count: &mut usize,
                             order: &mut usize,
                             best_constraint: &mut f64|
         -> Result<()> {
            *node_count += 1;
            match solve_node(upsilon, gamma, eps, beta, &domain)? {
                NodeRelaxation::Infeasible => Ok(()),
                NodeRelaxation::Solved {
                    bound,
                    theta_relaxed,
                } => {
                    let bound = bound.min(parent_bound);
                    let args: Vec<f64> = (0..domain.len())
                        .map(|i| domain.project(i, theta_relaxed[i].arg()))
                        .collect();
                    let (ok, con) = feasible(&args);
                    *best_constraint = (*best_constraint).max(con);
                    let mut node = BnBNode {
                        domain,
                        upper_bound: bound,
                        incumbent_args: None,
                        incumbent_objective: None,
                    };
                    if ok {
                        let obj = objective_of(&args);
                        node.incumbent_args = Some(args.clone());
                        node.incumbent_objective = Some(obj);
                        if incumbent.as_ref().map(|(b, _)| obj > *b).unwrap_or(true) {
                            *incumbent = Some((obj, args));
                        }
                    }
                    heap.push(HeapEntry {
                        bound,
                        order: *order,
                        node,
                    });
                    *order += 1;
                    Ok(())
                }
            }
        };

        push_node(
            domain,
            f64::INFINITY,
            &mut heap,
            &mut incumbent,
            &mut node_count,
            &mut order,
            &mut best_constraint,
        )?;
        if let Some(entry) = heap.peek() {
            root_bound = root_bound.max(entry.bound);
        }

        let mut sub_bound = f64::NEG_INFINITY;
        while let Some(entry) = heap.pop() {
            let bound = entry.bound;
            let inc_val = incumbent
                .as_ref()
                .map(|(v, _)| *v)
                .unwrap_or(f64::NEG_INFINITY);
            if bound <= inc_val + tol_bnb {
                sub_bound = bound.max(inc_val);
                break;
            }
            if node_count >= max_nodes {
                degraded = true;
                sub_bound = bound;
                break;
            }
            // branch on the widest splittable element
            let dom = &entry.node.domain;
            let pick = (0..dom.len())
                .filter(|&i| dom.splittable(i))
                .max_by(|&a, &b| dom.width(a).total_cmp(&dom.width(b)));
            let Some(pick) = pick else {
                // fully collapsed node: its bound equals its value
                sub_bound = bound.max(inc_val);
                break;
            };
            let (left, right) = dom.split(pick);
            for child in [left, right] {
                push_node(
                    child,
                    bound,
                    &mut heap,
                    &mut incumbent,
                    &mut node_count,
                    &mut order,
                    &mut best_constraint,
                )?;
            }
            sub_bound = heap
                .peek()
                .map(|e| e.bound)
                .unwrap_or(inc_val)
                .max(
                    incumbent
                        .as_ref()
                        .map(|(v, _)| *v)
                        .unwrap_or(f64::NEG_INFINITY),
                );
        }
        remaining_bound = remaining_bound.max(sub_bound);

        if let Some((obj, args)) = incumbent {
            if best.as_ref().map(|(b, _)| obj > *b).unwrap_or(true) {
                best = Some((obj, args));
            }
        }
    }

    let Some((objective, args)) = best else {
        return Err(Error::NoFeasiblePhaseCandidate {
            best_constraint,
            eps_sq,
        });
    };
    let theta = PhaseVector::from_args(&args, beta, phase_set);
    let relaxation_objective = root_bound.max(objective);
    Ok(PhaseSolveResult {
        theta,
        objective,
        relaxation_objective,
        rank_one_certified: false,
        gap: (remaining_bound.max(objective) - objective).max(0.0),
        node_count,
        degraded,
    })
}
