//! First-order primal-dual solver for the generalized Dantzig selector:
//!
//!   minimize R(Theta)  subject to  R*( sum_i (<<X_i, Theta>> - y_i) X_i ) <= lambda
//!
//! written as min R(Theta) + I_C(K Theta - b) with K the self-adjoint
//! composite map adjoint(forward(.)), b = adjoint(y), and C the dual-norm
//! ball of radius lambda. Each iteration needs two applications of K, one
//! spectral prox of R, and one dual-ball projection (through the Moreau
//! identity inside the dual prox).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GdsError, Result};
use crate::measure::MeasurementSet;
use crate::spectral::SpectralNorm;

/// A generalized Dantzig selector instance.
#[derive(Debug, Clone)]
pub struct GdsProblem {
    pub norm: SpectralNorm,
    pub data: MeasurementSet,
    pub lambda: f64,
}

impl GdsProblem {
    pub fn new(norm: SpectralNorm, data: MeasurementSet, lambda: f64) -> Result<Self> {
        if norm.rows() != data.rows() || norm.cols() != data.cols() {
            return Err(GdsError::ShapeMismatch {
                expected_rows: norm.rows(),
                expected_cols: norm.cols(),
                rows: data.rows(),
                cols: data.cols(),
            });
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(GdsError::InvalidArgument(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        Ok(GdsProblem { norm, data, lambda })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Feasibility tolerance relative to the scale R*(adjoint(y)).
    pub feas_tol: f64,
    /// Relative objective-change tolerance over a 25-iteration window.
    pub opt_tol: f64,
    /// Fraction of the step-size product bound to use; must be in (0, 1].
    pub step_scale: f64,
    /// Record the primal-dual gap every this many iterations.
    pub log_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 50_000,
            feas_tol: 1e-7,
            opt_tol: 1e-8,
            step_scale: 0.95,
            log_every: 25,
        }
    }
}

const OBJ_WINDOW: usize = 25;

/// One row of the iteration log, sampled every `log_every` iterations.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IterationLogRow {
    pub iter: usize,
    pub objective: f64,
    pub residual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct GdsSolution {
    pub theta_hat: DMatrix<f64>,
    /// R(theta_hat).
    pub objective: f64,
    /// R*(residual map at theta_hat) - lambda; feasible iff <= tolerance.
    pub constraint_residual: f64,
    pub iterations: usize,
    /// (iteration, primal-dual gap surrogate) samples.
    pub primal_dual_gap_history: Vec<(usize, f64)>,
    /// Sampled (iter, objective, residual, gap) rows.
    pub iteration_log: Vec<IterationLogRow>,
    pub converged: bool,
}

/// Feasibility/objective report for a candidate matrix.
#[derive(Debug, Clone)]
pub struct SolutionCheck {
    pub feasible: bool,
    pub objective: f64,
    /// Constraint value R*(M(theta)).
    pub constraint_value: f64,
    /// constraint_value - lambda.
    pub residual: f64,
}

/// Evaluate both sides of the constraint and the objective at `theta`.
/// The feasibility flag uses the default solver feasibility tolerance,
/// relative to the constraint scale R*(adjoint(y)).
pub fn check_solution(problem: &GdsProblem, theta: &DMatrix<f64>) -> Result<SolutionCheck> {
    let m = problem.data.residual_map(theta)?;
    let value = problem.norm.dual_eval(&m)?;
    let objective = problem.norm.eval(theta)?;
    let scale = constraint_scale(problem)?;
    let tol = SolverOptions::default().feas_tol;
    Ok(SolutionCheck {
        feasible: value <= problem.lambda + tol * scale.max(1.0),
        objective,
        constraint_value: value,
        residual: value - problem.lambda,
    })
}

fn constraint_scale(problem: &GdsProblem) -> Result<f64> {
    // R*(M(0)) = R*(adjoint(y)): the natural size of the constraint map.
    let b = problem.data.adjoint(&problem.data.y)?;
    problem.norm.dual_eval(&b)
}

/// Solve the instance by Chambolle-Pock iterations. Deterministic given the
/// problem and options. Requires a gauge with a prox.
pub fn solve(problem: &GdsProblem, opts: &SolverOptions) -> Result<GdsSolution> {
    if !problem.norm.supports_prox() {
        return Err(GdsError::Unsupported(
            "the objective gauge has no prox; the solver needs one".into(),
        ));
    }
    if opts.step_scale <= 0.0 || opts.step_scale > 1.0 {
        return Err(GdsError::InvalidArgument(format!(
            "step_scale must be in (0, 1], got {}",
            opts.step_scale
        )));
    }
    let (d, p) = (problem.data.rows(), problem.data.cols());
    let dp = d * p;
    let op = problem.data.operator();
    let gram = op.transpose() * op;
    let b_mat = problem.data.adjoint(&problem.data.y)?;
    let b = DVector::from_column_slice(b_mat.as_slice());
    let feas_scale = problem.norm.dual_eval(&b_mat)?;
    let feas_tol_abs = opts.feas_tol * feas_scale.max(f64::MIN_POSITIVE);

    let norm_k = problem.data.operator_norm_estimate();
    if norm_k <= 0.0 {
        // Zero operator: the constraint reads R*(-b) = 0 <= lambda, so the
        // zero matrix is optimal.
        return Ok(GdsSolution {
            theta_hat: DMatrix::zeros(d, p),
            objective: 0.0,
            constraint_residual: -problem.lambda,
            iterations: 0,
            primal_dual_gap_history: vec![],
            iteration_log: vec![],
            converged: true,
        });
    }
    let tau = opts.step_scale / norm_k;
    let sigma = opts.step_scale / norm_k;

    let unvec = |v: &DVector<f64>| DMatrix::from_column_slice(d, p, v.as_slice());
    let vec_of = |m: &DMatrix<f64>| DVector::from_column_slice(m.as_slice());

    let mut theta = DVector::<f64>::zeros(dp);
    let mut u_curr = DVector::<f64>::zeros(dp); // gram * theta
    let mut u_prev = DVector::<f64>::zeros(dp);
    let mut dual = DVector::<f64>::zeros(dp);

    let mut gap_history = Vec::new();
    let mut iteration_log = Vec::new();
    let mut obj_window: Vec<f64> = Vec::with_capacity(OBJ_WINDOW + 1);
    let mut objective = 0.0;
    let mut residual = feas_scale - problem.lambda;
    let mut converged = false;
    let mut iterations = 0;

    for k in 0..opts.max_iter {
        iterations = k + 1;

        // Dual ascent + prox of the support function sigma*lambda*R, i.e.
        // shift by the projection onto the dual ball of radius sigma*lambda.
        let ubar = 2.0 * &u_curr - &u_prev;
        let w = &dual + sigma * (ubar - &b);
        let w_mat = unvec(&w);
        let dual_mat = if sigma * problem.lambda > 0.0 {
            problem.norm.prox(&w_mat, sigma * problem.lambda)?
        } else {
            w_mat
        };
        dual = vec_of(&dual_mat);

        // Primal prox step.
        let grad = &gram * &dual;
        let cand = unvec(&(&theta - tau * &grad));
        let theta_mat = problem.norm.prox(&cand, tau)?;
        let theta_next = vec_of(&theta_mat);
        objective = problem.norm.eval(&theta_mat)?;

        u_prev = std::mem::replace(&mut u_curr, &gram * &theta_next);
        theta = theta_next;

        let resid_mat = unvec(&(&u_curr - &b));
        let constraint_value = problem.norm.dual_eval(&resid_mat)?;
        residual = constraint_value - problem.lambda;

        obj_window.push(objective);
        if obj_window.len() > OBJ_WINDOW {
            obj_window.remove(0);
        }

        if opts.log_every > 0 && k % opts.log_every == 0 {
            // Dual objective at the normalized dual point gives a weak-duality
            // surrogate gap: R(theta) + lambda R(Y~) + <Y~, b>.
            let ky = unvec(&grad);
            let dual_feas = problem.norm.dual_eval(&ky)?.max(1.0);
            let r_dual = problem.norm.eval(&dual_mat)?;
            let gap = objective + (problem.lambda * r_dual + dual.dot(&b)) / dual_feas;
            gap_history.push((k, gap));
            iteration_log.push(IterationLogRow {
                iter: k,
                objective,
                residual,
                gap,
            });
        }

        if obj_window.len() == OBJ_WINDOW && residual <= feas_tol_abs {
            let max = obj_window.iter().cloned().fold(f64::MIN, f64::max);
            let min = obj_window.iter().cloned().fold(f64::MAX, f64::min);
            if max - min <= opts.opt_tol * max.abs().max(1e-30) {
                converged = true;
                break;
            }
        }
    }

    Ok(GdsSolution {
        theta_hat: unvec(&theta),
        objective,
        constraint_residual: residual,
        iterations,
        primal_dual_gap_history: gap_history,
        iteration_log,
        converged,
    })
}
