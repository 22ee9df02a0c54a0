//! Renewable estimation of the logistic outcome regression.
//!
//! Batch `k` updates the coefficients by solving the incremental estimating
//! equation
//!
//! ```text
//! f(Γ) = J̃⁽ᵏ⁻¹⁾ (Γ̃⁽ᵏ⁻¹⁾ − Γ) + U⁽ᵏ⁾(Γ) = 0
//! ```
//!
//! where `U⁽ᵏ⁾` is the batch score and `J̃⁽ᵏ⁻¹⁾` the sum of earlier batch
//! Hessians, each evaluated at the estimate current when its batch was
//! absorbed. Newton's method is warm-started at `Γ̃⁽ᵏ⁻¹⁾`; its Jacobian is
//! `−(J̃⁽ᵏ⁻¹⁾ + J⁽ᵏ⁾(Γ))`. The mediator regressions are linear and reuse
//! [`MediatorState`](crate::linear::MediatorState).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::linear::{check_in_step, not_ready, CoefficientSummary, MediatorState};
use crate::model::{BatchData, ModelDims};

/// Linear predictors beyond this size mean the MLE is running off to infinity.
const SEPARATION_ETA: f64 = 50.0;
const MAX_HALVINGS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonSettings {
    /// Convergence threshold on `‖f(Γ)‖∞ / N_k`.
    pub tol: f64,
    pub max_iter: usize,
    pub step_halving: bool,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tol: 1e-10,
            max_iter: 50,
            step_halving: true,
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Config(format!(
                "Newton settings need tol > 0 and max_iter >= 1 (got tol={}, max_iter={})",
                self.tol, self.max_iter
            )));
        }
        Ok(())
    }
}

/// Renewable state of the logistic outcome regression. The intercept is always
/// part of the design.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticOutcomeState {
    dims: ModelDims,
    gamma: Vec<f64>,
    info: Matrix,
    n_total: u64,
    batch_count: u64,
    newton: NewtonSettings,
    last_iterations: usize,
}

/// Zero-initialized logistic state; forces the outcome intercept on.
pub fn init_logistic(dims: ModelDims) -> Result<LogisticOutcomeState> {
    LogisticOutcomeState::new(dims, NewtonSettings::default())
}

impl LogisticOutcomeState {
    pub fn new(dims: ModelDims, newton: NewtonSettings) -> Result<Self> {
        dims.validate()?;
        newton.validate()?;
        let dims = ModelDims {
            intercept_outcome: true,
            ..dims
        };
        let d = dims.outcome_dim();
        Ok(LogisticOutcomeState {
            dims,
            gamma: vec![0.0; d],
            info: Matrix::zeros(d, d),
            n_total: 0,
            batch_count: 0,
            newton,
            last_iterations: 0,
        })
    }

    pub(crate) fn from_parts(
        dims: ModelDims,
        gamma: Vec<f64>,
        info: Matrix,
        n_total: u64,
        batch_count: u64,
        newton: NewtonSettings,
        last_iterations: usize,
    ) -> Result<Self> {
        let mut state = LogisticOutcomeState::new(dims, newton)?;
        let d = state.dims.outcome_dim();
        if !dims.intercept_outcome || gamma.len() != d || info.rows() != d || info.cols() != d {
            return Err(Error::Integrity("logistic state dimensions disagree with the model".into()));
        }
        state.gamma = gamma;
        state.info = info;
        state.n_total = n_total;
        state.batch_count = batch_count;
        state.last_iterations = last_iterations;
        Ok(state)
    }

    /// Model dims with the mandatory intercept applied.
    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn gamma_tilde(&self) -> &[f64] {
        &self.gamma
    }

    /// Accumulated Hessian `J̃⁽ᵏ⁾`.
    pub fn j_tilde(&self) -> &Matrix {
        &self.info
    }

    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    pub fn batch_count(&self) -> u64 {
        self.batch_count
    }

    pub fn newton(&self) -> &NewtonSettings {
        &self.newton
    }

    /// Newton iterations used by the most recent update.
    pub fn last_iterations(&self) -> usize {
        self.last_iterations
    }

    /// `J̃⁽ᵏ⁻¹⁾(Γ̃⁽ᵏ⁻¹⁾ − Γ) + U(Γ)` for a candidate `Γ` against this state as the previous step.
    pub fn estimating_equation(&self, batch: &BatchData, gamma: &[f64]) -> Vec<f64> {
        let diff: Vec<f64> = self.gamma.iter().zip(gamma).map(|(a, b)| a - b).collect();
        let mut f = self.info.mul_vec(&diff);
        for (fi, ui) in f.iter_mut().zip(batch_score(batch, gamma)) {
            *fi += ui;
        }
        f
    }

    /// Folds one batch in. On error the state is left untouched.
    pub fn update(&mut self, batch: &BatchData) -> Result<()> {
        batch.check_dims(&self.dims)?;
        if let Some(i) = batch.y.iter().position(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::Input(format!(
                "logistic outcome must be 0 or 1, row {} has {}",
                i + 1,
                batch.y[i]
            )));
        }
        let n_total = self.n_total + batch.len() as u64;
        let scale = n_total as f64;
        let settings = self.newton;

        let mut gamma = self.gamma.clone();
        let mut f = self.estimating_equation(batch, &gamma);
        let mut iterations = 0;
        loop {
            let residual = inf_norm(&f) / scale;
            if residual <= settings.tol {
                break;
            }
            if iterations == settings.max_iter {
                return Err(Error::NoConvergence { iterations, residual });
            }
            iterations += 1;

            let jacobian = self.info.add(&batch_hessian(batch, &gamma));
            let step = Cholesky::factor(&jacobian, "logistic outcome")?.solve(&f);
            let merit = l2_norm(&f);
            let mut t = 1.0;
            let mut halvings = 0;
            let (next, next_f) = loop {
                let candidate: Vec<f64> = gamma.iter().zip(&step).map(|(g, s)| g + t * s).collect();
                let candidate_f = self.estimating_equation(batch, &candidate);
                let cf = l2_norm(&candidate_f);
                if !settings.step_halving || (cf.is_finite() && cf < merit) {
                    break (candidate, candidate_f);
                }
                if halvings == MAX_HALVINGS {
                    return Err(Error::NoConvergence {
                        iterations,
                        residual: inf_norm(&f) / scale,
                    });
                }
                halvings += 1;
                t *= 0.5;
            };
            let max_eta = max_abs_linear_predictor(batch, &next);
            if max_eta > SEPARATION_ETA {
                return Err(Error::Separation { max_eta });
            }
            gamma = next;
            f = next_f;
        }

        let info = self.info.add(&batch_hessian(batch, &gamma));
        self.gamma = gamma;
        self.info = info;
        self.n_total = n_total;
        self.batch_count += 1;
        self.last_iterations = iterations;
        Ok(())
    }

    pub fn updated(mut self, batch: &BatchData) -> Result<Self> {
        self.update(batch)?;
        Ok(self)
    }

    /// Variance matrix `(J̃⁽ᵏ⁾)⁻¹`.
    pub fn covariance(&self) -> Result<Matrix> {
        self.ready()?;
        Ok(Cholesky::factor(&self.info, "logistic outcome")?.inverse())
    }

    fn ready(&self) -> Result<()> {
        let d = self.dims.outcome_dim();
        if self.n_total <= d as u64 {
            return Err(not_ready("logistic outcome", self.n_total, d));
        }
        Ok(())
    }
}

/// Estimates and standard errors from the logistic outcome state and the mediator state.
pub fn summarize_logistic(out: &LogisticOutcomeState, med: &MediatorState) -> Result<CoefficientSummary> {
    let dims = out.dims;
    check_in_step(&dims, out.n_total, med)?;
    out.ready()?;
    let chol = Cholesky::factor(&out.info, "logistic outcome").map_err(|e| match e {
        Error::RankDeficient { condition, .. } => Error::NotReady(format!(
            "accumulated logistic information is singular (condition estimate {condition:.3e})"
        )),
        other => other,
    })?;
    let se = |slot: usize| chol.inverse_diagonal_entry(slot).sqrt();
    let (alpha_hat, alpha_se, degenerate_fit) = med.alpha_summary()?;
    Ok(CoefficientSummary {
        alpha_hat,
        alpha_se,
        beta_hat: (0..dims.p).map(|j| out.gamma[dims.mediator_slot(j)]).collect(),
        beta_se: (0..dims.p).map(|j| se(dims.mediator_slot(j))).collect(),
        gamma_hat: out.gamma[dims.exposure_slot()],
        gamma_se: se(dims.exposure_slot()),
        n_total: out.n_total,
        batch_count: out.batch_count,
        degenerate_fit,
    })
}

/// Numerically stable logistic function.
pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `μ(1 − μ)` without cancellation in the tails.
fn logistic_weight(eta: f64) -> f64 {
    let e = (-eta.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// Batch score `Σ wᵢ (yᵢ − μᵢ)`.
pub fn batch_score(batch: &BatchData, gamma: &[f64]) -> Vec<f64> {
    let resid: Vec<f64> = (0..batch.len())
        .map(|r| batch.y[r] - sigmoid(dot_row(batch, r, gamma)))
        .collect();
    batch.w.t_mul_vec(&resid)
}

/// Batch negative Hessian `Σ μᵢ(1 − μᵢ) wᵢ wᵢ'`.
pub fn batch_hessian(batch: &BatchData, gamma: &[f64]) -> Matrix {
    let weights: Vec<f64> = (0..batch.len())
        .map(|r| logistic_weight(dot_row(batch, r, gamma)))
        .collect();
    batch.w.weighted_gram(&weights)
}

fn dot_row(batch: &BatchData, r: usize, gamma: &[f64]) -> f64 {
    crate::linalg::dot(batch.w.row(r), gamma)
}

fn max_abs_linear_predictor(batch: &BatchData, gamma: &[f64]) -> f64 {
    (0..batch.len()).fold(0.0, |m, r| m.max(dot_row(batch, r, gamma).abs()))
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
