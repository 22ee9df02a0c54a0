//! Renewable least squares for the linear outcome regression and the `p`
//! mediator regressions.
//!
//! Each state keeps only the accumulated information matrix, the current
//! coefficients and the running residual sum of squares. With `Γ̃⁽⁰⁾ = 0`,
//! `J̃⁽⁰⁾ = 0` the update for batch `k` is
//!
//! ```text
//! J̃⁽ᵏ⁾ = J̃⁽ᵏ⁻¹⁾ + W'W
//! Γ̃⁽ᵏ⁾ = (J̃⁽ᵏ⁾)⁻¹ { J̃⁽ᵏ⁻¹⁾ Γ̃⁽ᵏ⁻¹⁾ + W'Y }
//! RSSₖ = RSSₖ₋₁ + Γ̃⁽ᵏ⁻¹⁾' J̃⁽ᵏ⁻¹⁾ Γ̃⁽ᵏ⁻¹⁾ + Y'Y − Γ̃⁽ᵏ⁾' J̃⁽ᵏ⁾ Γ̃⁽ᵏ⁾
//! φ̃⁽ᵏ⁾ = RSSₖ / (Nₖ − d)
//! ```
//!
//! which reproduces the full-data least-squares fit exactly (up to rounding)
//! for any partition of the data into batches. The mediator side uses the
//! same recursion with `S` in place of `W`; the carried quadratic term uses
//! the previous iterate `λ̃ⱼ⁽ᵏ⁻¹⁾` with `H̃⁽ᵏ⁻¹⁾`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::model::{BatchData, ModelDims};

/// Residual sums below this fraction of the accumulated `Y'Y` are rounding noise.
const EXACT_FIT_RATIO: f64 = 1e-13;

/// Renewable state of the linear outcome regression.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOutcomeState {
    dims: ModelDims,
    gamma: Vec<f64>,
    info: Matrix,
    rss: f64,
    yty: f64,
    n_total: u64,
    batch_count: u64,
}

/// Renewable state of the `p` mediator regressions, which share one design.
#[derive(Debug, Clone, PartialEq)]
pub struct MediatorState {
    dims: ModelDims,
    info: Matrix,
    lambda: Vec<Vec<f64>>,
    rss: Vec<f64>,
    omega_sq: Vec<f64>,
    n_total: u64,
    batch_count: u64,
}

/// Point estimates and standard errors feeding the mediation tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSummary {
    pub alpha_hat: Vec<f64>,
    pub alpha_se: Vec<f64>,
    pub beta_hat: Vec<f64>,
    pub beta_se: Vec<f64>,
    /// Direct-effect coefficient.
    pub gamma_hat: f64,
    pub gamma_se: f64,
    pub n_total: u64,
    pub batch_count: u64,
    /// Set when a residual variance came out as zero (saturated or exact fit).
    pub degenerate_fit: bool,
}

impl CoefficientSummary {
    pub fn p(&self) -> usize {
        self.alpha_hat.len()
    }

    pub fn products(&self) -> Vec<f64> {
        self.alpha_hat
            .iter()
            .zip(&self.beta_hat)
            .map(|(a, b)| a * b)
            .collect()
    }
}

/// Zero-initialized outcome and mediator states.
pub fn init_linear(dims: ModelDims) -> Result<(LinearOutcomeState, MediatorState)> {
    Ok((LinearOutcomeState::new(dims)?, MediatorState::new(dims)?))
}

impl LinearOutcomeState {
    pub fn new(dims: ModelDims) -> Result<Self> {
        dims.validate()?;
        let d = dims.outcome_dim();
        Ok(LinearOutcomeState {
            dims,
            gamma: vec![0.0; d],
            info: Matrix::zeros(d, d),
            rss: 0.0,
            yty: 0.0,
            n_total: 0,
            batch_count: 0,
        })
    }

    pub(crate) fn from_parts(
        dims: ModelDims,
        gamma: Vec<f64>,
        info: Matrix,
        rss: f64,
        yty: f64,
        n_total: u64,
        batch_count: u64,
    ) -> Result<Self> {
        dims.validate()?;
        let d = dims.outcome_dim();
        if gamma.len() != d || info.rows() != d || info.cols() != d {
            return Err(Error::Integrity("outcome state dimensions disagree with the model".into()));
        }
        Ok(LinearOutcomeState {
            dims,
            gamma,
            info,
            rss,
            yty,
            n_total,
            batch_count,
        })
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    /// Current coefficients `Γ̃⁽ᵏ⁾`.
    pub fn gamma_tilde(&self) -> &[f64] {
        &self.gamma
    }

    /// Accumulated negative Hessian `J̃⁽ᵏ⁾ = Σ W'W`.
    pub fn j_tilde(&self) -> &Matrix {
        &self.info
    }

    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    pub fn batch_count(&self) -> u64 {
        self.batch_count
    }

    pub fn residual_sum_of_squares(&self) -> f64 {
        self.rss
    }

    /// Accumulated `Y'Y`.
    pub fn yty(&self) -> f64 {
        self.yty
    }

    /// Renewable error variance `φ̃⁽ᵏ⁾`, available once `N_k > d_out`.
    pub fn phi_tilde(&self) -> Option<f64> {
        let d = self.dims.outcome_dim() as u64;
        if self.n_total <= d {
            return None;
        }
        Some(floored_rss(self.rss, self.yty) / (self.n_total - d) as f64)
    }

    /// Folds one batch into the state. On error the state is left untouched.
    pub fn update(&mut self, batch: &BatchData) -> Result<()> {
        batch.check_dims(&self.dims)?;
        let info = self.info.add(&batch.w.gram());
        let chol = Cholesky::factor(&info, "outcome")?;
        let mut rhs = self.info.mul_vec(&self.gamma);
        for (r, v) in rhs.iter_mut().zip(batch.w.t_mul_vec(&batch.y)) {
            *r += v;
        }
        let gamma = chol.solve(&rhs);
        let batch_yty = dot(&batch.y, &batch.y);
        let rss = self.rss + self.info.quad_form(&self.gamma) + batch_yty - info.quad_form(&gamma);

        self.info = info;
        self.gamma = gamma;
        self.rss = rss.max(0.0);
        self.yty += batch_yty;
        self.n_total += batch.len() as u64;
        self.batch_count += 1;
        Ok(())
    }

    /// Consuming form of [`update`](Self::update).
    pub fn updated(mut self, batch: &BatchData) -> Result<Self> {
        self.update(batch)?;
        Ok(self)
    }

    /// Variance matrix `φ̃ (J̃⁽ᵏ⁾)⁻¹`.
    pub fn covariance(&self) -> Result<Matrix> {
        let phi = self.phi_tilde().ok_or_else(|| not_ready("outcome", self.n_total, self.dims.outcome_dim()))?;
        let inv = Cholesky::factor(&self.info, "outcome")?.inverse();
        let d = inv.rows();
        let scaled: Vec<f64> = inv.as_slice().iter().map(|v| v * phi).collect();
        Matrix::from_row_major(d, d, scaled)
    }
}

impl MediatorState {
    pub fn new(dims: ModelDims) -> Result<Self> {
        dims.validate()?;
        let d = dims.mediator_dim();
        Ok(MediatorState {
            dims,
            info: Matrix::zeros(d, d),
            lambda: vec![vec![0.0; d]; dims.p],
            rss: vec![0.0; dims.p],
            omega_sq: vec![0.0; dims.p],
            n_total: 0,
            batch_count: 0,
        })
    }

    pub(crate) fn from_parts(
        dims: ModelDims,
        info: Matrix,
        lambda: Vec<Vec<f64>>,
        rss: Vec<f64>,
        omega_sq: Vec<f64>,
        n_total: u64,
        batch_count: u64,
    ) -> Result<Self> {
        dims.validate()?;
        let d = dims.mediator_dim();
        let ok = info.rows() == d
            && info.cols() == d
            && lambda.len() == dims.p
            && lambda.iter().all(|l| l.len() == d)
            && rss.len() == dims.p
            && omega_sq.len() == dims.p;
        if !ok {
            return Err(Error::Integrity("mediator state dimensions disagree with the model".into()));
        }
        Ok(MediatorState {
            dims,
            info,
            lambda,
            rss,
            omega_sq,
            n_total,
            batch_count,
        })
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    /// Accumulated `H̃⁽ᵏ⁾ = Σ S'S`, shared by every mediator.
    pub fn h_tilde(&self) -> &Matrix {
        &self.info
    }

    /// Coefficients `λ̃ⱼ⁽ᵏ⁾`, one vector per mediator.
    pub fn lambda_tilde(&self) -> &[Vec<f64>] {
        &self.lambda
    }

    pub fn residual_sums_of_squares(&self) -> &[f64] {
        &self.rss
    }

    /// Accumulated `ωⱼ'ωⱼ`.
    pub fn omega_sq(&self) -> &[f64] {
        &self.omega_sq
    }

    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    pub fn batch_count(&self) -> u64 {
        self.batch_count
    }

    /// Renewable residual variances `φ̃ⱼ⁽ᵏ⁾`, available once `N_k > d_med`.
    pub fn varphi_tilde(&self) -> Option<Vec<f64>> {
        let d = self.dims.mediator_dim() as u64;
        if self.n_total <= d {
            return None;
        }
        let denom = (self.n_total - d) as f64;
        Some(
            self.rss
                .iter()
                .zip(&self.omega_sq)
                .map(|(rss, w2)| floored_rss(*rss, *w2) / denom)
                .collect(),
        )
    }

    /// Folds one batch into every mediator regression with a single factorization.
    pub fn update(&mut self, batch: &BatchData) -> Result<()> {
        batch.check_dims(&self.dims)?;
        let p = self.dims.p;
        let d = self.dims.mediator_dim();
        let info = self.info.add(&batch.s.gram());
        let chol = Cholesky::factor(&info, "mediator")?;

        // S'M, d × p, and the per-column squared norms of M.
        let mut s_m = vec![0.0; d * p];
        let mut batch_sq = vec![0.0; p];
        for r in 0..batch.len() {
            let s_row = batch.s.row(r);
            let m_row = batch.m.row(r);
            for (j, &mv) in m_row.iter().enumerate() {
                batch_sq[j] += mv * mv;
                for (i, &sv) in s_row.iter().enumerate() {
                    s_m[i * p + j] += sv * mv;
                }
            }
        }

        let mut lambda = Vec::with_capacity(p);
        let mut rss = Vec::with_capacity(p);
        for j in 0..p {
            let prev = &self.lambda[j];
            let mut rhs = self.info.mul_vec(prev);
            for (i, r) in rhs.iter_mut().enumerate() {
                *r += s_m[i * p + j];
            }
            let next = chol.solve(&rhs);
            let r = self.rss[j] + self.info.quad_form(prev) + batch_sq[j] - info.quad_form(&next);
            rss.push(r.max(0.0));
            lambda.push(next);
        }

        self.info = info;
        self.lambda = lambda;
        self.rss = rss;
        for (acc, v) in self.omega_sq.iter_mut().zip(batch_sq) {
            *acc += v;
        }
        self.n_total += batch.len() as u64;
        self.batch_count += 1;
        Ok(())
    }

    pub fn updated(mut self, batch: &BatchData) -> Result<Self> {
        self.update(batch)?;
        Ok(self)
    }

    /// `(α̃, σ̃_α, any zero residual variance)`.
    pub fn alpha_summary(&self) -> Result<(Vec<f64>, Vec<f64>, bool)> {
        let varphi = self
            .varphi_tilde()
            .ok_or_else(|| not_ready("mediator", self.n_total, self.dims.mediator_dim()))?;
        let slot = self.dims.alpha_slot();
        let inv_aa = Cholesky::factor(&self.info, "mediator")?.inverse_diagonal_entry(slot);
        let alpha = self.lambda.iter().map(|l| l[slot]).collect();
        let se = varphi.iter().map(|v| (v * inv_aa).sqrt()).collect();
        Ok((alpha, se, varphi.contains(&0.0)))
    }
}

/// Estimates and standard errors from the linear outcome and mediator states.
pub fn summarize_linear(out: &LinearOutcomeState, med: &MediatorState) -> Result<CoefficientSummary> {
    check_in_step(out.dims(), out.n_total(), med)?;
    let dims = out.dims;
    let phi = out
        .phi_tilde()
        .ok_or_else(|| not_ready("outcome", out.n_total, dims.outcome_dim()))?;
    let chol = Cholesky::factor(&out.info, "outcome")?;
    let se = |slot: usize| (phi * chol.inverse_diagonal_entry(slot)).sqrt();

    let (alpha_hat, alpha_se, mediator_degenerate) = med.alpha_summary()?;
    let beta_hat = (0..dims.p).map(|j| out.gamma[dims.mediator_slot(j)]).collect();
    let beta_se = (0..dims.p).map(|j| se(dims.mediator_slot(j))).collect();
    let degenerate_fit = phi == 0.0 || mediator_degenerate;
    if degenerate_fit {
        warn!("residual variance is zero (exact fit); standard errors are degenerate");
    }
    Ok(CoefficientSummary {
        alpha_hat,
        alpha_se,
        beta_hat,
        beta_se,
        gamma_hat: out.gamma[dims.exposure_slot()],
        gamma_se: se(dims.exposure_slot()),
        n_total: out.n_total,
        batch_count: out.batch_count,
        degenerate_fit,
    })
}

pub(crate) fn check_in_step(dims: &ModelDims, n_total: u64, med: &MediatorState) -> Result<()> {
    let md = med.dims();
    let same_shape = dims.p == md.p && dims.q == md.q && dims.intercept_mediator == md.intercept_mediator;
    if !same_shape || n_total != med.n_total() {
        return Err(Error::Input(format!(
            "outcome and mediator states are out of step (N = {n_total} vs {})",
            med.n_total()
        )));
    }
    Ok(())
}

pub(crate) fn not_ready(side: &str, n: u64, d: usize) -> Error {
    Error::NotReady(format!(
        "{side} regression has N = {n} observations, needs more than {d} to estimate its variance"
    ))
}

fn floored_rss(rss: f64, total_sq: f64) -> f64 {
    if rss <= EXACT_FIT_RATIO * total_sq {
        0.0
    } else {
        rss
    }
}
