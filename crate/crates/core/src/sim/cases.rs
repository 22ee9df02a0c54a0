//! The eight simulation designs.

use serde::{Deserialize, Serialize};

use crate::engine::OutcomeModel;
use crate::error::{Error, Result};
use crate::model::ModelDims;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExposureLaw {
    Normal { variance: f64 },
    Bernoulli { p: f64 },
}

/// Data-generating design: `M_j = α_j X + η'Z + e_j` with `e ~ N(0, Σ_e)`,
/// `(Σ_e)_{ij} = ρ^{|i-j|}`, and either `Y = γX + β'M + θ'Z + ε` or
/// `P(Y = 1) = expit(γX + β'M + θ'Z)`. The data carry no intercepts; the
/// fitted regressions do.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub case_id: u8,
    pub model: OutcomeModel,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: f64,
    pub theta: Vec<f64>,
    /// Confounder loadings shared by every mediator.
    pub eta: Vec<f64>,
    pub exposure: ExposureLaw,
    pub error_corr: f64,
    pub n_total: usize,
}

impl CaseSpec {
    pub fn case(id: u8) -> Result<Self> {
        let normal = ExposureLaw::Normal { variance: 2.0 };
        let bernoulli = ExposureLaw::Bernoulli { p: 0.5 };
        let pad = |v: &[f64]| {
            let mut out = v.to_vec();
            out.resize(10, 0.0);
            out
        };
        let base = |model, alpha: Vec<f64>, beta: Vec<f64>, exposure, n_total| CaseSpec {
            case_id: id,
            model,
            alpha,
            beta,
            gamma: 0.5,
            theta: vec![0.5, 0.5],
            eta: vec![0.3, 0.3],
            exposure,
            error_corr: 0.15,
            n_total,
        };
        use OutcomeModel::{Linear, Logistic};
        let spec = match id {
            1 | 2 => base(
                Linear,
                vec![0.1, 0.0, 0.0, 0.35, 0.25],
                vec![0.15, 0.25, 0.0, 0.0, 0.15],
                if id == 1 { normal } else { bernoulli },
                30_000,
            ),
            3 | 4 => base(
                Logistic,
                vec![0.0, 0.25, 0.3, 0.0, 0.3],
                vec![0.0, 0.2, 0.0, 0.3, 0.25],
                if id == 3 { normal } else { bernoulli },
                30_000,
            ),
            5 => base(
                Linear,
                pad(&[0.1, 0.1, 0.1, 0.3]),
                pad(&[0.15, 0.15, 0.08, 0.0, 0.35]),
                bernoulli,
                5_000,
            ),
            6 => base(
                Linear,
                pad(&[0.06, 0.055, 0.06, 0.3]),
                pad(&[0.05, 0.06, 0.05, 0.0, 0.25]),
                normal,
                5_000,
            ),
            7 => base(
                Logistic,
                pad(&[0.2, 0.25, 0.25, 0.0, 0.3]),
                pad(&[0.125, 0.1, 0.1, 0.4]),
                bernoulli,
                5_000,
            ),
            8 => base(
                Logistic,
                pad(&[0.055, 0.06, 0.07, 0.0, 0.3]),
                pad(&[0.125, 0.115, 0.105, 0.4]),
                normal,
                5_000,
            ),
            other => return Err(Error::Config(format!("unknown case {other}, expected 1..=8"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_n_total(mut self, n_total: usize) -> Self {
        self.n_total = n_total;
        self
    }

    pub fn p(&self) -> usize {
        self.alpha.len()
    }

    pub fn q(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_empty() || self.beta.len() != self.alpha.len() || self.eta.len() != self.theta.len() {
            return Err(Error::Config("case coefficient vectors have inconsistent lengths".into()));
        }
        if !(self.error_corr.abs() < 1.0) {
            return Err(Error::Config("mediator error correlation must lie in (-1, 1)".into()));
        }
        match self.exposure {
            ExposureLaw::Normal { variance } if !(variance > 0.0) => {
                Err(Error::Config("exposure variance must be positive".into()))
            }
            ExposureLaw::Bernoulli { p } if !(p > 0.0 && p < 1.0) => {
                Err(Error::Config("exposure probability must lie in (0, 1)".into()))
            }
            _ => Ok(()),
        }
    }

    /// Fitted model shape, with intercepts in both regressions.
    pub fn dims(&self) -> ModelDims {
        ModelDims::new(self.p(), self.q()).with_intercepts(true, true)
    }

    pub fn products(&self) -> Vec<f64> {
        self.alpha.iter().zip(&self.beta).map(|(a, b)| a * b).collect()
    }

    /// Indices with `α_j β_j = 0`.
    pub fn null_set(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| self.alpha[j] * self.beta[j] == 0.0).collect()
    }

    /// Indices with `α_j β_j ≠ 0`.
    pub fn active_set(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| self.alpha[j] * self.beta[j] != 0.0).collect()
    }
}
