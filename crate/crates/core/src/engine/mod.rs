//! Stream-level plumbing: configuration, the combined outcome + mediator state,
//! CSV ingestion, checkpoints and reports.

pub mod checkpoint;
pub mod ingest;
pub mod report;

use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linear::{summarize_linear, CoefficientSummary, LinearOutcomeState, MediatorState};
use crate::logistic::{summarize_logistic, LogisticOutcomeState, NewtonSettings};
use crate::mediation::{
    decompose_effects, select_mediators, test_all, threshold_lambda, EffectDecomposition, EffectScale,
    MediatorTestResult, SelectionSets, TestConfig,
};
use crate::model::{BatchData, ModelDims};

pub use checkpoint::{load_checkpoint, save_checkpoint, FORMAT_VERSION};
pub use ingest::{parse_batch, read_batch, read_scaling, RawBatch};
pub use report::{render, ReportFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeModel {
    Linear,
    Logistic,
}

impl fmt::Display for OutcomeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutcomeModel::Linear => "linear",
            OutcomeModel::Logistic => "logistic",
        })
    }
}

impl FromStr for OutcomeModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(OutcomeModel::Linear),
            "logistic" => Ok(OutcomeModel::Logistic),
            other => Err(Error::Config(format!("unknown model '{other}', expected linear or logistic"))),
        }
    }
}

/// Centering and scaling for one raw column: `(v - mean) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub mean: f64,
    pub scale: f64,
}

impl ColumnScaling {
    pub const IDENTITY: ColumnScaling = ColumnScaling { mean: 0.0, scale: 1.0 };
}

/// Standardization of the raw columns `Y, X, M_1..M_p, Z_1..Z_q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Standardization {
    None,
    /// One entry per raw column.
    Fixed(Vec<ColumnScaling>),
    /// Computed from the first batch and then frozen.
    FromFirstBatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub model: OutcomeModel,
    pub dims: ModelDims,
    pub standardization: Standardization,
    pub tests: TestConfig,
    pub newton: NewtonSettings,
}

impl StreamConfig {
    pub fn new(model: OutcomeModel, dims: ModelDims) -> Self {
        let dims = match model {
            OutcomeModel::Linear => dims,
            OutcomeModel::Logistic => ModelDims {
                intercept_outcome: true,
                ..dims
            },
        };
        StreamConfig {
            model,
            dims,
            standardization: Standardization::None,
            tests: TestConfig::default(),
            newton: NewtonSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        self.tests.validate()?;
        self.newton.validate()?;
        if self.model == OutcomeModel::Logistic && !self.dims.intercept_outcome {
            return Err(Error::Config("the logistic outcome model always carries an intercept".into()));
        }
        if let Standardization::Fixed(cols) = &self.standardization {
            let width = self.dims.raw_width();
            if cols.len() != width {
                return Err(Error::Config(format!(
                    "standardization lists {} columns, expected {width}",
                    cols.len()
                )));
            }
            if let Some(i) = cols
                .iter()
                .position(|c| !(c.scale > 0.0 && c.scale.is_finite() && c.mean.is_finite()))
            {
                return Err(Error::Config(format!(
                    "standardization for column {} needs a finite mean and a positive scale",
                    column_names(&self.dims)[i]
                )));
            }
            if self.model == OutcomeModel::Logistic && cols[0] != ColumnScaling::IDENTITY {
                return Err(Error::Config("a binary outcome cannot be standardized".into()));
            }
        }
        Ok(())
    }
}

/// Canonical header `Y, X, M1..Mp, Z1..Zq`.
pub fn column_names(dims: &ModelDims) -> Vec<String> {
    let mut names = vec!["Y".to_string(), "X".to_string()];
    names.extend((1..=dims.p).map(|j| format!("M{j}")));
    names.extend((1..=dims.q).map(|j| format!("Z{j}")));
    names
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum OutcomeState {
    Linear(LinearOutcomeState),
    Logistic(LogisticOutcomeState),
}

/// Everything a report needs, computed from the state without mutating it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    pub model: OutcomeModel,
    pub batches: u64,
    pub n_total: u64,
    pub lambda: f64,
    pub delta: f64,
    pub contrast: (f64, f64),
    pub summary: CoefficientSummary,
    pub tests: Vec<MediatorTestResult>,
    pub selected: SelectionSets,
    pub effects: EffectDecomposition,
}

/// One mediation data stream: the outcome and mediator states plus configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MediationStream {
    config: StreamConfig,
    outcome: OutcomeState,
    mediator: MediatorState,
    last_digest: Option<[u8; 32]>,
}

impl MediationStream {
    pub fn new(config: StreamConfig) -> Result<Self> {
        config.validate()?;
        let dims = config.dims;
        let outcome = match config.model {
            OutcomeModel::Linear => OutcomeState::Linear(LinearOutcomeState::new(dims)?),
            OutcomeModel::Logistic => OutcomeState::Logistic(LogisticOutcomeState::new(dims, config.newton)?),
        };
        Ok(MediationStream {
            mediator: MediatorState::new(dims)?,
            config,
            outcome,
            last_digest: None,
        })
    }

    pub(crate) fn from_parts(
        config: StreamConfig,
        outcome: OutcomeState,
        mediator: MediatorState,
        last_digest: Option<[u8; 32]>,
    ) -> Result<Self> {
        config.validate()?;
        let consistent = match &outcome {
            OutcomeState::Linear(s) => {
                config.model == OutcomeModel::Linear
                    && *s.dims() == config.dims
                    && s.n_total() == mediator.n_total()
                    && s.batch_count() == mediator.batch_count()
            }
            OutcomeState::Logistic(s) => {
                config.model == OutcomeModel::Logistic
                    && *s.dims() == config.dims
                    && s.n_total() == mediator.n_total()
                    && s.batch_count() == mediator.batch_count()
            }
        };
        if !consistent || *mediator.dims() != config.dims {
            return Err(Error::Integrity("stored states disagree with the stored configuration".into()));
        }
        Ok(MediationStream {
            config,
            outcome,
            mediator,
            last_digest,
        })
    }

    pub fn config(&self) -> &StreamConfig {
        &self.config
    }

    pub fn dims(&self) -> &ModelDims {
        &self.config.dims
    }

    pub fn n_total(&self) -> u64 {
        self.mediator.n_total()
    }

    pub fn batch_count(&self) -> u64 {
        self.mediator.batch_count()
    }

    pub fn mediator(&self) -> &MediatorState {
        &self.mediator
    }

    pub fn linear_outcome(&self) -> Option<&LinearOutcomeState> {
        match &self.outcome {
            OutcomeState::Linear(s) => Some(s),
            OutcomeState::Logistic(_) => None,
        }
    }

    pub fn logistic_outcome(&self) -> Option<&LogisticOutcomeState> {
        match &self.outcome {
            OutcomeState::Logistic(s) => Some(s),
            OutcomeState::Linear(_) => None,
        }
    }

    pub(crate) fn outcome_state(&self) -> &OutcomeState {
        &self.outcome
    }

    pub(crate) fn last_digest(&self) -> Option<&[u8; 32]> {
        self.last_digest.as_ref()
    }

    /// Current outcome coefficient vector `Γ̃`.
    pub fn gamma_tilde(&self) -> &[f64] {
        match &self.outcome {
            OutcomeState::Linear(s) => s.gamma_tilde(),
            OutcomeState::Logistic(s) => s.gamma_tilde(),
        }
    }

    /// Replaces the test settings used by [`MediationStream::analyze`].
    pub fn set_tests(&mut self, tests: TestConfig) -> Result<()> {
        tests.validate()?;
        self.config.tests = tests;
        Ok(())
    }

    /// Folds one prepared batch into both regressions. Either both states
    /// advance or neither does.
    pub fn update(&mut self, batch: &BatchData) -> Result<()> {
        let digest = batch_digest(batch);
        if self.last_digest == Some(digest) {
            return Err(Error::Input(format!(
                "batch is identical to batch {} already applied; re-sending a batch is not allowed",
                self.batch_count()
            )));
        }
        let outcome = match &self.outcome {
            OutcomeState::Linear(s) => OutcomeState::Linear(s.clone().updated(batch)?),
            OutcomeState::Logistic(s) => OutcomeState::Logistic(s.clone().updated(batch)?),
        };
        let mediator = self.mediator.clone().updated(batch)?;
        self.outcome = outcome;
        self.mediator = mediator;
        self.last_digest = Some(digest);
        Ok(())
    }

    /// Standardizes raw rows and folds them in.
    pub fn update_raw(&mut self, raw: &RawBatch) -> Result<()> {
        let mut config = self.config.clone();
        if config.standardization == Standardization::FromFirstBatch {
            let cols = first_batch_scaling(&config, raw)?;
            warn!(
                "standardization parameters computed from the first batch ({} rows) and frozen for the rest of the stream",
                raw.n
            );
            config.standardization = Standardization::Fixed(cols);
        }
        let batch = prepare_batch(&config, raw)?;
        self.update(&batch)?;
        self.config = config;
        Ok(())
    }

    /// Point estimates and standard errors.
    pub fn summary(&self) -> Result<CoefficientSummary> {
        match &self.outcome {
            OutcomeState::Linear(s) => summarize_linear(s, &self.mediator),
            OutcomeState::Logistic(s) => summarize_logistic(s, &self.mediator),
        }
    }

    /// Runs every test and the effect decomposition with the configured settings.
    pub fn analyze(&self) -> Result<Analysis> {
        let tests = self.config.tests;
        let summary = self.summary()?;
        let results = test_all(&summary, &tests)?;
        let selected = select_mediators(&results, &tests);
        let scale = match self.config.model {
            OutcomeModel::Linear => EffectScale::Linear,
            OutcomeModel::Logistic => EffectScale::LogOdds,
        };
        let effects = decompose_effects(&summary, &tests, scale)?;
        Ok(Analysis {
            model: self.config.model,
            batches: self.batch_count(),
            n_total: self.n_total(),
            lambda: threshold_lambda(self.n_total())?,
            delta: tests.delta,
            contrast: tests.contrast,
            summary,
            tests: results,
            selected,
            effects,
        })
    }
}

/// Applies the configured standardization and builds the design matrices.
pub fn prepare_batch(config: &StreamConfig, raw: &RawBatch) -> Result<BatchData> {
    let dims = &config.dims;
    match &config.standardization {
        Standardization::Fixed(cols) => {
            let width = dims.raw_width();
            let mut flat = raw.values.clone();
            for row in flat.chunks_exact_mut(width) {
                for (v, c) in row.iter_mut().zip(cols) {
                    *v = (*v - c.mean) / c.scale;
                }
            }
            BatchData::from_flat(dims, raw.n, &flat)
        }
        Standardization::None | Standardization::FromFirstBatch => BatchData::from_flat(dims, raw.n, &raw.values),
    }
}

fn first_batch_scaling(config: &StreamConfig, raw: &RawBatch) -> Result<Vec<ColumnScaling>> {
    let width = config.dims.raw_width();
    if raw.n < 2 {
        return Err(Error::Input("standardizing from the first batch needs at least two rows".into()));
    }
    let names = column_names(&config.dims);
    let n = raw.n as f64;
    (0..width)
        .map(|c| {
            if c == 0 && config.model == OutcomeModel::Logistic {
                return Ok(ColumnScaling::IDENTITY);
            }
            let col = raw.values.iter().skip(c).step_by(width);
            let mean = col.clone().sum::<f64>() / n;
            let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            if !(var > 0.0) {
                return Err(Error::Input(format!(
                    "column {} is constant in the first batch and cannot be standardized",
                    names[c]
                )));
            }
            Ok(ColumnScaling {
                mean,
                scale: var.sqrt(),
            })
        })
        .collect()
}

fn batch_digest(batch: &BatchData) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((batch.len() as u64).to_le_bytes());
    for v in batch.y.iter().chain(batch.w.as_slice()).chain(batch.m.as_slice()) {
        h.update(v.to_le_bytes());
    }
    h.finalize().into()
}
