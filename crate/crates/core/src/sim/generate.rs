//! Reproducible data streams for a [`CaseSpec`].
//!
//! Replication `r` under seed `s` draws from ChaCha8 seeded with `s` on stream
//! `r`, so replications are independent of each other and of the order in
//! which they run. Normal variates use the ziggurat sampler of `rand_distr`.
//! Each observation consumes, in order: `X`, `Z_1..Z_q`, `p` standard normals
//! mapped through the Cholesky factor of `Σ_e`, then the outcome noise
//! (a normal for the linear model, a uniform for the logistic one).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::cases::{CaseSpec, ExposureLaw};
use crate::engine::{OutcomeModel, RawBatch};
use crate::error::{Error, Result};
use crate::logistic::sigmoid;
use crate::model::BatchData;

/// How the `N` observations are cut into `k` batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BatchSplit {
    /// All batches the same size; `N` must be divisible by `k`.
    #[default]
    Equal,
    /// Sizes differ by at most one; the first `N mod k` batches get the extra row.
    NearEqual,
}

/// Lower Cholesky factor of `(Σ_e)_{ij} = ρ^{|i-j|}`, row-major.
pub fn error_factor(p: usize, rho: f64) -> Result<Vec<f64>> {
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = rho.powi((i - j) as i32);
            for t in 0..j {
                s -= l[i * p + t] * l[j * p + t];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::Config("mediator error covariance is not positive definite".into()));
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    Ok(l)
}

/// All `N` raw rows `[Y, X, M.., Z..]` of replication `rep`.
pub fn generate_rows(spec: &CaseSpec, seed: u64, rep: u64) -> Result<RawBatch> {
    spec.validate()?;
    let factor = error_factor(spec.p(), spec.error_corr)?;
    Ok(generate_with_factor(spec, &factor, seed, rep))
}

pub(crate) fn generate_with_factor(spec: &CaseSpec, factor: &[f64], seed: u64, rep: u64) -> RawBatch {
    let (p, q, n) = (spec.p(), spec.q(), spec.n_total);
    let width = 2 + p + q;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);

    let mut values = Vec::with_capacity(n * width);
    let mut z = vec![0.0; q];
    let mut u = vec![0.0; p];
    let mut m = vec![0.0; p];
    for _ in 0..n {
        let x = match spec.exposure {
            ExposureLaw::Normal { variance } => variance.sqrt() * rng.sample::<f64, _>(StandardNormal),
            ExposureLaw::Bernoulli { p } => (rng.random::<f64>() < p) as u8 as f64,
        };
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for v in u.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let eta_z: f64 = spec.eta.iter().zip(&z).map(|(a, b)| a * b).sum();
        for j in 0..p {
            let e: f64 = (0..=j).map(|t| factor[j * p + t] * u[t]).sum();
            m[j] = spec.alpha[j] * x + eta_z + e;
        }
        let lin = spec.gamma * x
            + spec.beta.iter().zip(&m).map(|(a, b)| a * b).sum::<f64>()
            + spec.theta.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
        let y = match spec.model {
            OutcomeModel::Linear => lin + rng.sample::<f64, _>(StandardNormal),
            OutcomeModel::Logistic => (rng.random::<f64>() < sigmoid(lin)) as u8 as f64,
        };
        values.push(y);
        values.push(x);
        values.extend_from_slice(&m);
        values.extend_from_slice(&z);
    }
    RawBatch { n, values }
}

/// Batch sizes for `n` rows cut into `k` batches.
pub fn batch_sizes(n: usize, k: usize, split: BatchSplit) -> Result<Vec<usize>> {
    if k == 0 || k > n {
        return Err(Error::Input(format!("cannot cut {n} observations into {k} batches")));
    }
    match split {
        BatchSplit::Equal if !n.is_multiple_of(k) => Err(Error::Input(format!(
            "N = {n} is not divisible by k = {k}; equal batch sizes are required"
        ))),
        _ => Ok((0..k).map(|i| n / k + (i < n % k) as usize).collect()),
    }
}

/// Cuts raw rows into consecutive batches.
pub fn split_rows(spec: &CaseSpec, rows: &RawBatch, k: usize, split: BatchSplit) -> Result<Vec<BatchData>> {
    let dims = spec.dims();
    let width = dims.raw_width();
    let mut start = 0;
    batch_sizes(rows.n, k, split)?
        .into_iter()
        .map(|size| {
            let slice = &rows.values[start * width..(start + size) * width];
            start += size;
            BatchData::from_flat(&dims, size, slice)
        })
        .collect()
}

/// The stream of `k` equal batches for replication `rep`.
pub fn generate_case(spec: &CaseSpec, k: usize, seed: u64, rep: u64) -> Result<Vec<BatchData>> {
    batch_sizes(spec.n_total, k, BatchSplit::Equal)?;
    let rows = generate_rows(spec, seed, rep)?;
    split_rows(spec, &rows, k, BatchSplit::Equal)
}
