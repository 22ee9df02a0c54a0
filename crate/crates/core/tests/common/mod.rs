//! Full-data reference fits built on nalgebra, independent of the crate's own
//! linear algebra.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use renewmed::linalg::Matrix;
use renewmed::{BatchData, ModelDims};

pub struct OlsFit {
    pub coef: Vec<f64>,
    pub sigma2: f64,
    pub se: Vec<f64>,
}

pub fn to_dmatrix(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Least squares through the SVD of the design.
pub fn ols(x: &DMatrix<f64>, y: &[f64]) -> OlsFit {
    let (n, d) = x.shape();
    let y = DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    let coef = svd.solve(&y, 1e-300).expect("svd solve");
    let resid = &y - x * &coef;
    let sigma2 = resid.norm_squared() / (n - d) as f64;
    let v_t = svd.v_t.as_ref().expect("v_t");
    let se = (0..d)
        .map(|i| {
            let var: f64 = (0..d).map(|k| v_t[(k, i)].powi(2) / svd.singular_values[k].powi(2)).sum();
            (sigma2 * var).sqrt()
        })
        .collect();
    OlsFit {
        coef: coef.iter().copied().collect(),
        sigma2,
        se,
    }
}

pub struct LogitFit {
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
}

/// Logistic MLE by iteratively reweighted least squares from zero.
pub fn logistic_mle(x: &DMatrix<f64>, y: &[f64]) -> LogitFit {
    let (n, d) = x.shape();
    let mut beta = DVector::zeros(d);
    for _ in 0..100 {
        let eta = x * &beta;
        let mu: Vec<f64> = eta.iter().map(|e| 1.0 / (1.0 + (-e).exp())).collect();
        let w = DVector::from_iterator(n, mu.iter().map(|m| m * (1.0 - m)));
        let z = DVector::from_iterator(n, (0..n).map(|i| eta[i] + (y[i] - mu[i]) / w[i]));
        let mut xw = x.clone();
        for (i, mut row) in xw.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let info = x.transpose() * &xw;
        let rhs = xw.transpose() * &z;
        let next = info.clone().cholesky().expect("information is positive definite").solve(&rhs);
        let change = (&next - &beta).amax();
        beta = next;
        if change < 1e-14 {
            break;
        }
    }
    let eta = x * &beta;
    let mut xw = x.clone();
    for (i, mut row) in xw.row_iter_mut().enumerate() {
        let m = 1.0 / (1.0 + (-eta[i]).exp());
        row *= m * (1.0 - m);
    }
    let inv = (x.transpose() * &xw).try_inverse().expect("invertible");
    LogitFit {
        coef: beta.iter().copied().collect(),
        se: (0..d).map(|i| inv[(i, i)].sqrt()).collect(),
    }
}

/// `‖a − b‖∞ / ‖b‖∞`.
pub fn rel_norm(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Largest elementwise relative error.
pub fn rel_elementwise(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| if *y == 0.0 { x.abs() } else { ((x - y) / y).abs() })
        .fold(0.0, f64::max)
}

pub struct Instance {
    pub dims: ModelDims,
    pub data: BatchData,
    pub batches: Vec<BatchData>,
}

/// A random linear mediation dataset split into `k` contiguous batches of
/// possibly unequal size.
pub fn random_linear_instance(seed: u64, k: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.random_range(1..=5);
    let q = rng.random_range(0..=2);
    let dims = ModelDims::new(p, q).with_intercepts(rng.random_bool(0.5), rng.random_bool(0.5));
    let n = rng.random_range(60..=2000);
    let alpha: Vec<f64> = (0..p).map(|_| rng.random_range(-0.5..0.5)).collect();
    let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-0.5..0.5)).collect();
    let shift: f64 = rng.random_range(-3.0..3.0);
    let mut flat = Vec::with_capacity(n * dims.raw_width());
    for _ in 0..n {
        let x: f64 = shift + rng.sample::<f64, _>(StandardNormal);
        let z: Vec<f64> = (0..q).map(|_| rng.sample(StandardNormal)).collect();
        let zs: f64 = z.iter().sum();
        let m: Vec<f64> = (0..p)
            .map(|j| 1.0 + alpha[j] * x + 0.3 * zs + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let y = 2.0 + 0.5 * x + beta.iter().zip(&m).map(|(b, v)| b * v).sum::<f64>() + 0.4 * zs
            + rng.sample::<f64, _>(StandardNormal);
        flat.push(y);
        flat.push(x);
        flat.extend(m);
        flat.extend(z);
    }
    let data = BatchData::from_flat(&dims, n, &flat).unwrap();
    let width = dims.raw_width();
    let mut cuts = std::collections::BTreeSet::new();
    while cuts.len() + 1 < k {
        cuts.insert(rng.random_range(20..n - 20));
    }
    let mut bounds = vec![0];
    bounds.extend(cuts);
    bounds.push(n);
    let batches = bounds
        .windows(2)
        .map(|w| BatchData::from_flat(&dims, w[1] - w[0], &flat[w[0] * width..w[1] * width]).unwrap())
        .collect();
    Instance { dims, data, batches }
}

/// Worst relative discrepancies between a streamed fit and the full-data oracle.
#[derive(Debug, Default, Clone, Copy)]
pub struct LinearCheck {
    /// Coefficient vectors, norm-wise.
    pub coef: f64,
    /// Residual variances, elementwise.
    pub variance: f64,
    /// Standard errors, elementwise.
    pub se: f64,
    /// `W'Y = J̃ₖΓ̃ₖ − J̃ₖ₋₁Γ̃ₖ₋₁` over every update, norm-wise.
    pub identity: f64,
}

impl LinearCheck {
    pub fn worst_estimate(&self) -> f64 {
        self.coef.max(self.variance).max(self.se)
    }
}

pub fn check_linear(inst: &Instance) -> LinearCheck {
    use renewmed::linear::{init_linear, summarize_linear};

    let dims = inst.dims;
    let (mut out, mut med) = init_linear(dims).unwrap();
    let mut identity: f64 = 0.0;
    for b in &inst.batches {
        let before = out.j_tilde().mul_vec(out.gamma_tilde());
        out.update(b).unwrap();
        med.update(b).unwrap();
        let after = out.j_tilde().mul_vec(out.gamma_tilde());
        let diff: Vec<f64> = after.iter().zip(&before).map(|(a, c)| a - c).collect();
        identity = identity.max(rel_norm(&diff, &b.w.t_mul_vec(&b.y)));
    }

    let w = to_dmatrix(&inst.data.w);
    let s = to_dmatrix(&inst.data.s);
    let full_out = ols(&w, &inst.data.y);
    let summary = summarize_linear(&out, &med).unwrap();

    let mut coef = rel_norm(out.gamma_tilde(), &full_out.coef);
    let mut variance = rel_elementwise(&[out.phi_tilde().unwrap()], &[full_out.sigma2]);
    let beta_slots: Vec<usize> = (0..dims.p).map(|j| dims.mediator_slot(j)).collect();
    let oracle_beta_se: Vec<f64> = beta_slots.iter().map(|&i| full_out.se[i]).collect();
    let mut se = rel_elementwise(&summary.beta_se, &oracle_beta_se)
        .max(rel_elementwise(&[summary.gamma_se], &[full_out.se[dims.exposure_slot()]]));
    coef = coef.max(rel_norm(&summary.beta_hat, &beta_slots.iter().map(|&i| full_out.coef[i]).collect::<Vec<_>>()));

    let varphi = med.varphi_tilde().unwrap();
    for j in 0..dims.p {
        let mj = inst.data.m.column(j);
        let fit = ols(&s, &mj);
        coef = coef.max(rel_norm(&med.lambda_tilde()[j], &fit.coef));
        variance = variance.max(rel_elementwise(&[varphi[j]], &[fit.sigma2]));
        se = se.max(rel_elementwise(&[summary.alpha_se[j]], &[fit.se[dims.alpha_slot()]]));
    }
    LinearCheck {
        coef,
        variance,
        se,
        identity,
    }
}
