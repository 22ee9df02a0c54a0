//! Product-of-coefficients mediation tests, confidence intervals, Bonferroni
//! mediator selection and effect decomposition.
//!
//! The adjusted tests switch reference distribution according to the size of
//! the component statistics relative to `λ_N = √N / ln N`: when both
//! `|T_α|` and `|T_β|` fall below it the Sobel statistic is referred to
//! `N(0, 1/4)` and the MaxP p-value is squared.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::CoefficientSummary;
use crate::normal::{self, P_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    /// Family-wise significance level.
    pub delta: f64,
    /// Exposure contrast `(x, x*)` for effect reporting.
    pub contrast: (f64, f64),
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            delta: 0.05,
            contrast: (1.0, 0.0),
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("significance level must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.contrast.0.is_finite() && self.contrast.1.is_finite()) {
            return Err(Error::Config("exposure contrast must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `max(|T_α|, |T_β|) ≥ λ_N`.
    LargeT,
    /// `max(|T_α|, |T_β|) < λ_N`.
    SmallT,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn centered(center: f64, half_width: f64) -> Self {
        Interval {
            lower: center - half_width,
            upper: center + half_width,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }

    pub fn is_within(&self, other: &Interval) -> bool {
        other.lower <= self.lower && self.upper <= other.upper
    }
}

/// Test outcome for a single mediator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediatorTestResult {
    /// 0-based mediator index.
    pub index: usize,
    pub product_hat: f64,
    pub sigma_product: f64,
    pub t_sobel: f64,
    pub t_alpha: f64,
    pub t_beta: f64,
    pub regime: Regime,
    pub p_sobel: f64,
    pub p_asobel: f64,
    pub p_js: f64,
    pub p_ajs: f64,
    pub ci_sobel: Interval,
    pub ci_asobel: Interval,
}

/// Mediators selected by each test at the Bonferroni cutoff `δ / p`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionSets {
    pub omega_sobel: Vec<usize>,
    pub omega_asobel: Vec<usize>,
    pub omega_js: Vec<usize>,
    pub omega_ajs: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectScale {
    /// Effects on the outcome's own scale.
    Linear,
    /// Log odds ratios; exponentiate for the odds-ratio scale.
    LogOdds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectDecomposition {
    pub scale: EffectScale,
    pub nde: f64,
    pub nie: f64,
    pub te: f64,
    /// `α_j β_j (x − x*)` for each mediator.
    pub per_mediator: Vec<f64>,
}

impl EffectDecomposition {
    /// `(NDE, NIE, TE)` on the odds-ratio scale; only meaningful for [`EffectScale::LogOdds`].
    pub fn odds_ratios(&self) -> (f64, f64, f64) {
        (self.nde.exp(), self.nie.exp(), self.te.exp())
    }
}

/// `λ_N = √N / ln N`.
pub fn threshold_lambda(n_total: u64) -> Result<f64> {
    if n_total < 2 {
        return Err(Error::Input(format!("threshold needs N >= 2, got {n_total}")));
    }
    let n = n_total as f64;
    Ok(n.sqrt() / n.ln())
}

/// Runs all four tests for mediator `j` (0-based).
pub fn test_mediator(summary: &CoefficientSummary, j: usize, cfg: &TestConfig) -> Result<MediatorTestResult> {
    cfg.validate()?;
    if j >= summary.p() {
        return Err(Error::Input(format!("mediator index {j} out of range (p = {})", summary.p())));
    }
    let (alpha, sa) = (summary.alpha_hat[j], summary.alpha_se[j]);
    let (beta, sb) = (summary.beta_hat[j], summary.beta_se[j]);
    for (name, se) in [("alpha", sa), ("beta", sb)] {
        if !(se > 0.0 && se.is_finite()) {
            return Err(Error::DegenerateInference {
                index: j,
                reason: format!("standard error of {name} is {se}"),
            });
        }
    }
    let lambda = threshold_lambda(summary.n_total)?;
    components_test(j, alpha, sa, beta, sb, lambda, cfg.delta)
}

/// Core of [`test_mediator`] on raw estimates; `lambda` is the regime threshold.
pub fn components_test(
    index: usize,
    alpha: f64,
    alpha_se: f64,
    beta: f64,
    beta_se: f64,
    lambda: f64,
    delta: f64,
) -> Result<MediatorTestResult> {
    let product = alpha * beta;
    let sigma = (alpha * alpha * beta_se * beta_se + beta * beta * alpha_se * alpha_se).sqrt();
    let t_alpha = alpha / alpha_se;
    let t_beta = beta / beta_se;
    // Both estimates exactly zero: the delta-method SE vanishes with the product.
    let t_sobel = if sigma > 0.0 {
        product / sigma
    } else if product == 0.0 {
        0.0
    } else {
        return Err(Error::DegenerateInference {
            index,
            reason: "delta-method standard error of the product is zero".into(),
        });
    };

    let regime = if t_alpha.abs().max(t_beta.abs()) >= lambda {
        Regime::LargeT
    } else {
        Regime::SmallT
    };
    let p_sobel = normal::two_sided_p(t_sobel);
    let p_js = normal::two_sided_p(t_alpha).max(normal::two_sided_p(t_beta));
    let (p_asobel, p_ajs) = match regime {
        Regime::LargeT => (p_sobel, p_js),
        Regime::SmallT => (normal::two_sided_p_quarter_variance(t_sobel), p_js * p_js),
    };

    let z = normal::quantile(1.0 - delta / 2.0);
    let ci_sobel = Interval::centered(product, z * sigma);
    let ci_asobel = match regime {
        Regime::LargeT => ci_sobel,
        Regime::SmallT => Interval::centered(product, 0.5 * z * sigma),
    };

    Ok(MediatorTestResult {
        index,
        product_hat: product,
        sigma_product: sigma,
        t_sobel,
        t_alpha,
        t_beta,
        regime,
        p_sobel: p_sobel.max(P_FLOOR),
        p_asobel: p_asobel.max(P_FLOOR),
        p_js: p_js.max(P_FLOOR),
        p_ajs: p_ajs.max(P_FLOOR),
        ci_sobel,
        ci_asobel,
    })
}

/// Tests every mediator in the summary.
pub fn test_all(summary: &CoefficientSummary, cfg: &TestConfig) -> Result<Vec<MediatorTestResult>> {
    (0..summary.p()).map(|j| test_mediator(summary, j, cfg)).collect()
}

/// Bonferroni selection: `{j : p_j < δ / p}` for each method, `p = results.len()`.
pub fn select_mediators(results: &[MediatorTestResult], cfg: &TestConfig) -> SelectionSets {
    if results.is_empty() {
        return SelectionSets::default();
    }
    let cutoff = cfg.delta / results.len() as f64;
    let pick = |p: fn(&MediatorTestResult) -> f64| -> Vec<usize> {
        results
            .iter()
            .filter(|r| p(r) < cutoff)
            .map(|r| r.index)
            .collect()
    };
    SelectionSets {
        omega_sobel: pick(|r| r.p_sobel),
        omega_asobel: pick(|r| r.p_asobel),
        omega_js: pick(|r| r.p_js),
        omega_ajs: pick(|r| r.p_ajs),
    }
}

/// Natural direct, indirect and total effects for the contrast `x → x*`.
pub fn decompose_effects(summary: &CoefficientSummary, cfg: &TestConfig, scale: EffectScale) -> Result<EffectDecomposition> {
    let (x, x_star) = cfg.contrast;
    if x == x_star {
        return Err(Error::DegenerateContrast(x));
    }
    let dx = x - x_star;
    let per_mediator: Vec<f64> = summary.products().iter().map(|ab| ab * dx).collect();
    let nde = summary.gamma_hat * dx;
    let nie: f64 = per_mediator.iter().sum();
    Ok(EffectDecomposition {
        scale,
        nde,
        nie,
        te: nde + nie,
        per_mediator,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(alpha: f64, sa: f64, beta: f64, sb: f64, n: u64) -> CoefficientSummary {
        CoefficientSummary {
            alpha_hat: vec![alpha],
            alpha_se: vec![sa],
            beta_hat: vec![beta],
            beta_se: vec![sb],
            gamma_hat: 0.5,
            gamma_se: 0.1,
            n_total: n,
            batch_count: 1,
            degenerate_fit: false,
        }
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        ((a - b) / b).abs() <= rel
    }

    #[test]
    fn threshold_values() {
        // Reference values evaluated at 40 digits.
        assert!(close(threshold_lambda(8).unwrap(), 1.360_185_928_795_719_3, 1e-14));
        assert!(close(threshold_lambda(30_000).unwrap(), 16.801_423_622_607_14, 1e-14));
        assert!(close(threshold_lambda(5_000).unwrap(), 8.302_110_393_588_124, 1e-14));
        assert!(threshold_lambda(1).is_err());
        assert!(threshold_lambda(0).is_err());
    }

    #[test]
    fn large_t_worked_example() {
        let s = summary(0.1, 0.02, 0.15, 0.03, 400);
        let r = test_mediator(&s, 0, &TestConfig::default()).unwrap();
        assert_eq!(r.regime, Regime::LargeT);
        assert!(close(r.sigma_product, 4.242_640_687_119_285e-3, 1e-13));
        assert!(close(r.t_sobel, 3.535_533_905_932_737_6, 1e-13));
        assert!(close(r.p_sobel, 4.069_520_174_449_589_4e-4, 1e-12));
        assert!(close(r.p_js, 5.733_031_437_583_878e-7, 1e-12));
        assert_eq!(r.p_ajs, r.p_js);
        assert_eq!(r.p_asobel, r.p_sobel);
        assert_eq!(r.ci_asobel, r.ci_sobel);
        assert!(close(r.ci_sobel.half_width(), 1.959_963_984_540_054 * r.sigma_product, 1e-13));
    }

    #[test]
    fn null_statistics_give_unit_p_values() {
        let s = summary(0.0, 0.02, 0.0, 0.03, 400);
        let r = test_mediator(&s, 0, &TestConfig::default()).unwrap();
        assert_eq!(r.regime, Regime::SmallT);
        assert_eq!((r.t_sobel, r.p_sobel, r.p_asobel, r.p_js, r.p_ajs), (0.0, 1.0, 1.0, 1.0, 1.0));
        assert_eq!(r.ci_sobel.half_width(), 0.0);
    }

    #[test]
    fn small_t_squares_maxp_and_halves_sobel_reference() {
        // Construct T_alpha = 1, T_beta = 1 at N = 400 (λ ≈ 3.34): T_Sobel = 1/√2.
        let r = components_test(0, 1.0, 1.0, 1.0, 1.0, threshold_lambda(400).unwrap(), 0.05).unwrap();
        assert_eq!(r.regime, Regime::SmallT);
        assert!((r.p_ajs - r.p_js * r.p_js).abs() < 1e-17);
        assert!(close(r.ci_asobel.half_width(), 0.5 * r.ci_sobel.half_width(), 1e-15));

        // Pin T_Sobel = 1 exactly via alpha = beta = √2 with unit SEs and large λ.
        let a = std::f64::consts::SQRT_2;
        let r = components_test(0, a, 1.0, a, 1.0, 100.0, 0.05).unwrap();
        assert!((r.t_sobel - 1.0).abs() < 1e-15);
        assert!(close(r.p_sobel, 0.317_310_507_862_914_1, 1e-13));
        assert!(close(r.p_asobel, 0.045_500_263_896_358_41, 1e-13));
    }

    #[test]
    fn regime_tie_counts_as_large() {
        let r = components_test(0, 2.0, 1.0, 0.5, 1.0, 2.0, 0.05).unwrap();
        assert_eq!(r.regime, Regime::LargeT);
    }

    #[test]
    fn zero_standard_error_is_degenerate() {
        let s = summary(0.1, 0.0, 0.2, 0.1, 100);
        let err = test_mediator(&s, 0, &TestConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateInference { index: 0, .. }));
    }

    fn result_with(index: usize, p_sobel: f64, p_asobel: f64, p_js: f64, p_ajs: f64) -> MediatorTestResult {
        MediatorTestResult {
            index,
            product_hat: 0.0,
            sigma_product: 1.0,
            t_sobel: 0.0,
            t_alpha: 0.0,
            t_beta: 0.0,
            regime: Regime::SmallT,
            p_sobel,
            p_asobel,
            p_js,
            p_ajs,
            ci_sobel: Interval::centered(0.0, 1.0),
            ci_asobel: Interval::centered(0.0, 0.5),
        }
    }

    #[test]
    fn bonferroni_selection() {
        let cfg = TestConfig::default();
        let all: Vec<_> = (0..10).map(|j| result_with(j, 0.004, 0.004, 0.004, 0.004)).collect();
        let sets = select_mediators(&all, &cfg);
        assert_eq!(sets.omega_sobel, (0..10).collect::<Vec<_>>());
        assert_eq!(sets.omega_ajs.len(), 10);

        let none: Vec<_> = (0..10).map(|j| result_with(j, 1.0, 1.0, 1.0, 1.0)).collect();
        assert_eq!(select_mediators(&none, &cfg), SelectionSets::default());

        let mut mixed: Vec<_> = (0..10).map(|j| result_with(j, 1.0, 1.0, 1.0, 1.0)).collect();
        mixed[3] = result_with(3, 0.5, 0.5, 0.006, 0.006 * 0.006);
        let sets = select_mediators(&mixed, &cfg);
        assert!(sets.omega_js.is_empty());
        assert_eq!(sets.omega_ajs, vec![3]);

        // Exactly at the cutoff is not selected.
        let edge: Vec<_> = (0..10).map(|j| result_with(j, 0.005, 0.005, 0.005, 0.005)).collect();
        assert!(select_mediators(&edge, &cfg).omega_sobel.is_empty());
    }

    #[test]
    fn linear_effect_decomposition() {
        let s = CoefficientSummary {
            alpha_hat: vec![0.015, 0.0375, 0.0, 0.0, 0.0375],
            alpha_se: vec![1.0; 5],
            beta_hat: vec![1.0; 5],
            beta_se: vec![1.0; 5],
            gamma_hat: 0.5,
            gamma_se: 0.1,
            n_total: 100,
            batch_count: 1,
            degenerate_fit: false,
        };
        let e = decompose_effects(&s, &TestConfig::default(), EffectScale::Linear).unwrap();
        assert!((e.nde - 0.5).abs() < 1e-15);
        assert!((e.nie - 0.09).abs() < 1e-15);
        assert!((e.te - 0.59).abs() < 1e-15);
        assert_eq!(e.te, e.nde + e.nie);

        let cfg = TestConfig {
            contrast: (2.0, 2.0),
            ..Default::default()
        };
        assert!(matches!(
            decompose_effects(&s, &cfg, EffectScale::Linear),
            Err(Error::DegenerateContrast(_))
        ));
    }

    #[test]
    fn case_one_true_coefficients() {
        // α = (0.1, 0, 0, 0.35, 0.25), β = (0.15, 0.25, 0, 0, 0.15): only j = 1, 5 mediate.
        let s = CoefficientSummary {
            alpha_hat: vec![0.1, 0.0, 0.0, 0.35, 0.25],
            alpha_se: vec![1.0; 5],
            beta_hat: vec![0.15, 0.25, 0.0, 0.0, 0.15],
            beta_se: vec![1.0; 5],
            gamma_hat: 0.5,
            gamma_se: 0.1,
            n_total: 100,
            batch_count: 1,
            degenerate_fit: false,
        };
        let e = decompose_effects(&s, &TestConfig::default(), EffectScale::Linear).unwrap();
        assert!((e.nie - 0.0525).abs() < 1e-15);
    }

    #[test]
    fn odds_ratio_decomposition() {
        // α = (0, 0.25, 0.3, 0, 0.3), β = (0, 0.2, 0, 0.3, 0.25).
        let s = CoefficientSummary {
            alpha_hat: vec![0.0, 0.25, 0.3, 0.0, 0.3],
            alpha_se: vec![1.0; 5],
            beta_hat: vec![0.0, 0.2, 0.0, 0.3, 0.25],
            beta_se: vec![1.0; 5],
            gamma_hat: 0.5,
            gamma_se: 0.1,
            n_total: 100,
            batch_count: 1,
            degenerate_fit: false,
        };
        let e = decompose_effects(&s, &TestConfig::default(), EffectScale::LogOdds).unwrap();
        assert!((e.nie - 0.125).abs() < 1e-15);
        let (nde_or, nie_or, te_or) = e.odds_ratios();
        assert!((nie_or - 1.133_148_453_066_826_3).abs() < 1e-14);
        assert!((te_or - nde_or * nie_or).abs() < 1e-14);
        assert!((e.te - (e.nde + e.nie)).abs() < 1e-12);
    }
}
