//! Text, CSV and JSON renderings of an [`Analysis`].

use std::fmt::Write as _;
use std::str::FromStr;

use super::{Analysis, OutcomeModel};
use crate::error::{Error, Result};
use crate::mediation::{EffectScale, MediatorTestResult};
use crate::normal::P_FLOOR;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Config(format!("unknown report format '{other}' (text, csv or json)"))),
        }
    }
}

pub fn render(analysis: &Analysis, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => text(analysis),
        ReportFormat::Csv => csv(analysis),
        ReportFormat::Json => serde_json::to_string_pretty(analysis).expect("analysis serializes") + "\n",
    }
}

/// p-values at the floor print as `<1e-300`.
pub fn format_p(p: f64) -> String {
    if p <= P_FLOOR {
        "<1e-300".to_string()
    } else {
        format!("{p:.4e}")
    }
}

fn selected(a: &Analysis, j: usize) -> [bool; 4] {
    let s = &a.selected;
    [
        s.omega_sobel.contains(&j),
        s.omega_asobel.contains(&j),
        s.omega_js.contains(&j),
        s.omega_ajs.contains(&j),
    ]
}

fn text(a: &Analysis) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model: {}", a.model);
    let _ = writeln!(out, "batches: {}  N: {}  lambda_N: {:.6}", a.batches, a.n_total, a.lambda);
    let _ = writeln!(
        out,
        "delta: {}  Bonferroni cutoff: {:.4e}  contrast: x={} x*={}",
        a.delta,
        a.delta / a.tests.len() as f64,
        a.contrast.0,
        a.contrast.1
    );
    if a.summary.degenerate_fit {
        let _ = writeln!(out, "warning: zero residual variance (exact fit); standard errors are degenerate");
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<5} {:>12} {:>11} {:>12} {:>11} {:>12} {:>11} {:>6} {:>11} {:>11} {:>11} {:>11}  {:<27} {:<27} {}",
        "med",
        "alpha",
        "se(alpha)",
        "beta",
        "se(beta)",
        "alpha*beta",
        "se(prod)",
        "regime",
        "p_Sobel",
        "p_ASobel",
        "p_JS",
        "p_AJS",
        "CI_Sobel",
        "CI_ASobel",
        "selected"
    );
    for r in &a.tests {
        let j = r.index;
        let s = &a.summary;
        let flags: Vec<&str> = ["Sobel", "ASobel", "JS", "AJS"]
            .into_iter()
            .zip(selected(a, j))
            .filter_map(|(name, on)| on.then_some(name))
            .collect();
        let _ = writeln!(
            out,
            "{:<5} {:>12.5e} {:>11.4e} {:>12.5e} {:>11.4e} {:>12.5e} {:>11.4e} {:>6} {:>11} {:>11} {:>11} {:>11}  {:<27} {:<27} {}",
            format!("M{}", j + 1),
            s.alpha_hat[j],
            s.alpha_se[j],
            s.beta_hat[j],
            s.beta_se[j],
            r.product_hat,
            r.sigma_product,
            regime_label(r),
            format_p(r.p_sobel),
            format_p(r.p_asobel),
            format_p(r.p_js),
            format_p(r.p_ajs),
            format!("[{:.4e}, {:.4e}]", r.ci_sobel.lower, r.ci_sobel.upper),
            format!("[{:.4e}, {:.4e}]", r.ci_asobel.lower, r.ci_asobel.upper),
            if flags.is_empty() { "-".to_string() } else { flags.join(",") }
        );
    }
    let _ = writeln!(out);
    let e = &a.effects;
    match e.scale {
        EffectScale::Linear => {
            let _ = writeln!(out, "effects (outcome scale): NDE {:.6e}  NIE {:.6e}  TE {:.6e}", e.nde, e.nie, e.te);
        }
        EffectScale::LogOdds => {
            let (nde, nie, te) = e.odds_ratios();
            let _ = writeln!(out, "effects (log odds):  NDE {:.6e}  NIE {:.6e}  TE {:.6e}", e.nde, e.nie, e.te);
            let _ = writeln!(out, "effects (odds ratio): NDE {nde:.6}  NIE {nie:.6}  TE {te:.6}");
        }
    }
    let _ = writeln!(
        out,
        "direct effect coefficient: {:.6e} (se {:.4e})",
        a.summary.gamma_hat, a.summary.gamma_se
    );
    out
}

fn regime_label(r: &MediatorTestResult) -> &'static str {
    match r.regime {
        crate::mediation::Regime::LargeT => "large",
        crate::mediation::Regime::SmallT => "small",
    }
}

fn csv(a: &Analysis) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# model={},batches={},n_total={},lambda={},delta={},contrast_x={},contrast_x_star={}",
        a.model, a.batches, a.n_total, a.lambda, a.delta, a.contrast.0, a.contrast.1
    );
    let e = &a.effects;
    let _ = write!(out, "# nde={},nie={},te={}", e.nde, e.nie, e.te);
    if a.model == OutcomeModel::Logistic {
        let (nde, nie, te) = e.odds_ratios();
        let _ = write!(out, ",nde_or={nde},nie_or={nie},te_or={te}");
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "mediator,alpha,se_alpha,beta,se_beta,product,se_product,t_alpha,t_beta,t_sobel,regime,\
         p_sobel,p_asobel,p_js,p_ajs,ci_sobel_lower,ci_sobel_upper,ci_asobel_lower,ci_asobel_upper,\
         selected_sobel,selected_asobel,selected_js,selected_ajs"
    );
    for r in &a.tests {
        let j = r.index;
        let s = &a.summary;
        let sel = selected(a, j).map(|b| b as u8);
        let _ = writeln!(
            out,
            "M{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            j + 1,
            s.alpha_hat[j],
            s.alpha_se[j],
            s.beta_hat[j],
            s.beta_se[j],
            r.product_hat,
            r.sigma_product,
            r.t_alpha,
            r.t_beta,
            r.t_sobel,
            regime_label(r),
            r.p_sobel,
            r.p_asobel,
            r.p_js,
            r.p_ajs,
            r.ci_sobel.lower,
            r.ci_sobel.upper,
            r.ci_asobel.lower,
            r.ci_asobel.upper,
            sel[0],
            sel[1],
            sel[2],
            sel[3]
        );
    }
    out
}
