//! Monte Carlo replications and the metric tables.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::cases::CaseSpec;
use super::generate::{error_factor, generate_with_factor, split_rows, BatchSplit};
use crate::engine::{MediationStream, StreamConfig};
use crate::error::{Error, Result};
use crate::mediation::{test_all, select_mediators, TestConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    Sobel,
    ASobel,
    JS,
    AJS,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Sobel, Method::ASobel, Method::JS, Method::AJS];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sobel => "Sobel",
            Method::ASobel => "ASobel",
            Method::JS => "JS",
            Method::AJS => "AJS",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    /// Batch counts for the renewable paths; a one-batch full-data path is always added.
    pub batches: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub delta: f64,
    pub split: BatchSplit,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl SimOptions {
    pub fn new(batches: Vec<usize>, reps: usize, seed: u64) -> Self {
        SimOptions {
            batches,
            reps,
            seed,
            delta: 0.05,
            split: BatchSplit::Equal,
            threads: None,
        }
    }
}

/// Output of one replication on one path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathDraw {
    pub alpha_hat: Vec<f64>,
    pub beta_hat: Vec<f64>,
    pub gamma_tilde: Vec<f64>,
    pub product_hat: Vec<f64>,
    pub sigma_product: Vec<f64>,
    pub cover_sobel: Vec<bool>,
    pub cover_asobel: Vec<bool>,
    /// Selection flags per method, in [`Method::ALL`] order.
    pub selected: [Vec<bool>; 4],
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetMetrics {
    /// 0-based mediator index.
    pub index: usize,
    pub truth: f64,
    pub bias: f64,
    /// Absent with a single successful replication.
    pub sse: Option<f64>,
    pub ase: f64,
    pub cp_sobel: f64,
    pub cp_asobel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodMetrics {
    pub method: Method,
    /// Share of replications selecting at least one true-null mediator.
    pub fwer: f64,
    /// Mean share of active mediators selected; absent if there are none.
    pub power: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathMetrics {
    /// `k=<batches>` or `full`.
    pub label: String,
    pub batches: usize,
    pub completed: usize,
    pub failed: usize,
    /// First few failure messages.
    pub failures: Vec<String>,
    pub targets: Vec<TargetMetrics>,
    pub methods: Vec<MethodMetrics>,
    pub cpu_seconds: f64,
}

impl PathMetrics {
    pub fn is_complete(&self) -> bool {
        self.failed == 0
    }

    pub fn method(&self, m: Method) -> &MethodMetrics {
        self.methods.iter().find(|x| x.method == m).expect("every method is reported")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricTable {
    pub case_id: u8,
    pub n_total: usize,
    pub reps: usize,
    pub seed: u64,
    pub delta: f64,
    pub paths: Vec<PathMetrics>,
}

impl MetricTable {
    pub fn path(&self, label: &str) -> Option<&PathMetrics> {
        self.paths.iter().find(|p| p.label == label)
    }

    /// Long-format CSV, one value per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("case,n_total,reps,seed,delta,path,batches,completed,failed,metric,target,value\n");
        let mut row = |p: &PathMetrics, metric: &str, target: &str, value: Option<f64>| {
            let v = value.map_or(String::new(), |v| v.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{metric},{target},{v}",
                self.case_id, self.n_total, self.reps, self.seed, self.delta, p.label, p.batches, p.completed, p.failed
            );
        };
        for p in &self.paths {
            for t in &p.targets {
                let target = format!("alpha{0}beta{0}", t.index + 1);
                row(p, "truth", &target, Some(t.truth));
                row(p, "bias", &target, Some(t.bias));
                row(p, "sse", &target, t.sse);
                row(p, "ase", &target, Some(t.ase));
                row(p, "cp_sobel", &target, Some(t.cp_sobel));
                row(p, "cp_asobel", &target, Some(t.cp_asobel));
            }
            for m in &p.methods {
                row(p, "fwer", m.method.name(), Some(m.fwer));
                row(p, "power", m.method.name(), m.power);
            }
            row(p, "cpu_seconds", "", Some(p.cpu_seconds));
        }
        out
    }
}

/// Streams one dataset through `k` batches and tests every mediator.
pub fn run_path(spec: &CaseSpec, batches: &[crate::model::BatchData], tests: &TestConfig) -> Result<PathDraw> {
    let truth = spec.products();
    let start = Instant::now();
    let mut config = StreamConfig::new(spec.model, spec.dims());
    config.tests = *tests;
    let mut stream = MediationStream::new(config)?;
    for b in batches {
        stream.update(b)?;
    }
    let summary = stream.summary()?;
    let results = test_all(&summary, tests)?;
    let sets = select_mediators(&results, tests);
    let seconds = start.elapsed().as_secs_f64();

    let p = spec.p();
    let flags = |set: &[usize]| {
        let mut v = vec![false; p];
        for &j in set {
            v[j] = true;
        }
        v
    };
    Ok(PathDraw {
        gamma_tilde: stream.gamma_tilde().to_vec(),
        product_hat: results.iter().map(|r| r.product_hat).collect(),
        sigma_product: results.iter().map(|r| r.sigma_product).collect(),
        cover_sobel: results.iter().map(|r| r.ci_sobel.contains(truth[r.index])).collect(),
        cover_asobel: results.iter().map(|r| r.ci_asobel.contains(truth[r.index])).collect(),
        selected: [
            flags(&sets.omega_sobel),
            flags(&sets.omega_asobel),
            flags(&sets.omega_js),
            flags(&sets.omega_ajs),
        ],
        alpha_hat: summary.alpha_hat,
        beta_hat: summary.beta_hat,
        seconds,
    })
}

/// Path batch counts: the requested ones followed by the full-data path.
fn path_plan(options: &SimOptions) -> Vec<(String, usize)> {
    let mut plan: Vec<(String, usize)> = options.batches.iter().map(|&k| (format!("k={k}"), k)).collect();
    plan.push(("full".to_string(), 1));
    plan
}

/// Every replication's draws, indexed `[rep][path]`, in replication order.
pub fn replicate_draws(spec: &CaseSpec, options: &SimOptions) -> Result<Vec<Vec<Result<PathDraw, String>>>> {
    spec.validate()?;
    if options.reps == 0 {
        return Err(Error::Config("at least one replication is required".into()));
    }
    let tests = TestConfig {
        delta: options.delta,
        ..TestConfig::default()
    };
    tests.validate()?;
    let plan = path_plan(options);
    for (_, k) in &plan {
        super::generate::batch_sizes(spec.n_total, *k, options.split)?;
    }
    let factor = error_factor(spec.p(), spec.error_corr)?;

    let one = |rep: usize| -> Vec<Result<PathDraw, String>> {
        let rows = generate_with_factor(spec, &factor, options.seed, rep as u64);
        plan.iter()
            .map(|(_, k)| {
                split_rows(spec, &rows, *k, options.split)
                    .and_then(|b| run_path(spec, &b, &tests))
                    .map_err(|e| format!("replication {rep}: {e}"))
            })
            .collect()
    };
    let draws = match options.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?
            .install(|| (0..options.reps).into_par_iter().map(one).collect()),
        None => (0..options.reps).into_par_iter().map(one).collect(),
    };
    Ok(draws)
}

/// Runs the replications and reduces them to a [`MetricTable`].
pub fn run_replications(spec: &CaseSpec, options: &SimOptions) -> Result<MetricTable> {
    let draws = replicate_draws(spec, options)?;
    let plan = path_plan(options);
    let paths = plan
        .iter()
        .enumerate()
        .map(|(i, (label, k))| {
            let column: Vec<&Result<PathDraw, String>> = draws.iter().map(|rep| &rep[i]).collect();
            summarize_path(spec, label.clone(), *k, &column)
        })
        .collect();
    Ok(MetricTable {
        case_id: spec.case_id,
        n_total: spec.n_total,
        reps: options.reps,
        seed: options.seed,
        delta: options.delta,
        paths,
    })
}

fn summarize_path(spec: &CaseSpec, label: String, batches: usize, column: &[&Result<PathDraw, String>]) -> PathMetrics {
    let ok: Vec<&PathDraw> = column.iter().filter_map(|r| r.as_ref().ok()).collect();
    let failures: Vec<String> = column
        .iter()
        .filter_map(|r| r.as_ref().err().cloned())
        .collect();
    let failed = failures.len();
    let n = ok.len();
    let mean = |f: &dyn Fn(&PathDraw) -> f64| -> f64 {
        if n == 0 {
            f64::NAN
        } else {
            ok.iter().map(|d| f(d)).sum::<f64>() / n as f64
        }
    };

    let truth = spec.products();
    let targets = (0..spec.p())
        .map(|j| {
            let est = mean(&|d| d.product_hat[j]);
            let sse = (n >= 2).then(|| {
                let ss: f64 = ok.iter().map(|d| (d.product_hat[j] - est).powi(2)).sum();
                (ss / (n - 1) as f64).sqrt()
            });
            TargetMetrics {
                index: j,
                truth: truth[j],
                bias: est - truth[j],
                sse,
                ase: mean(&|d| d.sigma_product[j]),
                cp_sobel: mean(&|d| d.cover_sobel[j] as u8 as f64),
                cp_asobel: mean(&|d| d.cover_asobel[j] as u8 as f64),
            }
        })
        .collect();

    let nulls = spec.null_set();
    let active = spec.active_set();
    let methods = Method::ALL
        .iter()
        .enumerate()
        .map(|(m, &method)| MethodMetrics {
            method,
            fwer: mean(&|d| nulls.iter().any(|&j| d.selected[m][j]) as u8 as f64),
            power: (!active.is_empty()).then(|| {
                mean(&|d| active.iter().filter(|&&j| d.selected[m][j]).count() as f64 / active.len() as f64)
            }),
        })
        .collect();

    PathMetrics {
        label,
        batches,
        completed: n,
        failed,
        failures: failures.into_iter().take(5).collect(),
        targets,
        methods,
        cpu_seconds: mean(&|d| d.seconds),
    }
}
