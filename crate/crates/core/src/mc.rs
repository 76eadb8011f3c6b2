//! Replication engine: simulate, fit, estimate, and aggregate bias / std /
//! size tables.
//!
//! Replications are independent tasks keyed by replication id; aggregation is
//! a single-threaded fold over sorted ids, so summaries are bit-identical for
//! any worker count.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dgp::{self, DgpConfig};
use crate::error::{Error, Result};
use crate::estimators::{self, ControlKind, ControlSpec, EstimateAux};
use crate::felogit::{self, DyadFeatureKind, FitOptions};
use crate::network;
use crate::sieve::{self, ControlPoints};

/// Replication-study configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub dgp: DgpConfig,
    pub reps: usize,
    pub estimators: Vec<ControlSpec>,
    #[serde(default)]
    pub k_grid: Option<Vec<usize>>,
    #[serde(default = "default_level")]
    pub level: f64,
    /// Worker count; 0 uses one worker per core.
    #[serde(default)]
    pub parallel: usize,
}

fn default_level() -> f64 {
    0.05
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be >= 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig("level must be in (0, 1)".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidConfig("estimator list is empty".into()));
        }
        for e in &self.estimators {
            e.validate()?;
        }
        if let Some(grid) = &self.k_grid {
            if grid.is_empty() {
                return Err(Error::InvalidConfig("k_grid present but empty".into()));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML serialization.
    pub fn config_hash(&self) -> String {
        let text = toml::to_string(self).expect("serializable config");
        let mut h = Sha256::new();
        h.update(text.as_bytes());
        format!("{:x}", h.finalize())
    }
}

/// One estimator run inside one replication.
#[derive(Debug, Clone, Serialize)]
pub struct RepRecord {
    pub rep: u64,
    pub estimator: String,
    pub ok: bool,
    pub error: String,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub reject: Vec<bool>,
    pub k_used: usize,
    pub n_dropped: usize,
    pub mean_degree: f64,
    pub k_star: Option<usize>,
}

/// Per (estimator, coefficient) summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub estimator: String,
    pub coefficient: String,
    pub mean_bias: f64,
    pub std: f64,
    pub size: f64,
    pub n_ok: usize,
}

/// Aggregated Monte Carlo summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub rows: Vec<SummaryRow>,
    pub mean_degree: f64,
    pub reps: usize,
    pub failed_reps: usize,
    pub failure_histogram: BTreeMap<String, usize>,
    /// Modal CV-selected truncation, when a K grid was run.
    pub k_star: Option<usize>,
}

impl McSummary {
    pub fn row(&self, estimator: &str, coefficient: &str) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.coefficient == coefficient)
    }
}

pub struct McRun {
    pub summary: McSummary,
    pub records: Vec<RepRecord>,
}

struct RepOutcome {
    rep: u64,
    mean_degree: f64,
    k_star: Option<usize>,
    /// One entry per estimator: Ok(record fields) or the error string.
    entries: Vec<std::result::Result<(Vec<f64>, Vec<f64>, Vec<bool>, usize, usize), String>>,
    hard_error: Option<String>,
}

fn run_one_rep(cfg: &McConfig, dgp_resolved: &DgpConfig, rep: u64) -> RepOutcome {
    let needs_fit = cfg
        .estimators
        .iter()
        .any(|e| matches!(e.kind, ControlKind::LinearAHat | ControlKind::SieveAHat));
    let blank = RepOutcome {
        rep,
        mean_degree: f64::NAN,
        k_star: None,
        entries: Vec::new(),
        hard_error: None,
    };

    let sample = match dgp::simulate(dgp_resolved, rep) {
        Ok(s) => s,
        Err(e) => {
            return RepOutcome {
                hard_error: Some(format!("simulate: {e}")),
                ..blank
            }
        }
    };
    let weights = network::row_normalize(&sample.network);
    let mean_degree = sample
        .network
        .degrees()
        .iter()
        .map(|&d| d as f64)
        .sum::<f64>()
        / sample.n() as f64;

    let fit = if needs_fit {
        let feats = match felogit::dyad_features(
            &nalgebra::DMatrix::from_fn(sample.n(), 1, |i, _| sample.x2[i]),
            DyadFeatureKind::Product,
        ) {
            Ok(f) => f,
            Err(e) => {
                return RepOutcome {
                    mean_degree,
                    hard_error: Some(format!("features: {e}")),
                    ..blank
                }
            }
        };
        let opts = FitOptions {
            exclude_boundary: true,
            ..FitOptions::default()
        };
        match felogit::fit_joint_mle(&sample.network, &feats, &opts) {
            Ok(f) => Some(f),
            Err(e) => {
                return RepOutcome {
                    mean_degree,
                    hard_error: Some(format!("felogit: {e}")),
                    ..blank
                }
            }
        }
    } else {
        None
    };

    let oracle_h = sample.a.as_ref().map(|a| {
        DVector::from_fn(a.len(), |i, _| {
            dgp::eval_h(dgp_resolved.h_form, dgp_resolved.kappa, a[i])
        })
    });

    let mut entries = Vec::with_capacity(cfg.estimators.len());
    for spec in &cfg.estimators {
        let aux = EstimateAux {
            fit: fit.as_ref(),
            oracle_h: if matches!(spec.kind, ControlKind::OracleH) {
                oracle_h.clone()
            } else {
                None
            },
        };
        let entry = estimators::estimate(&sample, &weights, spec, &aux)
            .map(|res| {
                let reject = estimators::t_reject(&res, &dgp_resolved.beta, cfg.level);
                (
                    res.beta_hat.flat(),
                    res.se.clone(),
                    reject,
                    res.k_used,
                    res.n_dropped,
                )
            })
            .map_err(|e| e.to_string());
        entries.push(entry);
    }

    // CV report for the first sieve control, target y.
    let k_star = cfg.k_grid.as_ref().and_then(|grid| {
        let sieve_spec = cfg
            .estimators
            .iter()
            .find(|e| matches!(e.kind, ControlKind::SieveAHat | ControlKind::SieveX2Deg))?;
        let basis = sieve_spec.basis?;
        let points = match sieve_spec.kind {
            ControlKind::SieveX2Deg => {
                let deg = network::scaled_degrees(&sample.network).ok()?;
                ControlPoints::X2Deg {
                    x2: sample.x2.clone(),
                    deg: DVector::from_column_slice(&deg),
                }
            }
            ControlKind::SieveAHat => {
                let f = fit.as_ref()?;
                let retained = f.retained();
                ControlPoints::Scalar(DVector::from_fn(retained.len(), |r, _| {
                    f.a_hat[retained[r]]
                }))
            }
            _ => unreachable!(),
        };
        let target = match (&points, fit.as_ref()) {
            (ControlPoints::Scalar(_), Some(f)) => {
                let retained = f.retained();
                DVector::from_fn(retained.len(), |r, _| sample.y[retained[r]])
            }
            _ => sample.y.clone(),
        };
        sieve::loo_cv_select(basis.family, grid, &points, &target)
            .ok()
            .map(|(k, _)| k)
    });

    RepOutcome {
        rep,
        mean_degree,
        k_star,
        entries,
        hard_error: None,
    }
}

/// Runs the study. When `out_dir` is given, writes `raw_reps.csv` before
/// summarizing, then `summary.csv` and `run_meta.toml`.
pub fn run_mc(cfg: &McConfig, out_dir: Option<&Path>) -> Result<McRun> {
    cfg.validate()?;
    let dgp_resolved = cfg.dgp.resolved()?;

    let mut outcomes: Vec<RepOutcome> = if cfg.parallel == 1 {
        (0..cfg.reps as u64)
            .map(|rep| run_one_rep(cfg, &dgp_resolved, rep))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.parallel)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
        pool.install(|| {
            (0..cfg.reps as u64)
                .into_par_iter()
                .map(|rep| run_one_rep(cfg, &dgp_resolved, rep))
                .collect()
        })
    };
    outcomes.sort_by_key(|o| o.rep);

    let mut records = Vec::with_capacity(cfg.reps * cfg.estimators.len());
    for o in &outcomes {
        for (idx, spec) in cfg.estimators.iter().enumerate() {
            let entry = match &o.hard_error {
                Some(e) => Err(e.clone()),
                None => o.entries[idx].clone(),
            };
            let label = spec.label();
            match entry {
                Ok((beta, se, reject, k_used, n_dropped)) => records.push(RepRecord {
                    rep: o.rep,
                    estimator: label,
                    ok: true,
                    error: String::new(),
                    beta,
                    se,
                    reject,
                    k_used,
                    n_dropped,
                    mean_degree: o.mean_degree,
                    k_star: o.k_star,
                }),
                Err(e) => records.push(RepRecord {
                    rep: o.rep,
                    estimator: label,
                    ok: false,
                    error: e,
                    beta: Vec::new(),
                    se: Vec::new(),
                    reject: Vec::new(),
                    k_used: 0,
                    n_dropped: 0,
                    mean_degree: o.mean_degree,
                    k_star: o.k_star,
                }),
            }
        }
    }

    let failed_reps = outcomes
        .iter()
        .filter(|o| o.hard_error.is_some() || o.entries.iter().any(|e| e.is_err()))
        .count();
    let mut histogram: BTreeMap<String, usize> = BTreeMap::new();
    for o in &outcomes {
        if let Some(e) = &o.hard_error {
            *histogram.entry(first_words(e)).or_default() += 1;
        }
        for entry in &o.entries {
            if let Err(e) = entry {
                *histogram.entry(first_words(e)).or_default() += 1;
            }
        }
    }
    if failed_reps * 10 > cfg.reps {
        return Err(Error::TooManyFailures {
            failed: failed_reps,
            total: cfg.reps,
            percent_cap: 10,
            histogram: format!("{histogram:?}"),
        });
    }

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        write_raw_reps(&dir.join("raw_reps.csv"), &records)?;
    }

    let summary = summarize(cfg, &records, failed_reps, histogram);

    if let Some(dir) = out_dir {
        write_summary(&dir.join("summary.csv"), cfg, &summary)?;
        write_run_meta(&dir.join("run_meta.toml"), cfg, &summary)?;
    }

    Ok(McRun { summary, records })
}

fn first_words(e: &str) -> String {
    e.split(':').next().unwrap_or("unknown").trim().to_string()
}

/// Coefficient labels for the flat (beta1, beta2', beta3') layout.
pub fn coefficient_names(p: usize) -> Vec<String> {
    let mut names = vec!["beta1".to_string()];
    for i in 0..p {
        names.push(if p == 1 {
            "beta2".to_string()
        } else {
            format!("beta2_{i}")
        });
    }
    for i in 0..p {
        names.push(if p == 1 {
            "beta3".to_string()
        } else {
            format!("beta3_{i}")
        });
    }
    names
}

/// Aggregates per-replication records: mean bias, sample standard deviation,
/// and rejection frequency per (estimator, coefficient).
pub fn summarize(
    cfg: &McConfig,
    records: &[RepRecord],
    failed_reps: usize,
    failure_histogram: BTreeMap<String, usize>,
) -> McSummary {
    let truth = cfg.dgp.beta.flat();
    let names = coefficient_names(cfg.dgp.beta.beta2.len());
    let mut rows = Vec::new();
    for spec in &cfg.estimators {
        let label = spec.label();
        let ok_records: Vec<&RepRecord> = records
            .iter()
            .filter(|r| r.estimator == label && r.ok)
            .collect();
        for (j, name) in names.iter().enumerate() {
            let biases: Vec<f64> = ok_records.iter().map(|r| r.beta[j] - truth[j]).collect();
            let n_ok = biases.len();
            let (mean_bias, std) = mean_and_sd(&biases);
            let size = if n_ok == 0 {
                f64::NAN
            } else {
                ok_records.iter().filter(|r| r.reject[j]).count() as f64 / n_ok as f64
            };
            rows.push(SummaryRow {
                estimator: label.clone(),
                coefficient: name.clone(),
                mean_bias,
                std,
                size,
                n_ok,
            });
        }
    }
    let degree_values: Vec<f64> = {
        let mut seen = std::collections::BTreeSet::new();
        records
            .iter()
            .filter(|r| seen.insert(r.rep) && r.mean_degree.is_finite())
            .map(|r| r.mean_degree)
            .collect()
    };
    let mean_degree = if degree_values.is_empty() {
        f64::NAN
    } else {
        degree_values.iter().sum::<f64>() / degree_values.len() as f64
    };
    let k_star = modal_k(records);
    McSummary {
        rows,
        mean_degree,
        reps: cfg.reps,
        failed_reps,
        failure_histogram,
        k_star,
    }
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

fn modal_k(records: &[RepRecord]) -> Option<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut seen = std::collections::BTreeSet::new();
    for r in records {
        if let Some(k) = r.k_star {
            if seen.insert(r.rep) {
                *counts.entry(k).or_default() += 1;
            }
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(k, _)| k)
}

fn write_raw_reps(path: &Path, records: &[RepRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(csv_err(path))?;
    wtr.write_record([
        "rep",
        "estimator",
        "ok",
        "error",
        "beta1",
        "beta2",
        "beta3",
        "se1",
        "se2",
        "se3",
        "rej1",
        "rej2",
        "rej3",
        "k_used",
        "n_dropped",
        "mean_degree",
        "k_star",
    ])
    .map_err(csv_err(path))?;
    for r in records {
        let get = |v: &Vec<f64>, j: usize| {
            v.get(j).map(|x| x.to_string()).unwrap_or_default()
        };
        let rej = |j: usize| {
            r.reject
                .get(j)
                .map(|&b| if b { "1" } else { "0" }.to_string())
                .unwrap_or_default()
        };
        wtr.write_record([
            r.rep.to_string(),
            r.estimator.clone(),
            if r.ok { "1".into() } else { "0".into() },
            r.error.clone(),
            get(&r.beta, 0),
            get(&r.beta, 1),
            get(&r.beta, 2),
            get(&r.se, 0),
            get(&r.se, 1),
            get(&r.se, 2),
            rej(0),
            rej(1),
            rej(2),
            r.k_used.to_string(),
            r.n_dropped.to_string(),
            r.mean_degree.to_string(),
            r.k_star.map(|k| k.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err(path))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Wide table mirroring the paper's layout: one block of rows per
/// coefficient (mean bias / std / size), one column per estimator.
fn write_summary(path: &Path, cfg: &McConfig, summary: &McSummary) -> Result<()> {
    let labels: Vec<String> = cfg.estimators.iter().map(|e| e.label()).collect();
    let names = coefficient_names(cfg.dgp.beta.beta2.len());
    let mut wtr = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header = vec!["coefficient".to_string(), "statistic".to_string()];
    header.extend(labels.iter().cloned());
    wtr.write_record(&header).map_err(csv_err(path))?;
    for name in &names {
        for stat in ["mean_bias", "std", "size"] {
            let mut row = vec![name.clone(), stat.to_string()];
            for label in &labels {
                let cell = summary
                    .row(label, name)
                    .map(|r| match stat {
                        "mean_bias" => r.mean_bias,
                        "std" => r.std,
                        _ => r.size,
                    })
                    .map(|v| v.to_string())
                    .unwrap_or_default();
                row.push(cell);
            }
            wtr.write_record(&row).map_err(csv_err(path))?;
        }
    }
    wtr.flush()?;
    Ok(())
}

fn write_run_meta(path: &Path, cfg: &McConfig, summary: &McSummary) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "config_hash = \"{}\"", cfg.config_hash())?;
    writeln!(f, "seed = {}", cfg.dgp.seed)?;
    writeln!(f, "reps = {}", cfg.reps)?;
    writeln!(f, "n = {}", cfg.dgp.n)?;
    writeln!(f, "mean_degree_realized = {}", summary.mean_degree)?;
    writeln!(f, "failed_reps = {}", summary.failed_reps)?;
    if let Some(k) = summary.k_star {
        writeln!(f, "k_star = {k}")?;
    }
    Ok(())
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Parse {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}
