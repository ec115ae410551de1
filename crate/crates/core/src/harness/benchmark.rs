use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Cell, ExperimentConfig, SampleSource};
use super::pipeline::{build_query, recommend, Artifacts};
use super::verify::verify_ce;
use crate::error::{Error, Result};
use crate::mio::{self, CeStatus};
use crate::solver::SolveLimits;

/// Outcome of one attempted query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub cell: String,
    pub fold: usize,
    pub user_id: String,
    pub item_id: String,
    pub target_rank_before: usize,
    pub status: Option<CeStatus>,
    pub error: Option<String>,
    pub l1_distance: Option<f64>,
    pub exact_ll: Option<f64>,
    pub encoded_ll: Option<f64>,
    pub target_rank_after: Option<usize>,
    pub still_in_top_k: Option<bool>,
    /// Independent re-check of the validity rule.
    pub verified: Option<bool>,
    pub solve_seconds: f64,
    pub nodes_explored: u64,
}

impl QueryRecord {
    pub fn success(&self) -> bool {
        matches!(self.status, Some(CeStatus::Optimal | CeStatus::FeasibleTimeLimit))
    }
}

/// Aggregates for one benchmark cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub cell: String,
    pub attempts: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub optimal: usize,
    pub optimal_rate: f64,
    pub infeasible: usize,
    pub time_limit: usize,
    pub errors: usize,
    /// Infeasible failures over all failures.
    pub infeasible_share_of_failures: Option<f64>,
    pub ll_mean: Option<f64>,
    pub ll_std: Option<f64>,
    pub l1_mean: Option<f64>,
    pub l1_std: Option<f64>,
    pub seconds_mean: f64,
    pub seconds_median: f64,
    pub still_in_top_k_rate: Option<f64>,
    pub verified_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config_hash: String,
    pub k: usize,
    pub cells: Vec<CellMetrics>,
    pub records: Vec<QueryRecord>,
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (Some(mean), Some(std))
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

fn rate(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 / whole as f64
    }
}

pub fn summarize(label: &str, records: &[&QueryRecord]) -> CellMetrics {
    let attempts = records.len();
    let ok: Vec<&&QueryRecord> = records.iter().filter(|r| r.success()).collect();
    let count = |s: CeStatus| records.iter().filter(|r| r.status == Some(s)).count();
    let optimal = count(CeStatus::Optimal);
    let infeasible = count(CeStatus::Infeasible);
    let time_limit = count(CeStatus::TimeLimitNoSolution);
    let errors = records.iter().filter(|r| r.error.is_some()).count();
    let failures = attempts - ok.len();
    let lls: Vec<f64> = ok.iter().filter_map(|r| r.exact_ll).collect();
    let l1s: Vec<f64> = ok.iter().filter_map(|r| r.l1_distance).collect();
    let seconds: Vec<f64> = records.iter().map(|r| r.solve_seconds).collect();
    let (ll_mean, ll_std) = mean_std(&lls);
    let (l1_mean, l1_std) = mean_std(&l1s);
    let flagged = |f: fn(&QueryRecord) -> Option<bool>| {
        let known: Vec<bool> = ok.iter().filter_map(|r| f(r)).collect();
        (!known.is_empty()).then(|| rate(known.iter().filter(|&&b| b).count(), known.len()))
    };
    CellMetrics {
        cell: label.to_string(),
        attempts,
        successes: ok.len(),
        success_rate: rate(ok.len(), attempts),
        optimal,
        optimal_rate: rate(optimal, attempts),
        infeasible,
        time_limit,
        errors,
        infeasible_share_of_failures: (failures > 0).then(|| rate(infeasible, failures)),
        ll_mean,
        ll_std,
        l1_mean,
        l1_std,
        seconds_mean: mean_std(&seconds).0.unwrap_or(0.0),
        seconds_median: median(&seconds),
        still_in_top_k_rate: flagged(|r| r.still_in_top_k),
        verified_rate: flagged(|r| r.verified),
    }
}

/// Users explanations are generated for in `fold`, sorted.
pub fn sample_users(cfg: &ExperimentConfig, art: &Artifacts, fold: usize) -> Vec<usize> {
    let pool = match cfg.sample_from {
        SampleSource::HeldOut => art.split.users_in(fold),
        SampleSource::Training => art.split.users_outside(fold),
    };
    let eligible: Vec<usize> = pool
        .into_iter()
        .filter(|&u| art.data.matrix.row(u).len() >= cfg.k)
        .collect();
    let amount = cfg.users_sampled.min(eligible.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (0x5EED_0000 + fold as u64));
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, eligible.len(), amount)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    picked.sort_unstable();
    picked
}

struct Job {
    fold: usize,
    user: usize,
    target: usize,
    rank_before: usize,
    cell: usize,
}

fn run_job(cfg: &ExperimentConfig, art: &Artifacts, job: &Job, limits: &SolveLimits) -> QueryRecord {
    let cell: &Cell = &cfg.cells[job.cell];
    let m = &art.data.matrix;
    let mut record = QueryRecord {
        cell: cell.label(),
        fold: job.fold,
        user_id: m.user_ids()[job.user].clone(),
        item_id: m.item_ids()[job.target].clone(),
        target_rank_before: job.rank_before,
        status: None,
        error: None,
        l1_distance: None,
        exact_ll: None,
        encoded_ll: None,
        target_rank_after: None,
        still_in_top_k: None,
        verified: None,
        solve_seconds: 0.0,
        nodes_explored: 0,
    };
    let model = &art.models[job.fold];
    let outcome = (|| {
        let x = m.dense_row(job.user);
        let rec = recommend(model, &x, cfg.k)?;
        let query = build_query(cfg, cell, &art.data, &rec, x, job.target, &art.networks[job.fold]);
        let result = mio::explain(&query, model, Some(art.spn_context(job.fold)), limits)?;
        let report = match &result.counterfactual {
            Some(cf) => Some(verify_ce(model, &query, cf)?),
            None => None,
        };
        Ok::<_, Error>((result, report))
    })();
    match outcome {
        Ok((result, report)) => {
            record.status = Some(result.status);
            record.l1_distance = result.l1_distance;
            record.exact_ll = result.exact_ll;
            record.encoded_ll = result.encoded_ll;
            record.target_rank_after = result.target_rank_after;
            record.solve_seconds = result.solve_seconds;
            record.nodes_explored = result.nodes_explored;
            if let Some(report) = report {
                record.still_in_top_k = Some(!report.left_top_k);
                record.verified = Some(report.valid);
            }
        }
        Err(e) => {
            log::warn!("{} user {} item {}: {e}", record.cell, record.user_id, record.item_id);
            record.error = Some(e.to_string());
        }
    }
    record
}

/// Runs every configured cell over the sampled users of every fold.
pub fn benchmark_with(cfg: &ExperimentConfig, art: &Artifacts) -> Result<MetricsReport> {
    let mut jobs = Vec::new();
    for fold in 0..cfg.fold_count {
        for user in sample_users(cfg, art, fold) {
            let x = art.data.matrix.dense_row(user);
            let rec = recommend(&art.models[fold], &x, cfg.k)?;
            for (rank, &target) in rec.top.iter().take(cfg.items_per_user).enumerate() {
                for cell in 0..cfg.cells.len() {
                    jobs.push(Job {
                        fold,
                        user,
                        target,
                        rank_before: rank + 1,
                        cell,
                    });
                }
            }
        }
    }
    log::info!("benchmark: {} queries over {} cells", jobs.len(), cfg.cells.len());
    let limits = SolveLimits {
        time_limit_seconds: cfg.time_limit_seconds,
        ..SolveLimits::default()
    };
    let slots: Vec<Mutex<Option<QueryRecord>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..cfg.workers.min(jobs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let record = run_job(cfg, art, &jobs[i], &limits);
                *slots[i].lock().expect("slot lock") = Some(record);
            });
        }
    });
    let records: Vec<QueryRecord> = slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot lock").expect("every job ran"))
        .collect();
    let cells = cfg
        .cells
        .iter()
        .map(|cell| {
            let label = cell.label();
            let mine: Vec<&QueryRecord> = records.iter().filter(|r| r.cell == label).collect();
            summarize(&label, &mine)
        })
        .collect();
    Ok(MetricsReport {
        config_hash: art.config_hash.clone(),
        k: cfg.k,
        cells,
        records,
    })
}

/// Writes `benchmark_<hash>.csv` (one row per cell) and
/// `benchmark_<hash>.json` (cells plus per-query records).
pub fn write_report(report: &MetricsReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(format!("benchmark_{}.csv", report.config_hash));
    let mut writer = csv::Writer::from_path(&csv_path).map_err(|e| Error::Data(format!("{}: {e}", csv_path.display())))?;
    for cell in &report.cells {
        writer
            .serialize(cell)
            .map_err(|e| Error::Data(format!("{}: {e}", csv_path.display())))?;
    }
    writer.flush().map_err(|e| Error::io(&csv_path, e))?;
    let json_path = dir.join(format!("benchmark_{}.json", report.config_hash));
    fs::write(&json_path, serde_json::to_string_pretty(report)?).map_err(|e| Error::io(&json_path, e))?;
    Ok((csv_path, json_path))
}
