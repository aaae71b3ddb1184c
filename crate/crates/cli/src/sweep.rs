//! Cross-product sweeps over (algorithm, k, seed) with an aggregate CSV of
//! means and standard errors per cell.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use rmdp_core::train::Algorithm;
use rmdp_core::Result;

use crate::config::{fnv1a, RunConfig};
use crate::runio::{cell_dir, execute_run, CsvTable};

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub template: RunConfig,
    pub algorithms: Vec<Algorithm>,
    pub k_values: Vec<usize>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub algorithm: Algorithm,
    pub k: usize,
    /// Final welfare per seed; failed runs carry their error message.
    pub welfare_per_seed: Vec<(u64, std::result::Result<f64, String>)>,
}

/// Sample mean and standard error (std / sqrt(count), ddof = 1).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0);
    (mean, (var / count).sqrt())
}

/// Runs every cell (in parallel), writing per-run directories under `out`
/// plus `aggregate.csv`. Failed runs are recorded and the sweep continues.
pub fn run_sweep(plan: &SweepPlan, out: &Path) -> Result<Vec<CellResult>> {
    std::fs::create_dir_all(out)?;
    let mut jobs = Vec::new();
    for &algo in &plan.algorithms {
        for &k in &plan.k_values {
            for &seed in &plan.seeds {
                jobs.push((algo, k, seed));
            }
        }
    }

    let outcomes: Vec<(Algorithm, usize, u64, std::result::Result<f64, String>)> = jobs
        .par_iter()
        .map(|&(algo, k, seed)| {
            let mut cfg = plan.template.clone();
            cfg.algorithm = algo;
            cfg.k = k;
            cfg.seed = seed;
            let result = cfg
                .train_config()
                .and_then(|_| execute_run(&cfg, &cell_dir(out, algo, k, seed)))
                .map(|a| a.final_social_welfare)
                .map_err(|e| e.to_string());
            (algo, k, seed, result)
        })
        .collect();

    let mut cells: Vec<CellResult> = Vec::new();
    for &algo in &plan.algorithms {
        for &k in &plan.k_values {
            let welfare_per_seed: Vec<(u64, std::result::Result<f64, String>)> = outcomes
                .iter()
                .filter(|(a, kk, _, _)| *a == algo && *kk == k)
                .map(|(_, _, seed, r)| (*seed, r.clone()))
                .collect();
            cells.push(CellResult { algorithm: algo, k, welfare_per_seed });
        }
    }

    write_aggregate(&cells, &plan.template, out)?;
    Ok(cells)
}

pub fn write_aggregate(cells: &[CellResult], template: &RunConfig, out: &Path) -> Result<()> {
    let mut csv = String::new();
    // The sweep hash covers the template without per-cell fields.
    let hash = format!("{:08x}", fnv1a(template.snapshot().as_bytes()));
    let _ = writeln!(csv, "# config_hash={hash} seed=sweep");
    csv.push_str("algo,env,k,seeds,failures,mean_sw,se_sw\n");
    for cell in cells {
        let ok: Vec<f64> = cell
            .welfare_per_seed
            .iter()
            .filter_map(|(_, r)| r.as_ref().ok().copied())
            .collect();
        let failures = cell.welfare_per_seed.len() - ok.len();
        let (mean, se) = if ok.is_empty() { (f64::NAN, f64::NAN) } else { mean_and_se(&ok) };
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{:.9},{:.9}",
            cell.algorithm.as_str(),
            template.env.as_str(),
            cell.k,
            ok.len(),
            failures,
            mean,
            se
        );
    }
    std::fs::write(out.join("aggregate.csv"), csv)?;
    Ok(())
}

/// Recomputes a cell's mean/SE from its raw run CSVs (consistency check and
/// aggregation-from-disk path).
pub fn recompute_cell_from_disk(
    out: &Path,
    algo: Algorithm,
    k: usize,
    seeds: &[u64],
) -> Result<(f64, f64)> {
    let mut finals = Vec::new();
    for &seed in seeds {
        let table = CsvTable::read(&cell_dir(out, algo, k, seed).join("progress.csv"))?;
        let sw_col = table.column("social_welfare")?;
        let last = table.rows.len() - 1;
        finals.push(table.f64_at(last, sw_col)?);
    }
    Ok(mean_and_se(&finals))
}
