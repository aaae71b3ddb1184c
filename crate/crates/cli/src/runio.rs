//! Run-directory artifacts: config snapshot, progress CSV, assignment CSV,
//! checkpoints, and the CSV readers used by plotting and aggregation.
//!
//! Every output file embeds the config hash and seed (CSV/SVG as a leading
//! comment, checkpoints as a `run_meta` tensor of u16 halves), and writers
//! are deterministic so a re-run reproduces identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rmdp_core::envs::EnvConfig;
use rmdp_core::nn::{save_tensors, TensorRecord};
use rmdp_core::train::{self, Algorithm, RunOutcome};
use rmdp_core::{AssignmentMatrix, Error, Result};

use crate::config::RunConfig;

pub struct RunArtifacts {
    pub dir: PathBuf,
    pub final_social_welfare: f64,
}

fn meta_line(hash: &str, seed: u64) -> String {
    format!("# config_hash={hash} seed={seed}\n")
}

/// Executes one seeded run and writes its artifact directory.
pub fn execute_run(cfg: &RunConfig, dir: &Path) -> Result<RunArtifacts> {
    std::fs::create_dir_all(dir)?;
    let train_cfg = cfg.train_config()?;
    let outcome = train::run(cfg.algorithm, &train_cfg)?;
    write_run_dir(cfg, &train_cfg.env, &outcome, dir)?;
    Ok(RunArtifacts { dir: dir.to_path_buf(), final_social_welfare: outcome.social_welfare })
}

pub fn write_run_dir(
    cfg: &RunConfig,
    env: &EnvConfig,
    outcome: &RunOutcome,
    dir: &Path,
) -> Result<()> {
    let hash = cfg.hash();
    let meta = meta_line(&hash, cfg.seed);

    std::fs::write(dir.join("config.txt"), format!("{meta}{}", cfg.snapshot()))?;

    let mut progress = String::new();
    progress.push_str(&meta);
    progress.push_str("step,transitions_per_policy,algo,env,n,k,seed,social_welfare");
    for j in 0..cfg.k {
        let _ = write!(progress, ",count_{j}");
    }
    progress.push('\n');
    for point in &outcome.history {
        let _ = write!(
            progress,
            "{},{},{},{},{},{},{},{:.9}",
            point.round,
            point.transitions_per_policy,
            cfg.algorithm.as_str(),
            cfg.env.as_str(),
            cfg.n,
            cfg.k,
            cfg.seed,
            point.social_welfare
        );
        for c in &point.rep_counts {
            let _ = write!(progress, ",{c}");
        }
        progress.push('\n');
    }
    std::fs::write(dir.join("progress.csv"), progress)?;

    let mut assign = String::new();
    assign.push_str(&meta);
    for i in 0..outcome.final_alpha.n() {
        for j in 0..outcome.final_alpha.k() {
            if j > 0 {
                assign.push(',');
            }
            let _ = write!(assign, "{:.9}", outcome.final_alpha.get(i, j));
        }
        assign.push('\n');
    }
    std::fs::write(dir.join("assignment.csv"), assign)?;

    if let EnvConfig::VelocityTrack(vt) = env {
        let mut targets = String::new();
        targets.push_str(&meta);
        targets.push_str("agent,target\n");
        for (i, t) in vt.targets.iter().enumerate() {
            let _ = writeln!(targets, "{i},{t:.9}");
        }
        std::fs::write(dir.join("targets.csv"), targets)?;
    }

    let mut tensors = outcome.policies.tensors("");
    tensors.push(run_meta_tensor(&hash, cfg.seed));
    save_tensors(&dir.join("policies.ckpt"), &tensors)?;
    Ok(())
}

/// Config hash and seed as exactly-representable u16 halves.
fn run_meta_tensor(hash_hex: &str, seed: u64) -> TensorRecord {
    let hash = u32::from_str_radix(hash_hex, 16).unwrap_or(0);
    let seed32 = seed as u32;
    TensorRecord::new(
        "run_meta",
        vec![4],
        vec![
            (hash >> 16) as f32,
            (hash & 0xffff) as f32,
            (seed32 >> 16) as f32,
            (seed32 & 0xffff) as f32,
        ],
    )
}

/// One parsed CSV: header names and rows of string fields. Comment lines
/// (`#`) are skipped but the first one's metadata is retained.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub meta: Option<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut meta = None;
        let mut header: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('#') {
                if meta.is_none() {
                    meta = Some(line.trim_start_matches('#').trim().to_string());
                }
                continue;
            }
            let fields: Vec<String> = line.split(',').map(|f| f.trim().to_string()).collect();
            match &header {
                None => header = Some(fields),
                Some(h) => {
                    if fields.len() != h.len() {
                        return Err(Error::Parse {
                            line: idx + 1,
                            msg: format!(
                                "row has {} fields, header has {}",
                                fields.len(),
                                h.len()
                            ),
                        });
                    }
                    rows.push(fields);
                }
            }
        }
        Ok(Self {
            meta,
            header: header.ok_or_else(|| Error::invalid("empty csv"))?,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::invalid(format!("csv has no column `{name}`")))
    }

    pub fn f64_at(&self, row: usize, col: usize) -> Result<f64> {
        self.rows[row][col].parse().map_err(|_| Error::Parse {
            line: row + 1,
            msg: format!("bad number `{}`", self.rows[row][col]),
        })
    }
}

/// Headerless assignment matrix (n rows, k columns of decimals).
pub fn read_assignment_csv(path: &Path) -> Result<AssignmentMatrix> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|f| {
                f.trim().parse().map_err(|_| Error::Parse {
                    line: idx + 1,
                    msg: format!("bad number `{f}`"),
                })
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::invalid("assignment csv has no rows"));
    }
    let k = rows[0].len();
    let mut flat = Vec::with_capacity(rows.len() * k);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != k {
            return Err(Error::Parse { line: i + 1, msg: "ragged assignment csv".into() });
        }
        flat.extend_from_slice(row);
    }
    let matrix = ndarray::Array2::from_shape_vec((rows.len(), k), flat)
        .map_err(|e| Error::invalid(e.to_string()))?;
    AssignmentMatrix::new(matrix)
}

/// Directory name for one sweep cell.
pub fn cell_dir(base: &Path, algo: Algorithm, k: usize, seed: u64) -> PathBuf {
    base.join(format!("{}_k{k}_seed{seed}", algo.as_str()))
}
