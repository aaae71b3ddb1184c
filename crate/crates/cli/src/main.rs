use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rmdp_cli::config::RunConfig;
use rmdp_cli::plot::{plot_file, PlotKind};
use rmdp_cli::runio::execute_run;
use rmdp_cli::sweep::{run_sweep, SweepPlan};
use rmdp_cli::verify::run_verify;
use rmdp_core::envs::{rg_optimal_oracle, vt_partition_oracle, ResourceGatheringConfig};
use rmdp_core::train::{stream_rng, Algorithm, STREAM_ENV};
use rmdp_core::EnvId;

#[derive(Parser)]
#[command(
    name = "rmdp",
    about = "Train k representative policies and an agent assignment under a policy budget"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One seeded training run; writes a run directory.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (default: runs/<algo>_k<k>_seed<seed>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use the full-scale training budgets instead of desk scale.
        #[arg(long)]
        full: bool,
        /// key=value config overrides.
        overrides: Vec<String>,
    },
    /// Cross product of algorithms, budgets k and seeds, with aggregation.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated list of k values.
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        /// Number of seeds (0..seeds).
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        /// Comma-separated algorithms (default: the template's algorithm).
        #[arg(long, value_delimiter = ',')]
        algos: Vec<String>,
        #[arg(long)]
        full: bool,
        overrides: Vec<String>,
    },
    /// Renders an SVG from run/sweep CSV outputs.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: PathBuf,
        /// Dashed reference line: "auto" (gridworld optimum), "none", or a number.
        #[arg(long, default_value = "auto")]
        oracle: String,
    },
    /// Runs the numerical and convergence verification suite.
    Verify {
        /// Also check a tabular instance file.
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Prints the exact environment oracles.
    Oracle {
        #[arg(long, default_value = "resource_gathering")]
        env: String,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2.5)]
        b: f64,
    },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch() -> rmdp_core::Result<ExitCode> {
    match Cli::parse().command {
        Command::Run { config, out, full, overrides } => {
            let mut cfg = RunConfig::load(config.as_deref(), &overrides)?;
            cfg.full = full;
            let dir = out.unwrap_or_else(|| {
                PathBuf::from("runs").join(format!(
                    "{}_k{}_seed{}",
                    cfg.algorithm.as_str(),
                    cfg.k,
                    cfg.seed
                ))
            });
            let artifacts = execute_run(&cfg, &dir)?;
            println!(
                "run complete: social_welfare={:.4} dir={}",
                artifacts.final_social_welfare,
                artifacts.dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config, out, k, seeds, algos, full, overrides } => {
            let mut template = RunConfig::load(config.as_deref(), &overrides)?;
            template.full = full;
            let algorithms = if algos.is_empty() {
                vec![template.algorithm]
            } else {
                algos
                    .iter()
                    .map(|a| a.parse::<Algorithm>())
                    .collect::<rmdp_core::Result<Vec<_>>>()?
            };
            let k_values = if k.is_empty() { vec![template.k] } else { k };
            let plan = SweepPlan {
                template,
                algorithms,
                k_values,
                seeds: (0..seeds).collect(),
            };
            let cells = run_sweep(&plan, &out)?;
            let mut failures = 0usize;
            for cell in &cells {
                let ok: Vec<f64> = cell
                    .welfare_per_seed
                    .iter()
                    .filter_map(|(_, r)| r.as_ref().ok().copied())
                    .collect();
                failures += cell.welfare_per_seed.len() - ok.len();
                let (mean, se) = if ok.is_empty() {
                    (f64::NAN, f64::NAN)
                } else {
                    rmdp_cli::sweep::mean_and_se(&ok)
                };
                println!(
                    "{:<12} k={:<3} seeds={} mean_sw={mean:.4} se={se:.4}",
                    cell.algorithm.as_str(),
                    cell.k,
                    ok.len()
                );
            }
            println!("aggregate written to {}", out.join("aggregate.csv").display());
            Ok(if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Plot { input, kind, out, oracle } => {
            let kind: PlotKind = kind.parse()?;
            let reference = match oracle.as_str() {
                "none" => None,
                "auto" => match kind {
                    PlotKind::SwVsK => {
                        Some(rg_optimal_oracle(&ResourceGatheringConfig::default()).1)
                    }
                    _ => None,
                },
                value => Some(value.parse::<f64>().map_err(|_| {
                    rmdp_core::Error::invalid(format!("bad oracle value `{value}`"))
                })?),
            };
            plot_file(&input, kind, &out, reference)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { instance } => {
            let results = run_verify(instance.as_deref())?;
            let mut all_pass = true;
            for r in &results {
                println!("{}", r.line());
                all_pass &= r.pass;
            }
            Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Oracle { env, n, k, seed, b } => {
            match env.parse::<EnvId>()? {
                EnvId::ResourceGathering | EnvId::Tabular => {
                    let cfg = ResourceGatheringConfig::default();
                    let (per_agent, sw) = rg_optimal_oracle(&cfg);
                    println!("resource_gathering optimal social welfare: {sw}");
                    for row in 0..cfg.grid_side {
                        let line: Vec<String> = (0..cfg.grid_side)
                            .map(|col| format!("{:5.1}", per_agent[cfg.cell_index(row, col)]))
                            .collect();
                        println!("{}", line.join(" "));
                    }
                }
                EnvId::VelocityTrack => {
                    let mut rng = stream_rng(seed, STREAM_ENV);
                    let cfg = rmdp_core::envs::VelocityTrackConfig::sample(n, b, 200, &mut rng);
                    let (sw, bounds) = vt_partition_oracle(&cfg.targets, k, b)?;
                    println!(
                        "velocity_track reference social welfare (n={n}, k={k}, b={b}, seed={seed}): {sw:.4}"
                    );
                    let mut sorted = cfg.targets.clone();
                    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    for (lo, hi) in bounds {
                        println!(
                            "segment [{lo:3}, {hi:3}): targets {:.3} .. {:.3}",
                            sorted[lo],
                            sorted[hi - 1]
                        );
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
