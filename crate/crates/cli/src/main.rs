//! `ratelqg` — minimal communication rate for LQG control with a noisy plant
//! observation, and the encoder/controller that realizes it.
//!
//! Exit codes: 0 solved (optimal or zero-rate), 2 infeasible budget,
//! 1 any error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ratelqg::model::{self, CostModel, SystemModel};
use ratelqg::sdp::{SolveStatus, SolverOptions};
use ratelqg::sim::{self, SimConfig};
use ratelqg::synthesis;

use ratelqg_cli::pipeline::{self, solve_instance, status_tag, write_tradeoff_csv};
use ratelqg_cli::reproduce;

#[derive(Parser)]
#[command(name = "ratelqg", version, about = "Rate-cost co-design for LQG control with side information")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SolverFlags {
    /// Outer barrier stop: ν/τ below this
    #[arg(long)]
    tol: Option<f64>,
    /// Newton iteration cap per barrier stage
    #[arg(long)]
    max_newton: Option<usize>,
    /// Barrier parameter multiplier per stage
    #[arg(long)]
    mu_factor: Option<f64>,
}

impl SolverFlags {
    fn to_options(&self) -> SolverOptions {
        let mut opts = SolverOptions::default();
        if let Some(t) = self.tol {
            opts.gap_tol = t;
        }
        if let Some(m) = self.max_newton {
            opts.max_newton = m;
        }
        if let Some(m) = self.mu_factor {
            opts.mu_factor = m;
        }
        opts
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance: minimal rate and the policy achieving it
    Solve {
        /// Problem instance (JSON)
        #[arg(long)]
        config: PathBuf,
        /// Policy output path (JSON)
        #[arg(long, default_value = "policy.json")]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Sweep the config's gamma_sweep budgets and write a CSV
    Tradeoff {
        #[arg(long)]
        config: PathBuf,
        /// CSV output path
        #[arg(long, default_value = "tradeoff.csv")]
        out: PathBuf,
        /// Concurrent sweep points
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Monte Carlo validation of a solved policy
    Simulate {
        /// Policy file from `solve`
        #[arg(long)]
        policy: PathBuf,
        /// Report output path (JSON)
        #[arg(long, default_value = "sim_report.json")]
        out: PathBuf,
        /// Steps per batch (finite-horizon policies: must equal T; default T)
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        burn_in: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        batches: usize,
        /// Optional per-step trajectory CSV (batch 0)
        #[arg(long)]
        traj_csv: Option<PathBuf>,
    },
    /// Emit the benchmark trade-off curves (one CSV per curve)
    #[command(name = "reproduce-paper")]
    ReproducePaper {
        /// Which figure: fig2 (SNR sweep) or fig3 (observability sweep)
        #[arg(long)]
        figure: String,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Eigenvalues, stabilization rate, and rank diagnostics
    Spectral {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(config: &Path) -> ratelqg::Result<(SystemModel, CostModel, Option<Vec<f64>>, u64)> {
    let cfg = model::load_config(config)?;
    Ok((cfg.model, cfg.cost, cfg.gamma_sweep, cfg.seed))
}

fn cmd_solve(config: &Path, out: &Path, flags: &SolverFlags) -> ratelqg::Result<u8> {
    let (model, cost, _, _) = load(config)?;
    let outcome = solve_instance(&model, &cost, &flags.to_options())?;
    println!("status: {}", status_tag(outcome.status));
    println!(
        "gamma: {}  (min {:.6}, no-comm {:.6})",
        cost.gamma, outcome.bounds.gamma_min, outcome.bounds.gamma_nocomm
    );
    match outcome.status {
        SolveStatus::Optimal | SolveStatus::ZeroRate => {
            println!(
                "rate: {:.6} bits/step ({:.6} nats)",
                outcome.rate_bits, outcome.rate_nats
            );
            let policy = outcome.policy.expect("policy for solved status");
            println!("encoder ranks: {:?}", policy.q_ranks);
            println!("predicted cost: {:.6}", policy.predicted_cost);
            if let Some(rho) = policy.stability_spectral_radius {
                println!("closed-loop spectral radius: {rho:.6}");
            }
            fs::write(out, serde_json::to_string_pretty(&policy)?)?;
            println!("policy written to {}", out.display());
            println!(
                "solver: {} Newton iterations, {:.1} ms",
                outcome.newton_iters,
                outcome.wall.as_secs_f64() * 1e3
            );
            Ok(0)
        }
        SolveStatus::InfeasibleBudget => {
            println!(
                "budget {} is below the perfect-information cost gamma_min = {:.6}; \
                 no communication rate can meet it",
                cost.gamma, outcome.bounds.gamma_min
            );
            Ok(2)
        }
        SolveStatus::MaxIter => Err(ratelqg::Error::Numerical(
            "solver hit the Newton iteration cap; try --max-newton or --tol".into(),
        )),
    }
}

fn cmd_tradeoff(config: &Path, out: &Path, jobs: usize, flags: &SolverFlags) -> ratelqg::Result<u8> {
    let (model, cost, sweep, _) = load(config)?;
    let gammas = sweep.ok_or_else(|| {
        ratelqg::Error::Validation("config has no gamma_sweep array".into())
    })?;
    let rows = pipeline::tradeoff(&model, &cost, &gammas, &flags.to_options(), jobs.max(1));
    let mut buf = Vec::new();
    write_tradeoff_csv(&rows, &mut buf)?;
    fs::write(out, buf)?;
    println!("{} rows written to {}", rows.len(), out.display());
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    policy_path: &Path,
    out: &Path,
    steps: Option<usize>,
    burn_in: usize,
    seed: u64,
    batches: usize,
    traj_csv: Option<&Path>,
) -> ratelqg::Result<u8> {
    let text = fs::read_to_string(policy_path)?;
    let file: synthesis::PolicyFile = serde_json::from_str(&text)?;
    let (model, cost, policy) = synthesis::import_policy(&file)?;
    let default_steps = match policy.mode {
        synthesis::PolicyMode::Finite => policy.d.len(),
        synthesis::PolicyMode::Stationary => 200_000,
    };
    let steps = steps.unwrap_or(default_steps);
    let cfg = SimConfig {
        steps,
        burn_in: burn_in.min(steps.saturating_sub(1)),
        seed,
        batches,
    };
    let report = match traj_csv {
        Some(path) => {
            let mut sink = std::io::BufWriter::new(fs::File::create(path)?);
            let r = sim::simulate_traced(&model, &cost, &policy, &cfg, &mut sink)?;
            sink.flush()?;
            r
        }
        None => sim::simulate(&model, &cost, &policy, &cfg)?,
    };
    println!(
        "empirical cost/step: {:.6} (predicted {:.6})",
        report.empirical_avg_cost, report.predicted_cost
    );
    println!("encoder ranks: {:?}", report.encoder_ranks);
    fs::write(out, serde_json::to_string_pretty(&report)?)?;
    println!("report written to {}", out.display());
    Ok(0)
}

fn cmd_reproduce(figure: &str, out_dir: &Path, jobs: usize, flags: &SolverFlags) -> ratelqg::Result<u8> {
    fs::create_dir_all(out_dir)?;
    let curves = reproduce::figure_curves(figure, &flags.to_options(), jobs.max(1))?;
    for curve in &curves {
        let path = out_dir.join(format!("{}.csv", curve.name));
        let mut buf = Vec::new();
        write_tradeoff_csv(&curve.rows, &mut buf)?;
        fs::write(&path, buf)?;
        println!("wrote {}", path.display());
    }
    Ok(0)
}

fn cmd_spectral(config: &Path) -> ratelqg::Result<u8> {
    let (model, cost, _, _) = load(config)?;
    let rep = model::spectral_report(&model, &cost)?;
    let eigs: Vec<serde_json::Value> = rep
        .eigenvalues
        .iter()
        .map(|l| {
            serde_json::json!({
                "re": l.re,
                "im": l.im,
                "abs": l.norm(),
            })
        })
        .collect();
    let out = serde_json::json!({
        "eigenvalues": eigs,
        "stabilization_rate_bits": rep.stabilization_rate_bits,
        "stabilizable": rep.stabilizable,
        "detectable_y": rep.detectable_y,
        "observable_q": rep.observable_q,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { config, out, solver } => cmd_solve(config, out, solver),
        Command::Tradeoff {
            config,
            out,
            jobs,
            solver,
        } => cmd_tradeoff(config, out, *jobs, solver),
        Command::Simulate {
            policy,
            out,
            steps,
            burn_in,
            seed,
            batches,
            traj_csv,
        } => cmd_simulate(
            policy,
            out,
            *steps,
            *burn_in,
            *seed,
            *batches,
            traj_csv.as_deref(),
        ),
        Command::ReproducePaper {
            figure,
            out_dir,
            jobs,
            solver,
        } => cmd_reproduce(figure, out_dir, *jobs, solver),
        Command::Spectral { config } => cmd_spectral(config),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
