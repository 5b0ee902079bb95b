use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eot_bench::experiment::{run_one, Instance, RunSpec};
use eot_bench::{run_experiment, BenchError, ExperimentConfig, ImageSelector};
use eot_core::oracle::{dual_ascent_reference, lp_transport_simplex};
use eot_core::{Fidelity, Method, Problem};
use serde_json::json;

const EXIT_CONVERGED: u8 = 0;
const EXIT_INPUT: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;

#[derive(Parser)]
#[command(name = "eot-bench", version, about = "Euclidean-regularised optimal transport benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InstanceArgs {
    /// Source image as <idx file>:<index>
    #[arg(long, value_name = "FILE:INDEX", requires = "target_idx", conflicts_with = "instance")]
    source_idx: Option<ImageSelector>,
    /// Target image as <idx file>:<index>
    #[arg(long, value_name = "FILE:INDEX", requires = "source_idx")]
    target_idx: Option<ImageSelector>,
    /// JSON instance {"a": [..], "b": [..], "cost": [[..]]} instead of images
    #[arg(long, value_name = "JSON")]
    instance: Option<PathBuf>,
    /// Keep raw costs instead of scaling to ‖C‖∞ = 1
    #[arg(long)]
    no_normalise_cost: bool,
}

impl InstanceArgs {
    fn load(&self) -> Result<Instance, BenchError> {
        let normalise = !self.no_normalise_cost;
        match (&self.source_idx, &self.target_idx, &self.instance) {
            (Some(s), Some(t), None) => Instance::from_images(s, t, normalise),
            (None, None, Some(path)) => Instance::from_json(path, normalise),
            _ => Err(BenchError::Input("give --source-idx and --target-idx, or --instance".into())),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one pipeline and write trace.csv and summary.json
    Solve {
        /// euclid-sinkhorn, apdagd, aam, clvr or entropy-sinkhorn
        #[arg(long)]
        method: Method,
        /// Target accuracy on the transport cost
        #[arg(long, allow_hyphen_values = true)]
        epsilon: f64,
        #[command(flatten)]
        input: InstanceArgs,
        /// Seed for clvr; ignored by the deterministic methods
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        max_iters: usize,
        /// `printed` keeps the uncorrected update rules
        #[arg(long, default_value = "corrected")]
        fidelity: Fidelity,
        /// Record every N-th iteration (0 keeps only the last)
        #[arg(long, default_value_t = 1)]
        trace_every: usize,
        /// Write real elapsed seconds instead of zeros
        #[arg(long)]
        wall_clock: bool,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact LP optimum or high-precision dual maximiser for a small instance
    Oracle {
        /// Exact unregularised optimum by the transportation simplex
        #[arg(long, required_unless_present = "dual", conflicts_with = "dual")]
        lp: bool,
        /// Regularised dual optimum by plain gradient ascent
        #[arg(long)]
        dual: bool,
        #[command(flatten)]
        input: InstanceArgs,
        /// Regulariser for --dual
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
        /// Gradient-norm tolerance for --dual
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 10_000_000)]
        max_iters: usize,
        /// Write the result here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every (method, epsilon, seed) from a JSON config
    Experiment {
        /// JSON experiment description
        #[arg(long)]
        config: PathBuf,
    },
}

fn solve(spec: RunSpec, input: &InstanceArgs, out: PathBuf) -> Result<u8, BenchError> {
    let inst = input.load()?;
    let (summary, _) = run_one(&inst, &spec, &out, "trace")?;
    std::fs::rename(out.join("trace.json"), out.join("summary.json")).map_err(|e| BenchError::Io {
        path: out.join("summary.json"),
        source: e,
    })?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if let Some(err) = summary.error {
        eprintln!("error: {err}");
        return Ok(EXIT_INPUT);
    }
    Ok(if summary.converged { EXIT_CONVERGED } else { EXIT_NOT_CONVERGED })
}

fn oracle(lp: bool, input: &InstanceArgs, gamma: f64, tol: f64, max_iters: usize, out: Option<PathBuf>) -> Result<u8, BenchError> {
    let inst = input.load()?;
    let report = if lp {
        let sol = lp_transport_simplex(&inst.a, &inst.b, &inst.cost)?;
        json!({
            "value": sol.value,
            "basis": sol.basis,
            "plan": sol.plan.entries().rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
        })
    } else {
        let p = Problem::new(inst.a, inst.b, inst.cost, gamma)?;
        let r = dual_ascent_reference(&p, tol, max_iters)?;
        json!({
            "value": r.value,
            "gradient_norm": r.gradient_norm,
            "iterations": r.iterations,
            "r2": r.r2,
            "lambda": r.dual.lambda.to_vec(),
            "mu": r.dual.mu.to_vec(),
        })
    };
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match out {
        Some(path) => std::fs::write(&path, text).map_err(|e| BenchError::Io { path, source: e })?,
        None => print!("{text}"),
    }
    Ok(EXIT_CONVERGED)
}

fn run(cli: Cli) -> Result<u8, BenchError> {
    match cli.command {
        Command::Solve {
            method,
            epsilon,
            input,
            seed,
            max_iters,
            fidelity,
            trace_every,
            wall_clock,
            out,
        } => {
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(BenchError::Input(format!("--epsilon must be positive, got {epsilon}")));
            }
            let spec = RunSpec {
                method,
                epsilon,
                seed,
                max_iter: max_iters,
                fidelity,
                trace_every,
                wall_clock,
            };
            solve(spec, &input, out)
        }
        Command::Oracle {
            lp,
            input,
            gamma,
            tol,
            max_iters,
            out,
            ..
        } => oracle(lp, &input, gamma, tol, max_iters, out),
        Command::Experiment { config } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let runs = run_experiment(&cfg)?;
            for r in &runs {
                let status = match (&r.error, r.converged) {
                    (Some(e), _) => format!("error: {e}"),
                    (None, true) => "converged".to_string(),
                    (None, false) => "not converged".to_string(),
                };
                println!(
                    "{:<16} eps={:<8e} seed={:<3} iters={:<7} cost={:<12} {status}",
                    r.method.to_string(),
                    r.epsilon,
                    r.seed,
                    r.iterations.map_or("-".into(), |i| i.to_string()),
                    r.final_cost.map_or("-".into(), |c| format!("{c:.6e}")),
                );
            }
            Ok(if runs.iter().all(|r| r.converged) { EXIT_CONVERGED } else { EXIT_NOT_CONVERGED })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_CONVERGED };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
