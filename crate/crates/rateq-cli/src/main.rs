//! `rateq` — batch front end for the rate-independent evolution solver.
//!
//! Subcommands: `solve`, `certify`, `adapt`, `converge`, `sweep`. Every run
//! is deterministic: identical config and seed produce byte-identical
//! artifacts.

mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use output::{fmt_f64, to_json_pretty};
use rateq::certify::{adapt_partition, certify_distance, verify_lipschitz, AdaptOptions};
use rateq::functional::{discrete_functional, energy_balance_residual};
use rateq::solver::{solve_theta, solve_theta_inexact, Partition, Trajectory};
use rateq::{Error as RateqError, Extended, Problem};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_ASSERT: u8 = 4;

#[derive(Parser)]
#[command(name = "rateq", version, about = "Rate-independent evolution solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the configured theta.
    #[arg(long)]
    theta: Option<f64>,
    /// Override the configured uniform step count.
    #[arg(long)]
    steps: Option<usize>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the theta-scheme and write the trajectory and a summary.
    Solve(CommonArgs),
    /// Evaluate the distance certificate of a candidate trajectory CSV.
    Certify {
        #[command(flatten)]
        common: CommonArgs,
        /// Candidate trajectory (CSV as written by `solve`).
        #[arg(long)]
        candidate: PathBuf,
        /// Fail (exit 4) when the certified norm bound exceeds --tol.
        #[arg(long, requires = "tol")]
        assert: bool,
        /// Bound to assert against.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Adaptively refine the partition until the certified uniform error
    /// meets --tol.
    Adapt {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        tol: f64,
        #[arg(long, default_value_t = 40)]
        max_rounds: usize,
        /// Budget divisor in alpha*tol^2/(divisor*N).
        #[arg(long, default_value_t = 4.0)]
        divisor: f64,
        /// Fail (exit 4) unless the run converged within the bound.
        #[arg(long)]
        assert: bool,
    },
    /// Uniform-error convergence study against a fine reference run.
    Converge {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated refinement step counts (at least three).
        #[arg(long, value_delimiter = ',')]
        refinements: Vec<usize>,
    },
    /// Grid of runs over theta values and step counts.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',')]
        thetas: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        step_grid: Vec<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.exit
        }
    };
    ExitCode::from(code)
}

struct Failure {
    exit: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Failure {
        Failure {
            exit: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn solver(message: impl Into<String>) -> Failure {
        Failure {
            exit: EXIT_SOLVER,
            message: message.into(),
        }
    }

    fn assertion(message: impl Into<String>) -> Failure {
        Failure {
            exit: EXIT_ASSERT,
            message: message.into(),
        }
    }
}

fn from_solver_error(e: RateqError) -> Failure {
    match e {
        RateqError::NonConvergence { .. } => Failure::solver(e.to_string()),
        other => Failure::config(other.to_string()),
    }
}

struct Prepared {
    problem: Problem,
    partition: Partition,
    theta: f64,
    seed: u64,
    inner_tol: Option<f64>,
}

fn prepare(common: &CommonArgs) -> Result<Prepared, Failure> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", common.config.display())))?;
    let mut parsed = RunConfig::parse(&text).map_err(Failure::config)?;
    if let Some(theta) = common.theta {
        parsed.theta = theta;
    }
    if let Some(n) = common.steps {
        parsed.partition.n = Some(n);
        parsed.partition.times = None;
    }
    if let Some(seed) = common.seed {
        parsed.seed = seed;
    }
    rateq::solver::check_theta(parsed.theta).map_err(|e| Failure::config(format!("theta: {e}")))?;
    let problem = parsed.build_problem().map_err(Failure::config)?;
    let partition = parsed
        .build_partition(problem.horizon())
        .map_err(Failure::config)?;
    Ok(Prepared {
        problem,
        partition,
        theta: parsed.theta,
        seed: parsed.seed,
        inner_tol: parsed.tolerances.inner_tol,
    })
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn solve_prepared(p: &Prepared) -> Result<Trajectory, Failure> {
    match p.inner_tol {
        Some(tol) => solve_theta_inexact(&p.problem, &p.partition, p.theta, tol),
        None => solve_theta(&p.problem, &p.partition, p.theta),
    }
    .map_err(from_solver_error)
}

fn summarize(p: &Prepared, trajectory: &Trajectory) -> Result<output::SolveSummary, Failure> {
    let report = discrete_functional(
        &p.problem,
        &trajectory.states,
        &trajectory.partition,
        p.theta,
    )
    .map_err(from_solver_error)?;
    let energy_residual =
        energy_balance_residual(&p.problem, trajectory).map_err(from_solver_error)?;
    let lipschitz = verify_lipschitz(&p.problem, trajectory, p.theta).map_err(from_solver_error)?;
    Ok(output::SolveSummary {
        theta: p.theta,
        n_steps: trajectory.n_steps(),
        alpha: p.problem.alpha(),
        seed: p.seed,
        inner_tol: p.inner_tol,
        functional_total: report.total,
        initial_penalty: report.initial_penalty,
        dissipation_total: Extended::from(report.dissipation_total),
        energy_residual: Extended::from(energy_residual),
        lipschitz: output::LipschitzJson {
            max_slope: lipschitz.max_slope,
            raw_max_slope: lipschitz.raw_max_slope,
            load_lipschitz: lipschitz.load_lipschitz,
            bound: lipschitz.bound,
            margin: lipschitz.margin,
        },
        final_state: trajectory.final_state().iter().cloned().collect(),
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve(common) => {
            let prepared = prepare(&common)?;
            let trajectory = solve_prepared(&prepared)?;
            let csv = output::trajectory_csv(&prepared.problem, &trajectory, prepared.theta)
                .map_err(Failure::config)?;
            let csv_path = write_artifact(&common.out, "trajectory.csv", &csv)?;
            let summary = summarize(&prepared, &trajectory)?;
            let json_path = write_artifact(&common.out, "summary.json", &to_json_pretty(&summary))?;
            println!(
                "solve: {} steps, functional {}, wrote {} and {}",
                trajectory.n_steps(),
                summary.functional_total,
                csv_path.display(),
                json_path.display()
            );
            Ok(())
        }
        Command::Certify {
            common,
            candidate,
            assert,
            tol,
        } => {
            let prepared = prepare(&common)?;
            let text = std::fs::read_to_string(&candidate).map_err(|e| {
                Failure::config(format!("cannot read {}: {e}", candidate.display()))
            })?;
            let (partition, states) = output::parse_trajectory_csv(&text, prepared.problem.dim())
                .map_err(Failure::config)?;
            if partition.end() != prepared.problem.horizon() {
                return Err(Failure::config(format!(
                    "candidate ends at {} but the load horizon is {}",
                    partition.end(),
                    prepared.problem.horizon()
                )));
            }
            let trajectory =
                Trajectory::from_states(partition, states).map_err(from_solver_error)?;
            let certificate = certify_distance(&prepared.problem, &trajectory, prepared.theta)
                .map_err(from_solver_error)?;
            let path = write_artifact(
                &common.out,
                "certificate.json",
                &to_json_pretty(&certificate),
            )?;
            println!(
                "certify: functional {}, norm bound {}, wrote {}",
                certificate.functional_value,
                certificate.uniform_norm_bound,
                path.display()
            );
            if assert {
                let tol = tol.expect("clap enforces --tol with --assert");
                if !certificate.uniform_norm_bound.le(tol) {
                    return Err(Failure::assertion(format!(
                        "certified norm bound {} exceeds tolerance {tol}",
                        certificate.uniform_norm_bound
                    )));
                }
            }
            Ok(())
        }
        Command::Adapt {
            common,
            tol,
            max_rounds,
            divisor,
            assert,
        } => {
            let prepared = prepare(&common)?;
            let mut options = AdaptOptions::new(prepared.theta, tol, max_rounds);
            options.budget_divisor = divisor;
            let outcome = adapt_partition(&prepared.problem, &prepared.partition, options)
                .map_err(from_solver_error)?;
            let csv =
                output::trajectory_csv(&prepared.problem, &outcome.trajectory, prepared.theta)
                    .map_err(Failure::config)?;
            write_artifact(&common.out, "adapt_trajectory.csv", &csv)?;
            let mut rounds_csv = String::from("round,bisections,start,end\n");
            for (round, spans) in outcome.refinement_history.iter().enumerate() {
                for (a, b) in spans {
                    let _ = writeln!(
                        rounds_csv,
                        "{round},{},{},{}",
                        spans.len(),
                        fmt_f64(*a),
                        fmt_f64(*b)
                    );
                }
            }
            write_artifact(&common.out, "adapt_rounds.csv", &rounds_csv)?;
            let summary = output::AdaptSummary {
                converged: outcome.converged,
                rounds: outcome.rounds,
                n_steps: outcome.trajectory.n_steps(),
                tol,
                budget_divisor: divisor,
                certificate: outcome.certificate,
            };
            let path = write_artifact(
                &common.out,
                "adapt_certificate.json",
                &to_json_pretty(&summary),
            )?;
            println!(
                "adapt: {} rounds, {} steps, norm bound {}, wrote {}",
                summary.rounds,
                summary.n_steps,
                summary.certificate.uniform_norm_bound,
                path.display()
            );
            if assert && !(summary.converged && summary.certificate.uniform_norm_bound.le(tol)) {
                return Err(Failure::assertion(format!(
                    "adaptive run did not certify within tolerance {tol}"
                )));
            }
            Ok(())
        }
        Command::Converge {
            common,
            refinements,
        } => {
            let prepared = prepare(&common)?;
            if refinements.len() < 3 {
                return Err(Failure::config(format!(
                    "converge needs at least 3 refinement levels, got {}",
                    refinements.len()
                )));
            }
            // reference run: 100x finer than the finest requested level
            let finest = *refinements.iter().max().expect("nonempty");
            let reference_partition = Partition::uniform(prepared.problem.horizon(), finest * 100)
                .map_err(from_solver_error)?;
            let reference = solve_theta(&prepared.problem, &reference_partition, prepared.theta)
                .map_err(from_solver_error)?;
            let study = rateq::certify::convergence_study(
                &prepared.problem,
                prepared.theta,
                &refinements,
                |t| reference.value_at(t),
                2000,
            )
            .map_err(from_solver_error)?;
            let mut csv = String::from("n,tau,uniform_error\n");
            for i in 0..study.step_counts.len() {
                let _ = writeln!(
                    csv,
                    "{},{},{}",
                    study.step_counts[i],
                    fmt_f64(study.diameters[i]),
                    fmt_f64(study.uniform_errors[i])
                );
            }
            write_artifact(&common.out, "rates.csv", &csv)?;
            let summary = output::ConvergeSummary {
                theta: prepared.theta,
                slope: study.slope,
                step_counts: study.step_counts.clone(),
                uniform_errors: study
                    .uniform_errors
                    .iter()
                    .map(|e| Extended::from(*e))
                    .collect(),
            };
            let path = write_artifact(&common.out, "rates.json", &to_json_pretty(&summary))?;
            match study.slope {
                Some(slope) => {
                    println!("converge: fitted rate {slope:.3}, wrote {}", path.display())
                }
                None => println!(
                    "converge: errors at rounding level, rate fit skipped, wrote {}",
                    path.display()
                ),
            }
            Ok(())
        }
        Command::Sweep {
            common,
            thetas,
            step_grid,
        } => {
            let prepared = prepare(&common)?;
            if thetas.is_empty() || step_grid.is_empty() {
                return Err(Failure::config("sweep needs --thetas and --step-grid"));
            }
            for theta in &thetas {
                rateq::solver::check_theta(*theta)
                    .map_err(|e| Failure::config(format!("sweep theta: {e}")))?;
            }
            let cells: Vec<(f64, usize)> = thetas
                .iter()
                .flat_map(|t| step_grid.iter().map(move |n| (*t, *n)))
                .collect();
            let problem = &prepared.problem;
            let mut rows: Vec<Option<String>> = vec![None; cells.len()];
            std::thread::scope(|scope| {
                let mut handles = Vec::new();
                for (idx, (theta, n)) in cells.iter().enumerate() {
                    let (theta, n) = (*theta, *n);
                    handles.push((idx, scope.spawn(move || sweep_cell(problem, theta, n))));
                }
                for (idx, handle) in handles {
                    rows[idx] = Some(handle.join().expect("sweep cell panicked"));
                }
            });
            let mut csv = String::from(
                "theta,n,functional_total,max_slope,lipschitz_bound,energy_residual\n",
            );
            for row in rows.into_iter().flatten() {
                csv.push_str(&row);
                csv.push('\n');
            }
            let path = write_artifact(&common.out, "sweep.csv", &csv)?;
            println!("sweep: {} cells, wrote {}", cells.len(), path.display());
            Ok(())
        }
    }
}

fn sweep_cell(problem: &Problem, theta: f64, n: usize) -> String {
    let run = || -> rateq::Result<String> {
        let partition = Partition::uniform(problem.horizon(), n)?;
        let trajectory = solve_theta(problem, &partition, theta)?;
        let report = discrete_functional(problem, &trajectory.states, &partition, theta)?;
        let lipschitz = verify_lipschitz(problem, &trajectory, theta)?;
        let residual = energy_balance_residual(problem, &trajectory)?;
        Ok(format!(
            "{},{n},{},{},{},{}",
            fmt_f64(theta),
            fmt_f64(report.total.to_f64()),
            fmt_f64(lipschitz.max_slope),
            lipschitz.bound.map(fmt_f64).unwrap_or_else(|| "inf".into()),
            fmt_f64(residual)
        ))
    };
    run().unwrap_or_else(|e| format!("{},{n},error,error,error,{e}", fmt_f64(theta)))
}
