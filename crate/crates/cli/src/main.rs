use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use presstopo::driver::output::{read_design_csv, write_outputs, OutputOptions};
use presstopo::driver::{gradient_check, random_design, run_optimization_from, Problem, ProblemConfig};
use presstopo::Error;

#[derive(Parser)]
#[command(name = "presstopo", version, about = "Multi-material topology optimization under fluidic pressure loads")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the configured problem and write the result files.
    Run {
        /// Problem description (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output.dir` of the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Overrides `optimizer.max_iters` of the config.
        #[arg(long)]
        max_iters: Option<usize>,
        /// Write final.vtk even if the config turns it off.
        #[arg(long)]
        write_vtk: bool,
        /// Write final.svg even if the config turns it off.
        #[arg(long)]
        write_svg: bool,
        /// Print progress every K iterations.
        #[arg(long)]
        log_every: Option<usize>,
        /// Start from a design.csv written by an earlier run.
        #[arg(long)]
        initial_design: Option<PathBuf>,
    },
    /// Check a configuration and build the discretized problem.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare adjoint gradients with finite differences on a coarse mesh.
    GradientCheck {
        #[arg(long)]
        config: PathBuf,
        /// Mesh size as NEXxNEY.
        #[arg(long, default_value = "12x8")]
        elements: String,
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
        /// Number of randomly chosen components (all when omitted).
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Config(_)
        | Error::Parse(_)
        | Error::InvalidArgument(_)
        | Error::Geometry(_)
        | Error::Domain(_) => EXIT_CONFIG,
        e if e.is_solver_failure() => EXIT_SOLVER,
        _ => 1,
    }
}

fn load(path: &PathBuf) -> Result<ProblemConfig, (Error, u8)> {
    ProblemConfig::from_file(path).map_err(|e| {
        let code = if matches!(e, Error::Io { .. }) { EXIT_CONFIG } else { exit_code(&e) };
        (e, code)
    })
}

fn with_code(e: Error) -> (Error, u8) {
    let code = exit_code(&e);
    (e, code)
}

fn parse_elements(s: &str) -> Result<(usize, usize), (Error, u8)> {
    let bad = || (Error::Config(format!("--elements expects NEXxNEY, got '{s}'")), EXIT_CONFIG);
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let nex = a.trim().parse().map_err(|_| bad())?;
    let ney = b.trim().parse().map_err(|_| bad())?;
    Ok((nex, ney))
}

fn run(cli: Cli) -> Result<(), (Error, u8)> {
    match cli.command {
        Command::Run {
            config,
            output_dir,
            max_iters,
            write_vtk,
            write_svg,
            log_every,
            initial_design,
        } => {
            let mut cfg = load(&config)?;
            if let Some(n) = max_iters {
                cfg.optimizer.max_iters = n;
            }
            if let Some(k) = log_every {
                cfg.output.log_every = k;
            }
            cfg.validate().map_err(with_code)?;
            let dir = output_dir.unwrap_or_else(|| cfg.output.dir.clone());
            let opts = OutputOptions {
                vtk: write_vtk || cfg.output.write_vtk,
                svg: write_svg || cfg.output.write_svg,
                isolines: cfg.output.isolines,
            };
            let problem = Problem::new(&cfg).map_err(with_code)?;
            info!(
                "{}: {} elements, {} nodes, {} material variables",
                cfg.name,
                problem.num_elements(),
                problem.mesh.num_nodes(),
                problem.num_vars()
            );
            let start = match initial_design {
                Some(path) => {
                    let raw = read_design_csv(&path, problem.num_elements(), problem.num_vars())
                        .map_err(|e| (e, EXIT_CONFIG))?;
                    Some(problem.design_from_raw(raw).map_err(with_code)?)
                }
                None => None,
            };
            let every = cfg.output.log_every;
            let result = run_optimization_from(&problem, start, cfg.optimizer.max_iters, |rec, _| {
                if rec.iteration == 1 || rec.iteration % every == 0 {
                    let g: Vec<String> = rec.volumes.iter().map(|v| format!("{v:.4}")).collect();
                    println!(
                        "iter {:4}  compliance {:.6e}  g [{}]  max_dx {:.4}",
                        rec.iteration,
                        rec.compliance,
                        g.join(", "),
                        rec.max_change
                    );
                }
            })
            .map_err(with_code)?;
            let files = write_outputs(&dir, &problem, &result, opts).map_err(|e| (e, 1))?;
            println!(
                "finished {} iterations in {:.1} s; final compliance {:.6e}",
                result.log.records.len(),
                result.log.wall_time.as_secs_f64(),
                result.elastic.compliance
            );
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            let problem = Problem::new(&cfg).map_err(with_code)?;
            println!(
                "{}: ok ({} elements, {} nodes, {} fixed dofs, {} Dirichlet pressure nodes, filter radius {:.4e} m)",
                if cfg.name.is_empty() { "config" } else { &cfg.name },
                problem.num_elements(),
                problem.mesh.num_nodes(),
                problem.elastic.fixed_dofs().len(),
                problem.pressure_solver.dirichlet().len(),
                cfg.filter_radius()
            );
            Ok(())
        }
        Command::GradientCheck {
            config,
            elements,
            step,
            samples,
            seed,
            tolerance,
        } => {
            let mut cfg = load(&config)?;
            let (nex, ney) = parse_elements(&elements)?;
            cfg.domain.nex = nex;
            cfg.domain.ney = ney;
            let problem = Problem::new(&cfg).map_err(with_code)?;
            let design = random_design(&problem, seed).map_err(with_code)?;
            let report = gradient_check(&problem, &design, step, samples, seed).map_err(with_code)?;
            println!(
                "checked {} components ({} below the noise floor); max relative error {:.3e}; load-term effect {:.3e}",
                report.samples.len(),
                report.skipped,
                report.max_relative_error,
                report.load_term_effect
            );
            if report.max_relative_error > tolerance {
                let worst = report
                    .samples
                    .iter()
                    .max_by(|a, b| a.relative_error.total_cmp(&b.relative_error))
                    .expect("samples exist when the error is positive");
                return Err((
                    Error::SolverFailure {
                        message: format!(
                            "gradient mismatch at variable {} element {}: adjoint {:.6e}, finite difference {:.6e}",
                            worst.variable + 1,
                            worst.element,
                            worst.adjoint,
                            worst.finite_difference
                        ),
                        residual: worst.relative_error,
                    },
                    EXIT_SOLVER,
                ));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err((e, code)) => {
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}
