use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spos::experiment::{compare_multimode, run_config_file, CompareOptions};
use spos::validation::{validate, Tolerances};
use spos::SamplerError;

#[derive(Parser, Debug)]
#[command(name = "spos", version, about = "Particle-based Bayesian sampling experiments")]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "SAMPLER_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run { config: PathBuf },
    /// Compare SVGD and SPOS mode coverage on the multimode target.
    CompareMultimode {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        particles: usize,
        #[arg(long, default_value_t = 5000)]
        steps: u64,
        #[arg(long, default_value = "compare-multimode")]
        out: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        step_size: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Fixed kernel bandwidth used by both samplers.
        #[arg(long, default_value_t = 1.0)]
        bandwidth: f64,
        /// Mode capture radius [default: three mode-search grid cells].
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        init_mean: f64,
        #[arg(long, default_value_t = 0.5)]
        init_scale: f64,
    },
    /// Run the calibration suites and write a pass/fail scorecard.
    Validate {
        #[arg(long, default_value = "validation")]
        out: PathBuf,
    },
}

fn exit_code(err: &SamplerError) -> u8 {
    match err {
        SamplerError::Config(_) | SamplerError::Io { .. } | SamplerError::InvalidArgument(_) => 2,
        SamplerError::Divergence { .. } => 3,
        _ => 1,
    }
}

fn execute(command: Command) -> Result<ExitCode, SamplerError> {
    match command {
        Command::Run { config } => {
            let summary = run_config_file(&config)?;
            log::info!(
                "{}: {} particles, {} steps in {:.2} s",
                summary.sampler,
                summary.particles,
                summary.total_steps,
                summary.wall_time
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::CompareMultimode {
            seed,
            particles,
            steps,
            out,
            step_size,
            beta,
            bandwidth,
            radius,
            init_mean,
            init_scale,
        } => {
            let options = CompareOptions {
                seed,
                particles,
                steps,
                step_size,
                beta,
                bandwidth,
                init_mean,
                init_scale,
                radius,
                ..Default::default()
            };
            let report = compare_multimode(&options, Some(&out))?;
            println!(
                "modes {}: coverage_spos={} coverage_svgd={}",
                report.modes.len(),
                report.coverage_spos,
                report.coverage_svgd
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { out } => {
            let tol = Tolerances::from_env()?;
            let scorecard = validate(Some(&out), &tol)?;
            for c in &scorecard.criteria {
                println!("{}", c.line());
            }
            if scorecard.passed {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("validation failed: {}", scorecard.failures().join(", "));
                Ok(ExitCode::from(1))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| execute(cli.command)) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
