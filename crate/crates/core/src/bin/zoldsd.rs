use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use zoldsd::alignlab::GridSpec;
use zoldsd::bench::verify::{cmd_verify, Suite};
use zoldsd::bench::{cmd_compare, cmd_landscape, cmd_run, resolve_out_dir, LandscapeOptions};

#[derive(Parser)]
#[command(name = "zoldsd", version, about = "Zeroth-order optimization with learned direction sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one config and write its trace CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overridden by ZOLDSD_OUT).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds; defaults to the config's seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Run several configs under one oracle budget and summarize.
    Compare {
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Run a numerical property suite.
    Verify {
        /// alignment_1_over_d, hessian_bound, landscape, dynamics or unbiasedness
        suite: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the expected-alignment landscape for g in the plane.
    Landscape {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [1.0, 0.0])]
        g: Vec<f64>,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        /// Half-width of the square grid.
        #[arg(long, default_value_t = 2.0)]
        radius: f64,
        #[arg(long, default_value_t = 21)]
        resolution: usize,
        /// Monte Carlo samples per cell.
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: zoldsd::Result<bool> = match cli.command {
        Command::Run { config, out, seeds } => cmd_run(&config, seeds.as_deref(), &resolve_out_dir(out.as_deref())).map(|runs| {
            for r in runs {
                println!(
                    "{} seed={} iterations={} oracle_calls={} final_loss={} -> {}",
                    r.run_id,
                    r.seed,
                    r.iterations,
                    r.oracle_calls,
                    r.final_loss,
                    r.trace_path.display()
                );
            }
            true
        }),
        Command::Compare { config, out, seeds } => {
            cmd_compare(&config, seeds.as_deref(), &resolve_out_dir(out.as_deref())).map(|rows| {
                for s in rows {
                    println!(
                        "{:<20} iterations={:<8} oracle_calls={:<8} final_loss median={:.6e} iqr={:.3e}",
                        s.label,
                        s.iterations,
                        s.oracle_calls,
                        s.final_loss.median,
                        s.final_loss.iqr()
                    );
                }
                true
            })
        }
        Command::Verify { suite, out, seed } => suite
            .parse::<Suite>()
            .and_then(|s| cmd_verify(s, &resolve_out_dir(out.as_deref()), seed))
            .map(|report| {
                println!("{report}");
                report.all_pass()
            }),
        Command::Landscape { out, g, epsilon, radius, resolution, samples, seed } => {
            let opts = LandscapeOptions {
                g: [g[0], g[1]],
                epsilon,
                grid: GridSpec::symmetric(radius, resolution),
                n: samples,
                seed,
            };
            cmd_landscape(&opts, &resolve_out_dir(out.as_deref())).map(|(path, _)| {
                println!("{}", path.display());
                true
            })
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
