use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kerf_lab::equivalence::{
    enumerate_centered, enumerate_directional, equivalence_report, exact_connection_centered_ratio,
    write_report_csv, EquivalenceConfig,
};
use kerf_lab::experiment::{dump_partitions, emit_outputs, parse_key_values, run_sweep, summarize, ExperimentOptions};
use kerf_lab::kernel::{centered_kernel, KernelSpec};
use kerf_lab::{Error, Point, Result};

#[derive(Parser)]
#[command(name = "kerf-lab", version, about = "Centered and simplified directional KeRF toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the closed-form connection kernel K_k(x, z).
    Kernel {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: u32,
        /// Comma-separated coordinates.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        z: Vec<f64>,
    },
    /// Cross-check the kernel against the exact, enumerative and Monte Carlo verifiers.
    Verify {
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        #[arg(long, default_value_t = 8)]
        k_max: u32,
        #[arg(long, default_value_t = 4)]
        d_max: usize,
        #[arg(long, default_value_t = 10_000)]
        mc_samples: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Run the centered vs directional KeRF error sweep.
    Experiment {
        /// linear, quadratic, exp2d or all.
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        k: Option<u32>,
        #[arg(long, value_delimiter = ',')]
        m_values: Option<Vec<usize>>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        test_fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Noise variance of the linear and quadratic targets.
        #[arg(long)]
        noise_variance: Option<f64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write every sampled partition under OUT/trees/.
        #[arg(long)]
        dump_trees: bool,
        /// key=value file; flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Exact connection counts over all centered trees and directional schedules.
    Enumerate {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        d: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        z: Vec<f64>,
    },
}

fn point(coords: Vec<f64>, d: usize, name: &str) -> Result<Point> {
    if coords.len() != d {
        return Err(Error::Domain(format!("--{name} has {} coordinates, --d is {d}", coords.len())));
    }
    Point::new(coords)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Kernel { d, k, x, z } => {
            let spec = KernelSpec::centered(k, d)?;
            println!("{}", centered_kernel(&spec, &point(x, d, "x")?, &point(z, d, "z")?)?);
        }
        Command::Verify { pairs, k_max, d_max, mc_samples, seed, out } => {
            let rows = equivalence_report(&EquivalenceConfig { pairs, k_max, d_max, mc_samples, seed })?;
            fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            let path = out.join("equivalence.csv");
            let file = fs::File::create(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            write_report_csv(&rows, std::io::BufWriter::new(file)).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            let failed = rows.iter().filter(|r| !r.pass()).count();
            println!("{} rows, {failed} failing, written to {}", rows.len(), path.display());
        }
        Command::Experiment {
            target,
            n,
            d,
            k,
            m_values,
            reps,
            test_fraction,
            seed,
            noise_variance,
            threads,
            out,
            dump_trees,
            config,
        } => {
            let file = match config {
                Some(path) => {
                    let text = fs::read_to_string(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
                    ExperimentOptions::from_key_values(&parse_key_values(&text)?)?
                }
                None => ExperimentOptions::default(),
            };
            let flags = ExperimentOptions {
                target,
                n,
                d,
                k,
                m_values,
                reps,
                test_fraction,
                seed,
                out,
                noise_variance,
                threads,
                dump_trees: dump_trees.then_some(true),
            };
            let opts = file.overlay(flags);
            let out = opts.out_dir();
            let mut records = Vec::new();
            for config in opts.resolve()? {
                records.extend(run_sweep(&config)?);
                if opts.dump_trees == Some(true) {
                    dump_partitions(&config, &out)?;
                }
            }
            let summary = summarize(&records)?;
            for path in emit_outputs(&records, &summary, &out)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Enumerate { k, d, x, z } => {
            let (x, z) = (point(x, d, "x")?, point(z, d, "z")?);
            let exact = exact_connection_centered_ratio(k, &x, &z)?;
            match enumerate_centered(k, &x, &z) {
                Ok(c) => println!("centered:    {}/{} = {} ({})", c.connected, c.total, c.ratio(), c.value()),
                Err(Error::Capacity { .. }) => println!("centered:    beyond enumeration capacity"),
                Err(e) => return Err(e),
            }
            match enumerate_directional(k, &x, &z) {
                Ok(c) => println!("directional: {}/{} = {} ({})", c.connected, c.total, c.ratio(), c.value()),
                Err(Error::Capacity { .. }) => println!("directional: beyond enumeration capacity"),
                Err(e) => return Err(e),
            }
            println!("recursion:   {exact}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
