use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use alseg::svm::deserialize_model;
use alseg::volume::PhantomSpec;
use alseg_cli::bench::{self, BenchOptions};
use alseg_cli::eval::append_csv;
use alseg_cli::{cmd_bench, cmd_eval, cmd_phantom, cmd_segment, write_plate_scenario, Overrides, RunManifest};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "alseg", version, about = "Active-learning voxel segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a phantom volume and its label volume.
    Phantom {
        /// Phantom description (TOML).
        #[arg(long, conflicts_with = "plate", required_unless_present = "plate")]
        spec: Option<PathBuf>,
        /// Write the plate phantom with this noise seed, its seed schedule
        /// and a run manifest instead.
        #[arg(long)]
        plate: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the scripted iterations of a manifest.
    Segment {
        manifest: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        block_size: Option<usize>,
        #[arg(long)]
        kernel_cache_mb: Option<usize>,
        /// One per iteration; replaces the manifest's list.
        #[arg(long = "seedfile")]
        seedfiles: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a segmentation with ground truth.
    Eval {
        #[arg(long)]
        seg: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Treat `seg` as a percent confidence volume cut at this value.
        #[arg(long)]
        threshold: Option<u32>,
        /// Append a row to this CSV table.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value = "scan")]
        scan: String,
    },
    /// Time classification over several volume sizes.
    Bench {
        /// Sizes as `N` or `XxYxZ`.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<String>,
        /// Model file; defaults to a model trained on the plate schedule.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        repeat: usize,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Classify file-backed volumes written to this directory.
        #[arg(long)]
        file_backed: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        block_size: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Phantom { spec, plate, out } => {
            if let Some(seed) = plate {
                let manifest = write_plate_scenario(seed, &out)?;
                println!("{}", manifest.display());
                return Ok(());
            }
            let path = spec.expect("clap requires --spec without --plate");
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let files = cmd_phantom(&PhantomSpec::from_text(&text)?, &out)?;
            println!("{}\n{}", files.volume.display(), files.labels.display());
        }
        Command::Segment {
            manifest,
            workers,
            delta,
            levels,
            block_size,
            kernel_cache_mb,
            seedfiles,
            out,
        } => {
            let mut m = RunManifest::load(&manifest)?;
            m.apply(&Overrides {
                workers,
                delta,
                levels,
                block_size,
                kernel_cache_mb,
                seedfiles,
                out,
            });
            let summary = cmd_segment(&m)?;
            for r in &summary.records {
                match r.metrics {
                    Some(mr) => println!(
                        "iteration {}: seeds {}, mean uncertainty {:.4}, iou {:.4}",
                        r.iteration, r.seeds, r.mean_uncertainty, mr.iou
                    ),
                    None => println!(
                        "iteration {}: seeds {}, mean uncertainty {:.4}",
                        r.iteration, r.seeds, r.mean_uncertainty
                    ),
                }
            }
            println!("{} ({:.2} s)", summary.out.display(), summary.timing.total);
        }
        Command::Eval {
            seg,
            gt,
            report,
            threshold,
            csv,
            scan,
        } => {
            let m = cmd_eval(&seg, &gt, &report, threshold)?;
            if let Some(csv) = csv {
                append_csv(&csv, &scan, &m)?;
            }
            println!("{}", m.csv_row(&scan));
        }
        Command::Bench {
            sizes,
            model,
            repeat,
            workers,
            file_backed,
            out,
        } => {
            let dims = sizes.iter().map(|s| bench::parse_size(s)).collect::<Result<Vec<_>>>()?;
            let model = match model {
                Some(p) => deserialize_model(&p)?.0,
                None => bench::reference_model(1)?,
            };
            let opts = BenchOptions {
                repeat,
                workers,
                scratch: file_backed,
                ..Default::default()
            };
            let rows = cmd_bench(&dims, &model, &opts)?;
            match out {
                Some(p) => bench::write_table(&p, &rows)?,
                None => print!("{}", bench::table_csv(&rows)),
            }
        }
        Command::Serve {
            addr,
            workers,
            block_size,
        } => {
            if workers == 0 {
                bail!("workers must be positive");
            }
            let mut config = alseg_server::ServerConfig {
                workers,
                ..Default::default()
            };
            if let Some(b) = block_size {
                config.load.block_size = b;
            }
            let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
            eprintln!("listening on {addr}");
            rt.block_on(alseg_server::serve(addr, config)).context("serving")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
