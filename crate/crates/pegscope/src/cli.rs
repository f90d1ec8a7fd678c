//! Command-line entry points.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::io::{stdin, stdout, BufReader};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::agents::DeterministicBackend;
use crate::classify::Thresholds;
use crate::error::{Error, Result};
use crate::ingest;
use crate::report;
use crate::server;
use crate::store::{Namespace, RecordKey, Store};
use crate::tools::ToolRegistry;
use crate::types::{parse_date, AssetId};

#[derive(Parser)]
#[command(name = "pegscope", version, about = "Stablecoin transparency audit toolkit")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load market, attestation, and news fixtures into the store.
    Ingest {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        market_csv: PathBuf,
        #[arg(long)]
        attestations: PathBuf,
        #[arg(long)]
        news: PathBuf,
    },
    /// Serve the tool protocol over stdio until input closes.
    Serve {
        #[arg(long)]
        data_dir: PathBuf,
    },
    /// Run the analysis pipeline over every stored attestation.
    Analyze {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        asset: Option<String>,
        #[arg(long, default_value = "text")]
        format: OutputFormat,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Report the market window around one date.
    EventStudy {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        asset: String,
        #[arg(long)]
        center: String,
        #[arg(long, default_value_t = 3)]
        span: i64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write per-figure CSV series for plotting.
    ExportFigures {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum OutputFormat {
    Csv,
    Text,
}

fn open_existing(data_dir: &PathBuf) -> Result<Store> {
    if !data_dir.exists() {
        return Err(Error::Config(format!(
            "data dir {} does not exist; run `pegscope ingest` first",
            data_dir.display()
        )));
    }
    Store::open(data_dir)
}

fn thresholds(config: &Option<PathBuf>) -> Result<Thresholds> {
    match config {
        Some(path) => Thresholds::load(path),
        None => Ok(Thresholds::default()),
    }
}

/// Parse argv and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not usage errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Ingest {
            data_dir,
            market_csv,
            attestations,
            news,
        } => {
            let store = Store::open(&data_dir)?;
            for snap in ingest::load_market_csv(&market_csv)? {
                store.put(&RecordKey::market(&snap.asset, snap.date), &snap)?;
            }
            for record in ingest::load_attestation_records(&attestations)? {
                store.put(
                    &RecordKey::attestation(&record.asset, record.report_date),
                    &record,
                )?;
            }
            for item in ingest::load_news_jsonl(&news)? {
                store.put(&RecordKey::news(&item.url), &item)?;
            }
            println!("market: {}", store.count(Namespace::Market));
            println!("attestation: {}", store.count(Namespace::Attestation));
            println!("news: {}", store.count(Namespace::News));
            Ok(())
        }
        Command::Serve { data_dir } => {
            let store = open_existing(&data_dir)?;
            let registry = ToolRegistry::new(&store);
            server::serve(BufReader::new(stdin().lock()), stdout().lock(), &registry)
        }
        Command::Analyze {
            data_dir,
            asset,
            format,
            config,
        } => {
            let store = open_existing(&data_dir)?;
            let cfg = thresholds(&config)?;
            let backend = DeterministicBackend::new(cfg);
            let asset = asset.as_deref().map(AssetId::new).transpose()?;
            let report = report::analyze(&store, asset.as_ref(), &backend)?;
            match format {
                OutputFormat::Csv => {
                    print!("{}", report::analyze_csv(&report));
                    // keep the primary CSV stream clean
                    for s in &report.skipped {
                        eprintln!(
                            "skipped: {} {} [{}]: {}",
                            s.asset.as_str(),
                            s.report_date,
                            s.source_id,
                            s.reason
                        );
                    }
                }
                OutputFormat::Text => print!("{}", report::analyze_text(&report)),
            }
            Ok(())
        }
        Command::EventStudy {
            data_dir,
            asset,
            center,
            span,
            config,
        } => {
            let store = open_existing(&data_dir)?;
            let cfg = thresholds(&config)?;
            let asset = AssetId::new(&asset)?;
            let center = parse_date(&center)?;
            let report = report::event_study(&store, &asset, center, span, &cfg)?;
            print!("{}", report::event_study_text(&report));
            Ok(())
        }
        Command::ExportFigures {
            data_dir,
            out_dir,
            config,
        } => {
            let store = open_existing(&data_dir)?;
            let cfg = thresholds(&config)?;
            let backend = DeterministicBackend::new(cfg);
            let report = report::analyze(&store, None, &backend)?;
            for name in report::export_figures(&report, &out_dir)? {
                println!("wrote {}", out_dir.join(name).display());
            }
            Ok(())
        }
    }
}
