//! `skg`: command-line driver for the key generation pipeline.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use skg_core::amplify::read_key_file;
use skg_core::ingest::{write_container, ContainerHeader, NodeId, SubsampleSpec};
use skg_core::pipeline::{
    load_channels, run_pipeline, thread_pool, write_artifacts, DatasetSource, FilterSetting, OutputFormat,
    PipelineConfig, PipelineReport, SourceConfig,
};
use skg_core::randomness::run_suite;
use skg_core::{Bits, Result, SkgError};

#[derive(Debug, Parser)]
#[command(
    name = "skg",
    version,
    about = "Secret key generation from reciprocal channel measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file; defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "skg-out")]
    out: PathBuf,

    /// Table format for cell and mismatch tables.
    #[arg(long, global = true, default_value = "csv", value_parser = parse_format)]
    format: OutputFormat,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Writes simulated channel traces as SKG1 containers plus a config that
    /// replays them.
    Simulate,
    /// Runs a single operating point.
    Run(CellArgs),
    /// Runs every configured filter setting and code rate.
    Sweep,
    /// Runs the randomness suite on an SKGK key file.
    Nist {
        /// Key file to test.
        keys: PathBuf,
    },
    /// Runs a single operating point and exports its keys.
    Keys(CellArgs),
}

#[derive(Debug, Args)]
struct CellArgs {
    /// Measurement variance R, or `none` to skip detrending. Defaults to the
    /// first configured setting.
    #[arg(long)]
    r: Option<String>,

    /// Code rate. Defaults to the first configured rate.
    #[arg(long)]
    rate: Option<f64>,
}

fn parse_format(s: &str) -> std::result::Result<OutputFormat, String> {
    s.parse().map_err(|e: SkgError| e.to_string())
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_path(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn narrow_to_cell(cfg: &mut PipelineConfig, args: &CellArgs) -> Result<()> {
    let setting = match args.r.as_deref() {
        None => cfg.filter.settings()[0],
        Some("none") => FilterSetting::Unfiltered,
        Some(v) => FilterSetting::Kalman(
            v.parse()
                .map_err(|_| SkgError::Config(format!("--r must be a number or `none`, got {v:?}")))?,
        ),
    };
    match setting {
        FilterSetting::Unfiltered => {
            cfg.filter.r_values.clear();
            cfg.filter.include_unfiltered = true;
        }
        FilterSetting::Kalman(r) => {
            cfg.filter.r_values = vec![r];
            cfg.filter.include_unfiltered = false;
        }
    }
    cfg.code.rates = vec![args.rate.unwrap_or(cfg.code.rates[0])];
    cfg.validate()
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn summarize(report: &PipelineReport) {
    println!(
        "config {} seed {}",
        report.provenance.config_hash, report.provenance.seed
    );
    for c in &report.cells {
        match &c.error {
            Some(e) => println!("{} {} rate {}: failed: {e}", c.scenario.as_str(), c.filter, c.code_rate),
            None => println!(
                "{} {} rate {}: mismatch {:.4} fer {:.4} h_cond {:.4} key rate {:.1} b/s, {} keys",
                c.scenario.as_str(),
                c.filter,
                c.code_rate,
                c.mismatch_ab,
                c.fer,
                c.h_min_cond,
                c.key_rate_bps,
                c.keys_emitted
            ),
        }
    }
}

fn pipeline(cfg: &PipelineConfig, out: &Path, format: OutputFormat) -> Result<PipelineReport> {
    let report = run_pipeline(cfg)?;
    report.check_invariants()?;
    let written = write_artifacts(&report, out, format)?;
    summarize(&report);
    print_written(&written);
    Ok(report)
}

fn interleave(down: &[f64], up: &[f64]) -> Vec<f32> {
    down.iter().zip(up).flat_map(|(&d, &u)| [d as f32, u as f32]).collect()
}

/// Stores Bob's samples as downlink and Alice's as uplink so that the
/// dataset loader pairs them the same way; Eve's trace fills both slots.
fn simulate(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    if !matches!(cfg.source, SourceConfig::Simulator(_)) {
        return Err(SkgError::Config("simulate needs a simulator source".into()));
    }
    fs::create_dir_all(out)?;
    let out = out.canonicalize()?;
    for set in load_channels(cfg)? {
        let name = set.scenario.as_str();
        let (alice, bob) = (&set.alice[0], &set.bob[0]);
        let header = |node| ContainerHeader {
            time: 2 * alice.len(),
            antennas: 1,
            subcarriers: 1,
            sample_period_s: alice.sample_period_s / 2.0,
            node,
            scenario: set.scenario,
            endianness: "little".into(),
        };
        let legit_path = out.join(format!("{name}_legit.skg1"));
        write_container(
            &legit_path,
            &header(NodeId::Alice),
            &interleave(bob.samples(), alice.samples()),
        )?;
        println!("wrote {}", legit_path.display());
        let eve_path = match set.eve.first() {
            Some(eve) => {
                let path = out.join(format!("{name}_eve.skg1"));
                write_container(&path, &header(NodeId::Eve), &interleave(eve.samples(), eve.samples()))?;
                println!("wrote {}", path.display());
                Some(path)
            }
            None => None,
        };
        let replay = PipelineConfig {
            source: SourceConfig::Dataset(DatasetSource {
                legit_path,
                eve_path,
                subsample: SubsampleSpec::IDENTITY,
                scenario: Some(set.scenario),
            }),
            ..cfg.clone()
        };
        let cfg_path = out.join(format!("{name}.toml"));
        fs::write(&cfg_path, replay.to_toml_string())?;
        println!("wrote {}", cfg_path.display());
    }
    Ok(())
}

fn nist(cfg: &PipelineConfig, keys: &Path, out: &Path) -> Result<()> {
    let raw = read_key_file(keys)?;
    if raw.is_empty() {
        return Err(SkgError::Data(format!("{} holds no keys", keys.display())));
    }
    let bits: Vec<Bits> = raw.iter().map(|k| Bits::from_bytes_msb(k, 256)).collect();
    let report = thread_pool()?.install(|| run_suite(&bits, &cfg.nist))?;
    fs::create_dir_all(out)?;
    let table = out.join("nist.json");
    let mut json = serde_json::to_string_pretty(&report.table_json()).expect("table serializes");
    json.push('\n');
    fs::write(&table, json)?;
    let pvalues = out.join("nist_pvalues.csv");
    fs::write(&pvalues, report.pvalues_csv())?;
    for row in &report.rows {
        match row.success_rate {
            Some(rate) => println!("{:<28} {rate:.4}", row.name),
            None => println!("{:<28} not applicable", row.name),
        }
    }
    print_written(&[table, pvalues]);
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::Simulate => simulate(&cfg, &cli.out),
        Command::Run(args) => {
            narrow_to_cell(&mut cfg, args)?;
            pipeline(&cfg, &cli.out, cli.format).map(|_| ())
        }
        Command::Sweep => pipeline(&cfg, &cli.out, cli.format).map(|_| ()),
        Command::Nist { keys } => nist(&cfg, keys, &cli.out),
        Command::Keys(args) => {
            narrow_to_cell(&mut cfg, args)?;
            cfg.export_keys = true;
            let report = pipeline(&cfg, &cli.out, cli.format)?;
            let hex: Vec<&String> = report.cells.iter().flat_map(|c| &c.keys).collect();
            let path = cli.out.join("keys.json");
            let mut json = serde_json::to_string_pretty(&hex).expect("keys serialize");
            json.push('\n');
            fs::write(&path, json)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("skg: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
