//! Command-line front end: sweep configs, the record store and CSV tables.

pub mod store;
pub mod tables;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::exact_oracle::ground_space_fidelity;
use crate::vqe_engine::{exact_references, mark_best, run_sweep_with, sort_records, Engine, ExactRef, RunRecord, SweepConfig};
use store::Store;

#[derive(Debug, Parser)]
#[command(name = "phasesketch", version, about = "Sketch quantum phase diagrams with low-depth VQE sweeps")]
pub struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the three-stage sweep described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (falls back to the config, then to all cores).
        #[arg(long, env = "PHASESKETCH_WORKERS")]
        workers: Option<usize>,
        /// Continue an interrupted run, skipping finished tasks.
        #[arg(long)]
        resume: bool,
    },
    /// Energy-derivative and order-parameter tables.
    Analyze {
        #[arg(long)]
        records: PathBuf,
        /// Use the per-depth normalized derivative for the printed estimates.
        #[arg(long)]
        normalize: bool,
        /// Three-point median filter before locating extrema.
        #[arg(long)]
        smooth: bool,
    },
    /// Exponential fits of the best energy against depth, per g.
    Fit {
        #[arg(long)]
        records: PathBuf,
    },
    /// Exact ground states for the config grid; attaches references to stored records.
    Exact {
        #[arg(long)]
        config: PathBuf,
    },
    /// Per-depth transition estimates from every detector.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        smooth: bool,
    },
}

/// Parse and validate a TOML sweep config. Relative output directories are
/// resolved against the config file's directory.
pub fn load_config(path: &Path) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config { path: path.display().to_string(), msg: e.to_string() })?;
    let mut cfg = parse_config(&text)?;
    if cfg.output_dir.is_relative() {
        if let Some(parent) = path.parent() {
            cfg.output_dir = parent.join(&cfg.output_dir);
        }
    }
    Ok(cfg)
}

/// Parse config text; schema errors carry the path of the offending field.
pub fn parse_config(text: &str) -> Result<SweepConfig> {
    let de = toml::Deserializer::new(text);
    let cfg: SweepConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let msg = e.inner().message().trim().to_string();
        Error::Config { path, msg }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, workers, resume } => {
            let mut cfg = load_config(&config)?;
            if workers.is_some() {
                cfg.workers = workers;
            }
            let records = run(&cfg, resume)?;
            println!("{} records in {}", records.len(), cfg.output_dir.display());
        }
        Command::Analyze { records, normalize, smooth } => {
            let recs = load(&records)?;
            let written = tables::write_analysis(&records, &recs)?;
            for (p, x) in tables::energy_estimates(&recs, normalize, smooth)? {
                println!("p = {p:>3}  argmin dE/dp at g = {}", x.map_or("-".into(), |v| v.to_string()));
            }
            println!("wrote {}", written.join(", "));
        }
        Command::Fit { records } => {
            let recs = load(&records)?;
            let written = tables::write_fit(&records, &recs)?;
            println!("wrote {written}");
        }
        Command::Exact { config } => {
            let cfg = load_config(&config)?;
            let n = exact(&cfg)?;
            println!("exact references for {} g values; {n} stored records updated", cfg.g_grid.values().len());
        }
        Command::Report { records, smooth } => {
            let recs = load(&records)?;
            let (path, table) = tables::write_report(&records, &recs, smooth)?;
            print!("{}", table.to_text());
            println!("wrote {path}");
        }
    }
    Ok(())
}

/// Load records with freshly computed `best` flags.
pub fn load(dir: &Path) -> Result<Vec<RunRecord>> {
    let mut recs = store::load_records(dir)?;
    if recs.is_empty() {
        return Err(Error::Store(format!("{} holds no records", dir.display())));
    }
    let model = recs[0].model;
    if let Some(r) = recs.iter().find(|r| r.model != model) {
        return Err(Error::Store(format!("mixed models in store: {} and {}", model, r.model)));
    }
    sort_records(&mut recs);
    mark_best(&mut recs);
    Ok(recs)
}

/// Run a sweep with incremental persistence; returns the final record set.
pub fn run(cfg: &SweepConfig, resume: bool) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let (store, existing) = Store::open(&cfg.output_dir, resume)?;
    if !existing.is_empty() {
        log::info!("resuming with {} finished records", existing.len());
    }
    std::fs::write(cfg.output_dir.join("config.toml"), toml::to_string(cfg).map_err(|e| Error::Store(e.to_string()))?)?;
    let store = std::sync::Mutex::new(store);
    let records = run_sweep_with(cfg, existing, &|r| store.lock().expect("store lock").append(r))?;
    let dir = store.into_inner().expect("store lock").dir().to_path_buf();
    store::rewrite(&dir, &records)?;
    Ok(records)
}

/// Exact references for the config grid. Stored records (if any) get their
/// `exact_ref` recomputed from `theta_final`; returns how many were updated.
pub fn exact(cfg: &SweepConfig) -> Result<usize> {
    let model = cfg.build_model()?;
    let g_values = cfg.g_grid.values();
    let spaces = exact_references(&model, &g_values, &cfg.exact)?;
    tables::write_exact(&cfg.output_dir, &model, &g_values, &spaces)?;
    if !cfg.output_dir.join(store::RECORDS_FILE).exists() {
        return Ok(0);
    }
    let mut recs = store::load_records(&cfg.output_dir)?;
    let engine = Engine::new(model)?;
    let mut updated = 0;
    for r in &mut recs {
        let Some(i) = g_values.iter().position(|g| g.to_bits() == r.g.value().to_bits()) else {
            continue;
        };
        let state = engine.problem(&r.g)?.state(r.p, &r.theta_final)?;
        r.exact_ref = Some(ExactRef { e0: spaces[i].energy, fidelity: ground_space_fidelity(state.as_ref(), &spaces[i])? });
        updated += 1;
    }
    sort_records(&mut recs);
    mark_best(&mut recs);
    store::rewrite(&cfg.output_dir, &recs)?;
    Ok(updated)
}
