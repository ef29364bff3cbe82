//! Batch front-end for czfault experiments.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "czfault", version, about = "Pulse-level CZ fault simulation and test generation")]
pub struct Cli {
    /// JSON run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// RNG seed (overrides `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (overrides `workers`).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Calibrate every benchmark pulse family.
    Calibrate,
    /// Gate fidelity and conditional phase versus pulse-fault magnitude.
    FaultSweep,
    /// Random two-qubit circuits under decoherence, with exponential fit.
    DecoherenceBench,
    /// Minimal test repetitions per fault and input pattern.
    Testgen,
    /// Dump the single-CZ fault universe of the configured circuit.
    Enumerate,
    /// Simulate the calibrated gate under decoherence and dump populations.
    GateSim,
}

impl Cli {
    pub fn resolve_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = Some(w);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    match command {
        Command::Calibrate => commands::cmd_calibrate(cfg),
        Command::FaultSweep => commands::cmd_fault_sweep(cfg),
        Command::DecoherenceBench => commands::cmd_decoherence_bench(cfg),
        Command::Testgen => commands::cmd_testgen(cfg),
        Command::Enumerate => commands::cmd_enumerate(cfg),
        Command::GateSim => commands::cmd_gate_sim(cfg),
    }
}
