use clap::ValueEnum;
use mdiqkd::optics::{
    build_network, coherent_outcome_probs, FockOracle, Polarization, SourcePulse,
};
use serde::{Deserialize, Serialize};

use super::{detectors, network};
use crate::error::CliError;
use crate::output::Report;

pub const NAME: &str = "bsm";

const HEADER: &[&str] = &["alice", "bob", "psi_minus", "psi_plus", "fail"];

/// Largest photon number accepted per party in Fock mode.
const MAX_FOCK_PHOTONS: usize = 12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Fock,
    Coherent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub mode: Mode,
    pub alice_photons: usize,
    pub bob_photons: usize,
    pub mu_a: f64,
    pub mu_b: f64,
    pub efficiency: f64,
    pub dark_count: f64,
    pub misalignment: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            mode: Mode::Fock,
            alice_photons: 1,
            bob_photons: 1,
            mu_a: 0.1,
            mu_b: 0.1,
            efficiency: super::DEFAULT_EFFICIENCY,
            dark_count: super::DEFAULT_DARK_COUNT,
            misalignment: super::DEFAULT_MISALIGNMENT,
        }
    }
}

#[derive(Debug, Clone, Default, clap::Args, Serialize)]
pub struct Args {
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    alice_photons: Option<usize>,
    #[arg(long)]
    bob_photons: Option<usize>,
    #[arg(long)]
    mu_a: Option<f64>,
    #[arg(long)]
    mu_b: Option<f64>,
    #[arg(long)]
    efficiency: Option<f64>,
    #[arg(long)]
    dark_count: Option<f64>,
    #[arg(long)]
    misalignment: Option<f64>,
}

pub fn run(cfg: &Config) -> Result<Report, CliError> {
    let u = build_network(&network(cfg.misalignment)?);
    let det = detectors(cfg.efficiency, cfg.dark_count)?;
    let most = cfg.alice_photons.max(cfg.bob_photons);
    if cfg.mode == Mode::Fock && most > MAX_FOCK_PHOTONS {
        return Err(CliError::config(format!(
            "photon numbers above {MAX_FOCK_PHOTONS} are not supported, got {most}"
        )));
    }
    let oracle = FockOracle::new(most);

    let mut report = Report::new(NAME, cfg, HEADER);
    for pa in Polarization::ALL {
        for pb in Polarization::ALL {
            let p = match cfg.mode {
                Mode::Fock => {
                    oracle.outcome_probs(cfg.alice_photons, pa, cfg.bob_photons, pb, &u, &det)?
                }
                Mode::Coherent => coherent_outcome_probs(
                    &SourcePulse::new(pa, cfg.mu_a)?,
                    &SourcePulse::new(pb, cfg.mu_b)?,
                    &u,
                    &det,
                )?,
            };
            report.push_row(vec![
                pa.symbol().into(),
                pb.symbol().into(),
                p.psi_minus.into(),
                p.psi_plus.into(),
                p.fail.into(),
            ]);
        }
    }
    Ok(report)
}
