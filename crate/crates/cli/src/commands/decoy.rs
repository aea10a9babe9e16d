use clap::ValueEnum;
use mdiqkd::decoy::{
    estimate, IntensityGrid, ObservedStats, DEFAULT_ESTIMATION_N_MAX, DEFAULT_GRID,
};
use mdiqkd::keyrate::{ChannelModel, FIBER_ATTENUATION_DB_PER_KM};
use mdiqkd::optics::build_network;
use mdiqkd::protocol::{Basis, Link, YieldErrorTable, YIELD_EPSILON};
use mdiqkd::Exec;
use serde::{Deserialize, Serialize};

use super::{detectors, network, relay, RelayMode};
use crate::error::CliError;
use crate::output::Report;

pub const NAME: &str = "decoy";

const HEADER: &[&str] = &[
    "basis",
    "n",
    "m",
    "yield_true",
    "yield_est",
    "error_true",
    "error_est",
];

/// How the observations fed to the estimator are produced.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Synthesis {
    /// From the model tables truncated at `n_max`; the estimator is exact.
    #[default]
    Table,
    /// From the full coherent-state model; higher photon numbers leak in
    /// as truncation bias.
    Coherent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub efficiency: f64,
    pub dark_count: f64,
    pub misalignment: f64,
    pub attenuation_db_per_km: f64,
    pub relay: RelayMode,
    pub relay_alice_fraction: f64,
    pub distance_km: f64,
    pub n_max: usize,
    pub synthesis: Synthesis,
    /// ObservedStats JSON to estimate from instead of synthesizing. Its
    /// own intensity grid replaces the configured one.
    pub observed: Option<String>,
    pub alice_intensities: Vec<f64>,
    pub bob_intensities: Vec<f64>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            efficiency: super::DEFAULT_EFFICIENCY,
            dark_count: super::DEFAULT_DARK_COUNT,
            misalignment: super::DEFAULT_MISALIGNMENT,
            attenuation_db_per_km: FIBER_ATTENUATION_DB_PER_KM,
            relay: RelayMode::Midpoint,
            relay_alice_fraction: 0.5,
            distance_km: 0.0,
            n_max: DEFAULT_ESTIMATION_N_MAX,
            synthesis: Synthesis::Table,
            observed: None,
            alice_intensities: DEFAULT_GRID.to_vec(),
            bob_intensities: DEFAULT_GRID.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Default, clap::Args, Serialize)]
pub struct Args {
    #[arg(long)]
    efficiency: Option<f64>,
    #[arg(long)]
    dark_count: Option<f64>,
    #[arg(long)]
    misalignment: Option<f64>,
    #[arg(long)]
    attenuation_db_per_km: Option<f64>,
    #[arg(long, value_enum)]
    relay: Option<RelayMode>,
    #[arg(long)]
    relay_alice_fraction: Option<f64>,
    #[arg(long)]
    distance_km: Option<f64>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long, value_enum)]
    synthesis: Option<Synthesis>,
    #[arg(long)]
    observed: Option<String>,
    /// Comma-separated, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    alice_intensities: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    bob_intensities: Option<Vec<f64>>,
}

fn link(cfg: &Config) -> Result<Link, CliError> {
    let channel = ChannelModel::new(cfg.attenuation_db_per_km)?;
    if !(cfg.distance_km >= 0.0 && cfg.distance_km.is_finite()) {
        return Err(CliError::config(format!(
            "distance_km must be finite and >= 0, got {}",
            cfg.distance_km
        )));
    }
    let (la, lb) = relay(cfg.relay, cfg.relay_alice_fraction)?.arm_lengths(cfg.distance_km);
    Ok(Link::new(
        build_network(&network(cfg.misalignment)?),
        detectors(cfg.efficiency, cfg.dark_count)?,
    )?
    .with_arm_transmittance(channel.transmittance(la), channel.transmittance(lb))?)
}

fn check_grid(grid: &IntensityGrid, n_max: usize) -> Result<(), CliError> {
    for (who, side) in [("alice", grid.alice()), ("bob", grid.bob())] {
        if side.len() < n_max + 1 {
            return Err(CliError::config(format!(
                "{who} has {} intensities; resolving photon numbers 0..={n_max} needs at least {}",
                side.len(),
                n_max + 1
            )));
        }
    }
    Ok(())
}

fn relative(est: f64, truth: f64) -> Option<f64> {
    (truth.abs() > YIELD_EPSILON).then(|| (est / truth - 1.0).abs())
}

pub fn run(cfg: &Config, exec: Exec) -> Result<Report, CliError> {
    let n = cfg.n_max;
    let (obs, truth) = match &cfg.observed {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read observations {path}: {e}")))?;
            let obs: ObservedStats = serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("{path}: {e}")))?;
            obs.validate()?;
            check_grid(&obs.grid, n)?;
            (obs, None)
        }
        None => {
            let grid =
                IntensityGrid::new(cfg.alice_intensities.clone(), cfg.bob_intensities.clone())?;
            check_grid(&grid, n)?;
            let link = link(cfg)?;
            let rect = YieldErrorTable::from_model(Basis::Rect, &link, n, exec)?;
            let diag = YieldErrorTable::from_model(Basis::Diag, &link, n, exec)?;
            let obs = match cfg.synthesis {
                Synthesis::Table => ObservedStats::from_tables(&grid, &rect, &diag)?,
                Synthesis::Coherent => ObservedStats::synthesize(&grid, &link, exec)?,
            };
            (obs, Some([rect, diag]))
        }
    };

    let mut report = Report::new(NAME, cfg, HEADER);
    let mut max_rel_yield: Option<f64> = None;
    let mut max_abs_error: Option<f64> = None;
    let mut clamps = 0;
    let mut max_condition: f64 = 0.0;
    let mut estimates = Vec::with_capacity(2);
    for (b, basis) in Basis::ALL.into_iter().enumerate() {
        let est = estimate(&obs, basis, n, exec)?;
        clamps += est.clamps.len();
        max_condition = max_condition.max(est.max_condition);
        for i in 0..=n {
            for j in 0..=n {
                let (y_est, e_est) = (est.table.yield_at(i, j), est.table.error_at(i, j));
                let (y_true, e_true) = match &truth {
                    Some(t) => (Some(t[b].yield_at(i, j)), t[b].error_at(i, j)),
                    None => (None, None),
                };
                if let Some(r) = y_true.and_then(|y| relative(y_est, y)) {
                    max_rel_yield = Some(max_rel_yield.map_or(r, |m| m.max(r)));
                }
                if let (Some(t), Some(e)) = (e_true, e_est) {
                    let d = (e - t).abs();
                    max_abs_error = Some(max_abs_error.map_or(d, |m| m.max(d)));
                }
                report.push_row(vec![
                    basis.name().into(),
                    i.into(),
                    j.into(),
                    y_true.into(),
                    y_est.into(),
                    e_true.into(),
                    e_est.into(),
                ]);
            }
        }
        estimates.push(est);
    }

    let y11 = estimates[0].table.yield_at(1, 1);
    let e11 = estimates[1].table.error_at(1, 1);
    report.summarize("y11_rect_est", y11);
    report.summarize("e11_diag_est", e11);
    if let Some(t) = &truth {
        report.summarize("y11_rect_true", t[0].yield_at(1, 1));
        report.summarize("e11_diag_true", t[1].error_at(1, 1));
        report.summarize("y11_rect_rel_error", relative(y11, t[0].yield_at(1, 1)));
    }
    report.summarize("max_rel_yield_error", max_rel_yield);
    report.summarize("max_abs_error_rate_error", max_abs_error);
    report.summarize("clamp_events", clamps);
    report.summarize("max_condition", max_condition);
    Ok(report)
}
