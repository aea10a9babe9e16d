use clap::ArgAction;
use mdiqkd::keyrate::{
    distance_scan, distance_scan_fixed, evaluate_point, find_cutoff, find_cutoff_fixed,
    optimize_intensity, ChannelModel, IntensitySearch, KeyRateParams, ScanPoint, SystemConfig,
    DEFAULT_EC_INEFFICIENCY, FIBER_ATTENUATION_DB_PER_KM,
};
use mdiqkd::Exec;
use serde::{Deserialize, Serialize};

use super::{detectors, network, relay, RelayMode};
use crate::error::CliError;
use crate::output::{Cell, Report};

pub const NAME: &str = "keyrate";

const HEADER: &[&str] = &[
    "distance_km",
    "mu_a",
    "mu_b",
    "q11_rect",
    "e11_diag",
    "q_rect",
    "e_rect",
    "key_rate_raw",
    "key_rate",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub efficiency: f64,
    pub dark_count: f64,
    pub misalignment: f64,
    pub attenuation_db_per_km: f64,
    pub ec_inefficiency: f64,
    pub relay: RelayMode,
    pub relay_alice_fraction: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub mu_points: usize,
    pub refine: bool,
    /// Fixed intensities; both or neither.
    pub mu_a: Option<f64>,
    pub mu_b: Option<f64>,
    pub cutoff_max_km: f64,
    pub cutoff_tolerance_km: f64,
    pub distances_km: Vec<f64>,
}

impl Default for Config {
    fn default() -> Self {
        let search = IntensitySearch::default();
        Self {
            efficiency: super::DEFAULT_EFFICIENCY,
            dark_count: super::DEFAULT_DARK_COUNT,
            misalignment: super::DEFAULT_MISALIGNMENT,
            attenuation_db_per_km: FIBER_ATTENUATION_DB_PER_KM,
            ec_inefficiency: DEFAULT_EC_INEFFICIENCY,
            relay: RelayMode::Midpoint,
            relay_alice_fraction: 0.5,
            mu_min: search.min,
            mu_max: search.max,
            mu_points: search.points,
            refine: search.refine,
            mu_a: None,
            mu_b: None,
            cutoff_max_km: 1000.0,
            cutoff_tolerance_km: 0.01,
            distances_km: (0..=30).map(|k| 10.0 * k as f64).collect(),
        }
    }
}

/// Flags overriding config keys of the same name.
#[derive(Debug, Clone, Default, clap::Args, Serialize)]
pub struct Args {
    #[arg(long)]
    efficiency: Option<f64>,
    #[arg(long)]
    dark_count: Option<f64>,
    /// Total misalignment, split over the two rotations.
    #[arg(long)]
    misalignment: Option<f64>,
    #[arg(long)]
    attenuation_db_per_km: Option<f64>,
    #[arg(long)]
    ec_inefficiency: Option<f64>,
    #[arg(long, value_enum)]
    relay: Option<RelayMode>,
    #[arg(long)]
    relay_alice_fraction: Option<f64>,
    #[arg(long)]
    mu_min: Option<f64>,
    #[arg(long)]
    mu_max: Option<f64>,
    #[arg(long)]
    mu_points: Option<usize>,
    #[arg(long, action = ArgAction::Set)]
    refine: Option<bool>,
    #[arg(long)]
    mu_a: Option<f64>,
    #[arg(long)]
    mu_b: Option<f64>,
    #[arg(long)]
    cutoff_max_km: Option<f64>,
    #[arg(long)]
    cutoff_tolerance_km: Option<f64>,
    /// Comma-separated, ascending.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    distances_km: Option<Vec<f64>>,
}

impl Config {
    fn system(&self) -> Result<SystemConfig, CliError> {
        Ok(SystemConfig {
            detectors: detectors(self.efficiency, self.dark_count)?,
            network: network(self.misalignment)?,
            channel: ChannelModel::new(self.attenuation_db_per_km)?,
            relay: relay(self.relay, self.relay_alice_fraction)?,
            params: KeyRateParams::new(self.ec_inefficiency)?,
        })
    }

    fn search(&self) -> IntensitySearch {
        IntensitySearch {
            min: self.mu_min,
            max: self.mu_max,
            points: self.mu_points,
            refine: self.refine,
        }
    }

    fn fixed_intensities(&self) -> Result<Option<(f64, f64)>, CliError> {
        match (self.mu_a, self.mu_b) {
            (Some(a), Some(b)) => Ok(Some((a, b))),
            (None, None) => Ok(None),
            _ => Err(CliError::config("mu_a and mu_b must be given together")),
        }
    }
}

pub fn run(cfg: &Config, exec: Exec) -> Result<Report, CliError> {
    if cfg.distances_km.is_empty() {
        return Err(CliError::config("distances_km is empty"));
    }
    let system = cfg.system()?;
    let search = cfg.search();
    search.validate()?;
    let fixed = cfg.fixed_intensities()?;

    let (points, cutoff) = match fixed {
        Some((a, b)) => (
            distance_scan_fixed(&cfg.distances_km, a, b, &system, exec)?,
            find_cutoff_fixed(
                &system,
                a,
                b,
                0.0,
                cfg.cutoff_max_km,
                cfg.cutoff_tolerance_km,
            )?,
        ),
        None => (
            distance_scan(&cfg.distances_km, &system, &search, exec)?,
            find_cutoff(
                &system,
                &search,
                0.0,
                cfg.cutoff_max_km,
                cfg.cutoff_tolerance_km,
            )?,
        ),
    };

    let mut report = Report::new(NAME, cfg, HEADER);
    for p in &points {
        report.push_row(row(p));
    }
    report.summarize("cutoff_km", cutoff);
    let at_40db = (cfg.attenuation_db_per_km > 0.0)
        .then(|| {
            let d = 40.0 / cfg.attenuation_db_per_km;
            match fixed {
                Some((a, b)) => evaluate_point(d, a, b, &system),
                None => optimize_intensity(d, &system, &search),
            }
        })
        .transpose()?;
    report.summarize("distance_at_40db_km", at_40db.map(|p| p.distance_km));
    report.summarize("key_rate_at_40db", at_40db.map(|p| p.key_rate));
    report.summarize("key_rate_raw_at_40db", at_40db.map(|p| p.key_rate_raw));
    Ok(report)
}

fn row(p: &ScanPoint) -> Vec<Cell> {
    vec![
        p.distance_km.into(),
        p.mu_a.into(),
        p.mu_b.into(),
        p.q11_rect.into(),
        p.e11_diag.into(),
        p.q_rect.into(),
        p.e_rect.into(),
        p.key_rate_raw.into(),
        p.key_rate.into(),
    ]
}
