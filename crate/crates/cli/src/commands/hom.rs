use mdiqkd::hom::{hom_scan, HomParams};
use mdiqkd::optics::DetectorModel;
use mdiqkd::Exec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::Report;

pub const NAME: &str = "hom";

const HEADER: &[&str] = &["delay_ps", "p1", "p2", "pc", "c_norm"];

/// Defaults follow the HOM bench rather than the key-rate link: an ideal
/// detector unless overridden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub mean_photon_number: f64,
    pub fwhm_ps: f64,
    pub window_ps: f64,
    pub efficiency: f64,
    pub dark_count: f64,
    pub overlap_max: f64,
    pub delays_ps: Vec<f64>,
}

impl Default for Config {
    fn default() -> Self {
        let p = HomParams::default();
        Self {
            mean_photon_number: p.mean_photon_number,
            fwhm_ps: p.fwhm_ps,
            window_ps: p.window_ps,
            efficiency: p.detector.efficiency(),
            dark_count: p.detector.dark_count(),
            overlap_max: p.overlap_max,
            delays_ps: p.delays_ps,
        }
    }
}

#[derive(Debug, Clone, Default, clap::Args, Serialize)]
pub struct Args {
    #[arg(long)]
    mean_photon_number: Option<f64>,
    #[arg(long)]
    fwhm_ps: Option<f64>,
    #[arg(long)]
    window_ps: Option<f64>,
    #[arg(long)]
    efficiency: Option<f64>,
    #[arg(long)]
    dark_count: Option<f64>,
    #[arg(long)]
    overlap_max: Option<f64>,
    /// Comma-separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    delays_ps: Option<Vec<f64>>,
}

pub fn run(cfg: &Config, exec: Exec) -> Result<Report, CliError> {
    let params = HomParams {
        mean_photon_number: cfg.mean_photon_number,
        fwhm_ps: cfg.fwhm_ps,
        window_ps: cfg.window_ps,
        detector: DetectorModel::new(cfg.efficiency, cfg.dark_count)?,
        overlap_max: cfg.overlap_max,
        delays_ps: cfg.delays_ps.clone(),
    };
    let points = hom_scan(&params, exec)?;
    if points.iter().any(|p| p.c_norm.is_none()) {
        return Err(CliError::config(format!(
            "normalized coincidence undefined: a detector never clicks (mean_photon_number = {}, efficiency = {}, dark_count = {})",
            cfg.mean_photon_number, cfg.efficiency, cfg.dark_count
        )));
    }

    let mut report = Report::new(NAME, cfg, HEADER);
    for p in &points {
        report.push_row(vec![
            p.delay_ps.into(),
            p.p1.into(),
            p.p2.into(),
            p.pc.into(),
            p.c_norm.into(),
        ]);
    }
    let dip = points
        .iter()
        .min_by(|a, b| a.c_norm.partial_cmp(&b.c_norm).expect("finite"))
        .expect("nonempty scan");
    let far = points
        .iter()
        .max_by(|a, b| a.delay_ps.abs().total_cmp(&b.delay_ps.abs()))
        .expect("nonempty scan");
    report.summarize("dip", dip.c_norm);
    report.summarize("dip_delay_ps", dip.delay_ps);
    report.summarize("asymptote", far.c_norm);
    report.summarize("asymptote_delay_ps", far.delay_ps);
    Ok(report)
}
