pub mod bsm;
pub mod decoy;
pub mod hom;
pub mod keyrate;

use clap::ValueEnum;
use mdiqkd::keyrate::RelayPosition;
use mdiqkd::keyrate::{STANDARD_DARK_COUNT, STANDARD_EFFICIENCY, STANDARD_MISALIGNMENT};
use mdiqkd::optics::{DetectorBank, DetectorModel, NetworkConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_EFFICIENCY: f64 = STANDARD_EFFICIENCY;
pub const DEFAULT_DARK_COUNT: f64 = STANDARD_DARK_COUNT;
pub const DEFAULT_MISALIGNMENT: f64 = STANDARD_MISALIGNMENT;

pub fn detectors(efficiency: f64, dark_count: f64) -> Result<DetectorBank, CliError> {
    Ok(DetectorBank::uniform(DetectorModel::new(
        efficiency, dark_count,
    )?))
}

pub fn network(misalignment: f64) -> Result<NetworkConfig, CliError> {
    Ok(NetworkConfig::with_misalignment(misalignment)?)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum RelayMode {
    #[default]
    Midpoint,
    AtAlice,
    /// Alice's share of the length set by `relay_alice_fraction`.
    Custom,
}

pub fn relay(mode: RelayMode, alice_fraction: f64) -> Result<RelayPosition, CliError> {
    let pos = match mode {
        RelayMode::Midpoint => RelayPosition::Midpoint,
        RelayMode::AtAlice => RelayPosition::AtAlice,
        RelayMode::Custom => RelayPosition::AliceFraction(alice_fraction),
    };
    pos.validate()?;
    Ok(pos)
}
