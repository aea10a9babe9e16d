use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Threshold detector: efficiency (including any optics in front of it) and
/// the probability of a dark click per gate, independent of the signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    efficiency: f64,
    dark_count: f64,
}

impl DetectorModel {
    pub fn new(efficiency: f64, dark_count: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&efficiency) {
            return Err(Error::param(
                "efficiency",
                format!("must lie in [0, 1], got {efficiency}"),
            ));
        }
        if !(0.0..1.0).contains(&dark_count) {
            return Err(Error::param(
                "dark_count",
                format!("must lie in [0, 1), got {dark_count}"),
            ));
        }
        Ok(Self {
            efficiency,
            dark_count,
        })
    }

    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            dark_count: 0.0,
        }
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    pub fn dark_count(&self) -> f64 {
        self.dark_count
    }

    /// Click probability for a coherent state of mean photon number `n`.
    pub fn click_prob_coherent(&self, n: f64) -> f64 {
        1.0 - (1.0 - self.dark_count) * (-self.efficiency * n).exp()
    }

    /// Click probability for exactly `photons` photons, each surviving
    /// independently with probability equal to the efficiency.
    pub fn click_prob_fock(&self, photons: u32) -> f64 {
        1.0 - (1.0 - self.dark_count) * (1.0 - self.efficiency).powi(photons as i32)
    }
}

/// The relay's four detectors in output-mode order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorBank(pub [DetectorModel; 4]);

impl DetectorBank {
    pub fn uniform(model: DetectorModel) -> Self {
        Self([model; 4])
    }

    pub fn ideal() -> Self {
        Self::uniform(DetectorModel::ideal())
    }

    pub fn get(&self, k: usize) -> &DetectorModel {
        &self.0[k]
    }

    /// True when every detector shares the same parameters.
    pub fn is_uniform(&self) -> bool {
        self.0.iter().all(|d| *d == self.0[0])
    }
}

impl Default for DetectorBank {
    fn default() -> Self {
        Self::ideal()
    }
}
