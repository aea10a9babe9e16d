use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DetectorBank, OutcomeProbs, Polarization, TransferMatrix};
use crate::quadrature::PhaseAverager;
use crate::{Error, Result};

/// Phase-randomized weak coherent pulse in a BB84 polarization state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourcePulse {
    polarization: Polarization,
    mean_photon_number: f64,
}

impl SourcePulse {
    pub fn new(polarization: Polarization, mean_photon_number: f64) -> Result<Self> {
        if !(mean_photon_number >= 0.0 && mean_photon_number.is_finite()) {
            return Err(Error::param(
                "mean_photon_number",
                format!("must be finite and >= 0, got {mean_photon_number}"),
            ));
        }
        Ok(Self {
            polarization,
            mean_photon_number,
        })
    }

    pub fn polarization(&self) -> Polarization {
        self.polarization
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.mean_photon_number
    }

    /// Same pulse attenuated by a lossy channel of transmittance `t`.
    pub fn attenuated(&self, t: f64) -> Self {
        Self {
            mean_photon_number: self.mean_photon_number * t,
            ..*self
        }
    }
}

/// Outcome probabilities for two independent phase-randomized coherent
/// pulses, averaged over their relative phase with the standard 64-node
/// rule.
pub fn coherent_outcome_probs(
    alice: &SourcePulse,
    bob: &SourcePulse,
    u: &TransferMatrix,
    det: &DetectorBank,
) -> Result<OutcomeProbs> {
    coherent_outcome_probs_with(alice, bob, u, det, PhaseAverager::standard())
}

pub fn coherent_outcome_probs_with(
    alice: &SourcePulse,
    bob: &SourcePulse,
    u: &TransferMatrix,
    det: &DetectorBank,
    averager: &PhaseAverager,
) -> Result<OutcomeProbs> {
    u.ensure_unitary()?;
    let a = alice.mean_photon_number.sqrt();
    let b = bob.mean_photon_number.sqrt();
    let [ah, av] = alice.polarization.jones();
    let [bh, bv] = bob.polarization.jones();

    let [psi_minus, psi_plus, fail] = averager.average_n(|phi| {
        let bob_phase = Complex64::from_polar(b, phi);
        let input = [
            Complex64::new(a * ah, 0.0),
            Complex64::new(a * av, 0.0),
            bob_phase * bh,
            bob_phase * bv,
        ];
        let out = u.apply(&input);
        let p: [f64; 4] =
            std::array::from_fn(|k| det.get(k).click_prob_coherent(out[k].norm_sqr()));
        let probs = OutcomeProbs::from_click_probs(&p);
        [probs.psi_minus, probs.psi_plus, probs.fail]
    });
    Ok(OutcomeProbs {
        psi_minus,
        psi_plus,
        fail,
    })
}
