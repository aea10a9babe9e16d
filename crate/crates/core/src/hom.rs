//! Hong-Ou-Mandel interference of two independent phase-randomized weak
//! coherent pulses with Gaussian temporal envelopes.
//!
//! Bob's pulse is split into a part matched to Alice's temporal mode
//! (amplitude `O`) and an orthogonal part (`√(1-O²)`). After a balanced
//! beam splitter the mean photon numbers reaching the two detectors are
//! `μ(1 - O cos φ)` and `μ(1 + O cos φ)` for relative phase `φ`, which is
//! averaged out. The normalized coincidence `C = P_C / (P_1 P_2)` tends to
//! `1 - O²/2` for weak pulses, so the dip floor with perfect overlap is 1/2.

use serde::{Deserialize, Serialize};

use crate::optics::DetectorModel;
use crate::quadrature::PhaseAverager;
use crate::{Error, Exec, Result};

/// `2√(2 ln 2)`: ratio of FWHM to standard deviation of a Gaussian.
const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomParams {
    /// Mean photon number of each pulse.
    pub mean_photon_number: f64,
    /// Intensity FWHM of both pulses.
    pub fwhm_ps: f64,
    /// Coincidence window. Assumed to contain both pulses entirely, so it
    /// only enters through validation.
    pub window_ps: f64,
    pub detector: DetectorModel,
    /// Ceiling on the mode overlap, standing in for residual spectral or
    /// polarization distinguishability.
    pub overlap_max: f64,
    pub delays_ps: Vec<f64>,
}

impl Default for HomParams {
    fn default() -> Self {
        Self {
            mean_photon_number: 0.1,
            fwhm_ps: 200.0,
            window_ps: 2000.0,
            detector: DetectorModel::ideal(),
            overlap_max: 1.0,
            delays_ps: (-40..=40).map(|k| 25.0 * k as f64).collect(),
        }
    }
}

impl HomParams {
    pub fn validate(&self) -> Result<()> {
        let mu = self.mean_photon_number;
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::param(
                "mean_photon_number",
                format!("must be finite and >= 0, got {mu}"),
            ));
        }
        if !(self.fwhm_ps > 0.0 && self.fwhm_ps.is_finite()) {
            return Err(Error::param(
                "fwhm_ps",
                format!("must be finite and > 0, got {}", self.fwhm_ps),
            ));
        }
        if !(self.window_ps > 0.0 && self.window_ps.is_finite()) {
            return Err(Error::param(
                "window_ps",
                format!("must be finite and > 0, got {}", self.window_ps),
            ));
        }
        if !(0.0..=1.0).contains(&self.overlap_max) {
            return Err(Error::param(
                "overlap_max",
                format!("must lie in [0, 1], got {}", self.overlap_max),
            ));
        }
        if self.delays_ps.iter().any(|d| !d.is_finite()) {
            return Err(Error::param("delays_ps", "must be finite"));
        }
        Ok(())
    }
}

/// Amplitude overlap of two identical Gaussian pulses delayed by `tau`.
///
/// With `σ` the standard deviation of the intensity profile, the amplitude
/// envelope is `∝ exp(-t²/4σ²)` and the overlap integral evaluates to
/// `exp(-τ²/8σ²)`.
pub fn mode_overlap(tau_ps: f64, fwhm_ps: f64) -> Result<f64> {
    if !(fwhm_ps > 0.0 && fwhm_ps.is_finite()) {
        return Err(Error::param(
            "fwhm_ps",
            format!("must be finite and > 0, got {fwhm_ps}"),
        ));
    }
    let sigma = fwhm_ps / FWHM_PER_SIGMA;
    Ok((-tau_ps * tau_ps / (8.0 * sigma * sigma)).exp())
}

/// Weak-pulse limit of the normalized coincidence for overlap `o`.
pub fn weak_pulse_coincidence(o: f64) -> f64 {
    1.0 - 0.5 * o * o
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomPoint {
    pub delay_ps: f64,
    pub p1: f64,
    pub p2: f64,
    pub pc: f64,
    /// `None` when either detector never clicks.
    pub c_norm: Option<f64>,
}

pub fn coincidence_point(delay_ps: f64, params: &HomParams) -> Result<HomPoint> {
    params.validate()?;
    if !delay_ps.is_finite() {
        return Err(Error::param("delay_ps", "must be finite"));
    }
    Ok(point(delay_ps, params))
}

fn point(delay_ps: f64, params: &HomParams) -> HomPoint {
    let o = params.overlap_max * mode_overlap(delay_ps, params.fwhm_ps).expect("validated fwhm");
    let mu = params.mean_photon_number;
    let det = &params.detector;
    let [p1, p2, pc] = PhaseAverager::standard().average_n(|phi| {
        let shift = o * phi.cos();
        let a = det.click_prob_coherent(mu * (1.0 - shift));
        let b = det.click_prob_coherent(mu * (1.0 + shift));
        [a, b, a * b]
    });
    let denom = p1 * p2;
    HomPoint {
        delay_ps,
        p1,
        p2,
        pc,
        c_norm: (denom > 0.0).then(|| pc / denom),
    }
}

/// Coincidence curve over `params.delays_ps`, in input order.
pub fn hom_scan(params: &HomParams, exec: Exec) -> Result<Vec<HomPoint>> {
    params.validate()?;
    if params.delays_ps.is_empty() {
        return Err(Error::param("delays_ps", "list is empty"));
    }
    Ok(exec.map(&params.delays_ps, |&d| point(d, params)))
}
