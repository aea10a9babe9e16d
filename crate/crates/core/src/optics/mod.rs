//! Linear-optics Bell-state-measurement relay.
//!
//! Mode ordering is fixed throughout the crate: inputs are
//! `(Alice H, Alice V, Bob H, Bob V)` and outputs are the four threshold
//! detectors `(D1H, D1V, D2H, D2V)` behind the polarizing beam splitters on
//! beam-splitter ports 1 and 2.

mod coherent;
mod detector;
mod fock;
mod network;

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

pub use coherent::{coherent_outcome_probs, coherent_outcome_probs_with, SourcePulse};
pub use detector::{DetectorBank, DetectorModel};
pub use fock::{FockOracle, DEFAULT_FOCK_LIMIT};
pub use network::{
    build_network, misalignment_angle, BsConvention, NetworkConfig, TransferMatrix, UNITARITY_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputMode {
    AliceH,
    AliceV,
    BobH,
    BobV,
}

impl InputMode {
    pub const ALL: [InputMode; 4] = [Self::AliceH, Self::AliceV, Self::BobH, Self::BobV];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputMode {
    D1H,
    D1V,
    D2H,
    D2V,
}

impl OutputMode {
    pub const ALL: [OutputMode; 4] = [Self::D1H, Self::D1V, Self::D2H, Self::D2V];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// One of the four BB84 polarization states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
    /// +45°
    D,
    /// -45°
    A,
}

impl Polarization {
    pub const ALL: [Polarization; 4] = [Self::H, Self::V, Self::D, Self::A];

    /// Jones vector in the (H, V) basis.
    pub fn jones(self) -> [f64; 2] {
        match self {
            Polarization::H => [1.0, 0.0],
            Polarization::V => [0.0, 1.0],
            Polarization::D => [FRAC_1_SQRT_2, FRAC_1_SQRT_2],
            Polarization::A => [FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Polarization::H => "H",
            Polarization::V => "V",
            Polarization::D => "D",
            Polarization::A => "A",
        }
    }
}

/// Announced result of the relay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BsmOutcome {
    PsiMinus,
    PsiPlus,
    Fail,
}

impl BsmOutcome {
    pub const ALL: [BsmOutcome; 3] = [Self::PsiMinus, Self::PsiPlus, Self::Fail];

    pub fn is_success(self) -> bool {
        self != BsmOutcome::Fail
    }
}

/// Which of the four detectors fired in one gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClickPattern(pub [bool; 4]);

impl ClickPattern {
    /// All 16 patterns, indexed by the bit mask `Σ clicked_k << k`.
    pub fn all() -> impl Iterator<Item = ClickPattern> {
        (0u8..16).map(|mask| ClickPattern(std::array::from_fn(|k| mask >> k & 1 == 1)))
    }

    pub fn clicked(&self, mode: OutputMode) -> bool {
        self.0[mode.index()]
    }

    /// Only exact two-fold coincidences on orthogonal polarizations count:
    /// `{D1H, D2V}` or `{D1V, D2H}` is ψ⁻, `{D1H, D1V}` or `{D2H, D2V}` is ψ⁺,
    /// anything else (including three- and four-fold clicks) fails.
    pub fn outcome(&self) -> BsmOutcome {
        match self.0 {
            [true, false, false, true] | [false, true, true, false] => BsmOutcome::PsiMinus,
            [true, true, false, false] | [false, false, true, true] => BsmOutcome::PsiPlus,
            _ => BsmOutcome::Fail,
        }
    }

    /// Probability of this exact pattern when detector `k` clicks
    /// independently with probability `p[k]`.
    pub fn probability(&self, p: &[f64; 4]) -> f64 {
        self.0
            .iter()
            .zip(p)
            .map(|(&c, &pk)| if c { pk } else { 1.0 - pk })
            .product()
    }
}

/// Probability of each relay announcement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OutcomeProbs {
    pub psi_minus: f64,
    pub psi_plus: f64,
    pub fail: f64,
}

impl OutcomeProbs {
    /// Sums exact pattern probabilities for independent detectors.
    pub fn from_click_probs(p: &[f64; 4]) -> Self {
        let mut out = OutcomeProbs::default();
        for pattern in ClickPattern::all() {
            *out.get_mut(pattern.outcome()) += pattern.probability(p);
        }
        out
    }

    pub fn get(&self, outcome: BsmOutcome) -> f64 {
        match outcome {
            BsmOutcome::PsiMinus => self.psi_minus,
            BsmOutcome::PsiPlus => self.psi_plus,
            BsmOutcome::Fail => self.fail,
        }
    }

    fn get_mut(&mut self, outcome: BsmOutcome) -> &mut f64 {
        match outcome {
            BsmOutcome::PsiMinus => &mut self.psi_minus,
            BsmOutcome::PsiPlus => &mut self.psi_plus,
            BsmOutcome::Fail => &mut self.fail,
        }
    }

    pub fn success(&self) -> f64 {
        self.psi_minus + self.psi_plus
    }

    pub fn total(&self) -> f64 {
        self.psi_minus + self.psi_plus + self.fail
    }

    pub(crate) fn add_scaled(&mut self, other: &OutcomeProbs, w: f64) {
        self.psi_minus += w * other.psi_minus;
        self.psi_plus += w * other.psi_plus;
        self.fail += w * other.fail;
    }

    /// Largest absolute component difference.
    pub fn max_abs_diff(&self, other: &OutcomeProbs) -> f64 {
        BsmOutcome::ALL
            .iter()
            .map(|&o| (self.get(o) - other.get(o)).abs())
            .fold(0.0, f64::max)
    }
}
