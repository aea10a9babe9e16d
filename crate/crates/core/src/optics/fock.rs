use std::collections::BTreeMap;

use num_complex::Complex64;

use super::{DetectorBank, InputMode, OutcomeProbs, Polarization, TransferMatrix};
use crate::{Error, Result};

/// Default per-party photon-number limit of the Fock oracle.
pub const DEFAULT_FOCK_LIMIT: usize = 3;

/// Detector occupation numbers `(D1H, D1V, D2H, D2V)`.
pub type Occupation = [u8; 4];

/// Exact multiphoton interference for Fock-state inputs.
///
/// The input `(a†_A)^n (b†_B)^m / √(n! m!) |0⟩` is pushed through the
/// network by substituting each creation operator with its image under the
/// transfer matrix and expanding the product. The coefficient `c_o` of the
/// monomial `Π (c†_k)^{o_k}` gives the output amplitude `c_o √(Π o_k!) /
/// √(n! m!)`. Loss and threshold detection are then applied per mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockOracle {
    max_photons: usize,
}

impl Default for FockOracle {
    fn default() -> Self {
        Self::new(DEFAULT_FOCK_LIMIT)
    }
}

impl FockOracle {
    pub fn new(max_photons: usize) -> Self {
        Self { max_photons }
    }

    pub fn max_photons(&self) -> usize {
        self.max_photons
    }

    fn check(&self, n: usize) -> Result<()> {
        if n > self.max_photons {
            return Err(Error::PhotonLimit {
                requested: n,
                limit: self.max_photons,
            });
        }
        Ok(())
    }

    /// Probability of every detector occupation before loss, sorted by
    /// occupation.
    pub fn output_distribution(
        &self,
        n: usize,
        pol_a: Polarization,
        m: usize,
        pol_b: Polarization,
        u: &TransferMatrix,
    ) -> Result<Vec<(Occupation, f64)>> {
        self.check(n)?;
        self.check(m)?;
        u.ensure_unitary()?;

        let alice = image(u, [InputMode::AliceH, InputMode::AliceV], pol_a);
        let bob = image(u, [InputMode::BobH, InputMode::BobV], pol_b);

        let mut poly: BTreeMap<Occupation, Complex64> = BTreeMap::new();
        poly.insert([0; 4], Complex64::new(1.0, 0.0));
        for _ in 0..n {
            poly = multiply_linear(&poly, &alice);
        }
        for _ in 0..m {
            poly = multiply_linear(&poly, &bob);
        }

        let norm = factorial(n) * factorial(m);
        Ok(poly
            .into_iter()
            .map(|(occ, c)| {
                let bosonic: f64 = occ.iter().map(|&o| factorial(o as usize)).product();
                (occ, c.norm_sqr() * bosonic / norm)
            })
            .collect())
    }

    /// Announcement probabilities for `n` photons from Alice and `m` from
    /// Bob, with binomial loss and dark clicks at each detector.
    pub fn outcome_probs(
        &self,
        n: usize,
        pol_a: Polarization,
        m: usize,
        pol_b: Polarization,
        u: &TransferMatrix,
        det: &DetectorBank,
    ) -> Result<OutcomeProbs> {
        let mut out = OutcomeProbs::default();
        for (occ, p) in self.output_distribution(n, pol_a, m, pol_b, u)? {
            let clicks: [f64; 4] =
                std::array::from_fn(|k| det.get(k).click_prob_fock(occ[k] as u32));
            out.add_scaled(&OutcomeProbs::from_click_probs(&clicks), p);
        }
        Ok(out)
    }
}

/// Output-mode coefficients of one party's polarized creation operator.
fn image(u: &TransferMatrix, modes: [InputMode; 2], pol: Polarization) -> [Complex64; 4] {
    let [h, v] = pol.jones();
    std::array::from_fn(|k| {
        let m = u.matrix();
        m[(k, modes[0].index())] * h + m[(k, modes[1].index())] * v
    })
}

fn multiply_linear(
    poly: &BTreeMap<Occupation, Complex64>,
    form: &[Complex64; 4],
) -> BTreeMap<Occupation, Complex64> {
    let mut next = BTreeMap::new();
    for (occ, &c) in poly {
        for (k, &coef) in form.iter().enumerate() {
            if coef == Complex64::new(0.0, 0.0) {
                continue;
            }
            let mut o = *occ;
            o[k] += 1;
            *next.entry(o).or_insert(Complex64::new(0.0, 0.0)) += c * coef;
        }
    }
    next
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}
