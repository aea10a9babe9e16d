//! Protocol-level statistics: bases and bit encoding, per-photon-number
//! yields and error rates, observed weak-coherent-pulse gains and QBERs,
//! and the post-selection (sifting) rules.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::optics::{
    coherent_outcome_probs, BsmOutcome, DetectorBank, FockOracle, OutcomeProbs, Polarization,
    SourcePulse, TransferMatrix,
};
use crate::{poisson, Error, Exec, Result};

/// Yields below this are treated as zero when forming error rates.
pub const YIELD_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Rect,
    Diag,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::Rect, Basis::Diag];

    /// The bit-0 and bit-1 states of the basis.
    pub fn states(self) -> [Polarization; 2] {
        match self {
            Basis::Rect => [Polarization::H, Polarization::V],
            Basis::Diag => [Polarization::D, Polarization::A],
        }
    }

    /// The four equiprobable (Alice, Bob) preparations within the basis.
    pub fn pairs(self) -> [(Polarization, Polarization); 4] {
        let [s0, s1] = self.states();
        [(s0, s0), (s0, s1), (s1, s0), (s1, s1)]
    }

    pub fn name(self) -> &'static str {
        match self {
            Basis::Rect => "rect",
            Basis::Diag => "diag",
        }
    }
}

impl Polarization {
    pub fn basis(self) -> Basis {
        match self {
            Polarization::H | Polarization::V => Basis::Rect,
            Polarization::D | Polarization::A => Basis::Diag,
        }
    }

    /// H and D encode 0, V and A encode 1.
    pub fn bit(self) -> bool {
        matches!(self, Polarization::V | Polarization::A)
    }
}

/// Whether a successful announcement for this same-basis preparation ends
/// up as a bit error after sifting.
pub fn is_error(basis: Basis, alice: Polarization, bob: Polarization, outcome: BsmOutcome) -> bool {
    let same = alice == bob;
    match (basis, outcome) {
        (_, BsmOutcome::Fail) => false,
        (Basis::Rect, _) => same,
        (Basis::Diag, BsmOutcome::PsiMinus) => same,
        (Basis::Diag, BsmOutcome::PsiPlus) => !same,
    }
}

fn error_probability(
    basis: Basis,
    alice: Polarization,
    bob: Polarization,
    p: &OutcomeProbs,
) -> f64 {
    [BsmOutcome::PsiMinus, BsmOutcome::PsiPlus]
        .into_iter()
        .filter(|&o| is_error(basis, alice, bob, o))
        .map(|o| p.get(o))
        .sum()
}

/// Sifting verdict for one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiftDecision {
    pub keep: bool,
    /// Bob inverts his bit.
    pub flip: bool,
}

/// Keeps same-basis rounds with a successful announcement. Bob flips on
/// every rectilinear success and on a diagonal ψ⁻; a diagonal ψ⁺ is kept
/// as is.
pub fn sift(basis_a: Basis, basis_b: Basis, outcome: BsmOutcome) -> SiftDecision {
    let keep = basis_a == basis_b && outcome.is_success();
    let flip = keep
        && matches!(
            (basis_a, outcome),
            (Basis::Rect, _) | (Basis::Diag, BsmOutcome::PsiMinus)
        );
    SiftDecision { keep, flip }
}

/// Everything between the sources and the announcement: the relay network,
/// its detectors and the transmittance of Alice's and Bob's channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    transfer: TransferMatrix,
    detectors: DetectorBank,
    arm_transmittance: [f64; 2],
    oracle: FockOracle,
}

impl Link {
    pub fn new(transfer: TransferMatrix, detectors: DetectorBank) -> Result<Self> {
        transfer.ensure_unitary()?;
        Ok(Self {
            transfer,
            detectors,
            arm_transmittance: [1.0, 1.0],
            oracle: FockOracle::default(),
        })
    }

    pub fn with_arm_transmittance(mut self, alice: f64, bob: f64) -> Result<Self> {
        for (name, t) in [("alice_transmittance", alice), ("bob_transmittance", bob)] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::param(name, format!("must lie in [0, 1], got {t}")));
            }
        }
        self.arm_transmittance = [alice, bob];
        Ok(self)
    }

    pub fn with_fock_limit(mut self, max_photons: usize) -> Self {
        self.oracle = FockOracle::new(max_photons);
        self
    }

    pub fn transfer(&self) -> &TransferMatrix {
        &self.transfer
    }

    pub fn detectors(&self) -> &DetectorBank {
        &self.detectors
    }

    pub fn arm_transmittance(&self) -> [f64; 2] {
        self.arm_transmittance
    }

    pub fn fock_limit(&self) -> usize {
        self.oracle.max_photons()
    }

    /// Basis-averaged success and error probabilities for photons arriving
    /// at the relay (no channel loss).
    fn relay_success_error(&self, k: usize, l: usize, basis: Basis) -> Result<(f64, f64)> {
        let mut success = 0.0;
        let mut error = 0.0;
        for (pa, pb) in basis.pairs() {
            let p = self
                .oracle
                .outcome_probs(k, pa, l, pb, &self.transfer, &self.detectors)?;
            success += 0.25 * p.success();
            error += 0.25 * error_probability(basis, pa, pb, &p);
        }
        Ok((success, error))
    }
}

/// Yield and error rate of one photon-number component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YieldError {
    pub yield_rate: f64,
    /// `None` when the yield vanishes.
    pub error_rate: Option<f64>,
}

impl YieldError {
    fn from_probs(success: f64, error: f64) -> Self {
        let error_rate = (success > YIELD_EPSILON).then(|| (error / success).clamp(0.0, 1.0));
        Self {
            yield_rate: success,
            error_rate,
        }
    }
}

/// Yield `Y^{n,m}` and error rate `e^{n,m}` when Alice sends `n` photons
/// and Bob `m`, including binomial loss in each channel arm.
pub fn fock_yield_error(n: usize, m: usize, basis: Basis, link: &Link) -> Result<YieldError> {
    let grid = RelayGrid::compute(n, m, basis, link, Exec::Sequential)?;
    let (s, e) = grid.mixed(n, m, link.arm_transmittance);
    Ok(YieldError::from_probs(s, e))
}

/// Relay success/error probabilities for every `(k, l)` up to a bound.
struct RelayGrid {
    cols: usize,
    cells: Vec<(f64, f64)>,
}

impl RelayGrid {
    fn compute(n_max: usize, m_max: usize, basis: Basis, link: &Link, exec: Exec) -> Result<Self> {
        let cols = m_max + 1;
        let index: Vec<(usize, usize)> = (0..=n_max)
            .flat_map(|k| (0..=m_max).map(move |l| (k, l)))
            .collect();
        let cells = exec.try_map(&index, |&(k, l)| link.relay_success_error(k, l, basis))?;
        Ok(Self { cols, cells })
    }

    /// Mixes relay values over the photons surviving each arm.
    fn mixed(&self, n: usize, m: usize, arms: [f64; 2]) -> (f64, f64) {
        let mut s = 0.0;
        let mut e = 0.0;
        for k in 0..=n {
            let wa = poisson::binomial(n, k, arms[0]);
            if wa == 0.0 {
                continue;
            }
            for l in 0..=m {
                let w = wa * poisson::binomial(m, l, arms[1]);
                let (cs, ce) = self.cells[k * self.cols + l];
                s += w * cs;
                e += w * ce;
            }
        }
        (s, e)
    }
}

/// Truncated table of `Y^{n,m}` and `e^{n,m}` for one basis, stored
/// row-major (`n` selects the row). Undefined error rates are `None` and
/// serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldErrorTable {
    pub basis: Basis,
    pub n_max: usize,
    pub yields: Vec<f64>,
    pub errors: Vec<Option<f64>>,
}

impl YieldErrorTable {
    pub fn zeros(basis: Basis, n_max: usize) -> Self {
        let len = (n_max + 1) * (n_max + 1);
        Self {
            basis,
            n_max,
            yields: vec![0.0; len],
            errors: vec![None; len],
        }
    }

    /// Exact model table from the Fock oracle. The link's Fock limit is
    /// raised to `n_max` if needed.
    pub fn from_model(basis: Basis, link: &Link, n_max: usize, exec: Exec) -> Result<Self> {
        let link = if link.fock_limit() < n_max {
            link.with_fock_limit(n_max)
        } else {
            *link
        };
        let grid = RelayGrid::compute(n_max, n_max, basis, &link, exec)?;
        let mut table = Self::zeros(basis, n_max);
        for n in 0..=n_max {
            for m in 0..=n_max {
                let (s, e) = grid.mixed(n, m, link.arm_transmittance);
                let ye = YieldError::from_probs(s, e);
                table.set(n, m, ye.yield_rate, ye.error_rate);
            }
        }
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        let len = (self.n_max + 1) * (self.n_max + 1);
        if self.yields.len() != len || self.errors.len() != len {
            return Err(Error::Shape(format!(
                "table with n_max {} needs {len} entries, got {} yields and {} errors",
                self.n_max,
                self.yields.len(),
                self.errors.len()
            )));
        }
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !self.yields.iter().copied().all(in_unit) {
            return Err(Error::param("yields", "entries must lie in [0, 1]"));
        }
        if !self.errors.iter().flatten().copied().all(in_unit) {
            return Err(Error::param("errors", "entries must lie in [0, 1]"));
        }
        Ok(())
    }

    fn idx(&self, n: usize, m: usize) -> usize {
        assert!(
            n <= self.n_max && m <= self.n_max,
            "({n}, {m}) outside table"
        );
        n * (self.n_max + 1) + m
    }

    pub fn yield_at(&self, n: usize, m: usize) -> f64 {
        self.yields[self.idx(n, m)]
    }

    pub fn error_at(&self, n: usize, m: usize) -> Option<f64> {
        self.errors[self.idx(n, m)]
    }

    /// `Y^{n,m} e^{n,m}`, zero where the error rate is undefined.
    pub fn error_weighted(&self, n: usize, m: usize) -> f64 {
        self.yield_at(n, m) * self.error_at(n, m).unwrap_or(0.0)
    }

    pub fn set(&mut self, n: usize, m: usize, yield_rate: f64, error_rate: Option<f64>) {
        let i = self.idx(n, m);
        self.yields[i] = yield_rate;
        self.errors[i] = error_rate;
    }

    /// Gain and QBER of WCPs with intensities `mu_a`, `mu_b`, summing the
    /// Poisson-weighted table entries (photon numbers beyond `n_max` are
    /// dropped).
    pub fn observed(&self, mu_a: f64, mu_b: f64) -> AggregateStats {
        let wa = poisson::weights(mu_a, self.n_max);
        let wb = poisson::weights(mu_b, self.n_max);
        let mut gain = 0.0;
        let mut weighted_error = 0.0;
        for (n, &pa) in wa.iter().enumerate() {
            for (m, &pb) in wb.iter().enumerate() {
                let w = pa * pb;
                gain += w * self.yield_at(n, m);
                weighted_error += w * self.error_weighted(n, m);
            }
        }
        AggregateStats::from_sums(self.basis, gain, weighted_error)
    }
}

/// Overall gain `Q` and QBER `E` in one basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub basis: Basis,
    pub gain: f64,
    /// `None` when nothing is detected.
    pub qber: Option<f64>,
}

impl AggregateStats {
    fn from_sums(basis: Basis, gain: f64, weighted_error: f64) -> Self {
        let qber = (gain > 0.0).then(|| (weighted_error / gain).clamp(0.0, 1.0));
        Self { basis, gain, qber }
    }

    /// `Q·E`, zero when `E` is undefined.
    pub fn error_gain(&self) -> f64 {
        self.gain * self.qber.unwrap_or(0.0)
    }
}

/// Observed gain and QBER for WCPs of intensity `mu_a` and `mu_b` leaving
/// the sources; each arm's transmittance scales the intensity that reaches
/// the relay.
pub fn wcp_observed_stats(
    mu_a: f64,
    mu_b: f64,
    basis: Basis,
    link: &Link,
) -> Result<AggregateStats> {
    let [ta, tb] = link.arm_transmittance;
    let mut gain = 0.0;
    let mut weighted_error = 0.0;
    for (pa, pb) in basis.pairs() {
        let alice = SourcePulse::new(pa, mu_a)?.attenuated(ta);
        let bob = SourcePulse::new(pb, mu_b)?.attenuated(tb);
        let p = coherent_outcome_probs(&alice, &bob, &link.transfer, &link.detectors)?;
        gain += 0.25 * p.success();
        weighted_error += 0.25 * error_probability(basis, pa, pb, &p);
    }
    Ok(AggregateStats::from_sums(basis, gain, weighted_error))
}

/// What each party emits in a simulated round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Emission {
    Fock { alice: usize, bob: usize },
    Coherent { mu_a: f64, mu_b: f64 },
}

/// Bits kept after sifting and Bob's flips.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SiftedKey {
    pub alice: Vec<bool>,
    pub bob: Vec<bool>,
    pub bases: Vec<Basis>,
    /// Rounds played to collect the key, including discarded ones.
    pub rounds: usize,
}

impl SiftedKey {
    pub fn len(&self) -> usize {
        self.alice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alice.is_empty()
    }

    /// Fraction of mismatched bits among rounds kept in `basis`.
    pub fn qber(&self, basis: Basis) -> Option<f64> {
        let (errors, kept) = self
            .alice
            .iter()
            .zip(&self.bob)
            .zip(&self.bases)
            .filter(|(_, &b)| b == basis)
            .fold((0usize, 0usize), |(e, k), ((a, b), _)| {
                (e + usize::from(a != b), k + 1)
            });
        (kept > 0).then(|| errors as f64 / kept as f64)
    }
}

/// Plays random BB84 preparations through the relay until `target` rounds
/// survive sifting. Fails if that takes more than `max_rounds` rounds.
pub fn simulate_sifted_key<R: Rng + ?Sized>(
    target: usize,
    emission: Emission,
    link: &Link,
    max_rounds: usize,
    rng: &mut R,
) -> Result<SiftedKey> {
    let mut table = [[OutcomeProbs::default(); 4]; 4];
    for (i, &pa) in Polarization::ALL.iter().enumerate() {
        for (j, &pb) in Polarization::ALL.iter().enumerate() {
            table[i][j] = match emission {
                Emission::Fock { alice, bob } => {
                    let arrived = link.with_fock_limit(link.fock_limit().max(alice).max(bob));
                    // channel loss only matters through the arm mixing
                    let [ta, tb] = link.arm_transmittance;
                    let mut mix = OutcomeProbs::default();
                    for k in 0..=alice {
                        for l in 0..=bob {
                            let w = poisson::binomial(alice, k, ta) * poisson::binomial(bob, l, tb);
                            if w == 0.0 {
                                continue;
                            }
                            let p = arrived.oracle.outcome_probs(
                                k,
                                pa,
                                l,
                                pb,
                                &link.transfer,
                                &link.detectors,
                            )?;
                            mix.add_scaled(&p, w);
                        }
                    }
                    mix
                }
                Emission::Coherent { mu_a, mu_b } => coherent_outcome_probs(
                    &SourcePulse::new(pa, mu_a)?.attenuated(link.arm_transmittance[0]),
                    &SourcePulse::new(pb, mu_b)?.attenuated(link.arm_transmittance[1]),
                    &link.transfer,
                    &link.detectors,
                )?,
            };
        }
    }

    let mut key = SiftedKey::default();
    while key.len() < target {
        if key.rounds >= max_rounds {
            return Err(Error::param(
                "max_rounds",
                format!(
                    "only {} of {target} rounds sifted after {max_rounds} attempts",
                    key.len()
                ),
            ));
        }
        key.rounds += 1;
        let i = rng.random_range(0..4);
        let j = rng.random_range(0..4);
        let (pa, pb) = (Polarization::ALL[i], Polarization::ALL[j]);
        let p = &table[i][j];
        let u: f64 = rng.random();
        let outcome = if u < p.psi_minus {
            BsmOutcome::PsiMinus
        } else if u < p.psi_minus + p.psi_plus {
            BsmOutcome::PsiPlus
        } else {
            BsmOutcome::Fail
        };
        let decision = sift(pa.basis(), pb.basis(), outcome);
        if decision.keep {
            key.alice.push(pa.bit());
            key.bob.push(pb.bit() ^ decision.flip);
            key.bases.push(pa.basis());
        }
    }
    Ok(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{build_network, DetectorModel, NetworkConfig};
    use proptest::prelude::*;

    fn ideal_link() -> Link {
        Link::new(
            build_network(&NetworkConfig::ideal()),
            DetectorBank::ideal(),
        )
        .unwrap()
    }

    fn standard_link() -> Link {
        Link::new(
            build_network(&NetworkConfig::with_misalignment(0.015).unwrap()),
            DetectorBank::uniform(DetectorModel::new(0.145, 6.02e-6).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn sifting_table() {
        use BsmOutcome::*;
        assert_eq!(
            sift(Basis::Rect, Basis::Rect, PsiMinus),
            SiftDecision {
                keep: true,
                flip: true
            }
        );
        assert_eq!(
            sift(Basis::Rect, Basis::Rect, PsiPlus),
            SiftDecision {
                keep: true,
                flip: true
            }
        );
        assert_eq!(
            sift(Basis::Diag, Basis::Diag, PsiMinus),
            SiftDecision {
                keep: true,
                flip: true
            }
        );
        assert_eq!(
            sift(Basis::Diag, Basis::Diag, PsiPlus),
            SiftDecision {
                keep: true,
                flip: false
            }
        );
        assert!(!sift(Basis::Rect, Basis::Diag, PsiMinus).keep);
        assert!(!sift(Basis::Diag, Basis::Rect, PsiPlus).keep);
        assert!(!sift(Basis::Rect, Basis::Rect, Fail).keep);
    }

    #[test]
    fn error_rule_matches_sift_flip() {
        // an error is exactly a kept round whose bits disagree after the flip
        for basis in Basis::ALL {
            for (pa, pb) in basis.pairs() {
                for outcome in [BsmOutcome::PsiMinus, BsmOutcome::PsiPlus] {
                    let d = sift(basis, basis, outcome);
                    let mismatch = pa.bit() != (pb.bit() ^ d.flip);
                    assert_eq!(is_error(basis, pa, pb, outcome), mismatch);
                }
            }
        }
    }

    #[test]
    fn single_photon_rect_yield_is_half() {
        let ye = fock_yield_error(1, 1, Basis::Rect, &ideal_link()).unwrap();
        assert!((ye.yield_rate - 0.5).abs() < 1e-15);
        assert!(ye.error_rate.unwrap().abs() < 1e-15);
    }

    #[test]
    fn single_photon_diag_error_is_zero() {
        let ye = fock_yield_error(1, 1, Basis::Diag, &ideal_link()).unwrap();
        assert!((ye.yield_rate - 0.5).abs() < 1e-15);
        assert!(ye.error_rate.unwrap().abs() < 1e-15);
    }

    #[test]
    fn each_misalignment_rotation_alone_induces_its_fraction() {
        let theta = crate::optics::misalignment_angle(0.0075);
        let input_only = NetworkConfig::new(theta, 0.0, 0.5).unwrap();
        let link = Link::new(build_network(&input_only), DetectorBank::ideal()).unwrap();
        for basis in Basis::ALL {
            let e = fock_yield_error(1, 1, basis, &link)
                .unwrap()
                .error_rate
                .unwrap();
            assert!((e - 0.0075).abs() < 1e-15, "{basis:?} {e}");
        }
        let output_only = NetworkConfig::new(0.0, theta, 0.5).unwrap();
        let link = Link::new(build_network(&output_only), DetectorBank::ideal()).unwrap();
        let e = fock_yield_error(1, 1, Basis::Rect, &link)
            .unwrap()
            .error_rate
            .unwrap();
        assert!((e - 0.0075).abs() < 5e-5, "{e}");
    }

    #[test]
    fn combined_rotations_compound_coherently() {
        // same-sense rotations add in amplitude: e11 = 2.22%, not the nominal 1.5% sum
        let ideal_det = Link::new(*standard_link().transfer(), DetectorBank::ideal()).unwrap();
        let e_ideal = fock_yield_error(1, 1, Basis::Rect, &ideal_det)
            .unwrap()
            .error_rate
            .unwrap();
        assert!(
            (e_ideal - 0.022_219_385_194_479_3).abs() < 1e-12,
            "{e_ideal}"
        );
    }

    #[test]
    fn vacuum_yield_has_undefined_error() {
        let ye = fock_yield_error(0, 0, Basis::Rect, &ideal_link()).unwrap();
        assert_eq!(ye.yield_rate, 0.0);
        assert_eq!(ye.error_rate, None);
    }

    #[test]
    fn rect_errors_vanish_for_all_photon_numbers() {
        let t =
            YieldErrorTable::from_model(Basis::Rect, &ideal_link(), 3, Exec::default()).unwrap();
        for n in 0..=3 {
            for m in 0..=3 {
                if let Some(e) = t.error_at(n, m) {
                    assert!(e.abs() < 1e-12, "e[{n}][{m}] = {e}");
                }
            }
        }
    }

    #[test]
    fn arm_loss_mixes_photon_numbers() {
        // one photon each through t = 0.3 and 0.6: only the (1,1) survivor pair succeeds
        let link = ideal_link().with_arm_transmittance(0.3, 0.6).unwrap();
        let ye = fock_yield_error(1, 1, Basis::Rect, &link).unwrap();
        assert!((ye.yield_rate - 0.5 * 0.3 * 0.6).abs() < 1e-15);
        assert!(ideal_link().with_arm_transmittance(1.2, 0.5).is_err());
    }

    #[test]
    fn vacuum_wcp_has_no_gain() {
        let s = wcp_observed_stats(0.0, 0.0, Basis::Rect, &ideal_link()).unwrap();
        assert_eq!(s.gain, 0.0);
        assert_eq!(s.qber, None);
    }

    #[test]
    fn wcp_gain_matches_poisson_weighted_yields() {
        let link = ideal_link().with_fock_limit(8);
        let table = YieldErrorTable::from_model(Basis::Rect, &link, 8, Exec::default()).unwrap();
        let direct = wcp_observed_stats(0.1, 0.1, Basis::Rect, &link).unwrap();
        let mixed = table.observed(0.1, 0.1);
        assert!((direct.gain - mixed.gain).abs() < 1e-6);
        assert!(direct.qber.unwrap().abs() < 1e-12);
    }

    #[test]
    fn standard_zero_distance_rect_qber_regression() {
        // frozen from the full model on first evaluation
        let s = wcp_observed_stats(0.5, 0.5, Basis::Rect, &standard_link()).unwrap();
        let e = s.qber.unwrap();
        assert!(
            (e / 4.348_423_554_980_011e-2 - 1.0).abs() < 1e-10,
            "E_rect = {e:e}"
        );
        assert!(
            (s.gain / 2.457_672_114_781_726e-3 - 1.0).abs() < 1e-10,
            "Q_rect = {:e}",
            s.gain
        );
    }

    #[test]
    fn table_json_uses_null_for_undefined_errors() {
        let t =
            YieldErrorTable::from_model(Basis::Rect, &ideal_link(), 1, Exec::Sequential).unwrap();
        let json = serde_json::to_value(&t).unwrap();
        assert_eq!(json["basis"], "rect");
        assert_eq!(json["n_max"], 1);
        assert_eq!(json["yields"].as_array().unwrap().len(), 4);
        assert!(json["errors"][0].is_null());
        let back: YieldErrorTable = serde_json::from_value(json).unwrap();
        assert_eq!(back, t);
        back.validate().unwrap();
    }

    #[test]
    fn malformed_table_rejected() {
        let mut t = YieldErrorTable::zeros(Basis::Diag, 2);
        t.yields.pop();
        assert!(matches!(t.validate(), Err(Error::Shape(_))));
        let mut t = YieldErrorTable::zeros(Basis::Diag, 1);
        t.yields[0] = 1.5;
        assert!(t.validate().is_err());
    }

    #[test]
    fn ideal_single_photon_keys_agree() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let key = simulate_sifted_key(
            2000,
            Emission::Fock { alice: 1, bob: 1 },
            &ideal_link(),
            1_000_000,
            &mut rng,
        )
        .unwrap();
        assert_eq!(key.len(), 2000);
        assert_eq!(key.alice, key.bob);
        assert_eq!(key.qber(Basis::Rect), Some(0.0));
        assert_eq!(key.qber(Basis::Diag), Some(0.0));
    }

    #[test]
    fn impossible_sifting_hits_round_limit() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let r = simulate_sifted_key(
            1,
            Emission::Fock { alice: 0, bob: 0 },
            &ideal_link(),
            100,
            &mut rng,
        );
        assert!(r.is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn gain_monotone_in_efficiency_and_intensity(
            eta in 0.05f64..0.9,
            d_eta in 0.0f64..0.1,
            mu in 0.01f64..0.8,
            d_mu in 0.0f64..0.2,
            diag in any::<bool>(),
        ) {
            let basis = if diag { Basis::Diag } else { Basis::Rect };
            let u = build_network(&NetworkConfig::with_misalignment(0.015).unwrap());
            let link = |eta: f64| Link::new(u, DetectorBank::uniform(DetectorModel::new(eta, 1e-5).unwrap())).unwrap();
            let q = |eta, mu_a, mu_b| wcp_observed_stats(mu_a, mu_b, basis, &link(eta)).unwrap().gain;
            let base = q(eta, mu, mu);
            prop_assert!(q(eta + d_eta, mu, mu) >= base - 1e-15);
            prop_assert!(q(eta, mu + d_mu, mu) >= base - 1e-15);
            prop_assert!(q(eta, mu, mu + d_mu) >= base - 1e-15);
        }
    }
}
