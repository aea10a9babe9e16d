//! Asymptotic secret key rate, intensity optimization and distance scans.
//!
//! The rate per pulse is
//!
//! ```text
//! R = Q11_rect [1 - H(e11_diag)] - Q_rect f H(E_rect)
//! ```
//!
//! with the rectilinear basis used for key and the diagonal basis for
//! testing only. Single-photon quantities come straight from the Fock
//! oracle (the infinite-decoy limit); `Q_rect` and `E_rect` from the
//! coherent-state model.

use serde::{Deserialize, Serialize};

use crate::decoy::q11;
use crate::optics::{build_network, DetectorBank, DetectorModel, NetworkConfig};
use crate::protocol::{fock_yield_error, wcp_observed_stats, Basis, Link};
use crate::{Error, Exec, Result};

/// Error-correction inefficiency `f(E_rect)`.
pub const DEFAULT_EC_INEFFICIENCY: f64 = 1.16;
pub const STANDARD_EFFICIENCY: f64 = 0.145;
/// Dark-click probability per detector per gate.
pub const STANDARD_DARK_COUNT: f64 = 6.02e-6;
/// Nominal total misalignment, split evenly over the two rotations.
pub const STANDARD_MISALIGNMENT: f64 = 0.015;
pub const FIBER_ATTENUATION_DB_PER_KM: f64 = 0.2;

/// Allowed excess of `Q11` over `Q_rect` from round-off.
const GAIN_ORDER_SLACK: f64 = 1e-12;

/// `-x log₂ x - (1-x) log₂(1-x)`, continuous at the endpoints.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::param(
            "entropy argument",
            format!("{x} outside [0, 1]"),
        ));
    }
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    Ok(term(x) + term(1.0 - x))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyFunction {
    #[default]
    BinaryShannon,
}

impl EntropyFunction {
    pub fn eval(self, x: f64) -> Result<f64> {
        match self {
            EntropyFunction::BinaryShannon => binary_entropy(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateParams {
    ec_inefficiency: f64,
    entropy: EntropyFunction,
}

impl Default for KeyRateParams {
    fn default() -> Self {
        Self {
            ec_inefficiency: DEFAULT_EC_INEFFICIENCY,
            entropy: EntropyFunction::BinaryShannon,
        }
    }
}

impl KeyRateParams {
    pub fn new(ec_inefficiency: f64) -> Result<Self> {
        if !(ec_inefficiency >= 1.0 && ec_inefficiency.is_finite()) {
            return Err(Error::param(
                "ec_inefficiency",
                format!("must be finite and >= 1, got {ec_inefficiency}"),
            ));
        }
        Ok(Self {
            ec_inefficiency,
            entropy: EntropyFunction::BinaryShannon,
        })
    }

    pub fn ec_inefficiency(&self) -> f64 {
        self.ec_inefficiency
    }
}

/// Key rate before and after clamping negative values to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyRate {
    pub raw: f64,
    pub clamped: f64,
}

pub fn key_rate(
    q11: f64,
    e11_diag: f64,
    q_rect: f64,
    e_rect: f64,
    params: &KeyRateParams,
) -> Result<KeyRate> {
    for (name, v) in [
        ("q11_rect", q11),
        ("e11_diag", e11_diag),
        ("q_rect", q_rect),
        ("e_rect", e_rect),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::param(name, format!("{v} outside [0, 1]")));
        }
    }
    if q11 > q_rect * (1.0 + GAIN_ORDER_SLACK) {
        return Err(Error::param(
            "q11_rect",
            format!("single-photon gain {q11:e} exceeds total gain {q_rect:e}"),
        ));
    }
    let h = |x| params.entropy.eval(x);
    let raw = q11 * (1.0 - h(e11_diag)?) - q_rect * params.ec_inefficiency * h(e_rect)?;
    Ok(KeyRate {
        raw,
        clamped: raw.max(0.0),
    })
}

/// Fiber loss in dB/km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    attenuation_db_per_km: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            attenuation_db_per_km: FIBER_ATTENUATION_DB_PER_KM,
        }
    }
}

impl ChannelModel {
    pub fn new(attenuation_db_per_km: f64) -> Result<Self> {
        if !(attenuation_db_per_km >= 0.0 && attenuation_db_per_km.is_finite()) {
            return Err(Error::param(
                "attenuation_db_per_km",
                format!("must be finite and >= 0, got {attenuation_db_per_km}"),
            ));
        }
        Ok(Self {
            attenuation_db_per_km,
        })
    }

    pub fn attenuation_db_per_km(&self) -> f64 {
        self.attenuation_db_per_km
    }

    pub fn loss_db(&self, length_km: f64) -> f64 {
        self.attenuation_db_per_km * length_km
    }

    pub fn transmittance(&self, length_km: f64) -> f64 {
        10f64.powf(-self.loss_db(length_km) / 10.0)
    }
}

/// Where the relay sits between Alice and Bob.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelayPosition {
    #[default]
    Midpoint,
    AtAlice,
    /// Alice's share of the total length.
    AliceFraction(f64),
}

impl RelayPosition {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RelayPosition::AliceFraction(f) if !(0.0..=1.0).contains(&f) => Err(Error::param(
                "relay_alice_fraction",
                format!("must lie in [0, 1], got {f}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn alice_fraction(&self) -> f64 {
        match *self {
            RelayPosition::Midpoint => 0.5,
            RelayPosition::AtAlice => 0.0,
            RelayPosition::AliceFraction(f) => f,
        }
    }

    /// `(L_A, L_B)` for a total Alice-Bob length.
    pub fn arm_lengths(&self, total_km: f64) -> (f64, f64) {
        let la = total_km * self.alice_fraction();
        (la, total_km - la)
    }
}

/// Log-spaced search over a common intensity `μ_A = μ_B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensitySearch {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    /// Golden-section refinement around the best grid point.
    pub refine: bool,
}

impl Default for IntensitySearch {
    fn default() -> Self {
        Self {
            min: 0.005,
            max: 1.0,
            points: 40,
            refine: true,
        }
    }
}

impl IntensitySearch {
    pub fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::param("intensity_points", "grid must be nonempty"));
        }
        if !(self.min > 0.0 && self.max >= self.min && self.max.is_finite()) {
            return Err(Error::param(
                "intensity_range",
                format!("need 0 < min <= max, got [{}, {}]", self.min, self.max),
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let ratio = (self.max / self.min).ln();
        (0..self.points)
            .map(|k| self.min * (ratio * k as f64 / (self.points - 1) as f64).exp())
            .collect()
    }
}

/// Everything needed to evaluate the key rate at a distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    pub detectors: DetectorBank,
    pub network: NetworkConfig,
    pub channel: ChannelModel,
    pub relay: RelayPosition,
    pub params: KeyRateParams,
}

impl SystemConfig {
    /// η = 14.5 %, dark clicks 6.02e-6, 1.5 % misalignment, 0.2 dB/km,
    /// f = 1.16, relay at the midpoint.
    pub fn standard() -> Self {
        Self {
            detectors: DetectorBank::uniform(
                DetectorModel::new(STANDARD_EFFICIENCY, STANDARD_DARK_COUNT)
                    .expect("valid constants"),
            ),
            network: NetworkConfig::with_misalignment(STANDARD_MISALIGNMENT)
                .expect("valid constant"),
            channel: ChannelModel::default(),
            relay: RelayPosition::Midpoint,
            params: KeyRateParams::default(),
        }
    }

    /// Perfect detectors and alignment on the same fiber.
    pub fn ideal() -> Self {
        Self {
            detectors: DetectorBank::ideal(),
            network: NetworkConfig::ideal(),
            ..Self::standard()
        }
    }

    pub fn with_relay(mut self, relay: RelayPosition) -> Self {
        self.relay = relay;
        self
    }

    /// Relay plus the two fiber arms for a total Alice-Bob distance.
    pub fn link_at(&self, total_km: f64) -> Result<Link> {
        if !(total_km >= 0.0 && total_km.is_finite()) {
            return Err(Error::param(
                "distance_km",
                format!("must be finite and >= 0, got {total_km}"),
            ));
        }
        self.relay.validate()?;
        let (la, lb) = self.relay.arm_lengths(total_km);
        Link::new(build_network(&self.network), self.detectors)?.with_arm_transmittance(
            self.channel.transmittance(la),
            self.channel.transmittance(lb),
        )
    }
}

/// One point of a key-rate curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub distance_km: f64,
    pub mu_a: f64,
    pub mu_b: f64,
    pub q11_rect: f64,
    pub e11_diag: Option<f64>,
    pub q_rect: f64,
    pub e_rect: Option<f64>,
    pub key_rate_raw: f64,
    pub key_rate: f64,
}

/// Intensity-independent single-photon terms at one distance.
struct DistanceModel {
    distance_km: f64,
    link: Link,
    y11_rect: f64,
    e11_diag: Option<f64>,
}

impl DistanceModel {
    fn new(distance_km: f64, cfg: &SystemConfig) -> Result<Self> {
        let link = cfg.link_at(distance_km)?;
        let y11_rect = fock_yield_error(1, 1, Basis::Rect, &link)?.yield_rate;
        let e11_diag = fock_yield_error(1, 1, Basis::Diag, &link)?.error_rate;
        Ok(Self {
            distance_km,
            link,
            y11_rect,
            e11_diag,
        })
    }

    fn point(&self, mu_a: f64, mu_b: f64, params: &KeyRateParams) -> Result<ScanPoint> {
        let q11_rect = q11(mu_a, mu_b, self.y11_rect);
        let rect = wcp_observed_stats(mu_a, mu_b, Basis::Rect, &self.link)?;
        // an undefined e11 only occurs with a vanishing Q11, where it carries no weight
        let rate = key_rate(
            q11_rect,
            self.e11_diag.unwrap_or(0.5),
            rect.gain,
            rect.qber.unwrap_or(0.0),
            params,
        )?;
        Ok(ScanPoint {
            distance_km: self.distance_km,
            mu_a,
            mu_b,
            q11_rect,
            e11_diag: self.e11_diag,
            q_rect: rect.gain,
            e_rect: rect.qber,
            key_rate_raw: rate.raw,
            key_rate: rate.clamped,
        })
    }
}

/// Key rate at a fixed pair of signal intensities.
pub fn evaluate_point(
    distance_km: f64,
    mu_a: f64,
    mu_b: f64,
    cfg: &SystemConfig,
) -> Result<ScanPoint> {
    DistanceModel::new(distance_km, cfg)?.point(mu_a, mu_b, &cfg.params)
}

/// Maximizes the clamped key rate over a common intensity. Ties, including
/// the all-zero case beyond the cutoff, resolve to the smallest intensity.
pub fn optimize_intensity(
    distance_km: f64,
    cfg: &SystemConfig,
    search: &IntensitySearch,
) -> Result<ScanPoint> {
    search.validate()?;
    let model = DistanceModel::new(distance_km, cfg)?;
    let eval = |mu: f64| model.point(mu, mu, &cfg.params);

    let grid = search.grid();
    let mut best_k = 0;
    let mut best = eval(grid[0])?;
    for (k, &mu) in grid.iter().enumerate().skip(1) {
        let p = eval(mu)?;
        if p.key_rate > best.key_rate {
            best = p;
            best_k = k;
        }
    }
    if !search.refine || best.key_rate <= 0.0 || grid.len() < 2 {
        return Ok(best);
    }

    let lo = grid[best_k.saturating_sub(1)].ln();
    let hi = grid[(best_k + 1).min(grid.len() - 1)].ln();
    let refined = golden_section_max(lo, hi, 1e-7, |x| Ok(eval(x.exp())?.key_rate))?;
    let candidate = eval(refined.exp())?;
    if candidate.key_rate > best.key_rate {
        best = candidate;
    }
    Ok(best)
}

fn golden_section_max<F>(mut a: f64, mut b: f64, tol: f64, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { c } else { d })
}

fn validate_distances(distances: &[f64]) -> Result<()> {
    if distances.is_empty() {
        return Err(Error::param("distances", "list is empty"));
    }
    if distances.iter().any(|&d| !(d >= 0.0 && d.is_finite())) {
        return Err(Error::param("distances", "must be finite and >= 0"));
    }
    if distances.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("distances", "must be ascending"));
    }
    Ok(())
}

/// Optimized key rate at each distance, in input order.
pub fn distance_scan(
    distances: &[f64],
    cfg: &SystemConfig,
    search: &IntensitySearch,
    exec: Exec,
) -> Result<Vec<ScanPoint>> {
    validate_distances(distances)?;
    search.validate()?;
    exec.try_map(distances, |&d| optimize_intensity(d, cfg, search))
}

/// Key rate at fixed intensities for every distance.
pub fn distance_scan_fixed(
    distances: &[f64],
    mu_a: f64,
    mu_b: f64,
    cfg: &SystemConfig,
    exec: Exec,
) -> Result<Vec<ScanPoint>> {
    validate_distances(distances)?;
    exec.try_map(distances, |&d| evaluate_point(d, mu_a, mu_b, cfg))
}

/// Largest distance with a positive optimized key rate, located by
/// bisection between `lo` (positive) and `hi` (zero) to within `tol_km`.
/// Returns `None` if the bracket does not straddle the cutoff.
pub fn find_cutoff(
    cfg: &SystemConfig,
    search: &IntensitySearch,
    lo: f64,
    hi: f64,
    tol_km: f64,
) -> Result<Option<f64>> {
    search.validate()?;
    bisect_cutoff(lo, hi, tol_km, |d| {
        Ok(optimize_intensity(d, cfg, search)?.key_rate > 0.0)
    })
}

/// As [`find_cutoff`] with the intensities held fixed.
pub fn find_cutoff_fixed(
    cfg: &SystemConfig,
    mu_a: f64,
    mu_b: f64,
    lo: f64,
    hi: f64,
    tol_km: f64,
) -> Result<Option<f64>> {
    bisect_cutoff(lo, hi, tol_km, |d| {
        Ok(evaluate_point(d, mu_a, mu_b, cfg)?.key_rate > 0.0)
    })
}

fn bisect_cutoff<F>(lo: f64, hi: f64, tol_km: f64, positive: F) -> Result<Option<f64>>
where
    F: Fn(f64) -> Result<bool>,
{
    if tol_km.is_nan() || tol_km <= 0.0 || !(0.0..hi).contains(&lo) || !hi.is_finite() {
        return Err(Error::param(
            "cutoff_bracket",
            format!("need 0 <= lo < hi and tol > 0, got [{lo}, {hi}] tol {tol_km}"),
        ));
    }
    if !positive(lo)? || positive(hi)? {
        return Ok(None);
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol_km {
        let mid = 0.5 * (a + b);
        if positive(mid)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Some(0.5 * (a + b)))
}
