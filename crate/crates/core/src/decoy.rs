//! Decoy-state estimation of per-photon-number yields and error rates.
//!
//! Observed gains over a grid of Alice intensities `μ_i` and Bob
//! intensities `μ_j` satisfy
//!
//! ```text
//! Q^{ij} = Σ_n P(n; μ_i) Y_n^j,        Y_n^j = Σ_m P(m; μ_j) Y^{nm}
//! ```
//!
//! so the two-party system splits into two rounds of the single-party
//! Poisson inversion: first over `i` for every fixed `j`, then over `j` for
//! every photon number `n`. The same two stages applied to `Q^{ij} E^{ij}`
//! yield `Y^{nm} e^{nm}`.

use log::warn;
use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::protocol::{
    wcp_observed_stats, AggregateStats, Basis, Link, YieldErrorTable, YIELD_EPSILON,
};
use crate::{poisson, Error, Exec, Result};

/// Default decoy intensities for both parties.
pub const DEFAULT_GRID: [f64; 6] = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5];
/// Photon-number truncation used when estimating.
pub const DEFAULT_ESTIMATION_N_MAX: usize = 4;
/// Photon-number truncation used when synthesizing from a model table.
pub const DEFAULT_SYNTHESIS_N_MAX: usize = 8;
/// Systems with a larger 2-norm condition number are rejected.
pub const CONDITION_LIMIT: f64 = 1e14;
/// Out-of-range estimates closer than this to the admissible interval are
/// snapped back silently; anything further away is clamped and logged.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

/// Decoy intensities of each party, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityGrid {
    alice: Vec<f64>,
    bob: Vec<f64>,
}

impl Default for IntensityGrid {
    fn default() -> Self {
        Self {
            alice: DEFAULT_GRID.to_vec(),
            bob: DEFAULT_GRID.to_vec(),
        }
    }
}

impl IntensityGrid {
    pub fn new(alice: Vec<f64>, bob: Vec<f64>) -> Result<Self> {
        let grid = Self { alice, bob };
        grid.validate()?;
        Ok(grid)
    }

    pub fn symmetric(values: Vec<f64>) -> Result<Self> {
        Self::new(values.clone(), values)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, side) in [
            ("alice_intensities", &self.alice),
            ("bob_intensities", &self.bob),
        ] {
            if side.iter().any(|&mu| !(mu >= 0.0 && mu.is_finite())) {
                return Err(Error::param(name, "intensities must be finite and >= 0"));
            }
            if side.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::param(
                    name,
                    "intensities must be strictly increasing",
                ));
            }
        }
        Ok(())
    }

    pub fn alice(&self) -> &[f64] {
        &self.alice
    }

    pub fn bob(&self) -> &[f64] {
        &self.bob
    }
}

/// Least-squares solution of a Poisson-mixture system.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonFit {
    /// `c_n` for `n = 0..=n_max`.
    pub coefficients: Vec<f64>,
    /// `‖A c - v‖₂`.
    pub residual_norm: f64,
    /// Ratio of extreme singular values of the column-equilibrated design
    /// matrix.
    pub condition: f64,
}

/// Design matrix `A_{in} = P(n; μ_i)` factored once and reused for many
/// right-hand sides. Columns are scaled to unit norm before factoring: the
/// high-order columns are orders of magnitude smaller than the vacuum one,
/// and equilibrating removes that spread from the condition number.
struct PoissonSystem {
    design: DMatrix<f64>,
    column_scale: Vec<f64>,
    svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    condition: f64,
}

impl PoissonSystem {
    fn new(intensities: &[f64], n_max: usize, context: impl Fn() -> String) -> Result<Self> {
        let required = n_max + 1;
        let mut distinct = intensities.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < required {
            return Err(Error::InsufficientIntensities {
                required,
                given: distinct.len(),
            });
        }
        if intensities.iter().any(|&mu| !(mu >= 0.0 && mu.is_finite())) {
            return Err(Error::param("intensities", "must be finite and >= 0"));
        }
        let design = DMatrix::from_fn(intensities.len(), required, |i, n| {
            poisson::weight(intensities[i], n)
        });
        let column_scale: Vec<f64> = design
            .column_iter()
            .map(|c| {
                let norm = c.norm();
                if norm > 0.0 {
                    1.0 / norm
                } else {
                    1.0
                }
            })
            .collect();
        let mut scaled = design.clone();
        for (mut col, &k) in scaled.column_iter_mut().zip(&column_scale) {
            col *= k;
        }
        let svd = scaled.svd(true, true);
        let max = svd.singular_values.max();
        let min = svd.singular_values.min();
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if condition.is_nan() || condition > CONDITION_LIMIT {
            return Err(Error::IllConditioned {
                context: context(),
                condition,
            });
        }
        Ok(Self {
            design,
            column_scale,
            svd,
            condition,
        })
    }

    fn solve(&self, values: &[f64]) -> Result<PoissonFit> {
        if values.len() != self.design.nrows() {
            return Err(Error::Shape(format!(
                "{} values for {} intensities",
                values.len(),
                self.design.nrows()
            )));
        }
        let rhs = DVector::from_column_slice(values);
        let mut x = self
            .svd
            .solve(&rhs, 0.0)
            .map_err(|e| Error::Shape(e.to_string()))?;
        for (xi, &k) in x.iter_mut().zip(&self.column_scale) {
            *xi *= k;
        }
        let residual_norm = (&self.design * &x - rhs).norm();
        Ok(PoissonFit {
            coefficients: x.iter().copied().collect(),
            residual_norm,
            condition: self.condition,
        })
    }
}

/// Solves `values_i = Σ_{n ≤ n_max} e^{-μ_i} μ_i^n / n! · c_n` in the
/// least-squares sense.
pub fn invert_poisson(values: &[f64], intensities: &[f64], n_max: usize) -> Result<PoissonFit> {
    PoissonSystem::new(intensities, n_max, || "Poisson inversion".to_string())?.solve(values)
}

/// Observed gain and QBER matrices of one basis, indexed `[i][j]` by Alice's
/// and Bob's decoy setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisObservations {
    pub gain: Vec<Vec<f64>>,
    /// `null` where the gain vanishes.
    pub qber: Vec<Vec<Option<f64>>>,
}

impl BasisObservations {
    fn from_stats(stats: Vec<Vec<AggregateStats>>) -> Self {
        Self {
            gain: stats
                .iter()
                .map(|row| row.iter().map(|s| s.gain).collect())
                .collect(),
            qber: stats
                .iter()
                .map(|row| row.iter().map(|s| s.qber).collect())
                .collect(),
        }
    }

    fn error_gain(&self, i: usize, j: usize) -> f64 {
        self.gain[i][j] * self.qber[i][j].unwrap_or(0.0)
    }
}

/// The decoy measurement record: gains and QBERs in both bases over the
/// intensity grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedStats {
    pub grid: IntensityGrid,
    pub rect: BasisObservations,
    pub diag: BasisObservations,
}

impl ObservedStats {
    pub fn basis(&self, basis: Basis) -> &BasisObservations {
        match basis {
            Basis::Rect => &self.rect,
            Basis::Diag => &self.diag,
        }
    }

    /// Exact asymptotic observations from the coherent-state model.
    pub fn synthesize(grid: &IntensityGrid, link: &Link, exec: Exec) -> Result<Self> {
        let cells: Vec<(usize, usize)> = (0..grid.alice.len())
            .flat_map(|i| (0..grid.bob.len()).map(move |j| (i, j)))
            .collect();
        let mut out = Vec::with_capacity(2);
        for basis in Basis::ALL {
            let flat = exec.try_map(&cells, |&(i, j)| {
                wcp_observed_stats(grid.alice[i], grid.bob[j], basis, link)
            })?;
            let rows = flat.chunks(grid.bob.len()).map(<[_]>::to_vec).collect();
            out.push(BasisObservations::from_stats(rows));
        }
        let diag = out.pop().expect("two bases");
        let rect = out.pop().expect("two bases");
        Ok(Self {
            grid: grid.clone(),
            rect,
            diag,
        })
    }

    /// Observations implied by truncated yield/error tables: photon numbers
    /// beyond each table's `n_max` contribute nothing.
    pub fn from_tables(
        grid: &IntensityGrid,
        rect: &YieldErrorTable,
        diag: &YieldErrorTable,
    ) -> Result<Self> {
        let build = |table: &YieldErrorTable| -> Result<BasisObservations> {
            table.validate()?;
            let rows = grid
                .alice
                .iter()
                .map(|&mu_a| {
                    grid.bob
                        .iter()
                        .map(|&mu_b| table.observed(mu_a, mu_b))
                        .collect()
                })
                .collect();
            Ok(BasisObservations::from_stats(rows))
        };
        Ok(Self {
            grid: grid.clone(),
            rect: build(rect)?,
            diag: build(diag)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let (rows, cols) = (self.grid.alice.len(), self.grid.bob.len());
        for basis in Basis::ALL {
            let obs = self.basis(basis);
            let shape_ok = obs.gain.len() == rows
                && obs.qber.len() == rows
                && obs.gain.iter().all(|r| r.len() == cols)
                && obs.qber.iter().all(|r| r.len() == cols);
            if !shape_ok {
                return Err(Error::Shape(format!(
                    "{} observations must be {rows}x{cols}",
                    basis.name()
                )));
            }
            for (grow, erow) in obs.gain.iter().zip(&obs.qber) {
                for (&q, e) in grow.iter().zip(erow) {
                    if !(0.0..=1.0).contains(&q) {
                        return Err(Error::param("gain", format!("{q} outside [0, 1]")));
                    }
                    match e {
                        Some(e) if !(0.0..=1.0).contains(e) => {
                            return Err(Error::param("qber", format!("{e} outside [0, 1]")));
                        }
                        None if q > 0.0 => {
                            return Err(Error::param("qber", "missing where the gain is positive"));
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(())
    }
}

/// Which quantity a clamp was applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    MarginalYield,
    Yield,
    MarginalErrorWeight,
    ErrorRate,
}

/// An estimate that left its admissible interval by more than
/// [`CLAMP_TOLERANCE`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClampEvent {
    pub stage: Stage,
    /// Row and column of the clamped entry in the stage's own indexing.
    pub index: (usize, usize),
    pub raw: f64,
    pub clamped: f64,
}

fn clamp_logged(
    value: f64,
    lo: f64,
    hi: f64,
    stage: Stage,
    index: (usize, usize),
    events: &mut Vec<ClampEvent>,
) -> f64 {
    let clamped = value.clamp(lo, hi);
    if (clamped - value).abs() > CLAMP_TOLERANCE {
        warn!("clamped {stage:?}{index:?} from {value:e} to {clamped}");
        events.push(ClampEvent {
            stage,
            index,
            raw: value,
            clamped,
        });
    }
    clamped
}

/// First-stage results, indexed `[j][n]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DecoyIntermediates {
    /// `Y_n^j`.
    pub marginal_yields: Vec<Vec<f64>>,
    /// `W_n^j`; empty until error rates are estimated.
    pub marginal_error_weights: Vec<Vec<f64>>,
}

/// Recovered table together with solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub table: YieldErrorTable,
    pub intermediates: DecoyIntermediates,
    pub clamps: Vec<ClampEvent>,
    pub max_residual: f64,
    pub max_condition: f64,
}

/// Output of one two-stage inversion, before clamping of the final stage.
struct TwoStage {
    marginals: Vec<Vec<f64>>,
    coefficients: Vec<Vec<f64>>,
    max_residual: f64,
    max_condition: f64,
}

fn two_stage<F>(
    grid: &IntensityGrid,
    n_max: usize,
    what: &str,
    marginal_stage: Stage,
    value: F,
    exec: Exec,
    clamps: &mut Vec<ClampEvent>,
) -> Result<TwoStage>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let alice_sys = PoissonSystem::new(&grid.alice, n_max, || {
        format!("{what} stage 1 (over Alice intensities)")
    })?;
    let bob_sys = PoissonSystem::new(&grid.bob, n_max, || {
        format!("{what} stage 2 (over Bob intensities)")
    })?;

    let columns: Vec<usize> = (0..grid.bob.len()).collect();
    let stage1 = exec.try_map(&columns, |&j| {
        let values: Vec<f64> = (0..grid.alice.len()).map(|i| value(i, j)).collect();
        alice_sys
            .solve(&values)
            .map_err(|e| with_context(e, what, 1, j))
    })?;

    let mut max_residual = 0.0f64;
    let mut marginals = Vec::with_capacity(stage1.len());
    for (j, fit) in stage1.into_iter().enumerate() {
        max_residual = max_residual.max(fit.residual_norm);
        let row = fit
            .coefficients
            .into_iter()
            .enumerate()
            .map(|(n, c)| clamp_logged(c, 0.0, 1.0, marginal_stage, (j, n), clamps))
            .collect();
        marginals.push(row);
    }

    let photon_numbers: Vec<usize> = (0..=n_max).collect();
    let stage2 = exec.try_map(&photon_numbers, |&n| {
        let values: Vec<f64> = marginals.iter().map(|row: &Vec<f64>| row[n]).collect();
        bob_sys
            .solve(&values)
            .map_err(|e| with_context(e, what, 2, n))
    })?;
    for fit in &stage2 {
        max_residual = max_residual.max(fit.residual_norm);
    }

    Ok(TwoStage {
        marginals,
        coefficients: stage2.into_iter().map(|f| f.coefficients).collect(),
        max_residual,
        max_condition: alice_sys.condition.max(bob_sys.condition),
    })
}

fn with_context(err: Error, what: &str, stage: usize, index: usize) -> Error {
    match err {
        Error::Shape(msg) => Error::Shape(format!("{what} stage {stage}, index {index}: {msg}")),
        other => other,
    }
}

/// Recovers `Y^{n,m}` for `n, m ≤ n_max` from the observed gains.
pub fn estimate_yields(
    obs: &ObservedStats,
    basis: Basis,
    n_max: usize,
    exec: Exec,
) -> Result<Estimate> {
    obs.validate()?;
    let data = obs.basis(basis);
    let mut clamps = Vec::new();
    let solved = two_stage(
        &obs.grid,
        n_max,
        "yield",
        Stage::MarginalYield,
        |i, j| data.gain[i][j],
        exec,
        &mut clamps,
    )?;

    let mut table = YieldErrorTable::zeros(basis, n_max);
    for (n, row) in solved.coefficients.iter().enumerate() {
        for (m, &y) in row.iter().enumerate() {
            let y = clamp_logged(y, 0.0, 1.0, Stage::Yield, (n, m), &mut clamps);
            table.set(n, m, y, None);
        }
    }
    Ok(Estimate {
        table,
        intermediates: DecoyIntermediates {
            marginal_yields: solved.marginals,
            marginal_error_weights: Vec::new(),
        },
        clamps,
        max_residual: solved.max_residual,
        max_condition: solved.max_condition,
    })
}

/// Fills in `e^{n,m}` on top of a yield estimate by inverting `Q·E`.
/// Entries whose yield is at most [`YIELD_EPSILON`] stay undefined.
pub fn estimate_errors(obs: &ObservedStats, yields: &Estimate, exec: Exec) -> Result<Estimate> {
    obs.validate()?;
    let basis = yields.table.basis;
    let n_max = yields.table.n_max;
    let data = obs.basis(basis);
    let mut clamps = yields.clamps.clone();
    let solved = two_stage(
        &obs.grid,
        n_max,
        "error",
        Stage::MarginalErrorWeight,
        |i, j| data.error_gain(i, j),
        exec,
        &mut clamps,
    )?;

    let mut table = yields.table.clone();
    for (n, row) in solved.coefficients.iter().enumerate() {
        for (m, &weighted) in row.iter().enumerate() {
            let y = table.yield_at(n, m);
            let e = (y > YIELD_EPSILON).then(|| {
                clamp_logged(
                    weighted / y,
                    0.0,
                    1.0,
                    Stage::ErrorRate,
                    (n, m),
                    &mut clamps,
                )
            });
            table.set(n, m, y, e);
        }
    }
    Ok(Estimate {
        table,
        intermediates: DecoyIntermediates {
            marginal_yields: yields.intermediates.marginal_yields.clone(),
            marginal_error_weights: solved.marginals,
        },
        clamps,
        max_residual: yields.max_residual.max(solved.max_residual),
        max_condition: yields.max_condition.max(solved.max_condition),
    })
}

/// Both estimation passes for one basis.
pub fn estimate(obs: &ObservedStats, basis: Basis, n_max: usize, exec: Exec) -> Result<Estimate> {
    let yields = estimate_yields(obs, basis, n_max, exec)?;
    estimate_errors(obs, &yields, exec)
}

/// Single-photon-pair gain `μ_A μ_B e^{-(μ_A+μ_B)} Y^{1,1}`.
pub fn q11(mu_a: f64, mu_b: f64, y11: f64) -> f64 {
    mu_a * mu_b * (-(mu_a + mu_b)).exp() * y11
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{build_network, DetectorBank, DetectorModel, NetworkConfig};
    use proptest::prelude::*;

    fn ideal_link() -> Link {
        Link::new(
            build_network(&NetworkConfig::ideal()),
            DetectorBank::ideal(),
        )
        .unwrap()
    }

    #[test]
    fn zero_values_give_zero_coefficients() {
        let fit = invert_poisson(&[0.0; 6], &DEFAULT_GRID, 4).unwrap();
        assert!(fit.coefficients.iter().all(|&c| c == 0.0));
        assert_eq!(fit.residual_norm, 0.0);
        assert_eq!(fit.coefficients.len(), 5);
    }

    #[test]
    fn vacuum_only_pattern() {
        let v = 0.37;
        let values: Vec<f64> = DEFAULT_GRID.iter().map(|&mu| v * (-mu).exp()).collect();
        let fit = invert_poisson(&values, &DEFAULT_GRID, 4).unwrap();
        assert!((fit.coefficients[0] - v).abs() < 1e-10);
        for c in &fit.coefficients[1..] {
            assert!(c.abs() < 1e-8, "{c}");
        }
    }

    #[test]
    fn synthesized_coefficients_are_recovered() {
        let truth = [1e-4, 0.3, 0.55, 0.7, 0.8];
        let values: Vec<f64> = DEFAULT_GRID
            .iter()
            .map(|&mu| (0..5).map(|n| poisson::weight(mu, n) * truth[n]).sum())
            .collect();
        let fit = invert_poisson(&values, &DEFAULT_GRID, 4).unwrap();
        for (c, t) in fit.coefficients.iter().zip(truth) {
            assert!(((c - t) / t).abs() < 1e-8, "{c} vs {t}");
        }
        assert!(fit.residual_norm < 1e-14);
        // equilibrated; the raw design matrix is near 1e5
        assert!(
            fit.condition > 1e2 && fit.condition < 1e3,
            "{}",
            fit.condition
        );
    }

    #[test]
    fn too_few_intensities_rejected() {
        let r = invert_poisson(&[0.1; 4], &[0.1, 0.2, 0.3, 0.4], 4);
        assert_eq!(
            r,
            Err(Error::InsufficientIntensities {
                required: 5,
                given: 4
            })
        );
        let r = invert_poisson(&[0.1; 5], &[0.1, 0.2, 0.2, 0.3, 0.4], 4);
        assert!(matches!(
            r,
            Err(Error::InsufficientIntensities { given: 4, .. })
        ));
    }

    #[test]
    fn near_degenerate_grid_reported_as_ill_conditioned() {
        let grid = [0.1, 0.1 + 1e-9, 0.1 + 2e-9, 0.1 + 3e-9, 0.1 + 4e-9];
        match invert_poisson(&[0.0; 5], &grid, 4) {
            Err(Error::IllConditioned { condition, .. }) => assert!(condition > CONDITION_LIMIT),
            other => panic!("expected ill-conditioning, got {other:?}"),
        }
    }

    #[test]
    fn grid_validation() {
        assert!(IntensityGrid::symmetric(vec![0.1, 0.1, 0.2]).is_err());
        assert!(IntensityGrid::symmetric(vec![-0.1, 0.2]).is_err());
        assert!(IntensityGrid::symmetric(vec![0.0, 0.2]).is_ok());
    }

    #[test]
    fn all_zero_observations_give_zero_table() {
        let grid = IntensityGrid::default();
        let zero = YieldErrorTable::zeros(Basis::Rect, 4);
        let obs = ObservedStats::from_tables(&grid, &zero, &YieldErrorTable::zeros(Basis::Diag, 4))
            .unwrap();
        let est = estimate(&obs, Basis::Rect, 4, Exec::default()).unwrap();
        assert!(est.table.yields.iter().all(|&y| y == 0.0));
        assert!(est.table.errors.iter().all(Option::is_none));
        assert!(est.clamps.is_empty());
    }

    #[test]
    fn ideal_round_trip_recovers_single_photon_terms() {
        let link = ideal_link();
        let grid = IntensityGrid::default();
        let rect = YieldErrorTable::from_model(Basis::Rect, &link, 4, Exec::default()).unwrap();
        let diag = YieldErrorTable::from_model(Basis::Diag, &link, 4, Exec::default()).unwrap();
        let obs = ObservedStats::from_tables(&grid, &rect, &diag).unwrap();
        let r = estimate(&obs, Basis::Rect, 4, Exec::default()).unwrap();
        let d = estimate(&obs, Basis::Diag, 4, Exec::default()).unwrap();
        assert!((r.table.yield_at(1, 1) / 0.5 - 1.0).abs() < 1e-6);
        assert!(r.table.error_at(1, 1).unwrap().abs() < 1e-9);
        assert!(d.table.error_at(1, 1).unwrap().abs() < 1e-9);
        // Y^{0,0} = 0 without dark counts, so its error rate stays undefined
        assert_eq!(r.table.error_at(0, 0), None);
        assert!(r.clamps.is_empty(), "{:?}", r.clamps);
        assert_eq!(r.intermediates.marginal_yields.len(), grid.bob().len());
        assert_eq!(r.intermediates.marginal_error_weights[0].len(), 5);
    }

    #[test]
    fn coherent_synthesis_bias_shrinks_with_more_decoys() {
        // the truncation bias at fixed n_max is what the infinite-decoy limit removes
        let link = Link::new(
            build_network(&NetworkConfig::with_misalignment(0.015).unwrap()),
            DetectorBank::uniform(DetectorModel::new(0.145, 6.02e-6).unwrap()),
        )
        .unwrap();
        let truth = YieldErrorTable::from_model(Basis::Rect, &link, 1, Exec::default())
            .unwrap()
            .yield_at(1, 1);
        let mut last = f64::INFINITY;
        for k in [5usize, 7, 9] {
            let values: Vec<f64> = (0..k)
                .map(|i| 0.05 + 0.45 * i as f64 / (k - 1) as f64)
                .collect();
            let grid = IntensityGrid::symmetric(values).unwrap();
            let obs = ObservedStats::synthesize(&grid, &link, Exec::default()).unwrap();
            let est = estimate_yields(&obs, Basis::Rect, k - 1, Exec::default()).unwrap();
            let err = (est.table.yield_at(1, 1) / truth - 1.0).abs();
            assert!(err < last, "k={k}: {err} !< {last}");
            last = err;
        }
        assert!(last < 1e-6, "{last}");
    }

    #[test]
    fn default_grid_round_trip_up_to_three_photons() {
        let mut rect = YieldErrorTable::zeros(Basis::Rect, 3);
        for n in 0..=3 {
            for m in 0..=3 {
                let y = 0.05 + 0.9 * ((7 * n + 3 * m) % 11) as f64 / 10.0;
                rect.set(n, m, y, Some(0.02 + 0.01 * (n + m) as f64));
            }
        }
        let mut diag = rect.clone();
        diag.basis = Basis::Diag;
        let obs = ObservedStats::from_tables(&IntensityGrid::default(), &rect, &diag).unwrap();
        let est = estimate(&obs, Basis::Diag, 3, Exec::default()).unwrap();
        for n in 0..=3 {
            for m in 0..=3 {
                let rel = (est.table.yield_at(n, m) / rect.yield_at(n, m) - 1.0).abs();
                assert!(rel < 1e-6, "Y[{n}][{m}] rel err {rel}");
                let rel =
                    (est.table.error_at(n, m).unwrap() / rect.error_at(n, m).unwrap() - 1.0).abs();
                assert!(rel < 1e-6, "e[{n}][{m}] rel err {rel}");
            }
        }
    }

    #[test]
    fn clamping_is_logged_for_inconsistent_data() {
        let grid = IntensityGrid::default();
        let mut obs = ObservedStats::from_tables(
            &grid,
            &YieldErrorTable::zeros(Basis::Rect, 4),
            &YieldErrorTable::zeros(Basis::Diag, 4),
        )
        .unwrap();
        // a single positive gain at the weakest setting forces negative coefficients
        obs.rect.gain[0][0] = 1e-3;
        obs.rect.qber[0][0] = Some(0.0);
        let est = estimate_yields(&obs, Basis::Rect, 4, Exec::default()).unwrap();
        assert!(!est.clamps.is_empty());
        assert!(est.table.yields.iter().all(|&y| (0.0..=1.0).contains(&y)));
    }

    #[test]
    fn invalid_observations_rejected() {
        let grid = IntensityGrid::default();
        let mut obs = ObservedStats::from_tables(
            &grid,
            &YieldErrorTable::zeros(Basis::Rect, 2),
            &YieldErrorTable::zeros(Basis::Diag, 2),
        )
        .unwrap();
        obs.rect.gain[1][1] = 0.2;
        assert!(estimate_yields(&obs, Basis::Rect, 4, Exec::default()).is_err());
        obs.rect.qber[1][1] = Some(0.1);
        obs.diag.gain.pop();
        assert!(matches!(obs.validate(), Err(Error::Shape(_))));
    }

    #[test]
    fn undersized_grid_rejected_with_context() {
        let grid = IntensityGrid::symmetric(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let obs = ObservedStats::from_tables(
            &grid,
            &YieldErrorTable::zeros(Basis::Rect, 2),
            &YieldErrorTable::zeros(Basis::Diag, 2),
        )
        .unwrap();
        let r = estimate_yields(&obs, Basis::Rect, 4, Exec::default());
        assert!(matches!(
            r,
            Err(Error::InsufficientIntensities {
                required: 5,
                given: 4
            })
        ));
    }

    #[test]
    fn q11_formula() {
        assert_eq!(q11(0.0, 0.4, 0.5), 0.0);
        assert!((q11(1.0, 1.0, 1.0) - (-2.0f64).exp()).abs() < 1e-16);
        assert!((q11(0.1, 0.1, 0.5) - 0.01 * (-0.2f64).exp() / 2.0).abs() < 1e-18);
    }

    #[test]
    fn observed_stats_json_shape() {
        let grid = IntensityGrid::symmetric(vec![0.1, 0.2]).unwrap();
        let obs = ObservedStats::from_tables(
            &grid,
            &YieldErrorTable::zeros(Basis::Rect, 1),
            &YieldErrorTable::zeros(Basis::Diag, 1),
        )
        .unwrap();
        let json = serde_json::to_value(&obs).unwrap();
        assert_eq!(json["grid"]["alice"][1], 0.2);
        assert!(json["rect"]["qber"][0][0].is_null());
        let back: ObservedStats = serde_json::from_value(json).unwrap();
        assert_eq!(back, obs);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip_identity(
            seed_y in proptest::collection::vec(0.0f64..1.0, 25),
            seed_e in proptest::collection::vec(0.0f64..0.5, 25),
            n_max in 1usize..=4,
        ) {
            let mut rect = YieldErrorTable::zeros(Basis::Rect, n_max);
            for n in 0..=n_max {
                for m in 0..=n_max {
                    let k = n * 5 + m;
                    // keep entries away from zero so relative error is meaningful
                    rect.set(n, m, 0.05 + 0.95 * seed_y[k], Some(0.01 + seed_e[k]));
                }
            }
            let mut diag = rect.clone();
            diag.basis = Basis::Diag;
            // a wide grid; on the default one the tiny P(4; μ ≤ 0.5) weights leave the
            // top-order entries with a few 1e-6 of f64 round-off
            let grid = IntensityGrid::symmetric(vec![0.1, 0.5, 1.0, 1.5, 2.0, 3.0]).unwrap();
            let obs = ObservedStats::from_tables(&grid, &rect, &diag).unwrap();
            let est = estimate(&obs, Basis::Rect, n_max, Exec::Sequential).unwrap();
            prop_assert!(est.clamps.is_empty());
            for n in 0..=n_max {
                for m in 0..=n_max {
                    let (yt, ye) = (rect.yield_at(n, m), est.table.yield_at(n, m));
                    prop_assert!(((ye - yt) / yt).abs() < 1e-6, "Y[{}][{}] {} vs {}", n, m, ye, yt);
                    let (et, ee) = (rect.error_at(n, m).unwrap(), est.table.error_at(n, m).unwrap());
                    prop_assert!(((ee - et) / et).abs() < 1e-6, "e[{}][{}] {} vs {}", n, m, ee, et);
                }
            }
        }
    }
}
