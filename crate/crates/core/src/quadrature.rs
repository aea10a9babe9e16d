//! Gauss-Legendre quadrature and uniform phase averaging.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Number of nodes used for phase averaging unless a caller asks otherwise.
pub const DEFAULT_PHASE_NODES: usize = 64;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes an `n`-point rule by Newton iteration on `P_n`, seeded with
    /// the usual Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Averages a function of a relative optical phase over `[0, 2π)`.
///
/// The nodes can be rotated by a constant `offset`; for smooth periodic
/// integrands the average must not depend on it.
#[derive(Debug, Clone)]
pub struct PhaseAverager {
    rule: GaussLegendre,
    offset: f64,
}

impl PhaseAverager {
    pub fn new(nodes: usize) -> Self {
        Self {
            rule: GaussLegendre::new(nodes),
            offset: 0.0,
        }
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn nodes(&self) -> usize {
        self.rule.len()
    }

    /// Shared 64-node averager.
    pub fn standard() -> &'static PhaseAverager {
        static STANDARD: OnceLock<PhaseAverager> = OnceLock::new();
        STANDARD.get_or_init(|| PhaseAverager::new(DEFAULT_PHASE_NODES))
    }

    /// Mean of `f(φ)` for φ uniform on `[0, 2π)`.
    pub fn average<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.rule
            .integrate(0.0, 2.0 * PI, |phi| f(phi + self.offset))
            / (2.0 * PI)
    }

    /// Component-wise mean of a fixed-size vector-valued function.
    pub fn average_n<const N: usize, F: FnMut(f64) -> [f64; N]>(&self, mut f: F) -> [f64; N] {
        let mut acc = [0.0; N];
        for (&x, &w) in self.rule.nodes().iter().zip(self.rule.weights()) {
            let phi = PI * (x + 1.0) + self.offset;
            let v = f(phi);
            for (a, vi) in acc.iter_mut().zip(v) {
                *a += 0.5 * w * vi;
            }
        }
        acc
    }
}
