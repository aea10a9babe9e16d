//! Poisson photon-number statistics of phase-randomized coherent pulses.

/// `P(n; μ) = e^{-μ} μ^n / n!`, evaluated by recurrence to stay exact for
/// small `μ` (including `μ = 0`).
pub fn weight(mu: f64, n: usize) -> f64 {
    let mut p = (-mu).exp();
    for k in 1..=n {
        p *= mu / k as f64;
    }
    p
}

/// Weights for `n = 0..=n_max`.
pub fn weights(mu: f64, n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut p = (-mu).exp();
    out.push(p);
    for k in 1..=n_max {
        p *= mu / k as f64;
        out.push(p);
    }
    out
}

/// Probability mass above `n_max`, computed as a forward sum of the tail
/// terms so it stays accurate when it is far below machine epsilon.
pub fn tail_mass(mu: f64, n_max: usize) -> f64 {
    let mut p = weight(mu, n_max);
    let mut tail = 0.0;
    let mut k = n_max + 1;
    loop {
        p *= mu / k as f64;
        tail += p;
        if p <= tail * 1e-18 || p == 0.0 {
            break;
        }
        k += 1;
    }
    tail
}

/// Binomial survival weight `C(n, k) t^k (1-t)^(n-k)`.
pub fn binomial(n: usize, k: usize, t: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c * t.powi(k as i32) * (1.0 - t).powi((n - k) as i32)
}
