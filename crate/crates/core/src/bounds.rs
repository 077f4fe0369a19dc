//! Deviation-threshold formulas, the derived-constants table, and the exact
//! coin-testing Bayes-error oracle.
//!
//! The `log` convention throughout is `log(x) = ln(max{x, e})`, together with
//! `x·log(1/x) = 0` and `(c/x)^x = 1` at `x = 0`. Call sites that print a
//! literal `ln` keep the plain natural logarithm.

use serde::{Deserialize, Serialize};

/// `log(x) = ln(max{x, e})`, so `log(x) >= 1` always.
pub fn paper_log(x: f64) -> f64 {
    x.max(std::f64::consts::E).ln()
}

/// `x * log(1/x)` with the convention that the value is 0 at `x = 0`.
pub fn xlog_recip(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * paper_log(1.0 / x)
    }
}

/// `(c/x)^x` with the convention that the value is 1 at `x = 0`.
pub fn pow_ratio(c: f64, x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (c / x).powf(x)
    }
}

/// `eps^2(n, delta) = (1/n)·(VC·log(n/VC) + log(1/delta))`.
///
/// The `VC = 0` case uses the `x·log` convention, leaving `log(1/delta)/n`.
pub fn epsilon_sq(n: u64, delta: f64, vc: u64) -> f64 {
    assert!(n >= 1, "epsilon_sq requires n >= 1");
    assert!(delta > 0.0 && delta < 1.0, "epsilon_sq requires 0 < delta < 1");
    let nf = n as f64;
    let vc_term = if vc == 0 {
        0.0
    } else {
        vc as f64 * paper_log(nf / vc as f64)
    };
    (vc_term + paper_log(1.0 / delta)) / nf
}

/// `eps_n = sqrt(VC/n · log(n/VC))`, 0 when `VC = 0`.
pub fn epsilon_n(n: u64, vc: u64) -> f64 {
    assert!(n >= 1, "epsilon_n requires n >= 1");
    if vc == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let vcf = vc as f64;
    (vcf / nf * paper_log(nf / vcf)).sqrt()
}

/// The four printed deviation thresholds. `n` is real-valued so the clamp
/// boundaries can be probed directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdKind {
    /// `2·sqrt(3(psi(n) + b' + ln n)/n)` (batch-size comparison, exponential learner).
    ExpGoodI { b_prime: u64 },
    /// `sqrt(6·psi(n)/n)` (final selection, exponential learner).
    ExpFinal,
    /// `8·sqrt(b'·log(n)/n)` (batch-size comparison, super-root learner).
    VclGoodI { b_prime: u64 },
    /// `sqrt(32·ln(n)/n)` (final selection, super-root learner).
    VclFinal,
}

pub fn deviation_threshold(kind: ThresholdKind, n: f64, psi_n: u64) -> f64 {
    assert!(n >= 1.0, "deviation_threshold requires n >= 1");
    match kind {
        ThresholdKind::ExpGoodI { b_prime } => {
            2.0 * (3.0 * (psi_n as f64 + b_prime as f64 + n.ln()) / n).sqrt()
        }
        ThresholdKind::ExpFinal => (6.0 * psi_n as f64 / n).sqrt(),
        ThresholdKind::VclGoodI { b_prime } => 8.0 * (b_prime as f64 * paper_log(n) / n).sqrt(),
        ThresholdKind::VclFinal => (32.0 * n.ln() / n).sqrt(),
    }
}

/// Exact Bayes error of the optimal n-sample test between Bernoulli(1/2-gamma)
/// and Bernoulli(1/2+gamma) under a uniform prior.
///
/// The optimal rule is the majority count with ties weighted 1/2. Error is
/// computed by exact binomial summation.
pub fn coin_test_bayes_error(gamma: f64, n: u64) -> f64 {
    assert!(gamma > 0.0 && gamma < 0.5, "gamma must lie in (0, 1/2)");
    if n == 0 {
        return 0.5;
    }
    let p0 = 0.5 - gamma;
    // By symmetry of the two hypotheses the Bayes error equals the error under
    // H0 alone: P0(heads > n/2) + (1/2)·P0(heads = n/2).
    let pmf = binomial_pmf(n, p0);
    let mut err = 0.0;
    let mut comp = 0.0; // Neumaier compensation
    for (k, &m) in pmf.iter().enumerate() {
        let contrib = if 2 * (k as u64) > n {
            m
        } else if 2 * (k as u64) == n {
            0.5 * m
        } else {
            0.0
        };
        let t = err + contrib;
        comp += if err.abs() >= contrib.abs() {
            (err - t) + contrib
        } else {
            (contrib - t) + err
        };
        err = t;
    }
    err + comp
}

/// Binomial(n, p) probability mass function, computed by the stable
/// row-recurrence from the mode outward.
fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    let n_us = n as usize;
    let q = 1.0 - p;
    let mut pmf = vec![0.0f64; n_us + 1];
    // log-space seed at the mode avoids under/overflow for larger n
    let mode = ((n as f64 + 1.0) * p).floor().min(n as f64) as usize;
    pmf[mode] = (ln_choose(n, mode as u64) + mode as f64 * p.ln() + (n_us - mode) as f64 * q.ln()).exp();
    for k in (0..mode).rev() {
        // pmf[k] = pmf[k+1] * (k+1)/(n-k) * q/p
        pmf[k] = pmf[k + 1] * ((k + 1) as f64) / ((n_us - k) as f64) * q / p;
    }
    for k in mode + 1..=n_us {
        pmf[k] = pmf[k - 1] * ((n_us - k + 1) as f64) / (k as f64) * p / q;
    }
    pmf
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// The derived constants printed alongside the transductive analysis, all
/// recomputed from the single configurable `c0 >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsTable {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
}

impl ConstantsTable {
    pub fn new(c0: f64) -> Self {
        assert!(c0 > 0.0, "c0 must be positive");
        let c1 = 2.0 * (2.0 * c0).sqrt();
        let c2 = 24.0;
        let c7 = (2.0 * std::f64::consts::E).sqrt() * (5.0 + 12f64.sqrt());
        let c3 = 4.0 * c1 + 8.0 * c2;
        let c4 = 8f64.sqrt() * (c3 + c7) + 4.0 * c2;
        let c5 = 4.0 * c0 + 4.0 * c4 + 12.0 * c2 + 2.0 * (8.0 * c2 * c0).sqrt();
        let c6 = 18f64.sqrt() * (2.0 + (-1f64).exp()) * c5 + 32f64.sqrt();
        ConstantsTable { c0, c1, c2, c3, c4, c5, c6, c7 }
    }
}

impl Default for ConstantsTable {
    fn default() -> Self {
        ConstantsTable::new(1.0)
    }
}
