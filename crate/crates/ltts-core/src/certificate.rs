//! Deterministic error certificates and the statistical-bound calculators:
//! pseudo-dimension, uniform deviation, consolidated risk bound, and sample
//! complexity.

use serde::{Deserialize, Serialize};

use crate::derivatives::Provenance;
use crate::error::{Error, Result};
use crate::features::feature_norm_bound;

/// Deterministic certificate for a Taylor-TT reference predictor:
/// every point of the patch satisfies |g − h| ≤ e_det, provided the
/// smoothness budget behind e_taylor is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Taylor truncation term C_{p+1} r^{p+1} N^{p+1} / (p+1)!.
    pub e_taylor: f64,
    /// ‖A* − A_TT‖_F, the raw compression distance.
    pub e_tt_raw: f64,
    /// Feature norm constant K^N.
    pub k_n: f64,
    /// e_taylor + K^N · e_tt_raw.
    pub e_det: f64,
    /// Norm budget Λ*(r).
    pub lambda: f64,
    /// Squared-loss bound M(r) = (Λ*(r) K^N + Y_max)².
    pub m_bound: f64,
    pub provenance: Provenance,
}

impl Certificate {
    pub fn new(
        e_taylor: f64,
        e_tt_raw: f64,
        n: usize,
        lambda: f64,
        y_max: f64,
        provenance: Provenance,
    ) -> Self {
        let k_n = feature_norm_bound(n);
        Certificate {
            e_taylor,
            e_tt_raw,
            k_n,
            e_det: deterministic_certificate(e_taylor, e_tt_raw, n),
            lambda,
            m_bound: m_bound(lambda, n, y_max),
            provenance,
        }
    }

    pub fn is_estimated(&self) -> bool {
        self.provenance == Provenance::GridEstimated
    }
}

/// e_det = trunc + K^N · tt_err.
pub fn deterministic_certificate(trunc: f64, tt_err: f64, n: usize) -> f64 {
    debug_assert!(trunc >= 0.0 && tt_err >= 0.0);
    trunc + feature_norm_bound(n) * tt_err
}

/// Squared-loss bound M(Λ) = (Λ K^N + Y_max)².
pub fn m_bound(lambda: f64, n: usize, y_max: f64) -> f64 {
    let b = lambda * feature_norm_bound(n) + y_max;
    b * b
}

/// Predictor pseudo-dimension bound 2 N m χ² ln(12 N).
pub fn pdim_hypothesis(n: usize, m: usize, chi: usize) -> f64 {
    assert!(n >= 1 && m >= 1 && chi >= 1);
    2.0 * (n * m * chi * chi) as f64 * (12.0 * n as f64).ln()
}

/// Squared-loss lifting: Pdim of the loss class ≤ 4(2 d_hyp + 1) log₂ 6.
pub fn pdim_loss(d_hyp: f64) -> f64 {
    assert!(d_hyp >= 0.0);
    4.0 * (2.0 * d_hyp + 1.0) * 6.0f64.log2()
}

/// Uniform deviation M √(2d ln(en/d)/n) + M √(ln(1/δ)/(2n)).
/// The log argument is floored at 1 when n < e·d so that tiny-n outputs stay
/// well-defined; the bound's regime of validity is n ≥ d.
pub fn uniform_deviation(m: f64, d: f64, n: u64, delta: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta {delta} must lie in (0, 1)"
        )));
    }
    if !(d > 0.0) {
        return Err(Error::InvalidParameter(format!("pseudo-dimension {d} must be > 0")));
    }
    let nf = n as f64;
    let log_term = (std::f64::consts::E * nf / d).ln().max(1.0);
    let t1 = m * (2.0 * d * log_term / nf).sqrt();
    let t2 = m * ((1.0 / delta).ln() / (2.0 * nf)).sqrt();
    Ok(t1 + t2)
}

/// Consolidated risk bound R(ĥ) ≤ e_det² + 2·uniform_deviation(M, d, n, δ).
pub fn risk_bound(cert: &Certificate, d_loss: f64, n: u64, delta: f64) -> Result<f64> {
    Ok(cert.e_det * cert.e_det + 2.0 * uniform_deviation(cert.m_bound, d_loss, n, delta)?)
}

/// Smallest n with 2·uniform_deviation(M, d, n, δ) ≤ η, by doubling followed
/// by bisection. The deviation is strictly decreasing in n, so the minimal n
/// is well-defined; the corollary's implicit inequality is solved
/// numerically instead of dropping the log factor.
pub fn sample_complexity(m: f64, d: f64, eta: f64, delta: f64) -> Result<u64> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!("eta {eta} must be > 0")));
    }
    let satisfied = |n: u64| -> Result<bool> {
        Ok(2.0 * uniform_deviation(m, d, n, delta)? <= eta)
    };
    if satisfied(1)? {
        return Ok(1);
    }
    let mut hi = 2u64;
    while !satisfied(hi)? {
        hi = hi
            .checked_mul(2)
            .ok_or_else(|| Error::IntegerOverflow("sample complexity doubling".into()))?;
    }
    let mut lo = hi / 2; // violates
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if satisfied(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Bundle of statistical bounds at a given sample size and confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatBounds {
    pub d_hyp: f64,
    pub d_loss: f64,
    pub delta_n: f64,
    pub risk_bound: f64,
    pub n_required: u64,
}

impl StatBounds {
    /// All bounds for a TT class of order n, mode size m, rank cap chi, at
    /// sample size n_samples, confidence delta, and excess-risk target eta.
    pub fn compute(
        cert: &Certificate,
        n: usize,
        m: usize,
        chi: usize,
        n_samples: u64,
        delta: f64,
        eta: f64,
    ) -> Result<Self> {
        let d_hyp = pdim_hypothesis(n, m, chi);
        let d_loss = pdim_loss(d_hyp);
        let delta_n = 2.0 * uniform_deviation(cert.m_bound, d_loss, n_samples, delta)?;
        Ok(StatBounds {
            d_hyp,
            d_loss,
            delta_n,
            risk_bound: cert.e_det * cert.e_det + delta_n,
            n_required: sample_complexity(cert.m_bound, d_loss, eta, delta)?,
        })
    }
}
