//! The degree-p factorial feature map, its per-coordinate factor vectors,
//! and the Bessel norm constant K^N.
//!
//! The full feature tensor Φ(ξ) = v(ξ₁) ⊗ ··· ⊗ v(ξ_N) is never materialized
//! on production paths; everything works through the per-coordinate factors.

use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::tensor::MultiIndex;

/// Slack admitted when checking a point against the patch boundary.
pub const PATCH_SLACK: f64 = 1e-12;

/// K = sqrt(I₀(2)) where I₀ is the modified Bessel function of the first
/// kind: I₀(2) = Σ_k 1/(k!)². Computed from the series at first use; the
/// literature value 1.50983 appears only in tests as a reference.
pub fn bessel_constant() -> f64 {
    static K: OnceLock<f64> = OnceLock::new();
    *K.get_or_init(|| {
        let mut sum = 0.0f64;
        let mut factorial = 1.0f64;
        let mut k = 0u64;
        loop {
            let term = 1.0 / (factorial * factorial);
            sum += term;
            if term < 1e-18 {
                break;
            }
            k += 1;
            factorial *= k as f64;
        }
        sum.sqrt()
    })
}

/// K^N by repeated multiplication.
pub fn feature_norm_bound(n: usize) -> f64 {
    let k = bessel_constant();
    let mut out = 1.0;
    for _ in 0..n {
        out *= k;
    }
    out
}

/// Factor vector v(ξ) with entries ξ^k / k! for one normalized coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorVector {
    entries: Vec<f64>,
}

impl FactorVector {
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// v(ξ)_k = ξ^k / k! for k = 0..=p. Requires |ξ| ≤ 1 (within slack).
pub fn factor_vector(xi: f64, p: usize) -> Result<FactorVector> {
    if xi.abs() > 1.0 + PATCH_SLACK {
        return Err(Error::Domain(format!(
            "factor vector coordinate {xi} outside [-1, 1]"
        )));
    }
    Ok(FactorVector {
        entries: factor_entries(xi, p),
    })
}

fn factor_entries(xi: f64, p: usize) -> Vec<f64> {
    let mut entries = Vec::with_capacity(p + 1);
    entries.push(1.0);
    for k in 1..=p {
        let prev = entries[k - 1];
        entries.push(prev * xi / k as f64);
    }
    entries
}

/// Φ(ξ)[α] = Π ξᵢ^{αᵢ} / αᵢ!, one entry of the feature tensor.
pub fn phi_entry(xi: &[f64], alpha: &MultiIndex) -> f64 {
    debug_assert_eq!(xi.len(), alpha.len());
    let mut out = 1.0;
    for (x, &a) in xi.iter().zip(alpha.as_slice()) {
        let mut term = 1.0;
        for k in 1..=a {
            term = term * x / k as f64;
        }
        out *= term;
    }
    out
}

/// A local patch: the ℓ∞-ball B(x0, r) with expansion degree p and rank cap χ.
/// Normalization maps the patch onto [−1, 1]^N componentwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub x0: Vec<f64>,
    pub r: f64,
    pub p: usize,
    pub chi: usize,
}

impl PatchSpec {
    pub fn new(x0: Vec<f64>, r: f64, p: usize, chi: usize) -> Result<Self> {
        if x0.is_empty() {
            return Err(Error::InvalidParameter("patch center must be non-empty".into()));
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidParameter(format!("patch radius {r} must be positive")));
        }
        if chi < 1 {
            return Err(Error::InvalidParameter("rank cap chi must be >= 1".into()));
        }
        Ok(PatchSpec { x0, r, p, chi })
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    /// ξ = (x − x0)/r componentwise; errors if x leaves the patch (beyond a
    /// 1e-12 relative slack), carrying the offending coordinate. Coordinates
    /// inside the slack band are clamped onto [−1, 1].
    pub fn normalize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "point has {} coordinates, patch has {}",
                x.len(),
                self.dim()
            )));
        }
        let mut xi = Vec::with_capacity(x.len());
        for (i, (&v, &c)) in x.iter().zip(&self.x0).enumerate() {
            let t = (v - c) / self.r;
            if t.abs() > 1.0 + PATCH_SLACK {
                return Err(Error::OutOfPatch {
                    coordinate: i,
                    value: v,
                    center: c,
                    radius: self.r,
                });
            }
            xi.push(t.clamp(-1.0, 1.0));
        }
        Ok(xi)
    }

    /// Unchecked normalization, for paths that flag out-of-patch points
    /// instead of failing.
    pub fn normalize_unchecked(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.x0)
            .map(|(&v, &c)| (v - c) / self.r)
            .collect()
    }

    pub fn denormalize(&self, xi: &[f64]) -> Vec<f64> {
        xi.iter()
            .zip(&self.x0)
            .map(|(&t, &c)| c + self.r * t)
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.x0)
                .all(|(&v, &c)| ((v - c) / self.r).abs() <= 1.0 + PATCH_SLACK)
    }
}
