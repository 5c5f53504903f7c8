//! The seven analytic test-function families with exact derivative oracles
//! at x0 = 0, general-point derivative formulas, and per-patch sup bounds on
//! derivative magnitudes.
//!
//! Families: ExpSum exp(Σ cᵢxᵢ), ProductCos Π cos(cᵢxᵢ), matched- and
//! higher-degree random polynomials, coupled quadratic forms, trigonometric
//! sums with integer frequencies, and correlated Gaussians with SPD
//! precision. Gaussian derivatives at 0 use the Wick/Isserlis pairing
//! recursion; away from 0 they use a polynomial-factor recursion.

use std::collections::{BTreeMap, HashMap};

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::derivatives::{Provenance, SmoothnessBudget};
use crate::error::{Error, Result};
use crate::features::PatchSpec;
use crate::tensor::{simplex_indices, DenseTensor, MultiIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyKind {
    ExpSum,
    ProductCos,
    PolyMatched,
    PolyHigher,
    QuadraticForm,
    Trig,
    Gauss,
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::ExpSum => "expsum",
            FamilyKind::ProductCos => "productcos",
            FamilyKind::PolyMatched => "poly-matched",
            FamilyKind::PolyHigher => "poly-higher",
            FamilyKind::QuadraticForm => "quadratic-form",
            FamilyKind::Trig => "trig",
            FamilyKind::Gauss => "gauss",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "expsum" => Ok(FamilyKind::ExpSum),
            "productcos" => Ok(FamilyKind::ProductCos),
            "poly-matched" => Ok(FamilyKind::PolyMatched),
            "poly-higher" => Ok(FamilyKind::PolyHigher),
            "quadratic-form" => Ok(FamilyKind::QuadraticForm),
            "trig" => Ok(FamilyKind::Trig),
            "gauss" => Ok(FamilyKind::Gauss),
            other => Err(Error::InvalidParameter(format!("unknown family '{other}'"))),
        }
    }

    pub fn all() -> [FamilyKind; 7] {
        [
            FamilyKind::ExpSum,
            FamilyKind::ProductCos,
            FamilyKind::PolyMatched,
            FamilyKind::PolyHigher,
            FamilyKind::QuadraticForm,
            FamilyKind::Trig,
            FamilyKind::Gauss,
        ]
    }
}

/// Trig family size and frequency budget: K = 8 terms with ‖m_k‖₁ ≤ 3.
const TRIG_TERMS: usize = 8;
const TRIG_FREQ_BUDGET: usize = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum FamilyParams {
    /// Coefficient vector c for ExpSum / ProductCos.
    Coefficients { c: Vec<f64> },
    /// Monomial terms (β, c_β), sorted by multi-index.
    Polynomial { terms: Vec<(MultiIndex, f64)> },
    /// f(x) = xᵀAx + bᵀx + c with dense A (row-major N×N).
    Quadratic { a: Vec<f64>, b: Vec<f64>, c: f64 },
    /// f(x) = Σ_k w_k Π cos(m_{k,i} xᵢ).
    Trig {
        weights: Vec<f64>,
        freqs: Vec<MultiIndex>,
    },
    /// f(x) = exp(−½ xᵀQx) with SPD precision Q (row-major N×N).
    Gauss { q: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyInstance {
    pub kind: FamilyKind,
    pub dim: usize,
    pub seed: u64,
    pub params: FamilyParams,
}

impl FamilyInstance {
    /// Deterministic all-ones instance (separable families only).
    pub fn all_ones(kind: FamilyKind, n: usize) -> Result<Self> {
        match kind {
            FamilyKind::ExpSum | FamilyKind::ProductCos => Ok(FamilyInstance {
                kind,
                dim: n,
                seed: 0,
                params: FamilyParams::Coefficients { c: vec![1.0; n] },
            }),
            other => Err(Error::InvalidParameter(format!(
                "no deterministic all-ones instance for family '{}'",
                other.name()
            ))),
        }
    }

    /// Random instance drawn from the named substream `seed`. The expansion
    /// degree `p` fixes the polynomial degree classes (deg = p and deg = p+2)
    /// and the box support.
    pub fn sample(kind: FamilyKind, n: usize, p: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let params = match kind {
            FamilyKind::ExpSum | FamilyKind::ProductCos => FamilyParams::Coefficients {
                c: (0..n).map(|_| rng.sample(StandardNormal)).collect(),
            },
            FamilyKind::PolyMatched => sample_polynomial(&mut rng, n, p, p),
            FamilyKind::PolyHigher => sample_polynomial(&mut rng, n, p, p + 2),
            FamilyKind::QuadraticForm => FamilyParams::Quadratic {
                a: (0..n * n).map(|_| rng.sample(StandardNormal)).collect(),
                b: (0..n).map(|_| rng.sample(StandardNormal)).collect(),
                c: rng.sample(StandardNormal),
            },
            FamilyKind::Trig => {
                // frequencies uniform on the integer simplex 0 < |m|_1 <= 3
                let pool: Vec<MultiIndex> = simplex_indices(n, TRIG_FREQ_BUDGET)
                    .into_iter()
                    .filter(|m| m.degree() > 0)
                    .collect();
                let freqs: Vec<MultiIndex> = (0..TRIG_TERMS)
                    .map(|_| pool[rng.random_range(0..pool.len())].clone())
                    .collect();
                let weights = (0..TRIG_TERMS).map(|_| rng.sample(StandardNormal)).collect();
                FamilyParams::Trig { weights, freqs }
            }
            FamilyKind::Gauss => {
                // Q = M^T M + 0.5 I guarantees SPD
                let m: Vec<f64> = (0..n * n).map(|_| rng.sample(StandardNormal)).collect();
                let mut q = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        let mut s = 0.0;
                        for k in 0..n {
                            s += m[k * n + i] * m[k * n + j];
                        }
                        q[i * n + j] = s + if i == j { 0.5 } else { 0.0 };
                    }
                }
                FamilyParams::Gauss { q }
            }
        };
        Ok(FamilyInstance {
            kind,
            dim: n,
            seed,
            params,
        })
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.params {
            FamilyParams::Coefficients { c } => match self.kind {
                FamilyKind::ExpSum => {
                    let s: f64 = c.iter().zip(x).map(|(ci, xi)| ci * xi).sum();
                    s.exp()
                }
                FamilyKind::ProductCos => {
                    c.iter().zip(x).map(|(ci, xi)| (ci * xi).cos()).product()
                }
                _ => unreachable!(),
            },
            FamilyParams::Polynomial { terms } => terms
                .iter()
                .map(|(beta, coef)| {
                    coef * beta
                        .as_slice()
                        .iter()
                        .zip(x)
                        .map(|(&b, xi)| xi.powi(b as i32))
                        .product::<f64>()
                })
                .sum(),
            FamilyParams::Quadratic { a, b, c } => {
                let n = self.dim;
                let mut out = *c;
                for i in 0..n {
                    out += b[i] * x[i];
                    for j in 0..n {
                        out += a[i * n + j] * x[i] * x[j];
                    }
                }
                out
            }
            FamilyParams::Trig { weights, freqs } => weights
                .iter()
                .zip(freqs)
                .map(|(w, m)| {
                    w * m
                        .as_slice()
                        .iter()
                        .zip(x)
                        .map(|(&mi, xi)| (mi as f64 * xi).cos())
                        .product::<f64>()
                })
                .sum(),
            FamilyParams::Gauss { q } => {
                let n = self.dim;
                let mut quad = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        quad += x[i] * q[i * n + j] * x[j];
                    }
                }
                (-0.5 * quad).exp()
            }
        }
    }

    /// Exact ∂^α f(0) via the per-family closed forms.
    pub fn exact_derivative(&self, alpha: &MultiIndex) -> f64 {
        let mut gauss_memo = HashMap::new();
        self.exact_derivative_memo(alpha, &mut gauss_memo)
    }

    fn exact_derivative_memo(
        &self,
        alpha: &MultiIndex,
        gauss_memo: &mut HashMap<MultiIndex, f64>,
    ) -> f64 {
        debug_assert_eq!(alpha.len(), self.dim);
        match &self.params {
            FamilyParams::Coefficients { c } => match self.kind {
                FamilyKind::ExpSum => c
                    .iter()
                    .zip(alpha.as_slice())
                    .map(|(&ci, &ai)| ci.powi(ai as i32))
                    .product(),
                FamilyKind::ProductCos => c
                    .iter()
                    .zip(alpha.as_slice())
                    .map(|(&ci, &ai)| cos_derivative_at_zero(ai, ci))
                    .product(),
                _ => unreachable!(),
            },
            FamilyParams::Polynomial { terms } => terms
                .iter()
                .find(|(beta, _)| beta == alpha)
                .map(|(beta, coef)| coef * beta.factorial().expect("small factorial") as f64)
                .unwrap_or(0.0),
            FamilyParams::Quadratic { a, b, c } => {
                let n = self.dim;
                match alpha.degree() {
                    0 => *c,
                    1 => {
                        let i = alpha.as_slice().iter().position(|&v| v == 1).unwrap();
                        b[i]
                    }
                    2 => {
                        let nz: Vec<usize> = (0..n).filter(|&i| alpha.as_slice()[i] > 0).collect();
                        let (i, j) = if nz.len() == 1 {
                            (nz[0], nz[0])
                        } else {
                            (nz[0], nz[1])
                        };
                        a[i * n + j] + a[j * n + i]
                    }
                    _ => 0.0,
                }
            }
            FamilyParams::Trig { weights, freqs } => weights
                .iter()
                .zip(freqs)
                .map(|(w, m)| {
                    w * m
                        .as_slice()
                        .iter()
                        .zip(alpha.as_slice())
                        .map(|(&mi, &ai)| cos_derivative_at_zero(ai, mi as f64))
                        .product::<f64>()
                })
                .sum(),
            FamilyParams::Gauss { q } => self.gauss_pairing(alpha, q, gauss_memo),
        }
    }

    /// Wick/Isserlis pairing recursion for ∂^α exp(−½xᵀQx) at 0:
    /// D(0) = 1; D(α) = 0 for odd |α|; otherwise with i the smallest
    /// coordinate with αᵢ > 0,
    ///   D(α) = −Σ_j (α−eᵢ)_j · Q_{ij} · D(α−eᵢ−e_j).
    fn gauss_pairing(
        &self,
        alpha: &MultiIndex,
        q: &[f64],
        memo: &mut HashMap<MultiIndex, f64>,
    ) -> f64 {
        let deg = alpha.degree();
        if deg == 0 {
            return 1.0;
        }
        if deg % 2 == 1 {
            return 0.0;
        }
        if let Some(&v) = memo.get(alpha) {
            return v;
        }
        let n = self.dim;
        let i = alpha.as_slice().iter().position(|&v| v > 0).unwrap();
        let mut reduced = alpha.clone();
        reduced.0[i] -= 1;
        let mut sum = 0.0;
        for j in 0..n {
            if reduced.0[j] == 0 {
                continue;
            }
            let weight = reduced.0[j] as f64;
            let mut next = reduced.clone();
            next.0[j] -= 1;
            sum += weight * q[i * n + j] * self.gauss_pairing(&next, q, memo);
        }
        let value = -sum;
        memo.insert(alpha.clone(), value);
        value
    }

    /// ∂^α f at an arbitrary point, by closed form. Used for grid-based
    /// budget estimation and as an independent cross-check of
    /// `exact_derivative` (the two agree at x = 0).
    pub fn derivative_at(&self, alpha: &MultiIndex, x: &[f64]) -> f64 {
        debug_assert_eq!(alpha.len(), self.dim);
        debug_assert_eq!(x.len(), self.dim);
        match &self.params {
            FamilyParams::Coefficients { c } => match self.kind {
                FamilyKind::ExpSum => {
                    let coeff: f64 = c
                        .iter()
                        .zip(alpha.as_slice())
                        .map(|(&ci, &ai)| ci.powi(ai as i32))
                        .product();
                    let s: f64 = c.iter().zip(x).map(|(ci, xi)| ci * xi).sum();
                    coeff * s.exp()
                }
                FamilyKind::ProductCos => c
                    .iter()
                    .zip(alpha.as_slice().iter().zip(x))
                    .map(|(&ci, (&ai, &xi))| {
                        ci.powi(ai as i32)
                            * (ci * xi + ai as f64 * std::f64::consts::FRAC_PI_2).cos()
                    })
                    .product(),
                _ => unreachable!(),
            },
            FamilyParams::Polynomial { terms } => terms
                .iter()
                .filter(|(beta, _)| {
                    beta.as_slice()
                        .iter()
                        .zip(alpha.as_slice())
                        .all(|(&b, &a)| b >= a)
                })
                .map(|(beta, coef)| {
                    let mut term = *coef;
                    for ((&b, &a), &xi) in beta
                        .as_slice()
                        .iter()
                        .zip(alpha.as_slice())
                        .zip(x.iter())
                    {
                        // falling factorial b!/(b-a)! then x^(b-a)
                        for k in (b - a + 1)..=b {
                            term *= k as f64;
                        }
                        term *= xi.powi((b - a) as i32);
                    }
                    term
                })
                .sum(),
            FamilyParams::Quadratic { a, b, .. } => {
                let n = self.dim;
                match alpha.degree() {
                    0 => self.evaluate(x),
                    1 => {
                        let i = alpha.as_slice().iter().position(|&v| v == 1).unwrap();
                        let mut out = b[i];
                        for j in 0..n {
                            out += (a[i * n + j] + a[j * n + i]) * x[j];
                        }
                        out
                    }
                    2 => {
                        let nz: Vec<usize> = (0..n).filter(|&i| alpha.as_slice()[i] > 0).collect();
                        let (i, j) = if nz.len() == 1 {
                            (nz[0], nz[0])
                        } else {
                            (nz[0], nz[1])
                        };
                        a[i * n + j] + a[j * n + i]
                    }
                    _ => 0.0,
                }
            }
            FamilyParams::Trig { weights, freqs } => weights
                .iter()
                .zip(freqs)
                .map(|(w, m)| {
                    w * m
                        .as_slice()
                        .iter()
                        .zip(alpha.as_slice().iter().zip(x))
                        .map(|(&mi, (&ai, &xi))| {
                            (mi as f64).powi(ai as i32)
                                * (mi as f64 * xi + ai as f64 * std::f64::consts::FRAC_PI_2).cos()
                        })
                        .product::<f64>()
                })
                .sum(),
            FamilyParams::Gauss { q } => {
                let mut memo = HashMap::new();
                let h = gauss_factor_poly(alpha, q, self.dim, &mut memo);
                h.eval(x) * self.evaluate(x)
            }
        }
    }

    /// The true box tensor A_box[α] = ∂^α f(0) on the full grid {0..p}^N.
    pub fn box_tensor(&self, p: usize) -> Result<DenseTensor> {
        let n = self.dim;
        let mut t = DenseTensor::zeros(vec![p + 1; n])?;
        let mut gauss_memo = HashMap::new();
        let mut idx = vec![0usize; n];
        loop {
            let alpha = MultiIndex(idx.clone());
            let v = self.exact_derivative_memo(&alpha, &mut gauss_memo);
            t.set(&idx, v);
            // odometer increment, last index fastest
            let mut k = n;
            loop {
                if k == 0 {
                    return Ok(t);
                }
                k -= 1;
                if idx[k] < p {
                    idx[k] += 1;
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    /// The simplex-embedded tensor: the box tensor with every entry of total
    /// degree > p zeroed out.
    pub fn simplex_tensor(&self, p: usize) -> Result<DenseTensor> {
        let mut t = self.box_tensor(p)?;
        let n = self.dim;
        let mut idx = vec![0usize; n];
        loop {
            if idx.iter().sum::<usize>() > p {
                t.set(&idx, 0.0);
            }
            let mut k = n;
            loop {
                if k == 0 {
                    return Ok(t);
                }
                k -= 1;
                if idx[k] < p {
                    idx[k] += 1;
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    /// Valid upper bounds on sup-patch derivative magnitudes: C_{≤p} bounds
    /// max_{|α|≤p} sup |∂^α f| and C_{p+1} bounds max_{|α|=p+1} sup |∂^α f|.
    /// These are exact in the sense required by the truncation theorem
    /// (never below the true sup), so certificates built on them are sound.
    pub fn sup_budget(&self, patch: &PatchSpec) -> Result<SmoothnessBudget> {
        if patch.dim() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "patch dim {} vs family dim {}",
                patch.dim(),
                self.dim
            )));
        }
        let p = patch.p;
        let reach: Vec<f64> = patch.x0.iter().map(|&c| c.abs() + patch.r).collect();
        let (c_le_p, c_p1) = match &self.params {
            FamilyParams::Coefficients { c } => {
                let cmax = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let band = |m: usize| cmax.powi(m as i32);
                let low = if cmax >= 1.0 { band(p) } else { 1.0 };
                match self.kind {
                    FamilyKind::ExpSum => {
                        let dot: f64 = c.iter().zip(&patch.x0).map(|(ci, xi)| ci * xi).sum();
                        let l1: f64 = c.iter().map(|v| v.abs()).sum();
                        let env = (dot + patch.r * l1).exp();
                        (env * low, env * band(p + 1))
                    }
                    FamilyKind::ProductCos => (low, band(p + 1)),
                    _ => unreachable!(),
                }
            }
            FamilyParams::Polynomial { .. }
            | FamilyParams::Trig { .. }
            | FamilyParams::Gauss { .. } => {
                let mut c_le = 0.0f64;
                let mut c_hi = 0.0f64;
                let mut memo = HashMap::new();
                for alpha in simplex_indices(self.dim, p + 1) {
                    let b = self.derivative_abs_bound(&alpha, &reach, &mut memo);
                    if alpha.degree() <= p {
                        c_le = c_le.max(b);
                    } else {
                        c_hi = c_hi.max(b);
                    }
                }
                (c_le, c_hi)
            }
            FamilyParams::Quadratic { a, b, c } => {
                let n = self.dim;
                let c0 = c.abs()
                    + b.iter().zip(&reach).map(|(bi, ri)| bi.abs() * ri).sum::<f64>()
                    + (0..n)
                        .flat_map(|i| (0..n).map(move |j| (i, j)))
                        .map(|(i, j)| a[i * n + j].abs() * reach[i] * reach[j])
                        .sum::<f64>();
                let c1 = (0..n)
                    .map(|i| {
                        b[i].abs()
                            + (0..n)
                                .map(|j| (a[i * n + j] + a[j * n + i]).abs() * reach[j])
                                .sum::<f64>()
                    })
                    .fold(0.0f64, f64::max);
                let c2 = (0..n)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .map(|(i, j)| (a[i * n + j] + a[j * n + i]).abs())
                    .fold(0.0f64, f64::max);
                let c_le = match p {
                    0 => c0,
                    1 => c0.max(c1),
                    _ => c0.max(c1).max(c2),
                };
                let c_hi = match p {
                    0 => c1,
                    1 => c2,
                    _ => 0.0,
                };
                (c_le, c_hi)
            }
        };
        Ok(SmoothnessBudget::new(c_le_p, c_p1, Provenance::Exact))
    }

    /// Upper bound on sup |∂^α f| over {|xᵢ| ≤ reachᵢ} for the enumerative
    /// families (polynomial, trig, gauss).
    fn derivative_abs_bound(
        &self,
        alpha: &MultiIndex,
        reach: &[f64],
        gauss_memo: &mut HashMap<MultiIndex, SparsePoly>,
    ) -> f64 {
        match &self.params {
            FamilyParams::Polynomial { terms } => terms
                .iter()
                .filter(|(beta, _)| {
                    beta.as_slice()
                        .iter()
                        .zip(alpha.as_slice())
                        .all(|(&b, &a)| b >= a)
                })
                .map(|(beta, coef)| {
                    let mut term = coef.abs();
                    for ((&b, &a), &ri) in
                        beta.as_slice().iter().zip(alpha.as_slice()).zip(reach)
                    {
                        for k in (b - a + 1)..=b {
                            term *= k as f64;
                        }
                        term *= ri.powi((b - a) as i32);
                    }
                    term
                })
                .sum(),
            FamilyParams::Trig { weights, freqs } => weights
                .iter()
                .zip(freqs)
                .map(|(w, m)| {
                    w.abs()
                        * m.as_slice()
                            .iter()
                            .zip(alpha.as_slice())
                            .map(|(&mi, &ai)| (mi as f64).powi(ai as i32))
                            .product::<f64>()
                })
                .sum(),
            FamilyParams::Gauss { q } => {
                // |∂^α f| = |H_α(x)| e^{−½xᵀQx} ≤ Σ |coef| Π reach^pow since
                // the exponential is ≤ 1 for SPD Q
                let h = gauss_factor_poly(alpha, q, self.dim, gauss_memo);
                h.abs_bound(reach)
            }
            _ => unreachable!(),
        }
    }

    /// Upper bound on sup |f| over the patch (the |α| = 0 derivative bound).
    pub fn sup_abs_bound(&self, patch: &PatchSpec) -> f64 {
        let reach: Vec<f64> = patch.x0.iter().map(|&c| c.abs() + patch.r).collect();
        match &self.params {
            FamilyParams::Coefficients { c } => match self.kind {
                FamilyKind::ExpSum => {
                    let dot: f64 = c.iter().zip(&patch.x0).map(|(ci, xi)| ci * xi).sum();
                    let l1: f64 = c.iter().map(|v| v.abs()).sum();
                    (dot + patch.r * l1).exp()
                }
                FamilyKind::ProductCos => 1.0,
                _ => unreachable!(),
            },
            FamilyParams::Polynomial { .. } | FamilyParams::Trig { .. } => {
                let mut memo = HashMap::new();
                self.derivative_abs_bound(&MultiIndex::zeros(self.dim), &reach, &mut memo)
            }
            FamilyParams::Quadratic { a, b, c } => {
                let n = self.dim;
                c.abs()
                    + b.iter().zip(&reach).map(|(bi, ri)| bi.abs() * ri).sum::<f64>()
                    + (0..n)
                        .flat_map(|i| (0..n).map(move |j| (i, j)))
                        .map(|(i, j)| a[i * n + j].abs() * reach[i] * reach[j])
                        .sum::<f64>()
            }
            FamilyParams::Gauss { .. } => 1.0,
        }
    }
}

/// d^a/dx^a cos(cx) at x = 0: zero for odd a, (−1)^{a/2} c^a for even a.
fn cos_derivative_at_zero(a: usize, c: f64) -> f64 {
    if a % 2 == 1 {
        0.0
    } else {
        let sign = if (a / 2) % 2 == 0 { 1.0 } else { -1.0 };
        sign * c.powi(a as i32)
    }
}

fn sample_polynomial(rng: &mut ChaCha12Rng, n: usize, p: usize, deg: usize) -> FamilyParams {
    // dense N(0,1) coefficients on every box index (beta_i <= p) with
    // total degree <= deg; this reproduces the reported rank structure of
    // both polynomial degree classes
    let mut terms = Vec::new();
    for beta in simplex_indices(n, deg) {
        if beta.as_slice().iter().all(|&b| b <= p) {
            terms.push((beta, rng.sample::<f64, _>(StandardNormal)));
        }
    }
    terms.sort_by(|a, b| a.0.cmp(&b.0));
    FamilyParams::Polynomial { terms }
}

/// Sparse multivariate polynomial used for the Gaussian derivative factors
/// H_α in ∂^α exp(−½xᵀQx) = H_α(x) exp(−½xᵀQx), built by the recursion
/// H_{α+eᵢ} = ∂ᵢ H_α − (Qx)ᵢ H_α.
#[derive(Debug, Clone)]
pub(crate) struct SparsePoly {
    terms: BTreeMap<MultiIndex, f64>,
    dim: usize,
}

impl SparsePoly {
    fn one(dim: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(MultiIndex::zeros(dim), 1.0);
        SparsePoly { terms, dim }
    }

    fn differentiate(&self, i: usize) -> Self {
        let mut terms = BTreeMap::new();
        for (beta, coef) in &self.terms {
            if beta.0[i] > 0 {
                let mut next = beta.clone();
                next.0[i] -= 1;
                *terms.entry(next).or_insert(0.0) += coef * beta.0[i] as f64;
            }
        }
        SparsePoly {
            terms,
            dim: self.dim,
        }
    }

    /// self − (Σ_j row_j x_j) · other, accumulated in place of a fresh poly.
    fn sub_linear_mul(&self, row: &[f64], other: &SparsePoly) -> Self {
        let mut terms = self.terms.clone();
        for (beta, coef) in &other.terms {
            for (j, &qj) in row.iter().enumerate() {
                if qj == 0.0 {
                    continue;
                }
                let mut next = beta.clone();
                next.0[j] += 1;
                *terms.entry(next).or_insert(0.0) -= qj * coef;
            }
        }
        SparsePoly {
            terms,
            dim: self.dim,
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(beta, coef)| {
                coef * beta
                    .as_slice()
                    .iter()
                    .zip(x)
                    .map(|(&b, xi)| xi.powi(b as i32))
                    .product::<f64>()
            })
            .sum()
    }

    fn abs_bound(&self, reach: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(beta, coef)| {
                coef.abs()
                    * beta
                        .as_slice()
                        .iter()
                        .zip(reach)
                        .map(|(&b, ri)| ri.powi(b as i32))
                        .product::<f64>()
            })
            .sum()
    }
}

fn gauss_factor_poly(
    alpha: &MultiIndex,
    q: &[f64],
    n: usize,
    memo: &mut HashMap<MultiIndex, SparsePoly>,
) -> SparsePoly {
    if alpha.degree() == 0 {
        return SparsePoly::one(n);
    }
    if let Some(p) = memo.get(alpha) {
        return p.clone();
    }
    let i = alpha.as_slice().iter().position(|&v| v > 0).unwrap();
    let mut prev_idx = alpha.clone();
    prev_idx.0[i] -= 1;
    let prev = gauss_factor_poly(&prev_idx, q, n, memo);
    let row = &q[i * n..(i + 1) * n];
    let out = prev.differentiate(i).sub_linear_mul(row, &prev);
    memo.insert(alpha.clone(), out.clone());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quad_instance() -> FamilyInstance {
        FamilyInstance::sample(FamilyKind::QuadraticForm, 3, 2, 42).unwrap()
    }

    #[test]
    fn evaluate_at_zero_examples() {
        let e = FamilyInstance::all_ones(FamilyKind::ExpSum, 4).unwrap();
        assert_eq!(e.evaluate(&[0.0; 4]), 1.0);
        let c = FamilyInstance::sample(FamilyKind::ProductCos, 4, 3, 1).unwrap();
        assert_eq!(c.evaluate(&[0.0; 4]), 1.0);
        let g = FamilyInstance::sample(FamilyKind::Gauss, 4, 3, 2).unwrap();
        assert_eq!(g.evaluate(&[0.0; 4]), 1.0);
    }

    #[test]
    fn expsum_all_ones_derivatives_are_one() {
        let e = FamilyInstance::all_ones(FamilyKind::ExpSum, 3).unwrap();
        for alpha in simplex_indices(3, 4) {
            assert_eq!(e.exact_derivative(&alpha), 1.0);
        }
    }

    #[test]
    fn gauss_odd_total_order_vanishes() {
        for n in 1..=4 {
            let g = FamilyInstance::sample(FamilyKind::Gauss, n, 3, 7).unwrap();
            for alpha in simplex_indices(n, 5) {
                if alpha.degree() % 2 == 1 {
                    assert_eq!(g.exact_derivative(&alpha), 0.0, "alpha={alpha:?}");
                }
            }
        }
    }

    #[test]
    fn gauss_univariate_second_derivative() {
        // exp(-q x^2 / 2): d2/dx2 at 0 is -q, d4 is 3 q^2 (symbolic oracle)
        let q = 1.7;
        let g = FamilyInstance {
            kind: FamilyKind::Gauss,
            dim: 1,
            seed: 0,
            params: FamilyParams::Gauss { q: vec![q] },
        };
        assert_abs_diff_eq!(g.exact_derivative(&MultiIndex(vec![2])), -q, epsilon = 1e-14);
        assert_abs_diff_eq!(
            g.exact_derivative(&MultiIndex(vec![4])),
            3.0 * q * q,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gauss_mixed_fourth_derivative() {
        // Q = [[a, b], [b, c]]: d^(2,2) f(0) = a c + 2 b^2 (symbolic oracle)
        let (a, b, c) = (1.3, -0.4, 2.1);
        let g = FamilyInstance {
            kind: FamilyKind::Gauss,
            dim: 2,
            seed: 0,
            params: FamilyParams::Gauss {
                q: vec![a, b, b, c],
            },
        };
        assert_abs_diff_eq!(
            g.exact_derivative(&MultiIndex(vec![2, 2])),
            a * c + 2.0 * b * b,
            epsilon = 1e-12
        );
    }

    #[test]
    fn quadratic_derivative_rules() {
        let f = quad_instance();
        if let FamilyParams::Quadratic { a, b, c } = &f.params {
            assert_eq!(f.exact_derivative(&MultiIndex(vec![0, 0, 0])), *c);
            assert_eq!(f.exact_derivative(&MultiIndex(vec![0, 1, 0])), b[1]);
            assert_eq!(
                f.exact_derivative(&MultiIndex(vec![1, 0, 1])),
                a[0 * 3 + 2] + a[2 * 3 + 0]
            );
            assert_eq!(
                f.exact_derivative(&MultiIndex(vec![2, 0, 0])),
                2.0 * a[0]
            );
            assert_eq!(f.exact_derivative(&MultiIndex(vec![2, 1, 0])), 0.0);
        } else {
            panic!("wrong params");
        }
    }

    #[test]
    fn derivative_at_zero_matches_exact_derivative() {
        for kind in FamilyKind::all() {
            let f = FamilyInstance::sample(kind, 3, 2, 13).unwrap();
            let zero = vec![0.0; 3];
            for alpha in simplex_indices(3, 4) {
                let d0 = f.exact_derivative(&alpha);
                let dx = f.derivative_at(&alpha, &zero);
                assert_abs_diff_eq!(d0, dx, epsilon = 1e-10 * (1.0 + d0.abs()));
            }
        }
    }

    /// Central finite differences of `evaluate` cross-check the closed-form
    /// derivative oracles up to third order.
    #[test]
    fn finite_difference_cross_check() {
        let h = 5e-4;
        for kind in FamilyKind::all() {
            for n in 2..=4 {
                let f = FamilyInstance::sample(kind, n, 2, 99).unwrap();
                for alpha in simplex_indices(n, 3) {
                    let exact = f.exact_derivative(&alpha);
                    let fd = central_fd(&f, &alpha, h);
                    let scale = exact.abs().max(1.0);
                    assert!(
                        (exact - fd).abs() <= 1e-5 * scale.max(fd.abs()),
                        "{} alpha={:?} exact={} fd={}",
                        kind.name(),
                        alpha,
                        exact,
                        fd
                    );
                }
            }
        }
    }

    /// Nested central first differences along each coordinate of alpha.
    fn central_fd(f: &FamilyInstance, alpha: &MultiIndex, h: f64) -> f64 {
        let mut coords = Vec::new();
        for (i, &a) in alpha.as_slice().iter().enumerate() {
            for _ in 0..a {
                coords.push(i);
            }
        }
        fd_recurse(f, &coords, &mut vec![0.0; alpha.len()], h)
    }

    fn fd_recurse(f: &FamilyInstance, coords: &[usize], x: &mut Vec<f64>, h: f64) -> f64 {
        if coords.is_empty() {
            return f.evaluate(x);
        }
        let i = coords[0];
        x[i] += h;
        let plus = fd_recurse(f, &coords[1..], x, h);
        x[i] -= 2.0 * h;
        let minus = fd_recurse(f, &coords[1..], x, h);
        x[i] += h;
        (plus - minus) / (2.0 * h)
    }

    #[test]
    fn matched_polynomial_box_equals_simplex() {
        for seed in 0..5 {
            let f = FamilyInstance::sample(FamilyKind::PolyMatched, 3, 2, seed).unwrap();
            let b = f.box_tensor(2).unwrap();
            let s = f.simplex_tensor(2).unwrap();
            assert_eq!(b, s);
        }
    }

    #[test]
    fn quadratic_box_equals_simplex_for_p_ge_2() {
        let f = quad_instance();
        let b = f.box_tensor(2).unwrap();
        let s = f.simplex_tensor(2).unwrap();
        assert_eq!(b, s);
    }

    #[test]
    fn trig_frequency_budget() {
        let f = FamilyInstance::sample(FamilyKind::Trig, 5, 2, 3).unwrap();
        if let FamilyParams::Trig { weights, freqs } = &f.params {
            assert_eq!(weights.len(), 8);
            assert_eq!(freqs.len(), 8);
            for m in freqs {
                let d = m.degree();
                assert!(d >= 1 && d <= 3);
            }
        } else {
            panic!("wrong params");
        }
    }

    #[test]
    fn gauss_precision_is_spd() {
        let f = FamilyInstance::sample(FamilyKind::Gauss, 4, 2, 11).unwrap();
        if let FamilyParams::Gauss { q } = &f.params {
            let m = nalgebra::DMatrix::from_row_slice(4, 4, q);
            assert!((m.clone() - m.transpose()).norm() < 1e-12);
            let chol = m.cholesky();
            assert!(chol.is_some(), "Q must be positive definite");
        } else {
            panic!("wrong params");
        }
    }

    #[test]
    fn sup_budget_dominates_sampled_derivatives() {
        let patch = PatchSpec::new(vec![0.1, -0.2, 0.05], 0.3, 2, 2).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        for kind in FamilyKind::all() {
            let f = FamilyInstance::sample(kind, 3, 2, 5).unwrap();
            let budget = f.sup_budget(&patch).unwrap();
            for _ in 0..200 {
                let x: Vec<f64> = patch
                    .x0
                    .iter()
                    .map(|&c| c + patch.r * (rng.random::<f64>() * 2.0 - 1.0))
                    .collect();
                for alpha in simplex_indices(3, 3) {
                    let d = f.derivative_at(&alpha, &x).abs();
                    if alpha.degree() <= 2 {
                        assert!(
                            d <= budget.c_le_p * (1.0 + 1e-9),
                            "{} C_le_p={} |d|={} alpha={:?}",
                            kind.name(),
                            budget.c_le_p,
                            d,
                            alpha
                        );
                    } else {
                        assert!(
                            d <= budget.c_p1 * (1.0 + 1e-9) + 1e-12,
                            "{} C_p1={} |d|={} alpha={:?}",
                            kind.name(),
                            budget.c_p1,
                            d,
                            alpha
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn instances_serialize_round_trip() {
        for kind in FamilyKind::all() {
            let f = FamilyInstance::sample(kind, 3, 2, 17).unwrap();
            let json = serde_json::to_string(&f).unwrap();
            let back: FamilyInstance = serde_json::from_str(&json).unwrap();
            let x = [0.21, -0.4, 0.09];
            assert_eq!(f.evaluate(&x), back.evaluate(&x));
        }
    }
}
