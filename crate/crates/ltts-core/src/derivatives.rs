//! Finite-difference extraction of Taylor coefficients from a black box,
//! the zero-padded simplex-to-box embedding, Taylor evaluation, and the
//! truncation / norm-budget calculators.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{phi_entry, PatchSpec};
use crate::tensor::{count_degree_exactly, simplex_indices, DenseTensor, MultiIndex};

/// An evaluation capability x ↦ g(x). Implementations must be callable from
/// multiple threads; a query counter, when wanted, is layered on with
/// [`CountingBox`].
pub trait BlackBox: Sync {
    fn eval(&self, x: &[f64]) -> f64;
    fn dim(&self) -> usize;
    /// Declared bound G_max on |g|, when one is known.
    fn bound(&self) -> Option<f64> {
        None
    }
}

impl BlackBox for crate::families::FamilyInstance {
    fn eval(&self, x: &[f64]) -> f64 {
        self.evaluate(x)
    }
    fn dim(&self) -> usize {
        self.dim
    }
}

/// Closure adapter.
pub struct FnBox<F: Fn(&[f64]) -> f64 + Sync> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnBox<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnBox { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> BlackBox for FnBox<F> {
    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn dim(&self) -> usize {
        self.dim
    }
}

/// Wraps a black box with an atomic query counter.
pub struct CountingBox<'a, B: BlackBox + ?Sized> {
    inner: &'a B,
    count: AtomicU64,
}

impl<'a, B: BlackBox + ?Sized> CountingBox<'a, B> {
    pub fn new(inner: &'a B) -> Self {
        CountingBox {
            inner,
            count: AtomicU64::new(0),
        }
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }
}

impl<'a, B: BlackBox + ?Sized> BlackBox for CountingBox<'a, B> {
    fn eval(&self, x: &[f64]) -> f64 {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.eval(x)
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn bound(&self) -> Option<f64> {
        self.inner.bound()
    }
}

/// Adds bounded uniform noise on [−σ, σ] to every query.
pub struct NoisyBox<'a, B: BlackBox + ?Sized> {
    inner: &'a B,
    sigma: f64,
    rng: Mutex<ChaCha12Rng>,
}

impl<'a, B: BlackBox + ?Sized> NoisyBox<'a, B> {
    pub fn new(inner: &'a B, sigma: f64, seed: u64) -> Self {
        NoisyBox {
            inner,
            sigma,
            rng: Mutex::new(ChaCha12Rng::seed_from_u64(seed)),
        }
    }
}

impl<'a, B: BlackBox + ?Sized> BlackBox for NoisyBox<'a, B> {
    fn eval(&self, x: &[f64]) -> f64 {
        let eps: f64 = {
            let mut rng = self.rng.lock().expect("noise rng poisoned");
            rng.random_range(-self.sigma..=self.sigma)
        };
        self.inner.eval(x) + eps
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn bound(&self) -> Option<f64> {
        self.inner.bound().map(|b| b + self.sigma)
    }
}

/// Where a smoothness budget came from. Certificates built on estimated
/// budgets are flagged and excluded from soundness guarantees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Exact,
    GridEstimated,
}

/// Bounds on derivative magnitudes over a patch: C_{≤p} for all |α| ≤ p and
/// C_{p+1} for |α| = p+1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessBudget {
    pub c_le_p: f64,
    pub c_p1: f64,
    pub provenance: Provenance,
}

impl SmoothnessBudget {
    pub fn new(c_le_p: f64, c_p1: f64, provenance: Provenance) -> Self {
        assert!(c_le_p >= 0.0 && c_le_p.is_finite());
        assert!(c_p1 >= 0.0 && c_p1.is_finite());
        SmoothnessBudget {
            c_le_p,
            c_p1,
            provenance,
        }
    }

    /// The normalized-coordinate bound C^{(ξ)}_{p+1} = r^{p+1} C^{(x)}_{p+1},
    /// derived, not stored.
    pub fn c_p1_normalized(&self, r: f64, p: usize) -> f64 {
        r.powi(p as i32 + 1) * self.c_p1
    }
}

/// Central finite-difference estimates of ∂^α g(x0) for all |α| ≤ p with
/// p ∈ {0, 1, 2}. The 2N axis queries are shared between the first-derivative
/// and pure-second stencils, so the query count at p = 2 is exactly
/// 1 + 2N + 2N(N−1).
pub fn fd_derivatives<B: BlackBox + ?Sized>(
    g: &B,
    x0: &[f64],
    p: usize,
    h: f64,
) -> Result<BTreeMap<MultiIndex, f64>> {
    if p > 2 {
        return Err(Error::InvalidParameter(format!(
            "finite-difference stencils are implemented for p <= 2, got {p}"
        )));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!("fd step {h} must be positive")));
    }
    let n = x0.len();
    let query = |x: &[f64]| -> Result<f64> {
        let v = g.eval(x);
        if !v.is_finite() {
            return Err(Error::NonFiniteValue(x.to_vec()));
        }
        Ok(v)
    };

    let mut out = BTreeMap::new();
    let g0 = query(x0)?;
    out.insert(MultiIndex::zeros(n), g0);
    if p == 0 {
        return Ok(out);
    }

    // axis points, shared by first and pure-second stencils
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    let mut x = x0.to_vec();
    for i in 0..n {
        x[i] = x0[i] + h;
        plus[i] = query(&x)?;
        x[i] = x0[i] - h;
        minus[i] = query(&x)?;
        x[i] = x0[i];

        let mut alpha = MultiIndex::zeros(n);
        alpha.0[i] = 1;
        out.insert(alpha, (plus[i] - minus[i]) / (2.0 * h));
    }
    if p == 1 {
        return Ok(out);
    }

    for i in 0..n {
        let mut alpha = MultiIndex::zeros(n);
        alpha.0[i] = 2;
        out.insert(alpha, (plus[i] - 2.0 * g0 + minus[i]) / (h * h));
    }

    // mixed seconds: 4-point stencil per unordered pair
    for i in 0..n {
        for j in (i + 1)..n {
            let mut xq = x0.to_vec();
            xq[i] += h;
            xq[j] += h;
            let pp = query(&xq)?;
            xq[j] = x0[j] - h;
            let pm = query(&xq)?;
            xq[i] = x0[i] - h;
            xq[j] = x0[j] + h;
            let mp = query(&xq)?;
            xq[j] = x0[j] - h;
            let mm = query(&xq)?;

            let mut alpha = MultiIndex::zeros(n);
            alpha.0[i] = 1;
            alpha.0[j] = 1;
            out.insert(alpha, (pp - pm - mp + mm) / (4.0 * h * h));
        }
    }
    Ok(out)
}

/// Default finite-difference step for a patch of radius r.
pub fn default_fd_step(r: f64) -> f64 {
    1e-2 * r.max(1e-3)
}

/// The embedded Taylor coefficient tensor: entry(α) = r^{|α|} ∂^α g(x0) on
/// the simplex |α| ≤ p, zero elsewhere. Stored sparsely on the simplex.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientTensor {
    #[serde(rename = "N")]
    pub n: usize,
    pub p: usize,
    pub r: f64,
    pub x0: Vec<f64>,
    /// (α, r^{|α|} ∂^α g(x0)) pairs in lexicographic α order.
    pub entries: Vec<(MultiIndex, f64)>,
}

impl CoefficientTensor {
    pub fn entry(&self, alpha: &MultiIndex) -> f64 {
        self.entries
            .binary_search_by(|(a, _)| a.cmp(alpha))
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    /// Densify to the full box {0..p}^N. Test-oracle path; production code
    /// keeps the simplex-sparse form.
    pub fn densify(&self) -> Result<DenseTensor> {
        let mut t = DenseTensor::zeros(vec![self.p + 1; self.n])?;
        for (alpha, v) in &self.entries {
            t.set(alpha.as_slice(), *v);
        }
        Ok(t)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|(_, v)| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Embed a full-simplex derivative map as the coefficient tensor
/// entry(α) = r^{|α|} · derivs[α].
pub fn embed(derivs: &BTreeMap<MultiIndex, f64>, patch: &PatchSpec) -> Result<CoefficientTensor> {
    let n = patch.dim();
    let mut entries = Vec::new();
    for alpha in simplex_indices(n, patch.p) {
        let d = derivs
            .get(&alpha)
            .ok_or_else(|| Error::MissingDerivative(alpha.as_slice().to_vec()))?;
        entries.push((alpha.clone(), patch.r.powi(alpha.degree() as i32) * d));
    }
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(CoefficientTensor {
        n,
        p: patch.p,
        r: patch.r,
        x0: patch.x0.clone(),
        entries,
    })
}

/// T_p(ξ) = ⟨A*, Φ(ξ)⟩, summed over the sparse simplex support only.
pub fn taylor_eval(coeffs: &CoefficientTensor, xi: &[f64]) -> f64 {
    debug_assert_eq!(xi.len(), coeffs.n);
    coeffs
        .entries
        .iter()
        .map(|(alpha, v)| v * phi_entry(xi, alpha))
        .sum()
}

/// Taylor truncation bound C_{p+1} r^{p+1} N^{p+1} / (p+1)!.
pub fn truncation_bound(budget: &SmoothnessBudget, r: f64, n: usize, p: usize) -> f64 {
    let mut fact = 1.0f64;
    for k in 2..=(p as u64 + 1) {
        fact *= k as f64;
    }
    budget.c_p1 * r.powi(p as i32 + 1) * (n as f64).powi(p as i32 + 1) / fact
}

/// Norm budget Λ*(r) = C_{≤p} (Σ_{m=0}^{p} C(N+m−1, m) r^{2m})^{1/2}.
pub fn lambda_star(budget: &SmoothnessBudget, r: f64, n: usize, p: usize) -> Result<f64> {
    let mut sum = 0.0f64;
    for m in 0..=p {
        sum += count_degree_exactly(n, m)? as f64 * r.powi(2 * m as i32);
    }
    Ok(budget.c_le_p * sum.sqrt())
}

/// Values of ∂^α estimated by finite differences at a grid point, for
/// |α| = 3 budget estimation. Composes a lower-order stencil with central
/// first differences.
fn fd_third_derivative<B: BlackBox + ?Sized>(
    g: &B,
    x: &[f64],
    alpha: &MultiIndex,
    h: f64,
) -> Result<f64> {
    debug_assert_eq!(alpha.degree(), 3);
    let n = x.len();
    let nz: Vec<(usize, usize)> = (0..n)
        .filter(|&i| alpha.0[i] > 0)
        .map(|i| (i, alpha.0[i]))
        .collect();
    let q = |x: &[f64]| -> Result<f64> {
        let v = g.eval(x);
        if !v.is_finite() {
            return Err(Error::NonFiniteValue(x.to_vec()));
        }
        Ok(v)
    };
    match nz.as_slice() {
        // d^3/dx_i^3: 5-point central
        [(i, 3)] => {
            let mut xq = x.to_vec();
            let mut vals = [0.0; 4];
            for (slot, off) in [(0, 2.0), (1, 1.0), (2, -1.0), (3, -2.0)] {
                xq[*i] = x[*i] + off * h;
                vals[slot] = q(&xq)?;
            }
            Ok((vals[0] - 2.0 * vals[1] + 2.0 * vals[2] - vals[3]) / (2.0 * h * h * h))
        }
        // d^3/dx_i^2 dx_j: pure second in i, central first in j
        [(i, 2), (j, 1)] | [(j, 1), (i, 2)] => {
            let second_at = |xj: f64| -> Result<f64> {
                let mut xq = x.to_vec();
                xq[*j] = xj;
                let c = q(&xq)?;
                xq[*i] = x[*i] + h;
                let pl = q(&xq)?;
                xq[*i] = x[*i] - h;
                let mi = q(&xq)?;
                Ok((pl - 2.0 * c + mi) / (h * h))
            };
            let plus = second_at(x[*j] + h)?;
            let minus = second_at(x[*j] - h)?;
            Ok((plus - minus) / (2.0 * h))
        }
        // d^3/dx_i dx_j dx_k: product of three central firsts (8 points)
        [(i, 1), (j, 1), (k, 1)] => {
            let mut acc = 0.0;
            let mut xq = x.to_vec();
            for si in [-1.0, 1.0] {
                for sj in [-1.0, 1.0] {
                    for sk in [-1.0, 1.0] {
                        xq[*i] = x[*i] + si * h;
                        xq[*j] = x[*j] + sj * h;
                        xq[*k] = x[*k] + sk * h;
                        acc += si * sj * sk * q(&xq)?;
                    }
                }
            }
            Ok(acc / (8.0 * h * h * h))
        }
        other => Err(Error::InvalidParameter(format!(
            "unsupported third-derivative pattern {other:?}"
        ))),
    }
}

/// Grid-estimated smoothness budget: maxima of |∂^α| over a uniform lattice
/// in the patch (grid_density points per axis, center always included),
/// multiplied by a safety factor. The result is flagged GridEstimated; only
/// exact budgets make the truncation bound a guarantee.
pub fn estimate_budget<B: BlackBox + ?Sized>(
    g: &B,
    patch: &PatchSpec,
    grid_density: usize,
    safety: f64,
) -> Result<SmoothnessBudget> {
    if patch.p > 2 {
        return Err(Error::InvalidParameter(
            "finite-difference budget estimation requires p <= 2".into(),
        ));
    }
    let n = patch.dim();
    let h = default_fd_step(patch.r);
    let density = grid_density.max(1);

    let mut c_le = 0.0f64;
    let mut c_hi = 0.0f64;
    let third_indices: Vec<MultiIndex> = simplex_indices(n, 3)
        .into_iter()
        .filter(|a| a.degree() == 3)
        .collect();

    let mut grid_point = vec![0usize; n];
    let mut visit_center = false;
    loop {
        let x: Vec<f64> = if visit_center {
            patch.x0.clone()
        } else {
            (0..n)
                .map(|i| {
                    let t = if density == 1 {
                        0.5
                    } else {
                        grid_point[i] as f64 / (density - 1) as f64
                    };
                    patch.x0[i] - patch.r + 2.0 * patch.r * t
                })
                .collect()
        };

        let derivs = fd_derivatives(g, &x, patch.p, h)?;
        for (_, v) in derivs {
            c_le = c_le.max(v.abs());
        }
        if patch.p == 2 {
            for alpha in &third_indices {
                c_hi = c_hi.max(fd_third_derivative(g, &x, alpha, h)?.abs());
            }
        }

        if visit_center {
            break;
        }
        let mut k = n;
        loop {
            if k == 0 {
                visit_center = true;
                break;
            }
            k -= 1;
            if grid_point[k] + 1 < density {
                grid_point[k] += 1;
                break;
            }
            grid_point[k] = 0;
        }
    }

    Ok(SmoothnessBudget::new(
        safety * c_le,
        safety * c_hi,
        Provenance::GridEstimated,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{FamilyInstance, FamilyKind};
    use approx::assert_abs_diff_eq;

    #[test]
    fn fd_query_count_is_73_at_n6_p2() {
        let f = FamilyInstance::all_ones(FamilyKind::ExpSum, 6).unwrap();
        let counter = CountingBox::new(&f);
        fd_derivatives(&counter, &[0.0; 6], 2, 1e-3).unwrap();
        assert_eq!(counter.count(), 73);
    }

    #[test]
    fn fd_query_count_formula() {
        for n in 1..=5 {
            let f = FamilyInstance::all_ones(FamilyKind::ExpSum, n).unwrap();
            for (p, expect) in [(0, 1), (1, 1 + 2 * n), (2, 1 + 2 * n + 2 * n * (n - 1))] {
                let counter = CountingBox::new(&f);
                fd_derivatives(&counter, &vec![0.0; n], p, 1e-3).unwrap();
                assert_eq!(counter.count() as usize, expect, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn fd_linear_function_has_zero_seconds() {
        let g = FnBox::new(3, |x: &[f64]| 1.0 + 2.0 * x[0] - 0.5 * x[1] + 3.0 * x[2]);
        let d = fd_derivatives(&g, &[0.1, -0.2, 0.4], 2, 1e-2).unwrap();
        for (alpha, v) in &d {
            if alpha.degree() == 2 {
                assert!(v.abs() < 1e-9, "alpha={alpha:?} v={v}");
            }
        }
        assert_abs_diff_eq!(d[&MultiIndex(vec![1, 0, 0])], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn fd_mixed_second_matches_exact() {
        let f = FamilyInstance::all_ones(FamilyKind::ExpSum, 2).unwrap();
        let d = fd_derivatives(&f, &[0.0, 0.0], 2, 1e-3).unwrap();
        let alpha = MultiIndex(vec![1, 1]);
        assert_abs_diff_eq!(d[&alpha], f.exact_derivative(&alpha), epsilon = 1e-5);
    }

    #[test]
    fn fd_rejects_bad_input() {
        let g = FnBox::new(1, |_: &[f64]| f64::NAN);
        assert!(matches!(
            fd_derivatives(&g, &[0.0], 1, 1e-3),
            Err(Error::NonFiniteValue(_))
        ));
        let ok = FnBox::new(1, |_: &[f64]| 1.0);
        assert!(fd_derivatives(&ok, &[0.0], 1, 0.0).is_err());
        assert!(fd_derivatives(&ok, &[0.0], 3, 1e-3).is_err());
    }

    fn exact_simplex_map(f: &FamilyInstance, p: usize) -> BTreeMap<MultiIndex, f64> {
        simplex_indices(f.dim, p)
            .into_iter()
            .map(|a| {
                let v = f.exact_derivative(&a);
                (a, v)
            })
            .collect()
    }

    #[test]
    fn embed_scaling_law() {
        let f = FamilyInstance::all_ones(FamilyKind::ExpSum, 3).unwrap();
        let derivs = exact_simplex_map(&f, 2);

        let unit = embed(&derivs, &PatchSpec::new(vec![0.0; 3], 1.0, 2, 2).unwrap()).unwrap();
        for (alpha, v) in &unit.entries {
            assert_eq!(*v, derivs[alpha]);
        }

        let small = embed(&derivs, &PatchSpec::new(vec![0.0; 3], 0.1, 2, 2).unwrap()).unwrap();
        let a2 = MultiIndex(vec![1, 1, 0]);
        assert_abs_diff_eq!(small.entry(&a2), 1e-2 * unit.entry(&a2), epsilon = 1e-15);
    }

    #[test]
    fn embed_missing_index_rejected() {
        let f = FamilyInstance::all_ones(FamilyKind::ExpSum, 2).unwrap();
        let mut derivs = exact_simplex_map(&f, 2);
        derivs.remove(&MultiIndex(vec![1, 1]));
        let patch = PatchSpec::new(vec![0.0; 2], 0.5, 2, 2).unwrap();
        assert!(matches!(
            embed(&derivs, &patch),
            Err(Error::MissingDerivative(_))
        ));
    }

    #[test]
    fn densified_embedding_is_zero_above_simplex() {
        let f = FamilyInstance::sample(FamilyKind::Gauss, 3, 2, 5).unwrap();
        let patch = PatchSpec::new(vec![0.0; 3], 0.3, 2, 2).unwrap();
        let ct = embed(&exact_simplex_map(&f, 2), &patch).unwrap();
        let dense = ct.densify().unwrap();
        let mut idx = vec![0usize; 3];
        loop {
            if idx.iter().sum::<usize>() > 2 {
                assert_eq!(dense.get(&idx), 0.0);
            }
            let mut k = 3;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                if idx[k] < 2 {
                    idx[k] += 1;
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    #[test]
    fn taylor_eval_center_returns_g_x0() {
        let f = FamilyInstance::sample(FamilyKind::QuadraticForm, 3, 2, 9).unwrap();
        let patch = PatchSpec::new(vec![0.0; 3], 0.5, 2, 2).unwrap();
        let ct = embed(&exact_simplex_map(&f, 2), &patch).unwrap();
        assert_abs_diff_eq!(taylor_eval(&ct, &[0.0; 3]), f.evaluate(&[0.0; 3]), epsilon = 1e-14);
    }

    /// Independent route: the classical sum Σ (r^|α|/α!)(∂^α g)(x0) ξ^α.
    #[test]
    fn taylor_eval_matches_classical_form() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let f = FamilyInstance::sample(FamilyKind::Trig, 3, 3, 12).unwrap();
        let patch = PatchSpec::new(vec![0.0; 3], 0.4, 3, 2).unwrap();
        let derivs = exact_simplex_map(&f, 3);
        let ct = embed(&derivs, &patch).unwrap();
        for _ in 0..100 {
            let xi: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let classical: f64 = derivs
                .iter()
                .map(|(alpha, d)| {
                    patch.r.powi(alpha.degree() as i32) / alpha.factorial().unwrap() as f64
                        * d
                        * alpha
                            .as_slice()
                            .iter()
                            .zip(&xi)
                            .map(|(&a, &x)| x.powi(a as i32))
                            .product::<f64>()
                })
                .sum();
            assert_abs_diff_eq!(taylor_eval(&ct, &xi), classical, epsilon = 1e-12);
        }
    }

    #[test]
    fn quadratic_target_is_reproduced_exactly() {
        let f = FamilyInstance::sample(FamilyKind::QuadraticForm, 3, 2, 77).unwrap();
        let patch = PatchSpec::new(vec![0.0; 3], 0.7, 2, 2).unwrap();
        let ct = embed(&exact_simplex_map(&f, 2), &patch).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..200 {
            let xi: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = patch.denormalize(&xi);
            assert_abs_diff_eq!(taylor_eval(&ct, &xi), f.evaluate(&x), epsilon = 1e-10);
        }
    }

    #[test]
    fn truncation_bound_examples() {
        let b = SmoothnessBudget::new(1.0, 1.0, Provenance::Exact);
        assert_eq!(truncation_bound(&b, 1.0, 1, 0), 1.0);
        assert_abs_diff_eq!(truncation_bound(&b, 0.1, 6, 2), 0.036, epsilon = 1e-15);
        // halving r scales by (1/2)^{p+1}
        let full = truncation_bound(&b, 0.2, 4, 2);
        let half = truncation_bound(&b, 0.1, 4, 2);
        assert_abs_diff_eq!(half, full / 8.0, epsilon = 1e-15);
    }

    #[test]
    fn lambda_star_examples() {
        let b = SmoothnessBudget::new(1.0, 1.0, Provenance::Exact);
        assert_abs_diff_eq!(
            lambda_star(&b, 1.0, 2, 1).unwrap(),
            3.0f64.sqrt(),
            epsilon = 1e-14
        );
        // r -> 0 limit is C_le_p
        assert_abs_diff_eq!(lambda_star(&b, 1e-12, 5, 3).unwrap(), 1.0, epsilon = 1e-9);
        // monotone in r
        let mut prev = 0.0;
        for i in 1..=20 {
            let v = lambda_star(&b, i as f64 * 0.1, 4, 2).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn estimated_budget_expsum_corner_maximum() {
        // C_{<=2} for exp(x1+x2) on B(0,1) peaks at the corner (1,1): e^2
        let f = FamilyInstance::all_ones(FamilyKind::ExpSum, 2).unwrap();
        let patch = PatchSpec::new(vec![0.0; 2], 1.0, 2, 2).unwrap();
        let b = estimate_budget(&f, &patch, 2, 1.0).unwrap();
        assert_abs_diff_eq!(b.c_le_p, 7.38905609893065, epsilon = 2e-2);
        assert_eq!(b.provenance, Provenance::GridEstimated);
        // safety factor multiplies exactly
        let b2 = estimate_budget(&f, &patch, 2, 1.5).unwrap();
        assert_abs_diff_eq!(b2.c_le_p, 1.5 * b.c_le_p, epsilon = 1e-12);
        assert_abs_diff_eq!(b2.c_p1, 1.5 * b.c_p1, epsilon = 1e-12);
    }

    #[test]
    fn estimated_budget_quadratic_has_zero_third_order() {
        let f = FamilyInstance::sample(FamilyKind::QuadraticForm, 2, 2, 3).unwrap();
        let patch = PatchSpec::new(vec![0.0; 2], 0.5, 2, 2).unwrap();
        let b = estimate_budget(&f, &patch, 2, 1.0).unwrap();
        assert!(b.c_p1 < 1e-6, "third-order estimate {}", b.c_p1);
    }

    #[test]
    fn thm1_truncation_soundness_sampled() {
        // |g(x0 + r xi) - T_p(xi)| <= truncation bound, exact budgets
        let mut rng = ChaCha12Rng::seed_from_u64(55);
        for kind in FamilyKind::all() {
            let f = FamilyInstance::sample(kind, 3, 2, 23).unwrap();
            let patch = PatchSpec::new(vec![0.05, -0.1, 0.0], 0.25, 2, 2).unwrap();
            let budget = f.sup_budget(&patch).unwrap();
            let bound = truncation_bound(&budget, patch.r, 3, 2);
            let derivs: BTreeMap<MultiIndex, f64> = simplex_indices(3, 2)
                .into_iter()
                .map(|a| {
                    let v = f.derivative_at(&a, &patch.x0);
                    (a, v)
                })
                .collect();
            let ct = embed(&derivs, &patch).unwrap();
            for _ in 0..500 {
                let xi: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let x = patch.denormalize(&xi);
                let err = (f.evaluate(&x) - taylor_eval(&ct, &xi)).abs();
                assert!(
                    err <= bound * (1.0 + 1e-9) + 1e-12,
                    "{}: err={} bound={}",
                    kind.name(),
                    err,
                    bound
                );
            }
        }
    }

    #[test]
    fn lambda_star_dominates_embedded_norm() {
        for kind in FamilyKind::all() {
            let f = FamilyInstance::sample(kind, 3, 2, 29).unwrap();
            for r in [0.05, 0.2, 0.5] {
                let patch = PatchSpec::new(vec![0.0; 3], r, 2, 2).unwrap();
                let budget = f.sup_budget(&patch).unwrap();
                let derivs: BTreeMap<MultiIndex, f64> = simplex_indices(3, 2)
                    .into_iter()
                    .map(|a| {
                        let v = f.exact_derivative(&a);
                        (a, v)
                    })
                    .collect();
                let ct = embed(&derivs, &patch).unwrap();
                let lhs = ct.densify().unwrap().frobenius_norm();
                let rhs = lambda_star(&budget, r, 3, 2).unwrap();
                assert!(lhs <= rhs * (1.0 + 1e-12), "{}: {} > {}", kind.name(), lhs, rhs);
            }
        }
    }

    #[test]
    fn coefficient_tensor_serializes() {
        let f = FamilyInstance::all_ones(FamilyKind::ExpSum, 2).unwrap();
        let patch = PatchSpec::new(vec![0.0; 2], 0.5, 2, 2).unwrap();
        let ct = embed(&exact_simplex_map(&f, 2), &patch).unwrap();
        let json = serde_json::to_string(&ct).unwrap();
        assert!(json.contains("\"N\":2"));
        let back: CoefficientTensor = serde_json::from_str(&json).unwrap();
        assert_eq!(back.entries, ct.entries);
    }

    #[test]
    fn noisy_box_stays_within_sigma() {
        let f = FamilyInstance::all_ones(FamilyKind::ExpSum, 2).unwrap();
        let noisy = NoisyBox::new(&f, 0.25, 7);
        for _ in 0..200 {
            let x = [0.1, -0.2];
            let delta = (noisy.eval(&x) - f.evaluate(&x)).abs();
            assert!(delta <= 0.25 + 1e-12);
        }
    }
}
