//! Dataset sampling on the patch and alternating-least-squares empirical
//! risk minimization over TT cores, with certificate warm start.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::derivatives::BlackBox;
use crate::error::{Error, Result};
use crate::features::{factor_vector, PatchSpec};
use crate::tt::{Core, TTTensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseModel {
    None,
    /// Mean-zero noise uniform on [−σ, σ]; bounded, so Var = σ²/3.
    Bounded { sigma: f64 },
}

impl NoiseModel {
    pub fn sigma(&self) -> f64 {
        match self {
            NoiseModel::None => 0.0,
            NoiseModel::Bounded { sigma } => *sigma,
        }
    }
}

/// Labeled samples drawn from a patch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    /// Points in input units, each inside B(x0, r).
    pub xs: Vec<Vec<f64>>,
    /// The same points in normalized coordinates ξ ∈ [−1, 1]^N.
    pub xis: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
    pub seed: u64,
    pub noise: NoiseModel,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }
}

/// X_i i.i.d. uniform on the ℓ∞ ball, Y_i = g(X_i) + ε_i with ε_i uniform
/// on [−σ, σ]. The noise draws come from a separate substream so that the
/// point cloud is identical with and without noise at the same seed.
pub fn sample_patch<B: BlackBox + ?Sized>(
    g: &B,
    patch: &PatchSpec,
    n: usize,
    noise: NoiseModel,
    seed: u64,
) -> Result<Dataset> {
    if n < 1 {
        return Err(Error::InvalidParameter("dataset size must be >= 1".into()));
    }
    let dim = patch.dim();
    let mut coord_rng = ChaCha12Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(0x9E3779B97F4A7C15));
    let mut xs = Vec::with_capacity(n);
    let mut xis = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let xi: Vec<f64> = (0..dim).map(|_| coord_rng.random_range(-1.0..=1.0)).collect();
        let x = patch.denormalize(&xi);
        let mut y = g.eval(&x);
        if !y.is_finite() {
            return Err(Error::NonFiniteValue(x));
        }
        if let NoiseModel::Bounded { sigma } = noise {
            y += noise_rng.random_range(-sigma..=sigma);
        }
        xs.push(x);
        xis.push(xi);
        ys.push(y);
    }
    Ok(Dataset {
        xs,
        xis,
        ys,
        seed,
        noise,
    })
}

/// Uniform points in the patch without labels (test grids).
pub fn sample_points(patch: &PatchSpec, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let xi: Vec<f64> = (0..patch.dim())
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect();
            patch.denormalize(&xi)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub enum InitStrategy {
    /// Cores i.i.d. N(0, 1/(m·χ)) for unit-scale initial predictions.
    Random { seed: u64 },
    /// Start from an existing TT, e.g. the Taylor-TT certificate.
    WarmStart(TTTensor),
}

#[derive(Debug, Clone)]
pub struct ErmConfig {
    pub chi: usize,
    /// Norm budget Λ; monitored, not enforced (violations are reported).
    pub lambda_budget: Option<f64>,
    pub max_sweeps: usize,
    /// Convergence threshold on the relative change of empirical risk
    /// between full sweeps.
    pub rel_tol: f64,
    pub ridge: f64,
    pub init: InitStrategy,
    /// Post-process: rescale the final TT onto the norm budget.
    pub rescale_to_budget: bool,
}

impl ErmConfig {
    pub fn new(chi: usize) -> Self {
        ErmConfig {
            chi,
            lambda_budget: None,
            max_sweeps: 50,
            rel_tol: 1e-9,
            ridge: 1e-10,
            init: InitStrategy::Random { seed: 0 },
            rescale_to_budget: false,
        }
    }
}

/// Outcome of one ALS fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    /// Empirical risk after each half-sweep.
    pub risk_trace: Vec<f64>,
    pub final_risk: f64,
    pub sweeps_run: usize,
    pub converged: bool,
    pub final_norm: f64,
    pub budget_violation: bool,
    pub ridge_bumped: bool,
    pub rescaled: bool,
}

/// Random TT with cores i.i.d. N(0, 1/(m·χ)); also used to plant recovery
/// targets in tests.
pub fn random_tt(n: usize, m: usize, chi: usize, seed: u64) -> TTTensor {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let std = 1.0 / ((m * chi) as f64).sqrt();
    let mut cores = Vec::with_capacity(n);
    for k in 0..n {
        let rl = if k == 0 { 1 } else { chi };
        let rr = if k == n - 1 { 1 } else { chi };
        let mut core = Core::zeros(rl, m, rr);
        for v in &mut core.data {
            *v = std * rng.sample::<f64, _>(StandardNormal);
        }
        cores.push(core);
    }
    TTTensor::new(cores).expect("random TT construction")
}

/// Mean squared residual on the dataset.
pub fn empirical_risk(tt: &TTTensor, data: &Dataset) -> f64 {
    let mut scratch = crate::tt::EvalScratch::default();
    let mut acc = 0.0;
    for (xi, &y) in data.xis.iter().zip(&data.ys) {
        let r = tt.eval_with_scratch(xi, &mut scratch).expect("arity checked") - y;
        acc += r * r;
    }
    acc / data.len() as f64
}

/// Root-mean-square of tt(ξ(x)) − g(x) over the given clean points.
pub fn clean_rmse<B: BlackBox + ?Sized>(
    tt: &TTTensor,
    g: &B,
    patch: &PatchSpec,
    points: &[Vec<f64>],
) -> f64 {
    let mut scratch = crate::tt::EvalScratch::default();
    let mut acc = 0.0;
    for x in points {
        let xi = patch.normalize_unchecked(x);
        let r = tt.eval_with_scratch(&xi, &mut scratch).expect("arity checked") - g.eval(x);
        acc += r * r;
    }
    (acc / points.len() as f64).sqrt()
}

/// Alternating least squares over TT cores. Sweeps left-to-right then
/// right-to-left; each core solve is an exact (ridge-damped) least-squares
/// minimization with the other cores held fixed, so the empirical risk is
/// nonincreasing across half-sweeps. Stops when the relative change of
/// empirical risk over a full sweep falls below rel_tol.
pub fn als_fit(data: &Dataset, patch: &PatchSpec, cfg: &ErmConfig) -> Result<(TTTensor, FitReport)> {
    if data.is_empty() {
        return Err(Error::InvalidParameter("dataset is empty".into()));
    }
    let n_modes = patch.dim();
    let m = patch.p + 1;
    let n = data.len();

    let mut cores: Vec<Core> = match &cfg.init {
        InitStrategy::Random { seed } => random_tt(n_modes, m, cfg.chi, *seed).cores().to_vec(),
        InitStrategy::WarmStart(tt) => {
            if tt.order() != n_modes || tt.mode_sizes().iter().any(|&ms| ms != m) {
                return Err(Error::ShapeMismatch(format!(
                    "warm start has modes {:?}, expected {} modes of size {}",
                    tt.mode_sizes(),
                    n_modes,
                    m
                )));
            }
            tt.cores().to_vec()
        }
    };

    // per-sample factor vectors (n × n_modes), fixed for the whole fit
    let mut factors: Vec<Vec<f64>> = Vec::with_capacity(n * n_modes);
    for xi in &data.xis {
        if xi.len() != n_modes {
            return Err(Error::ShapeMismatch("dataset dim mismatch".into()));
        }
        for &x in xi {
            factors.push(factor_vector(x, patch.p)?.entries().to_vec());
        }
    }

    let mut report = FitReport {
        risk_trace: Vec::new(),
        final_risk: f64::INFINITY,
        sweeps_run: 0,
        converged: false,
        final_norm: 0.0,
        budget_violation: false,
        ridge_bumped: false,
        rescaled: false,
    };

    let risk_of = |cores: &[Core]| -> f64 {
        let tt = TTTensor::new(cores.to_vec()).expect("valid cores");
        empirical_risk(&tt, data)
    };

    let mut prev_sweep_risk = risk_of(&cores);
    for sweep in 0..cfg.max_sweeps {
        // left-to-right half sweep: rights come from the pre-sweep cores,
        // lefts are rebuilt incrementally from the freshly solved ones
        let rights = all_right_stacks(&cores, n, n_modes, &factors);
        let mut lefts: Vec<Vec<f64>> = vec![vec![1.0]; n];
        for k in 0..n_modes {
            let rights_view: Vec<&[f64]> = rights[k].iter().map(|v| v.as_slice()).collect();
            solve_core(
                &mut cores,
                k,
                data,
                &lefts,
                &rights_view,
                &factors,
                n_modes,
                cfg.ridge,
                &mut report.ridge_bumped,
            )?;
            for i in 0..n {
                lefts[i] = apply_left(&cores[k], &factors[i * n_modes + k], &lefts[i]);
            }
        }
        report.risk_trace.push(risk_of(&cores));

        // right-to-left half sweep
        let lefts_all = all_left_stacks(&cores, n, n_modes, &factors);
        let mut rights_inc: Vec<Vec<f64>> = vec![vec![1.0]; n];
        for k in (0..n_modes).rev() {
            let rights_view: Vec<&[f64]> = rights_inc.iter().map(|v| v.as_slice()).collect();
            solve_core(
                &mut cores,
                k,
                data,
                &lefts_all[k],
                &rights_view,
                &factors,
                n_modes,
                cfg.ridge,
                &mut report.ridge_bumped,
            )?;
            for i in 0..n {
                rights_inc[i] = apply_right(&cores[k], &factors[i * n_modes + k], &rights_inc[i]);
            }
        }
        let risk = risk_of(&cores);
        report.risk_trace.push(risk);
        report.sweeps_run = sweep + 1;

        let denom = prev_sweep_risk.max(f64::MIN_POSITIVE);
        let converged = (prev_sweep_risk - risk).abs() / denom < cfg.rel_tol;
        prev_sweep_risk = risk;
        if converged {
            report.converged = true;
            break;
        }
    }

    let mut tt = TTTensor::new(cores)?;
    report.final_risk = prev_sweep_risk;
    report.final_norm = tt.norm();
    if let Some(lambda) = cfg.lambda_budget {
        if report.final_norm > lambda * (1.0 + 1e-9) {
            report.budget_violation = true;
            if cfg.rescale_to_budget {
                let scale = lambda / report.final_norm;
                let mut cores = tt.cores().to_vec();
                let last = cores.len() - 1;
                for v in &mut cores[last].data {
                    *v *= scale;
                }
                tt = TTTensor::new(cores)?;
                report.rescaled = true;
                report.final_norm = tt.norm();
                report.final_risk = empirical_risk(&tt, data);
            }
        }
    }
    Ok((tt, report))
}

/// vᵀ = uᵀ · M_k where M_k = Σ_j fv[j] G_k[j].
fn apply_left(core: &Core, fv: &[f64], u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; core.r_right];
    for a in 0..core.r_left {
        let ua = u[a];
        if ua == 0.0 {
            continue;
        }
        for j in 0..core.m {
            let c = ua * fv[j];
            if c == 0.0 {
                continue;
            }
            let base = (a * core.m + j) * core.r_right;
            for b in 0..core.r_right {
                out[b] += c * core.data[base + b];
            }
        }
    }
    out
}

/// v = M_k · w.
fn apply_right(core: &Core, fv: &[f64], w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; core.r_left];
    for a in 0..core.r_left {
        let mut acc = 0.0;
        for j in 0..core.m {
            let f = fv[j];
            if f == 0.0 {
                continue;
            }
            let base = (a * core.m + j) * core.r_right;
            for b in 0..core.r_right {
                acc += f * core.data[base + b] * w[b];
            }
        }
        out[a] = acc;
    }
    out
}

/// rights[k][i]: right boundary vector when solving core k (contraction of
/// cores k+1..N−1), per sample.
fn all_right_stacks(
    cores: &[Core],
    n: usize,
    n_modes: usize,
    factors: &[Vec<f64>],
) -> Vec<Vec<Vec<f64>>> {
    let mut rights: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n_modes];
    rights[n_modes - 1] = vec![vec![1.0]; n];
    for k in (0..n_modes.saturating_sub(1)).rev() {
        let mut level = Vec::with_capacity(n);
        for i in 0..n {
            level.push(apply_right(
                &cores[k + 1],
                &factors[i * n_modes + k + 1],
                &rights[k + 1][i],
            ));
        }
        rights[k] = level;
    }
    rights
}

/// lefts[k][i]: left boundary vector when solving core k (contraction of
/// cores 0..k−1), per sample.
fn all_left_stacks(
    cores: &[Core],
    n: usize,
    n_modes: usize,
    factors: &[Vec<f64>],
) -> Vec<Vec<Vec<f64>>> {
    let mut lefts: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n_modes];
    lefts[0] = vec![vec![1.0]; n];
    for k in 1..n_modes {
        let mut level = Vec::with_capacity(n);
        for i in 0..n {
            level.push(apply_left(
                &cores[k - 1],
                &factors[i * n_modes + k - 1],
                &lefts[k - 1][i],
            ));
        }
        lefts[k] = level;
    }
    lefts
}

/// Least-squares update of core k given per-sample boundary vectors. The
/// design row for sample i is kron(left_i, fv_i, right_i) laid out to match
/// the core's (a, j, b) order. Singular normal equations at ridge 0 are
/// retried once at ridge 1e-10 and reported.
#[allow(clippy::too_many_arguments)]
fn solve_core(
    cores: &mut [Core],
    k: usize,
    data: &Dataset,
    lefts: &[Vec<f64>],
    rights: &[&[f64]],
    factors: &[Vec<f64>],
    n_modes: usize,
    ridge: f64,
    ridge_bumped: &mut bool,
) -> Result<()> {
    let (rl, m, rr) = (cores[k].r_left, cores[k].m, cores[k].r_right);
    let d = rl * m * rr;
    let n = data.len();
    let mut h = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    let mut row = vec![0.0; d];
    for i in 0..n {
        let u = &lefts[i];
        let w = rights[i];
        let f = &factors[i * n_modes + k];
        let mut idx = 0;
        for a in 0..rl {
            for j in 0..m {
                let c = u[a] * f[j];
                for b in 0..rr {
                    row[idx] = c * w[b];
                    idx += 1;
                }
            }
        }
        let y = data.ys[i];
        for p in 0..d {
            let rp = row[p];
            if rp == 0.0 {
                continue;
            }
            rhs[p] += y * rp;
            for q in p..d {
                h[(p, q)] += rp * row[q];
            }
        }
    }
    for p in 0..d {
        for q in (p + 1)..d {
            h[(q, p)] = h[(p, q)];
        }
    }

    let solution = try_solve(&h, &rhs, ridge).or_else(|| {
        if ridge == 0.0 {
            *ridge_bumped = true;
            try_solve(&h, &rhs, 1e-10)
        } else {
            None
        }
    });
    let w = solution.ok_or_else(|| {
        Error::SingularSystem(format!("normal equations singular at core {k} (d={d}, n={n})"))
    })?;
    cores[k].data.copy_from_slice(w.as_slice());
    Ok(())
}

fn try_solve(h: &DMatrix<f64>, rhs: &DVector<f64>, ridge: f64) -> Option<DVector<f64>> {
    let d = h.nrows();
    let mut damped = h.clone();
    if ridge > 0.0 {
        for i in 0..d {
            damped[(i, i)] += ridge;
        }
    }
    Cholesky::new(damped).map(|ch| ch.solve(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{FamilyInstance, FamilyKind};

    fn unit_patch(dim: usize, p: usize) -> PatchSpec {
        PatchSpec::new(vec![0.0; dim], 1.0, p, 2).unwrap()
    }

    #[test]
    fn sample_patch_respects_geometry_and_noise() {
        let g = FamilyInstance::all_ones(FamilyKind::ExpSum, 3).unwrap();
        let patch = PatchSpec::new(vec![0.2, -0.1, 0.0], 0.3, 2, 2).unwrap();
        let data = sample_patch(&g, &patch, 500, NoiseModel::None, 42).unwrap();
        for (x, (xi, &y)) in data.xs.iter().zip(data.xis.iter().zip(&data.ys)) {
            for (i, &v) in x.iter().enumerate() {
                assert!((v - patch.x0[i]).abs() <= patch.r + 1e-12);
            }
            assert!(xi.iter().all(|t| t.abs() <= 1.0));
            assert_eq!(y, g.evaluate(x));
        }
    }

    #[test]
    fn noise_is_mean_zero_and_bounded() {
        let g = FamilyInstance::all_ones(FamilyKind::ExpSum, 2).unwrap();
        let patch = unit_patch(2, 2);
        let sigma = 0.4;
        let n = 100_000;
        let clean = sample_patch(&g, &patch, n, NoiseModel::None, 7).unwrap();
        let noisy = sample_patch(&g, &patch, n, NoiseModel::Bounded { sigma }, 7).unwrap();
        let mut sum = 0.0;
        for (c, m) in clean.ys.iter().zip(&noisy.ys) {
            let eps = m - c;
            assert!(eps.abs() <= sigma + 1e-12);
            sum += eps;
        }
        let mean = sum / n as f64;
        // CLT: |mean| <= 3 sigma_eps / sqrt(n), sigma_eps = sigma/sqrt(3)
        assert!(mean.abs() <= 3.0 * sigma / 3.0f64.sqrt() / (n as f64).sqrt());
    }

    #[test]
    fn planted_tt_recovery() {
        let n_modes = 4;
        let m = 3;
        let chi = 2;
        let patch = unit_patch(n_modes, m - 1);
        let planted = random_tt(n_modes, m, chi, 99);
        let g = crate::derivatives::FnBox::new(n_modes, |x: &[f64]| planted.eval(x).unwrap());
        let n = 10 * planted.param_count();
        let data = sample_patch(&g, &patch, n, NoiseModel::None, 3).unwrap();
        let mut cfg = ErmConfig::new(chi);
        cfg.max_sweeps = 200;
        cfg.rel_tol = 1e-14;
        cfg.init = InitStrategy::Random { seed: 5 };
        let (fit, report) = als_fit(&data, &patch, &cfg).unwrap();
        assert!(report.final_risk <= 1e-12, "risk {}", report.final_risk);
        let test_points = sample_points(&patch, 2000, 8);
        let rmse = clean_rmse(&fit, &g, &patch, &test_points);
        assert!(rmse <= 1e-6, "rmse {rmse}");
    }

    #[test]
    fn single_sample_interpolates() {
        let g = FamilyInstance::all_ones(FamilyKind::ExpSum, 2).unwrap();
        let patch = unit_patch(2, 2);
        let data = sample_patch(&g, &patch, 1, NoiseModel::None, 1).unwrap();
        let mut cfg = ErmConfig::new(1);
        cfg.max_sweeps = 10;
        let (_, report) = als_fit(&data, &patch, &cfg).unwrap();
        assert!(report.final_risk < 1e-12);
    }

    #[test]
    fn empty_dataset_rejected() {
        let patch = unit_patch(2, 2);
        let data = Dataset {
            xs: vec![],
            xis: vec![],
            ys: vec![],
            seed: 0,
            noise: NoiseModel::None,
        };
        assert!(als_fit(&data, &patch, &ErmConfig::new(1)).is_err());
    }

    #[test]
    fn risk_nonincreasing_across_half_sweeps() {
        // ridge 0 makes every core solve an exact least-squares step
        let g = FamilyInstance::sample(FamilyKind::Trig, 3, 2, 6).unwrap();
        let patch = PatchSpec::new(vec![0.0; 3], 0.5, 2, 2).unwrap();
        let data = sample_patch(&g, &patch, 400, NoiseModel::None, 11).unwrap();
        let mut cfg = ErmConfig::new(2);
        cfg.ridge = 0.0;
        cfg.max_sweeps = 15;
        cfg.rel_tol = 1e-16;
        let (_, report) = als_fit(&data, &patch, &cfg).unwrap();
        for w in report.risk_trace.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-12 * w[0].max(1.0),
                "risk increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn prediction_bounded_by_norm_times_kn() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let tt = random_tt(4, 3, 3, 31);
        let bound = tt.norm() * crate::features::feature_norm_bound(4);
        for _ in 0..500 {
            let xi: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!(tt.eval(&xi).unwrap().abs() <= bound * (1.0 + 1e-9));
        }
    }

    #[test]
    fn excess_risk_noise_identity() {
        // L_hat - R_hat ~ sigma^2/3 for uniform noise
        let g = FamilyInstance::sample(FamilyKind::QuadraticForm, 2, 2, 15).unwrap();
        let patch = unit_patch(2, 2);
        let sigma = 0.3;
        let n = 100_000;
        let data = sample_patch(&g, &patch, n, NoiseModel::Bounded { sigma }, 19).unwrap();
        // h: a cheap surrogate fit on a small clean subset
        let small = sample_patch(&g, &patch, 300, NoiseModel::None, 20).unwrap();
        let (h, _) = als_fit(&small, &patch, &ErmConfig::new(2)).unwrap();
        let l_hat = empirical_risk(&h, &data);
        let mut r_hat = 0.0;
        for (x, xi) in data.xs.iter().zip(&data.xis) {
            let d = h.eval(xi).unwrap() - g.evaluate(x);
            r_hat += d * d;
        }
        r_hat /= n as f64;
        let diff = l_hat - r_hat;
        let expect = sigma * sigma / 3.0;
        // standard error of the mean of eps^2 terms
        let se = (4.0 / 45.0f64).sqrt() * sigma * sigma / (n as f64).sqrt();
        assert!(
            (diff - expect).abs() <= 4.0 * se,
            "diff {diff} expect {expect} se {se}"
        );
    }

    #[test]
    fn budget_monitoring_and_rescale() {
        let g = FamilyInstance::all_ones(FamilyKind::ExpSum, 2).unwrap();
        let patch = unit_patch(2, 2);
        let data = sample_patch(&g, &patch, 200, NoiseModel::None, 23).unwrap();
        let mut cfg = ErmConfig::new(2);
        cfg.lambda_budget = Some(1e-3); // deliberately tiny
        let (_, report) = als_fit(&data, &patch, &cfg).unwrap();
        assert!(report.budget_violation);
        assert!(!report.rescaled);

        cfg.rescale_to_budget = true;
        let (tt, report) = als_fit(&data, &patch, &cfg).unwrap();
        assert!(report.rescaled);
        assert!(tt.norm() <= 1e-3 * (1.0 + 1e-9));
    }

    #[test]
    fn warm_start_runs_and_matches_class() {
        let g = FamilyInstance::sample(FamilyKind::Gauss, 3, 2, 41).unwrap();
        let patch = PatchSpec::new(vec![0.0; 3], 0.4, 2, 2).unwrap();
        let data = sample_patch(&g, &patch, 300, NoiseModel::None, 2).unwrap();

        let warm = random_tt(3, 3, 2, 55);
        let mut cfg = ErmConfig::new(2);
        cfg.init = InitStrategy::WarmStart(warm);
        let (_, report) = als_fit(&data, &patch, &cfg).unwrap();
        assert!(report.final_risk.is_finite());

        // wrong mode count rejected
        let bad = random_tt(4, 3, 2, 56);
        cfg.init = InitStrategy::WarmStart(bad);
        assert!(als_fit(&data, &patch, &cfg).is_err());
    }

    #[test]
    fn empirical_risk_exact_fit_is_zero() {
        let patch = unit_patch(3, 2);
        let tt = random_tt(3, 3, 2, 60);
        let g = crate::derivatives::FnBox::new(3, |x: &[f64]| tt.eval(x).unwrap());
        let data = sample_patch(&g, &patch, 50, NoiseModel::None, 61).unwrap();
        assert!(empirical_risk(&tt, &data) < 1e-24);
    }
}
