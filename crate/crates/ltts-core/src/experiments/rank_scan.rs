//! Simplex-to-box rank-scaling scan: for each analytic-family instance,
//! the smallest TT rank cap at which the box tensor and its simplex-masked
//! embedding meet a Frobenius tolerance, under two normalizations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::percentile;
use crate::families::{FamilyInstance, FamilyKind};
use crate::seed::substream_parts;
use crate::tensor::DenseTensor;
use crate::tt::tt_svd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    /// ‖A − A_TT‖_F ≤ ε ‖A_box‖_F, the same scale for both tensors.
    CommonScale,
    /// ‖A − A_TT‖_F ≤ ε ‖A‖_F, each tensor against its own norm.
    SelfRelative,
}

impl Criterion {
    pub fn name(&self) -> &'static str {
        match self {
            Criterion::CommonScale => "common-scale",
            Criterion::SelfRelative => "self-relative",
        }
    }
}

/// Aggregation buckets matching the reported summary rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bucket {
    Separable,
    PolyMatched,
    PolyHigher,
    Quadratic,
    TrigGauss,
}

impl Bucket {
    pub fn of(kind: FamilyKind) -> Bucket {
        match kind {
            FamilyKind::ExpSum | FamilyKind::ProductCos => Bucket::Separable,
            FamilyKind::PolyMatched => Bucket::PolyMatched,
            FamilyKind::PolyHigher => Bucket::PolyHigher,
            FamilyKind::QuadraticForm => Bucket::Quadratic,
            FamilyKind::Trig | FamilyKind::Gauss => Bucket::TrigGauss,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Bucket::Separable => "separable",
            Bucket::PolyMatched => "poly-matched",
            Bucket::PolyHigher => "poly-higher",
            Bucket::Quadratic => "quadratic-form",
            Bucket::TrigGauss => "trig-gauss",
        }
    }

    pub fn parse(s: &str) -> Result<Bucket> {
        match s {
            "separable" => Ok(Bucket::Separable),
            "poly-matched" => Ok(Bucket::PolyMatched),
            "poly-higher" => Ok(Bucket::PolyHigher),
            "quadratic-form" => Ok(Bucket::Quadratic),
            "trig-gauss" => Ok(Bucket::TrigGauss),
            other => Err(Error::InvalidParameter(format!("unknown family bucket '{other}'"))),
        }
    }

    pub fn all() -> [Bucket; 5] {
        [
            Bucket::Separable,
            Bucket::PolyMatched,
            Bucket::PolyHigher,
            Bucket::Quadratic,
            Bucket::TrigGauss,
        ]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankScanConfig {
    /// (N, p) grid; the default inventory follows the reported study.
    pub configs: Vec<(usize, usize)>,
    pub eps: Vec<f64>,
    pub criteria: Vec<Criterion>,
    pub chi_max: usize,
    pub seed: u64,
    /// Bucket filter; empty means all buckets.
    pub buckets: Vec<Bucket>,
}

impl Default for RankScanConfig {
    fn default() -> Self {
        RankScanConfig {
            configs: vec![(4, 3), (4, 4), (6, 2), (6, 3)],
            eps: vec![1e-2, 1e-3],
            criteria: vec![Criterion::CommonScale, Criterion::SelfRelative],
            chi_max: 25,
            seed: 20240601,
            buckets: Vec::new(),
        }
    }
}

/// One instance of the scan inventory.
#[derive(Debug, Clone)]
struct InstanceSpec {
    kind: FamilyKind,
    n: usize,
    p: usize,
    index: usize,
    deterministic: bool,
}

/// The default inventory: per (N, p) grid point,
///   ExpSum: one all-ones instance plus 10 random draws,
///   ProductCos: the all-ones instance,
///   each polynomial degree class: 10 random draws,
///   QuadraticForm, Trig, Gauss: 4 random draws each,
/// which totals 44 instances per (N, p) and 176 over the default grid,
/// with bucket counts 48 / 40 / 40 / 16 / 32.
fn inventory(cfg: &RankScanConfig) -> Vec<InstanceSpec> {
    let wanted = |kind: FamilyKind| {
        cfg.buckets.is_empty() || cfg.buckets.contains(&Bucket::of(kind))
    };
    let mut out = Vec::new();
    for &(n, p) in &cfg.configs {
        if wanted(FamilyKind::ExpSum) {
            out.push(InstanceSpec {
                kind: FamilyKind::ExpSum,
                n,
                p,
                index: 0,
                deterministic: true,
            });
            for index in 1..=10 {
                out.push(InstanceSpec {
                    kind: FamilyKind::ExpSum,
                    n,
                    p,
                    index,
                    deterministic: false,
                });
            }
        }
        if wanted(FamilyKind::ProductCos) {
            out.push(InstanceSpec {
                kind: FamilyKind::ProductCos,
                n,
                p,
                index: 0,
                deterministic: true,
            });
        }
        for kind in [FamilyKind::PolyMatched, FamilyKind::PolyHigher] {
            if wanted(kind) {
                for index in 0..10 {
                    out.push(InstanceSpec {
                        kind,
                        n,
                        p,
                        index,
                        deterministic: false,
                    });
                }
            }
        }
        for kind in [FamilyKind::QuadraticForm, FamilyKind::Trig, FamilyKind::Gauss] {
            if wanted(kind) {
                for index in 0..4 {
                    out.push(InstanceSpec {
                        kind,
                        n,
                        p,
                        index,
                        deterministic: false,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankScanRecord {
    pub family: String,
    pub n: usize,
    pub p: usize,
    pub instance: usize,
    pub epsilon: f64,
    pub criterion: Criterion,
    pub chi_box: Option<usize>,
    pub chi_delta: Option<usize>,
    pub rho: Option<f64>,
}

impl RankScanRecord {
    pub fn bucket(&self) -> Bucket {
        Bucket::of(FamilyKind::parse(&self.family).expect("valid family in record"))
    }
}

/// Smallest χ ∈ {1..chi_max} with ‖A − tt_svd(A, χ)‖_F ≤ tol_abs, or None
/// when the cap never reaches the tolerance.
pub fn min_rank_to_tolerance(
    a: &DenseTensor,
    tol_abs: f64,
    chi_max: usize,
) -> Result<Option<usize>> {
    if !(tol_abs > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tol_abs} must be positive"
        )));
    }
    for chi in 1..=chi_max {
        let (tt, _) = tt_svd(a, chi, None)?;
        if tt.distance_dense(a)? <= tol_abs {
            return Ok(Some(chi));
        }
    }
    Ok(None)
}

/// Run the scan. Instances are independent work items; records come back in
/// a deterministic order regardless of thread count.
pub fn rank_scan(cfg: &RankScanConfig) -> Result<Vec<RankScanRecord>> {
    let instances = inventory(cfg);
    let per_instance: Vec<Result<Vec<RankScanRecord>>> = instances
        .par_iter()
        .map(|spec| scan_instance(cfg, spec))
        .collect();
    let mut records = Vec::new();
    for chunk in per_instance {
        records.extend(chunk?);
    }
    Ok(records)
}

fn scan_instance(cfg: &RankScanConfig, spec: &InstanceSpec) -> Result<Vec<RankScanRecord>> {
    let instance = if spec.deterministic {
        FamilyInstance::all_ones(spec.kind, spec.n)?
    } else {
        let seed = substream_parts(
            cfg.seed,
            &[
                "rank-scan",
                spec.kind.name(),
                &spec.n.to_string(),
                &spec.p.to_string(),
                &spec.index.to_string(),
            ],
        );
        FamilyInstance::sample(spec.kind, spec.n, spec.p, seed)?
    };
    let a_box = instance.box_tensor(spec.p)?;
    let a_delta = instance.simplex_tensor(spec.p)?;
    let norm_box = a_box.frobenius_norm();
    let norm_delta = a_delta.frobenius_norm();
    if norm_box == 0.0 || norm_delta == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "zero-norm tensor for {} (N={}, p={}, instance {}): tolerance undefined",
            spec.kind.name(),
            spec.n,
            spec.p,
            spec.index
        )));
    }

    let mut records = Vec::new();
    for &eps in &cfg.eps {
        for &criterion in &cfg.criteria {
            let tol_box = eps * norm_box;
            let tol_delta = match criterion {
                Criterion::CommonScale => eps * norm_box,
                Criterion::SelfRelative => eps * norm_delta,
            };
            let chi_box = min_rank_to_tolerance(&a_box, tol_box, cfg.chi_max)?;
            let chi_delta = min_rank_to_tolerance(&a_delta, tol_delta, cfg.chi_max)?;
            let rho = match (chi_box, chi_delta) {
                (Some(b), Some(d)) => Some(d as f64 / b as f64),
                _ => None,
            };
            records.push(RankScanRecord {
                family: spec.kind.name().to_string(),
                n: spec.n,
                p: spec.p,
                instance: spec.index,
                epsilon: eps,
                criterion,
                chi_box,
                chi_delta,
                rho,
            });
        }
    }
    Ok(records)
}

/// One summary row: a bucket under one (ε, criterion) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BucketSummary {
    pub bucket: String,
    pub epsilon: f64,
    pub criterion: Criterion,
    pub n: usize,
    pub median_rho: f64,
    pub iqr: (f64, f64),
    pub median_chi_box: f64,
    pub median_chi_delta: f64,
    pub unreached: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table1Summary {
    pub rows: Vec<BucketSummary>,
    pub total_records: usize,
    pub total_unreached: usize,
}

/// Aggregate records into the summary table: per (bucket, ε, criterion),
/// median ρ with IQR (type-7 percentiles), median rank caps, and the count
/// of instances that never reached tolerance.
pub fn aggregate(records: &[RankScanRecord]) -> Table1Summary {
    let mut rows = Vec::new();
    let mut eps_values: Vec<f64> = records.iter().map(|r| r.epsilon).collect();
    eps_values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eps_values.dedup();
    let mut total_unreached = 0;

    for bucket in Bucket::all() {
        for &epsilon in &eps_values {
            for &criterion in &[Criterion::CommonScale, Criterion::SelfRelative] {
                let cell: Vec<&RankScanRecord> = records
                    .iter()
                    .filter(|r| {
                        r.bucket() == bucket && r.epsilon == epsilon && r.criterion == criterion
                    })
                    .collect();
                if cell.is_empty() {
                    continue;
                }
                let mut rhos: Vec<f64> = cell.iter().filter_map(|r| r.rho).collect();
                let unreached = cell
                    .iter()
                    .filter(|r| r.chi_box.is_none() || r.chi_delta.is_none())
                    .count();
                total_unreached += unreached;
                rhos.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mut boxes: Vec<f64> =
                    cell.iter().filter_map(|r| r.chi_box.map(|v| v as f64)).collect();
                boxes.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mut deltas: Vec<f64> = cell
                    .iter()
                    .filter_map(|r| r.chi_delta.map(|v| v as f64))
                    .collect();
                deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());
                if rhos.is_empty() {
                    continue;
                }
                rows.push(BucketSummary {
                    bucket: bucket.name().to_string(),
                    epsilon,
                    criterion,
                    n: cell.len(),
                    median_rho: percentile(&rhos, 0.5),
                    iqr: (percentile(&rhos, 0.25), percentile(&rhos, 0.75)),
                    median_chi_box: percentile(&boxes, 0.5),
                    median_chi_delta: percentile(&deltas, 0.5),
                    unreached,
                });
            }
        }
    }
    Table1Summary {
        rows,
        total_records: records.len(),
        total_unreached,
    }
}

/// CSV schema:
/// family,N,p,instance,epsilon,criterion,chi_box,chi_delta,rho,reached_box,reached_delta
pub fn to_csv(records: &[RankScanRecord]) -> String {
    let mut out = String::from(
        "family,N,p,instance,epsilon,criterion,chi_box,chi_delta,rho,reached_box,reached_delta\n",
    );
    for r in records {
        let fmt_opt_usize =
            |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let fmt_opt_f64 = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.family,
            r.n,
            r.p,
            r.instance,
            r.epsilon,
            r.criterion.name(),
            fmt_opt_usize(r.chi_box),
            fmt_opt_usize(r.chi_delta),
            fmt_opt_f64(r.rho),
            r.chi_box.is_some(),
            r.chi_delta.is_some(),
        ));
    }
    out
}
