//! Command-line entry point: the surrogate pipeline and both built-in
//! studies, with reproducible JSON configs and CSV outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ltts_core::certificate::{Certificate, StatBounds};
use ltts_core::derivatives::{
    default_fd_step, embed, estimate_budget, fd_derivatives, lambda_star, truncation_bound,
    SmoothnessBudget,
};
use ltts_core::erm::NoiseModel;
use ltts_core::experiments::rank_scan::{aggregate, rank_scan, Bucket, RankScanConfig};
use ltts_core::experiments::validate::{
    default_centers, ltts_validate, table2, table2_csv, table2_text, ValidateConfig,
};
use ltts_core::families::{FamilyInstance, FamilyKind};
use ltts_core::features::PatchSpec;
use ltts_core::quantum::{QcnnModel, QcnnOracle};
use ltts_core::seed::substream;
use ltts_core::surrogate::Surrogate;
use ltts_core::tensor::{simplex_indices, MultiIndex};
use ltts_core::tt::tt_svd;

const EXIT_OK: u8 = 0;
const EXIT_CONFIG: u8 = 1;
const EXIT_GATE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ltts",
    version,
    about = "Certified local tensor-train surrogates: pipeline and reproducible studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank-scaling scan of the simplex-to-box zero-padding embedding
    RankScan(RankScanArgs),
    /// Build a coefficient tensor, TT-compress, and print certificates
    Certify(CertifyArgs),
    /// End-to-end validation against the built-in oracle or a family
    Validate(ValidateArgs),
    /// Evaluate a saved surrogate at points from a CSV
    Eval(EvalArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON config file; explicit flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: hardware parallelism)
    #[arg(long)]
    threads: Option<usize>,
    /// Exit nonzero when a quality gate fails
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Clone)]
struct RankScanArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated bucket filter (separable, poly-matched, poly-higher,
    /// quadratic-form, trig-gauss)
    #[arg(long)]
    families: Option<String>,
    /// Comma-separated NxP grid, e.g. 4x3,6x2
    #[arg(long)]
    configs: Option<String>,
    /// Comma-separated tolerance list, e.g. 1e-2,1e-3
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    chi_max: Option<usize>,
}

#[derive(Args, Clone)]
struct CertifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Target: qcnn or a family name (expsum, productcos, poly-matched,
    /// poly-higher, quadratic-form, trig, gauss)
    #[arg(long)]
    target: Option<String>,
    /// Input dimension
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Comma-separated patch radii
    #[arg(long)]
    r: Option<String>,
    /// Comma-separated rank caps
    #[arg(long)]
    chi: Option<String>,
    /// Comma-separated center coordinates (defaults to zeros)
    #[arg(long)]
    x0: Option<String>,
    /// Sample size for the statistical bounds
    #[arg(long)]
    n_samples: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    y_max: Option<f64>,
    /// Save the certificate surrogate (requires single r and chi)
    #[arg(long)]
    save_surrogate: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ValidateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Target: qcnn (default) or a family name
    #[arg(long)]
    target: Option<String>,
    /// Input dimension D
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    qubits: Option<usize>,
    /// Comma-separated radii
    #[arg(long)]
    r: Option<String>,
    /// Comma-separated rank caps
    #[arg(long)]
    chi: Option<String>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Finite shots per training label (omit for exact expectations)
    #[arg(long)]
    shots: Option<u64>,
    /// Bounded label noise half-width σ
    #[arg(long)]
    noise: Option<f64>,
    /// Timed evaluations per side for the speedup column (0 disables)
    #[arg(long)]
    timing_reps: Option<usize>,
}

#[derive(Args, Clone)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Saved surrogate JSON
    #[arg(long)]
    surrogate: PathBuf,
    /// CSV of evaluation points, one point per row
    #[arg(long)]
    points: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::RankScan(args) => cmd_rank_scan(args),
        Command::Certify(args) => cmd_certify(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Eval(args) => cmd_eval(args),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Error wrapper that keeps the exit-code classification.
#[derive(Debug)]
struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn config(msg: impl Into<String>) -> Self {
        CliError {
            message: msg.into(),
            code: EXIT_CONFIG,
        }
    }
    fn runtime(msg: impl Into<String>) -> Self {
        CliError {
            message: msg.into(),
            code: EXIT_RUNTIME,
        }
    }
    fn exit_code(&self) -> u8 {
        self.code
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<ltts_core::Error> for CliError {
    fn from(e: ltts_core::Error) -> Self {
        match e {
            ltts_core::Error::InvalidParameter(_) => CliError::config(e.to_string()),
            other => CliError::runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn init_threads(threads: Option<usize>) {
    if let Some(t) = threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global();
    }
}

fn load_config<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> CliResult<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let raw = std::fs::read_to_string(p)
                .map_err(|e| CliError::config(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&raw)
                .map_err(|e| CliError::config(format!("bad config {}: {e}", p.display())))
        }
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|_| CliError::config(format!("cannot parse {what} entry '{t}'")))
        })
        .collect()
}

fn parse_grid(s: &str) -> CliResult<Vec<(usize, usize)>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let parts: Vec<&str> = t.trim().split(['x', 'X']).collect();
            if parts.len() != 2 {
                return Err(CliError::config(format!("configs entry '{t}' is not NxP")));
            }
            let n = parts[0]
                .parse()
                .map_err(|_| CliError::config(format!("bad N in configs entry '{t}'")))?;
            let p = parts[1]
                .parse()
                .map_err(|_| CliError::config(format!("bad P in configs entry '{t}'")))?;
            Ok((n, p))
        })
        .collect()
}

/// Echo the resolved config and a reproducibility manifest before any
/// computation starts.
fn write_run_preamble<C: Serialize>(
    out: &Path,
    config: &C,
    seed: u64,
    input_hashes: BTreeMap<String, String>,
) -> CliResult<()> {
    std::fs::create_dir_all(out)?;
    let config_json = serde_json::to_string_pretty(config)
        .map_err(|e| CliError::runtime(format!("config serialization: {e}")))?;
    std::fs::write(out.join("config.json"), &config_json)?;

    #[derive(Serialize)]
    struct Manifest {
        tool_version: &'static str,
        seed: u64,
        config_sha256: String,
        input_sha256: BTreeMap<String, String>,
    }
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        seed,
        config_sha256: hex_digest(config_json.as_bytes()),
        input_sha256: input_hashes,
    };
    std::fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::runtime(format!("manifest serialization: {e}")))?,
    )?;
    Ok(())
}

fn hex_digest(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_file(path: &Path) -> CliResult<String> {
    Ok(hex_digest(&std::fs::read(path)?))
}

// ---------------------------------------------------------------- rank-scan

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct RankScanRun {
    scan: RankScanConfig,
    out: PathBuf,
}

impl Default for RankScanRun {
    fn default() -> Self {
        RankScanRun {
            scan: RankScanConfig::default(),
            out: PathBuf::from("out-rank-scan"),
        }
    }
}

fn cmd_rank_scan(args: RankScanArgs) -> CliResult<u8> {
    init_threads(args.common.threads);
    let mut run: RankScanRun = load_config(&args.common.config)?;
    if let Some(out) = args.common.out {
        run.out = out;
    }
    if let Some(seed) = args.common.seed {
        run.scan.seed = seed;
    }
    if let Some(f) = &args.families {
        run.scan.buckets = f
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| Bucket::parse(t.trim()).map_err(|e| CliError::config(e.to_string())))
            .collect::<CliResult<Vec<_>>>()?;
    }
    if let Some(c) = &args.configs {
        run.scan.configs = parse_grid(c)?;
    }
    if let Some(e) = &args.eps {
        run.scan.eps = parse_list(e, "eps")?;
    }
    if let Some(cm) = args.chi_max {
        run.scan.chi_max = cm;
    }
    if run.scan.configs.is_empty() {
        return Err(CliError::config("configs list is empty"));
    }

    write_run_preamble(&run.out, &run, run.scan.seed, BTreeMap::new())?;

    let records = rank_scan(&run.scan)?;
    let summary = aggregate(&records);
    std::fs::write(
        run.out.join("rank_scan.csv"),
        ltts_core::experiments::rank_scan::to_csv(&records),
    )?;
    std::fs::write(
        run.out.join("table1.json"),
        serde_json::to_string_pretty(&summary)
            .map_err(|e| CliError::runtime(format!("summary serialization: {e}")))?,
    )?;

    println!(
        "rank scan: {} records, {} unreached (chi_max {})",
        summary.total_records, summary.total_unreached, run.scan.chi_max
    );
    println!("bucket            eps      criterion      n   med_rho [iqr]         med_chi");
    for row in &summary.rows {
        println!(
            "{:<16} {:<8} {:<13} {:>3}   {:.2} [{:.2}, {:.2}]      {:.0}/{:.0}",
            row.bucket,
            row.epsilon,
            row.criterion.name(),
            row.n,
            row.median_rho,
            row.iqr.0,
            row.iqr.1,
            row.median_chi_box,
            row.median_chi_delta
        );
    }

    if args.common.strict && summary.total_unreached > 0 {
        eprintln!("strict: {} records unreached", summary.total_unreached);
        return Ok(EXIT_GATE);
    }
    Ok(EXIT_OK)
}

// ------------------------------------------------------------------ certify

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct CertifyRun {
    target: String,
    n: usize,
    p: usize,
    radii: Vec<f64>,
    chis: Vec<usize>,
    x0: Vec<f64>,
    n_samples: u64,
    delta: f64,
    eta: f64,
    y_max: Option<f64>,
    family_seed: u64,
    qubits: usize,
    budget_grid_density: usize,
    budget_safety: f64,
    fd_step: Option<f64>,
    out: PathBuf,
    seed: u64,
}

impl Default for CertifyRun {
    fn default() -> Self {
        CertifyRun {
            target: "expsum".into(),
            n: 6,
            p: 2,
            radii: vec![0.05, 0.1, 0.2, 0.4, 0.7, 1.0],
            chis: vec![1, 2, 3],
            x0: Vec::new(),
            n_samples: 600,
            delta: 0.05,
            eta: 0.01,
            y_max: None,
            family_seed: 7,
            qubits: 6,
            budget_grid_density: 2,
            budget_safety: 1.5,
            fd_step: None,
            out: PathBuf::from("out-certify"),
            seed: 20240601,
        }
    }
}

#[derive(Serialize)]
struct CertifyRow {
    r: f64,
    chi: usize,
    certificate: Certificate,
    stat_bounds: StatBounds,
}

enum Target {
    Family(FamilyInstance),
    Qcnn(QcnnOracle),
}

fn build_target(
    name: &str,
    n: usize,
    p: usize,
    family_seed: u64,
    qubits: usize,
    master: u64,
) -> CliResult<Target> {
    if name == "qcnn" {
        let model = QcnnModel::new(qubits, substream(master, "qcnn-model"))
            .map_err(|e| CliError::config(e.to_string()))?;
        let oracle = QcnnOracle::new(model, n).map_err(|e| CliError::config(e.to_string()))?;
        Ok(Target::Qcnn(oracle))
    } else {
        let kind = FamilyKind::parse(name).map_err(|e| CliError::config(e.to_string()))?;
        let inst = FamilyInstance::sample(kind, n, p, family_seed)
            .map_err(|e| CliError::config(e.to_string()))?;
        Ok(Target::Family(inst))
    }
}

fn budget_for_target(
    target: &Target,
    patch: &PatchSpec,
    grid_density: usize,
    safety: f64,
) -> ltts_core::Result<SmoothnessBudget> {
    match target {
        Target::Family(f) => f.sup_budget(patch),
        Target::Qcnn(q) => estimate_budget(q, patch, grid_density, safety),
    }
}

/// Simplex derivative map: exact closed forms for families, central finite
/// differences for the opaque oracle.
fn derivative_map(
    target: &Target,
    x0: &[f64],
    p: usize,
    h: f64,
) -> ltts_core::Result<BTreeMap<MultiIndex, f64>> {
    match target {
        Target::Family(f) => Ok(simplex_indices(x0.len(), p)
            .into_iter()
            .map(|alpha| {
                let v = f.derivative_at(&alpha, x0);
                (alpha, v)
            })
            .collect()),
        Target::Qcnn(q) => fd_derivatives(q, x0, p, h),
    }
}

fn cmd_certify(args: CertifyArgs) -> CliResult<u8> {
    init_threads(args.common.threads);
    let mut run: CertifyRun = load_config(&args.common.config)?;
    if let Some(out) = args.common.out {
        run.out = out;
    }
    if let Some(seed) = args.common.seed {
        run.seed = seed;
    }
    if let Some(t) = &args.target {
        run.target = t.clone();
    }
    if let Some(n) = args.n {
        run.n = n;
    }
    if let Some(p) = args.p {
        run.p = p;
    }
    if let Some(r) = &args.r {
        run.radii = parse_list(r, "r")?;
    }
    if let Some(c) = &args.chi {
        run.chis = parse_list(c, "chi")?;
    }
    if let Some(x) = &args.x0 {
        run.x0 = parse_list(x, "x0")?;
    }
    if let Some(v) = args.n_samples {
        run.n_samples = v;
    }
    if let Some(v) = args.delta {
        run.delta = v;
    }
    if let Some(v) = args.eta {
        run.eta = v;
    }
    if let Some(v) = args.y_max {
        run.y_max = Some(v);
    }
    if run.x0.is_empty() {
        run.x0 = vec![0.0; run.n];
    }
    if run.x0.len() != run.n {
        return Err(CliError::config(format!(
            "x0 has {} coordinates, n is {}",
            run.x0.len(),
            run.n
        )));
    }
    if run.radii.is_empty() || run.chis.is_empty() {
        return Err(CliError::config("radii and chis must be non-empty"));
    }
    if args.save_surrogate.is_some() && (run.radii.len() != 1 || run.chis.len() != 1) {
        return Err(CliError::config(
            "--save-surrogate requires exactly one r and one chi",
        ));
    }

    write_run_preamble(&run.out, &run, run.seed, BTreeMap::new())?;

    let target = build_target(&run.target, run.n, run.p, run.family_seed, run.qubits, run.seed)?;
    let default_y_max = match &target {
        Target::Qcnn(_) => 3.0,
        Target::Family(f) => {
            let widest = run.radii.iter().fold(0.0f64, |m, &r| m.max(r));
            let patch = PatchSpec::new(run.x0.clone(), widest, run.p, 1)?;
            f.sup_abs_bound(&patch)
        }
    };
    let y_max = run.y_max.unwrap_or(default_y_max);

    let mut rows: Vec<CertifyRow> = Vec::new();
    for &r in &run.radii {
        let patch = PatchSpec::new(run.x0.clone(), r, run.p, run.chis[0])?;
        let h = run.fd_step.unwrap_or_else(|| default_fd_step(r));
        let derivs = derivative_map(&target, &run.x0, run.p, h)?;
        let coeffs = embed(&derivs, &patch)?;
        let dense = coeffs.densify()?;
        let budget =
            budget_for_target(&target, &patch, run.budget_grid_density, run.budget_safety)?;
        let e_taylor = truncation_bound(&budget, r, run.n, run.p);
        let lambda = lambda_star(&budget, r, run.n, run.p)?;
        for &chi in &run.chis {
            let (tt, _) = tt_svd(&dense, chi, None)?;
            let e_tt_raw = tt.distance_dense(&dense)?;
            let cert =
                Certificate::new(e_taylor, e_tt_raw, run.n, lambda, y_max, budget.provenance);
            let sb = StatBounds::compute(
                &cert,
                run.n,
                run.p + 1,
                chi,
                run.n_samples,
                run.delta,
                run.eta,
            )?;
            if let Some(path) = &args.save_surrogate {
                let spatch = PatchSpec::new(run.x0.clone(), r, run.p, chi)?;
                Surrogate::new(spatch, tt.clone())?
                    .save_json(path)
                    .map_err(|e| CliError::runtime(e.to_string()))?;
            }
            rows.push(CertifyRow {
                r,
                chi,
                certificate: cert,
                stat_bounds: sb,
            });
        }
    }

    std::fs::write(
        run.out.join("certificates.json"),
        serde_json::to_string_pretty(&rows)
            .map_err(|e| CliError::runtime(format!("serialization: {e}")))?,
    )?;

    let mut text = String::from(
        "      r  chi      E_taylor        E_tt_K         E_det        Lambda          M(r)   pdim_loss  n_required\n",
    );
    for row in &rows {
        let c = &row.certificate;
        let est = if c.is_estimated() { " (estimated)" } else { "" };
        text.push_str(&format!(
            "{:>7} {:>4} {:>13.4e} {:>13.4e} {:>13.4e} {:>13.4e} {:>13.4e} {:>11.1} {:>11}{}\n",
            row.r,
            row.chi,
            c.e_taylor,
            c.k_n * c.e_tt_raw,
            c.e_det,
            c.lambda,
            c.m_bound,
            row.stat_bounds.d_loss,
            row.stat_bounds.n_required,
            est,
        ));
    }
    std::fs::write(run.out.join("certificates.txt"), &text)?;
    print!("{text}");
    Ok(EXIT_OK)
}

// ----------------------------------------------------------------- validate

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct ValidateRun {
    target: String,
    d: usize,
    qubits: usize,
    validate: ValidateConfig,
    /// Explicit centers; empty selects the documented default rule.
    centers: Vec<Vec<f64>>,
    /// Domain for default centers (the oracle's mapped input range).
    domain_lo: f64,
    domain_hi: f64,
    shots: Option<u64>,
    family_seed: u64,
    budget_grid_density: usize,
    budget_safety: f64,
    out: PathBuf,
}

impl Default for ValidateRun {
    fn default() -> Self {
        ValidateRun {
            target: "qcnn".into(),
            d: 6,
            qubits: 6,
            validate: ValidateConfig::default(),
            centers: Vec::new(),
            domain_lo: 0.0,
            domain_hi: std::f64::consts::PI,
            shots: None,
            family_seed: 7,
            budget_grid_density: 2,
            budget_safety: 1.5,
            out: PathBuf::from("out-validate"),
        }
    }
}

fn cmd_validate(args: ValidateArgs) -> CliResult<u8> {
    init_threads(args.common.threads);
    let mut run: ValidateRun = load_config(&args.common.config)?;
    if let Some(out) = args.common.out {
        run.out = out;
    }
    if let Some(seed) = args.common.seed {
        run.validate.seed = seed;
    }
    if let Some(t) = &args.target {
        run.target = t.clone();
    }
    if let Some(d) = args.d {
        run.d = d;
    }
    if let Some(q) = args.qubits {
        run.qubits = q;
    }
    if let Some(r) = &args.r {
        run.validate.radii = parse_list(r, "r")?;
    }
    if let Some(c) = &args.chi {
        run.validate.chis = parse_list(c, "chi")?;
    }
    if let Some(p) = args.p {
        run.validate.p = p;
    }
    if let Some(v) = args.n_train {
        run.validate.n_train = v;
    }
    if let Some(v) = args.n_test {
        run.validate.n_test = v;
    }
    if let Some(v) = args.shots {
        run.shots = Some(v);
    }
    if let Some(sigma) = args.noise {
        run.validate.noise = if sigma > 0.0 {
            NoiseModel::Bounded { sigma }
        } else {
            NoiseModel::None
        };
    }
    if let Some(v) = args.timing_reps {
        run.validate.timing_reps = v;
    }
    if run.validate.radii.is_empty() || run.validate.chis.is_empty() {
        return Err(CliError::config("radii and chis must be non-empty"));
    }

    let target = build_target(
        &run.target,
        run.d,
        run.validate.p,
        run.family_seed,
        run.qubits,
        run.validate.seed,
    )?;
    let target = match (target, run.shots) {
        (Target::Qcnn(q), Some(shots)) => {
            Target::Qcnn(q.with_shots(shots, substream(run.validate.seed, "shots")))
        }
        (t, _) => t,
    };

    if run.centers.is_empty() {
        run.centers = default_centers(
            run.d,
            run.domain_lo,
            run.domain_hi,
            substream(run.validate.seed, "centers"),
        );
    }
    for c in &run.centers {
        if c.len() != run.d {
            return Err(CliError::config(format!(
                "center {:?} does not have dimension {}",
                c, run.d
            )));
        }
    }
    // label bound entering M(r): the conservative constant for a unit
    // observable under finite-shot estimation, or sup|g| + σ for families
    run.validate.y_max = match &target {
        Target::Qcnn(_) => 3.0,
        Target::Family(f) => {
            let widest = run.validate.radii.iter().fold(0.0f64, |m, &r| m.max(r));
            let sup = run
                .centers
                .iter()
                .map(|c| {
                    PatchSpec::new(c.clone(), widest, run.validate.p, 1)
                        .map(|patch| f.sup_abs_bound(&patch))
                })
                .collect::<ltts_core::Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0f64, f64::max);
            sup + run.validate.noise.sigma()
        }
    };

    write_run_preamble(&run.out, &run, run.validate.seed, BTreeMap::new())?;

    let grid_density = run.budget_grid_density;
    let safety = run.budget_safety;
    let records = match &target {
        Target::Family(f) => {
            ltts_validate(f, &run.centers, &run.validate, &|p: &PatchSpec| f.sup_budget(p))?
        }
        Target::Qcnn(q) => ltts_validate(q, &run.centers, &run.validate, &|p: &PatchSpec| {
            estimate_budget(q, p, grid_density, safety)
        })?,
    };

    std::fs::write(
        run.out.join("validation.csv"),
        ltts_core::experiments::validate::to_csv(&records),
    )?;
    let t2 = table2(&records, 0, 0.1);
    std::fs::write(run.out.join("table2.csv"), table2_csv(&t2))?;

    #[derive(Serialize)]
    struct Summary<'a> {
        records: &'a [ltts_core::experiments::validate::ValidationRecord],
        table2: &'a [ltts_core::experiments::validate::Table2Row],
    }
    std::fs::write(
        run.out.join("summary.json"),
        serde_json::to_string_pretty(&Summary {
            records: &records,
            table2: &t2,
        })
        .map_err(|e| CliError::runtime(format!("serialization: {e}")))?,
    )?;

    println!(
        "validation: {} records over {} centers x {} radii x {} rank caps",
        records.len(),
        run.centers.len(),
        run.validate.radii.len(),
        run.validate.chis.len()
    );
    print!("{}", table2_text(&t2));

    if args.common.strict {
        let bad_cert = records
            .iter()
            .filter(|r| r.cert_rmse > r.e_det * (1.0 + 1e-9))
            .count();
        let bad_te = records.iter().filter(|r| r.te_ratio > 1.0).count();
        if bad_cert > 0 || bad_te > 0 {
            eprintln!(
                "strict: {bad_cert} records exceed the certificate, {bad_te} records have te_ratio > 1"
            );
            return Ok(EXIT_GATE);
        }
    }
    Ok(EXIT_OK)
}

// --------------------------------------------------------------------- eval

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct EvalRun {
    out: PathBuf,
}

impl Default for EvalRun {
    fn default() -> Self {
        EvalRun {
            out: PathBuf::from("out-eval"),
        }
    }
}

fn cmd_eval(args: EvalArgs) -> CliResult<u8> {
    init_threads(args.common.threads);
    let mut run: EvalRun = load_config(&args.common.config)?;
    if let Some(out) = args.common.out {
        run.out = out;
    }

    let surrogate = Surrogate::load(&args.surrogate)
        .map_err(|e| CliError::config(format!("cannot load surrogate: {e}")))?;
    let dim = surrogate.dim();

    let mut hashes = BTreeMap::new();
    hashes.insert("surrogate".to_string(), hash_file(&args.surrogate)?);
    hashes.insert("points".to_string(), hash_file(&args.points)?);
    write_run_preamble(&run.out, &run, 0, hashes)?;

    let raw = std::fs::read_to_string(&args.points).map_err(|e| {
        CliError::config(format!("cannot read points {}: {e}", args.points.display()))
    })?;

    use std::io::Write;
    let file = std::fs::File::create(run.out.join("predictions.csv"))?;
    let mut w = std::io::BufWriter::new(file);
    let mut header = String::new();
    for i in 0..dim {
        header.push_str(&format!("x{},", i + 1));
    }
    header.push_str("prediction,in_patch\n");
    w.write_all(header.as_bytes())?;

    let mut scratch = ltts_core::tt::EvalScratch::default();
    let mut total = 0usize;
    let mut outside = 0usize;
    for (lineno, line) in raw.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(|f| f.trim()).collect();
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let point = match parsed {
            Ok(p) => p,
            Err(_) if lineno == 0 => continue, // header row
            Err(e) => {
                return Err(CliError::config(format!(
                    "points line {}: cannot parse '{}': {e}",
                    lineno + 1,
                    trimmed
                )))
            }
        };
        if point.len() != dim {
            return Err(CliError::config(format!(
                "points line {}: expected {} coordinates, got {}",
                lineno + 1,
                dim,
                point.len()
            )));
        }
        let in_patch = surrogate.in_patch(&point);
        if !in_patch {
            outside += 1;
        }
        let value = surrogate
            .eval_with_scratch(&point, &mut scratch)
            .map_err(|e| CliError::runtime(e.to_string()))?;
        let mut row_out = String::new();
        for v in &point {
            row_out.push_str(&format!("{v},"));
        }
        row_out.push_str(&format!("{value},{in_patch}\n"));
        w.write_all(row_out.as_bytes())?;
        total += 1;
    }
    w.flush()?;

    println!(
        "evaluated {total} points ({outside} outside the patch) -> {}",
        run.out.join("predictions.csv").display()
    );
    if args.common.strict && outside > 0 {
        eprintln!("strict: {outside} points outside the patch");
        return Ok(EXIT_GATE);
    }
    Ok(EXIT_OK)
}
