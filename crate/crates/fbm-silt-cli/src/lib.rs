//! Configuration, sample tables and subcommand drivers behind the `fbm-silt` binary.
//!
//! Every table starts with one `#`-prefixed JSON line carrying the recorded
//! run configuration, followed by an ordinary CSV header and rows. Outputs
//! depend only on the configuration and seed; thread count and output
//! directory are never recorded.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use fbm_silt::constants::{c_h_const, lambda_const, rho_const, sigma_q_squared, sigma_squared, QuadSpec};
use fbm_silt::cubature::QuadResult;
use fbm_silt::fbm::derive_seed;
use fbm_silt::silt::{replicate_map, sample_silt, MonteCarloConfig};
use fbm_silt::stats::StatReport;
use fbm_silt::verify::{run_critical_log, run_subcritical, run_supercritical, ExperimentResult, HermiteRun};
use fbm_silt::{FbmGenerator, FbmPath, HurstConfig, Regime, SiltError, TimeGrid};

/// Environment variable overriding the configured thread count.
pub const THREADS_ENV: &str = "FBM_SILT_THREADS";

pub const CONSTANTS_FILE: &str = "constants.csv";
pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const REPORT_FILE: &str = "report.json";
pub const CRITERIA_FILE: &str = "criteria.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PATHS_DIR: &str = "paths";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Constants,
    Simulate,
    Estimate,
    Verify,
    Report,
}

/// Full description of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    pub hurst: HurstConfig,
    pub monte_carlo: MonteCarloConfig,
    #[serde(default)]
    pub quadrature: QuadSpec,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<f64>,
    /// Highest chaos index `q` tabulated by `constants`.
    #[serde(default = "default_chaos_order")]
    pub chaos_order: usize,
    /// Hermite-approximant sub-run of the supercritical experiment.
    #[serde(default)]
    pub hermite: Option<HermiteRun>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_horizons() -> Vec<f64> {
    vec![1.0]
}

fn default_chaos_order() -> usize {
    25
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(format!("cannot parse config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.hurst.validate()?;
        self.monte_carlo.validate()?;
        self.quadrature.validate()?;
        if self.horizons.is_empty() || self.horizons.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(CliError::Config("horizons must be positive and finite".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be positive".into()));
        }
        Ok(())
    }

    /// The part of the configuration that determines emitted bytes.
    fn recorded(&self, command: Command) -> Self {
        Self { command: Some(command), out_dir: default_out_dir(), threads: None, ..self.clone() }
    }

    fn max_horizon(&self) -> f64 {
        self.horizons.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("regime guard: {0}")]
    Regime(SiltError),
    #[error("computation failed: {0}")]
    Compute(SiltError),
    #[error("{failed} of {total} acceptance criteria failed")]
    CriteriaFailed { failed: usize, total: usize },
    #[error("I/O error on {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed table {}: {reason}", path.display())]
    Table { path: PathBuf, reason: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Compute(_) => 1,
            CliError::Config(_) => 2,
            CliError::Regime(_) => 3,
            CliError::CriteriaFailed { .. } => 4,
            CliError::Io { .. } | CliError::Table { .. } => 5,
        }
    }
}

impl From<SiltError> for CliError {
    fn from(e: SiltError) -> Self {
        match e {
            SiltError::Regime { .. } => CliError::Regime(e),
            SiltError::InvalidParameter(_)
            | SiltError::Domain(_)
            | SiltError::Range(_)
            | SiltError::OffGrid { .. }
            | SiltError::SizeCap { .. } => CliError::Config(e.to_string()),
            SiltError::NonConvergence(_) | SiltError::Embedding { .. } => CliError::Compute(e),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |e| CliError::Table { path: path.to_path_buf(), reason: e.to_string() }
}

/// Sizes the global rayon pool. Has no effect once the pool exists.
pub fn configure_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// First line of every table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub table: String,
    pub seed: u64,
    pub hurst: f64,
    pub dim: usize,
    pub grid: TimeGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicate: Option<usize>,
    pub config: RunConfig,
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn table_writer(path: &Path, meta: &TableMeta) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let line = serde_json::to_string(meta).expect("metadata serialises");
    writeln!(out, "# {line}").map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(out))
}

fn finish<W: Write>(path: &Path, writer: csv::Writer<W>) -> Result<(), CliError> {
    let mut inner = writer.into_inner().map_err(|e| CliError::Io { path: path.to_path_buf(), source: e.into_error() })?;
    inner.flush().map_err(io_err(path))
}

/// Reads the metadata line and the remaining CSV body of a table.
pub fn read_table(path: &Path) -> Result<(TableMeta, csv::Reader<BufReader<File>>), CliError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(io_err(path))?;
    let json = first
        .strip_prefix("# ")
        .ok_or_else(|| CliError::Table { path: path.to_path_buf(), reason: "missing metadata line".into() })?;
    let meta: TableMeta =
        serde_json::from_str(json.trim_end()).map_err(|e| CliError::Table { path: path.to_path_buf(), reason: e.to_string() })?;
    Ok((meta, csv::Reader::from_reader(reader)))
}

// ---------------------------------------------------------------------------
// constants

/// One row of the constants table; regime failures stay on the row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantRow {
    pub name: String,
    pub status: String,
    pub value: Option<f64>,
    pub error_estimate: Option<f64>,
    pub evals: Option<u64>,
    pub tail_bound: Option<f64>,
    pub method: String,
}

impl ConstantRow {
    fn from_quad(name: String, method: &str, res: fbm_silt::Result<QuadResult>) -> Self {
        match res {
            Ok(q) => Self {
                name,
                status: "ok".into(),
                value: Some(q.value),
                error_estimate: Some(q.error_estimate),
                evals: Some(q.evals),
                tail_bound: q.tail_bound,
                method: method.into(),
            },
            Err(e) => Self::failed(name, method, &e),
        }
    }

    fn failed(name: String, method: &str, e: &SiltError) -> Self {
        let status = match e {
            SiltError::Regime { .. } | SiltError::Range(_) => format!("not-applicable: {e}"),
            _ => format!("error: {e}"),
        };
        Self { name, status, value: None, error_estimate: None, evals: None, tail_bound: None, method: method.into() }
    }

    fn not_applicable(name: &str, method: &str, required: &str, regime: Regime) -> Self {
        let e = SiltError::Regime { required: required.into(), actual: regime };
        Self::failed(name.into(), method, &e)
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Tabulates every constant, marking rows outside their regime.
pub fn cmd_constants(cfg: &HurstConfig, spec: &QuadSpec, chaos_order: usize) -> Vec<ConstantRow> {
    let regime = cfg.regime();
    let mut rows = vec![ConstantRow::from_quad("sigma^2".into(), "sector cubature", sigma_squared(cfg, spec))];
    for q in 1..=chaos_order {
        rows.push(ConstantRow::from_quad(format!("sigma_{q}^2"), "sector cubature", sigma_q_squared(q, cfg, spec)));
    }
    rows.push(ConstantRow::from_quad("Lambda".into(), "1-D adaptive + tail series", lambda_const(cfg, spec)));
    if regime == Regime::Critical {
        rows.push(ConstantRow::from_quad("rho".into(), "1-D adaptive + tail series", rho_const(cfg.dim, spec)));
    } else {
        rows.push(ConstantRow::not_applicable("rho", "1-D adaptive + tail series", "Critical", regime));
    }
    rows.push(match c_h_const(cfg.hurst) {
        Ok(v) => ConstantRow {
            name: "c_H".into(),
            status: "ok".into(),
            value: Some(v),
            error_estimate: Some(0.0),
            evals: None,
            tail_bound: None,
            method: "closed form".into(),
        },
        Err(e) => ConstantRow::failed("c_H".into(), "closed form", &e),
    });
    rows
}

pub fn write_constants(dir: &Path, config: &RunConfig, rows: &[ConstantRow]) -> Result<PathBuf, CliError> {
    create_dir(dir)?;
    let path = dir.join(CONSTANTS_FILE);
    let grid = config.monte_carlo.grid(config.max_horizon())?;
    let meta = table_meta("constants", config, Command::Constants, grid, None);
    let mut w = table_writer(&path, &meta)?;
    for row in rows {
        w.serialize(row).map_err(csv_err(&path))?;
    }
    finish(&path, w)?;
    Ok(path)
}

fn table_meta(table: &str, config: &RunConfig, command: Command, grid: TimeGrid, replicate: Option<usize>) -> TableMeta {
    TableMeta {
        table: table.into(),
        seed: config.monte_carlo.base_seed,
        hurst: config.hurst.hurst,
        dim: config.hurst.dim,
        grid,
        replicate,
        config: config.recorded(command),
    }
}

// ---------------------------------------------------------------------------
// simulate

/// Path file name of replicate `r`.
pub fn path_file(r: usize) -> String {
    format!("path_{r:05}.csv")
}

/// Writes one `(n + 1) × (1 + d)` table per replicate: time then components.
pub fn cmd_simulate(config: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let grid = config.monte_carlo.grid(config.max_horizon())?;
    let gen = FbmGenerator::new(grid, config.hurst, config.monte_carlo.backend)?;
    let dir = dir.join(PATHS_DIR);
    create_dir(&dir)?;
    let paths = replicate_map(&gen, config.monte_carlo.replicates, config.monte_carlo.base_seed, |_, p| p.values().to_vec());
    let d = config.hurst.dim;
    let header: Vec<String> = std::iter::once("t".to_string()).chain((0..d).map(|j| format!("b{j}"))).collect();
    let mut written = Vec::with_capacity(paths.len());
    for (r, values) in paths.iter().enumerate() {
        let path = dir.join(path_file(r));
        let mut meta = table_meta("path", config, Command::Simulate, grid, Some(r));
        meta.seed = derive_seed(config.monte_carlo.base_seed, r as u64);
        let mut w = table_writer(&path, &meta)?;
        w.write_record(&header).map_err(csv_err(&path))?;
        for (k, point) in values.chunks(d).enumerate() {
            let mut record = csv::ByteRecord::new();
            record.push_field(fmt_f64(grid.time(k)).as_bytes());
            for v in point {
                record.push_field(fmt_f64(*v).as_bytes());
            }
            w.write_byte_record(&record).map_err(csv_err(&path))?;
        }
        finish(&path, w)?;
        written.push(path);
    }
    Ok(written)
}

/// Shortest representation that parses back to the same bits.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Loads a path table written by [`cmd_simulate`].
pub fn read_path_csv(path: &Path) -> Result<FbmPath, CliError> {
    let (meta, mut reader) = read_table(path)?;
    let d = meta.dim;
    let mut values = Vec::with_capacity((meta.grid.steps + 1) * d);
    for record in reader.records() {
        let record = record.map_err(csv_err(path))?;
        if record.len() != d + 1 {
            return Err(CliError::Table { path: path.to_path_buf(), reason: format!("expected {} columns", d + 1) });
        }
        for field in record.iter().skip(1) {
            let v: f64 =
                field.parse().map_err(|_| CliError::Table { path: path.to_path_buf(), reason: format!("bad number {field:?}") })?;
            values.push(v);
        }
    }
    let cfg = HurstConfig::new(meta.hurst, d)?;
    Ok(FbmPath::from_values(meta.grid, cfg, values)?)
}

// ---------------------------------------------------------------------------
// estimate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub replicate: usize,
    pub eps: f64,
    pub horizon: f64,
    pub value: f64,
}

/// Samples `I_T^ε`; rows are ordered by replicate, then ε, then horizon.
pub fn estimate_rows(config: &RunConfig) -> Result<(TimeGrid, Vec<EstimateRow>), CliError> {
    let samples = sample_silt(&config.hurst, &config.monte_carlo, &config.horizons)?;
    let grid = samples[0].grid;
    let mut rows = Vec::with_capacity(config.monte_carlo.replicates * samples.len() * config.horizons.len());
    for r in 0..config.monte_carlo.replicates {
        for s in &samples {
            for (h, &horizon) in s.horizons.iter().enumerate() {
                rows.push(EstimateRow { replicate: r, eps: s.eps, horizon, value: s.values[r][h] });
            }
        }
    }
    Ok((grid, rows))
}

fn write_estimates(path: &Path, table: &str, command: Command, config: &RunConfig, grid: TimeGrid, rows: &[EstimateRow]) -> Result<(), CliError> {
    let meta = table_meta(table, config, command, grid, None);
    let mut w = table_writer(path, &meta)?;
    w.write_record(["replicate", "eps", "horizon", "value"]).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&[row.replicate.to_string(), fmt_f64(row.eps), fmt_f64(row.horizon), fmt_f64(row.value)])
            .map_err(csv_err(path))?;
    }
    finish(path, w)
}

pub fn cmd_estimate(config: &RunConfig, dir: &Path) -> Result<PathBuf, CliError> {
    let (grid, rows) = estimate_rows(config)?;
    create_dir(dir)?;
    let path = dir.join(ESTIMATES_FILE);
    write_estimates(&path, "estimates", Command::Estimate, config, grid, &rows)?;
    Ok(path)
}

pub fn read_estimates(path: &Path) -> Result<(TableMeta, Vec<EstimateRow>), CliError> {
    let (meta, mut reader) = read_table(path)?;
    let rows = reader.deserialize().collect::<Result<Vec<EstimateRow>, _>>().map_err(csv_err(path))?;
    Ok((meta, rows))
}

// ---------------------------------------------------------------------------
// verify

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: RunConfig,
    pub passed: bool,
    pub result: ExperimentResult,
}

/// Runs the experiment of the configured regime.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentResult, CliError> {
    let (cfg, mc, hz, spec) = (&config.hurst, &config.monte_carlo, &config.horizons, &config.quadrature);
    let result = match cfg.regime() {
        Regime::Subcritical => run_subcritical(cfg, mc, hz, spec)?,
        Regime::Critical => run_critical_log(cfg, mc, hz, spec)?,
        Regime::Supercritical => run_supercritical(cfg, mc, hz, spec, config.hermite.as_ref())?,
        other => {
            return Err(CliError::Regime(SiltError::Regime {
                required: "Subcritical, Critical or Supercritical".into(),
                actual: other,
            }))
        }
    };
    Ok(result)
}

/// Writes report, criteria and sample tables; fails with exit code 4 when a criterion fails.
pub fn cmd_verify(config: &RunConfig, dir: &Path) -> Result<VerifyReport, CliError> {
    let result = run_experiment(config)?;
    let (grid, rows) = estimate_rows(config)?;
    create_dir(dir)?;
    write_estimates(&dir.join(SAMPLES_FILE), "samples", Command::Verify, config, grid, &rows)?;

    let criteria_path = dir.join(CRITERIA_FILE);
    let mut w = table_writer(&criteria_path, &table_meta("criteria", config, Command::Verify, result.grid, None))?;
    for c in &result.criteria {
        w.serialize(c).map_err(csv_err(&criteria_path))?;
    }
    finish(&criteria_path, w)?;

    let report = VerifyReport { config: config.recorded(Command::Verify), passed: result.passed(), result };
    let report_path = dir.join(REPORT_FILE);
    let text = serde_json::to_string_pretty(&report).expect("report serialises");
    fs::write(&report_path, text + "\n").map_err(io_err(&report_path))?;
    Ok(report)
}

/// Counts failing acceptance criteria.
pub fn acceptance_failures(result: &ExperimentResult) -> (usize, usize) {
    use fbm_silt::verify::CriterionKind;
    let acc: Vec<_> = result.criteria.iter().filter(|c| c.kind == CriterionKind::Acceptance).collect();
    (acc.iter().filter(|c| !c.passed).count(), acc.len())
}

// ---------------------------------------------------------------------------
// report

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub eps: f64,
    pub horizon: f64,
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub normality_p: f64,
}

/// Per `(ε, horizon)` moment summary of an estimates table.
pub fn summarize(rows: &[EstimateRow]) -> Result<Vec<SummaryRow>, CliError> {
    let mut keys: Vec<(f64, f64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|k| k.0 == r.eps && k.1 == r.horizon) {
            keys.push((r.eps, r.horizon));
        }
    }
    keys.into_iter()
        .map(|(eps, horizon)| {
            let sample: Vec<f64> = rows.iter().filter(|r| r.eps == eps && r.horizon == horizon).map(|r| r.value).collect();
            let s = StatReport::from_sample(&sample)?;
            Ok(SummaryRow {
                eps,
                horizon,
                n: s.n,
                mean: s.mean,
                variance: s.variance,
                skewness: s.skewness,
                excess_kurtosis: s.excess_kurtosis,
                normality_p: s.normality_p,
            })
        })
        .collect()
}

/// Human-readable lines for a report directory; writes `summary.csv` when estimates exist.
pub fn cmd_report(dir: &Path) -> Result<Vec<String>, CliError> {
    let mut lines = Vec::new();
    let report_path = dir.join(REPORT_FILE);
    let estimates_path = dir.join(ESTIMATES_FILE);
    let mut found = false;
    if report_path.exists() {
        found = true;
        let text = fs::read_to_string(&report_path).map_err(io_err(&report_path))?;
        let report: VerifyReport =
            serde_json::from_str(&text).map_err(|e| CliError::Table { path: report_path.clone(), reason: e.to_string() })?;
        lines.push(format!(
            "{} (H = {}, d = {}): {}",
            report.result.experiment,
            report.config.hurst.hurst,
            report.config.hurst.dim,
            if report.passed { "PASS" } else { "FAIL" }
        ));
        for c in &report.result.criteria {
            lines.push(format!(
                "  [{}] {:?} {}: observed {:.6e}, target {:.6e}, {} (tol {:.3e})",
                if c.passed { "pass" } else { "FAIL" },
                c.kind,
                c.name,
                c.observed,
                c.target,
                c.rule,
                c.tolerance
            ));
        }
    }
    if estimates_path.exists() {
        found = true;
        let (meta, rows) = read_estimates(&estimates_path)?;
        let summary = summarize(&rows)?;
        let path = dir.join(SUMMARY_FILE);
        let mut w = table_writer(&path, &TableMeta { table: "summary".into(), ..meta })?;
        for row in &summary {
            lines.push(format!(
                "eps {:e}, T {}: mean {:.6e}, var {:.6e}, skew {:.3}, kurt {:.3}, AD p {:.3}",
                row.eps, row.horizon, row.mean, row.variance, row.skewness, row.excess_kurtosis, row.normality_p
            ));
            w.serialize(row).map_err(csv_err(&path))?;
        }
        finish(&path, w)?;
    }
    if !found {
        return Err(CliError::Io {
            path: dir.to_path_buf(),
            source: io::Error::new(io::ErrorKind::NotFound, format!("neither {REPORT_FILE} nor {ESTIMATES_FILE} present")),
        });
    }
    Ok(lines)
}
