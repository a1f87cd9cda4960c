//! CSV ingestion, experiment configuration and the benchmark sweep.
//!
//! A sweep runs one cell per (smoothness, seed) pair. Each cell draws its own
//! workload and mechanism randomness from streams keyed by that pair, so
//! results do not depend on scheduling. A failing cell is recorded and the
//! sweep carries on.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{normalize_dataset, Dataset, Stage};
use crate::error::{Error, Result};
use crate::mechanism::{
    error_diagnostics, run_accelerated, run_full, AcceleratedConfig, DiagnosticsReport, MechanismOptions,
    Release, Smoothness, SubsetSource,
};
use crate::noise::gaussian_sample;
use crate::params::{MechanismParams, Mode, PrivacyBudget};
use crate::queries::{error_metrics, evaluate_query, random_queries, GaussianKernelQuery, WeightScheme};
use crate::rng::{stream, subseed};

pub const SCHEMA_VERSION: u32 = 1;

/// A CSV column, by zero-based position or by header name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

/// Reads selected numeric columns of a CSV file as a raw dataset.
///
/// The first row is taken as a header when any of its cells fails to parse
/// as a number. `columns = None` selects every column.
pub fn load_csv(path: &Path, columns: Option<&[Column]>) -> Result<Dataset> {
    if columns.is_some_and(|c| c.is_empty()) {
        return Err(Error::Config("empty column selection".into()));
    }
    let csv_err = |line: u64, message: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(0, e.to_string()))?;
    let mut records = reader.records();
    let first = match records.next() {
        Some(r) => r.map_err(|e| csv_err(line_of(&e), e.to_string()))?,
        None => return Err(Error::EmptyDataset),
    };
    let has_header = first.iter().any(|c| c.parse::<f64>().is_err());
    let width = first.len();
    let header: Option<Vec<String>> = has_header.then(|| first.iter().map(str::to_owned).collect());
    let selected: Vec<usize> = match columns {
        None => (0..width).collect(),
        Some(cols) => cols
            .iter()
            .map(|c| match c {
                Column::Index(i) if *i < width => Ok(*i),
                Column::Index(i) => Err(Error::Config(format!(
                    "column {i} is out of range for {width} columns"
                ))),
                Column::Name(name) => header
                    .as_ref()
                    .and_then(|h| h.iter().position(|x| x == name))
                    .ok_or_else(|| Error::Config(format!("no column named {name:?}"))),
            })
            .collect::<Result<_>>()?,
    };
    let mut coords = Vec::new();
    let mut push_row = |rec: &csv::StringRecord, line: u64| -> Result<()> {
        if rec.len() != width {
            return Err(csv_err(line, format!("expected {width} fields, found {}", rec.len())));
        }
        for &i in &selected {
            let cell = &rec[i];
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| csv_err(line, format!("column {i}: {cell:?} is not a finite number")))?;
            coords.push(v);
        }
        Ok(())
    };
    if !has_header {
        push_row(&first, 1)?;
    }
    for rec in records {
        let rec = rec.map_err(|e| csv_err(line_of(&e), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        push_row(&rec, line)?;
    }
    if coords.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::new(coords, selected.len(), Stage::Raw)
}

fn line_of(e: &csv::Error) -> u64 {
    e.position().map_or(0, |p| p.line())
}

/// Writes one point per row, comma separated, shortest round-trip floats, no
/// header.
pub fn write_points<W: Write>(data: &Dataset, out: W) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    for p in data.points() {
        let mut first = true;
        for v in p {
            if !first {
                out.write_all(b",")?;
            }
            write!(out, "{v}")?;
            first = false;
        }
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Correlated data clipped to the cube: a few Gaussian latent factors with
/// random loadings plus small independent noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    #[serde(default = "default_latent")]
    pub latent_dim: usize,
    /// Standard deviation of each latent factor.
    #[serde(default = "default_latent_scale")]
    pub latent_scale: f64,
    /// Standard deviation of the independent per-coordinate noise.
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_latent() -> usize {
    1
}
fn default_latent_scale() -> f64 {
    0.4
}
fn default_noise() -> f64 {
    0.05
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.n == 0 || spec.d == 0 || spec.latent_dim == 0 {
        return Err(Error::param("n, d and latent_dim must be positive"));
    }
    if !(spec.latent_scale >= 0.0) || !(spec.noise >= 0.0) {
        return Err(Error::param("scales must be nonnegative"));
    }
    let mut rng = stream(spec.seed, "synthetic-data", 0);
    // loadings in +-[0.5, 1]
    let loadings: Vec<Vec<f64>> = (0..spec.latent_dim)
        .map(|_| {
            (0..spec.d)
                .map(|_| {
                    let m = rng.random_range(0.5..=1.0);
                    if rng.random::<bool>() {
                        m
                    } else {
                        -m
                    }
                })
                .collect()
        })
        .collect();
    let mut coords = Vec::with_capacity(spec.n * spec.d);
    for _ in 0..spec.n {
        let z: Vec<f64> = (0..spec.latent_dim)
            .map(|_| gaussian_sample(spec.latent_scale, &mut rng))
            .collect();
        for i in 0..spec.d {
            let v: f64 = z.iter().zip(&loadings).map(|(zl, l)| zl * l[i]).sum::<f64>()
                + gaussian_sample(spec.noise, &mut rng);
            coords.push(v.clamp(-1.0, 1.0));
        }
    }
    Dataset::new(coords, spec.d, Stage::Normalized)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        #[serde(default)]
        columns: Option<Vec<Column>>,
        /// Public attribute ranges; derived from the data (with a warning)
        /// when absent.
        #[serde(default)]
        ranges: Option<Vec<(f64, f64)>>,
    },
    Synthetic(SyntheticSpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubsetChoice {
    #[default]
    Pca,
    Uniform,
    /// No subset: the full-grid mechanism.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DataSource,
    /// Inferred from `delta` when absent.
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub delta: f64,
    /// Gaussian bandwidths to sweep.
    #[serde(default)]
    pub sigmas: Vec<f64>,
    /// Smoothness orders to sweep; the workload then uses bandwidth
    /// `sqrt(K)`.
    #[serde(default)]
    pub orders: Vec<u32>,
    #[serde(default)]
    pub subset: SubsetChoice,
    #[serde(default = "default_c")]
    pub c: u64,
    #[serde(default)]
    pub r: Option<u64>,
    #[serde(default)]
    pub pca_fraction: Option<f64>,
    #[serde(default = "default_queries")]
    pub queries: usize,
    #[serde(default = "default_j")]
    pub j: usize,
    #[serde(default)]
    pub weights: WeightScheme,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub m_max: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub mechanism: MechanismOptions,
}

fn default_epsilon() -> f64 {
    1.0
}
fn default_c() -> u64 {
    10_000
}
fn default_queries() -> usize {
    200
}
fn default_j() -> usize {
    10
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_jobs() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        // relative paths inside the config are relative to the config file
        if let Some(base) = path.parent() {
            if let DataSource::Csv { path: p, .. } = &mut cfg.dataset {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn budget(&self) -> Result<PrivacyBudget> {
        let b = match self.pca_fraction {
            Some(f) => PrivacyBudget::with_pca_fraction(self.epsilon, self.delta, f),
            None => PrivacyBudget::new(self.epsilon, self.delta),
        };
        b.map_err(|e| Error::Config(e.to_string()))
    }

    pub fn smoothness(&self) -> Vec<Smoothness> {
        if self.sigmas.is_empty() {
            self.orders.iter().map(|&k| Smoothness::Order(k)).collect()
        } else {
            self.sigmas.iter().map(|&s| Smoothness::GaussianBandwidth(s)).collect()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let budget = self.budget()?;
        if let Some(mode) = self.mode {
            if mode != budget.mode() {
                return bad("mode disagrees with delta: pure needs delta = 0, approx needs delta > 0");
            }
        }
        match (self.sigmas.is_empty(), self.orders.is_empty()) {
            (true, true) => return bad("give either sigmas or orders"),
            (false, false) => return bad("give sigmas or orders, not both"),
            _ => {}
        }
        if self.sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return bad("bandwidths must be positive");
        }
        if self.orders.contains(&0) {
            return bad("orders must be positive");
        }
        if self.c == 0 || self.queries == 0 || self.j == 0 || self.jobs == 0 {
            return bad("c, queries, j and jobs must be positive");
        }
        if self.r == Some(0) || self.m_max == Some(0) {
            return bad("r and m_max must be positive when given");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if let DataSource::Csv { columns: Some(c), .. } = &self.dataset {
            if c.is_empty() {
                return bad("empty column selection");
            }
        }
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.dataset {
            DataSource::Csv { path, columns, ranges } => {
                let raw = load_csv(path, columns.as_deref())?;
                normalize_dataset(&raw, ranges.as_deref())
            }
            DataSource::Synthetic(spec) => generate_synthetic(spec),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub smoothness: Smoothness,
    pub seed: u64,
    pub status: CellStatus,
    pub error: Option<String>,
    pub params: Option<MechanismParams>,
    pub m_formula: Option<u64>,
    pub m_realized: Option<u64>,
    pub support_size: Option<usize>,
    pub basis_count: Option<usize>,
    pub lp_objective: Option<f64>,
    pub lp_degraded: Option<bool>,
    pub noise_scale: Option<f64>,
    pub wall_clock_s: f64,
    /// Computed from the true moments; not private.
    pub diagnostics: Option<DiagnosticsReport>,
    pub worst_abs: Option<f64>,
    pub worst_rel: Option<f64>,
    pub median_rel: Option<f64>,
    pub mean_abs: Option<f64>,
    pub excluded: Option<usize>,
    pub query_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub smoothness: Smoothness,
    pub ok_cells: usize,
    pub failed_cells: usize,
    pub mean_worst_abs: Option<f64>,
    pub mean_worst_rel: Option<f64>,
    pub mean_median_rel: Option<f64>,
    pub mean_wall_clock_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsRow {
    pub smoothness: Smoothness,
    pub params: MechanismParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub d: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub params: Vec<ParamsRow>,
    pub cells: Vec<CellReport>,
    pub aggregate: Vec<AggregateRow>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn all_ok(&self) -> bool {
        self.cells.iter().all(|c| c.status == CellStatus::Ok)
    }
}

/// One finished cell, with the synthetic database kept for output.
pub struct CellOutcome {
    pub report: CellReport,
    pub synthetic: Option<Dataset>,
}

fn smoothness_key(s: Smoothness) -> u64 {
    match s {
        Smoothness::Order(k) => k as u64,
        Smoothness::GaussianBandwidth(sigma) => sigma.to_bits(),
    }
}

fn query_bandwidth(s: Smoothness) -> f64 {
    match s {
        Smoothness::Order(k) => (k as f64).sqrt(),
        Smoothness::GaussianBandwidth(sigma) => sigma,
    }
}

/// Root seed of the cell `(seed, smoothness)`.
pub fn cell_seed(seed: u64, s: Smoothness) -> u64 {
    let component = match s {
        Smoothness::Order(_) => "cell-order",
        Smoothness::GaussianBandwidth(_) => "cell-sigma",
    };
    subseed(seed, component, smoothness_key(s))
}

/// The workload of a cell.
pub fn cell_workload(cfg: &ExperimentConfig, d: usize, seed: u64, s: Smoothness) -> Result<Vec<GaussianKernelQuery>> {
    let mut rng = stream(cell_seed(seed, s), "queries", 0);
    random_queries(cfg.queries, cfg.j, d, query_bandwidth(s), cfg.weights, &mut rng)
}

/// Runs the mechanism of one cell.
pub fn cell_release(cfg: &ExperimentConfig, data: &Dataset, seed: u64, s: Smoothness) -> Result<Release> {
    let budget = cfg.budget()?;
    let mut opts = cfg.mechanism.clone();
    if cfg.m_max.is_some() {
        opts.m_max = cfg.m_max;
    }
    opts.keep_artifacts = true;
    let root = cell_seed(seed, s);
    let source = match cfg.subset {
        SubsetChoice::Pca => SubsetSource::PcaEllipsoid,
        SubsetChoice::Uniform => SubsetSource::UniformHypercube,
        SubsetChoice::Full => {
            let k = match s {
                Smoothness::Order(k) => k,
                Smoothness::GaussianBandwidth(sigma) => ((sigma * sigma).floor() as u32).max(1),
            };
            return run_full(data, k, &budget, &opts, root);
        }
    };
    let acc = AcceleratedConfig {
        smoothness: s,
        c: cfg.c,
        r_override: cfg.r,
        subset: source,
    };
    run_accelerated(data, &acc, &budget, &opts, root)
}

/// Answers every query on a database; queries are evaluated in parallel,
/// each with a fixed summation order.
pub fn answer_all(queries: &[GaussianKernelQuery], db: &Dataset) -> Result<Vec<f64>> {
    queries.par_iter().map(|q| evaluate_query(q, db)).collect()
}

fn run_cell(cfg: &ExperimentConfig, data: &Dataset, s: Smoothness, seed: u64) -> CellOutcome {
    let start = Instant::now();
    let mut report = CellReport {
        smoothness: s,
        seed,
        status: CellStatus::Failed,
        error: None,
        params: None,
        m_formula: None,
        m_realized: None,
        support_size: None,
        basis_count: None,
        lp_objective: None,
        lp_degraded: None,
        noise_scale: None,
        wall_clock_s: 0.0,
        diagnostics: None,
        worst_abs: None,
        worst_rel: None,
        median_rel: None,
        mean_abs: None,
        excluded: None,
        query_count: cfg.queries,
    };
    let result = (|| -> Result<Dataset> {
        let queries = cell_workload(cfg, data.dim(), seed, s)?;
        let release = cell_release(cfg, data, seed, s)?;
        let db = &release.database;
        report.params = Some(db.params);
        report.m_formula = Some(db.m_formula);
        report.m_realized = Some(db.points.len() as u64);
        report.support_size = Some(release.distribution.support().len());
        report.basis_count = Some(release.basis_count);
        report.lp_objective = Some(release.lp_objective);
        report.lp_degraded = Some(release.lp_degraded);
        report.noise_scale = Some(release.noise_scale);
        report.diagnostics = Some(error_diagnostics(&release)?);
        if db.points.is_empty() {
            return Err(Error::param("synthetic database is empty; raise m_max"));
        }
        let truth = answer_all(&queries, data)?;
        let synth = answer_all(&queries, &db.points)?;
        let err = error_metrics(&truth, &synth)?;
        report.worst_abs = Some(err.worst_abs);
        report.worst_rel = Some(err.worst_rel);
        report.median_rel = err.median_rel();
        report.mean_abs = Some(err.mean_abs());
        report.excluded = Some(err.excluded);
        Ok(release.database.points)
    })();
    report.wall_clock_s = start.elapsed().as_secs_f64();
    let synthetic = match result {
        Ok(points) => {
            report.status = CellStatus::Ok;
            Some(points)
        }
        Err(e) => {
            warn!("cell {s:?} seed {seed} failed: {e}");
            report.error = Some(e.to_string());
            None
        }
    };
    CellOutcome { report, synthetic }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Runs every cell and assembles the report. Nothing is written to disk.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<(Report, Vec<CellOutcome>)> {
    cfg.validate()?;
    let data = cfg.load_dataset()?;
    let mut warnings = Vec::new();
    if let DataSource::Csv { ranges: None, .. } = cfg.dataset {
        warnings.push("attribute ranges derived from the data; this is not covered by the privacy budget".into());
    }
    if cfg.subset != SubsetChoice::Full && data.dim() < 2 {
        warnings.push("subspace rank clamped to 1 for d < 2".into());
    }
    let smooth = cfg.smoothness();
    let cells: Vec<(Smoothness, u64)> = smooth
        .iter()
        .flat_map(|&s| cfg.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    info!("running {} cells on n = {}, d = {}", cells.len(), data.len(), data.dim());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let outcomes: Vec<CellOutcome> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(s, seed)| run_cell(cfg, &data, s, seed))
            .collect()
    });

    let mut params = Vec::new();
    let mut aggregate = Vec::new();
    for &s in &smooth {
        let rows: Vec<&CellReport> = outcomes
            .iter()
            .map(|o| &o.report)
            .filter(|r| r.smoothness == s)
            .collect();
        let ok: Vec<&&CellReport> = rows.iter().filter(|r| r.status == CellStatus::Ok).collect();
        if let Some(p) = rows.iter().find_map(|r| r.params) {
            params.push(ParamsRow { smoothness: s, params: p });
        }
        let pick = |f: fn(&CellReport) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
        aggregate.push(AggregateRow {
            smoothness: s,
            ok_cells: ok.len(),
            failed_cells: rows.len() - ok.len(),
            mean_worst_abs: mean(&pick(|r| r.worst_abs)),
            mean_worst_rel: mean(&pick(|r| r.worst_rel)),
            mean_median_rel: mean(&pick(|r| r.median_rel)),
            mean_wall_clock_s: mean(&pick(|r| Some(r.wall_clock_s))),
        });
    }
    let report = Report {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        dataset: DatasetSummary {
            n: data.len(),
            d: data.dim(),
        },
        params,
        cells: outcomes.iter().map(|o| o.report.clone()).collect(),
        aggregate,
        warnings,
    };
    Ok((report, outcomes))
}

fn cell_file_name(r: &CellReport) -> String {
    match r.smoothness {
        Smoothness::Order(k) => format!("order-{k}_seed-{}.csv", r.seed),
        Smoothness::GaussianBandwidth(s) => format!("sigma-{s}_seed-{}.csv", r.seed),
    }
}

/// Runs the sweep and writes `report.json`, `synthetic.csv` (the first
/// successful cell in sweep order) and one file per successful cell under
/// `synthetic/`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Report> {
    let (report, outcomes) = run_sweep(cfg)?;
    fs::create_dir_all(out_dir.join("synthetic"))?;
    let mut wrote_main = false;
    for o in &outcomes {
        if let Some(points) = &o.synthetic {
            if !wrote_main {
                write_points(points, fs::File::create(out_dir.join("synthetic.csv"))?)?;
                wrote_main = true;
            }
            let path = out_dir.join("synthetic").join(cell_file_name(&o.report));
            write_points(points, fs::File::create(path)?)?;
        }
    }
    let file = BufWriter::new(fs::File::create(out_dir.join("report.json"))?);
    write_report(&report, file)?;
    Ok(report)
}

/// Pretty JSON with every float written to 17 significant digits.
pub fn write_report<W: Write>(report: &Report, mut out: W) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigFigFormatter::default());
    report.serialize(&mut ser)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// `PrettyFormatter` with `{:.16e}` floats.
#[derive(Default)]
pub struct SigFigFormatter {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

impl serde_json::ser::Formatter for SigFigFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write!(w, "{:.16e}", v as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}
