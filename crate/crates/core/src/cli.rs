//! Experiment harness behind the `bilicut` binary: suite configuration,
//! method comparison runs, CSV and JSON output, plot data and the command
//! line itself.
//!
//! The results CSV carries no wall-clock values so reruns with the same seed
//! are byte-identical; runtimes go to a separate timings file.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cuts::theory::{
    box_grid, compare_addmc_saxmf, diagonal_grid, midpoint_gap, verify_theorem1, Theorem2Class,
};
use crate::driver::{
    relative_gap, run_method, upper_bound, GapReport, LoopConfig, LoopVariant, Method, MethodOutcome, Termination,
};
use crate::instances::{generate, BilinearInstance, GenParams};
use crate::linalg::DenseMatrix;
use crate::rng::Xoshiro256;

/// Exit code for a usage or configuration error.
pub const EXIT_USAGE: i32 = 1;
/// Exit code when at least one instance hit a numerical failure.
pub const EXIT_NUMERICAL: i32 = 2;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "BILICUT_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot parse config file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("suite CSV lacks columns: {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("malformed suite CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad value in column {column}: {value:?}")]
    BadValue { column: String, value: String },
}

/// What to run: the instance grid, the methods and the loop settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// `(n, m)` pairs.
    pub dims: Vec<(usize, usize)>,
    pub densities: Vec<f64>,
    /// Each fraction is used for both `Q` and `R`.
    pub rank_fractions: Vec<f64>,
    /// Base seed; instance seeds are drawn from it in grid order.
    pub seed: u64,
    pub methods: Vec<Method>,
    /// The variant field is replaced per method.
    pub loop_config: LoopConfig,
    /// Cutting-plane methods run only when `n` is at most this.
    pub loop_max_n: Option<usize>,
    pub upper_bound_starts: usize,
    /// Replace `Q` and `R` by zero after generation.
    pub zero_quadratics: bool,
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dims: vec![(20, 4), (20, 8), (20, 16), (20, 20), (100, 4), (100, 20), (100, 40), (100, 80)],
            densities: vec![0.5, 1.0],
            rank_fractions: vec![0.25, 0.5, 0.75, 1.0],
            seed: 1,
            methods: vec![Method::Smc, Method::Bmc, Method::BmcDisj, Method::BmcExtDisj],
            loop_config: LoopConfig::new(LoopVariant::ExtDisj),
            loop_max_n: Some(20),
            upper_bound_starts: 32,
            zero_quadratics: false,
            jobs: 1,
        }
    }
}

/// Config file contents; every key is optional and overrides the default.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    dims: Option<Vec<(usize, usize)>>,
    densities: Option<Vec<f64>>,
    rank_fractions: Option<Vec<f64>>,
    seed: Option<u64>,
    methods: Option<Vec<String>>,
    max_n_cuts: Option<usize>,
    max_cuts_per_round: Option<usize>,
    violation_threshold: Option<f64>,
    time_limit: Option<f64>,
    /// 0 removes the limit.
    loop_max_n: Option<usize>,
    upper_bound_starts: Option<usize>,
    zero_quadratics: Option<bool>,
    jobs: Option<usize>,
}

/// One generated instance of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub index: usize,
    pub params: GenParams,
}

impl ExperimentConfig {
    /// Applies the keys of a TOML config, for example
    ///
    /// ```toml
    /// dims = [[20, 4], [20, 8]]
    /// methods = ["B.Mc", "B.Mc.ExtDisj"]
    /// max_n_cuts = 10
    /// ```
    pub fn apply_toml(&mut self, text: &str) -> Result<(), ConfigError> {
        let file: ConfigFile = toml::from_str(text)?;
        if let Some(v) = file.dims {
            self.dims = v;
        }
        if let Some(v) = file.densities {
            self.densities = v;
        }
        if let Some(v) = file.rank_fractions {
            self.rank_fractions = v;
        }
        if let Some(v) = file.seed {
            self.seed = v;
        }
        if let Some(v) = file.methods {
            self.methods = parse_methods(&v)?;
        }
        if let Some(v) = file.max_n_cuts {
            self.loop_config.max_n_cuts = v;
        }
        if let Some(v) = file.max_cuts_per_round {
            self.loop_config.max_cuts_per_round = v;
        }
        if let Some(v) = file.violation_threshold {
            self.loop_config.violation_threshold = v;
        }
        if let Some(v) = file.time_limit {
            self.loop_config.time_limit = Some(v);
        }
        if let Some(v) = file.loop_max_n {
            self.loop_max_n = (v > 0).then_some(v);
        }
        if let Some(v) = file.upper_bound_starts {
            self.upper_bound_starts = v;
        }
        if let Some(v) = file.zero_quadratics {
            self.zero_quadratics = v;
        }
        if let Some(v) = file.jobs {
            self.jobs = v;
        }
        Ok(())
    }

    /// Replaces the seed with `BILICUT_SEED` when it is set.
    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        match std::env::var(SEED_ENV) {
            Ok(s) => {
                self.seed = s
                    .trim()
                    .parse()
                    .map_err(|_| ConfigError::Invalid(format!("{SEED_ENV}={s:?} is not an unsigned integer")))?;
                Ok(())
            }
            Err(std::env::VarError::NotPresent) => Ok(()),
            Err(e) => Err(ConfigError::Invalid(format!("{SEED_ENV}: {e}"))),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.dims.is_empty() || self.densities.is_empty() || self.rank_fractions.is_empty() {
            return bad("dims, densities and rank_fractions must be non-empty");
        }
        if self.dims.iter().any(|&(n, m)| n == 0 || m == 0) {
            return bad("dimensions must be positive");
        }
        if self.densities.iter().chain(&self.rank_fractions).any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return bad("densities and rank fractions must lie in (0, 1]");
        }
        if self.methods.is_empty() {
            return bad("at least one method is required");
        }
        if self.upper_bound_starts == 0 || self.jobs == 0 {
            return bad("upper_bound_starts and jobs must be at least 1");
        }
        self.loop_config.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// The instance grid: dims, then densities, then rank fractions.
    pub fn instances(&self) -> Vec<InstanceSpec> {
        let mut rng = Xoshiro256::seed_from_u64(self.seed);
        let mut out = Vec::new();
        for &(n, m) in &self.dims {
            for &density_a in &self.densities {
                for &rank in &self.rank_fractions {
                    let params =
                        GenParams { n, m, density_a, rank_frac_q: rank, rank_frac_r: rank, seed: rng.next_u64() };
                    out.push(InstanceSpec { index: out.len(), params });
                }
            }
        }
        out
    }

    pub fn build_instance(&self, spec: &InstanceSpec) -> Result<BilinearInstance, String> {
        let inst = generate(&spec.params).map_err(|e| e.to_string())?;
        Ok(if self.zero_quadratics { inst.without_quadratics() } else { inst })
    }

    fn runs_method(&self, method: Method, n: usize) -> bool {
        method.loop_variant().is_none() || self.loop_max_n.is_none_or(|cap| n <= cap)
    }
}

pub fn parse_methods<S: AsRef<str>>(names: &[S]) -> Result<Vec<Method>, ConfigError> {
    names.iter().map(|s| s.as_ref().parse::<Method>().map_err(ConfigError::Invalid)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RowStatus {
    Ok,
    /// A loop stopped on a solver failure; the bound is from the last good solve.
    Partial,
    Failed,
    /// Not run under the configuration (loop above `loop_max_n`).
    Skipped,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Partial => "partial",
            RowStatus::Failed => "failed",
            RowStatus::Skipped => "skipped",
        }
    }

    pub fn is_numerical_failure(self) -> bool {
        matches!(self, RowStatus::Partial | RowStatus::Failed)
    }
}

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub n: usize,
    pub m: usize,
    pub density: f64,
    pub rank_q: f64,
    pub rank_r: f64,
    pub seed: u64,
    pub method: Method,
    pub status: RowStatus,
    pub lb: Option<f64>,
    pub z_bar: Option<f64>,
    pub relative_gap: Option<f64>,
    /// `|z_bar|` fell under the relative-gap guard.
    pub degenerate: bool,
    pub cuts_added: Option<usize>,
    pub gap_closed: Option<f64>,
    pub termination: Option<Termination>,
}

/// Fixed column order of the results CSV.
pub const CSV_COLUMNS: [&str; 15] = [
    "n",
    "m",
    "density",
    "rank_q",
    "rank_r",
    "seed",
    "method",
    "status",
    "lb",
    "z_bar",
    "relative_gap_pct",
    "degenerate",
    "cuts_added",
    "gap_closed_pct",
    "termination",
];

fn num(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => x.to_string(),
        _ => "NA".into(),
    }
}

impl SuiteRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.m.to_string(),
            self.density.to_string(),
            self.rank_q.to_string(),
            self.rank_r.to_string(),
            self.seed.to_string(),
            self.method.name().to_string(),
            self.status.as_str().to_string(),
            num(self.lb),
            num(self.z_bar),
            num(self.relative_gap),
            self.degenerate.to_string(),
            self.cuts_added.map_or("NA".into(), |c| c.to_string()),
            num(self.gap_closed),
            self.termination.map_or("NA".into(), |t| format!("{t:?}")),
        ]
    }

    fn sort_key(&self) -> impl Ord {
        (
            self.n,
            self.m,
            self.density.to_bits(),
            self.rank_q.to_bits(),
            self.rank_r.to_bits(),
            self.seed,
            self.method,
        )
    }
}

/// Everything recorded for one instance; the JSON trace archive is a list of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub spec: InstanceSpec,
    pub zero_quadratics: bool,
    pub z_bar: f64,
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
    pub upper_bound_seconds: f64,
    pub outcomes: Vec<MethodOutcome>,
    /// Set when the instance could not be generated.
    pub error: Option<String>,
}

impl InstanceRecord {
    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome> {
        self.outcomes.iter().find(|o| o.method == method)
    }
}

/// Runs every configured method on one instance.
pub fn run_instance(config: &ExperimentConfig, spec: &InstanceSpec) -> InstanceRecord {
    let mut record = InstanceRecord {
        spec: *spec,
        zero_quadratics: config.zero_quadratics,
        z_bar: f64::NAN,
        x_star: Vec::new(),
        y_star: Vec::new(),
        upper_bound_seconds: 0.0,
        outcomes: Vec::new(),
        error: None,
    };
    let inst = match config.build_instance(spec) {
        Ok(i) => i,
        Err(e) => {
            record.error = Some(e);
            return record;
        }
    };
    let t = Instant::now();
    let ub = upper_bound(&inst, config.upper_bound_starts, spec.params.seed);
    record.upper_bound_seconds = t.elapsed().as_secs_f64();
    record.z_bar = ub.z_bar;
    record.x_star = ub.x;
    record.y_star = ub.y;
    for &method in &config.methods {
        if config.runs_method(method, spec.params.n) {
            record.outcomes.push(run_method(&inst, method, &config.loop_config));
        }
    }
    record
}

fn rows_of(config: &ExperimentConfig, record: &InstanceRecord) -> Vec<SuiteRow> {
    let p = &record.spec.params;
    let report = GapReport::new(record.z_bar, &record.outcomes);
    config
        .methods
        .iter()
        .map(|&method| {
            let mut row = SuiteRow {
                n: p.n,
                m: p.m,
                density: p.density_a,
                rank_q: p.rank_frac_q,
                rank_r: p.rank_frac_r,
                seed: p.seed,
                method,
                status: RowStatus::Skipped,
                lb: None,
                z_bar: record.z_bar.is_finite().then_some(record.z_bar),
                relative_gap: None,
                degenerate: false,
                cuts_added: None,
                gap_closed: None,
                termination: None,
            };
            if record.error.is_some() {
                row.status = RowStatus::Failed;
                return row;
            }
            let Some(outcome) = record.outcome(method) else {
                return row;
            };
            let entry = report.entries.iter().find(|e| e.method == method);
            row.termination = outcome.termination;
            row.cuts_added = outcome.termination.map(|_| outcome.cuts_added);
            row.status = if outcome.error.is_some() || !outcome.lb.is_finite() {
                RowStatus::Failed
            } else if outcome.termination == Some(Termination::SolverFailure) {
                RowStatus::Partial
            } else {
                RowStatus::Ok
            };
            if row.status != RowStatus::Failed {
                row.lb = Some(outcome.lb);
                if let Some(e) = entry {
                    row.relative_gap = Some(e.relative_gap.percent);
                    row.degenerate = e.relative_gap.degenerate;
                    row.gap_closed = e.gap_closed;
                }
            }
            row
        })
        .collect()
}

/// Result of a suite run: sorted rows plus the per-instance records.
#[derive(Debug, Clone)]
pub struct SuiteOutput {
    pub config: ExperimentConfig,
    pub rows: Vec<SuiteRow>,
    pub records: Vec<InstanceRecord>,
}

/// Runs the configured grid on `config.jobs` threads. Results do not
/// depend on the thread count.
pub fn run_suite(config: &ExperimentConfig) -> Result<SuiteOutput, ConfigError> {
    run_suite_with(config, &|_, _, _| {})
}

/// As [`run_suite`], calling `progress(done, total, record)` after each instance.
pub fn run_suite_with(
    config: &ExperimentConfig,
    progress: &(dyn Fn(usize, usize, &InstanceRecord) + Sync),
) -> Result<SuiteOutput, ConfigError> {
    config.validate()?;
    let specs = config.instances();
    let total = specs.len();
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<InstanceRecord>>> = Mutex::new(vec![None; total]);
    std::thread::scope(|s| {
        for _ in 0..config.jobs.min(total.max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= total {
                    break;
                }
                let record = run_instance(config, &specs[k]);
                let d = done.fetch_add(1, Ordering::Relaxed) + 1;
                progress(d, total, &record);
                slots.lock().expect("no worker panicked while holding the lock")[k] = Some(record);
            });
        }
    });
    let records: Vec<InstanceRecord> = slots
        .into_inner()
        .expect("no worker panicked while holding the lock")
        .into_iter()
        .map(|r| r.expect("every instance ran"))
        .collect();
    let mut rows: Vec<SuiteRow> = records.iter().flat_map(|r| rows_of(config, r)).collect();
    rows.sort_by_cached_key(|r| r.sort_key());
    Ok(SuiteOutput { config: config.clone(), rows, records })
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Columns of the aggregates CSV.
pub const AGGREGATE_COLUMNS: [&str; 10] = [
    "grouping",
    "n",
    "m",
    "key",
    "method",
    "instances",
    "with_bound",
    "mean_relative_gap_pct",
    "mean_gap_closed_pct",
    "mean_cuts",
];

impl SuiteOutput {
    pub fn has_numerical_failure(&self) -> bool {
        self.rows.iter().any(|r| r.status.is_numerical_failure())
    }

    pub fn csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS).expect("writing to memory");
        for r in &self.rows {
            w.write_record(r.fields()).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("writing to memory")).expect("CSV fields are UTF-8")
    }

    /// Means per `(n, m)` ("size"), per rank pair ("rank") and per density
    /// ("density"), each per method. Degenerate gaps are left out of the means.
    pub fn aggregates_csv(&self) -> String {
        let mut groups: BTreeMap<(u8, usize, usize, String, Method), Vec<&SuiteRow>> = BTreeMap::new();
        for r in &self.rows {
            groups.entry((0, r.n, r.m, "all".into(), r.method)).or_default().push(r);
            groups.entry((1, r.n, r.m, format!("{}/{}", r.rank_q, r.rank_r), r.method)).or_default().push(r);
            groups.entry((2, r.n, r.m, r.density.to_string(), r.method)).or_default().push(r);
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(AGGREGATE_COLUMNS).expect("writing to memory");
        for ((kind, n, m, key, method), rows) in groups {
            let bounded: Vec<&&SuiteRow> = rows.iter().filter(|r| r.lb.is_some()).collect();
            let gaps: Vec<f64> =
                bounded.iter().filter(|r| !r.degenerate).filter_map(|r| r.relative_gap).collect();
            let closed: Vec<f64> = bounded.iter().filter_map(|r| r.gap_closed).collect();
            let cuts: Vec<f64> = bounded.iter().filter_map(|r| r.cuts_added.map(|c| c as f64)).collect();
            w.write_record([
                ["size", "rank", "density"][kind as usize].to_string(),
                n.to_string(),
                m.to_string(),
                key,
                method.name().to_string(),
                rows.len().to_string(),
                bounded.len().to_string(),
                num(mean(&gaps)),
                num(mean(&closed)),
                num(mean(&cuts)),
            ])
            .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("writing to memory")).expect("CSV fields are UTF-8")
    }

    /// Wall-clock seconds per instance and method, upper bound included.
    pub fn timings_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["n", "m", "density", "rank_q", "rank_r", "seed", "method", "seconds"])
            .expect("writing to memory");
        for rec in &self.records {
            let p = &rec.spec.params;
            let key = [p.n.to_string(), p.m.to_string(), p.density_a.to_string(), p.rank_frac_q.to_string(), p.rank_frac_r.to_string(), p.seed.to_string()];
            let mut write = |name: &str, secs: f64| {
                let mut rec: Vec<String> = key.to_vec();
                rec.push(name.to_string());
                rec.push(format!("{secs:.3}"));
                w.write_record(rec).expect("writing to memory");
            };
            write("upper_bound", rec.upper_bound_seconds);
            for o in &rec.outcomes {
                write(o.method.name(), o.seconds);
            }
        }
        String::from_utf8(w.into_inner().expect("writing to memory")).expect("CSV fields are UTF-8")
    }

    pub fn traces_json(&self) -> String {
        serde_json::to_string(&self.records).expect("records serialize")
    }

    /// Writes `results.csv`, `aggregates.csv`, `timings.csv`, `traces.json`
    /// and `config.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("results.csv"), self.csv())?;
        std::fs::write(dir.join("aggregates.csv"), self.aggregates_csv())?;
        std::fs::write(dir.join("timings.csv"), self.timings_csv())?;
        std::fs::write(dir.join("traces.json"), self.traces_json())?;
        std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(&self.config).expect("config serializes"))
    }
}

/// One file of plot data.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotFile {
    pub name: String,
    pub contents: String,
}

/// Mean relative gap of one bar.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    /// "rank" or "density".
    pub panel: &'static str,
    pub key: String,
    pub method: String,
    pub mean_gap: Option<f64>,
    pub count: usize,
}

const PLOT_COLUMNS: [&str; 7] = ["n", "m", "density", "rank_q", "rank_r", "method", "relative_gap_pct"];

/// Groups a results CSV by `(n, m)`: one `gaps_n{n}_m{m}.csv` per size with
/// the gap against the rank pair and against the density, per method, and
/// with `svg` a matching bar chart.
pub fn emit_plot_data(csv_text: &str, svg: bool) -> Result<Vec<PlotFile>, PlotError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(csv_text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let missing: Vec<String> = PLOT_COLUMNS.iter().filter(|c| col(c).is_none()).map(|c| c.to_string()).collect();
    if !missing.is_empty() {
        return Err(PlotError::MissingColumns(missing));
    }
    let idx: Vec<usize> = PLOT_COLUMNS.iter().map(|c| col(c).expect("checked above")).collect();
    let degenerate = col("degenerate");

    // (n, m) -> (panel, key, method) -> gaps; methods keep first-seen order
    let mut sizes: BTreeMap<(usize, usize), BTreeMap<(u8, String, usize), Vec<f64>>> = BTreeMap::new();
    let mut methods: Vec<String> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let field = |k: usize| rec.get(idx[k]).unwrap_or("").trim().to_string();
        let parse_usize = |k: usize| {
            field(k).parse::<usize>().map_err(|_| PlotError::BadValue { column: PLOT_COLUMNS[k].into(), value: field(k) })
        };
        let (n, m) = (parse_usize(0)?, parse_usize(1)?);
        let method = field(5);
        let mi = match methods.iter().position(|x| *x == method) {
            Some(i) => i,
            None => {
                methods.push(method);
                methods.len() - 1
            }
        };
        let gap_text = field(6);
        let gap = match gap_text.as_str() {
            "NA" | "" => None,
            t => Some(t.parse::<f64>().map_err(|_| PlotError::BadValue { column: PLOT_COLUMNS[6].into(), value: gap_text.clone() })?),
        };
        let is_degenerate = degenerate.and_then(|d| rec.get(d)).is_some_and(|v| v.trim() == "true");
        let groups = sizes.entry((n, m)).or_default();
        for key in [(0u8, format!("{}/{}", field(3), field(4)), mi), (1u8, field(2), mi)] {
            let bucket = groups.entry(key).or_default();
            if let Some(g) = gap.filter(|g| g.is_finite() && !is_degenerate) {
                bucket.push(g);
            }
        }
    }

    let mut files = Vec::new();
    for ((n, m), groups) in sizes {
        let points: Vec<PlotPoint> = groups
            .into_iter()
            .map(|((panel, key, mi), gaps)| PlotPoint {
                panel: ["rank", "density"][panel as usize],
                key,
                method: methods[mi].clone(),
                mean_gap: mean(&gaps),
                count: gaps.len(),
            })
            .collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["panel", "key", "method", "mean_relative_gap_pct", "count"])?;
        for p in &points {
            w.write_record([p.panel, &p.key, &p.method, &num(p.mean_gap), &p.count.to_string()])?;
        }
        let data = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("CSV fields are UTF-8");
        files.push(PlotFile { name: format!("gaps_n{n}_m{m}.csv"), contents: data });
        if svg {
            files.push(PlotFile { name: format!("gaps_n{n}_m{m}.svg"), contents: bar_chart_svg(n, m, &points, &methods) });
        }
    }
    Ok(files)
}

const PALETTE: [&str; 6] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#b07aa1"];

/// Two grouped bar panels: gap against rank pair (left) and density (right).
fn bar_chart_svg(n: usize, m: usize, points: &[PlotPoint], methods: &[String]) -> String {
    let (panel_w, panel_h, margin) = (360.0, 240.0, 50.0);
    let width = 2.0 * panel_w + 3.0 * margin;
    let height = panel_h + 2.0 * margin + 20.0 * methods.len() as f64;
    let top = points.iter().filter_map(|p| p.mean_gap).fold(0.0_f64, f64::max).max(1e-12);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">Relative gap (%), n={n}, m={m}</text>"#, width / 2.0);
    for (pi, panel) in ["rank", "density"].iter().enumerate() {
        let x0 = margin + pi as f64 * (panel_w + margin);
        let y0 = margin;
        let mut keys: Vec<&str> = Vec::new();
        for p in points.iter().filter(|p| p.panel == *panel) {
            if !keys.contains(&p.key.as_str()) {
                keys.push(&p.key);
            }
        }
        let _ = writeln!(s, r#"<rect x="{x0}" y="{y0}" width="{panel_w}" height="{panel_h}" fill="none" stroke="black"/>"#);
        let title = if *panel == "rank" { "(rank(Q), rank(R)) fraction" } else { "density(A)" };
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{title}</text>"#, x0 + panel_w / 2.0, y0 + panel_h + 32.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{top:.3}</text>"#, x0 - 4.0, y0 + 10.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">0</text>"#, x0 - 4.0, y0 + panel_h);
        let slot = panel_w / keys.len().max(1) as f64;
        let bar = slot * 0.8 / methods.len().max(1) as f64;
        for (ki, key) in keys.iter().enumerate() {
            let kx = x0 + ki as f64 * slot;
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{key}</text>"#, kx + slot / 2.0, y0 + panel_h + 15.0);
            for (mi, method) in methods.iter().enumerate() {
                let Some(g) = points.iter().find(|p| p.panel == *panel && p.key == *key && p.method == *method).and_then(|p| p.mean_gap) else {
                    continue;
                };
                let h = (g.max(0.0) / top) * (panel_h - 12.0);
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"><title>{method}: {g:.4}</title></rect>"#,
                    kx + slot * 0.1 + mi as f64 * bar,
                    y0 + panel_h - h,
                    bar,
                    h,
                    PALETTE[mi % PALETTE.len()]
                );
            }
        }
    }
    for (mi, method) in methods.iter().enumerate() {
        let y = panel_h + margin + 45.0 + 20.0 * mi as f64;
        let _ = writeln!(s, r#"<rect x="{margin}" y="{}" width="12" height="12" fill="{}"/>"#, y - 10.0, PALETTE[mi % PALETTE.len()]);
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{method}</text>"#, margin + 18.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Outcome of the theorem property suites.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub theorem1_samples: usize,
    /// Samples where the symmetric inequality held.
    pub theorem1_symmetric_held: usize,
    pub theorem1_falsified: usize,
    pub theorem1_max_chain: f64,
    /// Largest `|addmc - saxmf|` on the diagonal, equal-bound draws.
    pub diagonal_max_diff: f64,
    /// Largest `saxmf - addmc` on the box grid, equal-width draws.
    pub equal_width_max_excess: f64,
    /// Largest deviation of the midpoint gap from its closed form.
    pub midpoint_max_error: f64,
    pub unequal_incomparable: usize,
    pub theorem2_draws: usize,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.theorem1_falsified == 0
            && self.theorem1_max_chain <= 1e-10
            && self.diagonal_max_diff <= 1e-10
            && self.equal_width_max_excess <= 1e-10
            && self.midpoint_max_error <= 1e-10
    }
}

fn unit_vector(rng: &mut Xoshiro256, k: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
    let nv = crate::linalg::norm2(&v);
    v.into_iter().map(|a| a / nv).collect()
}

/// `xx' + GG'` with a random `k x k` factor `G`, scaled by `spread`.
fn psd_above(rng: &mut Xoshiro256, x: &[f64], spread: f64) -> DenseMatrix {
    let k = x.len();
    let mut g = DenseMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            g[(i, j)] = spread * rng.uniform(-1.0, 1.0);
        }
    }
    DenseMatrix::outer(x, x).add(&g.matmul(&g.transpose()).expect("square factor"))
}

/// Samples both comparison results: `theorem1_samples` random lifted points
/// and `theorem2_draws` random bound boxes per case.
pub fn verify_theorems(seed: u64, theorem1_samples: usize, theorem2_draws: usize) -> VerifyReport {
    let mut rng = Xoshiro256::seed_from_u64(seed);
    let mut report = VerifyReport {
        theorem1_samples,
        theorem1_symmetric_held: 0,
        theorem1_falsified: 0,
        theorem1_max_chain: f64::NEG_INFINITY,
        diagonal_max_diff: 0.0,
        equal_width_max_excess: f64::NEG_INFINITY,
        midpoint_max_error: 0.0,
        unequal_incomparable: 0,
        theorem2_draws,
    };
    for _ in 0..theorem1_samples {
        let n = 1 + rng.below(4) as usize;
        let m = 1 + rng.below(4) as usize;
        let x: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let y: Vec<f64> = (0..m).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let spread = rng.uniform(0.0, 0.5);
        let big_x = psd_above(&mut rng, &x, spread);
        let big_y = psd_above(&mut rng, &y, spread);
        let mut w = DenseMatrix::outer(&x, &y);
        for i in 0..n {
            for j in 0..m {
                w[(i, j)] += rng.uniform(-0.5, 0.5);
            }
        }
        let u = unit_vector(&mut rng, n);
        let v = unit_vector(&mut rng, m);
        let r = verify_theorem1(&x, &y, &w, &big_x, &big_y, &u, &v).expect("sampled matrices meet the precondition");
        report.theorem1_symmetric_held += usize::from(r.symmetric <= 0.0);
        report.theorem1_falsified += usize::from(!r.holds);
        report.theorem1_max_chain = report.theorem1_max_chain.max(r.chain);
    }
    for _ in 0..theorem2_draws {
        // (i) equal bounds, p1 = p2
        let a = rng.uniform(-2.0, 1.0);
        let b = a + rng.uniform(0.1, 3.0);
        for &(p1, p2) in &diagonal_grid(a, b, 101) {
            let d = crate::cuts::theory::addmc_rhs(a, b, a, b, p1, p2) - crate::cuts::theory::saxmf_rhs(a, b, a, b, p1, p2);
            report.diagonal_max_diff = report.diagonal_max_diff.max(d.abs());
        }
        // (ii) equal widths
        let wdt = rng.uniform(0.1, 3.0);
        let (a1, a2) = (rng.uniform(-2.0, 1.0), rng.uniform(-2.0, 1.0));
        for &(p1, p2) in &box_grid(a1, a1 + wdt, a2, a2 + wdt, 101) {
            let e = crate::cuts::theory::saxmf_rhs(a1, a1 + wdt, a2, a2 + wdt, p1, p2)
                - crate::cuts::theory::addmc_rhs(a1, a1 + wdt, a2, a2 + wdt, p1, p2);
            report.equal_width_max_excess = report.equal_width_max_excess.max(e);
        }
        // (iii) unequal widths
        let (a1, a2) = (rng.uniform(-2.0, 1.0), rng.uniform(-2.0, 1.0));
        let (b1, b2) = (a1 + rng.uniform(0.1, 3.0), a2 + rng.uniform(0.1, 3.0));
        let closed = ((a1 - b1) - (a2 - b2)).powi(2) / 16.0;
        report.midpoint_max_error = report.midpoint_max_error.max((midpoint_gap(a1, b1, a2, b2) - closed).abs());
        let class = compare_addmc_saxmf(a1, b1, a2, b2, &box_grid(a1, b1, a2, b2, 21));
        report.unequal_incomparable += usize::from(class == Theorem2Class::Incomparable);
    }
    report
}

#[derive(Debug, Parser)]
#[command(name = "bilicut", version, about = "Lower bounds for box-constrained bilinear plus convex quadratic minimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one instance, or the whole configured grid, as JSON.
    Generate(GenerateArgs),
    /// Bound one instance with the chosen methods.
    Solve(SolveArgs),
    /// Run the method comparison over the instance grid.
    Compare(CompareArgs),
    /// Run the property suites of both comparison results.
    Verify(VerifyArgs),
    /// Turn a results CSV into per-size plot data.
    Plot(PlotArgs),
}

/// Flags that mirror `ExperimentConfig`; they override the config file.
#[derive(Debug, Args, Default)]
pub struct SuiteFlags {
    /// TOML file with `key = value` settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `(n, m)` pairs such as `20x4,20x8`.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub densities: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub rank_fractions: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub max_n_cuts: Option<usize>,
    #[arg(long)]
    pub max_cuts_per_round: Option<usize>,
    #[arg(long)]
    pub violation_threshold: Option<f64>,
    /// Seconds per cutting-plane run.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Largest `n` that runs the cut loops; 0 removes the limit.
    #[arg(long)]
    pub loop_max_n: Option<usize>,
    #[arg(long)]
    pub upper_bound_starts: Option<usize>,
    #[arg(long)]
    pub zero_quadratics: bool,
    #[arg(long)]
    pub jobs: Option<usize>,
}

fn parse_dim(s: &str) -> Result<(usize, usize), ConfigError> {
    let bad = || ConfigError::Invalid(format!("dimension pair {s:?} is not of the form NxM"));
    let (n, m) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((n.trim().parse().map_err(|_| bad())?, m.trim().parse().map_err(|_| bad())?))
}

impl SuiteFlags {
    /// Defaults, then the config file, then `BILICUT_SEED`, then flags.
    pub fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut c = ExperimentConfig::default();
        if let Some(path) = &self.config {
            c.apply_toml(&std::fs::read_to_string(path)?)?;
        }
        c.apply_env()?;
        if let Some(d) = &self.dims {
            c.dims = d.iter().map(|s| parse_dim(s)).collect::<Result<_, _>>()?;
        }
        if let Some(v) = &self.densities {
            c.densities = v.clone();
        }
        if let Some(v) = &self.rank_fractions {
            c.rank_fractions = v.clone();
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.methods {
            c.methods = parse_methods(v)?;
        }
        if let Some(v) = self.max_n_cuts {
            c.loop_config.max_n_cuts = v;
        }
        if let Some(v) = self.max_cuts_per_round {
            c.loop_config.max_cuts_per_round = v;
        }
        if let Some(v) = self.violation_threshold {
            c.loop_config.violation_threshold = v;
        }
        if let Some(v) = self.time_limit {
            c.loop_config.time_limit = Some(v);
        }
        if let Some(v) = self.loop_max_n {
            c.loop_max_n = (v > 0).then_some(v);
        }
        if let Some(v) = self.upper_bound_starts {
            c.upper_bound_starts = v;
        }
        if self.zero_quadratics {
            c.zero_quadratics = true;
        }
        if let Some(v) = self.jobs {
            c.jobs = v;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub suite: SuiteFlags,
    /// Write only the grid instance with this index.
    #[arg(long)]
    pub index: Option<usize>,
    /// Output directory; one `inst_{index}.json` per instance.
    #[arg(long, default_value = "instances")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Instance JSON as written by `generate`.
    pub instance: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "S.Mc,B.Mc,B.Mc.Disj,B.Mc.ExtDisj")]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 40)]
    pub max_n_cuts: usize,
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long, default_value_t = 32)]
    pub upper_bound_starts: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Print the full outcomes, traces included, as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub suite: SuiteFlags,
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 100)]
    pub draws: usize,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// `results.csv` from `compare`.
    pub csv: PathBuf,
    #[arg(long, default_value = "plots")]
    pub out: PathBuf,
    /// Also write SVG bar charts.
    #[arg(long)]
    pub svg: bool,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn dispatch(command: Command) -> Result<i32, Box<dyn std::error::Error>> {
    match command {
        Command::Generate(a) => {
            let config = a.suite.resolve()?;
            std::fs::create_dir_all(&a.out)?;
            let specs = config.instances();
            let chosen: Vec<&InstanceSpec> = match a.index {
                Some(k) => vec![specs.get(k).ok_or_else(|| format!("index {k} outside the grid of {}", specs.len()))?],
                None => specs.iter().collect(),
            };
            for spec in chosen {
                let inst = config.build_instance(spec)?;
                let path = a.out.join(format!("inst_{:03}.json", spec.index));
                std::fs::write(&path, inst.to_json_pretty())?;
                let p = &spec.params;
                println!("{} n={} m={} density={} rank={} seed={}", path.display(), p.n, p.m, p.density_a, p.rank_frac_q, p.seed);
            }
            Ok(0)
        }
        Command::Solve(a) => {
            let inst = BilinearInstance::from_json(&std::fs::read_to_string(&a.instance)?)?;
            let methods = parse_methods(&a.methods)?;
            let loop_config = LoopConfig { max_n_cuts: a.max_n_cuts, time_limit: a.time_limit, ..LoopConfig::new(LoopVariant::ExtDisj) };
            loop_config.validate()?;
            let ub = upper_bound(&inst, a.upper_bound_starts.max(1), a.seed);
            let outcomes: Vec<MethodOutcome> = methods.iter().map(|&m| run_method(&inst, m, &loop_config)).collect();
            let failed = outcomes.iter().any(|o| o.error.is_some() || o.termination == Some(Termination::SolverFailure));
            if a.json {
                println!("{}", serde_json::to_string_pretty(&serde_json::json!({ "z_bar": ub.z_bar, "x": ub.x, "y": ub.y, "outcomes": outcomes }))?);
            } else {
                let report = GapReport::new(ub.z_bar, &outcomes);
                println!("z_bar = {}", ub.z_bar);
                println!("{:<14} {:>16} {:>12} {:>8} {:>10}  termination", "method", "lb", "gap %", "cuts", "closed %");
                for (e, o) in report.entries.iter().zip(&outcomes) {
                    let gap = relative_gap(ub.z_bar, e.lb);
                    println!(
                        "{:<14} {:>16.8} {:>12.4}{} {:>8} {:>10}  {}",
                        e.method.name(),
                        e.lb,
                        gap.percent,
                        if gap.degenerate { "*" } else { " " },
                        o.cuts_added,
                        e.gap_closed.map_or("-".into(), |g| format!("{g:.3}")),
                        o.termination.map_or_else(|| o.error.clone().unwrap_or_else(|| "-".into()), |t| format!("{t:?}"))
                    );
                }
            }
            Ok(if failed { EXIT_NUMERICAL } else { 0 })
        }
        Command::Compare(a) => {
            let config = a.suite.resolve()?;
            let quiet = a.quiet;
            let out = run_suite_with(&config, &|done, total, rec| {
                if !quiet {
                    let p = &rec.spec.params;
                    eprintln!("[{done}/{total}] n={} m={} density={} rank={} z_bar={:.6}", p.n, p.m, p.density_a, p.rank_frac_q, rec.z_bar);
                }
            })?;
            out.write_to(&a.out)?;
            println!("{} rows written to {}", out.rows.len(), a.out.join("results.csv").display());
            Ok(if out.has_numerical_failure() { EXIT_NUMERICAL } else { 0 })
        }
        Command::Verify(a) => {
            let r = verify_theorems(a.seed, a.samples, a.draws);
            println!("{}", serde_json::to_string_pretty(&r)?);
            println!("{}", if r.passed() { "all properties hold" } else { "property violated" });
            Ok(if r.passed() { 0 } else { EXIT_NUMERICAL })
        }
        Command::Plot(a) => {
            let text = std::fs::read_to_string(&a.csv)?;
            let files = emit_plot_data(&text, a.svg)?;
            std::fs::create_dir_all(&a.out)?;
            for f in &files {
                std::fs::write(a.out.join(&f.name), &f.contents)?;
            }
            println!("{} files written to {}", files.len(), a.out.display());
            Ok(0)
        }
    }
}
