//! CSV artifacts, comparison tables and SVG plots.
//!
//! Every CSV starts with a `# pvdr-<kind> v<N>` line. Plots and the text
//! summary are rendered from the CSVs on disk, never from in-memory
//! results, so re-rendering a directory reproduces them byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::grid_sim::{SimResult, TracePoint};
use crate::scenario::{level_label, scenario_id, SchemeKind};
use crate::ErrorKind;

pub const SCHEMA_VERSION: u32 = 1;

pub const TRACE_FILE: &str = "trace.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const FREQUENCY_SVG: &str = "frequency.svg";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const SHED_SVG: &str = "shed_accuracy.svg";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const RUNS_DIR: &str = "runs";

const TRACE_COLUMNS: [&str; 4] = ["t_s", "frequency_hz", "governor_mw", "shed_mw"];
const METRICS_COLUMNS: [&str; 6] = [
    "nadir_hz",
    "settling_hz",
    "shed_total_mw",
    "true_imbalance_mw",
    "estimated_imbalance_mw",
    "rocof_hzps",
];
const SCHEME_COLUMNS: [&str; 5] = [
    "nadir_hz",
    "shed_mw",
    "true_imbalance_mw",
    "shed_error_pct",
    "rocof_hzps",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing artifacts in {dir}: expected {}", .expected.join(", "))]
    MissingArtifacts { dir: PathBuf, expected: Vec<String> },
    #[error("schema error in {path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{path}: schema version `{found}` is not supported (expected `{expected}`)")]
    VersionMismatch {
        path: PathBuf,
        found: String,
        expected: String,
    },
}

impl ReportError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            ReportError::Io { .. } | ReportError::MissingArtifacts { .. } => ErrorKind::Io,
            ReportError::Schema { .. } | ReportError::VersionMismatch { .. } => {
                ErrorKind::Validation
            }
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn version_line(kind: &str) -> String {
    format!("# pvdr-{kind} v{SCHEMA_VERSION}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv(
    path: &Path,
    kind: &str,
    header: &[String],
    rows: &[Vec<String>],
) -> Result<(), ReportError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(version_line(kind).as_bytes());
    buf.push(b'\n');
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let schema = |e: csv::Error| ReportError::Schema {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        w.write_record(header).map_err(schema)?;
        for row in rows {
            w.write_record(row).map_err(schema)?;
        }
        w.flush().map_err(io_err(path))?;
    }
    fs::write(path, buf).map_err(io_err(path))
}

/// Parsed CSV body: header names and raw string rows.
struct Table {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn schema(&self, message: String) -> ReportError {
        ReportError::Schema {
            path: self.path.clone(),
            message,
        }
    }

    fn expect_columns(&self, expected: &[String]) -> Result<(), ReportError> {
        for (i, name) in expected.iter().enumerate() {
            match self.header.get(i) {
                Some(found) if found == name => {}
                Some(found) => {
                    return Err(self.schema(format!(
                        "column {} should be `{name}`, found `{found}`",
                        i + 1
                    )))
                }
                None => return Err(self.schema(format!("missing column `{name}`"))),
            }
        }
        if let Some(extra) = self.header.get(expected.len()) {
            return Err(self.schema(format!("unexpected column `{extra}`")));
        }
        Ok(())
    }

    fn number(&self, row: usize, col: usize) -> Result<f64, ReportError> {
        self.optional(row, col)?.ok_or_else(|| {
            self.schema(format!(
                "row {}: column `{}` is empty",
                row + 1,
                self.header[col]
            ))
        })
    }

    fn optional(&self, row: usize, col: usize) -> Result<Option<f64>, ReportError> {
        let cell = self.rows[row][col].trim();
        if cell.is_empty() {
            return Ok(None);
        }
        cell.parse::<f64>().map(Some).map_err(|e| {
            self.schema(format!(
                "row {}: column `{}`: {e}",
                row + 1,
                self.header[col]
            ))
        })
    }
}

fn read_csv(path: &Path, kind: &str) -> Result<Table, ReportError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let (first, body) = text.split_once('\n').unwrap_or((text.as_str(), ""));
    let expected = version_line(kind);
    let first = first.trim_end();
    if first != expected {
        let prefix = format!("# pvdr-{kind} v");
        return Err(if first.starts_with(&prefix) {
            ReportError::VersionMismatch {
                path: path.to_path_buf(),
                found: first.to_string(),
                expected,
            }
        } else {
            ReportError::Schema {
                path: path.to_path_buf(),
                message: format!("first line should be `{expected}`"),
            }
        });
    }
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_reader(body.as_bytes());
    let schema = |e: csv::Error| ReportError::Schema {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let header = reader
        .headers()
        .map_err(schema)?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<Result<Vec<Vec<String>>, _>>()
        .map_err(schema)?;
    Ok(Table {
        path: path.to_path_buf(),
        header,
        rows,
    })
}

fn owned(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

pub fn write_trace_csv(path: &Path, trace: &[TracePoint]) -> Result<(), ReportError> {
    let rows: Vec<Vec<String>> = trace
        .iter()
        .map(|p| {
            vec![
                p.t.to_string(),
                p.frequency.to_string(),
                p.governor_mw.to_string(),
                p.shed_mw.to_string(),
            ]
        })
        .collect();
    write_csv(path, "trace", &owned(&TRACE_COLUMNS), &rows)
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TracePoint>, ReportError> {
    let table = read_csv(path, "trace")?;
    table.expect_columns(&owned(&TRACE_COLUMNS))?;
    (0..table.rows.len())
        .map(|r| {
            Ok(TracePoint {
                t: table.number(r, 0)?,
                frequency: table.number(r, 1)?,
                governor_mw: table.number(r, 2)?,
                shed_mw: table.number(r, 3)?,
            })
        })
        .collect()
}

/// The per-run metrics record.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub nadir_hz: f64,
    pub settling_hz: f64,
    pub shed_total_mw: f64,
    pub true_imbalance_mw: Option<f64>,
    pub estimated_imbalance_mw: Option<f64>,
    pub rocof_hzps: Option<f64>,
}

impl From<&SimResult> for Metrics {
    fn from(r: &SimResult) -> Self {
        Self {
            nadir_hz: r.nadir,
            settling_hz: r.settling_frequency,
            shed_total_mw: r.shed_total,
            true_imbalance_mw: r.true_imbalance_at_trigger,
            estimated_imbalance_mw: r.estimated_imbalance,
            rocof_hzps: r.rocof_at_trigger,
        }
    }
}

pub fn write_metrics_csv(path: &Path, m: &Metrics) -> Result<(), ReportError> {
    let row = vec![
        m.nadir_hz.to_string(),
        m.settling_hz.to_string(),
        m.shed_total_mw.to_string(),
        fmt_opt(m.true_imbalance_mw),
        fmt_opt(m.estimated_imbalance_mw),
        fmt_opt(m.rocof_hzps),
    ];
    write_csv(path, "metrics", &owned(&METRICS_COLUMNS), &[row])
}

pub fn read_metrics_csv(path: &Path) -> Result<Metrics, ReportError> {
    let table = read_csv(path, "metrics")?;
    table.expect_columns(&owned(&METRICS_COLUMNS))?;
    if table.rows.len() != 1 {
        return Err(table.schema(format!("expected one row, found {}", table.rows.len())));
    }
    Ok(Metrics {
        nadir_hz: table.number(0, 0)?,
        settling_hz: table.number(0, 1)?,
        shed_total_mw: table.number(0, 2)?,
        true_imbalance_mw: table.optional(0, 3)?,
        estimated_imbalance_mw: table.optional(0, 4)?,
        rocof_hzps: table.optional(0, 5)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub penetration: f64,
    pub scheme: SchemeKind,
    pub nadir_hz: f64,
    pub shed_mw: f64,
    pub true_imbalance_mw: Option<f64>,
    pub shed_error_pct: Option<f64>,
    pub rocof_hzps: Option<f64>,
}

impl ComparisonRow {
    pub fn from_result(penetration: f64, scheme: SchemeKind, r: &SimResult) -> Self {
        Self {
            penetration,
            scheme,
            nadir_hz: r.nadir,
            shed_mw: r.shed_total,
            true_imbalance_mw: r.reference_imbalance(),
            shed_error_pct: r.shed_error_pct(),
            rocof_hzps: r.rocof_at_trigger,
        }
    }
}

/// Per-scheme aggregate over all penetration levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSummary {
    pub scheme: SchemeKind,
    pub max_abs_shed_error_pct: Option<f64>,
    /// Highest minus lowest nadir across levels.
    pub nadir_spread_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub summary: Vec<SchemeSummary>,
}

impl ComparisonReport {
    pub fn new(rows: Vec<ComparisonRow>) -> Self {
        let mut schemes: Vec<SchemeKind> = rows.iter().map(|r| r.scheme).collect();
        schemes.sort();
        schemes.dedup();
        let summary = schemes
            .into_iter()
            .map(|scheme| {
                let mine: Vec<&ComparisonRow> =
                    rows.iter().filter(|r| r.scheme == scheme).collect();
                let max_abs_shed_error_pct = mine
                    .iter()
                    .filter_map(|r| r.shed_error_pct)
                    .map(f64::abs)
                    .fold(None, |acc: Option<f64>, e| {
                        Some(acc.map_or(e, |a| a.max(e)))
                    });
                let (lo, hi) = mine
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                        (lo.min(r.nadir_hz), hi.max(r.nadir_hz))
                    });
                SchemeSummary {
                    scheme,
                    max_abs_shed_error_pct,
                    nadir_spread_hz: hi - lo,
                }
            })
            .collect();
        Self { rows, summary }
    }

    /// Every row with a reference imbalance carries a finite shed error
    /// consistent with its shed and imbalance columns.
    pub fn validate(&self) -> Result<(), String> {
        for r in &self.rows {
            let at = format!("{} at {}", r.scheme.name(), r.penetration);
            match (r.true_imbalance_mw, r.shed_error_pct) {
                (Some(imb), Some(pct)) => {
                    let expected = (r.shed_mw - imb.abs()) / imb.abs() * 100.0;
                    if !pct.is_finite() || (pct - expected).abs() > 1e-9 * expected.abs().max(1.0) {
                        return Err(format!("{at}: shed error {pct} % should be {expected} %"));
                    }
                }
                (Some(_), None) => return Err(format!("{at}: shed error missing")),
                (None, Some(_)) => return Err(format!("{at}: shed error without an imbalance")),
                (None, None) => {}
            }
        }
        Ok(())
    }

    pub fn levels(&self) -> Vec<f64> {
        let mut levels: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !levels.contains(&r.penetration) {
                levels.push(r.penetration);
            }
        }
        levels
    }

    pub fn schemes(&self) -> Vec<SchemeKind> {
        self.summary.iter().map(|s| s.scheme).collect()
    }

    pub fn row(&self, penetration: f64, scheme: SchemeKind) -> Option<&ComparisonRow> {
        self.rows
            .iter()
            .find(|r| r.penetration == penetration && r.scheme == scheme)
    }

    pub fn scheme_summary(&self, scheme: SchemeKind) -> Option<&SchemeSummary> {
        self.summary.iter().find(|s| s.scheme == scheme)
    }

    fn header(schemes: &[SchemeKind]) -> Vec<String> {
        let mut header = vec!["penetration".to_string()];
        for s in schemes {
            header.extend(SCHEME_COLUMNS.iter().map(|c| format!("{}_{c}", s.name())));
        }
        header
    }

    /// Wide layout: one row per level, one column block per scheme present.
    pub fn write_csv(&self, path: &Path) -> Result<(), ReportError> {
        let schemes = self.schemes();
        let rows: Vec<Vec<String>> = self
            .levels()
            .into_iter()
            .map(|level| {
                let mut row = vec![level.to_string()];
                for &s in &schemes {
                    match self.row(level, s) {
                        Some(r) => row.extend([
                            r.nadir_hz.to_string(),
                            r.shed_mw.to_string(),
                            fmt_opt(r.true_imbalance_mw),
                            fmt_opt(r.shed_error_pct),
                            fmt_opt(r.rocof_hzps),
                        ]),
                        None => {
                            row.extend(std::iter::repeat_n(String::new(), SCHEME_COLUMNS.len()))
                        }
                    }
                }
                row
            })
            .collect();
        write_csv(path, "comparison", &Self::header(&schemes), &rows)
    }

    pub fn read_csv(path: &Path) -> Result<Self, ReportError> {
        let table = read_csv(path, "comparison")?;
        match table.header.first() {
            Some(h) if h == "penetration" => {}
            Some(h) => {
                return Err(table.schema(format!("column 1 should be `penetration`, found `{h}`")))
            }
            None => return Err(table.schema("missing column `penetration`".into())),
        }
        let block = SCHEME_COLUMNS.len();
        if (table.header.len() - 1) % block != 0 {
            return Err(table.schema(format!(
                "expected {block} columns per scheme after `penetration`"
            )));
        }
        let schemes = table.header[1..]
            .chunks(block)
            .map(|chunk| {
                let name = chunk[0]
                    .strip_suffix("_nadir_hz")
                    .and_then(SchemeKind::parse)
                    .ok_or_else(|| table.schema(format!("unknown scheme column `{}`", chunk[0])))?;
                Ok(name)
            })
            .collect::<Result<Vec<_>, ReportError>>()?;
        table.expect_columns(&Self::header(&schemes))?;
        let path = table.path.clone();

        let mut rows = Vec::new();
        for r in 0..table.rows.len() {
            let penetration = table.number(r, 0)?;
            for (k, &scheme) in schemes.iter().enumerate() {
                let c = 1 + k * block;
                let Some(nadir_hz) = table.optional(r, c)? else {
                    continue;
                };
                rows.push(ComparisonRow {
                    penetration,
                    scheme,
                    nadir_hz,
                    shed_mw: table.number(r, c + 1)?,
                    true_imbalance_mw: table.optional(r, c + 2)?,
                    shed_error_pct: table.optional(r, c + 3)?,
                    rocof_hzps: table.optional(r, c + 4)?,
                });
            }
        }
        let report = Self::new(rows);
        report
            .validate()
            .map_err(|message| ReportError::Schema { path, message })?;
        Ok(report)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>11}  {:<12}  {:>9}  {:>10}  {:>15}  {:>11}  {:>9}",
            "penetration", "scheme", "nadir_hz", "shed_mw", "true_imbalance", "shed_err_%", "rocof"
        );
        for r in &self.rows {
            let opt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |x| format!("{x:.p$}"));
            let _ = writeln!(
                out,
                "{:>11.3}  {:<12}  {:>9.4}  {:>10.1}  {:>15}  {:>11}  {:>9}",
                r.penetration,
                r.scheme.name(),
                r.nadir_hz,
                r.shed_mw,
                opt(r.true_imbalance_mw, 1),
                opt(r.shed_error_pct, 2),
                opt(r.rocof_hzps, 4),
            );
        }
        out.push('\n');
        for s in &self.summary {
            let err = s
                .max_abs_shed_error_pct
                .map_or("-".to_string(), |e| format!("{e:.2}"));
            let _ = writeln!(
                out,
                "{}: max |shed error| = {err} %, nadir spread = {:.4} Hz",
                s.scheme.name(),
                s.nadir_spread_hz
            );
        }
        out
    }
}

/// One finished run of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub penetration: f64,
    pub scheme: SchemeKind,
    pub result: SimResult,
}

/// Writes the CSVs of one run into `dir`, then renders its plot.
pub fn write_run_artifacts(dir: &Path, result: &SimResult) -> Result<(), ReportError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_trace_csv(&dir.join(TRACE_FILE), &result.trace)?;
    write_metrics_csv(&dir.join(METRICS_FILE), &Metrics::from(result))?;
    render_run(dir)?;
    Ok(())
}

/// Re-renders `frequency.svg` from `trace.csv`.
pub fn render_run(dir: &Path) -> Result<(), ReportError> {
    let trace = read_trace_csv(&dir.join(TRACE_FILE))?;
    let svg = render_line_plot(
        "System frequency",
        "time (s)",
        "frequency (Hz)",
        &[PlotSeries {
            label: "frequency".to_string(),
            color: PALETTE[0],
            points: trace.iter().map(|p| (p.t, p.frequency)).collect(),
        }],
    );
    let path = dir.join(FREQUENCY_SVG);
    fs::write(&path, svg).map_err(io_err(&path))
}

pub fn write_sweep_artifacts(out_dir: &Path, runs: &[SweepRun]) -> Result<String, ReportError> {
    for run in runs {
        let dir = out_dir
            .join(RUNS_DIR)
            .join(scenario_id(run.penetration, run.scheme));
        write_run_artifacts(&dir, &run.result)?;
    }
    let report = ComparisonReport::new(
        runs.iter()
            .map(|r| ComparisonRow::from_result(r.penetration, r.scheme, &r.result))
            .collect(),
    );
    report.write_csv(&out_dir.join(COMPARISON_FILE))?;
    render_sweep(out_dir)
}

pub fn overlay_file(level: f64) -> String {
    format!("overlay_{}.svg", level_label(level))
}

/// Re-renders overlay plots, the shed-accuracy chart and `summary.txt`
/// from `comparison.csv` and the per-run traces. Returns the summary text.
pub fn render_sweep(out_dir: &Path) -> Result<String, ReportError> {
    let report = ComparisonReport::read_csv(&out_dir.join(COMPARISON_FILE))?;
    let schemes = report.schemes();
    let levels = report.levels();

    for &level in &levels {
        let mut series = Vec::new();
        for (k, &scheme) in schemes.iter().enumerate() {
            if report.row(level, scheme).is_none() {
                continue;
            }
            let run_dir = out_dir.join(RUNS_DIR).join(scenario_id(level, scheme));
            let trace_path = run_dir.join(TRACE_FILE);
            if !trace_path.exists() {
                return Err(ReportError::MissingArtifacts {
                    dir: run_dir,
                    expected: vec![TRACE_FILE.to_string()],
                });
            }
            render_run(&run_dir)?;
            let trace = read_trace_csv(&trace_path)?;
            series.push(PlotSeries {
                label: scheme.name().to_string(),
                color: PALETTE[k % PALETTE.len()],
                points: trace.iter().map(|p| (p.t, p.frequency)).collect(),
            });
        }
        let svg = render_line_plot(
            &format!("Frequency at {:.1} % PV penetration", level * 100.0),
            "time (s)",
            "frequency (Hz)",
            &series,
        );
        let path = out_dir.join(overlay_file(level));
        fs::write(&path, svg).map_err(io_err(&path))?;
    }

    let categories: Vec<String> = levels
        .iter()
        .map(|l| format!("{:.1} %", l * 100.0))
        .collect();
    let bars: Vec<BarSeries> = schemes
        .iter()
        .enumerate()
        .map(|(k, &scheme)| BarSeries {
            label: scheme.name().to_string(),
            color: PALETTE[k % PALETTE.len()],
            values: levels
                .iter()
                .map(|&l| report.row(l, scheme).and_then(|r| r.shed_error_pct))
                .collect(),
        })
        .collect();
    let svg = render_bar_chart(
        "Shed error vs. true imbalance",
        "shed error (%)",
        &categories,
        &bars,
    );
    let path = out_dir.join(SHED_SVG);
    fs::write(&path, svg).map_err(io_err(&path))?;

    let text = report.to_text();
    let path = out_dir.join(SUMMARY_FILE);
    fs::write(&path, &text).map_err(io_err(&path))?;
    Ok(text)
}

/// Re-renders whatever `dir` holds: a sweep (with `comparison.csv`) or a single run.
pub fn render_report(dir: &Path) -> Result<String, ReportError> {
    if dir.join(COMPARISON_FILE).exists() {
        return render_sweep(dir);
    }
    if dir.join(TRACE_FILE).exists() && dir.join(METRICS_FILE).exists() {
        render_run(dir)?;
        let m = read_metrics_csv(&dir.join(METRICS_FILE))?;
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        let text = format!(
            "nadir_hz = {:.4}\nsettling_hz = {:.4}\nshed_total_mw = {:.1}\ntrue_imbalance_mw = {}\nestimated_imbalance_mw = {}\nrocof_hzps = {}\n",
            m.nadir_hz,
            m.settling_hz,
            m.shed_total_mw,
            opt(m.true_imbalance_mw),
            opt(m.estimated_imbalance_mw),
            opt(m.rocof_hzps),
        );
        let path = dir.join(SUMMARY_FILE);
        fs::write(&path, &text).map_err(io_err(&path))?;
        return Ok(text);
    }
    Err(ReportError::MissingArtifacts {
        dir: dir.to_path_buf(),
        expected: vec![
            format!("{COMPARISON_FILE} (sweep output)"),
            format!("{TRACE_FILE} + {METRICS_FILE} (single run output)"),
        ],
    })
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct PlotSeries {
    pub label: String,
    pub color: &'static str,
    pub points: Vec<(f64, f64)>,
}

pub struct BarSeries {
    pub label: String,
    pub color: &'static str,
    pub values: Vec<Option<f64>>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 450.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

/// Tick positions at a 1-2-5 step covering `[lo, hi]`.
fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-3);
    (lo - pad, hi + pad)
}

fn svg_open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn axes(out: &mut String, x_label: &str, y_label: &str) {
    let (x0, y0, x1, y1) = (LEFT, HEIGHT - BOTTOM, WIDTH - RIGHT, TOP);
    let _ = writeln!(
        out,
        r##"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" stroke="#333" fill="none"/>"##
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, entries: &[(&str, &str)]) {
    for (k, (label, color)) in entries.iter().enumerate() {
        let y = TOP + 12.0 + 16.0 * k as f64;
        let x = WIDTH - RIGHT - 140.0;
        let _ = writeln!(
            out,
            r#"<rect x="{x}" y="{}" width="12" height="4" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            y - 4.0,
            x + 18.0,
            y,
            escape(label)
        );
    }
}

pub fn render_line_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[PlotSeries],
) -> String {
    let (xmin, xmax) = padded_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (ymin, ymax) = padded_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let sx = |x: f64| LEFT + (x - xmin) / (xmax - xmin) * (WIDTH - LEFT - RIGHT);
    let sy = |y: f64| HEIGHT - BOTTOM - (y - ymin) / (ymax - ymin) * (HEIGHT - TOP - BOTTOM);

    let mut out = String::new();
    svg_open(&mut out, title);
    for t in nice_ticks(ymin, ymax) {
        let y = sy(t);
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            WIDTH - RIGHT,
            LEFT - 6.0,
            y + 4.0,
            tick_label(t)
        );
    }
    for t in nice_ticks(xmin, xmax) {
        let x = sx(t);
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            HEIGHT - BOTTOM + 16.0,
            tick_label(t)
        );
    }
    axes(&mut out, x_label, y_label);
    for s in series {
        let mut d = String::with_capacity(s.points.len() * 16);
        for (k, &(x, y)) in s.points.iter().enumerate() {
            let _ = write!(
                d,
                "{}{:.2} {:.2}",
                if k == 0 { "M" } else { " L" },
                sx(x),
                sy(y)
            );
        }
        let _ = writeln!(
            out,
            r#"<path d="{d}" stroke="{}" stroke-width="1.5" fill="none"/>"#,
            s.color
        );
    }
    let entries: Vec<(&str, &str)> = series.iter().map(|s| (s.label.as_str(), s.color)).collect();
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

pub fn render_bar_chart(
    title: &str,
    y_label: &str,
    categories: &[String],
    series: &[BarSeries],
) -> String {
    let values = series
        .iter()
        .flat_map(|s| s.values.iter().flatten().copied());
    let (mut ymin, mut ymax) = padded_range(values.chain([0.0]));
    if ymin > 0.0 {
        ymin = 0.0;
    }
    if ymax < 0.0 {
        ymax = 0.0;
    }
    let sy = |y: f64| HEIGHT - BOTTOM - (y - ymin) / (ymax - ymin) * (HEIGHT - TOP - BOTTOM);
    let plot_w = WIDTH - LEFT - RIGHT;
    let group_w = plot_w / categories.len().max(1) as f64;
    let bar_w = group_w * 0.7 / series.len().max(1) as f64;

    let mut out = String::new();
    svg_open(&mut out, title);
    for t in nice_ticks(ymin, ymax) {
        let y = sy(t);
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            WIDTH - RIGHT,
            LEFT - 6.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let zero = sy(0.0);
    for (c, cat) in categories.iter().enumerate() {
        let gx = LEFT + group_w * c as f64 + group_w * 0.15;
        for (k, s) in series.iter().enumerate() {
            let Some(v) = s.values.get(c).copied().flatten() else {
                continue;
            };
            let (top, h) = if v >= 0.0 {
                (sy(v), zero - sy(v))
            } else {
                (zero, sy(v) - zero)
            };
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{top:.2}" width="{bar_w:.2}" height="{h:.2}" fill="{}"/>"#,
                gx + bar_w * k as f64,
                s.color
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + group_w * (c as f64 + 0.5),
            HEIGHT - BOTTOM + 16.0,
            escape(cat)
        );
    }
    let _ = writeln!(
        out,
        r##"<line x1="{LEFT}" y1="{zero:.2}" x2="{:.2}" y2="{zero:.2}" stroke="#333"/>"##,
        WIDTH - RIGHT
    );
    axes(&mut out, "PV penetration", y_label);
    let entries: Vec<(&str, &str)> = series.iter().map(|s| (s.label.as_str(), s.color)).collect();
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_cover_range() {
        assert_eq!(nice_ticks(0.0, 10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        let t = nice_ticks(58.9, 60.05);
        assert!(t.first().unwrap() >= &58.9 && t.last().unwrap() <= &60.05);
        assert!(t.len() >= 3);
    }

    #[test]
    fn tick_labels_are_trimmed() {
        assert_eq!(tick_label(59.5), "59.5");
        assert_eq!(tick_label(60.0), "60");
        assert_eq!(tick_label(-0.0), "0");
    }

    #[test]
    fn plots_are_well_formed() {
        let svg = render_line_plot(
            "t <x>",
            "x",
            "y",
            &[PlotSeries {
                label: "a&b".into(),
                color: PALETTE[0],
                points: vec![(0.0, 1.0), (1.0, 2.0)],
            }],
        );
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("t &lt;x&gt;") && svg.contains("a&amp;b"));
        let bars = render_bar_chart(
            "b",
            "y",
            &["one".into(), "two".into()],
            &[BarSeries {
                label: "s".into(),
                color: PALETTE[1],
                values: vec![Some(-3.0), None],
            }],
        );
        assert_eq!(bars.matches("<rect x=").count(), 2); // one bar plus one legend swatch
    }

    #[test]
    fn trace_round_trip_and_schema_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let trace = vec![
            TracePoint {
                t: 0.0,
                frequency: 60.0,
                governor_mw: 0.0,
                shed_mw: 0.0,
            },
            TracePoint {
                t: 0.01,
                frequency: 59.999_999_123_4,
                governor_mw: 1.0 / 3.0,
                shed_mw: 0.0,
            },
        ];
        write_trace_csv(&path, &trace).unwrap();
        assert_eq!(read_trace_csv(&path).unwrap(), trace);

        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("frequency_hz", "freq");
        fs::write(&path, text).unwrap();
        let err = read_trace_csv(&path).unwrap_err().to_string();
        assert!(
            err.contains("frequency_hz") && err.contains("freq"),
            "{err}"
        );

        let text = fs::read_to_string(&path).unwrap().replace("v1", "v2");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            read_trace_csv(&path),
            Err(ReportError::VersionMismatch { .. })
        ));
    }

    #[test]
    fn metrics_round_trip_with_missing_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let m = Metrics {
            nadir_hz: 60.0,
            settling_hz: 60.0,
            shed_total_mw: 0.0,
            true_imbalance_mw: None,
            estimated_imbalance_mw: None,
            rocof_hzps: Some(-0.25),
        };
        write_metrics_csv(&path, &m).unwrap();
        assert_eq!(read_metrics_csv(&path).unwrap(), m);
    }

    fn row(p: f64, scheme: SchemeKind, nadir: f64, err: f64) -> ComparisonRow {
        ComparisonRow {
            penetration: p,
            scheme,
            nadir_hz: nadir,
            shed_mw: 2000.0 * (1.0 + err / 100.0),
            true_imbalance_mw: Some(2000.0),
            shed_error_pct: Some(err),
            rocof_hzps: Some(-0.3),
        }
    }

    #[test]
    fn comparison_summary_and_round_trip() {
        let report = ComparisonReport::new(vec![
            row(0.15, SchemeKind::Proposed, 59.1, 1.0),
            row(0.15, SchemeKind::Conventional, 58.7, -25.0),
            row(0.6, SchemeKind::Proposed, 59.0, -2.0),
            row(0.6, SchemeKind::Conventional, 59.0, 30.0),
        ]);
        let p = report.scheme_summary(SchemeKind::Proposed).unwrap();
        assert_eq!(p.max_abs_shed_error_pct, Some(2.0));
        assert!((p.nadir_spread_hz - 0.1).abs() < 1e-9);
        let c = report.scheme_summary(SchemeKind::Conventional).unwrap();
        assert_eq!(c.max_abs_shed_error_pct, Some(30.0));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("comparison.csv");
        report.write_csv(&path).unwrap();
        let back = ComparisonReport::read_csv(&path).unwrap();
        assert_eq!(back.summary, report.summary);
        assert_eq!(back.rows.len(), 4);

        assert!(report.validate().is_ok());
        let mut bad = report.clone();
        bad.rows[0].shed_error_pct = Some(5.0);
        assert!(bad.validate().is_err());
        bad.rows[0].shed_error_pct = None;
        assert!(bad.validate().is_err());

        let only = ComparisonReport::new(vec![row(0.15, SchemeKind::Proposed, 59.1, 1.0)]);
        only.write_csv(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(!text.contains("conventional"));
    }

    #[test]
    fn empty_directory_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let err = render_report(dir.path()).unwrap_err();
        assert!(matches!(err, ReportError::MissingArtifacts { .. }));
        assert!(err.to_string().contains(COMPARISON_FILE));
        assert_eq!(err.kind(), ErrorKind::Io);
    }
}
