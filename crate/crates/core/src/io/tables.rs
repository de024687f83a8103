//! Experiment tables: score CSVs with JSON sidecars, pruning masks, ranked
//! per-ray archives, metrics reports, and append-only sweep curves.

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write as _};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::metrics::MetricsReport;
use crate::pruning::{PruneMask, PruneSpec};
use crate::rasterizer::ContributionStream;
use crate::scalar::Scalar;
use crate::scoring::{Aggregation, RankedStreams, ScoreFunctionId, ScoreTable};

use super::IoError;

/// Provenance stored next to a score CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSidecar {
    pub function: ScoreFunctionId,
    pub aggregation: Aggregation,
    pub views_used: usize,
}

fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn table_error(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Table {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Densifies `(id, value)` rows into a vector indexed by id.
fn densify<V>(rows: Vec<(usize, V)>, path: &Path) -> Result<Vec<V>, IoError>
where
    V: Copy,
{
    let n = rows.len();
    let mut out: Vec<Option<V>> = vec![None; n];
    for (id, value) in rows {
        let slot = out
            .get_mut(id)
            .ok_or_else(|| table_error(path, format!("primitive id {id} out of range for {n} rows")))?;
        if slot.is_some() {
            return Err(table_error(path, format!("duplicate primitive id {id}")));
        }
        *slot = Some(value);
    }
    Ok(out.into_iter().map(|v| v.expect("dense by counting")).collect())
}

/// Writes `primitive_id,score` rows plus a JSON sidecar recording the score
/// function, aggregation, and view count.
pub fn write_score_table<T: Scalar>(
    table: &ScoreTable<T>,
    csv_path: impl AsRef<Path>,
) -> Result<(), IoError> {
    let csv_path = csv_path.as_ref();
    let mut writer = csv::Writer::from_path(csv_path).map_err(IoError::csv(csv_path))?;
    writer
        .write_record(["primitive_id", "score"])
        .map_err(IoError::csv(csv_path))?;
    for (id, score) in table.per_primitive.iter().enumerate() {
        writer
            .serialize((id, score.widen()))
            .map_err(IoError::csv(csv_path))?;
    }
    writer.flush().map_err(IoError::file(csv_path))?;
    let sidecar = ScoreSidecar {
        function: table.function,
        aggregation: table.aggregation,
        views_used: table.views_used,
    };
    let json_path = sidecar_path(csv_path);
    let text = serde_json::to_string_pretty(&sidecar).map_err(IoError::json(&json_path))?;
    fs::write(&json_path, text + "\n").map_err(IoError::file(&json_path))
}

/// Reads a score CSV back into an id-indexed vector, along with its sidecar
/// when one sits next to it.
pub fn read_score_table<T: Scalar>(
    csv_path: impl AsRef<Path>,
) -> Result<(Vec<T>, Option<ScoreSidecar>), IoError> {
    let csv_path = csv_path.as_ref();
    let mut reader = csv::Reader::from_path(csv_path).map_err(IoError::csv(csv_path))?;
    let mut rows = Vec::new();
    for record in reader.deserialize::<(usize, f64)>() {
        rows.push(record.map_err(IoError::csv(csv_path))?);
    }
    let scores = densify(rows, csv_path)?
        .into_iter()
        .map(T::of)
        .collect();
    let json_path = sidecar_path(csv_path);
    let sidecar = if json_path.exists() {
        let text = fs::read_to_string(&json_path).map_err(IoError::file(&json_path))?;
        Some(serde_json::from_str(&text).map_err(IoError::json(&json_path))?)
    } else {
        None
    };
    Ok((scores, sidecar))
}

/// Writes `primitive_id,retained` rows (1/0) plus the PruneSpec sidecar.
pub fn write_mask(mask: &PruneMask, csv_path: impl AsRef<Path>) -> Result<(), IoError> {
    let csv_path = csv_path.as_ref();
    let mut writer = csv::Writer::from_path(csv_path).map_err(IoError::csv(csv_path))?;
    writer
        .write_record(["primitive_id", "retained"])
        .map_err(IoError::csv(csv_path))?;
    for (id, &retained) in mask.retain.iter().enumerate() {
        writer
            .serialize((id, retained as u8))
            .map_err(IoError::csv(csv_path))?;
    }
    writer.flush().map_err(IoError::file(csv_path))?;
    let json_path = sidecar_path(csv_path);
    let text = serde_json::to_string_pretty(&mask.spec).map_err(IoError::json(&json_path))?;
    fs::write(&json_path, text + "\n").map_err(IoError::file(&json_path))
}

/// Reads a mask CSV (accepting 0/1 or false/true) and its sidecar.
pub fn read_mask(csv_path: impl AsRef<Path>) -> Result<(Vec<bool>, Option<PruneSpec>), IoError> {
    let csv_path = csv_path.as_ref();
    let mut reader = csv::Reader::from_path(csv_path).map_err(IoError::csv(csv_path))?;
    let mut rows = Vec::new();
    for record in reader.deserialize::<(usize, String)>() {
        let (id, raw) = record.map_err(IoError::csv(csv_path))?;
        let retained = match raw.as_str() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(table_error(
                    csv_path,
                    format!("row {id}: invalid retained flag '{other}'"),
                ))
            }
        };
        rows.push((id, retained));
    }
    let retain = densify(rows, csv_path)?;
    let json_path = sidecar_path(csv_path);
    let spec = if json_path.exists() {
        let text = fs::read_to_string(&json_path).map_err(IoError::file(&json_path))?;
        Some(serde_json::from_str(&text).map_err(IoError::json(&json_path))?)
    } else {
        None
    };
    Ok((retain, spec))
}

/// Serializes per-ray rankings as JSON.
pub fn write_ranked<T: Scalar>(
    ranked: &RankedStreams<T>,
    path: impl AsRef<Path>,
) -> Result<(), IoError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(IoError::file(path))?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer(&mut writer, ranked).map_err(IoError::json(path))?;
    writer.write_all(b"\n").map_err(IoError::file(path))?;
    writer.flush().map_err(IoError::file(path))
}

pub fn read_ranked<T: Scalar>(path: impl AsRef<Path>) -> Result<RankedStreams<T>, IoError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(IoError::file(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(IoError::json(path))
}

/// Serializes recorded contribution streams as JSON.
pub fn write_streams<T: Scalar>(
    streams: &[ContributionStream<T>],
    path: impl AsRef<Path>,
) -> Result<(), IoError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(IoError::file(path))?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer(&mut writer, streams).map_err(IoError::json(path))?;
    writer.write_all(b"\n").map_err(IoError::file(path))?;
    writer.flush().map_err(IoError::file(path))
}

pub fn read_streams<T: Scalar>(
    path: impl AsRef<Path>,
) -> Result<Vec<ContributionStream<T>>, IoError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(IoError::file(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(IoError::json(path))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Flat one-row summary of a [`MetricsReport`], as stored in report CSVs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scene: String,
    pub psnr: f64,
    pub ssim: f64,
    pub fps: f64,
    pub primitive_count: usize,
    pub render_wall_time: f64,
}

impl From<&MetricsReport> for ReportRow {
    fn from(report: &MetricsReport) -> Self {
        Self {
            scene: report.scene.clone(),
            psnr: report.psnr,
            ssim: report.ssim,
            fps: report.fps,
            primitive_count: report.primitive_count,
            render_wall_time: report.render_wall_time,
        }
    }
}

/// Writes a metrics report: JSON keeps the per-view detail, CSV flattens to
/// a single summary row.
pub fn write_report(
    report: &MetricsReport,
    path: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<(), IoError> {
    let path = path.as_ref();
    match format {
        ReportFormat::Json => {
            let text = serde_json::to_string_pretty(report).map_err(IoError::json(path))?;
            fs::write(path, text + "\n").map_err(IoError::file(path))
        }
        ReportFormat::Csv => {
            let mut writer = csv::Writer::from_path(path).map_err(IoError::csv(path))?;
            writer
                .serialize(ReportRow::from(report))
                .map_err(IoError::csv(path))?;
            writer.flush().map_err(IoError::file(path))
        }
    }
}

pub fn read_report_csv(path: impl AsRef<Path>) -> Result<ReportRow, IoError> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(IoError::csv(path))?;
    let row = reader
        .deserialize::<ReportRow>()
        .next()
        .ok_or_else(|| table_error(path, "report CSV has no data row"))?;
    row.map_err(IoError::csv(path))
}

/// One point of a sweep curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub setting: f64,
    pub retained_count: usize,
    pub psnr: f64,
    pub ssim: f64,
    pub fps: f64,
}

/// Appends one sweep point, creating the file (with header) on first use
/// and flushing before returning, so an interrupted sweep loses at most the
/// in-flight setting.
pub fn append_sweep_row(path: impl AsRef<Path>, row: &SweepRow) -> Result<(), IoError> {
    let path = path.as_ref();
    let exists = path.exists();
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(IoError::file(path))?;
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file);
    if !exists {
        writer
            .write_record(["setting", "retained_count", "psnr", "ssim", "fps"])
            .map_err(IoError::csv(path))?;
    }
    writer.serialize(row).map_err(IoError::csv(path))?;
    writer.flush().map_err(IoError::file(path))
}

/// Reads a sweep curve back, in file order.
pub fn read_sweep(path: impl AsRef<Path>) -> Result<Vec<SweepRow>, IoError> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(IoError::csv(path))?;
    let mut rows = Vec::new();
    for record in reader.deserialize::<SweepRow>() {
        rows.push(record.map_err(IoError::csv(path))?);
    }
    Ok(rows)
}
