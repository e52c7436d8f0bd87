//! File formats: binary traces, JSON sidecars, CSV datasets and models.
//!
//! Trace binary layout (little-endian):
//!
//! ```text
//! u32 magic 0x53484C44 | u32 version | f64 sample_rate | u64 count
//! count × (f32 re, f32 im)
//! ```
//!
//! Ground truth travels in a JSON sidecar next to the trace. Profile
//! datasets are CSV with columns `f0..f487` plus a `label` column encoded
//! `1` (legitimate), `-1` (attack) or `0` (unlabeled). Models are versioned
//! JSON.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{GroundTruth, Trace};
use crate::dtw::{Label, ProfileVector, PROFILE_LEN};
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::guard::{MetricsReport, MetricsRow};
use crate::ocsvm::OcsvmModel;
use crate::segment::Segment;

pub const TRACE_MAGIC: u32 = 0x5348_4C44;
pub const TRACE_VERSION: u32 = 1;
pub const MODEL_VERSION: u32 = 1;

/// Write a trace in the binary format. Samples are stored as interleaved
/// `f32` pairs, so sub-`f32` precision is not preserved on disk.
pub fn write_trace(path: &Path, trace: &Trace) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&TRACE_MAGIC.to_le_bytes())?;
    w.write_all(&TRACE_VERSION.to_le_bytes())?;
    w.write_all(&trace.sample_rate.to_le_bytes())?;
    w.write_all(&(trace.samples.len() as u64).to_le_bytes())?;
    for s in &trace.samples {
        w.write_all(&(s.re as f32).to_le_bytes())?;
        w.write_all(&(s.im as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read a trace written by [`write_trace`]. Ground truth, if any, must be
/// loaded separately from its sidecar.
pub fn read_trace(path: &Path) -> Result<Trace> {
    let mut r = BufReader::new(File::open(path)?);
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    if u32::from_le_bytes(u32buf) != TRACE_MAGIC {
        return Err(Error::Format("bad trace magic".into()));
    }
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != TRACE_VERSION {
        return Err(Error::Format(format!("unsupported trace version {version}")));
    }
    let mut f64buf = [0u8; 8];
    r.read_exact(&mut f64buf)?;
    let sample_rate = f64::from_le_bytes(f64buf);
    r.read_exact(&mut f64buf)?;
    let count = u64::from_le_bytes(f64buf) as usize;
    let mut samples = Vec::with_capacity(count);
    let mut f32buf = [0u8; 4];
    for _ in 0..count {
        r.read_exact(&mut f32buf)?;
        let re = f32::from_le_bytes(f32buf) as f64;
        r.read_exact(&mut f32buf)?;
        let im = f32::from_le_bytes(f32buf) as f64;
        samples.push(Complex64::new(re, im));
    }
    Ok(Trace {
        samples,
        sample_rate,
        truth: None,
    })
}

/// Write the ground-truth sidecar.
pub fn write_truth(path: &Path, truth: &GroundTruth) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, truth)?;
    w.flush()?;
    Ok(())
}

pub fn read_truth(path: &Path) -> Result<GroundTruth> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

#[derive(Serialize, Deserialize)]
struct SegmentExport {
    eta1: usize,
    eta2: usize,
    eta3: usize,
    eta4: usize,
    eta_s: usize,
    eta_e: usize,
    per_tag_energy: Vec<f64>,
}

/// Export segmentation landmarks for debugging; the sample payload is
/// recomputable and not persisted.
pub fn write_segment(path: &Path, segment: &Segment) -> Result<()> {
    let export = SegmentExport {
        eta1: segment.eta1,
        eta2: segment.eta2,
        eta3: segment.eta3,
        eta4: segment.eta4,
        eta_s: segment.eta_s,
        eta_e: segment.eta_e,
        per_tag_energy: segment.per_tag_energy.clone(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &export)?;
    w.flush()?;
    Ok(())
}

/// Feature CSV: one column per series, each padded (with empty cells) to the
/// longest series; block features keep their own length.
pub fn write_features(path: &Path, features: &FeatureSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["original", "smoothed", "envelope", "variance", "maximum", "minimum"])?;
    let columns: [&[f64]; 6] = [
        &features.original,
        &features.smoothed,
        &features.envelope,
        &features.variance,
        &features.maximum,
        &features.minimum,
    ];
    let rows = columns.iter().map(|c| c.len()).max().unwrap_or(0);
    for i in 0..rows {
        let record: Vec<String> = columns
            .iter()
            .map(|c| c.get(i).map(|v| v.to_string()).unwrap_or_default())
            .collect();
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

fn label_code(label: Option<Label>) -> &'static str {
    match label {
        Some(Label::Legitimate) => "1",
        Some(Label::Attack) => "-1",
        None => "0",
    }
}

fn parse_label(s: &str) -> Result<Option<Label>> {
    match s.trim() {
        "1" => Ok(Some(Label::Legitimate)),
        "-1" => Ok(Some(Label::Attack)),
        "0" | "" => Ok(None),
        other => Err(Error::Format(format!("unknown label {other:?}"))),
    }
}

/// Write a profile dataset: header `f0..f487,label`, one row per profile.
pub fn write_profiles(path: &Path, profiles: &[ProfileVector]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..PROFILE_LEN).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for p in profiles {
        let mut record: Vec<String> = p.values.iter().map(|v| v.to_string()).collect();
        record.push(label_code(p.label).to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a profile dataset written by [`write_profiles`].
pub fn read_profiles(path: &Path) -> Result<Vec<ProfileVector>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.len() != PROFILE_LEN + 1 {
        return Err(Error::Format(format!(
            "dataset has {} columns, expected {}",
            headers.len(),
            PROFILE_LEN + 1
        )));
    }
    let mut profiles = Vec::new();
    for record in r.records() {
        let record = record?;
        let mut values = Vec::with_capacity(PROFILE_LEN);
        for field in record.iter().take(PROFILE_LEN) {
            values.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad profile value {field:?}")))?,
            );
        }
        let label = parse_label(record.get(PROFILE_LEN).unwrap_or(""))?;
        profiles.push(ProfileVector::new(values, label)?);
    }
    Ok(profiles)
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    nu: f64,
    sigma: f64,
    rho: f64,
    training_size: usize,
    alphas: Vec<f64>,
    support_vectors: Vec<Vec<f64>>,
}

/// Persist a trained model as versioned JSON.
pub fn write_model(path: &Path, model: &OcsvmModel) -> Result<()> {
    let file = ModelFile {
        version: MODEL_VERSION,
        nu: model.nu,
        sigma: model.sigma,
        rho: model.rho,
        training_size: model.training_size,
        alphas: model.alphas.clone(),
        support_vectors: model.support_vectors.clone(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &file)?;
    w.flush()?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<OcsvmModel> {
    let file: ModelFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    if file.version != MODEL_VERSION {
        return Err(Error::Format(format!(
            "unsupported model version {}",
            file.version
        )));
    }
    let model = OcsvmModel {
        support_vectors: file.support_vectors,
        alphas: file.alphas,
        rho: file.rho,
        sigma: file.sigma,
        nu: file.nu,
        training_size: file.training_size,
    };
    model.validate()?;
    Ok(model)
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Metrics CSV: one row per report row.
pub fn write_metrics_csv(path: &Path, report: &MetricsReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "scenario",
        "sweep_key",
        "sweep_value",
        "trials",
        "tp_rate",
        "fp_rate",
        "failures",
    ])?;
    for row in &report.rows {
        w.write_record(&[
            row.scenario.clone(),
            row.sweep_key.clone(),
            opt_cell(row.sweep_value),
            row.trials.to_string(),
            opt_cell(row.tp_rate),
            opt_cell(row.fp_rate),
            row.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// JSON mirror of the metrics report for tooling.
pub fn write_metrics_json(path: &Path, report: &MetricsReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, report)?;
    w.flush()?;
    Ok(())
}

/// Rows from a metrics CSV (used by tests and tooling).
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record?;
        let parse_opt = |s: &str| -> Result<Option<f64>> {
            let s = s.trim();
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::Format(format!("bad metric value {s:?}")))
            }
        };
        rows.push(MetricsRow {
            scenario: record.get(0).unwrap_or("").to_string(),
            sweep_key: record.get(1).unwrap_or("").to_string(),
            sweep_value: parse_opt(record.get(2).unwrap_or(""))?,
            trials: record
                .get(3)
                .unwrap_or("0")
                .trim()
                .parse()
                .map_err(|_| Error::Format("bad trials".into()))?,
            tp_rate: parse_opt(record.get(4).unwrap_or(""))?,
            fp_rate: parse_opt(record.get(5).unwrap_or(""))?,
            failures: record
                .get(6)
                .unwrap_or("0")
                .trim()
                .parse()
                .map_err(|_| Error::Format("bad failures".into()))?,
        });
    }
    Ok(rows)
}
