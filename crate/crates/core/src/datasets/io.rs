use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, Repetition, RepetitionSource};
use crate::augmentation::Provenance;
use crate::labeling::Label;
use crate::rotation::{ImuSample, OrientationTrajectory, Quaternion, UNIT_TOLERANCE};
use crate::{Error, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    /// Per-segment quaternions (w, x, y, z).
    #[default]
    Orientation,
    /// Per-segment gyroscope (rad/s) and accelerometer readings.
    Inertial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentEntry {
    pub id: String,
    /// Static frames `[start, end)` used for sensor-to-segment calibration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_window: Option<[usize; 2]>,
    /// Segment orientation during the static window; identity if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Quaternion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionEntry {
    pub id: String,
    pub subject_id: String,
    pub label: Label,
    #[serde(default)]
    pub source: RepetitionSource,
    /// Path of the repetition CSV, relative to the manifest.
    pub file: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rater_labels: Vec<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub exercise_id: String,
    #[serde(default)]
    pub data_kind: DataKind,
    pub sample_rate: f64,
    pub segments: Vec<SegmentEntry>,
    pub subjects: Vec<String>,
    pub repetitions: Vec<RepetitionEntry>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        m.validate(path)?;
        Ok(m)
    }

    fn validate(&self, path: &Path) -> Result<()> {
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::parse(
                path,
                format!(
                    "manifest schema version {} not supported (expected {MANIFEST_SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::parse(path, "sample_rate must be positive"));
        }
        if self.segments.is_empty() {
            return Err(Error::parse(path, "manifest lists no segments"));
        }
        let mut seen = BTreeSet::new();
        for s in &self.segments {
            if !seen.insert(&s.id) {
                return Err(Error::parse(path, format!("duplicate segment {}", s.id)));
            }
        }
        let mut ids = BTreeSet::new();
        for r in &self.repetitions {
            if !ids.insert(&r.id) {
                return Err(Error::parse(
                    path,
                    format!("duplicate repetition id {}", r.id),
                ));
            }
        }
        Ok(())
    }

    fn base_dir(path: &Path) -> PathBuf {
        path.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

fn quaternion_header(segments: &[SegmentEntry]) -> Vec<String> {
    let mut h = vec!["frame".to_string()];
    for s in segments {
        for c in ["w", "x", "y", "z"] {
            h.push(format!("{}.{c}", s.id));
        }
    }
    h
}

fn inertial_header(segments: &[SegmentEntry]) -> Vec<String> {
    let mut h = vec!["frame".to_string()];
    for s in segments {
        for c in ["gx", "gy", "gz", "ax", "ay", "az"] {
            h.push(format!("{}.{c}", s.id));
        }
    }
    h
}

/// Reads a numeric CSV with the expected header; returns rows without the
/// frame column.
fn read_table(path: &Path, header: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    })?;
    let found: Vec<String> = reader
        .headers()
        .map_err(|e| Error::parse(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if found != header {
        return Err(Error::parse(
            path,
            format!("unexpected columns {found:?}, expected {header:?}"),
        ));
    }
    let mut rows = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Validation {
            path: path.into(),
            row,
            message: e.to_string(),
        })?;
        let frame: usize = record[0].trim().parse().map_err(|_| Error::Validation {
            path: path.into(),
            row,
            message: format!("bad frame index {:?}", &record[0]),
        })?;
        if frame != row {
            return Err(Error::Validation {
                path: path.into(),
                row,
                message: format!("frame index {frame} out of sequence"),
            });
        }
        let values = record
            .iter()
            .skip(1)
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Validation {
                        path: path.into(),
                        row,
                        message: format!("bad number {v:?}"),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(values);
    }
    Ok(rows)
}

fn read_repetition_csv(
    path: &Path,
    segments: &[SegmentEntry],
    sample_rate: f64,
) -> Result<Vec<OrientationTrajectory>> {
    let rows = read_table(path, &quaternion_header(segments))?;
    let mut per_segment = vec![Vec::with_capacity(rows.len()); segments.len()];
    for (row, values) in rows.iter().enumerate() {
        for (s, chunk) in values.chunks_exact(4).enumerate() {
            let q = Quaternion::new(chunk[0], chunk[1], chunk[2], chunk[3]);
            if !q.is_unit(UNIT_TOLERANCE) {
                return Err(Error::Validation {
                    path: path.into(),
                    row,
                    message: format!(
                        "segment {}: quaternion norm {} is not unit",
                        segments[s].id,
                        q.norm()
                    ),
                });
            }
            per_segment[s].push(q);
        }
    }
    segments
        .iter()
        .zip(per_segment)
        .map(|(seg, samples)| {
            OrientationTrajectory::new(seg.id.clone(), sample_rate, samples)
                .map_err(|e| Error::parse(path, format!("segment {}: {e}", seg.id)))
        })
        .collect()
}

pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest = DatasetManifest::load(manifest_path)?;
    if manifest.data_kind != DataKind::Orientation {
        return Err(Error::parse(
            manifest_path,
            "manifest holds raw inertial data; run preprocessing first",
        ));
    }
    let base = DatasetManifest::base_dir(manifest_path);
    let mut repetitions = Vec::with_capacity(manifest.repetitions.len());
    for entry in &manifest.repetitions {
        let path = base.join(&entry.file);
        let trajs = read_repetition_csv(&path, &manifest.segments, manifest.sample_rate)?;
        let mut rep = Repetition::new(
            entry.id.clone(),
            entry.subject_id.clone(),
            manifest.exercise_id.clone(),
            entry.label,
            trajs,
        )?;
        rep.source = entry.source;
        rep.rater_labels = entry.rater_labels.clone();
        rep.provenance = entry.provenance.clone();
        repetitions.push(rep);
    }
    Ok(Dataset {
        exercise_id: manifest.exercise_id,
        sample_rate: manifest.sample_rate,
        segments: manifest.segments,
        repetitions,
    })
}

fn file_name_for(id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("reps/{safe}.csv")
}

/// Writes `manifest.json` and one CSV per repetition under `dir`. Values are
/// written with 17 significant digits, so loading reproduces them bit-exactly.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<DatasetManifest> {
    let reps_dir = dir.join("reps");
    std::fs::create_dir_all(&reps_dir).map_err(|e| Error::io(&reps_dir, e))?;
    let order = dataset.segment_ids();
    let header = quaternion_header(&dataset.segments);
    let mut entries = Vec::with_capacity(dataset.repetitions.len());
    let mut used = BTreeSet::new();
    for rep in &dataset.repetitions {
        let mut file = file_name_for(&rep.id);
        let mut n = 1;
        while !used.insert(file.clone()) {
            file = format!(
                "{}-{n}.csv",
                file_name_for(&rep.id).trim_end_matches(".csv")
            );
            n += 1;
        }
        let path = dir.join(&file);
        let trajs = order
            .iter()
            .map(|id| {
                rep.trajectory(id).ok_or_else(|| {
                    Error::InvalidArgument(format!("repetition {} lacks segment {id}", rep.id))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::parse(&path, e))?;
        w.write_record(&header)
            .map_err(|e| Error::parse(&path, e))?;
        let mut record = Vec::with_capacity(header.len());
        for frame in 0..rep.len() {
            record.clear();
            record.push(frame.to_string());
            for t in &trajs {
                for v in t.samples()[frame].to_array() {
                    record.push(format!("{v:.16e}"));
                }
            }
            w.write_record(&record)
                .map_err(|e| Error::parse(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        entries.push(RepetitionEntry {
            id: rep.id.clone(),
            subject_id: rep.subject_id.clone(),
            label: rep.label,
            source: rep.source,
            file,
            rater_labels: rep.rater_labels.clone(),
            provenance: rep.provenance.clone(),
        });
    }
    let manifest = DatasetManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        exercise_id: dataset.exercise_id.clone(),
        data_kind: DataKind::Orientation,
        sample_rate: dataset.sample_rate,
        segments: dataset.segments.clone(),
        subjects: dataset.subjects(),
        repetitions: entries,
    };
    write_manifest(&manifest, &dir.join("manifest.json"))?;
    Ok(manifest)
}

pub(crate) fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Raw inertial stream of one repetition: per segment, one sample per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct InertialRecording {
    pub entry: RepetitionEntry,
    pub segments: Vec<Vec<ImuSample>>,
}

/// Loads an inertial-kind dataset without running any filtering.
pub fn load_inertial(manifest_path: &Path) -> Result<(DatasetManifest, Vec<InertialRecording>)> {
    let manifest = DatasetManifest::load(manifest_path)?;
    if manifest.data_kind != DataKind::Inertial {
        return Err(Error::parse(
            manifest_path,
            "manifest does not hold inertial data",
        ));
    }
    let base = DatasetManifest::base_dir(manifest_path);
    let dt = 1.0 / manifest.sample_rate;
    let header = inertial_header(&manifest.segments);
    let mut out = Vec::with_capacity(manifest.repetitions.len());
    for entry in &manifest.repetitions {
        let path = base.join(&entry.file);
        let rows = read_table(&path, &header)?;
        let mut segments = vec![Vec::with_capacity(rows.len()); manifest.segments.len()];
        for values in &rows {
            for (s, c) in values.chunks_exact(6).enumerate() {
                segments[s].push(ImuSample {
                    gyro: [c[0], c[1], c[2]],
                    accel: [c[3], c[4], c[5]],
                    dt,
                });
            }
        }
        out.push(InertialRecording {
            entry: entry.clone(),
            segments,
        });
    }
    Ok((manifest, out))
}

/// Writes an inertial-kind dataset (used to build raw test fixtures).
pub fn save_inertial(
    manifest: &DatasetManifest,
    recordings: &[InertialRecording],
    dir: &Path,
) -> Result<()> {
    let header = inertial_header(&manifest.segments);
    for rec in recordings {
        let path = dir.join(&rec.entry.file);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::parse(&path, e))?;
        w.write_record(&header)
            .map_err(|e| Error::parse(&path, e))?;
        let frames = rec.segments.first().map_or(0, Vec::len);
        for frame in 0..frames {
            let mut record = vec![frame.to_string()];
            for seg in &rec.segments {
                let s = &seg[frame];
                for v in s.gyro.iter().chain(&s.accel) {
                    record.push(format!("{v:.16e}"));
                }
            }
            w.write_record(&record)
                .map_err(|e| Error::parse(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    let mut m = manifest.clone();
    m.data_kind = DataKind::Inertial;
    m.repetitions = recordings.iter().map(|r| r.entry.clone()).collect();
    write_manifest(&m, &dir.join("manifest.json"))
}
