//! Sequence files (JSON lines, one frame per line), report serialization,
//! and plot-data emission. Reports are byte-deterministic: struct field
//! order plus sorted maps, and no wall-clock anywhere.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{Point2D, PolyLine2D, RigidPose2D};
use crate::matching::{ClassLabel, MapElement};
use crate::metrics::{ApReport, StabilityReport};
use crate::seq::{Frame, Sequence};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}:{line}: {msg}")]
    Invalid {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}: no frames")]
    Empty { path: String },
    #[error("{0}")]
    Mismatch(String),
    #[error("{0}")]
    Plot(String),
    #[error("{path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

/// One frame as serialized. `points` stays a raw coordinate list here so
/// validation can name the offending element rather than surfacing a bare
/// parser error.
#[derive(Debug, Serialize, Deserialize)]
struct FrameRecord {
    scene_id: String,
    frame_index: u64,
    timestamp: f64,
    ego_pose: RigidPose2D,
    #[serde(default)]
    predictions: Vec<PredRecord>,
    #[serde(default)]
    ground_truth: Vec<GtRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PredRecord {
    class: ClassLabel,
    points: Vec<(f64, f64)>,
    score: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct GtRecord {
    class: ClassLabel,
    points: Vec<(f64, f64)>,
    track_id: String,
}

fn record_to_frame(rec: FrameRecord) -> Result<Frame, String> {
    if !rec.timestamp.is_finite() {
        return Err(format!("non-finite timestamp {}", rec.timestamp));
    }
    if ![rec.ego_pose.x, rec.ego_pose.y, rec.ego_pose.yaw]
        .iter()
        .all(|v| v.is_finite())
    {
        return Err("non-finite ego_pose".into());
    }
    let polyline = |points: &[(f64, f64)]| -> Result<PolyLine2D, String> {
        PolyLine2D::new(points.iter().map(|&(x, y)| Point2D::new(x, y)).collect())
            .map_err(|e| e.to_string())
    };
    let mut predictions = Vec::with_capacity(rec.predictions.len());
    for (i, p) in rec.predictions.iter().enumerate() {
        if !p.score.is_finite() || !(0.0..=1.0).contains(&p.score) {
            return Err(format!("predictions[{i}]: score {} outside [0, 1]", p.score));
        }
        predictions.push(MapElement {
            id: format!("p{i}"),
            class: p.class.clone(),
            geometry: polyline(&p.points).map_err(|e| format!("predictions[{i}]: {e}"))?,
            score: Some(p.score),
            gt_track_id: None,
        });
    }
    let mut ground_truth = Vec::with_capacity(rec.ground_truth.len());
    let mut seen = std::collections::BTreeSet::new();
    for (i, g) in rec.ground_truth.iter().enumerate() {
        if g.track_id.is_empty() {
            return Err(format!("ground_truth[{i}]: empty track_id"));
        }
        if !seen.insert(g.track_id.as_str()) {
            return Err(format!(
                "ground_truth[{i}]: duplicate track_id '{}' within frame",
                g.track_id
            ));
        }
        ground_truth.push(MapElement {
            id: format!("g{i}"),
            class: g.class.clone(),
            geometry: polyline(&g.points).map_err(|e| format!("ground_truth[{i}]: {e}"))?,
            score: None,
            gt_track_id: Some(g.track_id.clone()),
        });
    }
    Ok(Frame {
        frame_index: rec.frame_index,
        timestamp: rec.timestamp,
        ego_pose: rec.ego_pose,
        predictions,
        ground_truth,
    })
}

fn frame_to_record(scene_id: &str, frame: &Frame, parts: SequenceParts) -> FrameRecord {
    let tuples = |poly: &PolyLine2D| poly.points().iter().map(|p| (p.x, p.y)).collect();
    FrameRecord {
        scene_id: scene_id.to_string(),
        frame_index: frame.frame_index,
        timestamp: frame.timestamp,
        ego_pose: frame.ego_pose,
        predictions: if parts == SequenceParts::GroundTruthOnly {
            Vec::new()
        } else {
            frame
                .predictions
                .iter()
                .map(|e| PredRecord {
                    class: e.class.clone(),
                    points: tuples(&e.geometry),
                    score: e.score.unwrap_or(0.0),
                })
                .collect()
        },
        ground_truth: if parts == SequenceParts::PredictionsOnly {
            Vec::new()
        } else {
            frame
                .ground_truth
                .iter()
                .map(|e| GtRecord {
                    class: e.class.clone(),
                    points: tuples(&e.geometry),
                    track_id: e
                        .gt_track_id
                        .clone()
                        .expect("ground-truth element carries a track id"),
                })
                .collect()
        },
    }
}

/// Loads a sequence file: parses every line, validates, groups by scene and
/// returns scenes sorted by id. Frame indices must be strictly increasing
/// per scene in file order (scenes may interleave). Errors carry the file
/// path and 1-based line number.
pub fn load_sequences(path: &Path) -> Result<Vec<Sequence>, IoError> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| IoError::Read {
        path: display.clone(),
        source,
    })?;
    let mut scenes: BTreeMap<String, Vec<Frame>> = BTreeMap::new();
    let mut last_index: BTreeMap<String, u64> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: FrameRecord = serde_json::from_str(line).map_err(|e| IoError::Parse {
            path: display.clone(),
            line: lineno,
            msg: e.to_string(),
        })?;
        let scene_id = rec.scene_id.clone();
        if scene_id.is_empty() {
            return Err(IoError::Invalid {
                path: display.clone(),
                line: lineno,
                msg: "empty scene_id".into(),
            });
        }
        if let Some(&prev) = last_index.get(&scene_id) {
            if rec.frame_index <= prev {
                return Err(IoError::Invalid {
                    path: display.clone(),
                    line: lineno,
                    msg: format!(
                        "scene '{scene_id}': frame_index {} not greater than preceding {prev}",
                        rec.frame_index
                    ),
                });
            }
        }
        last_index.insert(scene_id.clone(), rec.frame_index);
        let frame = record_to_frame(rec).map_err(|msg| IoError::Invalid {
            path: display.clone(),
            line: lineno,
            msg,
        })?;
        scenes.entry(scene_id).or_default().push(frame);
    }
    if scenes.is_empty() {
        return Err(IoError::Empty { path: display });
    }
    Ok(scenes
        .into_iter()
        .map(|(scene_id, frames)| Sequence { scene_id, frames })
        .collect())
}

/// Loads predictions and ground truth from two files and aligns them on
/// (scene_id, frame_index). The prediction file's ground_truth arrays and
/// the ground-truth file's prediction arrays are ignored; scene sets and
/// frame sets must coincide and poses must agree to 1e-9. Timestamps come
/// from the prediction side.
pub fn load_split(pred_path: &Path, gt_path: &Path) -> Result<Vec<Sequence>, IoError> {
    let preds = load_sequences(pred_path)?;
    let gts = load_sequences(gt_path)?;
    let gt_by_id: BTreeMap<&str, &Sequence> =
        gts.iter().map(|s| (s.scene_id.as_str(), s)).collect();
    let pred_ids: Vec<&str> = preds.iter().map(|s| s.scene_id.as_str()).collect();
    let gt_ids: Vec<&str> = gts.iter().map(|s| s.scene_id.as_str()).collect();
    if pred_ids != gt_ids {
        return Err(IoError::Mismatch(format!(
            "scene sets differ: predictions {pred_ids:?} vs ground truth {gt_ids:?}"
        )));
    }
    let mut merged = Vec::with_capacity(preds.len());
    for pred_seq in &preds {
        let gt_seq = gt_by_id[pred_seq.scene_id.as_str()];
        if pred_seq.frames.len() != gt_seq.frames.len() {
            return Err(IoError::Mismatch(format!(
                "scene '{}': {} prediction frames vs {} ground-truth frames",
                pred_seq.scene_id,
                pred_seq.frames.len(),
                gt_seq.frames.len()
            )));
        }
        let mut frames = Vec::with_capacity(pred_seq.frames.len());
        for (p, g) in pred_seq.frames.iter().zip(&gt_seq.frames) {
            if p.frame_index != g.frame_index {
                return Err(IoError::Mismatch(format!(
                    "scene '{}': frame_index {} vs {}",
                    pred_seq.scene_id, p.frame_index, g.frame_index
                )));
            }
            let pose_gap = (p.ego_pose.x - g.ego_pose.x)
                .abs()
                .max((p.ego_pose.y - g.ego_pose.y).abs())
                .max((p.ego_pose.yaw - g.ego_pose.yaw).abs());
            if pose_gap > 1e-9 {
                return Err(IoError::Mismatch(format!(
                    "scene '{}' frame {}: ego poses disagree by {pose_gap:e}",
                    pred_seq.scene_id, p.frame_index
                )));
            }
            frames.push(Frame {
                frame_index: p.frame_index,
                timestamp: p.timestamp,
                ego_pose: p.ego_pose,
                predictions: p.predictions.clone(),
                ground_truth: g.ground_truth.clone(),
            });
        }
        merged.push(Sequence {
            scene_id: pred_seq.scene_id.clone(),
            frames,
        });
    }
    Ok(merged)
}

/// Which halves of each frame a sequence file carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceParts {
    Combined,
    PredictionsOnly,
    GroundTruthOnly,
}

/// Writes sequences as JSON lines, one frame per line, scenes in the order
/// given.
pub fn write_sequences(
    path: &Path,
    sequences: &[Sequence],
    parts: SequenceParts,
) -> Result<(), IoError> {
    let display = path.display().to_string();
    let wrap = |source| IoError::Write {
        path: display.clone(),
        source,
    };
    let mut out = Vec::new();
    for seq in sequences {
        for frame in &seq.frames {
            let rec = frame_to_record(&seq.scene_id, frame, parts);
            serde_json::to_writer(&mut out, &rec).expect("frame record serializes");
            out.push(b'\n');
        }
    }
    fs::write(path, out).map_err(wrap)
}

/// SHA-256 of a file, lowercase hex.
pub fn sha256_hex_file(path: &Path) -> Result<String, IoError> {
    let bytes = fs::read(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// The serialized result of one run: metrics plus everything needed to
/// reproduce them (config echo, input digests, toolkit version). Identical
/// inputs and config produce byte-identical files — there is deliberately no
/// timestamp field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub tool: String,
    pub version: String,
    /// input role ("combined" | "pred" | "gt" | "config") → SHA-256 hex
    pub inputs: BTreeMap<String, String>,
    pub stability: StabilityReport,
    pub ap: ApReport,
}

impl ReportFile {
    pub fn new(
        inputs: BTreeMap<String, String>,
        stability: StabilityReport,
        ap: ApReport,
    ) -> Self {
        ReportFile {
            tool: "mapstab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            inputs,
            stability,
            ap,
        }
    }

    /// Machine format: pretty JSON, scores on their native 0–1 scale.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json_file(path: &Path) -> Result<Self, IoError> {
        let display = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| IoError::Read {
            path: display.clone(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| IoError::Parse {
            path: display,
            line: e.line(),
            msg: e.to_string(),
        })
    }

    pub fn write_json_file(&self, path: &Path) -> Result<(), IoError> {
        fs::write(path, self.to_json()).map_err(|source| IoError::Write {
            path: path.display().to_string(),
            source,
        })
    }
}

fn fmt_pct(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:.2}", v * 100.0),
        None => "-".into(),
    }
}

/// Human format: a fixed-width table with all scores scaled to 0–100.
pub fn render_human(report: &ReportFile) -> String {
    let mut out = String::new();
    let cfg = &report.stability.config;
    out.push_str(&format!("{} {}\n", report.tool, report.version));
    out.push_str(&format!(
        "config: m={} n_samples={} tau={} beta={} omega={} match_gate={} loc_map={} seed={} range=[{},{}]x[{},{}]\n",
        cfg.m,
        cfg.n_samples,
        cfg.tau,
        cfg.beta,
        cfg.omega,
        cfg.match_gate,
        match cfg.loc_map {
            crate::config::LocMap::Linear => "linear",
            crate::config::LocMap::Exp => "exp",
        },
        cfg.seed,
        cfg.range.x_min,
        cfg.range.x_max,
        cfg.range.y_min,
        cfg.range.y_max,
    ));
    out.push_str(&format!(
        "pairs: {}   scenes skipped: {}\n\n",
        report.stability.pair_count, report.stability.skipped_scene_count
    ));

    let classes: Vec<&ClassLabel> = {
        let mut set: Vec<&ClassLabel> = report.stability.per_class.keys().collect();
        for c in report.ap.per_class.keys() {
            if !report.stability.per_class.contains_key(c) {
                set.push(c);
            }
        }
        set
    };
    let name_width = classes
        .iter()
        .map(|c| c.name().len())
        .chain(["class".len()])
        .max()
        .unwrap();
    out.push_str(&format!(
        "{:<name_width$}  {:>9} {:>9} {:>9} {:>9} {:>9} {:>10} {:>10}\n",
        "class", "presence", "loc", "shape", "stability", "ap", "instances", "one-sided"
    ));
    for class in classes {
        let s = report.stability.per_class.get(class);
        let ap = report.ap.per_class.get(class).copied();
        out.push_str(&format!(
            "{:<name_width$}  {:>9} {:>9} {:>9} {:>9} {:>9} {:>10} {:>10}\n",
            class.name(),
            fmt_pct(s.map(|s| s.presence_mean)),
            fmt_pct(s.map(|s| s.loc_mean)),
            fmt_pct(s.map(|s| s.shape_mean)),
            fmt_pct(s.map(|s| s.stability_mean)),
            fmt_pct(ap),
            s.map_or("-".into(), |s| s.instance_count.to_string()),
            s.map_or("-".into(), |s| s.one_sided_count.to_string()),
        ));
    }
    out.push('\n');
    out.push_str(&format!(
        "mAS: {}   (matched-only: {})\n",
        fmt_pct(report.stability.mas),
        fmt_pct(report.stability.mas_matched_only)
    ));
    let gates = report
        .ap
        .thresholds
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join("/");
    out.push_str(&format!(
        "mAP: {}   (chamfer gates {gates} m)\n",
        fmt_pct(report.ap.map)
    ));
    out
}

/// The CSV series the `plot-data` command emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// One row per report: frame-local accuracy vs temporal stability.
    ScatterMapMas,
    /// One report, one row per class: the four sub-metrics side by side.
    PerClassBars,
    /// One row per report ordered by its temporal window m.
    MSweep,
}

impl std::str::FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scatter_map_mas" => Ok(PlotKind::ScatterMapMas),
            "per_class_bars" => Ok(PlotKind::PerClassBars),
            "m_sweep" => Ok(PlotKind::MSweep),
            other => Err(format!(
                "unknown plot kind '{other}' (expected scatter_map_mas, per_class_bars, or m_sweep)"
            )),
        }
    }
}

fn require(v: Option<f64>, what: &str, label: &str) -> Result<f64, IoError> {
    v.ok_or_else(|| IoError::Plot(format!("report '{label}' has no {what}")))
}

/// Flattens reports into one CSV table for external plotting. All scores on
/// the 0–100 scale.
pub fn emit_plot_data<W: Write>(
    kind: PlotKind,
    reports: &[(String, ReportFile)],
    out: W,
) -> Result<(), IoError> {
    if reports.is_empty() {
        return Err(IoError::Plot("no reports given".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    let emit = |e: csv::Error| IoError::Plot(e.to_string());
    match kind {
        PlotKind::ScatterMapMas => {
            w.write_record(["label", "map", "mas"]).map_err(emit)?;
            for (label, r) in reports {
                w.write_record([
                    label.clone(),
                    format!("{:.4}", require(r.ap.map, "mAP", label)? * 100.0),
                    format!("{:.4}", require(r.stability.mas, "mAS", label)? * 100.0),
                ])
                .map_err(emit)?;
            }
        }
        PlotKind::PerClassBars => {
            if reports.len() != 1 {
                return Err(IoError::Plot(format!(
                    "per_class_bars takes exactly one report, got {}",
                    reports.len()
                )));
            }
            let (_, r) = &reports[0];
            w.write_record([
                "class",
                "presence",
                "loc",
                "shape",
                "stability",
                "instances",
                "one_sided",
            ])
            .map_err(emit)?;
            for (class, s) in &r.stability.per_class {
                w.write_record([
                    class.name().to_string(),
                    format!("{:.4}", s.presence_mean * 100.0),
                    format!("{:.4}", s.loc_mean * 100.0),
                    format!("{:.4}", s.shape_mean * 100.0),
                    format!("{:.4}", s.stability_mean * 100.0),
                    s.instance_count.to_string(),
                    s.one_sided_count.to_string(),
                ])
                .map_err(emit)?;
            }
        }
        PlotKind::MSweep => {
            let mut ordered: Vec<&(String, ReportFile)> = reports.iter().collect();
            ordered.sort_by_key(|(_, r)| r.stability.config.m);
            w.write_record(["m", "presence", "loc", "shape", "mas", "mas_matched_only"])
                .map_err(emit)?;
            for (label, r) in ordered {
                let n = r.stability.per_class.len() as f64;
                if n == 0.0 {
                    return Err(IoError::Plot(format!("report '{label}' has no classes")));
                }
                let macro_mean = |f: fn(&crate::metrics::ClassStability) -> f64| {
                    r.stability.per_class.values().map(f).sum::<f64>() / n
                };
                w.write_record([
                    r.stability.config.m.to_string(),
                    format!("{:.4}", macro_mean(|c| c.presence_mean) * 100.0),
                    format!("{:.4}", macro_mean(|c| c.loc_mean) * 100.0),
                    format!("{:.4}", macro_mean(|c| c.shape_mean) * 100.0),
                    format!("{:.4}", require(r.stability.mas, "mAS", label)? * 100.0),
                    format!(
                        "{:.4}",
                        require(r.stability.mas_matched_only, "matched-only mAS", label)? * 100.0
                    ),
                ])
                .map_err(emit)?;
            }
        }
    }
    w.flush().map_err(|e| IoError::Plot(e.to_string()))?;
    Ok(())
}
