//! Text file formats.
//!
//! * Capture: one frame per line, 60 numbers `x1 y1 z1 … x20 y20 z20` in joint
//!   index order, separated by whitespace and/or commas.
//! * Annotation: one window per line, `start_frame end_frame label`, 0-based
//!   inclusive frame indices, label 1 or 2.
//! * Features: one sample per line, the label followed by 22 values.
//!
//! In all three, blank lines and lines starting with `#` are ignored.

use std::fs;
use std::path::Path;

use crate::skeleton::{
    canonical_topology, window_features, ActionWindow, ClassLabel, FeatureVector, SkeletonFrame,
    Vec3, ANGLE_COUNT, JOINT_COUNT,
};

use super::HarnessError;

/// One annotated window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Annotation {
    pub start_frame: usize,
    pub end_frame: usize,
    pub label: ClassLabel,
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
}

fn parse_error(source: &str, line: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::Parse {
        input: source.to_string(),
        line,
        message: message.into(),
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a capture file. `source` names the input in error messages.
pub fn parse_capture(text: &str, source: &str) -> Result<Vec<SkeletonFrame>, HarnessError> {
    let mut frames = Vec::new();
    for (line_no, line) in data_lines(text) {
        let values = fields(line)
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| parse_error(source, line_no, format!("bad number {f:?}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != 3 * JOINT_COUNT {
            return Err(parse_error(
                source,
                line_no,
                format!("expected {} fields, found {}", 3 * JOINT_COUNT, values.len()),
            ));
        }
        let mut positions = [[0.0; 3]; JOINT_COUNT];
        for (p, chunk) in positions.iter_mut().zip(values.chunks_exact(3)) {
            *p = [chunk[0], chunk[1], chunk[2]];
        }
        let frame = SkeletonFrame::new(positions, frames.len())
            .map_err(|e| parse_error(source, line_no, e.to_string()))?;
        frames.push(frame);
    }
    Ok(frames)
}

pub fn write_capture(frames: &[SkeletonFrame]) -> String {
    let mut out = String::from("# x1 y1 z1 ... x20 y20 z20, joints in canonical index order\n");
    for frame in frames {
        let line: Vec<String> = frame
            .positions
            .iter()
            .flat_map(|p: &Vec3| p.iter().map(|v| format!("{v:.6}")))
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_annotations(text: &str, source: &str) -> Result<Vec<Annotation>, HarnessError> {
    data_lines(text)
        .map(|(line_no, line)| {
            let f: Vec<&str> = fields(line).collect();
            if f.len() != 3 {
                return Err(parse_error(
                    source,
                    line_no,
                    format!("expected `start end label`, found {} fields", f.len()),
                ));
            }
            let num = |s: &str, what: &str| {
                s.parse::<usize>()
                    .map_err(|e| parse_error(source, line_no, format!("bad {what} {s:?}: {e}")))
            };
            let start_frame = num(f[0], "start frame")?;
            let end_frame = num(f[1], "end frame")?;
            let label = num(f[2], "label")?;
            let label = ClassLabel::from_number(label as u32)
                .filter(|_| label <= 2)
                .ok_or_else(|| parse_error(source, line_no, format!("label must be 1 or 2, got {label}")))?;
            if end_frame <= start_frame {
                return Err(parse_error(
                    source,
                    line_no,
                    format!("window {start_frame}..{end_frame} needs at least two frames"),
                ));
            }
            Ok(Annotation {
                start_frame,
                end_frame,
                label,
            })
        })
        .collect()
}

pub fn write_annotations(annotations: &[Annotation]) -> String {
    let mut out = String::from("# start_frame end_frame label\n");
    for a in annotations {
        out.push_str(&format!("{} {} {}\n", a.start_frame, a.end_frame, a.label));
    }
    out
}

/// Cuts annotated windows out of a frame stream and extracts their features.
pub fn extract_features(
    frames: &[SkeletonFrame],
    annotations: &[Annotation],
    source_id: &str,
) -> Result<Vec<FeatureVector>, HarnessError> {
    let topology = canonical_topology();
    annotations
        .iter()
        .enumerate()
        .map(|(i, a)| {
            if a.end_frame >= frames.len() {
                return Err(HarnessError::WindowOutOfRange {
                    annotation: i + 1,
                    start: a.start_frame,
                    end: a.end_frame,
                    frames: frames.len(),
                });
            }
            let window = ActionWindow {
                frames: frames[a.start_frame..=a.end_frame].to_vec(),
                label: Some(a.label),
                source_id: format!("{source_id}#{}", i + 1),
            };
            window_features(&window, &topology).map_err(|source| HarnessError::Skeleton {
                context: format!("annotation {} (frames {}..={})", i + 1, a.start_frame, a.end_frame),
                source,
            })
        })
        .collect()
}

/// Reads a capture and its annotation file and returns one labelled feature
/// vector per annotation line.
pub fn load_dataset(capture_path: &Path, annotation_path: &Path) -> Result<Vec<FeatureVector>, HarnessError> {
    let capture_name = capture_path.display().to_string();
    let frames = parse_capture(&read_file(capture_path)?, &capture_name)?;
    let annotations = parse_annotations(
        &read_file(annotation_path)?,
        &annotation_path.display().to_string(),
    )?;
    extract_features(&frames, &annotations, &capture_name)
}

pub fn parse_features(text: &str, source: &str) -> Result<Vec<FeatureVector>, HarnessError> {
    data_lines(text)
        .map(|(line_no, line)| {
            let f: Vec<&str> = fields(line).collect();
            if f.len() != ANGLE_COUNT + 1 {
                return Err(parse_error(
                    source,
                    line_no,
                    format!("expected label and {ANGLE_COUNT} features, found {} fields", f.len()),
                ));
            }
            let label = f[0]
                .parse::<u32>()
                .ok()
                .and_then(ClassLabel::from_number)
                .ok_or_else(|| parse_error(source, line_no, format!("label must be 1 or 2, got {:?}", f[0])))?;
            let mut values = [0.0; ANGLE_COUNT];
            for (v, s) in values.iter_mut().zip(&f[1..]) {
                *v = s
                    .parse::<f64>()
                    .map_err(|e| parse_error(source, line_no, format!("bad number {s:?}: {e}")))?;
                if !v.is_finite() || *v < 0.0 {
                    return Err(parse_error(
                        source,
                        line_no,
                        format!("feature values must be finite and non-negative, got {v}"),
                    ));
                }
            }
            Ok(FeatureVector {
                values,
                label: Some(label),
            })
        })
        .collect()
}

/// Writes labelled features. Values use the shortest representation that
/// reads back to the same `f64`.
pub fn write_features(features: &[FeatureVector]) -> Result<String, HarnessError> {
    let mut out = String::from("# label followed by 22 joint-angle variances (rad^2)\n");
    for (i, fv) in features.iter().enumerate() {
        let label = fv
            .label
            .ok_or_else(|| HarnessError::Config(format!("feature vector {i} has no label")))?;
        out.push_str(&label.to_string());
        for v in &fv.values {
            out.push_str(&format!(" {v}"));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn load_features(path: &Path) -> Result<Vec<FeatureVector>, HarnessError> {
    parse_features(&read_file(path)?, &path.display().to_string())
}
