//! Region overlap metrics and sequence reports.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgcore::{Label, LabelMap};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("{preds} predicted frames vs {gts} ground-truth frames")]
    LengthMismatch { preds: usize, gts: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Pixel counts for one object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn iou(&self) -> f64 {
        let union = self.tp + self.fp + self.fn_;
        if union == 0 {
            return 1.0;
        }
        self.tp as f64 / union as f64
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        if self.tp + self.fp + self.fn_ == 0 {
            return 1.0;
        }
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn confusion(pred: &LabelMap, gt: &LabelMap, object: Label) -> Result<Confusion, EvalError> {
    if pred.dims() != gt.dims() {
        return Err(EvalError::DimensionMismatch(pred.dims(), gt.dims()));
    }
    let mut c = Confusion::default();
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        match (p == object, g == object) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(c)
}

/// Intersection over union of object `object`; 1 when both maps lack it.
pub fn iou(pred: &LabelMap, gt: &LabelMap, object: Label) -> Result<f64, EvalError> {
    Ok(confusion(pred, gt, object)?.iou())
}

/// Harmonic mean of precision and recall; 1 when both maps lack the object.
pub fn f1(pred: &LabelMap, gt: &LabelMap, object: Label) -> Result<f64, EvalError> {
    Ok(confusion(pred, gt, object)?.f1())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectScore {
    pub object: Label,
    pub iou: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// Scores of one frame. `iou` and `f1` average the objects; the counts sum
/// them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub t: usize,
    pub iou: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub markers: usize,
    pub seconds: f64,
    pub objects: Vec<ObjectScore>,
}

/// User effort spent on one correction of frame `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortEntry {
    pub t: usize,
    pub markers: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub sequence: String,
    pub mode: String,
    pub config: serde_json::Value,
    pub frames: Vec<FrameScore>,
    pub mean_iou: f64,
    pub mean_f1: f64,
    pub frames_corrected_fraction: f64,
    /// Mean IoU of each object over the sequence, in object order.
    pub object_mean_iou: Vec<f64>,
    pub total_markers: usize,
    pub total_seconds: f64,
}

impl SequenceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save_json(&self, path: &Path) -> Result<(), EvalError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self, EvalError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Descriptive fields copied into a report.
#[derive(Debug, Clone, Default)]
pub struct ReportMeta {
    pub sequence: String,
    pub mode: String,
    pub config: serde_json::Value,
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    values.sum::<f64>() / n as f64
}

/// Scores `preds[i]` against `gts[i]` as frame `first_t + i`. Objects are
/// `1..=K` where `K` is the largest label in either sequence. Effort entries
/// for the same frame add up; frames outside the scored range are ignored.
pub fn sequence_report(
    meta: ReportMeta,
    preds: &[LabelMap],
    gts: &[LabelMap],
    first_t: usize,
    effort: Option<&[EffortEntry]>,
) -> Result<SequenceReport, EvalError> {
    if preds.len() != gts.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            gts: gts.len(),
        });
    }
    let objects = preds
        .iter()
        .chain(gts)
        .map(LabelMap::object_count)
        .max()
        .unwrap_or(0)
        .max(1);
    let mut per_frame_effort: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for e in effort.unwrap_or_default() {
        let slot = per_frame_effort.entry(e.t).or_default();
        slot.0 += e.markers;
        slot.1 += e.seconds;
    }

    let mut frames = Vec::with_capacity(preds.len());
    for (i, (pred, gt)) in preds.iter().zip(gts).enumerate() {
        let t = first_t + i;
        let scores = (1..=objects)
            .map(|k| {
                let c = confusion(pred, gt, k)?;
                Ok(ObjectScore {
                    object: k,
                    iou: c.iou(),
                    f1: c.f1(),
                    tp: c.tp,
                    fp: c.fp,
                    fn_: c.fn_,
                })
            })
            .collect::<Result<Vec<_>, EvalError>>()?;
        let (markers, seconds) = per_frame_effort.get(&t).copied().unwrap_or_default();
        frames.push(FrameScore {
            t,
            iou: mean(scores.iter().map(|s| s.iou)),
            f1: mean(scores.iter().map(|s| s.f1)),
            tp: scores.iter().map(|s| s.tp).sum(),
            fp: scores.iter().map(|s| s.fp).sum(),
            fn_: scores.iter().map(|s| s.fn_).sum(),
            markers,
            seconds,
            objects: scores,
        });
    }
    let corrected = frames.iter().filter(|f| f.markers > 0).count();
    Ok(SequenceReport {
        sequence: meta.sequence,
        mode: meta.mode,
        config: meta.config,
        mean_iou: mean(frames.iter().map(|f| f.iou)),
        mean_f1: mean(frames.iter().map(|f| f.f1)),
        frames_corrected_fraction: if frames.is_empty() {
            0.0
        } else {
            corrected as f64 / frames.len() as f64
        },
        object_mean_iou: (0..objects as usize)
            .map(|k| mean(frames.iter().map(|f| f.objects[k].iou)))
            .collect(),
        total_markers: frames.iter().map(|f| f.markers).sum(),
        total_seconds: frames.iter().map(|f| f.seconds).sum(),
        frames,
    })
}
