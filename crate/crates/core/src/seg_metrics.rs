//! Per-class intersection-over-union and its aggregation over frames,
//! videos and folds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset_io::FoldConfig;
use crate::error::{Error, Result};
use crate::raster::{FovMask, LabelMask, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub classes: [ClassCounts; NUM_CLASSES],
}

impl ConfusionCounts {
    pub fn merge(&mut self, other: &ConfusionCounts) {
        for (a, b) in self.classes.iter_mut().zip(&other.classes) {
            a.tp += b.tp;
            a.fp += b.fp;
            a.fn_ += b.fn_;
        }
    }
}

/// Per-class TP/FP/FN between a prediction and ground truth, optionally
/// restricted to the pixels of `valid`.
pub fn confusion(
    pred: &LabelMask,
    gt: &LabelMask,
    valid: Option<&FovMask>,
) -> Result<ConfusionCounts> {
    if pred.dims() != gt.dims() || valid.is_some_and(|v| v.dims() != gt.dims()) {
        return Err(Error::DimensionMismatch(format!(
            "prediction {:?}, ground truth {:?}",
            pred.dims(),
            gt.dims()
        )));
    }
    let mut out = ConfusionCounts::default();
    for (i, (&p, &g)) in pred.data().iter().zip(gt.data()).enumerate() {
        if let Some(v) = valid {
            if !v.data()[i] {
                continue;
            }
        }
        if p == g {
            out.classes[p as usize].tp += 1;
        } else {
            out.classes[p as usize].fp += 1;
            out.classes[g as usize].fn_ += 1;
        }
    }
    Ok(out)
}

/// `TP / (TP + FP + FN)`, or `None` when the class is absent from both masks.
pub fn iou(counts: &ConfusionCounts, class_id: usize) -> Option<f64> {
    let c = counts.classes.get(class_id)?;
    let denom = c.tp + c.fp + c.fn_;
    (denom > 0).then(|| c.tp as f64 / denom as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Average of per-frame IoUs, skipping frames where a class is undefined.
    #[default]
    FrameMean,
    /// IoU of counts summed over all frames of the group.
    PixelPooled,
}

#[derive(Debug, Clone, Copy)]
pub enum Grouping<'a> {
    PerVideo,
    PerFold(&'a FoldConfig),
    Overall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameCounts {
    pub video_id: String,
    pub counts: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IouRow {
    pub group: String,
    pub frames: usize,
    pub class_iou: [Option<f64>; NUM_CLASSES],
    /// Mean of the defined per-class values.
    pub overall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IouTable {
    pub rows: Vec<IouRow>,
    /// Per-class means across group rows.
    pub mean: IouRow,
}

fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn row_for(group: String, frames: &[&ConfusionCounts], pooling: Pooling) -> IouRow {
    let class_iou: [Option<f64>; NUM_CLASSES] = match pooling {
        Pooling::FrameMean => {
            std::array::from_fn(|c| mean_defined(frames.iter().map(|f| iou(f, c))))
        }
        Pooling::PixelPooled => {
            let mut total = ConfusionCounts::default();
            for f in frames {
                total.merge(f);
            }
            std::array::from_fn(|c| iou(&total, c))
        }
    };
    IouRow {
        group,
        frames: frames.len(),
        overall: mean_defined(class_iou),
        class_iou,
    }
}

/// Groups frames and reports per-class mean IoU per group, plus a final row
/// averaging the per-class means across groups.
pub fn aggregate(
    per_frame: &[FrameCounts],
    grouping: Grouping<'_>,
    pooling: Pooling,
) -> Result<IouTable> {
    if per_frame.is_empty() {
        return Err(Error::EmptyInput("no frames to aggregate"));
    }
    let mut groups: BTreeMap<String, Vec<&ConfusionCounts>> = BTreeMap::new();
    for f in per_frame {
        let key = match grouping {
            Grouping::PerVideo => f.video_id.clone(),
            Grouping::Overall => "all".to_string(),
            Grouping::PerFold(cfg) => match cfg.fold_of(&f.video_id) {
                Some(fold) => format!("Fold {fold}"),
                None => continue,
            },
        };
        groups.entry(key).or_default().push(&f.counts);
    }
    if groups.is_empty() {
        return Err(Error::EmptyInput("no frame belongs to a configured fold"));
    }
    let rows: Vec<IouRow> = groups
        .into_iter()
        .map(|(g, frames)| row_for(g, &frames, pooling))
        .collect();
    let class_iou: [Option<f64>; NUM_CLASSES] =
        std::array::from_fn(|c| mean_defined(rows.iter().map(|r| r.class_iou[c])));
    let mean = IouRow {
        group: "Mean".to_string(),
        frames: rows.iter().map(|r| r.frames).sum(),
        overall: mean_defined(class_iou),
        class_iou,
    };
    Ok(IouTable { rows, mean })
}
