//! Segmentation scores against a ground-truth label map.
//!
//! Each predicted room is associated with the ground-truth room it overlaps
//! most (ties to the lower ground-truth id). For ground-truth room `A_i` with
//! associated rooms ranked by IoU, MSIoU adds `IoU(A_i, S_ij) * alpha_j` where
//! `alpha_j = max(1.0 - 0.1 (j - 1), 0.1)`, then averages over ground-truth
//! rooms. The first match counts fully and every further fragment is
//! discounted, which penalizes over-segmentation.
//!
//! Mean IoU is the average over ground-truth rooms of the best IoU with any
//! predicted room, associated or not.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridmap::{LabelMap, RoomId};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("IoU of two empty sets is undefined")]
    UndefinedIoU,
    #[error("ground truth is {0}x{1} but prediction is {2}x{3}")]
    Shape(usize, usize, usize, usize),
    #[error("ground truth has no rooms")]
    EmptyGroundTruth,
}

pub fn pairwise_iou(a: &HashSet<usize>, b: &HashSet<usize>) -> Result<f64, MetricsError> {
    if a.is_empty() && b.is_empty() {
        return Err(MetricsError::UndefinedIoU);
    }
    let inter = a.intersection(b).count();
    Ok(inter as f64 / (a.len() + b.len() - inter) as f64)
}

/// Rank weight for the `rank`-th best match (1-based).
pub fn delta_alpha(rank: usize) -> f64 {
    // integer tenths keep 1.0, 0.9, ... exact up to the final division
    let tenths = 10usize.saturating_sub(rank.saturating_sub(1)).max(1);
    tenths as f64 / 10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub pred_id: RoomId,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtMatches {
    pub gt_id: RoomId,
    pub area_cells: usize,
    /// Associated predicted rooms, IoU descending, ties by lower id.
    pub matches: Vec<Match>,
    /// Best IoU with any predicted room.
    pub best_iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchTable {
    pub rooms: Vec<GtMatches>,
    /// Predicted rooms overlapping no ground-truth room.
    pub unmatched: Vec<RoomId>,
}

pub fn associate(gt: &LabelMap, pred: &LabelMap) -> Result<MatchTable, MetricsError> {
    if !gt.same_shape(pred.width(), pred.height()) {
        return Err(MetricsError::Shape(gt.width(), gt.height(), pred.width(), pred.height()));
    }
    let (kg, kp) = (gt.room_count() as usize, pred.room_count() as usize);
    let mut gt_area = vec![0usize; kg];
    let mut pred_area = vec![0usize; kp];
    let mut overlap: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (&g, &p) in gt.labels().iter().zip(pred.labels()) {
        if g > 0 {
            gt_area[g as usize - 1] += 1;
        }
        if p > 0 {
            pred_area[p as usize - 1] += 1;
        }
        if g > 0 && p > 0 {
            *overlap.entry((g as usize - 1, p as usize - 1)).or_default() += 1;
        }
    }
    let iou = |g: usize, p: usize, inter: usize| inter as f64 / (gt_area[g] + pred_area[p] - inter) as f64;

    // (overlap, gt) per predicted room; BTreeMap order visits lower gt first
    let mut owner: Vec<Option<(usize, usize)>> = vec![None; kp];
    for (&(g, p), &n) in &overlap {
        if owner[p].is_none_or(|(best, _)| n > best) {
            owner[p] = Some((n, g));
        }
    }

    let mut rooms: Vec<GtMatches> = (0..kg)
        .map(|g| GtMatches { gt_id: RoomId(g as u32 + 1), area_cells: gt_area[g], matches: Vec::new(), best_iou: 0.0 })
        .collect();
    for (&(g, p), &n) in &overlap {
        let value = iou(g, p, n);
        rooms[g].best_iou = rooms[g].best_iou.max(value);
        if owner[p].map(|(_, o)| o) == Some(g) {
            rooms[g].matches.push(Match { pred_id: RoomId(p as u32 + 1), iou: value });
        }
    }
    for room in &mut rooms {
        room.matches.sort_by(|a, b| b.iou.total_cmp(&a.iou).then(a.pred_id.cmp(&b.pred_id)));
    }
    let unmatched = (0..kp).filter(|&p| owner[p].is_none()).map(|p| RoomId(p as u32 + 1)).collect();
    Ok(MatchTable { rooms, unmatched })
}

/// Discounted match sum for one ground-truth room.
pub fn room_msiou(room: &GtMatches) -> f64 {
    room.matches.iter().enumerate().map(|(j, m)| m.iou * delta_alpha(j + 1)).sum()
}

pub fn compute_msiou(table: &MatchTable, n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    table.rooms.iter().map(room_msiou).sum::<f64>() / n_gt as f64
}

pub fn compute_mean_iou(table: &MatchTable, n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    table.rooms.iter().map(|r| r.best_iou).sum::<f64>() / n_gt as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomScore {
    pub gt_id: RoomId,
    pub area_cells: usize,
    pub best_iou: f64,
    pub msiou: f64,
    pub matches: Vec<Match>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mean_iou: f64,
    pub msiou: f64,
    pub per_room: Vec<RoomScore>,
    pub unmatched_pred: Vec<RoomId>,
    /// Weights applied to ranks 1, 2, ... up to the longest match list.
    pub delta_alpha_schedule: Vec<f64>,
}

pub fn evaluate(gt: &LabelMap, pred: &LabelMap) -> Result<MetricReport, MetricsError> {
    if gt.room_count() == 0 {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let table = associate(gt, pred)?;
    let n = table.rooms.len();
    let longest = table.rooms.iter().map(|r| r.matches.len()).max().unwrap_or(0);
    Ok(MetricReport {
        mean_iou: compute_mean_iou(&table, n),
        msiou: compute_msiou(&table, n),
        per_room: table
            .rooms
            .iter()
            .map(|r| RoomScore {
                gt_id: r.gt_id,
                area_cells: r.area_cells,
                best_iou: r.best_iou,
                msiou: room_msiou(r),
                matches: r.matches.clone(),
            })
            .collect(),
        unmatched_pred: table.unmatched.clone(),
        delta_alpha_schedule: (1..=longest).map(delta_alpha).collect(),
    })
}
