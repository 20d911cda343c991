//! Label-driven merging of over-segmented rooms.
//!
//! Two rooms merge when they are adjacent *and* carry the same label; merging
//! is transitive. Equal labels alone are not enough: two kitchens separated
//! by a living room stay two rooms.
//!
//! A merged room may be disconnected at the cell level when the adjacency
//! that joined its parts ran across a thin wall.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridmap::{LabelMap, RoomId};
use crate::interpreter::{compute_adjacency, RoomRecord};
use crate::semantic::{Label, SemanticAssignment};

#[derive(Debug, Error)]
pub enum IntegrationError {
    #[error("no semantic assignment for room {0}")]
    MissingAssignment(RoomId),
    #[error("no room record for room {0}")]
    MissingRecord(RoomId),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedRoom {
    pub id: RoomId,
    pub label: Label,
    /// Original room ids, ascending.
    pub members: Vec<RoomId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub merged: Vec<RoomId>,
    pub into: RoomId,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegrationResult {
    pub improved_map: LabelMap,
    pub assignments: Vec<MergedRoom>,
    pub merge_log: Vec<MergeEvent>,
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Keeps the smaller index as the root.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

pub fn integrate(
    map: &LabelMap,
    records: &[RoomRecord],
    assignments: &[SemanticAssignment],
) -> Result<IntegrationResult, IntegrationError> {
    let k = map.room_count() as usize;
    let labels: BTreeMap<RoomId, &Label> = assignments.iter().map(|a| (a.room_id, &a.label)).collect();
    let adjacency: BTreeMap<RoomId, &RoomRecord> = records.iter().map(|r| (r.id, r)).collect();
    let mut label_of = Vec::with_capacity(k);
    for id in map.room_ids() {
        label_of.push(*labels.get(&id).ok_or(IntegrationError::MissingAssignment(id))?);
        if !adjacency.contains_key(&id) {
            return Err(IntegrationError::MissingRecord(id));
        }
    }

    let mut sets = DisjointSet::new(k);
    for record in records {
        for other in &record.adjacent {
            let (a, b) = (record.id.index(), other.index());
            if b < k && label_of[a] == label_of[b] {
                sets.union(a, b);
            }
        }
    }

    // roots are the smallest member, so scanning in id order numbers
    // components by their smallest original id
    let mut new_id = vec![0u32; k];
    let mut merged: Vec<MergedRoom> = Vec::new();
    for i in 0..k {
        let root = sets.find(i);
        if root == i {
            merged.push(MergedRoom { id: RoomId(merged.len() as u32 + 1), label: label_of[i].clone(), members: Vec::new() });
            new_id[i] = merged.len() as u32;
        } else {
            new_id[i] = new_id[root];
        }
        merged[new_id[i] as usize - 1].members.push(RoomId(i as u32 + 1));
    }

    let relabeled = map.labels().iter().map(|&l| if l == 0 { 0 } else { new_id[l as usize - 1] }).collect();
    let improved_map = LabelMap::new(map.width(), map.height(), relabeled).expect("component ids are dense");
    let merge_log = merged
        .iter()
        .filter(|m| m.members.len() > 1)
        .map(|m| MergeEvent { merged: m.members.clone(), into: m.id, label: m.label.clone() })
        .collect();
    Ok(IntegrationResult { improved_map, assignments: merged, merge_log })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRoom {
    pub id: RoomId,
    pub label: Label,
    pub members: Vec<RoomId>,
    pub area_cells: usize,
    pub area_m2: f64,
    pub adjacent: Vec<RoomId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationReport {
    pub rooms: Vec<ReportRoom>,
    pub merge_log: Vec<MergeEvent>,
}

/// Summary of the improved map. `records` describe the original rooms;
/// adjacency is recomputed on the improved map with `dilation`.
pub fn build_report(
    result: &IntegrationResult,
    records: &[RoomRecord],
    dilation: usize,
) -> Result<IntegrationReport, IntegrationError> {
    let by_id: BTreeMap<RoomId, &RoomRecord> = records.iter().map(|r| (r.id, r)).collect();
    let adjacency = compute_adjacency(&result.improved_map, dilation);
    let rooms = result
        .assignments
        .iter()
        .map(|room| {
            let mut area_cells = 0;
            let mut area_m2 = 0.0;
            for m in &room.members {
                let r = by_id.get(m).ok_or(IntegrationError::MissingRecord(*m))?;
                area_cells += r.area_cells;
                area_m2 += r.area_m2;
            }
            Ok(ReportRoom {
                id: room.id,
                label: room.label.clone(),
                members: room.members.clone(),
                area_cells,
                area_m2,
                adjacent: adjacency[room.id.index()].iter().copied().collect(),
            })
        })
        .collect::<Result<_, IntegrationError>>()?;
    Ok(IntegrationReport { rooms, merge_log: result.merge_log.clone() })
}

pub fn emit_report(
    result: &IntegrationResult,
    records: &[RoomRecord],
    dilation: usize,
    path: impl AsRef<Path>,
) -> Result<(), IntegrationError> {
    let report = build_report(result, records, dilation)?;
    let mut text = serde_json::to_string_pretty(&report).expect("reports serialize");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
