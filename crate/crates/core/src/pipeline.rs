//! End-to-end orchestration: segment, interpret, observe, label, merge.
//!
//! The stages are exposed individually so callers can persist intermediate
//! artifacts (the CLI writes each stage's output before starting the next).

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridmap::{LabelMap, OccupancyGrid, RoomId};
use crate::integration::{integrate, IntegrationError, IntegrationResult};
use crate::interpreter::{interpret, InterpretError, RoomRecord, DEFAULT_ADJACENCY_DILATION};
use crate::objectmap::{observe, ObjectAnnotation, ObservationSet, DEFAULT_MAX_RANGE};
use crate::segmentation::{segment, SegmentationError, SegmentationParams};
use crate::semantic::{
    build_environment_prompt, build_room_prompt, parse_environment_response, parse_room_response, Label,
    LlmClient, Prompt, PromptError, PromptTemplates, QueryError, SemanticAssignment, Vocabulary,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
    #[error(transparent)]
    Interpret(#[from] InterpretError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("room {room}: {source}")]
    RoomQuery { room: RoomId, source: QueryError },
    #[error("environment-level query: {0}")]
    EnvironmentQuery(QueryError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
}

impl PipelineError {
    pub fn query_error(&self) -> Option<&QueryError> {
        match self {
            PipelineError::RoomQuery { source, .. } | PipelineError::EnvironmentQuery(source) => Some(source),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub segmentation: SegmentationParams,
    pub adjacency_dilation: usize,
    /// Meters.
    pub max_range: f64,
    pub vocabulary: Vocabulary,
    pub templates: PromptTemplates,
    /// Concurrent room-level queries.
    pub parallel: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            segmentation: SegmentationParams::default(),
            adjacency_dilation: DEFAULT_ADJACENCY_DILATION,
            max_range: DEFAULT_MAX_RANGE,
            vocabulary: Vocabulary::default(),
            templates: PromptTemplates::default(),
            parallel: 4,
        }
    }
}

/// One row of the semantic table: the final label plus the room-level
/// candidate it was revised from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticRow {
    pub id: RoomId,
    pub label: Label,
    pub candidate: Label,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SemanticTable {
    pub rooms: Vec<SemanticRow>,
}

impl SemanticTable {
    pub fn assignments(&self) -> Vec<SemanticAssignment> {
        self.rooms
            .iter()
            .map(|r| SemanticAssignment { room_id: r.id, label: r.label.clone(), reasoning: r.reasoning.clone() })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("semantic tables serialize");
        s.push('\n');
        s
    }
}

pub fn observe_rooms(
    annotations: &[ObjectAnnotation],
    grid: &OccupancyGrid,
    records: &[RoomRecord],
    max_range: f64,
) -> ObservationSet {
    let centroids: Vec<_> = records.iter().map(|r| (r.id, r.centroid)).collect();
    observe(annotations, grid, &centroids, max_range)
}

/// One room-level prompt per record, in room id order.
pub fn room_prompts(records: &[RoomRecord], observations: &ObservationSet, options: &PipelineOptions) -> Vec<(RoomId, Prompt)> {
    let mut sorted: Vec<&RoomRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.id);
    sorted
        .into_iter()
        .map(|r| {
            (r.id, build_room_prompt(r, observations.objects(r.id), &options.vocabulary, &options.templates))
        })
        .collect()
}

/// Room-level queries, `parallel` at a time. Results come back in room id
/// order whatever order the replies arrive in. After the first failed query
/// no further rooms are started, and the failure of the lowest room id among
/// those already queried is returned.
pub fn query_rooms(
    client: &LlmClient,
    records: &[RoomRecord],
    observations: &ObservationSet,
    options: &PipelineOptions,
) -> Result<Vec<SemanticAssignment>, PipelineError> {
    let prompts = room_prompts(records, observations, options);
    let results: Mutex<Vec<Option<Result<SemanticAssignment, QueryError>>>> =
        Mutex::new((0..prompts.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let workers = options.parallel.clamp(1, prompts.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if failed.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((room_id, prompt)) = prompts.get(i) else { break };
                let outcome = client
                    .query_with(prompt, |text| parse_room_response(text, &options.vocabulary))
                    .map(|((label, reasoning), _)| SemanticAssignment { room_id: *room_id, label, reasoning });
                if outcome.is_err() {
                    failed.store(true, Ordering::SeqCst);
                }
                results.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(outcome);
            });
        }
    });
    let results = results.into_inner().unwrap_or_else(|e| e.into_inner());
    let mut assignments = Vec::with_capacity(results.len());
    for (r, (room, _)) in results.into_iter().zip(&prompts) {
        match r {
            Some(Ok(a)) => assignments.push(a),
            Some(Err(source)) => return Err(PipelineError::RoomQuery { room: *room, source }),
            None => {}
        }
    }
    // rooms are skipped only after a failure, which returned above
    assert_eq!(assignments.len(), prompts.len(), "every room is queried");
    Ok(assignments)
}

pub fn query_environment(
    client: &LlmClient,
    candidates: &[SemanticAssignment],
    records: &[RoomRecord],
    observations: &ObservationSet,
    options: &PipelineOptions,
) -> Result<SemanticTable, PipelineError> {
    let prompt = build_environment_prompt(candidates, records, observations, &options.vocabulary, &options.templates)?;
    let mut ids: Vec<RoomId> = records.iter().map(|r| r.id).collect();
    ids.sort();
    let (finals, _) = client
        .query_with(&prompt, |text| parse_environment_response(text, &ids, &options.vocabulary))
        .map_err(PipelineError::EnvironmentQuery)?;
    let rooms = finals
        .into_iter()
        .zip(ids)
        .map(|(f, id)| {
            let own = candidates.iter().find(|c| c.room_id == id).expect("prompt checked every room");
            SemanticRow { id, label: f.label, candidate: own.label.clone(), reasoning: own.reasoning.clone() }
        })
        .collect();
    Ok(SemanticTable { rooms })
}

/// Both query levels.
pub fn label_rooms(
    client: &LlmClient,
    records: &[RoomRecord],
    observations: &ObservationSet,
    options: &PipelineOptions,
) -> Result<SemanticTable, PipelineError> {
    let candidates = query_rooms(client, records, observations, options)?;
    query_environment(client, &candidates, records, observations, options)
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub segmentation: LabelMap,
    pub records: Vec<RoomRecord>,
    pub observations: ObservationSet,
    pub semantic: SemanticTable,
    pub integration: IntegrationResult,
}

/// Runs every stage in memory. `imported` replaces the segmentation stage.
pub fn run(
    grid: &OccupancyGrid,
    annotations: &[ObjectAnnotation],
    imported: Option<LabelMap>,
    client: &LlmClient,
    options: &PipelineOptions,
) -> Result<PipelineOutput, PipelineError> {
    let segmentation = match imported {
        Some(map) => map,
        None => segment(grid, &options.segmentation)?,
    };
    let records = interpret(&segmentation, grid, options.adjacency_dilation)?;
    let observations = observe_rooms(annotations, grid, &records, options.max_range);
    let semantic = label_rooms(client, &records, &observations, options)?;
    let integration = integrate(&segmentation, &records, &semantic.assignments())?;
    Ok(PipelineOutput { segmentation, records, observations, semantic, integration })
}
