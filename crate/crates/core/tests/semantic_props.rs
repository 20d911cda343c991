use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU32, Ordering};

use proptest::prelude::*;
use selros_core::gridmap::{CellCoord, RoomId};
use selros_core::interpreter::{BoundingBox, RoomRecord};
use selros_core::objectmap::ObservationSet;
use selros_core::semantic::{
    build_environment_prompt, build_room_prompt, parse_environment_response, parse_room_response, BackendError,
    ChatBackend, ChatMessage, LlmClient, Prompt, PromptTemplates, QueryError, SemanticAssignment, StubBackend,
    Vocabulary, DEFAULT_LABELS,
};

const OBJECTS: &[&str] = &[
    "bed", "lamp", "toilet", "sink", "shower", "stove", "fridge", "countertop", "sofa", "tv", "desk", "chair",
    "laptop", "plant", "rug",
];

fn arb_vocabulary() -> impl Strategy<Value = Vocabulary> {
    prop::sample::subsequence(DEFAULT_LABELS.iter().filter(|l| **l != "Other").copied().collect::<Vec<_>>(), 0..7)
        .prop_map(|mut labels| {
            labels.push("Other");
            Vocabulary::new(labels).unwrap()
        })
}

/// Rooms 1..=k with random geometry, random symmetric adjacency and random
/// observed objects.
fn arb_rooms() -> impl Strategy<Value = (Vec<RoomRecord>, ObservationSet)> {
    (1usize..7).prop_flat_map(|k| {
        let geometry = prop::collection::vec((1usize..400, 1usize..30, 1usize..30), k);
        let edges = prop::collection::vec(any::<bool>(), k * k);
        let objects = prop::collection::vec(prop::collection::vec(prop::sample::select(OBJECTS), 0..5), k);
        (geometry, edges, objects).prop_map(move |(geometry, edges, objects)| {
            let mut records: Vec<RoomRecord> = geometry
                .iter()
                .enumerate()
                .map(|(i, &(cells, sx, sy))| RoomRecord {
                    id: RoomId(i as u32 + 1),
                    area_cells: cells,
                    area_m2: cells as f64 * 0.0625,
                    bbox: BoundingBox { min_x: 0, min_y: 0, max_x: sx - 1, max_y: sy - 1 },
                    length_m: sx.max(sy) as f64 * 0.25,
                    width_m: sx.min(sy) as f64 * 0.25,
                    centroid: CellCoord::new(0, 0),
                    adjacent: BTreeSet::new(),
                })
                .collect();
            for a in 0..k {
                for b in a + 1..k {
                    if edges[a * k + b] {
                        records[a].adjacent.insert(RoomId(b as u32 + 1));
                        records[b].adjacent.insert(RoomId(a as u32 + 1));
                    }
                }
            }
            let mut obs = ObservationSet::empty(k as u32);
            for (i, o) in objects.into_iter().enumerate() {
                obs.rooms.insert(RoomId(i as u32 + 1), o.into_iter().map(String::from).collect());
            }
            (records, obs)
        })
    })
}

proptest! {
    #[test]
    fn stub_replies_always_parse((records, obs) in arb_rooms(), vocabulary in arb_vocabulary()) {
        let templates = PromptTemplates::default();
        let client = LlmClient::new(Box::new(StubBackend::new(vocabulary.clone())), 0);
        let mut candidates = Vec::new();
        for r in &records {
            let prompt = build_room_prompt(r, obs.objects(r.id), &vocabulary, &templates);
            let reply = client.query(&prompt).unwrap();
            let (label, reasoning) = parse_room_response(&reply, &vocabulary).unwrap();
            prop_assert!(vocabulary.labels().iter().any(|l| l == label.as_str()));
            candidates.push(SemanticAssignment { room_id: r.id, label, reasoning });
        }
        let prompt = build_environment_prompt(&candidates, &records, &obs, &vocabulary, &templates).unwrap();
        let ids: Vec<RoomId> = records.iter().map(|r| r.id).collect();
        let reply = client.query(&prompt).unwrap();
        let finals = parse_environment_response(&reply, &ids, &vocabulary).unwrap();
        prop_assert_eq!(finals.iter().map(|f| f.room_id).collect::<Vec<_>>(), ids);
        prop_assert!(finals.iter().all(|f| vocabulary.labels().iter().any(|l| l == f.label.as_str())));
    }

    #[test]
    fn prompts_are_deterministic((records, obs) in arb_rooms()) {
        let (v, t) = (Vocabulary::default(), PromptTemplates::default());
        for r in &records {
            prop_assert_eq!(
                build_room_prompt(r, obs.objects(r.id), &v, &t).render(),
                build_room_prompt(r, obs.objects(r.id), &v, &t).render()
            );
        }
    }

    #[test]
    fn backend_calls_stay_within_the_retry_bound(failures in 0u32..6, max_retries in 0u32..4) {
        let backend = Flaky { failures, calls: AtomicU32::new(0) };
        let calls = std::sync::Arc::new(backend);
        let client = LlmClient::new(Box::new(Shared(calls.clone())), max_retries);
        let record = RoomRecord {
            id: RoomId(1),
            area_cells: 16,
            area_m2: 1.0,
            bbox: BoundingBox { min_x: 0, min_y: 0, max_x: 3, max_y: 3 },
            length_m: 1.0,
            width_m: 1.0,
            centroid: CellCoord::new(1, 1),
            adjacent: BTreeSet::new(),
        };
        let v = Vocabulary::default();
        let prompt = build_room_prompt(&record, &[], &v, &PromptTemplates::default());
        let outcome = client.query_with(&prompt, |t| parse_room_response(t, &v));
        let made = calls.calls.load(Ordering::SeqCst);
        prop_assert!(made <= max_retries + 1);
        if failures <= max_retries {
            prop_assert!(outcome.is_ok());
            prop_assert_eq!(made, failures + 1);
        } else {
            let is_format_error = matches!(outcome, Err(QueryError::PersistentFormatError { .. }));
            prop_assert!(is_format_error);
            prop_assert_eq!(made, max_retries + 1);
        }
    }
}

/// Malformed for the first `failures` calls, then a valid reply.
struct Flaky {
    failures: u32,
    calls: AtomicU32,
}

struct Shared(std::sync::Arc<Flaky>);

impl ChatBackend for Shared {
    fn complete(&self, _prompt: &Prompt, _messages: &[ChatMessage]) -> Result<String, BackendError> {
        let n = self.0.calls.fetch_add(1, Ordering::SeqCst);
        Ok(if n < self.0.failures { "I think it is a nice room.".into() } else { "LABEL: Storage\nREASON: small".into() })
    }
}
