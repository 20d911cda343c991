use std::collections::BTreeSet;

use proptest::prelude::*;
use selros_core::gridmap::{CellState, LabelMap, OccupancyGrid, RoomId};
use selros_core::integration::integrate;
use selros_core::interpreter::interpret;
use selros_core::semantic::{SemanticAssignment, Vocabulary};

const LABELS: [&str; 3] = ["Bedroom", "Kitchen", "Bathroom"];

fn arb_case() -> impl Strategy<Value = (LabelMap, Vec<usize>)> {
    (2usize..12, 2usize..12, 1u32..8).prop_flat_map(|(w, h, k)| {
        prop::collection::vec(0..=k, w * h).prop_flat_map(move |raw| {
            let map = LabelMap::densify(w, h, raw).unwrap().0;
            let n = map.room_count() as usize;
            (Just(map), prop::collection::vec(0..LABELS.len(), n))
        })
    })
}

fn grid_for(map: &LabelMap) -> OccupancyGrid {
    let cells = map.labels().iter().map(|&l| if l > 0 { CellState::Free } else { CellState::Occupied }).collect();
    OccupancyGrid::new(map.width(), map.height(), 0.25, cells).unwrap()
}

fn assignments(labels: &[usize]) -> Vec<SemanticAssignment> {
    let v = Vocabulary::default();
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| SemanticAssignment {
            room_id: RoomId(i as u32 + 1),
            label: v.lookup(LABELS[l]).unwrap(),
            reasoning: String::new(),
        })
        .collect()
}

/// Groups of rooms reachable through same-label adjacencies, by flood fill
/// over the room graph.
fn merge_groups(adjacent: &[BTreeSet<RoomId>], labels: &[usize]) -> Vec<BTreeSet<usize>> {
    let mut group = vec![usize::MAX; labels.len()];
    let mut groups: Vec<BTreeSet<usize>> = Vec::new();
    for start in 0..labels.len() {
        if group[start] != usize::MAX {
            continue;
        }
        let mut members = BTreeSet::from([start]);
        let mut stack = vec![start];
        group[start] = groups.len();
        while let Some(a) = stack.pop() {
            for b in adjacent[a].iter().map(|id| id.index()) {
                if group[b] == usize::MAX && labels[b] == labels[a] {
                    group[b] = groups.len();
                    members.insert(b);
                    stack.push(b);
                }
            }
        }
        groups.push(members);
    }
    groups
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn merging_follows_same_label_adjacency((map, labels) in arb_case()) {
        let grid = grid_for(&map);
        let records = interpret(&map, &grid, 1).unwrap();
        let result = integrate(&map, &records, &assignments(&labels)).unwrap();
        let improved = &result.improved_map;

        // cells keep their labeled/unlabeled status
        for (a, b) in map.labels().iter().zip(improved.labels()) {
            prop_assert_eq!(*a == 0, *b == 0);
        }

        let adjacency: Vec<BTreeSet<RoomId>> = records.iter().map(|r| r.adjacent.clone()).collect();
        let groups = merge_groups(&adjacency, &labels);
        prop_assert_eq!(improved.room_count() as usize, groups.len());
        prop_assert!(improved.room_count() <= map.room_count());
        let shared = records.iter().any(|r| r.adjacent.iter().any(|o| labels[o.index()] == labels[r.id.index()]));
        prop_assert_eq!(improved.room_count() == map.room_count(), !shared);

        // each group maps onto one new room carrying the group's label
        for g in &groups {
            let targets: BTreeSet<u32> = map
                .labels()
                .iter()
                .zip(improved.labels())
                .filter(|(a, _)| **a > 0 && g.contains(&(**a as usize - 1)))
                .map(|(_, b)| *b)
                .collect();
            prop_assert_eq!(targets.len(), 1);
            let new = *targets.iter().next().unwrap();
            let room = &result.assignments[new as usize - 1];
            prop_assert_eq!(room.label.as_str(), LABELS[labels[*g.iter().next().unwrap()]]);
            prop_assert_eq!(room.members.iter().map(|m| m.index()).collect::<BTreeSet<_>>(), g.clone());
        }
    }

    #[test]
    fn integrating_the_result_again_changes_nothing((map, labels) in arb_case()) {
        let grid = grid_for(&map);
        let records = interpret(&map, &grid, 1).unwrap();
        let first = integrate(&map, &records, &assignments(&labels)).unwrap();

        let again = interpret(&first.improved_map, &grid, 1).unwrap();
        let v = Vocabulary::default();
        let relabeled: Vec<SemanticAssignment> = first
            .assignments
            .iter()
            .map(|m| SemanticAssignment { room_id: m.id, label: v.lookup(m.label.as_str()).unwrap(), reasoning: String::new() })
            .collect();
        let second = integrate(&first.improved_map, &again, &relabeled).unwrap();
        prop_assert_eq!(second.improved_map, first.improved_map);
        prop_assert!(second.merge_log.is_empty());
    }
}
