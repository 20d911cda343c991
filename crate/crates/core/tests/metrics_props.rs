use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use selros_core::gridmap::LabelMap;
use selros_core::metrics::{evaluate, pairwise_iou};

/// Straight transcription of the scoring rule: every predicted room goes to
/// the ground-truth room holding most of its cells (lower id on ties), each
/// ground-truth room sums its matches' IoU weighted 1.0, 0.9, ... (floor 0.1)
/// in IoU order, and the sum is averaged over ground-truth rooms.
fn brute_force_msiou(gt: &LabelMap, pred: &LabelMap) -> f64 {
    let sets = |m: &LabelMap| {
        let mut rooms: BTreeMap<u32, HashSet<usize>> = BTreeMap::new();
        for (i, &l) in m.labels().iter().enumerate() {
            if l > 0 {
                rooms.entry(l).or_default().insert(i);
            }
        }
        rooms
    };
    let (g, p) = (sets(gt), sets(pred));
    let mut per_gt: BTreeMap<u32, Vec<(u32, f64)>> = g.keys().map(|&id| (id, Vec::new())).collect();
    for (&pid, pcells) in &p {
        let mut owner: Option<(u32, usize)> = None;
        for (&gid, gcells) in &g {
            let n = gcells.intersection(pcells).count();
            if n > 0 && owner.is_none_or(|(_, best)| n > best) {
                owner = Some((gid, n));
            }
        }
        if let Some((gid, _)) = owner {
            per_gt.get_mut(&gid).unwrap().push((pid, pairwise_iou(&g[&gid], pcells).unwrap()));
        }
    }
    let mut total = 0.0;
    for matches in per_gt.values_mut() {
        matches.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for (j, (_, iou)) in matches.iter().enumerate() {
            let alpha = f64::max(1.0 - 0.1 * j as f64, 0.1);
            total += iou * alpha;
        }
    }
    total / g.len() as f64
}

fn arb_pair(max_side: usize, max_gt: u32, max_pred: u32) -> impl Strategy<Value = (LabelMap, LabelMap)> {
    (1..=max_side, 1..=max_side).prop_flat_map(move |(w, h)| {
        (prop::collection::vec(0..=max_gt, w * h), prop::collection::vec(0..=max_pred, w * h))
            .prop_filter("ground truth needs a room", |(g, _)| g.iter().any(|&l| l > 0))
            .prop_map(move |(g, p)| (LabelMap::densify(w, h, g).unwrap().0, LabelMap::densify(w, h, p).unwrap().0))
    })
}

/// Some predicted room overlaps two ground-truth rooms by the same, maximal
/// number of cells.
fn has_overlap_tie(gt: &LabelMap, pred: &LabelMap) -> bool {
    let mut counts: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for (&g, &p) in gt.labels().iter().zip(pred.labels()) {
        if g > 0 && p > 0 {
            *counts.entry((p, g)).or_default() += 1;
        }
    }
    (1..=pred.room_count()).any(|p| {
        let row: Vec<usize> = counts.range((p, 0)..=(p, u32::MAX)).map(|(_, &n)| n).collect();
        let best = row.iter().copied().max().unwrap_or(0);
        row.iter().filter(|&&n| n == best).count() > 1
    })
}

fn relabel(map: &LabelMap, perm: &[u32]) -> LabelMap {
    let labels = map.labels().iter().map(|&l| if l == 0 { 0 } else { perm[l as usize - 1] }).collect();
    LabelMap::new(map.width(), map.height(), labels).unwrap()
}

fn arb_perm(n: usize) -> impl Strategy<Value = Vec<u32>> {
    Just((1..=n as u32).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn msiou_matches_brute_force((gt, pred) in arb_pair(8, 4, 6)) {
        let report = evaluate(&gt, &pred).unwrap();
        let oracle = brute_force_msiou(&gt, &pred);
        prop_assert!((report.msiou - oracle).abs() <= 1e-12, "{} vs {}", report.msiou, oracle);
        prop_assert!((0.0..=1.0).contains(&report.msiou));
        prop_assert!((0.0..=1.0).contains(&report.mean_iou));
    }

    /// Ground-truth ids only matter through the overlap tie-break, so ground
    /// truth is relabeled only when no predicted room is tied.
    #[test]
    fn relabeling_does_not_change_scores(
        (gt, pred, gperm, pperm) in arb_pair(6, 3, 5).prop_flat_map(|(g, p)| {
            let (kg, kp) = (g.room_count() as usize, p.room_count() as usize);
            (Just(g), Just(p), arb_perm(kg), arb_perm(kp))
        })
    ) {
        let base = evaluate(&gt, &pred).unwrap();
        let moved = evaluate(&gt, &relabel(&pred, &pperm)).unwrap();
        prop_assert!((base.msiou - moved.msiou).abs() <= 1e-12);
        prop_assert!((base.mean_iou - moved.mean_iou).abs() <= 1e-12);
        if !has_overlap_tie(&gt, &pred) {
            let moved = evaluate(&relabel(&gt, &gperm), &relabel(&pred, &pperm)).unwrap();
            prop_assert!((base.msiou - moved.msiou).abs() <= 1e-12);
            prop_assert!((base.mean_iou - moved.mean_iou).abs() <= 1e-12);
        }
    }

    #[test]
    fn a_relabeled_copy_scores_one((gt, perm) in arb_pair(8, 4, 1).prop_flat_map(|(g, _)| {
        let k = g.room_count() as usize;
        (Just(g), arb_perm(k))
    })) {
        let report = evaluate(&gt, &relabel(&gt, &perm)).unwrap();
        prop_assert_eq!(report.msiou, 1.0);
        prop_assert_eq!(report.mean_iou, 1.0);
    }
}

/// Splitting a 4x4 room into any two non-empty parts scores below the
/// unsplit room.
#[test]
fn every_two_way_split_of_a_square_room_is_penalized() {
    let gt = LabelMap::new(4, 4, vec![1; 16]).unwrap();
    assert_eq!(evaluate(&gt, &gt).unwrap().msiou, 1.0);
    for mask in 1u32..(1 << 16) - 1 {
        let labels = (0..16).map(|i| if mask >> i & 1 == 1 { 1 } else { 2 }).collect();
        let pred = LabelMap::densify(4, 4, labels).unwrap().0;
        let score = evaluate(&gt, &pred).unwrap().msiou;
        assert!(score < 1.0, "mask {mask:#06x} scored {score}");
        assert!((score - brute_force_msiou(&gt, &pred)).abs() <= 1e-12);
    }
}
