//! Runs the offline pipeline over fixture directories and prints a summary.
//!
//! ```text
//! cargo run -p selros-core --example fixture_report -- fixtures/env_a [--draw]
//! ```

use std::path::Path;

use selros_core::gridmap::{read_label_map, read_occupancy, CellState};
use selros_core::metrics::evaluate;
use selros_core::objectmap::read_annotations;
use selros_core::pipeline::{run, PipelineOptions};
use selros_core::semantic::{LlmClient, LlmConfig, Vocabulary};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let draw = args.iter().any(|a| a == "--draw");
    let client = LlmClient::from_config(&LlmConfig::default(), &Vocabulary::default()).unwrap();
    let options = PipelineOptions::default();
    for dir in args.iter().filter(|a| !a.starts_with("--")) {
        let dir = Path::new(dir);
        let grid = read_occupancy(dir.join("map.pgm")).unwrap();
        let (gt, _) = read_label_map(dir.join("gt.labels")).unwrap();
        let objects = read_annotations(dir.join("objects.json"), grid.width(), grid.height()).unwrap();
        let out = run(&grid, &objects, None, &client, &options).unwrap();
        let before = evaluate(&gt, &out.segmentation).unwrap();
        let after = evaluate(&gt, &out.integration.improved_map).unwrap();
        println!(
            "{}: K {} -> {}  IoU {:.4} -> {:.4}  MSIoU {:.4} -> {:.4}",
            dir.display(),
            out.segmentation.room_count(),
            out.integration.improved_map.room_count(),
            before.mean_iou,
            after.mean_iou,
            before.msiou,
            after.msiou
        );
        for row in &out.semantic.rooms {
            let r = &out.records[row.id.index()];
            println!(
                "  room {:>2} {:>10} (cand {:>10}) area {:>6.2} adj {:?} objects {:?}",
                row.id,
                row.label,
                row.candidate,
                r.area_m2,
                r.adjacent.iter().map(|a| a.0).collect::<Vec<_>>(),
                out.observations.objects(row.id)
            );
        }
        if draw {
            for y in 0..grid.height() {
                let line: String = (0..grid.width())
                    .map(|x| match out.segmentation.get(x, y) {
                        0 if grid.get(x, y) == CellState::Occupied => '#',
                        0 => '?',
                        l => char::from_digit(l % 36, 36).unwrap(),
                    })
                    .collect();
                println!("  {line}");
            }
        }
    }
}
