//! Stage subcommands. Every stage reads and writes the same fixed artifact
//! names, so `pipeline` produces exactly what running the stages one after
//! another with the same configuration produces.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;

use selros_core::gridmap::{
    export_ppm, read_label_map, read_occupancy, write_label_map, LabelMap, OccupancyGrid, RoomId,
};
use selros_core::integration::{emit_report, integrate};
use selros_core::interpreter::{interpret, RoomRecord};
use selros_core::metrics::evaluate;
use selros_core::objectmap::{merge_predeclared_file, read_annotations, read_observations, ObservationSet};
use selros_core::pipeline::{label_rooms, observe_rooms, PipelineOptions, SemanticTable};
use selros_core::segmentation::{room_centroids, segment};
use selros_core::semantic::{LlmClient, Transcript};

use crate::config::PipelineConfig;
use crate::Failure;

pub const SEGMENTATION_LABELS: &str = "segmentation.labels";
pub const SEGMENTATION_PPM: &str = "segmentation.ppm";
pub const CENTROIDS: &str = "centroids.json";
pub const ROOMS: &str = "rooms.json";
pub const OBJECTS: &str = "objects.json";
pub const SEMANTIC: &str = "semantic.json";
pub const IMPROVED_LABELS: &str = "improved.labels";
pub const IMPROVED_PPM: &str = "improved.ppm";
pub const REPORT: &str = "report.json";

type Result<T> = std::result::Result<T, Failure>;

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
}

fn out_dir(config: &PipelineConfig) -> anyhow::Result<PathBuf> {
    let dir = config.output_dir()?.to_path_buf();
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir)
}

fn load_grid(config: &PipelineConfig) -> anyhow::Result<OccupancyGrid> {
    let path = config.map_path()?;
    read_occupancy(path).with_context(|| format!("cannot load occupancy map {}", path.display()))
}

fn load_labels(path: &Path, grid: Option<&OccupancyGrid>) -> anyhow::Result<LabelMap> {
    let (map, _) = read_label_map(path).with_context(|| format!("cannot load label map {}", path.display()))?;
    if let Some(g) = grid {
        if !map.same_shape(g.width(), g.height()) {
            bail!(
                "label map {} is {}x{} but the occupancy map is {}x{}",
                path.display(),
                map.width(),
                map.height(),
                g.width(),
                g.height()
            );
        }
    }
    Ok(map)
}

#[derive(Serialize)]
struct Centroid {
    id: RoomId,
    x: usize,
    y: usize,
}

fn write_segmentation(dir: &Path, map: &LabelMap) -> anyhow::Result<()> {
    write_label_map(map, dir.join(SEGMENTATION_LABELS))?;
    export_ppm(map, dir.join(SEGMENTATION_PPM))?;
    let centroids: Vec<Centroid> =
        room_centroids(map).into_iter().map(|(id, c)| Centroid { id, x: c.x, y: c.y }).collect();
    write_json(&dir.join(CENTROIDS), &centroids)
}

pub fn segment_stage(config: &PipelineConfig) -> Result<()> {
    let grid = load_grid(config)?;
    let dir = out_dir(config)?;
    let map = segment(&grid, &config.segmentation).context("segmentation failed")?;
    log::info!("segmented {} into {} rooms", config.map_path()?.display(), map.room_count());
    write_segmentation(&dir, &map)?;
    Ok(())
}

pub fn interpret_stage(config: &PipelineConfig, labels: &Path) -> Result<()> {
    let grid = load_grid(config)?;
    let map = load_labels(labels, Some(&grid))?;
    let dir = out_dir(config)?;
    let records = interpret(&map, &grid, config.adjacency_dilation).context("interpretation failed")?;
    write_json(&dir.join(ROOMS), &records)?;
    Ok(())
}

fn observations(config: &PipelineConfig, grid: &OccupancyGrid, records: &[RoomRecord]) -> anyhow::Result<ObservationSet> {
    let annotations = match &config.annotation_path {
        Some(path) => read_annotations(path, grid.width(), grid.height())
            .with_context(|| format!("cannot load annotations {}", path.display()))?,
        None => Vec::new(),
    };
    let mut obs = observe_rooms(&annotations, grid, records, config.max_range);
    if let Some(path) = &config.room_objects_path {
        obs = merge_predeclared_file(obs, path).with_context(|| format!("cannot merge {}", path.display()))?;
    }
    Ok(obs)
}

pub fn objects_stage(config: &PipelineConfig, rooms: &Path) -> Result<()> {
    let grid = load_grid(config)?;
    let records: Vec<RoomRecord> = read_json(rooms)?;
    let dir = out_dir(config)?;
    let obs = observations(config, &grid, &records)?;
    fs::write(dir.join(OBJECTS), obs.to_json()).context("cannot write observations")?;
    Ok(())
}

fn client(config: &PipelineConfig, transcript: Option<&Path>) -> anyhow::Result<LlmClient> {
    let mut client = LlmClient::from_config(&config.llm, &config.vocabulary).map_err(anyhow::Error::msg)?;
    if let Some(path) = transcript {
        // one transcript per run
        fs::File::create(path).with_context(|| format!("cannot create transcript {}", path.display()))?;
        client = client.with_transcript(Transcript::open(path)?);
    }
    Ok(client)
}

fn query(
    config: &PipelineConfig,
    options: &PipelineOptions,
    records: &[RoomRecord],
    obs: &ObservationSet,
    transcript: Option<&Path>,
    dir: &Path,
) -> Result<SemanticTable> {
    let client = client(config, transcript)?;
    let table = label_rooms(&client, records, obs, options).map_err(|e| {
        let llm = e.query_error().is_some();
        let err = anyhow::Error::new(e).context("semantic labeling failed");
        if llm {
            Failure::Llm(err)
        } else {
            Failure::Input(err)
        }
    })?;
    fs::write(dir.join(SEMANTIC), table.to_json()).context("cannot write semantic table")?;
    Ok(table)
}

pub fn query_stage(config: &PipelineConfig, rooms: &Path, objects: &Path, transcript: Option<&Path>) -> Result<()> {
    let options = config.options()?;
    let records: Vec<RoomRecord> = read_json(rooms)?;
    let obs = read_observations(objects).with_context(|| format!("cannot load {}", objects.display()))?;
    let dir = out_dir(config)?;
    query(config, &options, &records, &obs, transcript, &dir)?;
    Ok(())
}

fn check_labels(table: &SemanticTable, config: &PipelineConfig) -> anyhow::Result<()> {
    for row in &table.rooms {
        if config.vocabulary.lookup(row.label.as_str()).is_none() {
            bail!("room {} has label {:?}, which is not in the vocabulary", row.id, row.label.as_str());
        }
    }
    Ok(())
}

fn merge(
    config: &PipelineConfig,
    map: &LabelMap,
    records: &[RoomRecord],
    table: &SemanticTable,
    dir: &Path,
) -> anyhow::Result<()> {
    let result = integrate(map, records, &table.assignments()).context("integration failed")?;
    log::info!("merged {} rooms into {}", map.room_count(), result.improved_map.room_count());
    write_label_map(&result.improved_map, dir.join(IMPROVED_LABELS))?;
    export_ppm(&result.improved_map, dir.join(IMPROVED_PPM))?;
    emit_report(&result, records, config.adjacency_dilation, dir.join(REPORT))?;
    Ok(())
}

pub fn integrate_stage(config: &PipelineConfig, labels: &Path, rooms: &Path, semantic: &Path) -> Result<()> {
    let map = load_labels(labels, None)?;
    let records: Vec<RoomRecord> = read_json(rooms)?;
    let table: SemanticTable = read_json(semantic)?;
    check_labels(&table, config)?;
    let dir = out_dir(config)?;
    merge(config, &map, &records, &table, &dir)?;
    Ok(())
}

/// All stages in order. Artifacts of finished stages stay on disk when a
/// later stage fails.
pub fn pipeline(config: &PipelineConfig, import: Option<&Path>, transcript: Option<&Path>) -> Result<()> {
    let options = config.options()?;
    let grid = load_grid(config)?;
    let dir = out_dir(config)?;
    let map = match import {
        Some(path) => {
            log::info!("using imported segmentation {}", path.display());
            load_labels(path, Some(&grid))?
        }
        None => segment(&grid, &config.segmentation).context("segmentation failed")?,
    };
    write_segmentation(&dir, &map)?;
    let records = interpret(&map, &grid, config.adjacency_dilation).context("interpretation failed")?;
    write_json(&dir.join(ROOMS), &records)?;
    let obs = observations(config, &grid, &records)?;
    fs::write(dir.join(OBJECTS), obs.to_json()).context("cannot write observations")?;
    let table = query(config, &options, &records, &obs, transcript, &dir)?;
    merge(config, &map, &records, &table, &dir)?;
    Ok(())
}

pub fn evaluate_cmd(gt: &Path, pred: &Path, json: Option<Option<&Path>>) -> Result<()> {
    let gt_map = load_labels(gt, None)?;
    let pred_map = load_labels(pred, None)?;
    let report = evaluate(&gt_map, &pred_map).context("evaluation failed")?;
    if let Some(None) = json {
        println!("{}", serde_json::to_string_pretty(&report).context("cannot serialize report")?);
        return Ok(());
    }
    println!("IoU {:.4}  MSIoU {:.4}", report.mean_iou, report.msiou);
    println!("{:>5} {:>7} {:>8} {:>8}  matches", "gt", "cells", "best_iou", "msiou");
    for room in &report.per_room {
        let matches: Vec<String> = room.matches.iter().map(|m| format!("{}:{:.4}", m.pred_id, m.iou)).collect();
        println!(
            "{:>5} {:>7} {:>8.4} {:>8.4}  {}",
            room.gt_id,
            room.area_cells,
            room.best_iou,
            room.msiou,
            if matches.is_empty() { "-".to_string() } else { matches.join(" ") }
        );
    }
    if !report.unmatched_pred.is_empty() {
        let ids: Vec<String> = report.unmatched_pred.iter().map(|id| id.to_string()).collect();
        println!("unmatched predicted rooms: {}", ids.join(" "));
    }
    if let Some(Some(path)) = json {
        write_json(path, &report)?;
    }
    Ok(())
}
