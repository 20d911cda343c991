//! Semantic room segmentation for 2D indoor maps.
//!
//! The crate covers the whole chain from occupancy grid to labeled rooms:
//! geometric segmentation, per-room geometry and adjacency, object
//! observation from room centroids, two-level LLM labeling, label-driven
//! merging of over-segmented rooms, and evaluation against ground truth.

pub mod gridmap;
pub mod integration;
pub mod interpreter;
pub mod metrics;
pub mod objectmap;
pub mod pipeline;
pub mod segmentation;
pub mod semantic;

pub use gridmap::{CellCoord, CellState, LabelMap, OccupancyGrid, RoomId};
pub use integration::IntegrationResult;
pub use interpreter::RoomRecord;
pub use metrics::MetricReport;
pub use objectmap::{ObjectAnnotation, ObservationSet};
pub use segmentation::{Algorithm, SegmentationParams};
pub use semantic::{Label, SemanticAssignment, Vocabulary};
