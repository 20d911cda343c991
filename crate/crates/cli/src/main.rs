//! `selros`: room segmentation with semantic layering.
//!
//! Exit status: 0 on success, 2 for input or configuration errors, 3 when the
//! language model is unreachable or keeps answering in the wrong format.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{resolve, ConfigArgs, LlmArgs, Overrides, SegmentationArgs};

#[derive(Debug, Parser)]
#[command(name = "selros", version, about = "Room segmentation refined by LLM room labels")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Segment an occupancy map into rooms.
    Segment {
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        segmentation: SegmentationArgs,
    },
    /// Compute area, size and adjacency of every room.
    Interpret {
        #[arg(long)]
        map: Option<PathBuf>,
        /// Segmentation label map.
        #[arg(long)]
        labels: PathBuf,
        /// Adjacency dilation in cells.
        #[arg(long)]
        dilation: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the objects visible from each room's centroid.
    Objects {
        #[arg(long)]
        map: Option<PathBuf>,
        /// rooms.json from `interpret`.
        #[arg(long)]
        rooms: PathBuf,
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Extra per-room object lists.
        #[arg(long)]
        room_objects: Option<PathBuf>,
        /// Meters.
        #[arg(long)]
        max_range: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label every room with the two-level LLM query.
    Query {
        #[arg(long)]
        rooms: PathBuf,
        /// objects.json from `objects`.
        #[arg(long)]
        objects: PathBuf,
        #[command(flatten)]
        llm: LlmArgs,
        /// Append every request and reply to this JSON-lines file.
        #[arg(long)]
        log_transcript: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge adjacent rooms that share a label.
    Integrate {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        rooms: PathBuf,
        #[arg(long)]
        semantic: PathBuf,
        /// Adjacency dilation for the report, in cells.
        #[arg(long)]
        dilation: Option<usize>,
        #[arg(long)]
        vocabulary: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a predicted label map against ground truth.
    Evaluate {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Write the full report as JSON to PATH, or to standard output
        /// instead of the table when no path is given.
        #[arg(long, value_name = "PATH", num_args = 0..=1)]
        json: Option<Option<PathBuf>>,
    },
    /// Run every stage end to end.
    Pipeline {
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        room_objects: Option<PathBuf>,
        /// Use this label map instead of segmenting.
        #[arg(long)]
        import_segmentation: Option<PathBuf>,
        #[arg(long)]
        dilation: Option<usize>,
        #[arg(long)]
        max_range: Option<f64>,
        #[command(flatten)]
        segmentation: SegmentationArgs,
        #[command(flatten)]
        llm: LlmArgs,
        #[arg(long)]
        log_transcript: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Llm(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let c = &cli.config;
    match &cli.command {
        Command::Segment { map, out, segmentation } => {
            let cfg = resolve(
                c,
                Overrides { map: map.as_deref(), out: out.as_deref(), segmentation: Some(segmentation), ..Default::default() },
            )?;
            commands::segment_stage(&cfg)
        }
        Command::Interpret { map, labels, dilation, out } => {
            let cfg = resolve(
                c,
                Overrides { map: map.as_deref(), out: out.as_deref(), dilation: *dilation, ..Default::default() },
            )?;
            commands::interpret_stage(&cfg, labels)
        }
        Command::Objects { map, rooms, annotations, room_objects, max_range, out } => {
            let cfg = resolve(
                c,
                Overrides {
                    map: map.as_deref(),
                    annotations: annotations.as_deref(),
                    room_objects: room_objects.as_deref(),
                    max_range: *max_range,
                    out: out.as_deref(),
                    ..Default::default()
                },
            )?;
            commands::objects_stage(&cfg, rooms)
        }
        Command::Query { rooms, objects, llm, log_transcript, out } => {
            let cfg = resolve(c, Overrides { out: out.as_deref(), llm: Some(llm), ..Default::default() })?;
            commands::query_stage(&cfg, rooms, objects, log_transcript.as_deref())
        }
        Command::Integrate { labels, rooms, semantic, dilation, vocabulary, out } => {
            let llm = LlmArgs {
                vocabulary: vocabulary.as_ref().map(|v| v.split(',').map(String::from).collect()),
                ..Default::default()
            };
            let cfg = resolve(
                c,
                Overrides { out: out.as_deref(), dilation: *dilation, llm: Some(&llm), ..Default::default() },
            )?;
            commands::integrate_stage(&cfg, labels, rooms, semantic)
        }
        Command::Evaluate { gt, pred, json } => {
            commands::evaluate_cmd(gt, pred, json.as_ref().map(|j| j.as_deref()))
        }
        Command::Pipeline {
            map,
            annotations,
            room_objects,
            import_segmentation,
            dilation,
            max_range,
            segmentation,
            llm,
            log_transcript,
            out,
        } => {
            let cfg = resolve(
                c,
                Overrides {
                    map: map.as_deref(),
                    annotations: annotations.as_deref(),
                    room_objects: room_objects.as_deref(),
                    out: out.as_deref(),
                    dilation: *dilation,
                    max_range: *max_range,
                    segmentation: Some(segmentation),
                    llm: Some(llm),
                },
            )?;
            commands::pipeline(&cfg, import_segmentation.as_deref(), log_transcript.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Llm(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
