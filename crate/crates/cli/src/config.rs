//! Run configuration: a JSON file mirroring [`PipelineConfig`], overridden by
//! command-line flags. The LLM endpoint, model and key fall back to the
//! `SELROS_LLM_*` environment variables when neither a flag nor the file
//! sets them.
//!
//! Relative paths in a config file are resolved against the file's own
//! directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;

use selros_core::interpreter::DEFAULT_ADJACENCY_DILATION;
use selros_core::objectmap::DEFAULT_MAX_RANGE;
use selros_core::pipeline::PipelineOptions;
use selros_core::semantic::{BackendKind, LlmConfig, PromptTemplates, Vocabulary};
use selros_core::{Algorithm, SegmentationParams};

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub map_path: Option<PathBuf>,
    pub annotation_path: Option<PathBuf>,
    /// Per-room object lists merged into the observations.
    pub room_objects_path: Option<PathBuf>,
    pub segmentation: SegmentationParams,
    /// Cells.
    pub adjacency_dilation: usize,
    /// Meters.
    pub max_range: f64,
    pub llm: LlmConfig,
    pub vocabulary: Vocabulary,
    /// Directory holding the four prompt templates; built-in wording if unset.
    pub templates_dir: Option<PathBuf>,
    pub parallel: usize,
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            map_path: None,
            annotation_path: None,
            room_objects_path: None,
            segmentation: SegmentationParams::default(),
            adjacency_dilation: DEFAULT_ADJACENCY_DILATION,
            max_range: DEFAULT_MAX_RANGE,
            llm: LlmConfig::default(),
            vocabulary: Vocabulary::default(),
            templates_dir: None,
            parallel: 4,
            output_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: Self =
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut config.map_path,
            &mut config.annotation_path,
            &mut config.room_objects_path,
            &mut config.templates_dir,
            &mut config.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn options(&self) -> Result<PipelineOptions> {
        let templates = match &self.templates_dir {
            Some(dir) => PromptTemplates::from_dir(dir)?,
            None => PromptTemplates::default(),
        };
        Ok(PipelineOptions {
            segmentation: self.segmentation.clone(),
            adjacency_dilation: self.adjacency_dilation,
            max_range: self.max_range,
            vocabulary: self.vocabulary.clone(),
            templates,
            parallel: self.parallel,
        })
    }

    pub fn map_path(&self) -> Result<&Path> {
        match &self.map_path {
            Some(p) => Ok(p),
            None => bail!("no occupancy map given (use --map or map_path in the config)"),
        }
    }

    pub fn output_dir(&self) -> Result<&Path> {
        match &self.output_dir {
            Some(p) => Ok(p),
            None => bail!("no output directory given (use --out or output_dir in the config)"),
        }
    }
}

#[derive(Debug, Clone, Args, Default)]
pub struct ConfigArgs {
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct SegmentationArgs {
    #[arg(long = "algo")]
    pub algorithm: Option<Algorithm>,
    /// m²
    #[arg(long)]
    pub min_area: Option<f64>,
    /// m²
    #[arg(long)]
    pub max_area: Option<f64>,
    #[arg(long)]
    pub erosion_step: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

impl SegmentationArgs {
    fn apply(&self, p: &mut SegmentationParams) {
        if let Some(a) = self.algorithm {
            p.algorithm = a;
        }
        if let Some(v) = self.min_area {
            p.min_room_area = v;
        }
        if let Some(v) = self.max_area {
            p.max_room_area = v;
        }
        if let Some(v) = self.erosion_step {
            p.erosion_step = v;
        }
        if let Some(v) = self.max_iterations {
            p.max_iterations = v;
        }
    }
}

#[derive(Debug, Clone, Args, Default)]
pub struct LlmArgs {
    /// `stub` (offline, deterministic) or `http`.
    #[arg(long = "llm")]
    pub backend: Option<BackendKind>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    /// Seconds per request.
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Concurrent room-level queries.
    #[arg(long)]
    pub parallel: Option<usize>,
    /// Comma-separated label vocabulary; must include Other.
    #[arg(long, value_delimiter = ',')]
    pub vocabulary: Option<Vec<String>>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
}

impl LlmArgs {
    fn apply(&self, config: &mut PipelineConfig) -> Result<()> {
        let llm = &mut config.llm;
        if let Some(b) = self.backend {
            llm.backend = b;
        }
        if let Some(e) = &self.endpoint {
            llm.endpoint = Some(e.clone());
        }
        if let Some(m) = &self.model {
            llm.model = Some(m.clone());
        }
        if let Some(r) = self.max_retries {
            llm.max_retries = r;
        }
        if let Some(t) = self.timeout {
            llm.timeout = t;
        }
        if let Some(p) = self.parallel {
            config.parallel = p;
        }
        if let Some(v) = &self.vocabulary {
            config.vocabulary = Vocabulary::new(v.iter().map(|s| s.trim())).map_err(anyhow::Error::msg)?;
        }
        if let Some(t) = &self.templates {
            config.templates_dir = Some(t.clone());
        }
        Ok(())
    }
}

/// Flags that may override any configuration value; `None` leaves the
/// config file (or default) in place.
#[derive(Debug, Default)]
pub struct Overrides<'a> {
    pub map: Option<&'a Path>,
    pub annotations: Option<&'a Path>,
    pub room_objects: Option<&'a Path>,
    pub out: Option<&'a Path>,
    pub dilation: Option<usize>,
    pub max_range: Option<f64>,
    pub segmentation: Option<&'a SegmentationArgs>,
    pub llm: Option<&'a LlmArgs>,
}

/// flags > config file > environment > defaults
pub fn resolve(config: &ConfigArgs, overrides: Overrides<'_>) -> Result<PipelineConfig> {
    let mut c = match &config.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(p) = overrides.map {
        c.map_path = Some(p.to_path_buf());
    }
    if let Some(p) = overrides.annotations {
        c.annotation_path = Some(p.to_path_buf());
    }
    if let Some(p) = overrides.room_objects {
        c.room_objects_path = Some(p.to_path_buf());
    }
    if let Some(p) = overrides.out {
        c.output_dir = Some(p.to_path_buf());
    }
    if let Some(d) = overrides.dilation {
        c.adjacency_dilation = d;
    }
    if let Some(r) = overrides.max_range {
        c.max_range = r;
    }
    if let Some(s) = overrides.segmentation {
        s.apply(&mut c.segmentation);
    }
    if let Some(l) = overrides.llm {
        l.apply(&mut c)?;
    }
    c.llm.fill_from_env();
    validate(&c)?;
    Ok(c)
}

fn validate(c: &PipelineConfig) -> Result<()> {
    c.segmentation.validate()?;
    c.llm.validate().map_err(anyhow::Error::msg)?;
    if !(c.max_range >= 0.0 && c.max_range.is_finite()) {
        bail!("max_range must be a non-negative number of meters, got {}", c.max_range);
    }
    if c.parallel == 0 {
        bail!("parallel must be at least 1");
    }
    if c.llm.backend == BackendKind::Http && c.llm.api_key.is_none() {
        log::warn!("no API key set; sending unauthenticated requests");
    }
    Ok(())
}

