use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{SemanticAssignment, Vocabulary};
use crate::gridmap::RoomId;
use crate::interpreter::RoomRecord;
use crate::objectmap::ObservationSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptLevel {
    RoomLevel,
    EnvironmentLevel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub role_text: String,
    pub instruction_text: String,
    pub data_text: String,
    pub level: PromptLevel,
}

impl Prompt {
    /// Text of the user turn: instruction followed by the room facts.
    pub fn user_text(&self) -> String {
        format!("{}\n\n{}", self.instruction_text, self.data_text)
    }

    /// Whole prompt as one document, used for golden files and logs.
    pub fn render(&self) -> String {
        format!(
            "[role]\n{}\n\n[instruction]\n{}\n\n[data]\n{}\n",
            self.role_text, self.instruction_text, self.data_text
        )
    }
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("no room-level response for room {0}")]
    MissingResponse(RoomId),
    #[error("cannot read prompt template {name}: {source}")]
    Template { name: String, source: std::io::Error },
}

/// Prompt wording. Templates use `{labels}` and `{room_count}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub room_role: String,
    pub room_instruction: String,
    pub env_role: String,
    pub env_instruction: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            room_role: include_str!("../../templates/room_role.txt").trim_end().to_string(),
            room_instruction: include_str!("../../templates/room_instruction.txt").trim_end().to_string(),
            env_role: include_str!("../../templates/env_role.txt").trim_end().to_string(),
            env_instruction: include_str!("../../templates/env_instruction.txt").trim_end().to_string(),
        }
    }
}

impl PromptTemplates {
    /// Loads `room_role.txt`, `room_instruction.txt`, `env_role.txt` and
    /// `env_instruction.txt` from `dir`.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let dir = dir.as_ref();
        let load = |name: &str| {
            fs::read_to_string(dir.join(name))
                .map(|s| s.trim_end().to_string())
                .map_err(|source| PromptError::Template { name: name.to_string(), source })
        };
        Ok(Self {
            room_role: load("room_role.txt")?,
            room_instruction: load("room_instruction.txt")?,
            env_role: load("env_role.txt")?,
            env_instruction: load("env_instruction.txt")?,
        })
    }
}

fn substitute(template: &str, values: &[(&str, String)]) -> String {
    values
        .iter()
        .fold(template.to_string(), |acc, (key, value)| acc.replace(&format!("{{{key}}}"), value))
}

/// Object multiset as `name xN` entries sorted by name, or `none`.
pub fn format_objects(names: &[String]) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for n in names {
        *counts.entry(n.as_str()).or_default() += 1;
    }
    if counts.is_empty() {
        return "none".to_string();
    }
    counts.iter().map(|(name, n)| format!("{name} x{n}")).collect::<Vec<_>>().join(", ")
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn geometry_lines(record: &RoomRecord) -> String {
    format!(
        "area: {:.2} m2\nsize: {:.2} m x {:.2} m",
        record.area_m2, record.length_m, record.width_m
    )
}

pub fn build_room_prompt(
    record: &RoomRecord,
    observations: &[String],
    vocabulary: &Vocabulary,
    templates: &PromptTemplates,
) -> Prompt {
    let values = [("labels", vocabulary.joined()), ("room_count", "1".to_string())];
    let data_text = format!(
        "Room {}\n{}\nadjacent rooms: {}\nobjects: {}",
        record.id,
        geometry_lines(record),
        record.adjacent.len(),
        format_objects(observations)
    );
    Prompt {
        role_text: substitute(&templates.room_role, &values),
        instruction_text: substitute(&templates.room_instruction, &values),
        data_text,
        level: PromptLevel::RoomLevel,
    }
}

pub fn build_environment_prompt(
    room_responses: &[SemanticAssignment],
    records: &[RoomRecord],
    observations: &ObservationSet,
    vocabulary: &Vocabulary,
    templates: &PromptTemplates,
) -> Result<Prompt, PromptError> {
    let by_room: BTreeMap<RoomId, &SemanticAssignment> =
        room_responses.iter().map(|a| (a.room_id, a)).collect();
    let mut sorted: Vec<&RoomRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.id);

    let mut blocks = Vec::with_capacity(sorted.len());
    for record in &sorted {
        let own = by_room.get(&record.id).ok_or(PromptError::MissingResponse(record.id))?;
        let mut neighbours = Vec::new();
        for n in &record.adjacent {
            let candidate = by_room.get(n).ok_or(PromptError::MissingResponse(*n))?;
            neighbours.push(format!("Room {n} (candidate: {})", candidate.label));
        }
        let adjacent = if neighbours.is_empty() { "none".to_string() } else { neighbours.join(", ") };
        blocks.push(format!(
            "Room {}\n{}\nobjects: {}\nadjacent: {}\ncandidate: {}\nreason: {}",
            record.id,
            geometry_lines(record),
            format_objects(observations.objects(record.id)),
            adjacent,
            own.label,
            one_line(&own.reasoning),
        ));
    }
    let values = [("labels", vocabulary.joined()), ("room_count", sorted.len().to_string())];
    Ok(Prompt {
        role_text: substitute(&templates.env_role, &values),
        instruction_text: substitute(&templates.env_instruction, &values),
        data_text: blocks.join("\n\n"),
        level: PromptLevel::EnvironmentLevel,
    })
}
