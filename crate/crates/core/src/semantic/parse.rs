use std::collections::BTreeMap;
use std::fmt;

use super::{Label, SemanticAssignment, Vocabulary};
use crate::gridmap::RoomId;

const EXCERPT_CHARS: usize = 120;

/// A reply that does not follow the requested answer format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormatError {
    MissingLabel { excerpt: String },
    UnknownLabel { label: String, excerpt: String },
    RoomLines { missing: Vec<RoomId>, duplicated: Vec<RoomId>, unexpected: Vec<RoomId> },
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids = |v: &[RoomId]| v.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(", ");
        match self {
            FormatError::MissingLabel { excerpt } => write!(f, "no `LABEL:` line in reply {excerpt:?}"),
            FormatError::UnknownLabel { label, excerpt } => {
                write!(f, "unknown label {label:?} in reply {excerpt:?}")
            }
            FormatError::RoomLines { missing, duplicated, unexpected } => {
                let mut parts = Vec::new();
                if !missing.is_empty() {
                    parts.push(format!("missing rooms [{}]", ids(missing)));
                }
                if !duplicated.is_empty() {
                    parts.push(format!("duplicated rooms [{}]", ids(duplicated)));
                }
                if !unexpected.is_empty() {
                    parts.push(format!("unexpected rooms [{}]", ids(unexpected)));
                }
                write!(f, "bad `Room <id>: <label>` lines: {}", parts.join("; "))
            }
        }
    }
}

impl std::error::Error for FormatError {}

fn excerpt(text: &str) -> String {
    let mut out: String = text.chars().take(EXCERPT_CHARS).collect();
    if text.chars().count() > EXCERPT_CHARS {
        out.push_str("...");
    }
    out
}

/// Strips markdown emphasis and trailing punctuation models like to add.
fn clean_value(value: &str) -> &str {
    value
        .trim()
        .trim_matches(|c| matches!(c, '*' | '`' | '"' | '\''))
        .trim_end_matches(['.', ','])
        .trim()
}

fn key_value(line: &str) -> Option<(String, &str)> {
    let (key, value) = line.split_once(':')?;
    let key = key.trim().trim_matches(|c| matches!(c, '*' | '#' | '-' | ' '));
    Some((key.to_ascii_lowercase(), value))
}

/// Extracts `(label, reasoning)` from a room-level reply.
pub fn parse_room_response(text: &str, vocabulary: &Vocabulary) -> Result<(Label, String), FormatError> {
    let mut label_text = None;
    let mut reason = None;
    for line in text.lines() {
        let Some((key, value)) = key_value(line) else { continue };
        match key.as_str() {
            "label" if label_text.is_none() => label_text = Some(clean_value(value).to_string()),
            "reason" if reason.is_none() => reason = Some(value.trim().trim_matches('*').trim().to_string()),
            _ => {}
        }
    }
    let label_text = label_text.ok_or_else(|| FormatError::MissingLabel { excerpt: excerpt(text) })?;
    let label = vocabulary
        .lookup(&label_text)
        .ok_or_else(|| FormatError::UnknownLabel { label: label_text.clone(), excerpt: excerpt(text) })?;
    Ok((label, reason.unwrap_or_default()))
}

fn room_line(line: &str) -> Option<(u32, &str)> {
    let line = line.trim().trim_start_matches(['-', '*', ' ']);
    let head = line.get(..4)?;
    if !head.eq_ignore_ascii_case("room") {
        return None;
    }
    let (id, label) = line[4..].split_once(':')?;
    let id: u32 = id.trim().parse().ok()?;
    Some((id, label))
}

/// Extracts one assignment per expected room from an environment-level
/// reply. Lines that are not `Room <id>: <label>` are ignored.
pub fn parse_environment_response(
    text: &str,
    room_ids: &[RoomId],
    vocabulary: &Vocabulary,
) -> Result<Vec<SemanticAssignment>, FormatError> {
    let mut found: BTreeMap<RoomId, Vec<&str>> = BTreeMap::new();
    for line in text.lines() {
        if let Some((id, label)) = room_line(line) {
            found.entry(RoomId(id)).or_default().push(label);
        }
    }
    let missing: Vec<RoomId> = room_ids.iter().copied().filter(|id| !found.contains_key(id)).collect();
    let duplicated: Vec<RoomId> = found.iter().filter(|(_, v)| v.len() > 1).map(|(id, _)| *id).collect();
    let unexpected: Vec<RoomId> = found.keys().copied().filter(|id| !room_ids.contains(id)).collect();
    if !missing.is_empty() || !duplicated.is_empty() || !unexpected.is_empty() {
        return Err(FormatError::RoomLines { missing, duplicated, unexpected });
    }
    let mut ids = room_ids.to_vec();
    ids.sort();
    ids.into_iter()
        .map(|id| {
            let raw = clean_value(found[&id][0]);
            let label = vocabulary
                .lookup(raw)
                .ok_or_else(|| FormatError::UnknownLabel { label: raw.to_string(), excerpt: excerpt(text) })?;
            Ok(SemanticAssignment { room_id: id, label, reasoning: String::new() })
        })
        .collect()
}
