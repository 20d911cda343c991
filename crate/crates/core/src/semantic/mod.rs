//! Two-level LLM labeling of segmented rooms.
//!
//! Every room is first classified on its own (room level). The candidate
//! labels and reasons are then gathered into a single environment-level
//! prompt that lets the model revise candidates with the whole home in view
//! and answer in a fixed `Room <id>: <label>` format. The environment-level
//! answer is the semantic assignment used for merging.
//!
//! Backends sit behind [`ChatBackend`]; the offline [`StubBackend`] answers
//! from fixed rules so the whole chain runs deterministically without a
//! network.

mod client;
mod parse;
mod prompt;
mod stub;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::gridmap::RoomId;

pub use client::{
    BackendError, BackendKind, ChatBackend, ChatMessage, HttpBackend, LlmClient, LlmConfig, QueryError,
    Secret, StubBackend, Transcript,
};
pub use parse::{parse_environment_response, parse_room_response, FormatError};
pub use prompt::{
    build_environment_prompt, build_room_prompt, format_objects, Prompt, PromptError, PromptLevel,
    PromptTemplates,
};
pub use stub::stub_classify;

/// The label every vocabulary must contain.
pub const OTHER: &str = "Other";

pub const DEFAULT_LABELS: [&str; 8] =
    ["Bedroom", "Bathroom", "Kitchen", "Livingroom", "Hallway", "Officeroom", "Storage", "Other"];

/// Closed set of room labels, in their canonical spelling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    labels: Vec<String>,
}

impl Vocabulary {
    pub fn new<I, S>(labels: I) -> Result<Self, String>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out: Vec<String> = Vec::new();
        for l in labels {
            let l = l.into().trim().to_string();
            if l.is_empty() {
                return Err("empty label in vocabulary".into());
            }
            if out.iter().any(|o| normalize(o) == normalize(&l)) {
                return Err(format!("duplicate label {l:?}"));
            }
            out.push(l);
        }
        if !out.iter().any(|l| l == OTHER) {
            return Err(format!("vocabulary must contain {OTHER:?}"));
        }
        Ok(Self { labels: out })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Finds the vocabulary label matching `text`, ignoring case, spaces,
    /// hyphens and underscores.
    pub fn lookup(&self, text: &str) -> Option<Label> {
        let key = normalize(text);
        self.labels.iter().find(|l| normalize(l) == key).map(|l| Label(l.clone()))
    }

    pub fn other(&self) -> Label {
        Label(OTHER.to_string())
    }

    pub fn joined(&self) -> String {
        self.labels.join(", ")
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new(DEFAULT_LABELS).expect("default vocabulary is valid")
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = String;

    fn try_from(value: Vec<String>) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.labels
    }
}

fn normalize(s: &str) -> String {
    s.chars()
        .filter(|c| !matches!(c, ' ' | '-' | '_'))
        .flat_map(char::to_lowercase)
        .collect()
}

/// A label drawn from a [`Vocabulary`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(String);

impl Label {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticAssignment {
    pub room_id: RoomId,
    pub label: Label,
    pub reasoning: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_rules() {
        let v = Vocabulary::default();
        assert_eq!(v.lookup("kitchen").unwrap().as_str(), "Kitchen");
        assert_eq!(v.lookup("Living Room").unwrap().as_str(), "Livingroom");
        assert!(v.lookup("Ballroom").is_none());
        assert!(Vocabulary::new(["Kitchen"]).is_err());
        assert!(Vocabulary::new(["Kitchen", "kitchen", "Other"]).is_err());
        let parsed: Vocabulary = serde_json::from_str(r#"["Kitchen","Other"]"#).unwrap();
        assert_eq!(parsed.labels().len(), 2);
        assert!(serde_json::from_str::<Vocabulary>(r#"["Kitchen"]"#).is_err());
    }
}
