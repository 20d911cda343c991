//! Rule-based offline classifier.
//!
//! Reads the room facts back out of a prompt's data block and answers in the
//! exact format the real model is asked for. Room level, first matching rule
//! wins:
//!
//! | objects / geometry                                   | label      |
//! |------------------------------------------------------|------------|
//! | toilet, bathtub, shower, showerhead                  | Bathroom   |
//! | bed                                                  | Bedroom    |
//! | stove, stoveburner, fridge, microwave, countertop    | Kitchen    |
//! | sofa, television, tv                                 | Livingroom |
//! | desk together with chair or laptop                   | Officeroom |
//! | no signature object, length / width >= 3             | Hallway    |
//! | no signature object, area < 3 m²                     | Storage    |
//! | anything else                                        | Other      |
//!
//! Environment level echoes each candidate, except that a room whose
//! candidate is Other and which has exactly one neighbour takes that
//! neighbour's candidate.

use std::collections::BTreeMap;

use super::{PromptLevel, Vocabulary, OTHER};

const BATHROOM: &[&str] = &["toilet", "bathtub", "shower", "showerhead"];
const BEDROOM: &[&str] = &["bed"];
const KITCHEN: &[&str] = &["stove", "stoveburner", "fridge", "microwave", "countertop"];
const LIVINGROOM: &[&str] = &["sofa", "television", "tv"];
const OFFICE_ANCHOR: &str = "desk";
const OFFICE_COMPANIONS: &[&str] = &["chair", "laptop"];

const ELONGATION: f64 = 3.0;
const SMALL_AREA_M2: f64 = 3.0;

#[derive(Debug, Default)]
struct RoomFacts {
    id: u32,
    area_m2: f64,
    length_m: f64,
    width_m: f64,
    objects: Vec<String>,
    adjacent: Vec<(u32, String)>,
    candidate: String,
}

fn parse_objects(value: &str) -> Vec<String> {
    if value.trim() == "none" {
        return Vec::new();
    }
    value
        .split(", ")
        .filter_map(|entry| {
            let (name, count) = entry.trim().rsplit_once(" x")?;
            let count: usize = count.parse().ok()?;
            Some(std::iter::repeat_n(name.to_string(), count))
        })
        .flatten()
        .collect()
}

fn parse_adjacent(value: &str) -> Vec<(u32, String)> {
    if value.trim() == "none" {
        return Vec::new();
    }
    value
        .split("), ")
        .filter_map(|entry| {
            let entry = entry.trim().trim_start_matches("Room ").trim_end_matches(')');
            let (id, rest) = entry.split_once(" (candidate: ")?;
            Some((id.trim().parse().ok()?, rest.trim().to_string()))
        })
        .collect()
}

fn parse_blocks(data: &str) -> Vec<RoomFacts> {
    let mut rooms: Vec<RoomFacts> = Vec::new();
    for line in data.lines() {
        if let Some(id) = line.strip_prefix("Room ").and_then(|r| r.trim().parse().ok()) {
            rooms.push(RoomFacts { id, ..Default::default() });
            continue;
        }
        let (Some(room), Some((key, value))) = (rooms.last_mut(), line.split_once(": ")) else {
            continue;
        };
        match key {
            "area" => room.area_m2 = value.trim_end_matches(" m2").parse().unwrap_or(0.0),
            "size" => {
                let mut dims = value.split(" x ").map(|d| d.trim_end_matches(" m").parse::<f64>().unwrap_or(0.0));
                room.length_m = dims.next().unwrap_or(0.0);
                room.width_m = dims.next().unwrap_or(0.0);
            }
            "objects" => room.objects = parse_objects(value),
            "adjacent" => room.adjacent = parse_adjacent(value),
            "candidate" => room.candidate = value.trim().to_string(),
            _ => {}
        }
    }
    rooms
}

fn classify(room: &RoomFacts) -> (&'static str, String) {
    let has = |name: &str| room.objects.iter().any(|o| o == name);
    let first_of = |set: &[&'static str]| set.iter().copied().find(|n| has(n));
    if let Some(o) = first_of(BATHROOM) {
        return ("Bathroom", format!("A {o} is visible, which is characteristic of a bathroom."));
    }
    if let Some(o) = first_of(BEDROOM) {
        return ("Bedroom", format!("A {o} is visible, which is characteristic of a bedroom."));
    }
    if let Some(o) = first_of(KITCHEN) {
        return ("Kitchen", format!("A {o} is visible, which is characteristic of a kitchen."));
    }
    if let Some(o) = first_of(LIVINGROOM) {
        return ("Livingroom", format!("A {o} is visible, which is characteristic of a living room."));
    }
    if has(OFFICE_ANCHOR) {
        if let Some(o) = first_of(OFFICE_COMPANIONS) {
            return ("Officeroom", format!("A desk with a {o} suggests a workspace."));
        }
    }
    let signature = BATHROOM
        .iter()
        .chain(BEDROOM)
        .chain(KITCHEN)
        .chain(LIVINGROOM)
        .chain(OFFICE_COMPANIONS)
        .chain(std::iter::once(&OFFICE_ANCHOR))
        .any(|n| has(n));
    if !signature {
        if room.width_m > 0.0 && room.length_m / room.width_m >= ELONGATION {
            return ("Hallway", "No distinctive objects and a long, narrow shape suggest a hallway.".into());
        }
        if room.area_m2 < SMALL_AREA_M2 {
            return ("Storage", "No distinctive objects and a very small area suggest storage space.".into());
        }
    }
    (OTHER, "The visible objects and geometry do not identify a specific room type.".into())
}

/// Deterministic reply to a prompt's data block, in the requested format.
pub fn stub_classify(level: PromptLevel, data: &str) -> String {
    stub_reply(level, data, &Vocabulary::default())
}

/// Like [`stub_classify`], but rule labels missing from `vocabulary` come out
/// as Other.
pub(crate) fn stub_reply(level: PromptLevel, data: &str, vocabulary: &Vocabulary) -> String {
    let rooms = parse_blocks(data);
    match level {
        PromptLevel::RoomLevel => {
            let (label, reason) = rooms.first().map(classify).unwrap_or((OTHER, "No room facts were given.".into()));
            let label = vocabulary.lookup(label).map_or(OTHER.to_string(), |l| l.to_string());
            format!("LABEL: {label}\nREASON: {reason}")
        }
        PromptLevel::EnvironmentLevel => {
            let candidates: BTreeMap<u32, &str> = rooms.iter().map(|r| (r.id, r.candidate.as_str())).collect();
            rooms
                .iter()
                .map(|r| {
                    let label = match r.adjacent.as_slice() {
                        [(neighbour, listed)] if r.candidate == OTHER => {
                            candidates.get(neighbour).copied().unwrap_or(listed.as_str())
                        }
                        _ => r.candidate.as_str(),
                    };
                    format!("Room {}: {label}", r.id)
                })
                .collect::<Vec<_>>()
                .join("\n")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room_data(objects: &str, length: f64, width: f64, area: f64) -> String {
        format!("Room 1\narea: {area:.2} m2\nsize: {length:.2} m x {width:.2} m\nadjacent rooms: 0\nobjects: {objects}")
    }

    #[test]
    fn room_rules() {
        let label = |objects: &str, l, w, a| {
            stub_classify(PromptLevel::RoomLevel, &room_data(objects, l, w, a)).lines().next().unwrap().to_string()
        };
        assert_eq!(label("bed x1, lamp x1", 4.0, 3.0, 12.0), "LABEL: Bedroom");
        assert_eq!(label("none", 5.0, 0.5, 2.5), "LABEL: Hallway");
        assert_eq!(label("none", 1.5, 1.0, 1.5), "LABEL: Storage");
        assert_eq!(label("none", 4.0, 3.0, 12.0), "LABEL: Other");
        assert_eq!(label("bed x1, toilet x1", 4.0, 3.0, 12.0), "LABEL: Bathroom");
        assert_eq!(label("fridge x1", 4.0, 3.0, 12.0), "LABEL: Kitchen");
        assert_eq!(label("tv x1", 4.0, 3.0, 12.0), "LABEL: Livingroom");
        assert_eq!(label("chair x2, desk x1", 4.0, 3.0, 12.0), "LABEL: Officeroom");
        // a lone chair is a signature object but matches no rule
        assert_eq!(label("chair x1", 1.0, 1.0, 1.0), "LABEL: Other");
        assert_eq!(label("coffee table x2", 1.0, 1.0, 1.0), "LABEL: Storage");
    }

    #[test]
    fn environment_adopts_sole_neighbour() {
        let data = "Room 1\narea: 20.00 m2\nsize: 5.00 m x 4.00 m\nobjects: sofa x1\nadjacent: Room 2 (candidate: Other)\ncandidate: Livingroom\nreason: sofa\n\n\
                    Room 2\narea: 6.00 m2\nsize: 3.00 m x 2.00 m\nobjects: none\nadjacent: Room 1 (candidate: Livingroom)\ncandidate: Other\nreason: nothing";
        assert_eq!(stub_classify(PromptLevel::EnvironmentLevel, data), "Room 1: Livingroom\nRoom 2: Livingroom");
    }

    #[test]
    fn other_with_two_neighbours_stays() {
        let data = "Room 1\nadjacent: Room 2 (candidate: Other)\ncandidate: Kitchen\n\n\
                    Room 2\nadjacent: Room 1 (candidate: Kitchen), Room 3 (candidate: Bedroom)\ncandidate: Other\n\n\
                    Room 3\nadjacent: Room 2 (candidate: Other)\ncandidate: Bedroom";
        assert_eq!(
            stub_classify(PromptLevel::EnvironmentLevel, data),
            "Room 1: Kitchen\nRoom 2: Other\nRoom 3: Bedroom"
        );
    }
}
