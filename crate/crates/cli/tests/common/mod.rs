//! Helpers shared by the CLI test targets: fixture paths, running the
//! binary, and a fake chat-completions server.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::{Arc, Mutex};
use std::thread;

use selros_core::semantic::{stub_classify, PromptLevel};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn selros(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selros"))
        .args(args)
        .env_remove("SELROS_LLM_ENDPOINT")
        .env_remove("SELROS_LLM_API_KEY")
        .env_remove("SELROS_LLM_MODEL")
        .output()
        .expect("selros binary runs")
}

pub fn selros_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_selros"));
    cmd.args(args)
        .env_remove("SELROS_LLM_ENDPOINT")
        .env_remove("SELROS_LLM_API_KEY")
        .env_remove("SELROS_LLM_MODEL");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("selros binary runs")
}

/// Standard `pipeline` invocation on a bundled environment.
pub fn pipeline_args(env: &str, out: &Path) -> Vec<String> {
    let dir = fixtures().join(env);
    vec![
        "pipeline".into(),
        "--map".into(),
        dir.join("map.pgm").display().to_string(),
        "--annotations".into(),
        dir.join("objects.json").display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Every reply is well formed.
    None,
    /// The first attempt of the room-level query for room 1 is malformed.
    FirstReplyOfRoomOne,
    /// Every reply is malformed.
    Always,
}

pub const MALFORMED: &str = "It is hard to say, the room looks cozy.";

/// One request the fake server received: the first user turn (which
/// identifies the query) and how many messages the conversation had.
#[derive(Debug, Clone)]
pub struct Call {
    pub query: String,
    pub turns: usize,
}

/// Chat-completions endpoint on a loopback port that answers like the stub
/// backend, except for the injected faults.
pub struct FakeLlm {
    pub url: String,
    pub calls: Arc<Mutex<Vec<Call>>>,
}

impl FakeLlm {
    pub fn start(fault: Fault) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let calls: Arc<Mutex<Vec<Call>>> = Arc::default();
        let log = calls.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let log = log.clone();
                thread::spawn(move || serve(stream, fault, &log));
            }
        });
        Self { url, calls }
    }

    pub fn calls(&self) -> Vec<Call> {
        self.calls.lock().unwrap().clone()
    }
}

fn read_request(stream: &mut TcpStream) -> Option<Vec<u8>> {
    let mut reader = BufReader::new(stream);
    let mut length = 0usize;
    let mut chunked = false;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).ok()? == 0 {
            return None;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        let lower = line.to_ascii_lowercase();
        if let Some(v) = lower.strip_prefix("content-length:") {
            length = v.trim().parse().ok()?;
        }
        if lower.starts_with("transfer-encoding:") && lower.contains("chunked") {
            chunked = true;
        }
    }
    let mut body = Vec::new();
    if chunked {
        loop {
            let mut size = String::new();
            reader.read_line(&mut size).ok()?;
            let n = usize::from_str_radix(size.trim(), 16).ok()?;
            let mut chunk = vec![0; n + 2];
            reader.read_exact(&mut chunk).ok()?;
            if n == 0 {
                break;
            }
            body.extend_from_slice(&chunk[..n]);
        }
    } else {
        body.resize(length, 0);
        reader.read_exact(&mut body).ok()?;
    }
    Some(body)
}

fn serve(mut stream: TcpStream, fault: Fault, log: &Mutex<Vec<Call>>) {
    let Some(body) = read_request(&mut stream) else { return };
    let request: serde_json::Value = serde_json::from_slice(&body).unwrap_or_default();
    let messages = request["messages"].as_array().cloned().unwrap_or_default();
    let query = messages
        .iter()
        .find(|m| m["role"] == "user")
        .and_then(|m| m["content"].as_str())
        .unwrap_or_default()
        .to_string();
    let (instruction, data) = query.split_once("\n\n").unwrap_or((&query, ""));
    let level = if instruction.contains("Room <id>: <label>") {
        PromptLevel::EnvironmentLevel
    } else {
        PromptLevel::RoomLevel
    };
    let first_of_room_one = level == PromptLevel::RoomLevel && data.starts_with("Room 1\n") && messages.len() == 2;
    let reply = match fault {
        Fault::Always => MALFORMED.to_string(),
        Fault::FirstReplyOfRoomOne if first_of_room_one => MALFORMED.to_string(),
        _ => stub_classify(level, data),
    };
    log.lock().unwrap().push(Call { query, turns: messages.len() });
    let payload = serde_json::json!({
        "id": "fake",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": reply}, "finish_reason": "stop"}]
    })
    .to_string();
    let response = format!(
        "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        payload.len(),
        payload
    );
    let _ = stream.write_all(response.as_bytes());
}
