//! Append-only session logs: a short text header followed by binary records.
//!
//! ```text
//! ROVERLINK-SESSION-LOG 1
//! scene: "loop"
//! seed: 7
//! config-hash: 3f9a...
//! config: {"scene":{...},"session":{...}}
//! ---
//! [kind u8][log_time f64][len u32][frame bytes] ...
//! ```
//!
//! Commands are logged when the operator issues them, downlink frames when
//! the ground receives them. The last record carries the exact final rover
//! state so a replay can be compared bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::session::{Session, SessionConfig, SessionError};
use super::OperatorCommand;
use crate::telemetry::payload::decode_rover_pose;
use crate::telemetry::{decode_frame, encode_frame, TelemetryFrame};
use crate::world::{RoverState, WorldScene};

const MAGIC_LINE: &str = "ROVERLINK-SESSION-LOG 1";
const END_OF_HEADER: &str = "---";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordKind {
    Command = 0,
    Downlink = 1,
    End = 2,
}

impl RecordKind {
    fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(RecordKind::Command),
            1 => Some(RecordKind::Downlink),
            2 => Some(RecordKind::End),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub kind: RecordKind,
    pub log_time: f64,
    pub frame: TelemetryFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LoggedConfig {
    scene: WorldScene,
    session: SessionConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogHeader {
    pub scene: String,
    pub seed: u64,
    pub config_hash: String,
    pub config_json: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub header: LogHeader,
    pub records: Vec<LogRecord>,
}

/// Hash binding a configuration to the build that produced it.
pub fn config_hash(config_json: &str) -> String {
    let mut h = Sha256::new();
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    h.update(b"\n");
    h.update(config_json.as_bytes());
    hex::encode(h.finalize())
}

fn log_err(msg: impl Into<String>) -> SessionError {
    SessionError::Log(msg.into())
}

impl SessionLog {
    pub fn new(scene: &WorldScene, cfg: &SessionConfig) -> Self {
        let config_json = serde_json::to_string(&LoggedConfig {
            scene: scene.clone(),
            session: cfg.clone(),
        })
        .expect("config serializes");
        Self {
            header: LogHeader {
                scene: scene.name.clone(),
                seed: scene.seed,
                config_hash: config_hash(&config_json),
                config_json,
            },
            records: vec![],
        }
    }

    pub fn push(&mut self, kind: RecordKind, log_time: f64, frame: TelemetryFrame) {
        self.records.push(LogRecord { kind, log_time, frame });
    }

    /// Scene and session config, after checking the hash against this build.
    pub fn config(&self) -> Result<(WorldScene, SessionConfig), SessionError> {
        let expected = config_hash(&self.header.config_json);
        if expected != self.header.config_hash {
            return Err(log_err(format!(
                "config hash mismatch: log says {}, this build computes {expected}",
                self.header.config_hash
            )));
        }
        let c: LoggedConfig = serde_json::from_str(&self.header.config_json)
            .map_err(|e| log_err(format!("bad config in header: {e}")))?;
        Ok((c.scene, c.session))
    }

    /// Log times must never decrease and the end marker must come last.
    pub fn validate(&self) -> Result<(), SessionError> {
        let mut last = f64::NEG_INFINITY;
        for (i, r) in self.records.iter().enumerate() {
            if !(r.log_time >= last) {
                return Err(log_err(format!(
                    "record {i}: log time {} precedes {last}",
                    r.log_time
                )));
            }
            last = r.log_time;
            if r.kind == RecordKind::End && i + 1 != self.records.len() {
                return Err(log_err(format!("record {i}: end marker before the last record")));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, SessionError> {
        let h = &self.header;
        let mut out = format!(
            "{MAGIC_LINE}\nscene: {}\nseed: {}\nconfig-hash: {}\nconfig: {}\n{END_OF_HEADER}\n",
            serde_json::to_string(&h.scene).expect("string serializes"),
            h.seed,
            h.config_hash,
            h.config_json
        )
        .into_bytes();
        for r in &self.records {
            let frame = encode_frame(&r.frame)?;
            out.push(r.kind as u8);
            out.extend(r.log_time.to_le_bytes());
            out.extend((frame.len() as u32).to_le_bytes());
            out.extend(frame);
        }
        Ok(out)
    }

    /// `Ok(None)` for an empty file.
    pub fn parse(bytes: &[u8]) -> Result<Option<Self>, SessionError> {
        if bytes.is_empty() {
            return Ok(None);
        }
        let mut pos = 0;
        let mut line = || -> Result<&str, SessionError> {
            let rest = &bytes[pos..];
            let n = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| log_err("truncated header"))?;
            pos += n + 1;
            std::str::from_utf8(&rest[..n]).map_err(|_| log_err("header is not UTF-8"))
        };
        if line()? != MAGIC_LINE {
            return Err(log_err("not a session log"));
        }
        let mut field = |name: &str| -> Result<String, SessionError> {
            let l = line()?;
            l.strip_prefix(name)
                .and_then(|r| r.strip_prefix(": "))
                .map(str::to_owned)
                .ok_or_else(|| log_err(format!("expected header field {name:?}, got {l:?}")))
        };
        let scene = serde_json::from_str(&field("scene")?).map_err(|e| log_err(format!("scene field: {e}")))?;
        let seed = field("seed")?
            .parse()
            .map_err(|_| log_err("seed is not an integer"))?;
        let config_hash = field("config-hash")?;
        let config_json = field("config")?;
        if line()? != END_OF_HEADER {
            return Err(log_err("header not terminated"));
        }
        let mut records = vec![];
        while pos < bytes.len() {
            let rest = &bytes[pos..];
            if rest.len() < 13 {
                return Err(log_err(format!("truncated record at byte {pos}")));
            }
            let kind = RecordKind::from_u8(rest[0])
                .ok_or_else(|| log_err(format!("unknown record kind {} at byte {pos}", rest[0])))?;
            let log_time = f64::from_le_bytes(rest[1..9].try_into().unwrap());
            let len = u32::from_le_bytes(rest[9..13].try_into().unwrap()) as usize;
            let body = rest
                .get(13..13 + len)
                .ok_or_else(|| log_err(format!("truncated record at byte {pos}")))?;
            let (frame, used) = decode_frame(body)?;
            if used != len {
                return Err(log_err(format!("record at byte {pos} has trailing bytes")));
            }
            records.push(LogRecord { kind, log_time, frame });
            pos += 13 + len;
        }
        let log = Self {
            header: LogHeader {
                scene,
                seed,
                config_hash,
                config_json,
            },
            records,
        };
        log.validate()?;
        Ok(Some(log))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), SessionError> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Option<Self>, SessionError> {
        Self::parse(&fs::read(path)?)
    }

    /// Final rover state from the end marker, if the run was finished.
    pub fn final_state(&self) -> Result<Option<RoverState>, SessionError> {
        match self.records.last() {
            Some(r) if r.kind == RecordKind::End => Ok(Some(decode_rover_pose(&r.frame.payload)?)),
            _ => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayOutcome {
    pub commands: usize,
    pub duration: f64,
    pub final_state: RoverState,
    pub recorded_final: Option<RoverState>,
    /// Logged downlink frames that differ from the replayed ones.
    pub frame_mismatches: usize,
    /// Final state and every logged frame reproduced exactly.
    pub identical: bool,
}

/// Re-runs a recorded session from its commands. A log without records is a
/// no-op and yields `None`.
pub fn replay(log: &SessionLog) -> Result<Option<ReplayOutcome>, SessionError> {
    log.validate()?;
    let (scene, cfg) = log.config()?;
    if log.records.is_empty() {
        return Ok(None);
    }
    let mut s = Session::new(scene, cfg)?;
    s.record();
    let mut commands = 0;
    let end_time = log.records.last().map(|r| r.log_time).unwrap_or(0.0);
    for r in log.records.iter().filter(|r| r.kind == RecordKind::Command) {
        while s.time() < r.log_time {
            s.step()?;
        }
        if s.time() != r.log_time {
            return Err(log_err(format!(
                "command at {} does not fall on a simulation step",
                r.log_time
            )));
        }
        let text = std::str::from_utf8(&r.frame.payload).map_err(|_| log_err("command is not UTF-8"))?;
        let cmd = OperatorCommand::from_json(text).map_err(|e| log_err(e.to_string()))?;
        s.submit(cmd).map_err(|e| log_err(e.to_string()))?;
        commands += 1;
    }
    while s.time() < end_time {
        s.step()?;
    }
    s.finish();
    let replayed = s.take_log().expect("recording enabled");
    let final_state = *s.onboard().state();
    let recorded_final = log.final_state()?;
    let original: Vec<_> = log.records.iter().filter(|r| r.kind == RecordKind::Downlink).collect();
    let again: Vec<_> = replayed.records.iter().filter(|r| r.kind == RecordKind::Downlink).collect();
    let frame_mismatches = original
        .iter()
        .zip(&again)
        .filter(|(a, b)| a != b)
        .count()
        + original.len().abs_diff(again.len());
    let identical = frame_mismatches == 0 && recorded_final.is_none_or(|r| same_bits(&r, &final_state));
    Ok(Some(ReplayOutcome {
        commands,
        duration: end_time,
        final_state,
        recorded_final,
        frame_mismatches,
        identical,
    }))
}

fn same_bits(a: &RoverState, b: &RoverState) -> bool {
    let bits = |s: &RoverState| {
        [s.pose.x, s.pose.y, s.pose.theta, s.twist.v, s.twist.omega, s.time].map(f64::to_bits)
    };
    bits(a) == bits(b)
}

/// Reads and replays a log file; an empty file is a no-op.
pub fn replay_file(path: impl AsRef<Path>) -> Result<Option<ReplayOutcome>, SessionError> {
    match SessionLog::read(path)? {
        Some(log) => replay(&log),
        None => Ok(None),
    }
}
