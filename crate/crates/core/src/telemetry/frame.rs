use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// "RLNK" read as a little-endian u32.
pub const FRAME_MAGIC: u32 = u32::from_le_bytes(*b"RLNK");
/// Header (magic, topic, seq, stamp, length) plus trailing CRC, bytes.
pub const FRAME_OVERHEAD: usize = 4 + 1 + 4 + 8 + 4 + 4;
pub const MAX_PAYLOAD: usize = 64 * 1024 * 1024;
const HEADER: usize = FRAME_OVERHEAD - 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum TopicId {
    Trajectory = 0,
    StereoCloud = 1,
    MapCloud = 2,
    CostMap2D = 3,
    ImageLeft = 4,
    LocalPlan = 5,
    RoverPose = 6,
    GoalAck = 7,
    GlobalPlan = 8,
    /// Operator command, ground to rover.
    Command = 9,
    /// Mode and navigation status as JSON.
    Status = 10,
}

impl TopicId {
    pub const ALL: [TopicId; 11] = [
        TopicId::Trajectory,
        TopicId::StereoCloud,
        TopicId::MapCloud,
        TopicId::CostMap2D,
        TopicId::ImageLeft,
        TopicId::LocalPlan,
        TopicId::RoverPose,
        TopicId::GoalAck,
        TopicId::GlobalPlan,
        TopicId::Command,
        TopicId::Status,
    ];

    /// Topics listed in the bandwidth table, in table order.
    pub const BUDGET: [TopicId; 5] = [
        TopicId::Trajectory,
        TopicId::StereoCloud,
        TopicId::MapCloud,
        TopicId::CostMap2D,
        TopicId::ImageLeft,
    ];

    pub fn from_u8(v: u8) -> Option<TopicId> {
        Self::ALL.get(v as usize).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Row label in the bandwidth report.
    pub fn label(self) -> &'static str {
        match self {
            TopicId::Trajectory => "Trajectory",
            TopicId::StereoCloud => "Stereo Camera Point Cloud",
            TopicId::MapCloud => "Map Point Cloud",
            TopicId::CostMap2D => "2D Cost Map",
            TopicId::ImageLeft => "Image left (JPEG 80% @ 4 fps)",
            TopicId::LocalPlan => "Local Plan",
            TopicId::RoverPose => "Rover Pose",
            TopicId::GoalAck => "Goal Ack",
            TopicId::GlobalPlan => "Global Plan",
            TopicId::Command => "Command",
            TopicId::Status => "Status",
        }
    }

    /// Bulk map and image topics whose stale frames may be dropped.
    pub fn is_supersedable(self) -> bool {
        matches!(
            self,
            TopicId::StereoCloud | TopicId::MapCloud | TopicId::CostMap2D | TopicId::ImageLeft
        )
    }
}

impl fmt::Display for TopicId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub topic: TopicId,
    pub seq: u32,
    /// Simulation time at which the frame was produced, s.
    pub stamp: f64,
    pub payload: Vec<u8>,
}

impl TelemetryFrame {
    /// Bytes on the wire.
    pub fn wire_size(&self) -> usize {
        self.payload.len() + FRAME_OVERHEAD
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("bad magic 0x{0:08x}")]
    BadMagic(u32),
    #[error("crc mismatch: frame says 0x{stored:08x}, computed 0x{computed:08x}")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("truncated frame: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("unknown topic id {0}")]
    UnknownTopic(u8),
    #[error("payload of {0} bytes exceeds the 64 MiB limit")]
    PayloadTooLarge(usize),
}

/// Serializes a frame: `[magic u32][topic u8][seq u32][stamp f64][len u32][payload][crc32]`,
/// little-endian, CRC over everything before it.
pub fn encode_frame(frame: &TelemetryFrame) -> Result<Vec<u8>, FrameError> {
    if frame.payload.len() > MAX_PAYLOAD {
        return Err(FrameError::PayloadTooLarge(frame.payload.len()));
    }
    let mut out = Vec::with_capacity(frame.wire_size());
    out.extend_from_slice(&FRAME_MAGIC.to_le_bytes());
    out.push(frame.topic as u8);
    out.extend_from_slice(&frame.seq.to_le_bytes());
    out.extend_from_slice(&frame.stamp.to_le_bytes());
    out.extend_from_slice(&(frame.payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&frame.payload);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Parses one frame from the front of `bytes`, returning it with the number of
/// bytes consumed.
pub fn decode_frame(bytes: &[u8]) -> Result<(TelemetryFrame, usize), FrameError> {
    let truncated = |needed| FrameError::Truncated {
        needed,
        available: bytes.len(),
    };
    if bytes.len() < 4 {
        return Err(truncated(FRAME_OVERHEAD));
    }
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let magic = u32_at(0);
    if magic != FRAME_MAGIC {
        return Err(FrameError::BadMagic(magic));
    }
    if bytes.len() < HEADER {
        return Err(truncated(FRAME_OVERHEAD));
    }
    let len = u32_at(17) as usize;
    if len > MAX_PAYLOAD {
        return Err(FrameError::PayloadTooLarge(len));
    }
    let total = FRAME_OVERHEAD + len;
    if bytes.len() < total {
        return Err(truncated(total));
    }
    let stored = u32_at(HEADER + len);
    let computed = crc32fast::hash(&bytes[..HEADER + len]);
    if stored != computed {
        return Err(FrameError::CrcMismatch { stored, computed });
    }
    let topic = TopicId::from_u8(bytes[4]).ok_or(FrameError::UnknownTopic(bytes[4]))?;
    let frame = TelemetryFrame {
        topic,
        seq: u32_at(5),
        stamp: f64::from_le_bytes(bytes[9..17].try_into().unwrap()),
        payload: bytes[HEADER..HEADER + len].to_vec(),
    };
    Ok((frame, total))
}

/// Hands out per-topic sequence numbers starting at 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameSequencer {
    next: [u32; TopicId::ALL.len()],
}

impl FrameSequencer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn frame(&mut self, topic: TopicId, payload: Vec<u8>, stamp: f64) -> TelemetryFrame {
        let slot = &mut self.next[topic.index()];
        let seq = *slot;
        *slot = slot.wrapping_add(1);
        TelemetryFrame {
            topic,
            seq,
            stamp,
            payload,
        }
    }
}
