//! Topic framing, a simulated-time link with injectable latency, and
//! per-topic bandwidth accounting.

mod frame;
mod link;
pub mod payload;
mod stats;

pub use frame::{
    decode_frame, encode_frame, FrameError, FrameSequencer, TelemetryFrame, TopicId, FRAME_MAGIC,
    FRAME_OVERHEAD, MAX_PAYLOAD,
};
pub use link::{Delivery, DropPolicy, Link, LinkConfig, LATENCY_EARTH_MOON_L2};
pub use stats::{budget_report, BudgetReport, BudgetRow, TopicCounters, TopicStats, DEFAULT_WINDOW};
