use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{TelemetryFrame, TopicId};

/// Averaging window for the rate figures, s.
pub const DEFAULT_WINDOW: f64 = 10.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TopicCounters {
    pub bytes_total: u64,
    pub frames_total: u64,
    /// (stamp, wire bytes) of frames still inside the window.
    #[serde(skip)]
    recent: VecDeque<(f64, u64)>,
    #[serde(skip)]
    recent_bytes: u64,
}

/// Per-topic byte counters with a sliding-window rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicStats {
    pub window: f64,
    topics: Vec<TopicCounters>,
    /// Latest stamp seen, s.
    pub now: f64,
}

impl Default for TopicStats {
    fn default() -> Self {
        Self::new(DEFAULT_WINDOW)
    }
}

impl TopicStats {
    pub fn new(window: f64) -> Self {
        Self {
            window,
            topics: vec![TopicCounters::default(); TopicId::ALL.len()],
            now: 0.0,
        }
    }

    pub fn account(&mut self, frame: &TelemetryFrame) {
        self.account_bytes(frame.topic, frame.wire_size() as u64, frame.stamp);
    }

    /// Adds `bytes` on `topic` at time `stamp`.
    pub fn account_bytes(&mut self, topic: TopicId, bytes: u64, stamp: f64) {
        let c = &mut self.topics[topic.index()];
        c.bytes_total += bytes;
        c.frames_total += 1;
        c.recent.push_back((stamp, bytes));
        c.recent_bytes += bytes;
        self.advance(stamp);
    }

    /// Moves the window end forward; earlier times are ignored.
    pub fn advance(&mut self, now: f64) {
        if now > self.now {
            self.now = now;
        }
        let start = self.now - self.window;
        for c in &mut self.topics {
            while let Some(&(t, b)) = c.recent.front() {
                if t > start {
                    break;
                }
                c.recent.pop_front();
                c.recent_bytes -= b;
            }
        }
    }

    pub fn counters(&self, topic: TopicId) -> &TopicCounters {
        &self.topics[topic.index()]
    }

    /// Mb/s over the window ending at the latest stamp.
    pub fn rate_mbps(&self, topic: TopicId) -> f64 {
        8.0 * self.topics[topic.index()].recent_bytes as f64 / self.window / 1e6
    }

    pub fn total_bytes(&self) -> u64 {
        self.topics.iter().map(|c| c.bytes_total).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub topic: TopicId,
    pub label: String,
    pub mbps: f64,
}

/// Bandwidth table: the five streamed topics plus their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub window: f64,
    pub rows: Vec<BudgetRow>,
    pub total_mbps: f64,
    /// Rates of the remaining topics (plans, pose, status, commands).
    pub other: Vec<BudgetRow>,
}

impl BudgetReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<32} {:>16}", "Topic", "Data Size (Mb/s)");
        let _ = writeln!(s, "{}", "-".repeat(49));
        for r in &self.rows {
            let _ = writeln!(s, "{:<32} {:>16.2}", r.label, r.mbps);
        }
        let _ = writeln!(s, "{}", "-".repeat(49));
        let _ = writeln!(s, "{:<32} {:>16.2}", "TOTAL", self.total_mbps);
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn budget_report(stats: &TopicStats) -> BudgetReport {
    let row = |t: TopicId| BudgetRow {
        topic: t,
        label: t.label().to_string(),
        mbps: stats.rate_mbps(t),
    };
    let rows: Vec<BudgetRow> = TopicId::BUDGET.iter().map(|&t| row(t)).collect();
    let total_mbps = rows.iter().map(|r| r.mbps).sum();
    let other = TopicId::ALL
        .iter()
        .filter(|t| !TopicId::BUDGET.contains(t))
        .map(|&t| row(t))
        .collect();
    BudgetReport {
        window: stats.window,
        rows,
        total_mbps,
        other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::FRAME_OVERHEAD;

    #[test]
    fn idle_is_zero() {
        let s = TopicStats::default();
        let r = budget_report(&s);
        assert!(r.rows.iter().all(|r| r.mbps == 0.0));
        assert_eq!(r.total_mbps, 0.0);
    }

    #[test]
    fn jpeg_stream_rate() {
        let mut s = TopicStats::default();
        for k in 0..200 {
            s.account_bytes(TopicId::ImageLeft, (64_688 + FRAME_OVERHEAD) as u64, 0.25 * k as f64);
        }
        let r = s.rate_mbps(TopicId::ImageLeft);
        assert!((r - 2.07).abs() < 0.005, "{r}");
    }

    #[test]
    fn window_slides() {
        let mut s = TopicStats::new(1.0);
        s.account_bytes(TopicId::MapCloud, 125_000, 0.5);
        assert!((s.rate_mbps(TopicId::MapCloud) - 1.0).abs() < 1e-12);
        s.advance(1.6);
        assert_eq!(s.rate_mbps(TopicId::MapCloud), 0.0);
        assert_eq!(s.counters(TopicId::MapCloud).bytes_total, 125_000);
    }

    #[test]
    fn single_topic_total() {
        let mut s = TopicStats::new(2.0);
        s.account_bytes(TopicId::CostMap2D, 4000, 1.0);
        let r = budget_report(&s);
        assert_eq!(r.total_mbps, s.rate_mbps(TopicId::CostMap2D));
        assert!(r.to_text().contains("TOTAL"));
    }
}
