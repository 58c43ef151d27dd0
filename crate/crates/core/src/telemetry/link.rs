use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{TelemetryFrame, TopicId};

/// One-way light-time figure used for lunar relays, s.
pub const LATENCY_EARTH_MOON_L2: f64 = 0.410;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropPolicy {
    #[default]
    None,
    /// A queued map or image frame is discarded when a newer frame of the
    /// same topic is queued behind it.
    DropOldestPerTopic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    /// s
    pub one_way_delay: f64,
    /// Mb/s; `None` transmits instantly.
    pub bandwidth_cap: Option<f64>,
    pub drop_policy: DropPolicy,
    /// Intervals `[start, end)` during which nothing is transmitted, s.
    #[serde(default)]
    pub outages: Vec<(f64, f64)>,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            one_way_delay: 0.0,
            bandwidth_cap: None,
            drop_policy: DropPolicy::None,
            outages: vec![],
        }
    }
}

impl LinkConfig {
    pub fn with_delay(one_way_delay: f64) -> Self {
        Self {
            one_way_delay,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.one_way_delay >= 0.0 && self.one_way_delay.is_finite()) {
            return Err(format!("one_way_delay must be >= 0, got {}", self.one_way_delay));
        }
        if let Some(cap) = self.bandwidth_cap {
            if !(cap > 0.0) {
                return Err(format!("bandwidth cap must be positive, got {cap}"));
            }
        }
        if self.outages.iter().any(|(a, b)| !(b >= a)) {
            return Err("outage intervals must have end >= start".into());
        }
        Ok(())
    }

    /// True when `t` is outside every outage interval.
    pub fn is_up(&self, t: f64) -> bool {
        !self.outages.iter().any(|&(a, b)| t >= a && t < b)
    }

    /// Earliest time at or after `t` when the link is up.
    fn next_up(&self, mut t: f64) -> f64 {
        loop {
            match self.outages.iter().find(|&&(a, b)| t >= a && t < b) {
                Some(&(_, b)) => t = b,
                None => return t,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub frame: TelemetryFrame,
    pub sent_at: f64,
    pub delivered_at: f64,
}

#[derive(Debug, Clone)]
struct Queued {
    frame: TelemetryFrame,
    sent_at: f64,
}

/// Simulated-time, in-order frame channel.
///
/// Frames are serialized one after another at the bandwidth cap, then spend
/// the one-way delay in flight. Only frames still waiting for the transmitter
/// can be dropped.
#[derive(Debug, Clone)]
pub struct Link {
    cfg: LinkConfig,
    waiting: VecDeque<Queued>,
    in_flight: VecDeque<Delivery>,
    tx_free_at: f64,
    dropped: Vec<u64>,
    delivered_bytes: u64,
}

impl Link {
    pub fn new(cfg: LinkConfig) -> Self {
        Self {
            cfg,
            waiting: VecDeque::new(),
            in_flight: VecDeque::new(),
            tx_free_at: f64::NEG_INFINITY,
            dropped: vec![0; TopicId::ALL.len()],
            delivered_bytes: 0,
        }
    }

    pub fn config(&self) -> &LinkConfig {
        &self.cfg
    }

    pub fn is_up(&self, t: f64) -> bool {
        self.cfg.is_up(t)
    }

    /// Queues a frame produced at `now`.
    pub fn send(&mut self, frame: TelemetryFrame, now: f64) {
        self.advance(now);
        if self.cfg.drop_policy == DropPolicy::DropOldestPerTopic && frame.topic.is_supersedable() {
            let before = self.waiting.len();
            self.waiting.retain(|q| q.frame.topic != frame.topic);
            self.dropped[frame.topic.index()] += (before - self.waiting.len()) as u64;
        }
        self.waiting.push_back(Queued { frame, sent_at: now });
        self.advance(now);
    }

    fn advance(&mut self, now: f64) {
        while let Some(head) = self.waiting.front() {
            let start = self.cfg.next_up(self.tx_free_at.max(head.sent_at));
            if start > now {
                break;
            }
            let q = self.waiting.pop_front().unwrap();
            let tx = match self.cfg.bandwidth_cap {
                Some(cap) => 8.0 * q.frame.wire_size() as f64 / (cap * 1e6),
                None => 0.0,
            };
            self.tx_free_at = start + tx;
            self.in_flight.push_back(Delivery {
                delivered_at: start + tx + self.cfg.one_way_delay,
                sent_at: q.sent_at,
                frame: q.frame,
            });
        }
    }

    /// Frames that have arrived by `now`, in arrival order.
    pub fn poll(&mut self, now: f64) -> Vec<Delivery> {
        self.advance(now);
        let mut out = vec![];
        while self.in_flight.front().is_some_and(|d| d.delivered_at <= now) {
            let d = self.in_flight.pop_front().unwrap();
            self.delivered_bytes += d.frame.wire_size() as u64;
            out.push(d);
        }
        out
    }

    pub fn dropped(&self, topic: TopicId) -> u64 {
        self.dropped[topic.index()]
    }

    pub fn delivered_bytes(&self) -> u64 {
        self.delivered_bytes
    }

    /// Frames accepted but not yet delivered.
    pub fn pending(&self) -> usize {
        self.waiting.len() + self.in_flight.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{FrameSequencer, TopicStats};

    fn frame(seq: &mut FrameSequencer, topic: TopicId, size: usize, t: f64) -> TelemetryFrame {
        seq.frame(topic, vec![0; size], t)
    }

    #[test]
    fn zero_delay_is_immediate() {
        let mut s = FrameSequencer::new();
        let mut l = Link::new(LinkConfig::default());
        l.send(frame(&mut s, TopicId::RoverPose, 40, 1.0), 1.0);
        let d = l.poll(1.0);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].delivered_at, 1.0);
    }

    #[test]
    fn fixed_delay() {
        let mut s = FrameSequencer::new();
        let mut l = Link::new(LinkConfig::with_delay(LATENCY_EARTH_MOON_L2));
        l.send(frame(&mut s, TopicId::Command, 10, 2.0), 2.0);
        assert!(l.poll(2.409).is_empty());
        let d = l.poll(2.41);
        assert_eq!(d.len(), 1);
        assert!((d[0].delivered_at - 2.41).abs() < 1e-12);
    }

    #[test]
    fn outage_holds_frames() {
        let mut s = FrameSequencer::new();
        let cfg = LinkConfig {
            outages: vec![(1.0, 3.0)],
            ..LinkConfig::with_delay(0.1)
        };
        let mut l = Link::new(cfg);
        l.send(frame(&mut s, TopicId::RoverPose, 40, 1.5), 1.5);
        assert!(l.poll(2.9).is_empty());
        let d = l.poll(3.2);
        assert!((d[0].delivered_at - 3.1).abs() < 1e-12);
    }

    /// Replays the transmitter by hand: each 250 kB map frame needs 2 s at
    /// 1 Mb/s, a new one is offered every second.
    #[test]
    fn capped_link_drops_superseded_maps() {
        let mut s = FrameSequencer::new();
        let cfg = LinkConfig {
            bandwidth_cap: Some(1.0),
            drop_policy: DropPolicy::DropOldestPerTopic,
            ..LinkConfig::with_delay(0.0)
        };
        let mut l = Link::new(cfg);
        let size = 250_000 - crate::telemetry::FRAME_OVERHEAD;
        let mut got = vec![];
        let mut stats = TopicStats::default();
        for k in 0..20 {
            let t = k as f64;
            l.send(frame(&mut s, TopicId::CostMap2D, size, t), t);
            for d in l.poll(t) {
                stats.account(&d.frame);
                got.push(d);
            }
        }
        for d in l.poll(100.0) {
            stats.account(&d.frame);
            got.push(d);
        }
        // oracle: transmitter busy [0,2), [2,4), ...; frame 1 is waiting when
        // the transmitter frees at t=2 and goes out before frame 2 is offered;
        // from then on every even frame is superseded by the odd one behind it
        let seqs: Vec<u32> = got.iter().map(|d| d.frame.seq).collect();
        let mut expect = vec![0u32];
        expect.extend((1..20).step_by(2));
        assert_eq!(seqs, expect);
        assert_eq!(l.dropped(TopicId::CostMap2D), 9);
        assert!(seqs.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(got.last().unwrap().frame.seq, 19);
        assert_eq!(stats.total_bytes(), l.delivered_bytes());
    }

    #[test]
    fn commands_never_dropped() {
        let mut s = FrameSequencer::new();
        let cfg = LinkConfig {
            bandwidth_cap: Some(0.001),
            drop_policy: DropPolicy::DropOldestPerTopic,
            ..LinkConfig::default()
        };
        let mut l = Link::new(cfg);
        for k in 0..10 {
            l.send(frame(&mut s, TopicId::Command, 100, k as f64 * 0.1), k as f64 * 0.1);
            l.send(frame(&mut s, TopicId::GoalAck, 10, k as f64 * 0.1), k as f64 * 0.1);
        }
        assert_eq!(l.poll(1e6).len(), 20);
    }
}
