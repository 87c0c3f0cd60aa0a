//! Per-scalar communication accounting.

use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    /// client to server
    Up,
    /// server to client
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PayloadKind {
    RawPoints,
    DictionaryPoints,
    EmbeddedStats,
    AggregatedStats,
    LinearStats,
}

/// One transfer between a client and the server. The scalar count is fixed
/// by the payload shape through the constructors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncMessage {
    pub direction: Direction,
    pub kind: PayloadKind,
    /// Zero-based client on the other end of the link.
    pub client: usize,
    pub scalar_count: u64,
}

impl SyncMessage {
    /// `n` feature vectors with their rewards: `n (d + 1)` scalars.
    pub fn points(direction: Direction, kind: PayloadKind, client: usize, n: usize, dim: usize) -> Self {
        Self {
            direction,
            kind,
            client,
            scalar_count: (n as u64) * (dim as u64 + 1),
        }
    }

    /// Embedded statistics against a dictionary of size `s`: `s^2 + s + 1`.
    pub fn stats(direction: Direction, kind: PayloadKind, client: usize, s: usize) -> Self {
        let s = s as u64;
        Self {
            direction,
            kind,
            client,
            scalar_count: s * s + s + 1,
        }
    }

    /// Linear sufficient statistics `(A, b)`: `d^2 + d`.
    pub fn linear_stats(direction: Direction, client: usize, dim: usize) -> Self {
        let d = dim as u64;
        Self {
            direction,
            kind: PayloadKind::LinearStats,
            client,
            scalar_count: d * d + d,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommLedger {
    cumulative: u64,
    sync_times: Vec<usize>,
    per_sync: Vec<u64>,
    streaming: u64,
    messages: u64,
    totals: BTreeMap<(Direction, PayloadKind), u64>,
}

impl CommLedger {
    pub fn new() -> Self {
        Self::default()
    }

    fn add(&mut self, msg: &SyncMessage) {
        self.cumulative += msg.scalar_count;
        self.messages += 1;
        *self.totals.entry((msg.direction, msg.kind)).or_default() += msg.scalar_count;
    }

    /// Records a global synchronization at time `t` and returns its cost.
    pub fn record_sync(&mut self, t: usize, msgs: &[SyncMessage]) -> u64 {
        let cost: u64 = msgs.iter().map(|m| m.scalar_count).sum();
        for m in msgs {
            self.add(m);
        }
        self.sync_times.push(t);
        self.per_sync.push(cost);
        cost
    }

    /// Records traffic that is not part of a synchronization event.
    pub fn record_stream(&mut self, msgs: &[SyncMessage]) -> u64 {
        let cost: u64 = msgs.iter().map(|m| m.scalar_count).sum();
        for m in msgs {
            self.add(m);
        }
        self.streaming += cost;
        cost
    }

    pub fn cumulative_scalars(&self) -> u64 {
        self.cumulative
    }

    pub fn sync_times(&self) -> &[usize] {
        &self.sync_times
    }

    pub fn per_sync_scalars(&self) -> &[u64] {
        &self.per_sync
    }

    pub fn sync_count(&self) -> usize {
        self.sync_times.len()
    }

    pub fn streaming_scalars(&self) -> u64 {
        self.streaming
    }

    pub fn message_count(&self) -> u64 {
        self.messages
    }

    pub fn total_for(&self, direction: Direction, kind: PayloadKind) -> u64 {
        self.totals.get(&(direction, kind)).copied().unwrap_or(0)
    }

    pub fn totals(&self) -> &BTreeMap<(Direction, PayloadKind), u64> {
        &self.totals
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_counts() {
        assert_eq!(SyncMessage::points(Direction::Up, PayloadKind::RawPoints, 0, 3, 4).scalar_count, 15);
        assert_eq!(SyncMessage::stats(Direction::Down, PayloadKind::AggregatedStats, 0, 3).scalar_count, 13);
        assert_eq!(SyncMessage::linear_stats(Direction::Up, 0, 3).scalar_count, 12);
    }

    #[test]
    fn conservation() {
        let mut l = CommLedger::new();
        let up = SyncMessage::points(Direction::Up, PayloadKind::RawPoints, 1, 2, 2);
        let down = SyncMessage::points(Direction::Down, PayloadKind::RawPoints, 0, 2, 2);
        assert_eq!(l.record_sync(4, &[up, down]), 12);
        l.record_stream(&[up]);
        assert_eq!(l.cumulative_scalars(), 18);
        assert_eq!(l.per_sync_scalars().iter().sum::<u64>() + l.streaming_scalars(), 18);
        assert_eq!(l.totals().values().sum::<u64>(), 18);
        assert_eq!(l.sync_times(), &[4]);
        assert_eq!(l.message_count(), 3);
    }
}
