use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use super::{DataPacket, Row, TelemetryError, ROWS_PER_PACKET};

/// Streamed packets of one session, keyed by sequence number.
#[derive(Debug, Clone, Default)]
pub struct StreamAssembly {
    packets: BTreeMap<u64, Vec<Row>>,
    final_seq: Option<u64>,
    duplicates: u64,
}

impl StreamAssembly {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false (and counts a duplicate) if `seq` was already held.
    pub fn insert(&mut self, packet: &DataPacket) -> bool {
        if self.packets.contains_key(&packet.seq) {
            self.duplicates += 1;
            return false;
        }
        if packet.final_packet {
            self.final_seq = Some(packet.seq);
        }
        self.packets.insert(packet.seq, packet.rows.clone());
        true
    }

    pub fn packet_count(&self) -> usize {
        self.packets.len()
    }

    pub fn row_count(&self) -> usize {
        self.packets.values().map(Vec::len).sum()
    }

    pub fn duplicates(&self) -> u64 {
        self.duplicates
    }

    pub fn final_seq(&self) -> Option<u64> {
        self.final_seq
    }

    pub fn rows(&self) -> Vec<Row> {
        self.packets.values().flatten().copied().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    /// Gaps in `0..expected` (or up to the highest seq seen when the total is unknown).
    pub fn missing(&self, expected_packets: Option<u64>) -> Vec<RangeInclusive<u64>> {
        let end = match expected_packets.or(self.final_seq.map(|s| s + 1)) {
            Some(n) => n,
            None => self.packets.keys().next_back().map_or(0, |s| s + 1),
        };
        let mut gaps = Vec::new();
        let mut next = 0u64;
        for &seq in self.packets.keys().take_while(|&&s| s < end) {
            if seq > next {
                gaps.push(next..=seq - 1);
            }
            next = seq + 1;
        }
        if next < end {
            gaps.push(next..=end - 1);
        }
        gaps
    }

    /// Final packet seen and no gaps before it.
    pub fn is_complete(&self) -> bool {
        self.final_seq.is_some() && self.missing(None).is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSource {
    Bulk,
    Stream,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LossReport {
    pub received_packets: usize,
    /// Known when the final packet or the bulk file arrived.
    pub expected_packets: Option<u64>,
    pub missing: Vec<RangeInclusive<u64>>,
    pub duplicates: u64,
}

impl LossReport {
    pub fn missing_count(&self) -> u64 {
        self.missing.iter().map(|r| r.end() - r.start() + 1).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconciled {
    pub rows: Vec<Row>,
    pub source: RowSource,
    pub report: LossReport,
}

/// Merges the two delivery paths of one session. The bulk file wins whenever it
/// is present; otherwise the streamed rows are used as received.
pub fn reconcile(stream: &StreamAssembly, bulk: Option<&[Row]>) -> Result<Reconciled, TelemetryError> {
    let expected_packets = match bulk {
        Some(rows) => Some(rows.len().div_ceil(ROWS_PER_PACKET) as u64),
        None => stream.final_seq().map(|s| s + 1),
    };
    let report = LossReport {
        received_packets: stream.packet_count(),
        expected_packets,
        missing: stream.missing(expected_packets),
        duplicates: stream.duplicates(),
    };
    let (mut rows, source) = match bulk {
        Some(rows) if !rows.is_empty() => (rows.to_vec(), RowSource::Bulk),
        _ if !stream.is_empty() => (stream.rows(), RowSource::Stream),
        _ => return Err(TelemetryError::SessionLost),
    };
    rows.sort_by(|a, b| a.t.total_cmp(&b.t));
    rows.dedup_by(|a, b| a.t == b.t);
    Ok(Reconciled { rows, source, report })
}
