use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::PartyId;
use crate::geometry::ProtocolLayout;
use crate::units::C;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    PulseBatch,
    DetectionReport,
    EncryptedResults,
    RevealedResults,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    /// One train of optical pulses; the message arrives with its first pulse.
    PulseBatch { train: usize, n_pulses: usize },
    /// One bit per pulse, set where Alice kept a detection.
    DetectionReport { bitmap: Vec<u8> },
    EncryptedResults { bits: Vec<u8> },
    RevealedResults { bits: Vec<u8> },
}

impl Payload {
    pub fn kind(&self) -> PayloadKind {
        match self {
            Payload::PulseBatch { .. } => PayloadKind::PulseBatch,
            Payload::DetectionReport { .. } => PayloadKind::DetectionReport,
            Payload::EncryptedResults { .. } => PayloadKind::EncryptedResults,
            Payload::RevealedResults { .. } => PayloadKind::RevealedResults,
        }
    }

    /// Classical bits on the wire. Optical pulses carry none.
    pub fn wire_bits(&self) -> usize {
        match self {
            Payload::PulseBatch { .. } => 0,
            Payload::DetectionReport { bitmap } => bitmap.len(),
            Payload::EncryptedResults { bits } | Payload::RevealedResults { bits } => bits.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedMessage {
    pub sender: PartyId,
    pub receiver: PartyId,
    pub payload: Payload,
    pub send_time: f64,
    pub arrival_time: f64,
}

/// Transit time of a message: light time over the link at its speed factor,
/// serialisation at `bit_rate`, and `processing_delay` at the receiver.
pub fn message_delay(
    layout: &ProtocolLayout,
    sender: PartyId,
    receiver: PartyId,
    wire_bits: usize,
    bit_rate: f64,
    processing_delay: f64,
) -> Result<f64> {
    let speed = layout
        .speeds
        .between(sender, receiver)
        .ok_or_else(|| Error::Protocol(format!("no channel between {sender} and {receiver}")))?;
    if !(bit_rate > 0.0) {
        return Err(Error::param("protocol.channel_bit_rate", "must be positive"));
    }
    let serialisation = wire_bits as f64 / bit_rate;
    Ok(layout.distance(sender, receiver) / (C * speed) + serialisation + processing_delay)
}

struct Scheduled {
    msg: TimedMessage,
    seq: u64,
}

impl Scheduled {
    fn key(&self) -> (f64, PartyId, PartyId, PayloadKind, u64) {
        (self.msg.arrival_time, self.msg.sender, self.msg.receiver, self.msg.payload.kind(), self.seq)
    }
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed: BinaryHeap is a max-heap and we want the earliest first.
    fn cmp(&self, other: &Self) -> Ordering {
        let (ta, sa, ra, ka, qa) = self.key();
        let (tb, sb, rb, kb, qb) = other.key();
        tb.total_cmp(&ta)
            .then(sb.cmp(&sa))
            .then(rb.cmp(&ra))
            .then(kb.cmp(&ka))
            .then(qb.cmp(&qa))
    }
}

/// Pending deliveries, earliest arrival first.
#[derive(Default)]
pub struct EventQueue {
    heap: BinaryHeap<Scheduled>,
    now: f64,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            now: f64::NEG_INFINITY,
            next_seq: 0,
        }
    }

    /// Time of the last delivered event.
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn push(&mut self, msg: TimedMessage) -> Result<()> {
        if !(msg.arrival_time >= msg.send_time) || !msg.send_time.is_finite() {
            return Err(Error::Invariant(format!(
                "{} -> {} arrives at {} before it is sent at {}",
                msg.sender, msg.receiver, msg.arrival_time, msg.send_time
            )));
        }
        if msg.arrival_time < self.now {
            return Err(Error::Invariant(format!(
                "{} -> {} scheduled at {} after the clock reached {}",
                msg.sender, msg.receiver, msg.arrival_time, self.now
            )));
        }
        self.heap.push(Scheduled { msg, seq: self.next_seq });
        self.next_seq += 1;
        Ok(())
    }

    /// Removes the next delivery; `None` once the queue has drained.
    pub fn pop(&mut self) -> Option<TimedMessage> {
        let next = self.heap.pop()?;
        self.now = next.msg.arrival_time;
        Some(next.msg)
    }
}
