//! Deterministic discrete-event execution of a commitment run.
//!
//! Six parties exchange [`TimedMessage`]s over the links of a
//! [`ProtocolLayout`](crate::geometry::ProtocolLayout). Every message arrives
//! after the light time of its link at the link's speed factor, plus a
//! serialisation delay and a per-hop processing delay. The queue orders
//! deliveries by arrival time and breaks ties on (sender, receiver, payload
//! kind), so a run is a pure function of its configuration and seed.

mod events;
mod otp;
mod run;

use serde::{Deserialize, Serialize};

pub use events::{message_delay, EventQueue, Payload, PayloadKind, TimedMessage};
pub use otp::{otp_decrypt, otp_encrypt, OneTimePadKey};
pub use run::{measure_timing, run_honest_protocol, verify_transcript, CommitmentTranscript, MeasuredTiming, ProtocolConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum PartyId {
    Alice,
    A0,
    A1,
    Bob,
    B0,
    B1,
}

impl PartyId {
    pub const ALL: [PartyId; 6] = [PartyId::Alice, PartyId::A0, PartyId::A1, PartyId::Bob, PartyId::B0, PartyId::B1];

    pub fn name(self) -> &'static str {
        match self {
            PartyId::Alice => "alice",
            PartyId::A0 => "a0",
            PartyId::A1 => "a1",
            PartyId::Bob => "bob",
            PartyId::B0 => "b0",
            PartyId::B1 => "b1",
        }
    }
}

impl std::fmt::Display for PartyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
