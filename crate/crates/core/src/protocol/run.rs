use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::events::{message_delay, EventQueue, Payload, TimedMessage};
use super::otp::{otp_decrypt, otp_encrypt, OneTimePadKey};
use super::PartyId;
use crate::geometry::{ProtocolLayout, TimingObservations};
use crate::photonic::{
    generate_pulse_train_with, postselect_clicks, Basis, DetectionEvent, DetectorModel, DetectorPair, PostSelection,
    PulseRecord, SourceParams,
};
use crate::rng::stream;
use crate::security::{verify, Declaration, EstimationMode, SecurityParams, VerificationInput, VerificationVerdict};
use crate::units::to_ns_int;
use crate::{Error, Result};

const STREAM_PULSES: u64 = 0;
const STREAM_KEYS: u64 = 1;
const STREAM_MEASURE: u64 = 2;
const STREAM_POSTSELECT: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub layout: ProtocolLayout,
    pub source: SourceParams,
    pub detector: DetectorModel,
    pub security: SecurityParams,
    pub postselection: PostSelection,
    pub estimation: EstimationMode,
    /// Probability that a photon measured in the matching basis lands in the
    /// wrong detector.
    pub baseline_error: f64,
    /// How long each agent waits between receiving and revealing.
    pub hold_time: f64,
    /// Added to the arrival of every classical message.
    pub processing_delay: f64,
    pub channel_bit_rate: f64,
    /// Pad length per agent. `None` sizes the pads to the number of pulses.
    pub key_bits: Option<usize>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            layout: ProtocolLayout::field_test(),
            source: SourceParams::default(),
            detector: DetectorModel::default(),
            security: SecurityParams::default(),
            postselection: PostSelection::default(),
            estimation: EstimationMode::WorstCase,
            baseline_error: 0.01,
            hold_time: 0.0,
            processing_delay: 0.0,
            channel_bit_rate: 1e9,
            key_bits: None,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        self.source.validate()?;
        self.detector.validate()?;
        self.security.validate()?;
        if !(0.0..=1.0).contains(&self.baseline_error) {
            return Err(Error::param("protocol.baseline_error", "must lie in [0, 1]"));
        }
        for (name, v) in [
            ("protocol.hold_time", self.hold_time),
            ("protocol.processing_delay", self.processing_delay),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be finite and >= 0"));
            }
        }
        if !(self.channel_bit_rate > 0.0) {
            return Err(Error::param("protocol.channel_bit_rate", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitmentTranscript {
    pub seed: u64,
    pub layout: ProtocolLayout,
    pub pulses: Vec<PulseRecord>,
    /// Every click Alice registered, with the post-selection decision.
    pub detections: Vec<DetectionEvent>,
    pub committed_bit: u8,
    /// In delivery order.
    pub messages: Vec<TimedMessage>,
    pub observations: TimingObservations,
    pub t_unveil: f64,
    /// When Alice fixed her basis, relative to `t0`.
    pub t_commit_actual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredTiming {
    pub observations: TimingObservations,
    /// First reveal transmission by either agent.
    pub t_unveil: f64,
}

/// Reads Bob's timing observations off the delivered messages.
pub fn measure_timing(transcript: &CommitmentTranscript) -> Result<MeasuredTiming> {
    let t0 = transcript
        .pulses
        .iter()
        .map(|p| p.emit_time)
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::Protocol("transcript holds no pulses".into()))?;
    let reveals = || {
        transcript
            .messages
            .iter()
            .filter(|m| matches!(m.payload, Payload::RevealedResults { .. }))
    };
    let last_arrival = |at: PartyId| {
        reveals()
            .filter(|m| m.receiver == at)
            .map(|m| m.arrival_time)
            .max_by(f64::total_cmp)
            .ok_or_else(|| Error::Protocol(format!("no reveal reached {at}")))
    };
    let t_b0 = last_arrival(PartyId::B0)?;
    let t_b1 = last_arrival(PartyId::B1)?;
    let t_unveil = reveals().map(|m| m.send_time).min_by(f64::total_cmp).expect("reveals exist");
    Ok(MeasuredTiming {
        observations: TimingObservations::new(t0, t_b0, t_b1)?,
        t_unveil,
    })
}

/// Bob's verdict from what he and his agents hold in the transcript.
pub fn verify_transcript(
    transcript: &CommitmentTranscript,
    security: &SecurityParams,
    estimation: EstimationMode,
) -> Result<VerificationVerdict> {
    let delivered = |to: PartyId| transcript.messages.iter().filter(move |m| m.receiver == to);
    let detected: Option<Vec<usize>> = delivered(PartyId::Bob).find_map(|m| match &m.payload {
        Payload::DetectionReport { bitmap } => {
            Some(bitmap.iter().enumerate().filter(|(_, &b)| b == 1).map(|(i, _)| i).collect())
        }
        _ => None,
    });
    let revealed = |at: PartyId| {
        delivered(at)
            .filter_map(|m| match &m.payload {
                Payload::RevealedResults { bits } => Some(bits.clone()),
                _ => None,
            })
            .next_back()
    };
    let declaration = |at: PartyId| -> Result<Option<Declaration>> {
        match (&detected, revealed(at)) {
            (Some(d), Some(bits)) => Declaration::from_report(d, &bits).map(Some),
            _ => Ok(None),
        }
    };
    let decl0 = declaration(PartyId::B0)?;
    let decl1 = declaration(PartyId::B1)?;
    let observations = measure_timing(transcript).ok().map(|m| m.observations);
    verify(&VerificationInput {
        params: security,
        pulses: &transcript.pulses,
        detected: detected.as_deref(),
        declaration_b0: decl0.as_ref(),
        declaration_b1: decl1.as_ref(),
        layout: &transcript.layout,
        observations,
        estimation,
    })
}

/// Alice's measurement of every train with her own detector pair, followed
/// by post-selection. Returns all events and the arrival time of the last
/// pulse.
fn alice_measures(
    cfg: &ProtocolConfig,
    pulses: &[PulseRecord],
    basis: Basis,
    optical_delay: f64,
    seed: u64,
) -> Result<(Vec<DetectionEvent>, f64)> {
    let mut measure_rng = stream(seed, STREAM_MEASURE);
    let mut select_rng = stream(seed, STREAM_POSTSELECT);
    let mut events = Vec::new();
    let mut last_arrival = f64::NEG_INFINITY;
    for train in 0..cfg.source.n_parallel {
        let mut detectors = DetectorPair::new(cfg.detector);
        let mut clicks = Vec::new();
        for pulse in pulses.iter().filter(|p| p.train == train) {
            let arrival = pulse.emit_time + optical_delay;
            last_arrival = last_arrival.max(arrival);
            if let Some(click) = detectors.detect(pulse, arrival, basis, cfg.baseline_error, &mut measure_rng) {
                clicks.push(click);
            }
        }
        events.extend(postselect_clicks(&clicks, &cfg.detector, cfg.postselection, &mut select_rng)?);
    }
    events.sort_by_key(|e| e.pulse_index);
    Ok((events, last_arrival))
}

/// Runs the five protocol steps for an honest Alice committing to
/// `committed_bit` and returns the transcript with Bob's verdict.
///
/// The pads stand in for the key-distribution step: both copies are drawn
/// from the run's seed before anything is sent.
pub fn run_honest_protocol(
    cfg: &ProtocolConfig,
    committed_bit: u8,
    seed: u64,
) -> Result<(CommitmentTranscript, VerificationVerdict)> {
    cfg.validate()?;
    if committed_bit > 1 {
        return Err(Error::param("protocol.committed_bit", "must be 0 or 1"));
    }
    let basis = Basis::for_commitment(committed_bit);
    let layout = &cfg.layout;
    let pulses = generate_pulse_train_with(&cfg.source, &mut stream(seed, STREAM_PULSES))?;
    let t0 = cfg.source.start_time;

    let key_len = cfg.key_bits.unwrap_or(pulses.len());
    let mut key_rng = stream(seed, STREAM_KEYS);
    let key_a0 = OneTimePadKey::random(key_len, &mut key_rng);
    let key_a1 = OneTimePadKey::random(key_len, &mut key_rng);
    let mut alice_keys = [key_a0.clone(), key_a1.clone()];
    let mut agent_keys = [key_a0, key_a1];

    let optical_delay = message_delay(layout, PartyId::Bob, PartyId::Alice, 0, cfg.channel_bit_rate, 0.0)?;
    let send = |queue: &mut EventQueue, from: PartyId, to: PartyId, payload: Payload, at: f64| -> Result<()> {
        let delay = message_delay(layout, from, to, payload.wire_bits(), cfg.channel_bit_rate, cfg.processing_delay)?;
        queue.push(TimedMessage {
            sender: from,
            receiver: to,
            payload,
            send_time: at,
            arrival_time: at + delay,
        })
    };

    let mut queue = EventQueue::new();
    for train in 0..cfg.source.n_parallel {
        queue.push(TimedMessage {
            sender: PartyId::Bob,
            receiver: PartyId::Alice,
            payload: Payload::PulseBatch {
                train,
                n_pulses: cfg.source.n_pulses,
            },
            send_time: t0,
            arrival_time: t0 + optical_delay,
        })?;
    }

    let mut batches_in = 0;
    let mut detections = Vec::new();
    let mut t_commit_actual = None;
    let mut messages = Vec::new();
    while let Some(msg) = queue.pop() {
        let now = msg.arrival_time;
        match (msg.receiver, &msg.payload) {
            (PartyId::Alice, Payload::PulseBatch { .. }) => {
                // The basis is fixed when the first light arrives.
                t_commit_actual.get_or_insert(now - t0);
                batches_in += 1;
                if batches_in == cfg.source.n_parallel {
                    let (events, done) = alice_measures(cfg, &pulses, basis, optical_delay, seed)?;
                    let mut bitmap = vec![0u8; pulses.len()];
                    let mut outcomes = Vec::new();
                    for e in events.iter().filter(|e| e.retained) {
                        bitmap[e.pulse_index] = 1;
                        outcomes.push(e.outcome_bit);
                    }
                    let at = done.max(now);
                    send(&mut queue, PartyId::Alice, PartyId::Bob, Payload::DetectionReport { bitmap }, at)?;
                    for (i, agent) in [PartyId::A0, PartyId::A1].into_iter().enumerate() {
                        let bits = otp_encrypt(&outcomes, &mut alice_keys[i])?;
                        send(&mut queue, PartyId::Alice, agent, Payload::EncryptedResults { bits }, at)?;
                    }
                    detections = events;
                }
            }
            (agent @ (PartyId::A0 | PartyId::A1), Payload::EncryptedResults { bits }) => {
                let (i, partner) = if agent == PartyId::A0 {
                    (0, PartyId::B0)
                } else {
                    (1, PartyId::B1)
                };
                let plain = otp_decrypt(bits, &mut agent_keys[i])?;
                send(&mut queue, agent, partner, Payload::RevealedResults { bits: plain }, now + cfg.hold_time)?;
            }
            (PartyId::Bob | PartyId::B0 | PartyId::B1, _) => {}
            (to, payload) => {
                return Err(Error::Invariant(format!("{to} received an unexpected {:?}", payload.kind())));
            }
        }
        messages.push(msg);
    }

    let t_commit_actual = t_commit_actual.ok_or_else(|| Error::Invariant("no pulses reached Alice".into()))?;
    let mut transcript = CommitmentTranscript {
        seed,
        layout: *layout,
        pulses,
        detections,
        committed_bit,
        messages,
        observations: TimingObservations {
            t0,
            t_b0: f64::NAN,
            t_b1: f64::NAN,
        },
        t_unveil: f64::NAN,
        t_commit_actual,
    };
    let timing = measure_timing(&transcript)?;
    transcript.observations = timing.observations;
    transcript.t_unveil = timing.t_unveil;
    let verdict = verify_transcript(&transcript, &cfg.security, cfg.estimation)?;
    Ok((transcript, verdict))
}

impl CommitmentTranscript {
    /// Writes one JSON object per line: a `run` header, then every `pulse`,
    /// `detection` and `message` record. Times are integer nanoseconds.
    pub fn write_jsonl(&self, out: &mut impl Write) -> std::io::Result<()> {
        let ns = to_ns_int;
        let header = json!({
            "record": "run",
            "seed": self.seed,
            "committed_bit": self.committed_bit,
            "n_pulses": self.pulses.len(),
            "t0_ns": ns(self.observations.t0),
            "t_b0_ns": ns(self.observations.t_b0),
            "t_b1_ns": ns(self.observations.t_b1),
            "t_unveil_ns": ns(self.t_unveil),
            "t_commit_actual_ns": ns(self.t_commit_actual),
        });
        writeln!(out, "{header}")?;
        for p in &self.pulses {
            let line = json!({
                "record": "pulse",
                "index": p.index,
                "train": p.train,
                "basis": p.basis,
                "bit": p.bit,
                "photon_number": p.photon_number,
                "emit_ns": ns(p.emit_time),
            });
            writeln!(out, "{line}")?;
        }
        for d in &self.detections {
            let line = json!({
                "record": "detection",
                "pulse_index": d.pulse_index,
                "click_ns": ns(d.click_time),
                "outcome_bit": d.outcome_bit,
                "type": d.raw_click_type,
                "retained": d.retained,
            });
            writeln!(out, "{line}")?;
        }
        for m in &self.messages {
            let line = json!({
                "record": "message",
                "sender": m.sender,
                "receiver": m.receiver,
                "kind": m.payload.kind(),
                "wire_bits": m.payload.wire_bits(),
                "send_ns": ns(m.send_time),
                "arrival_ns": ns(m.arrival_time),
            });
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}
