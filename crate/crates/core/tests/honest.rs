mod common;

use common::*;
use relbc_core::protocol::{run_honest_protocol, verify_transcript, PartyId, ProtocolConfig};
use relbc_core::security::EstimationMode;

#[test]
fn miniature_suite_properties() {
    let st = honest_suite(&miniature_config(), 600, 10_000);
    assert_eq!(st.wrong_deductions, 0);
    assert_eq!(st.unsound_bounds, 0);
    assert_eq!(st.misordered, 0);
    assert!(st.accepted > 300, "{}", st.accepted);
    assert!((0.002..=0.025).contains(&st.error_rate()), "{}", st.error_rate());
}

#[test]
fn messages_respect_light_speed() {
    let cfg = miniature_config();
    let (t, _) = run_honest_protocol(&cfg, 1, 5).unwrap();
    assert!(!t.messages.is_empty());
    for m in &t.messages {
        let d = t.layout.distance(m.sender, m.receiver);
        assert!(m.arrival_time - m.send_time >= d / C * (1.0 - 1e-12), "{m:?}");
    }
    let to_bob_agents = t.messages.iter().filter(|m| matches!(m.receiver, PartyId::B0 | PartyId::B1)).count();
    assert_eq!(to_bob_agents, 2);
}

#[test]
fn verification_replays_from_transcript() {
    let cfg = miniature_config();
    for seed in 0..20 {
        let (t, v) = run_honest_protocol(&cfg, (seed % 2) as u8, seed).unwrap();
        let again = verify_transcript(&t, &cfg.security, EstimationMode::WorstCase).unwrap();
        assert_eq!(again, v);
    }
}

#[test]
fn field_parameters_accept_some_runs() {
    let cfg = ProtocolConfig::default();
    let mut accepted = 0;
    for seed in 0..30u64 {
        let bit = (seed % 2) as u8;
        let (_, v) = run_honest_protocol(&cfg, bit, seed).unwrap();
        if v.accepted {
            accepted += 1;
            assert_eq!(v.deduced_bit, Some(bit));
        }
    }
    assert!(accepted >= 1);
}
