use spinchan::protocol::{
    protocol_discord_swap, protocol_known_qubit, protocol_unknown_qubit, protocol_unknown_qubit_with,
    protocol_unknown_qudit, Correction, CorrectionRule, ProtocolId,
};
use spinchan::spin::HalfInteger;
use spinchan::state::BlochVector;
use spinchan::Error;

fn spin(twice: u32) -> HalfInteger {
    HalfInteger::from_twice(twice).unwrap()
}

#[test]
fn sampled_outcome_is_seed_deterministic() {
    let p = BlochVector::new(0.3, -0.4, 0.5).unwrap();
    let a = protocol_unknown_qubit(&p, 0.6, spin(3), 11).unwrap();
    let b = protocol_unknown_qubit(&p, 0.6, spin(3), 11).unwrap();
    assert_eq!(a.outcome, b.outcome);
    assert_eq!(a.to_json(), b.to_json());
    let seen: std::collections::BTreeSet<String> =
        (0..64).map(|seed| protocol_unknown_qubit(&p, 0.6, spin(3), seed).unwrap().outcome).collect();
    assert_eq!(seen.len(), 4);
}

#[test]
fn all_protocols_verify() {
    let p = BlochVector::new(0.0, 0.6, 0.8).unwrap();
    for twice in [1, 2, 5] {
        assert!(protocol_unknown_qubit(&p, 0.4, spin(twice), 1).unwrap().verified());
        assert!(protocol_known_qubit(&[0.0, 0.6, 0.8], 0.4, spin(twice), 1).unwrap().verified());
        assert!(protocol_unknown_qudit(&p, 0.4, spin(twice), 1).unwrap().verified());
        assert!(protocol_discord_swap(0.4, -0.2, spin(twice), 1).unwrap().verified());
    }
}

#[test]
fn wrong_correction_is_flagged() {
    let p = BlochVector::new(0.0, 0.6, 0.8).unwrap();
    let rules = CorrectionRule::unknown_qubit().with("phi-", Correction::IDENTITY);
    let t = protocol_unknown_qubit_with(&p, 0.5, spin(2), 0, &rules).unwrap();
    assert!(!t.verified());
    assert!(!t.branch("phi-").unwrap().passes());
    assert!(t.branch("psi-").unwrap().passes());
}

#[test]
fn transcript_json_has_expected_fields() {
    let t = protocol_discord_swap(0.5, 0.5, spin(2), 4).unwrap();
    let v = t.to_json();
    assert_eq!(v["protocol"], "D");
    assert_eq!(v["spin_twice"], 2);
    assert_eq!(v["branches"].as_array().unwrap().len(), 4);
    assert_eq!(v["output_state"].as_array().unwrap().len(), 81);
    assert_eq!(t.spin(), spin(2));
}

#[test]
fn protocol_id_parsing() {
    for id in [ProtocolId::A, ProtocolId::B, ProtocolId::C, ProtocolId::D] {
        assert_eq!(id.to_string().parse::<ProtocolId>().unwrap(), id);
    }
    assert!(matches!("Q".parse::<ProtocolId>(), Err(Error::InvalidInput(_))));
}

#[test]
fn invalid_channel_parameter_is_rejected() {
    let p = BlochVector::new(0.0, 0.0, 1.0).unwrap();
    assert!(protocol_unknown_qubit(&p, 1.5, spin(2), 0).is_err());
    assert!(protocol_known_qubit(&[0.0, 0.0, 2.0], 0.5, spin(2), 0).is_err());
}
