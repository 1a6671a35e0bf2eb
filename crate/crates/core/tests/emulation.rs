use std::collections::BTreeSet;

use statemock_core::synth::{example_trace, gen_directory_trace, DirectoryConfig};
use statemock_core::*;

fn example() -> ModelBundle {
    mine_text(
        &example_trace(),
        &MiningConfig::with_key_pattern("cn:([^,}]*)"),
    )
    .unwrap()
}

fn seq_of(b: &ModelBundle, id: &str) -> usize {
    b.trace
        .interactions
        .iter()
        .find(|i| i.request.get("id") == Some(id))
        .unwrap()
        .seq
}

#[test]
fn search_payload_mixes_request_and_sampled_values() {
    let b = example();
    let em = b.emulator();
    let req = em.parse_request("{id:345,op:S,cn:Craig}").unwrap();
    let ok = InteractionType::new("S", "SearchRsp(Ok)");
    let (s130, s251) = (seq_of(&b, "130"), seq_of(&b, "251"));
    let mut seen = BTreeSet::new();
    for seed in 0..32 {
        let mut session = SessionState::new(Mode::ProbabilisticWeighted, seed);
        let g = em
            .populate_payload(&req, Some(ok.clone()), &mut session)
            .unwrap();
        assert!(g.from_model);
        assert_eq!(g.provenance[0], Provenance::FromRequest { rule: (1, 1) });
        assert_eq!(g.provenance[1], Provenance::FromRequest { rule: (2, 2) });
        let text = g.text.unwrap();
        match &g.provenance[2] {
            Provenance::FromSampledInteraction { seq } if *seq == s130 => {
                assert_eq!(
                    text,
                    "{id:345,op:SearchRsp,result:Ok,cn:Craig,sn:MAJOR,mobile:26952135}"
                )
            }
            Provenance::FromSampledInteraction { seq } if *seq == s251 => {
                assert_eq!(
                    text,
                    "{id:345,op:SearchRsp,result:Ok,cn:Craig,sn:SMITH,mobile:40117788}"
                )
            }
            other => panic!("unexpected provenance {other:?}"),
        }
        assert_eq!(g.provenance[3], g.provenance[2]);
        seen.insert(text);
    }
    assert_eq!(seen.len(), 2, "both training members get sampled");
}

#[test]
fn null_type_yields_no_text() {
    let b = example();
    let em = b.emulator();
    let mut s = SessionState::new(Mode::Deterministic, 0);
    let g = em.generate_text("{id:7,op:B,user:admin}", &mut s).unwrap();
    assert_eq!(g.text.as_deref(), Some("{id:7,op:BindRsp,result:Ok}"));
    let g = em.generate_text("{id:8,op:U}", &mut s).unwrap();
    assert_eq!(g.text, None);
    assert!(g.interaction_type.is_null());
}

#[test]
fn records_advance_independently() {
    let b = example();
    let em = b.emulator();
    let mut s = SessionState::new(Mode::Deterministic, 0);
    let say =
        |s: &mut SessionState, r: &str| em.generate_text(r, s).unwrap().interaction_type.label();
    assert_eq!(
        say(&mut s, "{id:1,op:A,cn:Zed,sn:X,mobile:1}"),
        "A_AddRsp(Ok)"
    );
    // A fresh record is unaffected by Zed's state.
    assert_eq!(say(&mut s, "{id:2,op:S,cn:Yan}"), "S_SearchRsp(NotFound)");
    assert_eq!(say(&mut s, "{id:3,op:S,cn:Zed}"), "S_SearchRsp(Ok)");
    assert_eq!(s.current.len(), 2);
    reset_session(&mut s);
    assert!(s.current.is_empty());
    assert_eq!(s.nonkey, INITIAL);
    assert_eq!(say(&mut s, "{id:4,op:S,cn:Zed}"), "S_SearchRsp(NotFound)");
}

#[test]
fn missing_edge_falls_back_to_a_type_of_the_request() {
    let b = example();
    let em = b.emulator();
    let mut s = SessionState::new(Mode::Deterministic, 0);
    em.generate_text("{id:1,op:S,cn:Gavin}", &mut s).unwrap();
    em.generate_text("{id:2,op:D,cn:Gavin}", &mut s).unwrap();
    em.generate_text("{id:3,op:A,cn:Gavin,sn:X,mobile:1}", &mut s)
        .unwrap();
    em.generate_text("{id:4,op:S,cn:Gavin}", &mut s).unwrap();
    // Nothing was recorded after a successful search.
    let g = em.generate_text("{id:5,op:D,cn:Gavin}", &mut s).unwrap();
    assert!(!g.from_model);
    assert_eq!(g.interaction_type.request, "D");
}

#[test]
fn unknown_request_type_is_an_error() {
    let b = example();
    let em = b.emulator();
    let mut s = SessionState::new(Mode::Deterministic, 0);
    assert!(em.generate_text("{id:1,op:Q,cn:Gavin}", &mut s).is_err());
    assert!(em.generate_text("not a message", &mut s).is_err());
}

#[test]
fn seeded_sessions_are_reproducible() {
    let t = gen_directory_trace(&DirectoryConfig {
        interactions: 1500,
        records: 30,
        seed: 2,
        ..Default::default()
    });
    let b = mine_text(&t, &MiningConfig::with_key_pattern("cn:([^,}]*)")).unwrap();
    let em = b.emulator();
    for mode in [Mode::ProbabilisticWeighted, Mode::ProbabilisticRandom] {
        let run = |s: &mut SessionState| -> Vec<Option<String>> {
            b.trace
                .interactions
                .iter()
                .map(|i| em.generate_response(&i.request, s).unwrap().text)
                .collect()
        };
        let mut a = SessionState::new(mode, 99);
        let first = run(&mut a);
        reset_session(&mut a);
        assert_eq!(run(&mut a), first);
        assert_eq!(run(&mut SessionState::new(mode, 99)), first);
        assert_ne!(run(&mut SessionState::new(mode, 100)), first);
    }
}

#[test]
fn mode_names_parse() {
    for (s, m) in [
        ("det", Mode::Deterministic),
        ("prob", Mode::ProbabilisticWeighted),
        ("rand", Mode::ProbabilisticRandom),
    ] {
        assert_eq!(s.parse::<Mode>().unwrap(), m);
        assert_eq!(m.to_string(), s);
    }
    assert!("fast".parse::<Mode>().is_err());
}
