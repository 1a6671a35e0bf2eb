use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;
use statemock_core::inference::{
    self, annotate_probabilities, build_pta, ktail_merge, merge_by_label,
};
use statemock_core::*;

fn label(i: u8) -> InteractionType {
    let req = if i % 2 == 0 { "A" } else { "B" };
    InteractionType::new(req, format!("r{}", i / 2))
}

fn model_trace(seqs: &[Vec<u8>]) -> ModelTrace {
    ModelTrace::from_labels(
        seqs.iter()
            .enumerate()
            .map(|(n, s)| {
                (
                    KeyPayload(format!("k{n}")),
                    s.iter().map(|&i| label(i)).collect(),
                )
            })
            .collect(),
    )
}

fn traces() -> impl Strategy<Value = Vec<Vec<u8>>> {
    prop::collection::vec(prop::collection::vec(0u8..4, 0..=6), 1..=10)
}

/// Subset-construction walk over raw edges, independent of the model's own matcher.
fn walk(m: &DependencyModel, seq: &[u32]) -> bool {
    let mut at: BTreeSet<usize> = BTreeSet::from([INITIAL]);
    for &l in seq {
        at = at
            .iter()
            .flat_map(|&s| m.out_edges(s).iter().map(|e| e.target))
            .filter(|&t| m.label_index(t) == Some(l))
            .collect();
        if at.is_empty() {
            return false;
        }
    }
    true
}

fn all_sequences(alphabet: u32, max_len: usize) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|p: &Vec<u32>| {
                (0..alphabet).map(move |l| {
                    let mut q = p.clone();
                    q.push(l);
                    q
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pta_has_one_state_per_distinct_prefix(seqs in traces()) {
        let mt = model_trace(&seqs);
        let pta = build_pta(&mt);
        let mut prefixes = BTreeSet::new();
        for (_, s) in &mt.sequences {
            for n in 1..=s.len() {
                prefixes.insert(s[..n].to_vec());
            }
        }
        prop_assert_eq!(pta.state_count(), prefixes.len() + 1);
        prop_assert_eq!(pta.edge_count(), prefixes.len());
        prop_assert!(pta.is_tree());
        let first: u64 = pta.out_edges(INITIAL).iter().map(|e| e.count).sum();
        prop_assert_eq!(first as usize, mt.sequences.iter().filter(|(_, s)| !s.is_empty()).count());
    }

    #[test]
    fn merged_models_accept_training_and_agree_with_walker(seqs in traces(), k in 0i32..=2) {
        let mt = model_trace(&seqs);
        let merged = ktail_merge(&build_pta(&mt), k).unwrap();
        for (_, s) in &mt.sequences {
            prop_assert!(merged.accepts_ids(s));
        }
        for s in all_sequences(mt.alphabet.len() as u32, 4) {
            prop_assert_eq!(merged.accepts_ids(&s), walk(&merged, &s), "{:?}", s);
        }
    }

    #[test]
    fn merging_is_idempotent(seqs in traces(), k in 0i32..=2) {
        let mt = model_trace(&seqs);
        let once = ktail_merge(&build_pta(&mt), k).unwrap();
        let twice = ktail_merge(&once, k).unwrap();
        prop_assert_eq!(once.to_text(), twice.to_text());
    }

    #[test]
    fn label_merge_matches_zero_tail(seqs in traces()) {
        let mt = model_trace(&seqs);
        prop_assert_eq!(merge_by_label(&mt).to_text(), ktail_merge(&build_pta(&mt), 0).unwrap().to_text());
    }

    #[test]
    fn probabilities_sum_to_one_per_request_type(seqs in traces(), k in 0i32..=1) {
        let mt = model_trace(&seqs);
        let m = annotate_probabilities(&ktail_merge(&build_pta(&mt), k).unwrap());
        for s in 0..m.state_count() {
            let mut sums: HashMap<String, f64> = HashMap::new();
            for e in m.out_edges(s) {
                *sums.entry(m.label(e.target).unwrap().request.clone()).or_default() += e.probability.unwrap();
            }
            for (_, total) in sums {
                prop_assert!((total - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn negative_tail_is_rejected() {
    let mt = model_trace(&[vec![0, 1]]);
    assert!(matches!(
        ktail_merge(&build_pta(&mt), -1),
        Err(Error::Argument(_))
    ));
}

#[test]
fn split_models_cover_their_projections() {
    let t = synth::gen_directory_trace(&synth::DirectoryConfig {
        interactions: 2000,
        records: 40,
        seed: 4,
        ..Default::default()
    });
    let b = mine_text(&t, &MiningConfig::with_key_pattern("cn:([^,}]*)")).unwrap();
    let inf = &b.inference;
    for (_, seq) in &inf.model_trace.sequences {
        let labels: Vec<InteractionType> = seq
            .iter()
            .map(|&i| inf.model_trace.alphabet[i as usize].clone())
            .collect();
        assert!(inf.full.accepts(&labels));
        let keyed: Vec<_> = labels
            .iter()
            .filter(|t| inf.keyed_types.contains(&t.request))
            .cloned()
            .collect();
        let unkeyed: Vec<_> = labels
            .iter()
            .filter(|t| !inf.keyed_types.contains(&t.request))
            .cloned()
            .collect();
        assert!(inf.key.accepts(&keyed));
        assert!(inf.nonkey.accepts(&unkeyed));
    }
    // Every state of every model is reachable.
    for m in [&inf.full, &inf.key, &inf.nonkey] {
        assert!(m.reachable().iter().all(|&r| r));
    }
}

#[test]
fn model_text_round_trips() {
    let b = mine_text(
        &synth::example_trace(),
        &MiningConfig::with_key_pattern("cn:([^,}]*)"),
    )
    .unwrap();
    for m in [&b.inference.full, &b.inference.key, &b.inference.nonkey] {
        let back = DependencyModel::parse_text(&m.to_text()).unwrap();
        assert_eq!(back.to_text(), m.to_text());
    }
}

#[test]
fn partitions_are_complete() {
    let t = synth::gen_directory_trace(&synth::DirectoryConfig {
        interactions: 1500,
        records: 25,
        seed: 6,
        ..Default::default()
    });
    let trace =
        InteractionTrace::parse(&t, &TraceOptions::with_key_pattern("cn:([^,}]*)").unwrap())
            .unwrap();
    let parts = inference::partition_trace(&trace);
    let keyed = |i: usize| !trace.key_of(&trace.interactions[i]).is_empty();
    let total_keyed = (0..trace.len()).filter(|&i| keyed(i)).count();
    let in_parts: usize = parts
        .iter()
        .map(|p| p.interactions.iter().filter(|&&i| keyed(i)).count())
        .sum();
    assert_eq!(in_parts, total_keyed);
    for i in (0..trace.len()).filter(|&i| !keyed(i)) {
        assert_eq!(
            parts.iter().filter(|p| p.interactions.contains(&i)).count(),
            parts.len()
        );
    }
}

#[test]
fn distinct_labels_leave_the_tree_alone() {
    let mt = model_trace(&[vec![0, 1], vec![2, 3]]);
    let pta = build_pta(&mt);
    let merged = ktail_merge(&pta, 0).unwrap();
    assert_eq!(merged.fingerprint(), pta.fingerprint());
    assert_eq!(merged.state_count(), pta.state_count());
}

#[test]
fn bank_has_no_unkeyed_operations() {
    let t = synth::gen_bank_trace(&synth::BankConfig {
        interactions: 1500,
        seed: 3,
        ..Default::default()
    });
    let b = mine_text(&t, &MiningConfig::with_key_pattern("acct:([^,}]*)")).unwrap();
    assert_eq!(b.inference.nonkey.state_count(), 1);
    assert_eq!(b.inference.nonkey.edge_count(), 0);
}
