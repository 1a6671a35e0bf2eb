use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;
use statemock_core::eval::baseline::{nw_align, nw_score, tokenize, Scoring, WholeCluster};
use statemock_core::eval::classify::{classify, default_critical_fields, AccuracyClass};
use statemock_core::eval::folds::kfold_by_key_payload;
use statemock_core::eval::{run_evaluation, Approach, EvalConfig};
use statemock_core::synth::*;
use statemock_core::*;

const KEY: &str = "cn:([^,}]*)";

fn parse(text: &str, pattern: Option<&str>) -> InteractionTrace {
    let opts = match pattern {
        Some(p) => TraceOptions::with_key_pattern(p).unwrap(),
        None => TraceOptions::default(),
    };
    InteractionTrace::parse(text, &opts).unwrap()
}

#[test]
fn folds_keep_records_together_and_cover_every_keyed_interaction() {
    let trace = parse(
        &gen_directory_trace(&DirectoryConfig {
            interactions: 2000,
            records: 37,
            seed: 8,
            ..Default::default()
        }),
        Some(KEY),
    );
    let k = 5;
    let folds = kfold_by_key_payload(&trace, k, 3).unwrap();
    assert_eq!(folds.len(), k);
    let mut tested = vec![0usize; trace.len()];
    let mut records_per_fold = Vec::new();
    for f in &folds {
        let train: BTreeSet<usize> = f.train.iter().copied().collect();
        assert!(f.test.iter().all(|i| !train.contains(i)));
        assert_eq!(f.train.len() + f.test.len(), trace.len());
        let recs: BTreeSet<String> = f
            .test
            .iter()
            .map(|&i| trace.key_of(&trace.interactions[i]).0)
            .collect();
        for &i in &f.test {
            tested[i] += 1;
        }
        // No record straddles train and test.
        for &i in &f.train {
            assert!(!recs.contains(&trace.key_of(&trace.interactions[i]).0));
        }
        records_per_fold.push(recs.len());
    }
    for (i, it) in trace.interactions.iter().enumerate() {
        let keyed = !trace.key_of(it).is_empty();
        assert_eq!(tested[i], usize::from(keyed), "interaction {i}");
    }
    let distinct: BTreeSet<String> = trace
        .interactions
        .iter()
        .map(|i| trace.key_of(i).0)
        .filter(|k| !k.is_empty())
        .collect();
    assert_eq!(records_per_fold.iter().sum::<usize>(), distinct.len());
    let (lo, hi) = (
        records_per_fold.iter().min().unwrap(),
        records_per_fold.iter().max().unwrap(),
    );
    assert!(hi - lo <= 1);
    assert_eq!(folds, kfold_by_key_payload(&trace, k, 3).unwrap());
}

#[test]
fn stateless_folds_split_single_interactions() {
    let trace = parse(
        &gen_stateless_trace(&StatelessConfig {
            kind: "search-api".parse().unwrap(),
            interactions: 103,
            seed: 1,
        }),
        None,
    );
    let folds = kfold_by_key_payload(&trace, 10, 0).unwrap();
    let sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
    assert_eq!(sizes.iter().sum::<usize>(), 103);
    assert!(sizes.iter().all(|&s| s == 10 || s == 11));
}

#[test]
fn fold_arguments_are_checked() {
    let trace = parse(&example_trace(), Some(KEY));
    assert!(kfold_by_key_payload(&trace, 1, 0).is_err());
    // Four records cannot fill five folds.
    assert!(kfold_by_key_payload(&trace, 5, 0).is_err());
    assert!(kfold_by_key_payload(&trace, 4, 0).is_ok());
}

#[test]
fn classifier_examples() {
    let b = mine_text(&example_trace(), &MiningConfig::with_key_pattern(KEY)).unwrap();
    let a = &b.analysis;
    let critical = default_critical_fields(&b.trace);
    assert_eq!(critical, ["id", "cn"]);
    let syn = Syntax::default();
    let exp = Message::parse(
        "{id:130,op:SearchRsp,result:Ok,cn:Gavin,sn:MAJOR,mobile:26952135}",
        &syn,
    )
    .unwrap();
    let t = InteractionType::new("S", "SearchRsp(Ok)");
    let c = |g: Option<&str>| classify(g, Some(&exp), &t, a, &critical);
    assert_eq!(c(Some(exp.raw())), AccuracyClass::Identical);
    assert_eq!(
        c(Some(
            "{id:130,op:SearchRsp,result:Ok,cn:Gavin,sn:SMITH,mobile:40117788}"
        )),
        AccuracyClass::DataConsistent
    );
    assert_eq!(
        c(Some(
            "{id:131,op:SearchRsp,result:Ok,cn:Gavin,sn:MAJOR,mobile:26952135}"
        )),
        AccuracyClass::ProtocolExact
    );
    assert_eq!(
        c(Some("{id:130,op:SearchRsp,result:Not Found}")),
        AccuracyClass::ProtocolPlausible
    );
    assert_eq!(
        c(Some("{id:130,op:AddRsp,result:Ok}")),
        AccuracyClass::WellFormed
    );
    assert_eq!(
        c(Some("{id:130,op:SearchRsp,result:Maybe}")),
        AccuracyClass::Malformed
    );
    assert_eq!(c(Some("garbage")), AccuracyClass::Malformed);
    // Silence is a valid message in this protocol, just not for searches.
    assert_eq!(c(None), AccuracyClass::WellFormed);
    let u = InteractionType::null("U");
    assert_eq!(
        classify(None, None, &u, a, &critical),
        AccuracyClass::Identical
    );
    assert_eq!(
        classify(Some("{id:1,op:BindRsp,result:Ok}"), None, &u, a, &critical),
        AccuracyClass::WellFormed
    );
}

/// Best score over every alignment, by exhaustive recursion.
fn brute_score(a: &[u8], b: &[u8], s: &Scoring) -> i32 {
    match (a.split_first(), b.split_first()) {
        (None, None) => 0,
        (Some(_), None) => a.len() as i32 * s.gap,
        (None, Some(_)) => b.len() as i32 * s.gap,
        (Some((x, ra)), Some((y, rb))) => {
            let pair = if x == y { s.matched } else { s.mismatch };
            (pair + brute_score(ra, rb, s))
                .max(s.gap + brute_score(ra, b, s))
                .max(s.gap + brute_score(a, rb, s))
        }
    }
}

/// Same recursion, memoised on suffix lengths so whole requests stay tractable.
fn memo_score(a: &[u8], b: &[u8], s: &Scoring, memo: &mut HashMap<(usize, usize), i32>) -> i32 {
    if let Some(&v) = memo.get(&(a.len(), b.len())) {
        return v;
    }
    let v = match (a.split_first(), b.split_first()) {
        (None, _) => b.len() as i32 * s.gap,
        (_, None) => a.len() as i32 * s.gap,
        (Some((x, ra)), Some((y, rb))) => {
            let pair = if x == y { s.matched } else { s.mismatch };
            (pair + memo_score(ra, rb, s, memo))
                .max(s.gap + memo_score(ra, b, s, memo))
                .max(s.gap + memo_score(a, rb, s, memo))
        }
    };
    memo.insert((a.len(), b.len()), v);
    v
}

proptest! {
    #[test]
    fn alignment_matches_exhaustive_search(
        a in prop::collection::vec(0u8..3, 0..7),
        b in prop::collection::vec(0u8..3, 0..7),
    ) {
        let s = Scoring::default();
        let best = brute_score(&a, &b, &s);
        prop_assert_eq!(nw_score(&a, &b, &s), best);
        prop_assert_eq!(memo_score(&a, &b, &s, &mut HashMap::new()), best);
        let (score, pairs) = nw_align(&a, &b, &s);
        prop_assert_eq!(score, best);
        // The returned pairs realise the score.
        let paired: i32 = pairs.iter().map(|&(i, j)| if a[i] == b[j] { s.matched } else { s.mismatch }).sum();
        let gaps = (a.len() - pairs.len()) + (b.len() - pairs.len());
        prop_assert_eq!(paired + gaps as i32 * s.gap, best);
        prop_assert!(pairs.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
    }
}

#[test]
fn baseline_picks_earliest_best_request() {
    let trace = parse(&example_trace(), Some(KEY));
    let wc = WholeCluster::new(&trace, Scoring::default());
    let q = "{id:99,op:D,cn:Judith}";
    let syn = Syntax::default();
    let qt: Vec<&str> = tokenize(q, &syn);
    let mut vocab: HashMap<String, u8> = HashMap::new();
    let mut id = |t: &str| {
        let n = vocab.len() as u8;
        *vocab.entry(t.to_string()).or_insert(n)
    };
    let qi: Vec<u8> = qt.iter().map(|t| id(t)).collect();
    let scores: Vec<i32> = trace
        .interactions
        .iter()
        .map(|it| {
            let ri: Vec<u8> = tokenize(it.request.raw(), &syn)
                .iter()
                .map(|t| id(t))
                .collect();
            memo_score(&qi, &ri, &Scoring::default(), &mut HashMap::new())
        })
        .collect();
    let best = *scores.iter().max().unwrap();
    let first = scores.iter().position(|&s| s == best).unwrap();
    // Lines 2 and 5 both differ from the query only in the id.
    assert_eq!(scores.iter().filter(|&&s| s == best).count(), 2);
    assert_eq!(best, 11);
    let r = wc.respond(q).unwrap();
    assert_eq!(r.matched_seq, trace.interactions[first].seq);
    assert_eq!(r.score, best);
    assert_eq!(
        r.text.as_deref(),
        Some("{id:99,op:DeleteRsp,result:Not Found}")
    );
}

#[test]
fn approach_lists_parse() {
    assert_eq!(
        Approach::parse_list("det,prob,rand,wc").unwrap(),
        [
            Approach::DET,
            Approach::PROB,
            Approach::RAND,
            Approach::WholeCluster
        ]
    );
    assert!(Approach::parse_list("det,xyz").is_err());
}

#[test]
fn reports_are_reproducible() {
    let trace = parse(
        &gen_directory_trace(&DirectoryConfig {
            interactions: 1200,
            records: 40,
            seed: 3,
            ..Default::default()
        }),
        Some(KEY),
    );
    let cfg = EvalConfig {
        folds: 4,
        seed: 5,
        approaches: Approach::parse_list("det,prob,rand,wc").unwrap(),
        mining: MiningConfig::with_key_pattern(KEY),
        ..EvalConfig::default()
    };
    let a = run_evaluation(&trace, &cfg).unwrap();
    let b = run_evaluation(&trace, &cfg).unwrap();
    assert_eq!(a.report_tsv(), b.report_tsv());
    assert_eq!(a.by_type_tsv(), b.by_type_tsv());
    assert_eq!(a.summary(), b.summary());
    let keyed = trace
        .interactions
        .iter()
        .filter(|i| !trace.key_of(i).is_empty())
        .count() as u64;
    assert_eq!(a.total_tests(), keyed);
    for ap in &cfg.approaches {
        let total: f64 = AccuracyClass::ALL.iter().map(|&c| a.rate(*ap, c)).sum();
        assert!((total - 1.0).abs() < 1e-9 || (total - 100.0).abs() < 1e-6);
    }
    let dir = tempfile::tempdir().unwrap();
    a.write_dir(dir.path()).unwrap();
    for f in ["report.tsv", "by_type.tsv", "summary.txt", "efficiency.tsv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}
