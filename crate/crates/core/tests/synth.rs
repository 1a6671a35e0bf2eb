use std::collections::BTreeMap;

use statemock_core::synth::*;
use statemock_core::*;

fn fields(msg: &str) -> BTreeMap<String, String> {
    msg.trim_start_matches('{')
        .trim_end_matches('}')
        .split(',')
        .filter_map(|kv| kv.split_once(':'))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// A second directory written from the protocol description alone.
fn reference_directory(trace: &str, seeded: &BTreeMap<String, (String, String)>) {
    let mut db = seeded.clone();
    for line in trace.lines() {
        let (req, resp) = line.split_once('\t').unwrap();
        let f = fields(req);
        let id = &f["id"];
        let cn = f.get("cn").cloned().unwrap_or_default();
        let expect = match f["op"].as_str() {
            "B" => format!("{{id:{id},op:BindRsp,result:Ok}}"),
            "U" => String::new(),
            "A" if db.contains_key(&cn) => format!("{{id:{id},op:AddRsp,result:AlreadyExists}}"),
            "A" => {
                db.insert(cn, (f["sn"].clone(), f["mobile"].clone()));
                format!("{{id:{id},op:AddRsp,result:Ok}}")
            }
            "D" if db.remove(&cn).is_some() => format!("{{id:{id},op:DeleteRsp,result:Ok}}"),
            "D" => format!("{{id:{id},op:DeleteRsp,result:Not Found}}"),
            "S" => match db.get(&cn) {
                Some((sn, m)) => {
                    format!("{{id:{id},op:SearchRsp,result:Ok,cn:{cn},sn:{sn},mobile:{m}}}")
                }
                None => format!("{{id:{id},op:SearchRsp,result:Not Found}}"),
            },
            "M" => match db.get_mut(&cn) {
                Some(e) => {
                    e.1 = f["mobile"].clone();
                    format!("{{id:{id},op:ModifyRsp,result:Ok}}")
                }
                None => format!("{{id:{id},op:ModifyRsp,result:Not Found}}"),
            },
            other => panic!("unexpected op {other}"),
        };
        assert_eq!(resp, expect, "{req}");
    }
}

#[test]
fn directory_trace_replays_against_reference() {
    for seed in 0..4 {
        let t = gen_directory_trace(&DirectoryConfig {
            interactions: 3000,
            records: 60,
            seed,
            ..DirectoryConfig::default()
        });
        assert_eq!(t.lines().count(), 3000);
        reference_directory(&t, &BTreeMap::new());
    }
    reference_directory(&example_trace(), &BTreeMap::new());
}

#[test]
fn full_preexistence_makes_first_delete_succeed() {
    let t = gen_directory_trace(&DirectoryConfig {
        interactions: 4000,
        records: 100,
        clean_start: false,
        preexist_ratio: 1.0,
        seed: 5,
        ..DirectoryConfig::default()
    });
    let mut seen = std::collections::HashSet::new();
    let mut checked = 0;
    for line in t.lines() {
        let (req, resp) = line.split_once('\t').unwrap();
        let f = fields(req);
        let Some(cn) = f.get("cn") else { continue };
        if seen.insert(cn.clone()) && f["op"] == "D" {
            assert!(resp.ends_with("result:Ok}"), "{line}");
            checked += 1;
        }
    }
    assert!(checked > 5);
}

/// A second bank written from the protocol description alone.
#[test]
fn bank_trace_replays_against_reference() {
    let t = gen_bank_trace(&BankConfig {
        interactions: 5000,
        accounts: 80,
        seed: 11,
        ..BankConfig::default()
    });
    // account -> (owner, balance, closed)
    let mut db: BTreeMap<String, (String, u64, bool)> = BTreeMap::new();
    let mut statuses = BTreeMap::<String, usize>::new();
    for line in t.lines() {
        let (req, resp) = line.split_once('\t').unwrap();
        let f = fields(req);
        let (id, acct) = (&f["id"], &f["acct"]);
        let amount: u64 = f.get("amount").map_or(0, |a| a.parse().unwrap());
        let fail = |s: &str| format!("{{id:{id},status:{s},acct:{acct}}}");
        let ok = |extra: &str| format!("{{id:{id},status:Success,acct:{acct}{extra}}}");
        let expect = match (f["op"].as_str(), db.get_mut(acct)) {
            ("createNewAccount", Some(a)) if a.2 => fail("AccountClosed"),
            ("createNewAccount", Some(_)) => fail("AccountExists"),
            ("createNewAccount", None) => {
                db.insert(acct.clone(), (f["owner"].clone(), 0, false));
                ok(",balance:0")
            }
            (_, None) => fail("NoSuchAccount"),
            (_, Some(a)) if a.2 => fail("NoSuchAccount"),
            ("deposit", Some(a)) => {
                a.1 += amount;
                ok(&format!(",balance:{}", a.1))
            }
            ("withdraw", Some(a)) if amount > a.1 => fail("InsufficientFunds"),
            ("withdraw", Some(a)) => {
                a.1 -= amount;
                ok(&format!(",balance:{}", a.1))
            }
            ("getAccount", Some(a)) => ok(&format!(",owner:{},balance:{}", a.0, a.1)),
            ("closeAccount", Some(a)) => {
                a.2 = true;
                ok("")
            }
            (op, _) => panic!("unexpected op {op}"),
        };
        assert_eq!(resp, expect, "{req}");
        *statuses.entry(fields(resp)["status"].clone()).or_default() += 1;
    }
    for s in [
        "Success",
        "InsufficientFunds",
        "NoSuchAccount",
        "AccountExists",
    ] {
        assert!(statuses.contains_key(s), "{statuses:?}");
    }
}

#[test]
fn stateless_traces_have_unique_ids_and_no_key() {
    let t = gen_stateless_trace(&StatelessConfig {
        kind: "search-api".parse().unwrap(),
        interactions: 500,
        seed: 3,
    });
    assert_eq!(t.lines().count(), 500);
    let trace = InteractionTrace::parse(&t, &TraceOptions::default()).unwrap();
    assert!(trace.interactions.iter().all(|i| i.response.is_some()));
    let ids: std::collections::HashSet<&str> = trace
        .interactions
        .iter()
        .map(|i| i.request.get("id").unwrap())
        .collect();
    assert_eq!(ids.len(), 500);
}

#[test]
fn oblivious_client_initial_delete_split_tracks_preexistence() {
    let t = gen_directory_trace(&DirectoryConfig {
        interactions: 40_000,
        records: 5000,
        clean_start: false,
        preexist_ratio: 0.3,
        awareness: 0.0,
        seed: 21,
        ..DirectoryConfig::default()
    });
    let b = mine_text(&t, &MiningConfig::with_key_pattern("cn:([^,}]*)")).unwrap();
    let key = &b.inference.key;
    let p = |label: &str| {
        key.out_edges(INITIAL)
            .iter()
            .find(|e| key.label(e.target).unwrap().label() == label)
            .and_then(|e| e.probability)
            .unwrap()
    };
    let ok = p("D_DeleteRsp(Ok)");
    let nf = p("D_DeleteRsp(NotFound)");
    assert!((ok + nf - 1.0).abs() < 1e-9);
    assert!((ok - 0.3).abs() <= 0.05, "ok {ok}");
    assert!((nf - 0.7).abs() <= 0.05, "not found {nf}");
}
