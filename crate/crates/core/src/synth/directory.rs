//! A small directory service (bind, add, delete, search, modify, unbind) and its trace generator.

use std::collections::HashMap;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::{record_name, render, Recorder, SURNAMES};
use crate::message::{Message, Syntax};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub sn: String,
    pub mobile: String,
}

#[derive(Debug, Clone, Default)]
pub struct DirectoryService {
    pub entries: HashMap<String, Entry>,
}

fn reply(id: &str, op: &str, result: &str) -> String {
    render(&[("id", id), ("op", op), ("result", result)])
}

impl DirectoryService {
    pub fn new() -> Self {
        Self::default()
    }

    /// Answers one request; `None` for unbind, which has no response.
    pub fn handle(&mut self, request: &Message) -> Option<String> {
        let id = request.get("id").unwrap_or_default();
        let cn = request.get("cn").unwrap_or_default();
        let op = request.get("op").unwrap_or_default();
        let out = match op {
            "B" => reply(id, "BindRsp", "Ok"),
            "U" => return None,
            "A" => {
                if self.entries.contains_key(cn) {
                    reply(id, "AddRsp", "AlreadyExists")
                } else {
                    let entry = Entry {
                        sn: request.get("sn").unwrap_or_default().to_string(),
                        mobile: request.get("mobile").unwrap_or_default().to_string(),
                    };
                    self.entries.insert(cn.to_string(), entry);
                    reply(id, "AddRsp", "Ok")
                }
            }
            "D" => match self.entries.remove(cn) {
                Some(_) => reply(id, "DeleteRsp", "Ok"),
                None => reply(id, "DeleteRsp", "Not Found"),
            },
            "S" => match self.entries.get(cn) {
                Some(e) => render(&[
                    ("id", id),
                    ("op", "SearchRsp"),
                    ("result", "Ok"),
                    ("cn", cn),
                    ("sn", &e.sn),
                    ("mobile", &e.mobile),
                ]),
                None => reply(id, "SearchRsp", "Not Found"),
            },
            "M" => match self.entries.get_mut(cn) {
                Some(e) => {
                    e.mobile = request.get("mobile").unwrap_or_default().to_string();
                    reply(id, "ModifyRsp", "Ok")
                }
                None => reply(id, "ModifyRsp", "Not Found"),
            },
            _ => reply(id, "ErrorRsp", "Unsupported"),
        };
        Some(out)
    }
}

#[derive(Debug, Clone)]
pub struct DirectoryConfig {
    pub interactions: usize,
    pub records: usize,
    pub clean_start: bool,
    /// Chance that each record exists before recording starts (ignored on a clean start).
    pub preexist_ratio: f64,
    pub seed: u64,
    /// Chance that the client knows whether a pre-existing record is there before touching it.
    pub awareness: f64,
    /// Record operations per bind/unbind session, inclusive range.
    pub session_ops: (usize, usize),
    /// Operation weights (search, modify, delete, add) when the client believes the record exists.
    pub mix_present: [f64; 4],
    pub mix_absent: [f64; 4],
    pub mix_unknown: [f64; 4],
    /// Touches per record that follow the client's belief; later ones use `mix_unknown`.
    pub informed_ops: Option<usize>,
}

impl Default for DirectoryConfig {
    fn default() -> Self {
        DirectoryConfig {
            interactions: 1000,
            records: 50,
            clean_start: true,
            preexist_ratio: 0.0,
            seed: 0,
            awareness: 0.0,
            session_ops: (1, 8),
            mix_present: MIX_PRESENT,
            mix_absent: MIX_ABSENT,
            mix_unknown: MIX_UNKNOWN,
            informed_ops: None,
        }
    }
}

const OPS: [&str; 4] = ["S", "M", "D", "A"];
/// Operation mix when the client believes the record exists.
pub const MIX_PRESENT: [f64; 4] = [0.20, 0.40, 0.25, 0.15];
/// Operation mix when the client believes the record is absent.
pub const MIX_ABSENT: [f64; 4] = [0.20, 0.10, 0.10, 0.60];
/// Operation mix when the client does not know.
pub const MIX_UNKNOWN: [f64; 4] = [0.25, 0.25, 0.25, 0.25];

fn mobile(rng: &mut ChaCha8Rng) -> String {
    rng.gen_range(20_000_000u32..50_000_000).to_string()
}

/// Drives a [`DirectoryService`] with a belief-aware scripted client and records the exchange.
pub fn gen_directory_trace(config: &DirectoryConfig) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let syntax = Syntax::default();
    let mut service = DirectoryService::new();
    let names: Vec<String> = (0..config.records.max(1)).map(record_name).collect();
    // Client belief per record: Some(exists) or None when unknown.
    let mut belief: Vec<Option<bool>> = vec![Some(false); names.len()];
    if !config.clean_start {
        for (i, n) in names.iter().enumerate() {
            let exists = rng.gen_bool(config.preexist_ratio.clamp(0.0, 1.0));
            if exists {
                let sn = SURNAMES.choose(&mut rng).expect("non-empty").to_string();
                service.entries.insert(
                    n.clone(),
                    Entry {
                        sn,
                        mobile: mobile(&mut rng),
                    },
                );
            }
            belief[i] = rng
                .gen_bool(config.awareness.clamp(0.0, 1.0))
                .then_some(exists);
        }
    }
    let present = WeightedIndex::new(config.mix_present).expect("valid weights");
    let absent = WeightedIndex::new(config.mix_absent).expect("valid weights");
    let unknown = WeightedIndex::new(config.mix_unknown).expect("valid weights");
    let mut touches = vec![0usize; names.len()];

    let mut rec = Recorder::default();
    let mut next_id = 1u64;
    let mut exchange =
        |rec: &mut Recorder, service: &mut DirectoryService, fields: Vec<(&str, String)>| {
            let id = next_id.to_string();
            next_id += 1;
            let mut all: Vec<(&str, &str)> = vec![("id", id.as_str())];
            all.extend(fields.iter().map(|(n, v)| (*n, v.as_str())));
            let req = Message::from_fields(all, &syntax);
            let resp = service.handle(&req);
            rec.push(req.raw(), resp.as_deref());
            resp
        };
    let (lo, hi) = config.session_ops;
    while rec.count < config.interactions {
        exchange(
            &mut rec,
            &mut service,
            vec![("op", "B".into()), ("user", "admin".into())],
        );
        let ops = rng.gen_range(lo.min(hi)..=hi.max(lo));
        for _ in 0..ops {
            if rec.count + 1 >= config.interactions {
                break;
            }
            let r = rng.gen_range(0..names.len());
            let cn = names[r].clone();
            let informed = config.informed_ops.map_or(true, |k| touches[r] < k);
            touches[r] += 1;
            let op = OPS[match belief[r].filter(|_| informed) {
                Some(true) => present.sample(&mut rng),
                Some(false) => absent.sample(&mut rng),
                None => unknown.sample(&mut rng),
            }];
            let fields = match op {
                "A" => vec![
                    ("op", "A".to_string()),
                    ("cn", cn),
                    (
                        "sn",
                        SURNAMES.choose(&mut rng).expect("non-empty").to_string(),
                    ),
                    ("mobile", mobile(&mut rng)),
                ],
                "M" => vec![
                    ("op", "M".to_string()),
                    ("cn", cn),
                    ("mobile", mobile(&mut rng)),
                ],
                other => vec![("op", other.to_string()), ("cn", cn)],
            };
            let resp = exchange(&mut rec, &mut service, fields).unwrap_or_default();
            // Every response reveals whether the record exists afterwards.
            let exists = match op {
                "D" => false,
                "A" => true,
                _ => resp.contains("result:Ok"),
            };
            belief[r] = Some(exists);
        }
        if rec.count < config.interactions {
            exchange(&mut rec, &mut service, vec![("op", "U".into())]);
        }
    }
    rec.finish()
}

/// The sixteen-interaction example scenario, replayed against a clean directory.
pub fn example_trace() -> String {
    const SCRIPT: &[&str] = &[
        "{id:1,op:B,user:admin}",
        "{id:2,op:D,cn:Judith}",
        "{id:15,op:A,cn:Judith,sn:BROWN,mobile:41234567}",
        "{id:23,op:S,cn:Gavin}",
        "{id:55,op:D,cn:Judith}",
        "{id:62,op:A,cn:Linden,sn:SMITH,mobile:40117788}",
        "{id:90,op:D,cn:Gavin}",
        "{id:96,op:U}",
        "{id:105,op:B,user:admin}",
        "{id:112,op:A,cn:Gavin,sn:MAJOR,mobile:26952135}",
        "{id:130,op:S,cn:Gavin}",
        "{id:135,op:S,cn:Katy}",
        "{id:144,op:S,cn:Judith}",
        "{id:180,op:A,cn:Linden,sn:SMITH,mobile:40117788}",
        "{id:251,op:S,cn:Linden}",
        "{id:300,op:U}",
    ];
    let syntax = Syntax::default();
    let mut service = DirectoryService::new();
    let mut rec = Recorder::default();
    for raw in SCRIPT {
        let req = Message::parse(raw, &syntax).expect("script is well formed");
        let resp = service.handle(&req);
        rec.push(raw, resp.as_deref());
    }
    rec.finish()
}
