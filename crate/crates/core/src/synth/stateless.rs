//! A read-only search API with timestamped, frequently changing payloads.

use std::str::FromStr;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::{render, Recorder, NAMES, SURNAMES};
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatelessKind {
    SearchApi,
}

impl FromStr for StatelessKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "search-api" => Ok(StatelessKind::SearchApi),
            other => Err(Error::Argument(format!("unknown stateless kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StatelessConfig {
    pub kind: StatelessKind,
    pub interactions: usize,
    pub seed: u64,
}

impl Default for StatelessConfig {
    fn default() -> Self {
        StatelessConfig {
            kind: StatelessKind::SearchApi,
            interactions: 1000,
            seed: 0,
        }
    }
}

const TERMS: &[&str] = &[
    "rust", "automata", "mocking", "ldap", "soap", "twitter", "books", "service", "trace", "model",
    "kafka", "grpc",
];

/// Outcome of a lookup depends only on its argument.
fn bucket(s: &str, n: u64) -> u64 {
    s.bytes()
        .fold(7u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64))
        % n
}

pub fn gen_stateless_trace(config: &StatelessConfig) -> String {
    let StatelessKind::SearchApi = config.kind;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rec = Recorder::default();
    let mut ts: u64 = 1_600_000_000_000;
    for n in 0..config.interactions {
        let id = (n + 1).to_string();
        ts += rng.gen_range(1..5000);
        let t = ts.to_string();
        let (req, resp) = match rng.gen_range(0..3) {
            0 => {
                let q = format!(
                    "{}{}",
                    TERMS.choose(&mut rng).expect("non-empty"),
                    rng.gen_range(0..40)
                );
                let req = render(&[("id", &id), ("op", "search"), ("q", &q)]);
                let resp = if bucket(&q, 5) == 0 {
                    render(&[
                        ("id", &id),
                        ("status", "404"),
                        ("ts", &t),
                        ("error", "no results"),
                    ])
                } else {
                    let total = (bucket(&q, 997) + 1).to_string();
                    let top = format!("VOL{:06}", rng.gen_range(0..1_000_000));
                    render(&[
                        ("id", &id),
                        ("status", "200"),
                        ("ts", &t),
                        ("q", &q),
                        ("total", &total),
                        ("top", &top),
                    ])
                };
                (req, resp)
            }
            1 => {
                let vid = format!("VOL{:06}", rng.gen_range(0..2000) * 499);
                let req = render(&[("id", &id), ("op", "volume"), ("vid", &vid)]);
                let resp = if bucket(&vid, 4) == 0 {
                    render(&[
                        ("id", &id),
                        ("status", "404"),
                        ("ts", &t),
                        ("error", "unknown volume"),
                    ])
                } else {
                    let title = format!(
                        "{} and {}",
                        NAMES[bucket(&vid, NAMES.len() as u64) as usize],
                        SURNAMES[bucket(&vid, SURNAMES.len() as u64) as usize]
                    );
                    let pages = (bucket(&vid, 900) + 40).to_string();
                    render(&[
                        ("id", &id),
                        ("status", "200"),
                        ("ts", &t),
                        ("vid", &vid),
                        ("title", &title),
                        ("pages", &pages),
                    ])
                };
                (req, resp)
            }
            _ => {
                let uid = format!("u{}", rng.gen_range(0..300));
                let shelf = rng.gen_range(0..4).to_string();
                let req = render(&[
                    ("id", &id),
                    ("op", "shelf"),
                    ("uid", &uid),
                    ("shelf", &shelf),
                ]);
                let key = format!("{uid}/{shelf}");
                let resp = if bucket(&key, 3) == 0 {
                    render(&[("id", &id), ("status", "204"), ("ts", &t)])
                } else {
                    let count = (bucket(&key, 50) + 1).to_string();
                    render(&[
                        ("id", &id),
                        ("status", "200"),
                        ("ts", &t),
                        ("uid", &uid),
                        ("count", &count),
                    ])
                };
                (req, resp)
            }
        };
        rec.push(&req, Some(&resp));
    }
    rec.finish()
}
