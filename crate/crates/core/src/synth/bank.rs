//! A bank account service whose withdraw outcome depends on the balance, and its trace generator.

use std::collections::HashMap;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::{render, Recorder, NAMES};
use crate::message::{Message, Syntax};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Account {
    pub owner: String,
    pub balance: u64,
    pub closed: bool,
}

#[derive(Debug, Clone, Default)]
pub struct BankService {
    pub accounts: HashMap<String, Account>,
}

/// Failures carry their reason as the status code.
fn fail(id: &str, acct: &str, status: &str) -> String {
    render(&[("id", id), ("status", status), ("acct", acct)])
}

impl BankService {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn handle(&mut self, request: &Message) -> Option<String> {
        let id = request.get("id").unwrap_or_default();
        let acct = request.get("acct").unwrap_or_default();
        let amount: u64 = request
            .get("amount")
            .and_then(|a| a.parse().ok())
            .unwrap_or(0);
        let op = request.get("op").unwrap_or_default();
        if op == "createNewAccount" {
            return Some(match self.accounts.get(acct) {
                Some(a) if a.closed => fail(id, acct, "AccountClosed"),
                Some(_) => fail(id, acct, "AccountExists"),
                None => {
                    let owner = request.get("owner").unwrap_or_default().to_string();
                    self.accounts.insert(
                        acct.to_string(),
                        Account {
                            owner,
                            balance: 0,
                            closed: false,
                        },
                    );
                    render(&[
                        ("id", id),
                        ("status", "Success"),
                        ("acct", acct),
                        ("balance", "0"),
                    ])
                }
            });
        }
        let Some(a) = self.accounts.get_mut(acct).filter(|a| !a.closed) else {
            return Some(fail(id, acct, "NoSuchAccount"));
        };
        let out = match op {
            "deposit" => {
                a.balance += amount;
                render(&[
                    ("id", id),
                    ("status", "Success"),
                    ("acct", acct),
                    ("balance", &a.balance.to_string()),
                ])
            }
            "withdraw" => {
                if amount > a.balance {
                    fail(id, acct, "InsufficientFunds")
                } else {
                    a.balance -= amount;
                    render(&[
                        ("id", id),
                        ("status", "Success"),
                        ("acct", acct),
                        ("balance", &a.balance.to_string()),
                    ])
                }
            }
            "getAccount" => render(&[
                ("id", id),
                ("status", "Success"),
                ("acct", acct),
                ("owner", &a.owner),
                ("balance", &a.balance.to_string()),
            ]),
            "closeAccount" => {
                a.closed = true;
                render(&[("id", id), ("status", "Success"), ("acct", acct)])
            }
            _ => fail(id, acct, "Unsupported"),
        };
        Some(out)
    }
}

#[derive(Debug, Clone)]
pub struct BankConfig {
    pub interactions: usize,
    pub accounts: usize,
    pub clean_start: bool,
    pub preexist_ratio: f64,
    pub seed: u64,
    /// Share of withdraws the client deliberately sizes above the balance.
    pub withdraw_fail_rate: f64,
}

impl Default for BankConfig {
    fn default() -> Self {
        BankConfig {
            interactions: 1000,
            accounts: 50,
            clean_start: true,
            preexist_ratio: 0.0,
            seed: 0,
            withdraw_fail_rate: 0.2,
        }
    }
}

pub fn account_number(i: usize) -> String {
    format!("{}", 10_000_000 + i)
}

const OPS: [&str; 5] = [
    "createNewAccount",
    "deposit",
    "withdraw",
    "getAccount",
    "closeAccount",
];
const MIX_ABSENT: [f64; 5] = [0.85, 0.05, 0.05, 0.05, 0.0];
const MIX_OPEN: [f64; 5] = [0.03, 0.34, 0.35, 0.26, 0.02];
const MIX_CLOSED: [f64; 5] = [0.2, 0.2, 0.2, 0.4, 0.0];

#[derive(Clone, Copy)]
enum Belief {
    Absent,
    Open,
    Closed,
}

pub fn gen_bank_trace(config: &BankConfig) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let syntax = Syntax::default();
    let mut service = BankService::new();
    let accts: Vec<String> = (0..config.accounts.max(1)).map(account_number).collect();
    let mut belief = vec![Belief::Absent; accts.len()];
    if !config.clean_start {
        for (i, a) in accts.iter().enumerate() {
            if rng.gen_bool(config.preexist_ratio.clamp(0.0, 1.0)) {
                let owner = NAMES.choose(&mut rng).expect("non-empty").to_string();
                let balance = rng.gen_range(0..1000);
                service.accounts.insert(
                    a.clone(),
                    Account {
                        owner,
                        balance,
                        closed: false,
                    },
                );
                belief[i] = Belief::Open;
            }
        }
    }
    let mixes = [
        WeightedIndex::new(MIX_ABSENT).expect("valid"),
        WeightedIndex::new(MIX_OPEN).expect("valid"),
        WeightedIndex::new(MIX_CLOSED).expect("valid"),
    ];
    let mut rec = Recorder::default();
    for n in 0..config.interactions {
        let id = (n + 1).to_string();
        let mut r = rng.gen_range(0..accts.len());
        // Clients mostly leave closed accounts alone.
        for _ in 0..3 {
            if !matches!(belief[r], Belief::Closed) {
                break;
            }
            r = rng.gen_range(0..accts.len());
        }
        let acct = accts[r].as_str();
        let op = OPS[match belief[r] {
            Belief::Absent => mixes[0].sample(&mut rng),
            Belief::Open => mixes[1].sample(&mut rng),
            Belief::Closed => mixes[2].sample(&mut rng),
        }];
        let balance = service.accounts.get(acct).map_or(0, |a| a.balance);
        let amount = match op {
            "deposit" => rng.gen_range(10..500u64).to_string(),
            "withdraw" if balance == 0 || rng.gen_bool(config.withdraw_fail_rate) => {
                (balance + rng.gen_range(1..200u64)).to_string()
            }
            "withdraw" => rng.gen_range(1..=balance).to_string(),
            _ => String::new(),
        };
        let owner = NAMES.choose(&mut rng).expect("non-empty");
        let mut fields: Vec<(&str, &str)> = vec![("id", &id), ("op", op), ("acct", acct)];
        match op {
            "createNewAccount" => fields.push(("owner", owner)),
            "deposit" | "withdraw" => fields.push(("amount", &amount)),
            _ => {}
        }
        let req = Message::from_fields(fields, &syntax);
        let resp = service.handle(&req);
        rec.push(req.raw(), resp.as_deref());
        belief[r] = match service.accounts.get(acct) {
            None => Belief::Absent,
            Some(a) if a.closed => Belief::Closed,
            Some(_) => Belief::Open,
        };
    }
    rec.finish()
}
