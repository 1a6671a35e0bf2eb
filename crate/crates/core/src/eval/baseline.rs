//! Whole-Cluster baseline: answer with the response of the most similar recorded request,
//! similarity being the global alignment score of the two token sequences.

use std::collections::HashMap;

use crate::message::Syntax;
use crate::trace::InteractionTrace;

pub const MATCH: i32 = 1;
pub const MISMATCH: i32 = -1;
pub const GAP: i32 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scoring {
    pub matched: i32,
    pub mismatch: i32,
    pub gap: i32,
}

impl Default for Scoring {
    fn default() -> Self {
        Scoring {
            matched: MATCH,
            mismatch: MISMATCH,
            gap: GAP,
        }
    }
}

/// Splits text into lexical tokens: every delimiter character is a token of its own, and each
/// maximal run of other characters is one token.
pub fn tokenize<'a>(text: &'a str, syntax: &Syntax) -> Vec<&'a str> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in text.char_indices() {
        if syntax.is_delimiter(c) {
            if start < i {
                out.push(&text[start..i]);
            }
            out.push(&text[i..i + c.len_utf8()]);
            start = i + c.len_utf8();
        }
    }
    if start < text.len() {
        out.push(&text[start..]);
    }
    out
}

/// Needleman-Wunsch global alignment score.
pub fn nw_score<T: PartialEq>(a: &[T], b: &[T], s: &Scoring) -> i32 {
    let mut row: Vec<i32> = (0..=b.len() as i32).map(|j| j * s.gap).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = (i as i32 + 1) * s.gap;
        for (j, y) in b.iter().enumerate() {
            let sub = diag + if x == y { s.matched } else { s.mismatch };
            let best = sub.max(row[j + 1] + s.gap).max(row[j] + s.gap);
            diag = row[j + 1];
            row[j + 1] = best;
        }
    }
    row[b.len()]
}

/// Aligned index pairs `(i in a, j in b)` of one optimal alignment; gaps are omitted.
pub fn nw_align<T: PartialEq>(a: &[T], b: &[T], s: &Scoring) -> (i32, Vec<(usize, usize)>) {
    let (n, m) = (a.len(), b.len());
    let mut t = vec![vec![0i32; m + 1]; n + 1];
    for (i, row) in t.iter_mut().enumerate() {
        row[0] = i as i32 * s.gap;
    }
    for j in 0..=m {
        t[0][j] = j as i32 * s.gap;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = t[i - 1][j - 1]
                + if a[i - 1] == b[j - 1] {
                    s.matched
                } else {
                    s.mismatch
                };
            t[i][j] = sub.max(t[i - 1][j] + s.gap).max(t[i][j - 1] + s.gap);
        }
    }
    let mut pairs = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        let sub = t[i - 1][j - 1]
            + if a[i - 1] == b[j - 1] {
                s.matched
            } else {
                s.mismatch
            };
        if t[i][j] == sub {
            pairs.push((i - 1, j - 1));
            i -= 1;
            j -= 1;
        } else if t[i][j] == t[i - 1][j] + s.gap {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    pairs.reverse();
    (t[n][m], pairs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResponse {
    pub text: Option<String>,
    /// `seq` of the chosen training interaction.
    pub matched_seq: usize,
    pub score: i32,
}

/// Training requests tokenized once, tokens interned to integers.
#[derive(Debug, Clone)]
pub struct WholeCluster {
    syntax: Syntax,
    scoring: Scoring,
    vocab: HashMap<String, u32>,
    requests: Vec<Vec<u32>>,
    raw_requests: Vec<String>,
    responses: Vec<Option<String>>,
    seqs: Vec<usize>,
}

impl WholeCluster {
    pub fn new(train: &InteractionTrace, scoring: Scoring) -> Self {
        let mut wc = WholeCluster {
            syntax: train.syntax,
            scoring,
            vocab: HashMap::new(),
            requests: Vec::with_capacity(train.len()),
            raw_requests: Vec::with_capacity(train.len()),
            responses: Vec::with_capacity(train.len()),
            seqs: Vec::with_capacity(train.len()),
        };
        for it in &train.interactions {
            let ids = wc.intern(it.request.raw());
            wc.requests.push(ids);
            wc.raw_requests.push(it.request.raw().to_string());
            wc.responses
                .push(it.response.as_ref().map(|r| r.raw().to_string()));
            wc.seqs.push(it.seq);
        }
        wc
    }

    fn intern(&mut self, text: &str) -> Vec<u32> {
        tokenize(text, &self.syntax)
            .into_iter()
            .map(|t| {
                let next = self.vocab.len() as u32;
                *self.vocab.entry(t.to_string()).or_insert(next)
            })
            .collect()
    }

    fn lookup(&self, text: &str) -> Vec<u32> {
        // Unknown tokens get ids that match nothing in the training set.
        let mut unknown = self.vocab.len() as u32;
        tokenize(text, &self.syntax)
            .into_iter()
            .map(|t| {
                self.vocab.get(t).copied().unwrap_or_else(|| {
                    unknown += 1;
                    unknown
                })
            })
            .collect()
    }

    /// Best-scoring training interaction; ties go to the earliest one.
    pub fn best_match(&self, request: &str) -> Option<(usize, i32)> {
        let q = self.lookup(request);
        let sc = &self.scoring;
        let prunable = sc.gap <= 0 && sc.matched >= sc.mismatch && sc.matched >= 2 * sc.gap;
        let mut best: Option<(usize, i32)> = None;
        for (idx, r) in self.requests.iter().enumerate() {
            // No alignment beats matching the whole shorter sequence and gapping the rest.
            let bound = (q.len().min(r.len()) as i32) * sc.matched
                + (q.len() as i32 - r.len() as i32).abs() * sc.gap;
            if prunable && best.is_some_and(|(_, b)| bound <= b) {
                continue;
            }
            let s = nw_score(&q, r, &self.scoring);
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((idx, s));
            }
        }
        best
    }

    pub fn respond(&self, request: &str) -> Option<BaselineResponse> {
        let (idx, score) = self.best_match(request)?;
        let text = self.responses[idx].as_ref().map(|resp| {
            substitute(
                &self.raw_requests[idx],
                request,
                resp,
                &self.syntax,
                &self.scoring,
            )
        });
        Some(BaselineResponse {
            text,
            matched_seq: self.seqs[idx],
            score,
        })
    }
}

/// Copies request values into the recorded response wherever the recorded response repeated a
/// value of the recorded request that differs at the aligned position of the new request.
pub fn substitute(
    recorded_request: &str,
    request: &str,
    recorded_response: &str,
    syntax: &Syntax,
    scoring: &Scoring,
) -> String {
    let a = tokenize(recorded_request, syntax);
    let b = tokenize(request, syntax);
    let (_, pairs) = nw_align(&a, &b, scoring);
    let mut map: HashMap<&str, &str> = HashMap::new();
    for (i, j) in pairs {
        let (x, y) = (a[i], b[j]);
        let delim = |t: &str| t.chars().count() == 1 && t.chars().all(|c| syntax.is_delimiter(c));
        if x != y && !delim(x) && !delim(y) {
            map.entry(x).or_insert(y);
        }
    }
    tokenize(recorded_response, syntax)
        .into_iter()
        .map(|t| map.get(t).copied().unwrap_or(t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_split_on_delimiters() {
        let s = Syntax::default();
        assert_eq!(
            tokenize("{id:2,op:D}", &s),
            ["{", "id", ":", "2", ",", "op", ":", "D", "}"]
        );
        assert_eq!(tokenize("", &s), Vec::<&str>::new());
    }

    #[test]
    fn score_basics() {
        let s = Scoring::default();
        assert_eq!(nw_score(b"abc", b"abc", &s), 3);
        assert_eq!(nw_score(b"abc", b"", &s), -3);
        assert_eq!(nw_score(b"abc", b"abd", &s), 1);
        let (score, pairs) = nw_align(b"abc", b"ac", &s);
        assert_eq!(score, nw_score(b"abc", b"ac", &s));
        assert_eq!(pairs, vec![(0, 0), (2, 1)]);
    }

    #[test]
    fn substitution_copies_symmetric_values() {
        let s = Syntax::default();
        let out = substitute(
            "{id:55,op:D,cn:Judith}",
            "{id:99,op:D,cn:Gavin}",
            "{id:55,op:DeleteRsp,result:Ok}",
            &s,
            &Scoring::default(),
        );
        assert_eq!(out, "{id:99,op:DeleteRsp,result:Ok}");
    }
}
