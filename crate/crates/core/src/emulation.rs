//! Response generation: response type selection against the sub-models, then payload
//! population from the request and a sampled training response.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::MessageAnalysis;
use crate::error::{Error, Result};
use crate::message::Message;
use crate::model::{DependencyModel, StateId, INITIAL};
use crate::trace::{InteractionTrace, InteractionType, KeyPattern, KeyPayload};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Highest training count wins; ties go to the smallest label.
    Deterministic,
    /// Samples by edge probability.
    ProbabilisticWeighted,
    /// Samples uniformly among matching edges.
    ProbabilisticRandom,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Deterministic => "det",
            Mode::ProbabilisticWeighted => "prob",
            Mode::ProbabilisticRandom => "rand",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "det" | "deterministic" => Ok(Mode::Deterministic),
            "prob" | "probabilistic" => Ok(Mode::ProbabilisticWeighted),
            "rand" | "random" => Ok(Mode::ProbabilisticRandom),
            other => Err(Error::Argument(format!(
                "unknown mode {other:?}, expected det|prob|rand"
            ))),
        }
    }
}

/// Per-record model positions plus the session position in the non-key model.
#[derive(Debug, Clone)]
pub struct SessionState {
    pub current: HashMap<KeyPayload, StateId>,
    pub nonkey: StateId,
    pub mode: Mode,
    pub rng_seed: u64,
    rng: ChaCha8Rng,
}

impl SessionState {
    pub fn new(mode: Mode, seed: u64) -> Self {
        SessionState {
            current: HashMap::new(),
            nonkey: INITIAL,
            mode,
            rng_seed: seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

/// Clears every tracked state and restarts the random stream; mode and seed are kept.
pub fn reset_session(session: &mut SessionState) {
    *session = SessionState::new(session.mode, session.rng_seed);
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    /// Copied from the request via the equality rule `(response, request)` placeholder pair.
    FromRequest { rule: (usize, usize) },
    /// Taken from the training interaction with this `seq`.
    FromSampledInteraction { seq: usize },
    /// No source had a value.
    Missing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedResponse {
    /// `None` for interaction types without a response.
    pub text: Option<String>,
    pub interaction_type: InteractionType,
    pub provenance: Vec<Provenance>,
    /// False when no model edge matched and the type was drawn at random.
    pub from_model: bool,
}

/// Outgoing edge indices of each state grouped by the request type of their target.
type Choices = Vec<HashMap<String, Vec<usize>>>;

fn index_choices(model: &DependencyModel) -> Choices {
    (0..model.state_count())
        .map(|s| {
            let mut by_req: HashMap<String, Vec<usize>> = HashMap::new();
            for (i, e) in model.out_edges(s).iter().enumerate() {
                let r = &model.label(e.target).expect("labeled").request;
                by_req.entry(r.clone()).or_default().push(i);
            }
            by_req
        })
        .collect()
}

/// A mined service ready to answer requests.
#[derive(Debug, Clone)]
pub struct Emulator {
    pub trace: InteractionTrace,
    pub analysis: MessageAnalysis,
    pub key_model: DependencyModel,
    pub nonkey_model: DependencyModel,
    key_choices: Choices,
    nonkey_choices: Choices,
    /// Interaction types per request type, sorted.
    types_by_request: HashMap<String, Vec<InteractionType>>,
}

impl Emulator {
    pub fn new(
        trace: InteractionTrace,
        analysis: MessageAnalysis,
        key_model: DependencyModel,
        nonkey_model: DependencyModel,
    ) -> Emulator {
        let mut types_by_request: HashMap<String, Vec<InteractionType>> = HashMap::new();
        for t in analysis.interaction_types() {
            types_by_request
                .entry(t.request.clone())
                .or_default()
                .push(t.clone());
        }
        Emulator {
            key_choices: index_choices(&key_model),
            nonkey_choices: index_choices(&nonkey_model),
            trace,
            analysis,
            key_model,
            nonkey_model,
            types_by_request,
        }
    }

    pub fn key_pattern(&self) -> Option<&KeyPattern> {
        self.trace.key_pattern.as_ref()
    }

    pub fn parse_request(&self, text: &str) -> Result<Message> {
        Message::parse(text, &self.analysis.syntax)
    }

    fn key_of(&self, request: &Message) -> KeyPayload {
        self.key_pattern()
            .map(|p| p.extract(request))
            .unwrap_or_default()
    }

    /// Picks the response type for `request` and advances the session. `None` when the current
    /// state has no edge for the request type.
    pub fn select_response_type(
        &self,
        request: &Message,
        session: &mut SessionState,
    ) -> Result<Option<InteractionType>> {
        let rtype = self.analysis.request_type(request)?;
        let key = self.key_of(request);
        let (model, choices, state) = if key.is_empty() {
            (&self.nonkey_model, &self.nonkey_choices, session.nonkey)
        } else {
            let s = session.current.get(&key).copied().unwrap_or(INITIAL);
            (&self.key_model, &self.key_choices, s)
        };
        let Some(cands) = choices[state].get(rtype) else {
            return Ok(None);
        };
        let edges = model.out_edges(state);
        let pick = match session.mode {
            Mode::Deterministic => *cands
                .iter()
                .min_by(|&&a, &&b| {
                    edges[b].count.cmp(&edges[a].count).then_with(|| {
                        model
                            .label(edges[a].target)
                            .cmp(&model.label(edges[b].target))
                    })
                })
                .expect("non-empty"),
            Mode::ProbabilisticRandom => *cands.choose(&mut session.rng).expect("non-empty"),
            Mode::ProbabilisticWeighted => {
                let weights: Vec<f64> = cands
                    .iter()
                    .map(|&i| edges[i].probability.unwrap_or(1.0 / cands.len() as f64))
                    .collect();
                let total: f64 = weights.iter().sum();
                let mut x = session.rng.gen::<f64>() * total;
                let mut chosen = *cands.last().expect("non-empty");
                for (&i, w) in cands.iter().zip(&weights) {
                    if x < *w {
                        chosen = i;
                        break;
                    }
                    x -= w;
                }
                chosen
            }
        };
        let target = edges[pick].target;
        if key.is_empty() {
            session.nonkey = target;
        } else {
            session.current.insert(key, target);
        }
        Ok(model.label(target).cloned())
    }

    /// Builds the response text for `itype`, or for a random type of the request when `None`.
    pub fn populate_payload(
        &self,
        request: &Message,
        itype: Option<InteractionType>,
        session: &mut SessionState,
    ) -> Result<GeneratedResponse> {
        let rtype = self.analysis.request_type(request)?;
        let from_model = itype.is_some();
        let itype = match itype {
            Some(t) => t,
            None => self
                .types_by_request
                .get(rtype)
                .and_then(|ts| ts.choose(&mut session.rng))
                .cloned()
                .ok_or_else(|| Error::UnknownRequestType(request.raw().to_string()))?,
        };
        let format = match self.analysis.response_map.get(&itype) {
            None => return Err(Error::Invariant(format!("no response format for {itype}"))),
            Some(None) => {
                return Ok(GeneratedResponse {
                    text: None,
                    interaction_type: itype,
                    provenance: Vec::new(),
                    from_model,
                })
            }
            Some(Some(f)) => f,
        };
        let sample = self
            .analysis
            .members
            .get(&itype)
            .and_then(|m| m.choose(&mut session.rng))
            .map(|&i| &self.trace.interactions[i]);
        let sampled_values = sample
            .and_then(|it| it.response.as_ref())
            .and_then(|r| format.extract(r))
            .unwrap_or_default();
        let request_values = self.analysis.request_formats[rtype].extract_by_name(request);
        let rules = self.analysis.equality_rules.get(&itype);
        let k = format.placeholder_count();
        let mut values = Vec::with_capacity(k);
        let mut provenance = Vec::with_capacity(k);
        for j in 1..=k {
            let from_req = rules
                .and_then(|r| r.source_for(j))
                .and_then(|i| request_values.get(i - 1).cloned().flatten().map(|v| (i, v)));
            if let Some((i, v)) = from_req {
                values.push(Some(v));
                provenance.push(Provenance::FromRequest { rule: (j, i) });
            } else if let Some(v) = sampled_values.get(j - 1).cloned().flatten() {
                values.push(Some(v));
                provenance.push(Provenance::FromSampledInteraction {
                    seq: sample.expect("value came from a sample").seq,
                });
            } else {
                values.push(None);
                provenance.push(Provenance::Missing);
            }
        }
        Ok(GeneratedResponse {
            text: Some(format.render(&values)),
            interaction_type: itype,
            provenance,
            from_model,
        })
    }

    pub fn generate_response(
        &self,
        request: &Message,
        session: &mut SessionState,
    ) -> Result<GeneratedResponse> {
        let itype = self.select_response_type(request, session)?;
        self.populate_payload(request, itype, session)
    }

    pub fn generate_text(
        &self,
        request: &str,
        session: &mut SessionState,
    ) -> Result<GeneratedResponse> {
        let msg = self.parse_request(request)?;
        self.generate_response(&msg, session)
    }
}
