//! Interactions, traces and the tab-separated trace file format.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use regex::Regex;

use crate::error::{Error, Result};
use crate::message::{Message, Syntax};

/// Request ids may not repeat within this many consecutive interactions.
pub const PAIRING_WINDOW: usize = 16;

/// Response label used for interactions without a response.
pub const NULL_RESPONSE: &str = "NULL";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interaction {
    pub seq: usize,
    pub request: Message,
    pub response: Option<Message>,
}

/// User supplied regular expression whose single capture group yields the key payload.
#[derive(Debug, Clone)]
pub struct KeyPattern {
    regex: Regex,
}

impl KeyPattern {
    pub fn new(pattern: &str) -> Result<KeyPattern> {
        let regex = Regex::new(pattern)
            .map_err(|e| Error::Config(format!("invalid key payload pattern: {e}")))?;
        if regex.captures_len() != 2 {
            return Err(Error::Config(format!(
                "key payload pattern must have exactly one capture group, found {}",
                regex.captures_len() - 1
            )));
        }
        Ok(KeyPattern { regex })
    }

    pub fn as_str(&self) -> &str {
        self.regex.as_str()
    }

    pub fn extract(&self, message: &Message) -> KeyPayload {
        self.extract_raw(message.raw())
    }

    pub fn extract_raw(&self, raw: &str) -> KeyPayload {
        let value = self
            .regex
            .captures(raw)
            .and_then(|c| c.get(1))
            .map(|m| m.as_str().to_string())
            .unwrap_or_default();
        KeyPayload(value)
    }
}

/// Free-function form of [`KeyPattern::extract`].
pub fn extract_key_payload(message: &Message, pattern: &KeyPattern) -> KeyPayload {
    pattern.extract(message)
}

/// Identifies the data record an interaction concerns. Empty means unkeyed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KeyPayload(pub String);

impl KeyPayload {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Request type plus response type, e.g. `D_DeleteRsp(NotFound)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InteractionType {
    pub request: String,
    pub response: String,
}

impl InteractionType {
    pub fn new(request: impl Into<String>, response: impl Into<String>) -> Self {
        InteractionType {
            request: request.into(),
            response: response.into(),
        }
    }

    pub fn null(request: impl Into<String>) -> Self {
        InteractionType::new(request, NULL_RESPONSE)
    }

    pub fn is_null(&self) -> bool {
        self.response == NULL_RESPONSE
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for InteractionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.request, self.response)
    }
}

// Ordered by rendered label so that tie-breaks are lexicographic on the label text.
impl Ord for InteractionType {
    fn cmp(&self, other: &Self) -> Ordering {
        let a = self
            .request
            .bytes()
            .chain(b"_".iter().copied())
            .chain(self.response.bytes());
        let b = other
            .request
            .bytes()
            .chain(b"_".iter().copied())
            .chain(other.response.bytes());
        a.cmp(b)
    }
}

impl PartialOrd for InteractionType {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Options controlling how a trace file is read.
#[derive(Debug, Clone)]
pub struct TraceOptions {
    pub syntax: Syntax,
    pub key_pattern: Option<KeyPattern>,
    /// Field checked for duplicate request ids; `None` disables the check.
    pub id_field: Option<String>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            syntax: Syntax::default(),
            key_pattern: None,
            id_field: Some("id".to_string()),
        }
    }
}

impl TraceOptions {
    pub fn with_key_pattern(pattern: &str) -> Result<TraceOptions> {
        Ok(TraceOptions {
            key_pattern: Some(KeyPattern::new(pattern)?),
            ..TraceOptions::default()
        })
    }
}

#[derive(Debug, Clone)]
pub struct InteractionTrace {
    pub interactions: Vec<Interaction>,
    pub key_pattern: Option<KeyPattern>,
    pub syntax: Syntax,
}

impl InteractionTrace {
    pub fn new(
        interactions: Vec<Interaction>,
        key_pattern: Option<KeyPattern>,
        syntax: Syntax,
    ) -> Self {
        InteractionTrace {
            interactions,
            key_pattern,
            syntax,
        }
    }

    pub fn parse(text: &str, options: &TraceOptions) -> Result<InteractionTrace> {
        let mut interactions = Vec::new();
        let mut recent: HashMap<String, usize> = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let (req, resp) = line
                .split_once('\t')
                .ok_or_else(|| Error::MalformedRecord {
                    line: line_no,
                    message: "expected REQUEST<TAB>RESPONSE".into(),
                })?;
            if resp.contains('\t') {
                return Err(Error::MalformedRecord {
                    line: line_no,
                    message: "more than two columns".into(),
                });
            }
            let parse = |raw: &str| {
                Message::parse(raw, &options.syntax).map_err(|e| Error::MalformedRecord {
                    line: line_no,
                    message: e.to_string(),
                })
            };
            let request = parse(req)?;
            let response = if resp.is_empty() {
                None
            } else {
                Some(parse(resp)?)
            };

            if let Some(id) = options.id_field.as_deref().and_then(|f| request.get(f)) {
                if let Some(&previous) = recent.get(id) {
                    if line_no - previous <= PAIRING_WINDOW {
                        return Err(Error::DuplicateRequestId {
                            line: line_no,
                            previous,
                            id: id.to_string(),
                        });
                    }
                }
                recent.insert(id.to_string(), line_no);
            }

            interactions.push(Interaction {
                seq: idx,
                request,
                response,
            });
        }
        Ok(InteractionTrace {
            interactions,
            key_pattern: options.key_pattern.clone(),
            syntax: options.syntax,
        })
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn key_of(&self, interaction: &Interaction) -> KeyPayload {
        self.key_pattern
            .as_ref()
            .map(|p| p.extract(&interaction.request))
            .unwrap_or_default()
    }

    /// Serializes back to the trace file format, one line per interaction.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in &self.interactions {
            out.push_str(i.request.raw());
            out.push('\t');
            if let Some(r) = &i.response {
                out.push_str(r.raw());
            }
            out.push('\n');
        }
        out
    }

    /// Keeps the interactions at `indices` (which must be increasing), preserving `seq`.
    pub fn subset(&self, indices: &[usize]) -> InteractionTrace {
        InteractionTrace {
            interactions: indices
                .iter()
                .map(|&i| self.interactions[i].clone())
                .collect(),
            key_pattern: self.key_pattern.clone(),
            syntax: self.syntax,
        }
    }
}

pub fn load_trace(path: impl AsRef<Path>, options: &TraceOptions) -> Result<InteractionTrace> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    InteractionTrace::parse(&text, options)
}
