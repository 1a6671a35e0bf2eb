//! Message formats: templates of literal keywords and payload placeholders.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::message::{Message, Syntax, CLOSE, OPEN};

/// Rendering of a placeholder inside a template.
pub const PLACEHOLDER: &str = "(.*)";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Literal(String),
    /// 1-based, numbered left to right.
    Placeholder(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldValue {
    Literal(String),
    Placeholder(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatField {
    pub name: String,
    pub value: FieldValue,
    /// Absent from some cluster members. Optional fields are always placeholders.
    pub optional: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageFormat {
    pub type_label: String,
    fields: Vec<FormatField>,
    syntax: Syntax,
}

impl MessageFormat {
    pub fn new(
        type_label: impl Into<String>,
        fields: Vec<FormatField>,
        syntax: Syntax,
    ) -> Result<Self> {
        let mut expected = 1;
        for f in &fields {
            if let FieldValue::Placeholder(i) = f.value {
                if i != expected {
                    return Err(Error::Invariant(format!(
                        "placeholders must be numbered 1..k without gaps, found {i} where {expected} was expected"
                    )));
                }
                expected += 1;
            } else if f.optional {
                return Err(Error::Invariant(format!(
                    "optional field {} must be a placeholder",
                    f.name
                )));
            }
        }
        Ok(MessageFormat {
            type_label: type_label.into(),
            fields,
            syntax,
        })
    }

    pub fn fields(&self) -> &[FormatField] {
        &self.fields
    }

    pub fn placeholder_count(&self) -> usize {
        self.fields
            .iter()
            .filter(|f| matches!(f.value, FieldValue::Placeholder(_)))
            .count()
    }

    pub fn literal_count(&self) -> usize {
        self.fields.len() - self.placeholder_count()
    }

    /// Field name carrying placeholder `index` (1-based).
    pub fn placeholder_field(&self, index: usize) -> Option<&str> {
        self.fields.iter().find_map(|f| match f.value {
            FieldValue::Placeholder(i) if i == index => Some(f.name.as_str()),
            _ => None,
        })
    }

    pub fn segments(&self) -> Vec<Segment> {
        let mut out: Vec<Segment> = Vec::new();
        let mut lit = String::new();
        lit.push(OPEN);
        for (i, f) in self.fields.iter().enumerate() {
            if i > 0 {
                lit.push(self.syntax.field_sep);
            }
            lit.push_str(&f.name);
            lit.push(self.syntax.kv_sep);
            match &f.value {
                FieldValue::Literal(v) => lit.push_str(v),
                FieldValue::Placeholder(p) => {
                    out.push(Segment::Literal(std::mem::take(&mut lit)));
                    out.push(Segment::Placeholder(*p));
                }
            }
        }
        lit.push(CLOSE);
        out.push(Segment::Literal(lit));
        out.retain(|s| !matches!(s, Segment::Literal(l) if l.is_empty()));
        out
    }

    /// Template text, e.g. `{id:(.*),op:S,cn:(.*)}`. Optional fields carry a `?` after the name.
    pub fn template(&self) -> String {
        let mut out = String::new();
        out.push(OPEN);
        for (i, f) in self.fields.iter().enumerate() {
            if i > 0 {
                out.push(self.syntax.field_sep);
            }
            out.push_str(&f.name);
            if f.optional {
                out.push('?');
            }
            out.push(self.syntax.kv_sep);
            match &f.value {
                FieldValue::Literal(v) => out.push_str(v),
                FieldValue::Placeholder(_) => out.push_str(PLACEHOLDER),
            }
        }
        out.push(CLOSE);
        out
    }

    /// Parses the output of [`MessageFormat::template`].
    pub fn parse_template(type_label: &str, template: &str, syntax: Syntax) -> Result<Self> {
        let msg = Message::parse(template, &syntax)?;
        let mut next = 1;
        let mut fields = Vec::new();
        for (name, value) in msg.fields() {
            let (name, optional) = match name.strip_suffix('?') {
                Some(n) => (n.to_string(), true),
                None => (name.clone(), false),
            };
            let value = if value == PLACEHOLDER {
                next += 1;
                FieldValue::Placeholder(next - 1)
            } else {
                FieldValue::Literal(value.clone())
            };
            fields.push(FormatField {
                name,
                value,
                optional,
            });
        }
        MessageFormat::new(type_label, fields, syntax)
    }

    /// Placeholder values of `message` (index 0 holds placeholder 1), or `None` if it does not match.
    /// Absent optional fields yield `None` entries.
    pub fn extract(&self, message: &Message) -> Option<Vec<Option<String>>> {
        let mut out = Vec::with_capacity(self.placeholder_count());
        let mut mf = message.fields().iter().peekable();
        for f in &self.fields {
            let present = matches!(mf.peek(), Some((n, _)) if *n == f.name);
            if !present {
                if f.optional {
                    out.push(None);
                    continue;
                }
                return None;
            }
            let (_, value) = mf.next().expect("peeked");
            match &f.value {
                FieldValue::Literal(l) if l != value => return None,
                FieldValue::Literal(_) => {}
                FieldValue::Placeholder(_) => out.push(Some(value.clone())),
            }
        }
        if mf.next().is_some() {
            return None;
        }
        Some(out)
    }

    /// Placeholder values looked up by field name, tolerating literal mismatches.
    pub fn extract_by_name(&self, message: &Message) -> Vec<Option<String>> {
        self.fields
            .iter()
            .filter(|f| matches!(f.value, FieldValue::Placeholder(_)))
            .map(|f| message.get(&f.name).map(str::to_string))
            .collect()
    }

    pub fn matches(&self, message: &Message) -> bool {
        self.extract(message).is_some()
    }

    pub fn matches_text(&self, text: &str) -> bool {
        Message::parse(text, &self.syntax)
            .map(|m| self.matches(&m))
            .unwrap_or(false)
    }

    /// Fills the template; `values[i]` fills placeholder `i + 1`. A `None` omits an optional field
    /// and renders an empty value for a required one.
    pub fn render(&self, values: &[Option<String>]) -> String {
        let mut parts: Vec<(&str, &str)> = Vec::with_capacity(self.fields.len());
        for f in &self.fields {
            match &f.value {
                FieldValue::Literal(v) => parts.push((&f.name, v)),
                FieldValue::Placeholder(i) => match values.get(i - 1).and_then(|v| v.as_deref()) {
                    Some(v) => parts.push((&f.name, v)),
                    None if f.optional => {}
                    None => parts.push((&f.name, "")),
                },
            }
        }
        self.syntax.render(parts)
    }
}

/// Orders field names so that every member's sequence is a subsequence of the result.
/// Falls back to first-appearance order when members disagree on relative order.
fn align_field_names(messages: &[&Message]) -> Vec<String> {
    let mut order: Vec<String> = Vec::new();
    for m in messages {
        for n in m.field_names() {
            if !order.iter().any(|o| o == n) {
                order.push(n.to_string());
            }
        }
    }
    // Stable topological sort over "appears before" constraints.
    let pos: HashMap<&str, usize> = order
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut succ = vec![BTreeSet::new(); order.len()];
    let mut indeg = vec![0usize; order.len()];
    for m in messages {
        let names: Vec<usize> = m.field_names().map(|n| pos[n]).collect();
        for w in names.windows(2) {
            if succ[w[0]].insert(w[1]) {
                indeg[w[1]] += 1;
            }
        }
    }
    let mut ready: BTreeSet<usize> = (0..order.len()).filter(|&i| indeg[i] == 0).collect();
    let mut out = Vec::with_capacity(order.len());
    while let Some(&i) = ready.iter().next() {
        ready.remove(&i);
        out.push(i);
        for &j in &succ[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                ready.insert(j);
            }
        }
    }
    if out.len() != order.len() {
        return order;
    }
    out.into_iter().map(|i| order[i].clone()).collect()
}

/// Infers a format for a cluster: a field is literal iff present in every message with a
/// byte-identical value and not named in `variable`.
pub fn infer_format_with_hints(
    type_label: &str,
    cluster: &[&Message],
    variable: &BTreeSet<String>,
    syntax: Syntax,
) -> MessageFormat {
    let names = align_field_names(cluster);
    let mut fields = Vec::with_capacity(names.len());
    let mut next = 1;
    for name in names {
        let values: Vec<Option<&str>> = cluster.iter().map(|m| m.get(&name)).collect();
        let optional = values.iter().any(Option::is_none);
        let constant = !optional && values.windows(2).all(|w| w[0] == w[1]);
        let value = if constant && !variable.contains(&name) {
            FieldValue::Literal(values[0].unwrap_or_default().to_string())
        } else {
            next += 1;
            FieldValue::Placeholder(next - 1)
        };
        fields.push(FormatField {
            name,
            value,
            optional,
        });
    }
    MessageFormat::new(type_label, fields, syntax).expect("placeholders numbered sequentially")
}

pub fn infer_format(type_label: &str, cluster: &[&Message], syntax: Syntax) -> MessageFormat {
    infer_format_with_hints(type_label, cluster, &BTreeSet::new(), syntax)
}
