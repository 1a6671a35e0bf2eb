//! Brace-delimited text messages of the form `{name:value,name:value}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OPEN: char = '{';
pub const CLOSE: char = '}';

/// Separators used inside a message body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Syntax {
    pub field_sep: char,
    pub kv_sep: char,
}

impl Default for Syntax {
    fn default() -> Self {
        Syntax {
            field_sep: ',',
            kv_sep: ':',
        }
    }
}

impl Syntax {
    pub fn is_delimiter(&self, c: char) -> bool {
        c == OPEN || c == CLOSE || c == self.field_sep || c == self.kv_sep
    }

    /// Renders `fields` as message text. Inverse of [`Message::parse`].
    pub fn render<'a, I>(&self, fields: I) -> String
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut out = String::new();
        out.push(OPEN);
        for (i, (name, value)) in fields.into_iter().enumerate() {
            if i > 0 {
                out.push(self.field_sep);
            }
            out.push_str(name);
            out.push(self.kv_sep);
            out.push_str(value);
        }
        out.push(CLOSE);
        out
    }
}

/// A single wire message together with its parsed fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    raw: String,
    fields: Vec<(String, String)>,
}

impl Message {
    pub fn parse(raw: &str, syntax: &Syntax) -> Result<Message> {
        let malformed = |reason: &str| Error::MalformedMessage {
            raw: raw.to_string(),
            reason: reason.to_string(),
        };
        let body = raw
            .strip_prefix(OPEN)
            .and_then(|s| s.strip_suffix(CLOSE))
            .ok_or_else(|| malformed("expected text enclosed in braces"))?;
        let mut fields = Vec::new();
        if !body.is_empty() {
            for part in body.split(syntax.field_sep) {
                let (name, value) = part
                    .split_once(syntax.kv_sep)
                    .ok_or_else(|| malformed("field without key/value separator"))?;
                if name.is_empty() {
                    return Err(malformed("empty field name"));
                }
                fields.push((name.to_string(), value.to_string()));
            }
        }
        Ok(Message {
            raw: raw.to_string(),
            fields,
        })
    }

    pub fn from_fields<'a, I>(fields: I, syntax: &Syntax) -> Message
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let fields: Vec<(String, String)> = fields
            .into_iter()
            .map(|(n, v)| (n.to_string(), v.to_string()))
            .collect();
        let raw = syntax.render(fields.iter().map(|(n, v)| (n.as_str(), v.as_str())));
        Message { raw, fields }
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn fields(&self) -> &[(String, String)] {
        &self.fields
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn field_names(&self) -> impl Iterator<Item = &str> {
        self.fields.iter().map(|(n, _)| n.as_str())
    }

    /// Re-serializes the parsed fields; equals `raw` for every parsed message.
    pub fn reserialize(&self, syntax: &Syntax) -> String {
        syntax.render(self.fields.iter().map(|(n, v)| (n.as_str(), v.as_str())))
    }
}
