//! Six-level accuracy taxonomy for generated responses.

use std::fmt;

use crate::analysis::MessageAnalysis;
use crate::format::FieldValue;
use crate::message::Message;
use crate::trace::{InteractionTrace, InteractionType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AccuracyClass {
    Identical,
    DataConsistent,
    ProtocolExact,
    ProtocolPlausible,
    WellFormed,
    Malformed,
}

impl AccuracyClass {
    pub const ALL: [AccuracyClass; 6] = [
        AccuracyClass::Identical,
        AccuracyClass::DataConsistent,
        AccuracyClass::ProtocolExact,
        AccuracyClass::ProtocolPlausible,
        AccuracyClass::WellFormed,
        AccuracyClass::Malformed,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            AccuracyClass::Identical => "identical",
            AccuracyClass::DataConsistent => "data-consistent",
            AccuracyClass::ProtocolExact => "protocol-exact",
            AccuracyClass::ProtocolPlausible => "protocol-plausible",
            AccuracyClass::WellFormed => "well-formed",
            AccuracyClass::Malformed => "malformed",
        }
    }
}

impl fmt::Display for AccuracyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Request field carrying the key payload, found by value on the first keyed request.
pub fn detect_key_field(trace: &InteractionTrace) -> Option<String> {
    trace.interactions.iter().find_map(|it| {
        let key = trace.key_of(it);
        if key.is_empty() {
            return None;
        }
        it.request
            .fields()
            .iter()
            .find(|(_, v)| v == key.as_str())
            .map(|(n, _)| n.clone())
    })
}

/// Message id plus the key payload field.
pub fn default_critical_fields(trace: &InteractionTrace) -> Vec<String> {
    let mut out = vec!["id".to_string()];
    if let Some(k) = detect_key_field(trace) {
        if k != "id" {
            out.push(k);
        }
    }
    out
}

fn critical_equal(
    analysis: &MessageAnalysis,
    itype: &InteractionType,
    generated: &Message,
    expected: &Message,
    critical: &[String],
) -> bool {
    let Some(Some(format)) = analysis.response_map.get(itype) else {
        return true;
    };
    format
        .fields()
        .iter()
        .filter(|f| matches!(f.value, FieldValue::Placeholder(_)) && critical.contains(&f.name))
        .all(|f| generated.get(&f.name) == expected.get(&f.name))
}

/// Classifies `generated` against the recorded `expected` response (`None` means no response).
/// `expected_type` is the recorded interaction's type under `analysis`.
pub fn classify(
    generated: Option<&str>,
    expected: Option<&Message>,
    expected_type: &InteractionType,
    analysis: &MessageAnalysis,
    critical_fields: &[String],
) -> AccuracyClass {
    if generated == expected.map(Message::raw) {
        return AccuracyClass::Identical;
    }
    let request_type = expected_type.request.as_str();
    let Some(text) = generated else {
        // No response where one was expected: plausible only if the request type can go unanswered.
        let null = InteractionType::null(request_type);
        if analysis.response_map.contains_key(&null) {
            return AccuracyClass::ProtocolPlausible;
        }
        if analysis.response_map.keys().any(InteractionType::is_null) {
            return AccuracyClass::WellFormed;
        }
        return AccuracyClass::Malformed;
    };
    let matching = analysis.matching_types(text);
    if matching.iter().any(|t| *t == expected_type) {
        let parsed = Message::parse(text, &analysis.syntax).expect("matched a format");
        return match expected {
            Some(exp) if critical_equal(analysis, expected_type, &parsed, exp, critical_fields) => {
                AccuracyClass::DataConsistent
            }
            _ => AccuracyClass::ProtocolExact,
        };
    }
    if matching.iter().any(|t| t.request == request_type) {
        AccuracyClass::ProtocolPlausible
    } else if !matching.is_empty() {
        AccuracyClass::WellFormed
    } else {
        AccuracyClass::Malformed
    }
}
