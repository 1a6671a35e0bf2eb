//! Reference services with real record state, driven by scripted clients to produce traces.

pub mod bank;
pub mod directory;
pub mod stateless;

use crate::message::Syntax;

pub use bank::{gen_bank_trace, BankConfig, BankService};
pub use directory::{example_trace, gen_directory_trace, DirectoryConfig, DirectoryService};
pub use stateless::{gen_stateless_trace, StatelessConfig, StatelessKind};

/// Record identifiers are drawn from this list plus a numeric suffix.
pub const NAMES: &[&str] = &[
    "Judith", "Gavin", "Linden", "Katy", "Craig", "Maria", "Tomas", "Aiko", "Bruno", "Chen",
    "Dana", "Elif", "Farid", "Greta", "Hugo", "Ines", "Jonas", "Kira", "Luca", "Mona",
];

pub const SURNAMES: &[&str] = &[
    "BROWN", "SMITH", "MAJOR", "JONES", "TAYLOR", "WILSON", "NGUYEN", "MARTIN", "LEE", "WALKER",
];

/// Name of record `i`; unique for every `i`.
pub fn record_name(i: usize) -> String {
    format!("{}{}", NAMES[i % NAMES.len()], i / NAMES.len())
}

pub(crate) fn render(fields: &[(&str, &str)]) -> String {
    Syntax::default().render(fields.iter().copied())
}

/// Accumulates trace lines.
#[derive(Debug, Default)]
pub(crate) struct Recorder {
    out: String,
    pub count: usize,
}

impl Recorder {
    pub fn push(&mut self, request: &str, response: Option<&str>) {
        self.out.push_str(request);
        self.out.push('\t');
        if let Some(r) = response {
            self.out.push_str(r);
        }
        self.out.push('\n');
        self.count += 1;
    }

    pub fn finish(self) -> String {
        self.out
    }
}
