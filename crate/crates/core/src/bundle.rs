//! Mining entry point and the on-disk model bundle.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{AnalysisConfig, MessageAnalysis, DEFAULT_MAX_ENUM};
use crate::emulation::Emulator;
use crate::error::{Error, Result};
use crate::inference::{infer, Inference};
use crate::message::Syntax;
use crate::model::DependencyModel;
use crate::trace::{InteractionTrace, KeyPattern, TraceOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningConfig {
    /// Regular expression with one capture group selecting the key payload.
    pub key_pattern: Option<String>,
    pub type_field: Option<String>,
    pub max_enum: usize,
    pub ktail_k: i32,
    pub syntax: Syntax,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            key_pattern: None,
            type_field: None,
            max_enum: DEFAULT_MAX_ENUM,
            ktail_k: 0,
            syntax: Syntax::default(),
        }
    }
}

impl MiningConfig {
    pub fn with_key_pattern(pattern: &str) -> Self {
        MiningConfig {
            key_pattern: Some(pattern.to_string()),
            ..MiningConfig::default()
        }
    }

    pub fn trace_options(&self) -> Result<TraceOptions> {
        Ok(TraceOptions {
            syntax: self.syntax,
            key_pattern: self
                .key_pattern
                .as_deref()
                .map(KeyPattern::new)
                .transpose()?,
            ..TraceOptions::default()
        })
    }

    pub fn analysis_config(&self) -> AnalysisConfig {
        AnalysisConfig {
            type_field: self.type_field.clone(),
            max_enum: self.max_enum,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub config: MiningConfig,
    pub trace: InteractionTrace,
    pub analysis: MessageAnalysis,
    pub inference: Inference,
}

/// Runs message analysis and dependency inference over `trace`.
pub fn mine(trace: &InteractionTrace, config: &MiningConfig) -> Result<ModelBundle> {
    let analysis = MessageAnalysis::analyze(trace, &config.analysis_config())?;
    let inference = infer(trace, &analysis, config.ktail_k)?;
    Ok(ModelBundle {
        config: config.clone(),
        trace: trace.clone(),
        analysis,
        inference,
    })
}

/// Parses `text` as a trace and mines it.
pub fn mine_text(text: &str, config: &MiningConfig) -> Result<ModelBundle> {
    let trace = InteractionTrace::parse(text, &config.trace_options()?)?;
    mine(&trace, config)
}

const CONFIG_FILE: &str = "bundle.toml";
const TRACE_FILE: &str = "trace.tsv";

impl ModelBundle {
    pub fn emulator(&self) -> Emulator {
        Emulator::new(
            self.trace.clone(),
            self.analysis.clone(),
            self.inference.key.clone(),
            self.inference.nonkey.clone(),
        )
    }

    pub fn into_emulator(self) -> Emulator {
        Emulator::new(
            self.trace,
            self.analysis,
            self.inference.key,
            self.inference.nonkey,
        )
    }

    pub fn formats_text(&self) -> String {
        let mut out = String::new();
        for (rtype, f) in &self.analysis.request_formats {
            let _ = writeln!(out, "request\t{rtype}\t{}", f.template());
        }
        for (t, f) in &self.analysis.response_map {
            let tmpl = f
                .as_ref()
                .map(|f| f.template())
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(out, "response\t{}\t{tmpl}", t.label());
        }
        out
    }

    pub fn response_map_text(&self) -> String {
        let mut out = String::new();
        for (t, members) in &self.analysis.members {
            let seqs: Vec<String> = members
                .iter()
                .map(|&i| self.trace.interactions[i].seq.to_string())
                .collect();
            let _ = writeln!(out, "{}\t{}\t{}", t.label(), members.len(), seqs.join(","));
        }
        out
    }

    pub fn equality_rules_text(&self) -> String {
        let mut out = String::new();
        for (t, r) in &self.analysis.equality_rules {
            let pairs: Vec<String> = r.pairs.iter().map(|(j, i)| format!("{j}={i}")).collect();
            let flag = if r.low_confidence() {
                "\tlow-confidence"
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}{flag}",
                t.label(),
                r.support,
                pairs.join(",")
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        let a = &self.analysis;
        let inf = &self.inference;
        let mut out = String::new();
        let _ = writeln!(out, "interactions\t{}", self.trace.len());
        let _ = writeln!(out, "type field\t{}", a.type_field);
        let _ = writeln!(out, "request types\t{}", a.request_formats.len());
        let _ = writeln!(out, "interaction types\t{}", a.response_map.len());
        let _ = writeln!(out, "partitions\t{}", inf.partitions.len());
        for (name, m) in [
            ("full", &inf.full),
            ("key", &inf.key),
            ("nonkey", &inf.nonkey),
        ] {
            let _ = writeln!(
                out,
                "{name} model\t{} states\t{} edges",
                m.state_count(),
                m.edge_count()
            );
        }
        let rules: usize = a.equality_rules.values().map(|r| r.pairs.len()).sum();
        let _ = writeln!(out, "equality rules\t{rules}");
        let low: Vec<String> = a.low_confidence_types().iter().map(|t| t.label()).collect();
        let _ = writeln!(out, "low-confidence types\t{}", low.join(","));
        let keyed: Vec<&str> = inf.keyed_types.iter().map(String::as_str).collect();
        let _ = writeln!(out, "keyed request types\t{}", keyed.join(","));
        if !inf.mixed_types.is_empty() {
            let mixed: Vec<&str> = inf.mixed_types.iter().map(String::as_str).collect();
            let _ = writeln!(
                out,
                "warning: request types both keyed and unkeyed (treated as keyed)\t{}",
                mixed.join(",")
            );
        }
        out
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let config = toml::to_string(&self.config).map_err(|e| Error::Bundle {
            path: dir.join(CONFIG_FILE),
            message: e.to_string(),
        })?;
        let inf = &self.inference;
        let files = [
            (CONFIG_FILE, config),
            (TRACE_FILE, self.trace.to_text()),
            ("formats.txt", self.formats_text()),
            ("response_map.txt", self.response_map_text()),
            ("equality_rules.txt", self.equality_rules_text()),
            ("interaction_types.txt", inf.model_trace.to_text()),
            ("full.model", inf.full.to_text()),
            ("key.model", inf.key.to_text()),
            ("nonkey.model", inf.nonkey.to_text()),
            ("full.dot", inf.full.to_dot("full")),
            ("key.dot", inf.key.to_dot("key")),
            ("nonkey.dot", inf.nonkey.to_dot("nonkey")),
            ("summary.txt", self.summary()),
        ];
        for (name, body) in files {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }

    /// Loads a bundle. Message analysis is re-derived from the stored trace and configuration;
    /// the sub-models are read from their model files.
    pub fn load_dir(dir: &Path) -> Result<ModelBundle> {
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
        };
        let bundle_err = |name: &str, message: String| Error::Bundle {
            path: dir.join(name),
            message,
        };
        let config: MiningConfig = toml::from_str(&read(CONFIG_FILE)?)
            .map_err(|e| bundle_err(CONFIG_FILE, e.to_string()))?;
        let trace = InteractionTrace::parse(&read(TRACE_FILE)?, &config.trace_options()?)?;
        let mut bundle = mine(&trace, &config)?;
        if read("formats.txt")? != bundle.formats_text() {
            return Err(bundle_err(
                "formats.txt",
                "formats do not match the stored trace".into(),
            ));
        }
        for (name, slot) in [
            ("full.model", &mut bundle.inference.full),
            ("key.model", &mut bundle.inference.key),
            ("nonkey.model", &mut bundle.inference.nonkey),
        ] {
            let m = DependencyModel::parse_text(&read(name)?)
                .map_err(|e| bundle_err(name, e.to_string()))?;
            *slot = m;
        }
        Ok(bundle)
    }
}
