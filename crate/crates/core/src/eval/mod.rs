//! Record-partitioned cross-validation of the emulator and the Whole-Cluster baseline.

pub mod baseline;
pub mod classify;
pub mod folds;
pub mod stats;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::analysis::MessageAnalysis;
use crate::bundle::{mine, MiningConfig};
use crate::emulation::{Mode, SessionState};
use crate::error::{Error, Result};
use crate::trace::InteractionTrace;

pub use baseline::{Scoring, WholeCluster};
pub use classify::{classify, default_critical_fields, AccuracyClass};
pub use folds::{kfold_by_key_payload, Fold};
pub use stats::{chi_squared, ChiSquaredResult};

/// Text used for a request the emulator cannot answer.
pub const UNRECOGNIZED: &str = "{error:unrecognized}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Approach {
    Ours(ModeKey),
    WholeCluster,
}

/// Orderable stand-in for [`Mode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModeKey {
    Det,
    Prob,
    Rand,
}

impl ModeKey {
    pub fn mode(self) -> Mode {
        match self {
            ModeKey::Det => Mode::Deterministic,
            ModeKey::Prob => Mode::ProbabilisticWeighted,
            ModeKey::Rand => Mode::ProbabilisticRandom,
        }
    }
}

impl Approach {
    pub const DET: Approach = Approach::Ours(ModeKey::Det);
    pub const PROB: Approach = Approach::Ours(ModeKey::Prob);
    pub const RAND: Approach = Approach::Ours(ModeKey::Rand);

    pub fn name(self) -> &'static str {
        match self {
            Approach::Ours(ModeKey::Det) => "det",
            Approach::Ours(ModeKey::Prob) => "prob",
            Approach::Ours(ModeKey::Rand) => "rand",
            Approach::WholeCluster => "wc",
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<Approach>> {
        let mut out: Vec<Approach> = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let a = part.parse()?;
            if !out.contains(&a) {
                out.push(a);
            }
        }
        if out.is_empty() {
            return Err(Error::Argument("no evaluation modes given".into()));
        }
        Ok(out)
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Approach> {
        match s {
            "wc" | "whole-cluster" => Ok(Approach::WholeCluster),
            other => match other.parse::<Mode>().map_err(|_| {
                Error::Argument(format!(
                    "unknown approach {other:?}, expected det|prob|rand|wc"
                ))
            })? {
                Mode::Deterministic => Ok(Approach::DET),
                Mode::ProbabilisticWeighted => Ok(Approach::PROB),
                Mode::ProbabilisticRandom => Ok(Approach::RAND),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub folds: usize,
    pub seed: u64,
    pub approaches: Vec<Approach>,
    /// Defaults to the message id and the key payload field.
    pub critical_fields: Option<Vec<String>>,
    pub mining: MiningConfig,
    pub scoring: Scoring,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 10,
            seed: 0,
            approaches: vec![
                Approach::DET,
                Approach::PROB,
                Approach::RAND,
                Approach::WholeCluster,
            ],
            critical_fields: None,
            mining: MiningConfig::default(),
            scoring: Scoring::default(),
        }
    }
}

pub type ClassCounts = [u64; 6];

#[derive(Debug, Clone, PartialEq)]
pub struct ApproachResult {
    pub approach: Approach,
    pub counts: ClassCounts,
    /// Counts per request type of the expected interaction.
    pub by_request: BTreeMap<String, ClassCounts>,
    pub latencies_ns: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub train: usize,
    pub test: usize,
    pub mining_ms: f64,
    pub results: Vec<ApproachResult>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub approaches: Vec<Approach>,
    pub critical_fields: Vec<String>,
    pub folds: Vec<FoldResult>,
    /// Peak resident set size of the process in KiB, where the platform reports it.
    pub peak_rss_kb: Option<u64>,
}

/// Peak resident set size in KiB, read from `/proc/self/status`.
pub fn peak_rss_kb() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))
        .and_then(|v| v.trim().trim_end_matches("kB").trim().parse().ok())
}

/// Resets the kernel's peak RSS counter. Returns false where unsupported.
pub fn reset_peak_rss() -> bool {
    fs::write("/proc/self/clear_refs", "5").is_ok()
}

fn evaluate_fold(
    trace: &InteractionTrace,
    full: &MessageAnalysis,
    critical: &[String],
    config: &EvalConfig,
    n: usize,
    fold: &Fold,
) -> Result<FoldResult> {
    let train = trace.subset(&fold.train);
    let t0 = Instant::now();
    let bundle = mine(&train, &config.mining)?;
    let mining_ms = t0.elapsed().as_secs_f64() * 1e3;
    let emulator = bundle.into_emulator();
    let mut results = Vec::new();
    for &approach in &config.approaches {
        let mut counts = [0u64; 6];
        let mut by_request: BTreeMap<String, ClassCounts> = BTreeMap::new();
        let mut latencies_ns = Vec::with_capacity(fold.test.len());
        let wc = matches!(approach, Approach::WholeCluster)
            .then(|| WholeCluster::new(&train, config.scoring));
        let mut session = match approach {
            Approach::Ours(m) => Some(SessionState::new(
                m.mode(),
                config.seed.wrapping_add(n as u64),
            )),
            Approach::WholeCluster => None,
        };
        for &idx in &fold.test {
            let it = &trace.interactions[idx];
            let start = Instant::now();
            let text: Option<String> = match (&wc, session.as_mut()) {
                (Some(wc), _) => wc.respond(it.request.raw()).and_then(|r| r.text),
                (None, Some(s)) => match emulator.generate_response(&it.request, s) {
                    Ok(g) => g.text,
                    Err(_) => Some(UNRECOGNIZED.to_string()),
                },
                (None, None) => unreachable!("each approach has a generator"),
            };
            latencies_ns.push(start.elapsed().as_nanos() as u64);
            let expected_type = &full.assignments[idx];
            let class = classify(
                text.as_deref(),
                it.response.as_ref(),
                expected_type,
                full,
                critical,
            );
            counts[class.index()] += 1;
            by_request.entry(expected_type.request.clone()).or_default()[class.index()] += 1;
        }
        results.push(ApproachResult {
            approach,
            counts,
            by_request,
            latencies_ns,
        });
    }
    Ok(FoldResult {
        fold: n,
        train: fold.train.len(),
        test: fold.test.len(),
        mining_ms,
        results,
    })
}

/// Runs k-fold cross-validation. Folds are evaluated in parallel; results are in fold order.
pub fn run_evaluation(trace: &InteractionTrace, config: &EvalConfig) -> Result<Report> {
    let full = MessageAnalysis::analyze(trace, &config.mining.analysis_config())?;
    let critical = config
        .critical_fields
        .clone()
        .unwrap_or_else(|| default_critical_fields(trace));
    let folds = kfold_by_key_payload(trace, config.folds, config.seed)?;
    reset_peak_rss();
    let results = folds
        .par_iter()
        .enumerate()
        .map(|(n, f)| evaluate_fold(trace, &full, &critical, config, n, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(Report {
        approaches: config.approaches.clone(),
        critical_fields: critical,
        folds: results,
        peak_rss_kb: peak_rss_kb(),
    })
}

fn percentile(sorted: &[u64], q: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn pct(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

impl Report {
    pub fn totals(&self, approach: Approach) -> ClassCounts {
        let mut out = [0u64; 6];
        for f in &self.folds {
            for r in f.results.iter().filter(|r| r.approach == approach) {
                for (o, c) in out.iter_mut().zip(r.counts) {
                    *o += c;
                }
            }
        }
        out
    }

    pub fn total_tests(&self) -> u64 {
        self.folds.iter().map(|f| f.test as u64).sum()
    }

    /// Share of test interactions in `class`, in percent.
    pub fn rate(&self, approach: Approach, class: AccuracyClass) -> f64 {
        let t = self.totals(approach);
        pct(t[class.index()], t.iter().sum())
    }

    pub fn by_request(&self, approach: Approach) -> BTreeMap<String, ClassCounts> {
        let mut out: BTreeMap<String, ClassCounts> = BTreeMap::new();
        for f in &self.folds {
            for r in f.results.iter().filter(|r| r.approach == approach) {
                for (k, c) in &r.by_request {
                    let e = out.entry(k.clone()).or_default();
                    for (o, v) in e.iter_mut().zip(c) {
                        *o += v;
                    }
                }
            }
        }
        out
    }

    /// Sorted generation latencies of `approach` across all folds, in nanoseconds.
    pub fn latencies(&self, approach: Approach) -> Vec<u64> {
        let mut all: Vec<u64> = self
            .folds
            .iter()
            .flat_map(|f| f.results.iter().filter(|r| r.approach == approach))
            .flat_map(|r| r.latencies_ns.iter().copied())
            .collect();
        all.sort_unstable();
        all
    }

    pub fn chi_squared(&self, approaches: &[Approach]) -> ChiSquaredResult {
        let table: Vec<Vec<u64>> = approaches
            .iter()
            .map(|&a| self.totals(a).to_vec())
            .collect();
        chi_squared(&table)
    }

    fn header() -> String {
        let classes: Vec<&str> = AccuracyClass::ALL.iter().map(|c| c.name()).collect();
        classes.join("\t")
    }

    /// Per-fold and total class counts; free of timing data, so reproducible for a fixed seed.
    pub fn report_tsv(&self) -> String {
        let mut out = format!("approach\tfold\ttrain\ttest\t{}\n", Self::header());
        for &a in &self.approaches {
            for f in &self.folds {
                for r in f.results.iter().filter(|r| r.approach == a) {
                    let counts: Vec<String> = r.counts.iter().map(u64::to_string).collect();
                    let _ = writeln!(
                        out,
                        "{}\t{}\t{}\t{}\t{}",
                        a.name(),
                        f.fold,
                        f.train,
                        f.test,
                        counts.join("\t")
                    );
                }
            }
            let counts: Vec<String> = self.totals(a).iter().map(u64::to_string).collect();
            let train: usize = self.folds.iter().map(|f| f.train).sum();
            let _ = writeln!(
                out,
                "{}\ttotal\t{train}\t{}\t{}",
                a.name(),
                self.total_tests(),
                counts.join("\t")
            );
        }
        out
    }

    pub fn by_type_tsv(&self) -> String {
        let mut out = format!("approach\trequest_type\t{}\n", Self::header());
        for &a in &self.approaches {
            for (rt, c) in self.by_request(a) {
                let counts: Vec<String> = c.iter().map(u64::to_string).collect();
                let _ = writeln!(out, "{}\t{rt}\t{}", a.name(), counts.join("\t"));
            }
        }
        out
    }

    pub fn efficiency_tsv(&self) -> String {
        let mut out = String::from("approach\trequests\tmedian_us\tp99_us\tmax_us\n");
        for &a in &self.approaches {
            let l = self.latencies(a);
            let us = |ns: u64| ns as f64 / 1e3;
            let _ = writeln!(
                out,
                "{}\t{}\t{:.3}\t{:.3}\t{:.3}",
                a.name(),
                l.len(),
                us(percentile(&l, 0.5)),
                us(percentile(&l, 0.99)),
                us(l.last().copied().unwrap_or(0))
            );
        }
        for f in &self.folds {
            let _ = writeln!(out, "mining\tfold {}\t{:.1} ms", f.fold, f.mining_ms);
        }
        if let Some(kb) = self.peak_rss_kb {
            let _ = writeln!(out, "peak_rss\t{kb} kB");
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "folds\t{}", self.folds.len());
        let _ = writeln!(out, "test interactions\t{}", self.total_tests());
        let _ = writeln!(out, "critical fields\t{}", self.critical_fields.join(","));
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "approach\t{}\tidentical+data-consistent",
            Self::header()
        );
        for &a in &self.approaches {
            let rates: Vec<String> = AccuracyClass::ALL
                .iter()
                .map(|&c| format!("{:.2}%", self.rate(a, c)))
                .collect();
            let both = self.rate(a, AccuracyClass::Identical)
                + self.rate(a, AccuracyClass::DataConsistent);
            let _ = writeln!(out, "{}\t{}\t{both:.2}%", a.name(), rates.join("\t"));
        }
        let mut tests: Vec<(String, Vec<Approach>)> = Vec::new();
        if self.approaches.len() > 1 {
            tests.push(("all approaches".into(), self.approaches.clone()));
        }
        for (x, y) in [
            (Approach::PROB, Approach::RAND),
            (Approach::DET, Approach::WholeCluster),
            (Approach::PROB, Approach::WholeCluster),
        ] {
            if self.approaches.contains(&x) && self.approaches.contains(&y) {
                tests.push((format!("{} vs {}", x.name(), y.name()), vec![x, y]));
            }
        }
        if !tests.is_empty() {
            let _ = writeln!(out);
        }
        for (name, set) in tests {
            let r = self.chi_squared(&set);
            let _ = writeln!(
                out,
                "chi-squared {name}\tstatistic {:.4}\tdof {}\tp {:.4e}",
                r.statistic, r.dof, r.p_value
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "per request type (identical / data-consistent / other, percent)"
        );
        for &a in &self.approaches {
            for (rt, c) in self.by_request(a) {
                let n: u64 = c.iter().sum();
                let other = n - c[0] - c[1];
                let _ = writeln!(
                    out,
                    "{}\t{rt}\t{:.2}\t{:.2}\t{:.2}",
                    a.name(),
                    pct(c[0], n),
                    pct(c[1], n),
                    pct(other, n)
                );
            }
        }
        out
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            ("report.tsv", self.report_tsv()),
            ("by_type.tsv", self.by_type_tsv()),
            ("summary.txt", self.summary()),
            ("efficiency.tsv", self.efficiency_tsv()),
        ] {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}
