//! Report serialization and the evaluation harness: detection reports,
//! oracle loading, instance matching, and precision/recall/F1 metrics.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::pipeline::CommitAnalysis;
use crate::rule_engine::{RefactoringInstance, RefactoringType};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitReport {
    pub commit: String,
    pub refactorings: Vec<RefactoringInstance>,
    #[serde(default)]
    pub diagnostics: Vec<String>,
    pub timing_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub commits: Vec<CommitReport>,
}

impl Default for DetectionReport {
    fn default() -> Self {
        DetectionReport {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            commits: Vec::new(),
        }
    }
}

/// Stable ordering for report output: by type, then before locator, then
/// after locator.
fn instance_sort_key(i: &RefactoringInstance) -> impl Ord {
    let loc = |l: &Option<crate::rule_engine::ElementLocator>| {
        l.as_ref()
            .map(|l| {
                let (line, col) = l
                    .span
                    .map(|s| (s.start.line, s.start.col))
                    .unwrap_or((0, 0));
                (l.file.clone(), line, col, l.qualified_name.clone())
            })
            .unwrap_or_default()
    };
    (i.refactoring_type, loc(&i.before), loc(&i.after))
}

impl DetectionReport {
    pub fn push_commit(&mut self, analysis: &CommitAnalysis) {
        let mut refactorings = analysis.instances();
        refactorings.sort_by_key(instance_sort_key);
        self.commits.push(CommitReport {
            commit: analysis.commit.clone(),
            refactorings,
            diagnostics: analysis
                .diagnostics
                .iter()
                .map(|(path, msg)| format!("{path}: {msg}"))
                .collect(),
            timing_ms: analysis.timing.total_ms(),
        });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// All instances across commits, for evaluation.
    pub fn all_instances(&self) -> Vec<&RefactoringInstance> {
        self.commits.iter().flat_map(|c| &c.refactorings).collect()
    }

    /// CSV form, one row per instance, same columns as the oracle format.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["commit", "type", "before_file", "before_name", "after_file", "after_name"])
            .unwrap();
        for c in &self.commits {
            for r in &c.refactorings {
                let loc = |l: &Option<crate::rule_engine::ElementLocator>| {
                    l.as_ref()
                        .map(|l| (l.file.clone(), l.qualified_name.clone()))
                        .unwrap_or_default()
                };
                let (bf, bn) = loc(&r.before);
                let (af, an) = loc(&r.after);
                w.write_record([&c.commit, r.refactoring_type.name(), &bf, &bn, &af, &an])
                    .unwrap();
            }
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

/// One labeled ground-truth refactoring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleEntry {
    #[serde(default)]
    pub commit: String,
    #[serde(rename = "type")]
    pub refactoring_type: RefactoringType,
    #[serde(default)]
    pub before_file: String,
    #[serde(default)]
    pub before_name: String,
    #[serde(default)]
    pub after_file: String,
    #[serde(default)]
    pub after_name: String,
}

#[derive(Debug)]
pub enum OracleError {
    Io(std::io::Error),
    Parse(String),
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::Io(e) => write!(f, "cannot read oracle file: {e}"),
            OracleError::Parse(m) => write!(f, "cannot parse oracle file: {m}"),
        }
    }
}

impl std::error::Error for OracleError {}

/// Load an oracle from a JSON array or a CSV file with the header
/// `commit,type,before_file,before_name,after_file,after_name`.
pub fn load_oracle(path: &Path) -> Result<Vec<OracleEntry>, OracleError> {
    let text = std::fs::read_to_string(path).map_err(OracleError::Io)?;
    parse_oracle(&text)
}

pub fn parse_oracle(text: &str) -> Result<Vec<OracleEntry>, OracleError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed).map_err(|e| OracleError::Parse(e.to_string()));
    }
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.deserialize::<OracleEntry>() {
        out.push(rec.map_err(|e| OracleError::Parse(e.to_string()))?);
    }
    Ok(out)
}

/// True/false positive/negative counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn locator_fields(l: &Option<crate::rule_engine::ElementLocator>) -> (&str, &str) {
    l.as_ref()
        .map(|l| (l.file.as_str(), l.qualified_name.as_str()))
        .unwrap_or(("", ""))
}

/// Greedy one-to-one matching of detected instances against the oracle, in
/// report order. Matching is by element identity: type plus before/after
/// (file, qualified name); a missing locator counts as empty fields.
pub fn match_instances(
    detected: &[&RefactoringInstance],
    oracle: &[OracleEntry],
) -> BTreeMap<RefactoringType, Counts> {
    let mut counts: BTreeMap<RefactoringType, Counts> = BTreeMap::new();
    let mut used = vec![false; oracle.len()];
    for inst in detected {
        let (bf, bn) = locator_fields(&inst.before);
        let (af, an) = locator_fields(&inst.after);
        let hit = oracle.iter().enumerate().find(|(k, o)| {
            !used[*k]
                && o.refactoring_type == inst.refactoring_type
                && (o.commit.is_empty() || o.commit == inst.commit)
                && o.before_file == bf
                && o.before_name == bn
                && o.after_file == af
                && o.after_name == an
        });
        let c = counts.entry(inst.refactoring_type).or_default();
        match hit {
            Some((k, _)) => {
                used[k] = true;
                c.tp += 1;
            }
            None => c.fp += 1,
        }
    }
    for (k, o) in oracle.iter().enumerate() {
        if !used[k] {
            counts.entry(o.refactoring_type).or_default().fn_ += 1;
        }
    }
    counts
}

/// Metrics for one refactoring type (or the micro-averaged total). Values
/// are exact in memory; serialization rounds to 4 decimals for stable output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeMetrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Undefined (serialized as null) when nothing was detected.
    #[serde(serialize_with = "ser_round4_opt")]
    pub precision: Option<f64>,
    /// Undefined (serialized as null) when the oracle is empty for the type.
    #[serde(serialize_with = "ser_round4_opt")]
    pub recall: Option<f64>,
    #[serde(serialize_with = "ser_round4")]
    pub f1: f64,
}

fn ser_round4<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round4(*v))
}

fn ser_round4_opt<S: serde::Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => s.serialize_some(&round4(*x)),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_type: BTreeMap<String, TypeMetrics>,
    pub total: TypeMetrics,
}

fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

fn metrics_of(c: Counts) -> TypeMetrics {
    let precision = (c.tp + c.fp > 0).then(|| c.tp as f64 / (c.tp + c.fp) as f64);
    let recall = (c.tp + c.fn_ > 0).then(|| c.tp as f64 / (c.tp + c.fn_) as f64);
    let p = precision.unwrap_or(0.0);
    let r = recall.unwrap_or(0.0);
    let f1 = if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    };
    TypeMetrics {
        tp: c.tp,
        fp: c.fp,
        fn_: c.fn_,
        precision,
        recall,
        f1,
    }
}

/// Per-type precision/recall/F1 plus micro-averaged totals (counts are
/// summed across types before dividing).
pub fn compute_metrics(counts: &BTreeMap<RefactoringType, Counts>) -> MetricsReport {
    let mut per_type = BTreeMap::new();
    let mut total = Counts::default();
    for (t, c) in counts {
        total.tp += c.tp;
        total.fp += c.fp;
        total.fn_ += c.fn_;
        per_type.insert(t.name().to_string(), metrics_of(*c));
    }
    MetricsReport {
        per_type,
        total: metrics_of(total),
    }
}
