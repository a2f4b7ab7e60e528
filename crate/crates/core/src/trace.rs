//! Per-iteration selection records, stored one JSON object per line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::QualityState;

/// Scores and selection of one quality-assessment step for frame `t`,
/// iteration `n` (both 0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub n: usize,
    #[serde(rename = "S_c")]
    pub confidence: Vec<f64>,
    pub sim: Vec<f64>,
    #[serde(rename = "R")]
    pub regularizer: Vec<f64>,
    #[serde(rename = "S_r")]
    pub relevance: Vec<f64>,
    #[serde(rename = "S")]
    pub score: Vec<f64>,
    #[serde(rename = "I")]
    pub selected: Vec<usize>,
    #[serde(rename = "S_bar")]
    pub weights: Vec<f64>,
    pub t_k: Vec<u32>,
}

impl TraceRecord {
    pub fn new(t: usize, n: usize, quality: QualityState, selected: Vec<usize>, weights: Vec<f64>) -> Self {
        Self {
            t,
            n,
            confidence: quality.confidence,
            sim: quality.similarity,
            regularizer: quality.regularizer,
            relevance: quality.relevance,
            score: quality.total,
            selected,
            weights,
            t_k: quality.counters,
        }
    }
}

pub fn to_jsonl(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("trace record serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl(text: &str) -> Result<Vec<TraceRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::from(e).context(format!("trace line {}", i + 1))))
        .collect()
}

pub fn write_trace(path: impl AsRef<Path>, records: &[TraceRecord]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_jsonl(records)).map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(&text).map_err(|e| e.context(path.display().to_string()))
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

fn join_f(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
}

/// One line per record: frame, iteration, selected frames and their weights.
pub fn to_table(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>4} {:>4}  {:<24} weights", "t", "n", "selected");
    for r in records {
        let _ = writeln!(
            out,
            "{:>4} {:>4}  {:<24} {}",
            r.t,
            r.n,
            join(&r.selected),
            join_f(&r.weights)
        );
    }
    out
}

/// Long-form CSV: one row per (record, memory frame).
pub fn to_csv(records: &[TraceRecord]) -> String {
    let mut out = String::from("t,n,frame,S_c,sim,R,S_r,S,selected,S_bar,t_k\n");
    for r in records {
        for i in 0..r.score.len() {
            let pos = r.selected.iter().position(|&s| s == i);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.n,
                i,
                r.confidence[i],
                r.sim[i],
                r.regularizer[i],
                r.relevance[i],
                r.score[i],
                u8::from(pos.is_some()),
                pos.map_or(0.0, |p| r.weights[p]),
                r.t_k[i]
            );
        }
    }
    out
}
