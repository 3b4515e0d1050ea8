//! Report rendering. Every printed number is the stored full-precision value
//! rounded half-up to two decimals by [`format_percent`].

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{HarnessError, RunOutput};
use crate::metric::{mean_percent, prodrop_delta, RunResult};

/// Aspects left out of the pronoun-drop comparison: their prompts carry no
/// subject pronoun to drop.
pub const PRODROP_EXCLUDED_ASPECTS: &[&str] = &["literature"];

const WESTERN_THRESHOLD: f64 = 50.0;
const MIN_MARK: &str = "*";
const WESTERN_MARK: &str = "†";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    PlainTable,
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain_table" => Ok(Self::PlainTable),
            "csv" => Ok(Self::Csv),
            "markdown" => Ok(Self::Markdown),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

/// Round half away from zero to two decimals, working on the shortest
/// decimal representation of `value` so that e.g. 1.005 prints as 1.01.
pub fn format_percent(value: f64) -> String {
    if !value.is_finite() {
        return value.to_string();
    }
    let repr = format!("{}", value.abs());
    let (int_part, frac_part) = repr.split_once('.').unwrap_or((&repr, ""));
    let mut digits: Vec<u8> = int_part
        .bytes()
        .chain(frac_part.bytes().chain(std::iter::repeat(b'0')).take(2))
        .map(|b| b - b'0')
        .collect();
    if frac_part.as_bytes().get(2).is_some_and(|&d| d >= b'5') {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let split = digits.len() - 2;
    let text: String = digits.iter().map(|d| char::from(b'0' + d)).collect();
    let (whole, cents) = text.split_at(split);
    let negative = value < 0.0 && digits.iter().any(|&d| d != 0);
    format!("{}{whole}.{cents}", if negative { "-" } else { "" })
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.header).expect("in-memory write");
                for row in &self.rows {
                    w.write_record(row).expect("in-memory write");
                }
                String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
            }
            ReportFormat::Markdown => {
                let mut out = String::new();
                let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
                out.push_str(&line(&self.header));
                let rule: Vec<String> = (0..self.header.len())
                    .map(|i| if i == 0 { "---".into() } else { "---:".into() })
                    .collect();
                out.push_str(&line(&rule));
                for row in &self.rows {
                    out.push_str(&line(row));
                }
                out
            }
            ReportFormat::PlainTable => {
                let width = |i: usize| {
                    std::iter::once(&self.header)
                        .chain(&self.rows)
                        .map(|r| r[i].chars().count())
                        .max()
                        .unwrap_or(0)
                };
                let widths: Vec<usize> = (0..self.header.len()).map(width).collect();
                let mut out = String::new();
                for row in std::iter::once(&self.header).chain(&self.rows) {
                    let cells: Vec<String> = row
                        .iter()
                        .zip(&widths)
                        .enumerate()
                        .map(|(i, (cell, &w))| {
                            let pad = " ".repeat(w - cell.chars().count());
                            if i == 0 {
                                format!("{cell}{pad}")
                            } else {
                                format!("{pad}{cell}")
                            }
                        })
                        .collect();
                    out.push_str(cells.join("  ").trim_end());
                    out.push('\n');
                }
                out
            }
        }
    }
}

fn aspect_set(r: &RunResult) -> BTreeSet<&str> {
    r.aspect_ids().into_iter().collect()
}

fn check_same_aspects(a: &RunResult, b: &RunResult) -> Result<(), HarnessError> {
    if aspect_set(a) != aspect_set(b) {
        return Err(HarnessError::AspectSetMismatch(
            a.aspect_ids().iter().map(|s| s.to_string()).collect(),
            b.aspect_ids().iter().map(|s| s.to_string()).collect(),
        ));
    }
    Ok(())
}

/// One row per model, one column per aspect plus `Avg`.
///
/// The lowest value of each column is marked (bold in markdown, `*` in the
/// plain table) and values of 50 or more carry `†`. CSV holds bare numbers.
pub fn render_report(results: &[RunResult], format: ReportFormat) -> Result<String, HarnessError> {
    let first = results.first().ok_or(HarnessError::EmptyResults)?;
    for r in &results[1..] {
        check_same_aspects(first, r)?;
    }
    let aspects = first.aspect_ids();
    let values: Vec<Vec<f64>> = results
        .iter()
        .map(|r| {
            aspects
                .iter()
                .map(|id| r.aspect(id).expect("checked aspect set").cbs_percent)
                .chain(std::iter::once(r.average_cbs))
                .collect()
        })
        .collect();
    let column_min: Vec<f64> = (0..=aspects.len())
        .map(|c| values.iter().map(|row| row[c]).fold(f64::INFINITY, f64::min))
        .collect();

    let mut header = vec!["Model".to_string()];
    header.extend(aspects.iter().map(|s| s.to_string()));
    header.push("Avg".into());
    let rows = results
        .iter()
        .zip(&values)
        .map(|(r, row)| {
            let mut cells = vec![r.model_id.clone()];
            cells.extend(row.iter().zip(&column_min).map(|(&v, &min)| {
                let text = format_percent(v);
                let western = if v >= WESTERN_THRESHOLD { WESTERN_MARK } else { "" };
                match format {
                    ReportFormat::Csv => text,
                    ReportFormat::Markdown if v == min => format!("**{text}**{western}"),
                    ReportFormat::PlainTable if v == min => format!("{text}{MIN_MARK}{western}"),
                    _ => format!("{text}{western}"),
                }
            }));
            cells
        })
        .collect();
    let mut out = Table { header, rows }.render(format);
    if format != ReportFormat::Csv {
        let min_note = match format {
            ReportFormat::Markdown => "bold",
            _ => MIN_MARK,
        };
        let _ = write!(
            out,
            "\n{min_note}: lowest score in column; {WESTERN_MARK}: score >= 50, Western targets preferred\n"
        );
    }
    Ok(out)
}

/// Average CBS with and without subject pronouns for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub model_id: String,
    pub english_like: f64,
    pub prodrop: f64,
    /// `english_like - prodrop`.
    pub delta: f64,
}

impl DeltaRow {
    pub fn new(model_id: impl Into<String>, english_like: f64, prodrop: f64) -> Self {
        Self {
            model_id: model_id.into(),
            english_like,
            prodrop,
            delta: prodrop_delta(english_like, prodrop),
        }
    }
}

fn prodrop_average(r: &RunResult) -> Result<f64, HarnessError> {
    Ok(mean_percent(
        r.aspect_results
            .iter()
            .filter(|a| !PRODROP_EXCLUDED_ASPECTS.contains(&a.aspect_id.as_str()))
            .map(|a| a.cbs_percent),
    )?)
}

/// Compare an English-like run with a pronoun-drop run of the same model.
/// Averages are recomputed without the excluded aspects.
pub fn delta_row(english_like: &RunResult, prodrop: &RunResult) -> Result<DeltaRow, HarnessError> {
    if english_like.model_id != prodrop.model_id {
        return Err(HarnessError::Config(format!(
            "delta rows need one model, got {} and {}",
            english_like.model_id, prodrop.model_id
        )));
    }
    check_same_aspects(english_like, prodrop)?;
    Ok(DeltaRow::new(
        english_like.model_id.clone(),
        prodrop_average(english_like)?,
        prodrop_average(prodrop)?,
    ))
}

pub fn render_delta_report(rows: &[DeltaRow], format: ReportFormat) -> Result<String, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let header = ["Model", "CBS_Eng-like", "CBS_ProDrop", "Δ"].map(String::from).to_vec();
    let rows = rows
        .iter()
        .map(|r| {
            vec![
                r.model_id.clone(),
                format_percent(r.english_like),
                format_percent(r.prodrop),
                format_percent(r.delta),
            ]
        })
        .collect();
    Ok(Table { header, rows }.render(format))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub aspect_id: String,
    pub a: f64,
    pub b: f64,
    /// `b - a`.
    pub difference: f64,
}

/// Per-aspect and average differences between two runs over one corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub corpus_version: String,
    pub label_a: String,
    pub label_b: String,
    pub rows: Vec<ComparisonRow>,
    pub average: ComparisonRow,
}

pub fn compare_runs(a: &RunOutput, b: &RunOutput) -> Result<Comparison, HarnessError> {
    if a.meta.corpus_version != b.meta.corpus_version {
        return Err(HarnessError::CorpusVersionMismatch(
            a.meta.corpus_version.clone(),
            b.meta.corpus_version.clone(),
        ));
    }
    check_same_aspects(&a.result, &b.result)?;
    let row = |id: &str, x: f64, y: f64| ComparisonRow {
        aspect_id: id.to_string(),
        a: x,
        b: y,
        difference: y - x,
    };
    let rows = a
        .result
        .aspect_results
        .iter()
        .map(|ra| {
            let rb = b.result.aspect(&ra.aspect_id).expect("checked aspect set");
            row(&ra.aspect_id, ra.cbs_percent, rb.cbs_percent)
        })
        .collect();
    let label = |o: &RunOutput| format!("{} [{}]", o.meta.model_id, o.meta.transform_label);
    Ok(Comparison {
        corpus_version: a.meta.corpus_version.clone(),
        label_a: label(a),
        label_b: label(b),
        rows,
        average: row("Avg", a.result.average_cbs, b.result.average_cbs),
    })
}

pub fn render_comparison(c: &Comparison, format: ReportFormat) -> String {
    let header = vec![
        "Aspect".to_string(),
        c.label_a.clone(),
        c.label_b.clone(),
        "Δ (b - a)".to_string(),
    ];
    let rows = c
        .rows
        .iter()
        .chain(std::iter::once(&c.average))
        .map(|r| {
            vec![
                r.aspect_id.clone(),
                format_percent(r.a),
                format_percent(r.b),
                format_percent(r.difference),
            ]
        })
        .collect();
    Table { header, rows }.render(format)
}
