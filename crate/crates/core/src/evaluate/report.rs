//! Results tables (markdown, csv) and critical-difference plot data.
//!
//! Configuration ids of the form `model@noaug` and `model@statdiff` fill the
//! two augmentation columns of the same row. Any other id is a single row
//! whose value spans both columns.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::benchmark::{EvaluationReport, GroupMeans, Metric};
use super::stats::{rank_order, CdAnalysis};
use crate::{Error, Result};

pub const NO_AUG_SUFFIX: &str = "@noaug";
pub const STAT_DIFF_SUFFIX: &str = "@statdiff";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportStyle {
    Markdown,
    Csv,
    CdPlot,
}

impl FromStr for ReportStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markdown" | "md" => Ok(ReportStyle::Markdown),
            "csv" => Ok(ReportStyle::Csv),
            "cdplot" | "cd-plot" | "cd-plot-data" => Ok(ReportStyle::CdPlot),
            other => Err(Error::invalid(format!("unknown report style {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMeta {
    #[serde(default, rename = "type")]
    pub model_type: Option<String>,
    #[serde(default)]
    pub zero_shot: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowCells {
    Split {
        no_aug: Option<GroupMeans>,
        stat_diff: Option<GroupMeans>,
    },
    Merged(GroupMeans),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub model: String,
    pub meta: ModelMeta,
    pub cells: RowCells,
}

impl TableRow {
    /// Univariate, multivariate and overall, each as (no aug, stat+diff).
    pub fn values(&self) -> [Option<f64>; 6] {
        let (a, b) = match &self.cells {
            RowCells::Split { no_aug, stat_diff } => (*no_aug, *stat_diff),
            RowCells::Merged(m) => (Some(*m), Some(*m)),
        };
        let pick = |g: Option<GroupMeans>, f: fn(&GroupMeans) -> Option<f64>| g.as_ref().and_then(f);
        [
            pick(a, |g| g.univariate),
            pick(b, |g| g.univariate),
            pick(a, |g| g.multivariate),
            pick(b, |g| g.multivariate),
            pick(a, |g| g.overall),
            pick(b, |g| g.overall),
        ]
    }

    pub fn is_merged(&self) -> bool {
        matches!(self.cells, RowCells::Merged(_))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsTable {
    pub rows: Vec<TableRow>,
}

/// Half-up to two decimals. The small bias absorbs binary representation
/// error so that e.g. 0.805 rounds to 0.81.
pub fn round_half_up(x: f64) -> f64 {
    ((x * 100.0 + 0.5 + 1e-9).floor()) / 100.0
}

impl ResultsTable {
    /// Rows appear in first-seen order of their model name.
    pub fn from_means(entries: &[(String, GroupMeans)], meta: &BTreeMap<String, ModelMeta>) -> Result<Self> {
        let mut rows: Vec<TableRow> = Vec::new();
        for (id, means) in entries {
            let (model, slot) = if let Some(m) = id.strip_suffix(NO_AUG_SUFFIX) {
                (m, Some(false))
            } else if let Some(m) = id.strip_suffix(STAT_DIFF_SUFFIX) {
                (m, Some(true))
            } else {
                (id.as_str(), None)
            };
            let pos = rows.iter().position(|r| r.model == model);
            match (pos, slot) {
                (None, None) => rows.push(TableRow {
                    model: model.into(),
                    meta: meta.get(model).cloned().unwrap_or_default(),
                    cells: RowCells::Merged(*means),
                }),
                (None, Some(sd)) => rows.push(TableRow {
                    model: model.into(),
                    meta: meta.get(model).cloned().unwrap_or_default(),
                    cells: RowCells::Split {
                        no_aug: (!sd).then_some(*means),
                        stat_diff: sd.then_some(*means),
                    },
                }),
                (Some(i), Some(sd)) => match &mut rows[i].cells {
                    RowCells::Split { no_aug, stat_diff } => {
                        let slot = if sd { stat_diff } else { no_aug };
                        if slot.is_some() {
                            return Err(Error::invalid(format!("duplicate configuration {id:?}")));
                        }
                        *slot = Some(*means);
                    }
                    RowCells::Merged(_) => {
                        return Err(Error::invalid(format!("{model:?} is both a merged and a split row")))
                    }
                },
                (Some(_), None) => {
                    return Err(Error::invalid(format!("{model:?} appears more than once")));
                }
            }
        }
        Ok(Self { rows })
    }

    pub fn from_report(report: &EvaluationReport, metric: Metric, meta: &BTreeMap<String, ModelMeta>) -> Result<Self> {
        let entries: Vec<(String, GroupMeans)> =
            report.configs.iter().cloned().zip(report.means(metric).iter().copied()).collect();
        Self::from_means(&entries, meta)
    }

    /// Per-column maximum of the rounded values.
    pub fn column_max(&self) -> [Option<f64>; 6] {
        let mut best = [None; 6];
        for row in &self.rows {
            for (b, v) in best.iter_mut().zip(row.values()) {
                if let Some(v) = v.map(round_half_up) {
                    *b = Some(b.map_or(v, |x: f64| x.max(v)));
                }
            }
        }
        best
    }

    /// Bold flags per row and column. A merged row is bold in a group when
    /// it matches the maximum of either of that group's columns.
    pub fn bold(&self) -> Vec<[bool; 6]> {
        let max = self.column_max();
        self.rows
            .iter()
            .map(|row| {
                let v = row.values();
                let mut flags = [false; 6];
                for c in 0..6 {
                    flags[c] = matches!((v[c], max[c]), (Some(a), Some(m)) if round_half_up(a) == m);
                }
                if row.is_merged() {
                    for g in 0..3 {
                        let either = flags[2 * g] || flags[2 * g + 1];
                        flags[2 * g] = either;
                        flags[2 * g + 1] = either;
                    }
                }
                flags
            })
            .collect()
    }
}

const GROUPS: [&str; 3] = ["Univariate", "Multivariate", "Overall"];
const VARIANTS: [&str; 2] = ["No Aug", "Stat+Diff"];

fn zs(meta: &ModelMeta) -> &'static str {
    match meta.zero_shot {
        Some(true) => "yes",
        Some(false) => "no",
        None => "-",
    }
}

pub fn render_markdown(table: &ResultsTable) -> String {
    let mut out = String::from("| Model | Type | ZS |");
    for g in GROUPS {
        for v in VARIANTS {
            let _ = write!(out, " {g} {v} |");
        }
    }
    out.push_str("\n|---|---|---|");
    out.push_str(&"---:|".repeat(6));
    out.push('\n');
    for (row, bold) in table.rows.iter().zip(table.bold()) {
        let _ = write!(
            out,
            "| {} | {} | {} |",
            row.model,
            row.meta.model_type.as_deref().unwrap_or("-"),
            zs(&row.meta)
        );
        for (v, b) in row.values().iter().zip(bold) {
            match v {
                Some(v) if b => {
                    let _ = write!(out, " **{:.2}** |", round_half_up(*v));
                }
                Some(v) => {
                    let _ = write!(out, " {:.2} |", round_half_up(*v));
                }
                None => out.push_str(" - |"),
            }
        }
        out.push('\n');
    }
    out
}

pub const CSV_HEADER: [&str; 9] = [
    "model",
    "type",
    "zs",
    "univariate_no_aug",
    "univariate_stat_diff",
    "multivariate_no_aug",
    "multivariate_stat_diff",
    "overall_no_aug",
    "overall_stat_diff",
];

/// Unrounded values; empty fields for missing cells.
pub fn render_csv(table: &ResultsTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for row in &table.rows {
        let mut rec = vec![
            row.model.clone(),
            row.meta.model_type.clone().unwrap_or_default(),
            row.meta.zero_shot.map(|z| if z { "yes" } else { "no" }).unwrap_or_default().to_string(),
        ];
        rec.extend(row.values().iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
}

fn parse_cell(field: &str, line: usize) -> Result<Option<f64>> {
    let field = field.trim();
    if field.is_empty() || field == "-" {
        return Ok(None);
    }
    field.parse().map(Some).map_err(|_| Error::Parse {
        line,
        message: format!("invalid score {field:?}"),
    })
}

/// Reads a table in the [`CSV_HEADER`] layout. A row whose two columns agree
/// in every group becomes a merged row.
pub fn parse_table_csv(text: &str) -> Result<ResultsTable> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", CSV_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let v = (3..9).map(|c| parse_cell(&rec[c], line)).collect::<Result<Vec<_>>>()?;
        let meta = ModelMeta {
            model_type: Some(rec[1].to_string()).filter(|s| !s.is_empty() && s != "-"),
            zero_shot: match &rec[2] {
                "yes" | "true" => Some(true),
                "no" | "false" => Some(false),
                _ => None,
            },
        };
        let means = |off: usize| GroupMeans {
            univariate: v[off],
            multivariate: v[2 + off],
            overall: v[4 + off],
        };
        let cells = if (0..3).all(|g| v[2 * g] == v[2 * g + 1]) {
            RowCells::Merged(means(0))
        } else {
            RowCells::Split {
                no_aug: Some(means(0)),
                stat_diff: Some(means(1)),
            }
        };
        rows.push(TableRow {
            model: rec[0].to_string(),
            meta,
            cells,
        });
    }
    Ok(ResultsTable { rows })
}

/// Tab-separated plot data:
///
/// ```text
/// # cdplot v1
/// alpha   0.1
/// rank    <config>    <average rank>        (best first)
/// group   <low rank>  <high rank>  <config>...
/// ```
pub fn render_cdplot(a: &CdAnalysis) -> String {
    let mut out = String::from("# cdplot v1\n");
    let _ = writeln!(out, "alpha\t{}", a.alpha);
    for i in rank_order(&a.average_ranks) {
        let _ = writeln!(out, "rank\t{}\t{}", a.configs[i], a.average_ranks[i]);
    }
    for g in &a.groups {
        let lo = a.average_ranks[g[0]];
        let hi = a.average_ranks[*g.last().unwrap_or(&g[0])];
        let names: Vec<&str> = g.iter().map(|&i| a.configs[i].as_str()).collect();
        let _ = writeln!(out, "group\t{lo}\t{hi}\t{}", names.join("\t"));
    }
    out
}

pub fn render_report(
    report: &EvaluationReport,
    style: ReportStyle,
    metric: Metric,
    meta: &BTreeMap<String, ModelMeta>,
) -> Result<String> {
    match style {
        ReportStyle::Markdown => Ok(render_markdown(&ResultsTable::from_report(report, metric, meta)?)),
        ReportStyle::Csv => render_csv(&ResultsTable::from_report(report, metric, meta)?),
        ReportStyle::CdPlot => Ok(render_cdplot(&report.analysis)),
    }
}
