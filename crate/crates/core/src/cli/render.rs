//! Pure rendering of a [`Report`] into markdown or CSV tables.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::report::{Indicator, Report};
use crate::stats::CiRelation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "markdown" | "md" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            other => Err(RenderError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("unknown report format '{0}' (expected markdown or csv)")]
    UnknownFormat(String),
    #[error("report has no entries; refusing to render empty tables")]
    EmptyReport,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    /// File stem for CSV output.
    pub name: String,
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_markdown(&self) -> String {
        let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
        let mut out = format!("### {}\n\n", self.title);
        out += &line(&self.header);
        out += &format!("|{}\n", "---|".repeat(self.header.len()));
        for r in &self.rows {
            out += &line(r);
        }
        out
    }
}

fn percent(rate: f64) -> String {
    format!("{:.0}%", rate * 100.0)
}

fn fraction(rate: f64) -> String {
    format!("{rate:.2}")
}

pub fn format_p_value(p: f64) -> String {
    if p == 0.0 {
        "0".into()
    } else if p >= 0.001 {
        let decimals = (2 - p.log10().floor() as i32).max(0) as usize;
        format!("{p:.decimals$}")
    } else {
        format!("{p:.2e}")
    }
}

fn relation(r: Option<CiRelation>) -> String {
    match r {
        None => "-".into(),
        Some(CiRelation::Overlapping) => "Overlapping".into(),
        Some(CiRelation::Disjoint) => "Disjoint".into(),
    }
}

fn strings<const N: usize>(cells: [&str; N]) -> Vec<String> {
    cells.iter().map(|s| s.to_string()).collect()
}

/// Every table of the report. `as_percent` selects integer percentages
/// (markdown) over two-decimal fractions (CSV) for rate columns.
pub fn build_tables(report: &Report, as_percent: bool) -> Result<Vec<Table>, RenderError> {
    if report.per_generator.is_empty() {
        return Err(RenderError::EmptyReport);
    }
    let rate = if as_percent { percent } else { fraction };
    let entries = &report.per_generator;
    let level = format!("{:.0}%", report.settings.confidence_level * 100.0);
    let mut tables = vec![
        Table {
            name: "consensus_categories".into(),
            title: "Consensus categories".into(),
            header: strings(["Model", "Full Agreement", "Partial Agreement", "No Agreement"]),
            rows: entries
                .iter()
                .map(|e| {
                    let s = &e.summary;
                    vec![
                        e.generator_model.to_string(),
                        rate(s.full_rate),
                        rate(s.partial_rate),
                        rate(s.none_rate),
                    ]
                })
                .collect(),
        },
        Table {
            name: "majority_reliability".into(),
            title: "Majority vote and reliability".into(),
            header: strings(["Model", "Majority Vote", "Reliability"]),
            rows: entries
                .iter()
                .map(|e| {
                    vec![
                        e.generator_model.to_string(),
                        rate(e.summary.majority_vote_rate),
                        rate(e.summary.reliability_rate),
                    ]
                })
                .collect(),
        },
    ];
    for indicator in Indicator::ALL {
        tables.push(Table {
            name: format!("ci_{}", serde_plain(indicator)),
            title: format!("{level} bootstrap confidence intervals ({})", indicator.label()),
            header: strings(["Model", "Lower Bound", "Upper Bound"]),
            rows: entries
                .iter()
                .map(|e| {
                    let ci = e.ci(indicator);
                    vec![
                        e.generator_model.to_string(),
                        format!("{:.2}", ci.lower),
                        format!("{:.2}", ci.upper),
                    ]
                })
                .collect(),
        });
    }
    let mut chi_header = vec!["Model".to_string()];
    chi_header.extend(entries.iter().map(|e| e.generator_model.to_string()));
    let mut stat_row = vec!["Chi-square statistic".to_string()];
    stat_row.extend(entries.iter().map(|e| format!("{:.2}", e.chi_square.statistic)));
    let mut p_row = vec!["p-value".to_string()];
    p_row.extend(entries.iter().map(|e| format_p_value(e.chi_square.p_value)));
    tables.push(Table {
        name: "chi_square".into(),
        title: "Chi-square uniformity test of pooled answers".into(),
        header: chi_header,
        rows: vec![stat_row, p_row],
    });
    tables.push(Table {
        name: "kappa".into(),
        title: "Fleiss' kappa".into(),
        header: strings(["Model", "Kappa Value", "Interpretation"]),
        rows: entries
            .iter()
            .map(|e| {
                vec![
                    e.generator_model.to_string(),
                    format!("{:.4}", e.kappa.kappa),
                    e.kappa.interpretation.label().to_string(),
                ]
            })
            .collect(),
    });
    for cmp in &report.pairwise_ci_comparisons {
        let mut header = vec!["Model".to_string()];
        header.extend(cmp.models.iter().map(|m| m.to_string()));
        tables.push(Table {
            name: format!("pairwise_{}", serde_plain(cmp.indicator)),
            title: format!("Pairwise CI comparison ({})", cmp.indicator.label()),
            header,
            rows: cmp
                .models
                .iter()
                .zip(&cmp.relations)
                .map(|(m, row)| {
                    std::iter::once(m.to_string())
                        .chain(row.iter().map(|&r| relation(r)))
                        .collect()
                })
                .collect(),
        });
    }
    Ok(tables)
}

fn serde_plain(indicator: Indicator) -> &'static str {
    match indicator {
        Indicator::FullAgreement => "full_agreement",
        Indicator::Reliability => "reliability",
    }
}

pub fn render_markdown(report: &Report) -> Result<String, RenderError> {
    let tables = build_tables(report, true)?;
    let mut out = format!(
        "# Consensus report\n\nGenerated by {} from {} dataset(s); bootstrap B = {}, seed = {}.\n",
        report.artifact_version,
        report.per_generator.len(),
        report.settings.bootstrap_b,
        report.settings.seed
    );
    let dropped: usize = report.per_generator.iter().map(|e| e.dropped_incomplete).sum();
    if dropped > 0 {
        out += &format!("\n{dropped} incomplete question(s) were dropped before analysis.\n");
    }
    for t in tables {
        out.push('\n');
        out += &t.to_markdown();
    }
    Ok(out)
}

/// Writes one `<table>.csv` per table into `dir`; returns the paths in table order.
pub fn write_csv(report: &Report, dir: &Path) -> Result<Vec<PathBuf>, RenderError> {
    let tables = build_tables(report, false)?;
    std::fs::create_dir_all(dir).map_err(|source| RenderError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths = Vec::with_capacity(tables.len());
    for t in tables {
        let path = dir.join(format!("{}.csv", t.name));
        let csv_err = |source| RenderError::Csv {
            path: path.clone(),
            source,
        };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(&t.header).map_err(csv_err)?;
        for r in &t.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(|source| RenderError::Io {
            path: path.clone(),
            source,
        })?;
        paths.push(path);
    }
    Ok(paths)
}
