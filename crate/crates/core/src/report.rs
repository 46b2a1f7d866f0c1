//! Ranked recall-initiator tables, top-k firm and device counts, and
//! rendering to markdown, CSV, JSON and SVG bar charts.

use crate::aggregate::AggregatedGroup;
use crate::dataset::RecallRecord;
use crate::dbscan::ClusterSummary;
use crate::textprep::compare_labels;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TOP_K: usize = 10;
pub const UNSPECIFIED: &str = "(unspecified)";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("nothing to rank: input is empty")]
    Empty,
    #[error("unsupported report format {0:?} (expected markdown, csv, json or svg-bars)")]
    UnsupportedFormat(String),
}

/// A ranked row's subject: a single cluster label or the members of a group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EntryLabel {
    Label(String),
    Members(Vec<String>),
}

impl EntryLabel {
    fn parts(&self) -> &[String] {
        match self {
            EntryLabel::Label(l) => std::slice::from_ref(l),
            EntryLabel::Members(m) => m,
        }
    }

    /// `Label` as written, `Members` in list notation.
    pub fn display(&self) -> String {
        match self {
            EntryLabel::Label(l) => l.clone(),
            EntryLabel::Members(m) => {
                let quoted: Vec<String> = m.iter().map(|s| format!("'{s}'")).collect();
                format!("[{}]", quoted.join(", "))
            }
        }
    }
}

fn compare_entry_labels(a: &EntryLabel, b: &EntryLabel) -> Ordering {
    let (a, b) = (a.parts(), b.parts());
    for (x, y) in a.iter().zip(b) {
        match compare_labels(x, y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub rank: usize,
    pub label: EntryLabel,
    pub count: usize,
    pub share: f64,
}

/// Anything with a label and a case count.
pub trait Rankable {
    fn entry_label(&self) -> EntryLabel;
    fn case_count(&self) -> usize;
}

impl Rankable for ClusterSummary {
    fn entry_label(&self) -> EntryLabel {
        EntryLabel::Label(self.label.clone())
    }
    fn case_count(&self) -> usize {
        self.count
    }
}

impl Rankable for AggregatedGroup {
    fn entry_label(&self) -> EntryLabel {
        EntryLabel::Members(self.members.clone())
    }
    fn case_count(&self) -> usize {
        self.total_count
    }
}

/// Descending count, ties by label; shares are against the input's total.
pub fn rank_initiators<T: Rankable>(items: &[T]) -> Result<Vec<RankedEntry>, ReportError> {
    if items.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut rows: Vec<(EntryLabel, usize)> = items.iter().map(|i| (i.entry_label(), i.case_count())).collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| compare_entry_labels(&a.0, &b.0)));
    let total: usize = rows.iter().map(|r| r.1).sum();
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(i, (label, count))| RankedEntry {
            rank: i + 1,
            label,
            count,
            share: if total == 0 { 0.0 } else { count as f64 / total as f64 },
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedCount {
    pub rank: usize,
    pub name: String,
    pub count: usize,
}

fn top_by<F>(records: &[RecallRecord], k: usize, key: F) -> Vec<RankedCount>
where
    F: Fn(&RecallRecord) -> &str,
{
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for r in records {
        let name = key(r).trim();
        *counts
            .entry(if name.is_empty() { UNSPECIFIED } else { name })
            .or_insert(0) += 1;
    }
    let mut rows: Vec<(&str, usize)> = counts.into_iter().collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| compare_labels(a.0, b.0)));
    rows.into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (name, count))| RankedCount {
            rank: i + 1,
            name: name.to_string(),
            count,
        })
        .collect()
}

pub fn top_firms(records: &[RecallRecord], k: usize) -> Vec<RankedCount> {
    top_by(records, k, |r| &r.recalling_firm)
}

pub fn top_devices(records: &[RecallRecord], k: usize) -> Vec<RankedCount> {
    top_by(records, k, |r| &r.device_name)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    /// Records in the cleaned dataset.
    pub dataset_records: usize,
    /// Records that landed in a cluster; the share denominator.
    pub clustered_records: usize,
    pub noise_records: usize,
    pub cluster_count: usize,
    pub group_count: usize,
    /// Leading share with the dataset size as denominator instead.
    pub top_share_of_dataset: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportModel {
    pub schema_version: u32,
    pub top_k: usize,
    pub metadata: ReportMetadata,
    pub before: Vec<RankedEntry>,
    pub after: Vec<RankedEntry>,
    pub top_firms: Vec<RankedCount>,
    pub top_devices: Vec<RankedCount>,
}

impl Default for ReportModel {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            top_k: DEFAULT_TOP_K,
            metadata: ReportMetadata::default(),
            before: Vec::new(),
            after: Vec::new(),
            top_firms: Vec::new(),
            top_devices: Vec::new(),
        }
    }
}

impl ReportModel {
    pub fn build(
        records: &[RecallRecord],
        clusters: &[ClusterSummary],
        groups: &[AggregatedGroup],
        noise_records: usize,
        top_k: usize,
    ) -> Result<Self, ReportError> {
        let before = rank_initiators(clusters)?;
        let after = rank_initiators(groups)?;
        let clustered: usize = clusters.iter().map(|c| c.count).sum();
        let metadata = ReportMetadata {
            dataset_records: records.len(),
            clustered_records: clustered,
            noise_records,
            cluster_count: clusters.len(),
            group_count: groups.len(),
            top_share_of_dataset: (!records.is_empty()).then(|| before[0].count as f64 / records.len() as f64),
        };
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            top_k,
            metadata,
            before,
            after,
            top_firms: top_firms(records, top_k),
            top_devices: top_devices(records, top_k),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Markdown,
    Csv,
    Json,
    SvgBars,
}

impl Format {
    pub const ALL: [Format; 4] = [Format::Markdown, Format::Csv, Format::Json, Format::SvgBars];

    pub fn extension(self) -> &'static str {
        match self {
            Format::Markdown => "md",
            Format::Csv => "csv",
            Format::Json => "json",
            Format::SvgBars => "svg",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Format::Markdown => "markdown",
            Format::Csv => "csv",
            Format::Json => "json",
            Format::SvgBars => "svg-bars",
        }
    }
}

impl FromStr for Format {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(Format::Markdown),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg-bars" | "svg" => Ok(Format::SvgBars),
            other => Err(ReportError::UnsupportedFormat(other.to_string())),
        }
    }
}

pub fn render(model: &ReportModel, format: Format) -> Vec<u8> {
    match format {
        Format::Markdown => render_markdown(model).into_bytes(),
        Format::Csv => render_csv(model),
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(model).expect("report model serializes");
            out.push(b'\n');
            out
        }
        Format::SvgBars => render_svg(model).into_bytes(),
    }
}

fn md_cell(s: &str) -> String {
    s.replace('|', "\\|")
}

fn render_markdown(model: &ReportModel) -> String {
    let m = &model.metadata;
    let k = model.top_k;
    let mut out = String::new();
    out.push_str("# Recall initiator report\n\n");
    let _ = writeln!(out, "- Records in dataset: {}", m.dataset_records);
    let _ = writeln!(out, "- Records in clusters: {}", m.clustered_records);
    let _ = writeln!(out, "- Noise records: {}", m.noise_records);
    let _ = writeln!(out, "- Clusters: {}", m.cluster_count);
    let _ = writeln!(out, "- Aggregated groups: {}", m.group_count);
    if let (Some(top), Some(of_dataset)) = (model.before.first(), m.top_share_of_dataset) {
        let _ = writeln!(
            out,
            "- Leading initiator share: {:.1}% of clustered records, {:.1}% of dataset records",
            top.share * 100.0,
            of_dataset * 100.0
        );
    }

    let _ = writeln!(out, "\n## Top {k} recall reasons before and after aggregation\n");
    let _ = writeln!(out, "| Rank | Before aggregation | Count | After aggregation | Count |");
    out.push_str("|---:|---|---:|---|---:|\n");
    let rows = model.before.len().max(model.after.len()).min(k);
    for i in 0..rows {
        let cell = |v: &[RankedEntry]| match v.get(i) {
            Some(e) => (md_cell(&e.label.display()), e.count.to_string()),
            None => (String::new(), String::new()),
        };
        let (b, bc) = cell(&model.before);
        let (a, ac) = cell(&model.after);
        let _ = writeln!(out, "| {} | {b} | {bc} | {a} | {ac} |", i + 1);
    }

    for (title, entries) in [
        ("Recall initiators after clustering", &model.before),
        ("Recall initiators after aggregation", &model.after),
    ] {
        let _ = writeln!(out, "\n## {title}\n");
        out.push_str("| Rank | Recall initiator | Case number | Share |\n|---:|---|---:|---:|\n");
        for e in entries {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {:.1}% |",
                e.rank,
                md_cell(&e.label.display()),
                e.count,
                e.share * 100.0
            );
        }
    }

    for (title, rows) in [
        ("Top recalling firms", &model.top_firms),
        ("Top recalled devices", &model.top_devices),
    ] {
        let _ = writeln!(out, "\n## {title}\n");
        out.push_str("| Rank | Name | Recalls |\n|---:|---|---:|\n");
        for r in rows {
            let _ = writeln!(out, "| {} | {} | {} |", r.rank, md_cell(&r.name), r.count);
        }
    }
    out
}

fn render_csv(model: &ReportModel) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    let io = "writing to memory cannot fail";
    w.write_record(["table", "rank", "label", "count", "share"]).expect(io);
    for (table, entries) in [("clusters", &model.before), ("groups", &model.after)] {
        for e in entries {
            w.write_record([
                table.to_string(),
                e.rank.to_string(),
                e.label.parts().join("; "),
                e.count.to_string(),
                format!("{:.6}", e.share),
            ])
            .expect(io);
        }
    }
    for (table, rows) in [("firms", &model.top_firms), ("devices", &model.top_devices)] {
        for r in rows {
            w.write_record([table, &r.rank.to_string(), &r.name, &r.count.to_string(), ""])
                .expect(io);
        }
    }
    w.into_inner().expect(io)
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

const SVG_WIDTH: usize = 960;
const LABEL_WIDTH: usize = 420;
const BAR_HEIGHT: usize = 18;
const BAR_GAP: usize = 6;
const PANEL_HEADER: usize = 36;

fn svg_panel(out: &mut String, title: &str, entries: &[RankedEntry], k: usize, top: usize) -> usize {
    let shown = &entries[..entries.len().min(k)];
    let max = shown.iter().map(|e| e.count).max().unwrap_or(1).max(1);
    let bar_space = SVG_WIDTH - LABEL_WIDTH - 80;
    let _ = writeln!(
        out,
        r#"  <text x="10" y="{}" font-size="16" font-weight="bold">{}</text>"#,
        top + 22,
        xml_escape(title)
    );
    let mut y = top + PANEL_HEADER;
    for e in shown {
        let width = e.count * bar_space / max;
        let mid = y + BAR_HEIGHT / 2 + 4;
        let _ = writeln!(
            out,
            r#"  <text x="{}" y="{mid}" font-size="12" text-anchor="end">{}</text>"#,
            LABEL_WIDTH - 8,
            xml_escape(&e.label.display())
        );
        let _ = writeln!(
            out,
            r##"  <rect x="{LABEL_WIDTH}" y="{y}" width="{width}" height="{BAR_HEIGHT}" fill="#4C78A8"/>"##
        );
        let _ = writeln!(
            out,
            r#"  <text x="{}" y="{mid}" font-size="12">{}</text>"#,
            LABEL_WIDTH + width + 6,
            e.count
        );
        y += BAR_HEIGHT + BAR_GAP;
    }
    y
}

fn render_svg(model: &ReportModel) -> String {
    let k = model.top_k;
    let panel_height = |n: usize| PANEL_HEADER + n.min(k) * (BAR_HEIGHT + BAR_GAP) + 12;
    let height = panel_height(model.before.len()) + panel_height(model.after.len());
    let mut body = String::new();
    let mid = svg_panel(
        &mut body,
        &format!("Top {k} recall initiators after clustering"),
        &model.before,
        k,
        0,
    );
    svg_panel(
        &mut body,
        &format!("Top {k} recall initiators after aggregation"),
        &model.after,
        k,
        mid + 12,
    );
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_WIDTH}\" height=\"{height}\" \
         viewBox=\"0 0 {SVG_WIDTH} {height}\" font-family=\"sans-serif\">\n\
         {body}</svg>\n"
    )
}
