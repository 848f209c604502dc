use serde::{Deserialize, Serialize};

use super::{HarnessError, Outcome};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowCounts {
    pub episodes: usize,
    pub success: usize,
    pub false_success: usize,
    pub collision: usize,
    pub max_steps: usize,
    pub protocol_error: usize,
}

impl RowCounts {
    pub fn add(&mut self, outcome: Outcome) {
        self.episodes += 1;
        *match outcome {
            Outcome::Success => &mut self.success,
            Outcome::FalseSuccess => &mut self.false_success,
            Outcome::Collision => &mut self.collision,
            Outcome::MaxStepsExceeded => &mut self.max_steps,
            Outcome::ProtocolError => &mut self.protocol_error,
        } += 1;
    }

    /// Report cells: achieved as `x/N`, then the failure counts with `--`
    /// for zero.
    pub fn cells(&self) -> [String; 5] {
        let dash = |n: usize| if n == 0 { "--".to_string() } else { n.to_string() };
        [
            format!("{}/{}", self.success, self.episodes),
            dash(self.collision),
            dash(self.max_steps),
            dash(self.false_success),
            dash(self.protocol_error),
        ]
    }
}

const CELL_NAMES: [&str; 5] = ["Ach.", "Coll.", "Steps", "F.Succ.", "Proto."];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    pub starting_room: String,
    pub query: String,
    /// One entry per pilot, in `BenchmarkReport::pilots` order.
    pub counts: Vec<RowCounts>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub pilots: Vec<String>,
    pub rows: Vec<ReportRow>,
}

impl BenchmarkReport {
    pub fn new(pilot: impl Into<String>) -> Self {
        BenchmarkReport {
            pilots: vec![pilot.into()],
            rows: Vec::new(),
        }
    }

    pub fn add_row(&mut self, starting_room: &str, query: &str) -> usize {
        self.rows.push(ReportRow {
            starting_room: starting_room.to_string(),
            query: query.to_string(),
            counts: vec![RowCounts::default(); self.pilots.len()],
        });
        self.rows.len() - 1
    }

    pub fn record(&mut self, row: usize, pilot: usize, outcome: Outcome) {
        self.rows[row].counts[pilot].add(outcome);
    }

    /// Places another report's pilots next to this one's. Both must list
    /// the same rows in the same order.
    pub fn merge(&mut self, other: &BenchmarkReport) -> Result<(), HarnessError> {
        let same = self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.starting_room == b.starting_room && a.query == b.query);
        if !same {
            return Err(HarnessError::Suite("reports list different rows".into()));
        }
        self.pilots.extend(other.pilots.iter().cloned());
        for (a, b) in self.rows.iter_mut().zip(&other.rows) {
            a.counts.extend(b.counts.iter().copied());
        }
        Ok(())
    }

    pub fn total(&self, pilot: usize) -> RowCounts {
        self.rows.iter().fold(RowCounts::default(), |mut acc, r| {
            let c = r.counts[pilot];
            acc.episodes += c.episodes;
            acc.success += c.success;
            acc.false_success += c.false_success;
            acc.collision += c.collision;
            acc.max_steps += c.max_steps;
            acc.protocol_error += c.protocol_error;
            acc
        })
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec!["Starting Room".to_string(), "Query".to_string()];
        for p in &self.pilots {
            h.extend(CELL_NAMES.iter().map(|c| format!("{p} {c}")));
        }
        h
    }

    fn cells(&self, row: &ReportRow, room: &str) -> Vec<String> {
        let mut out = vec![room.to_string(), row.query.clone()];
        for c in &row.counts {
            out.extend(c.cells());
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Markdown,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(format!("unknown report format `{s}` (markdown | csv)")),
        }
    }
}

/// Renders the report. Markdown shows each starting room once per group;
/// CSV repeats it on every row.
pub fn emit_report(report: &BenchmarkReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => {
            let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
            let header = report.header();
            let mut out = line(&header);
            out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
            let mut prev: Option<&str> = None;
            for row in &report.rows {
                let room = if prev == Some(row.starting_room.as_str()) {
                    ""
                } else {
                    &row.starting_room
                };
                out.push_str(&line(&report.cells(row, room)));
                prev = Some(&row.starting_room);
            }
            out
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(report.header()).expect("in-memory write");
            for row in &report.rows {
                w.write_record(report.cells(row, &row.starting_room))
                    .expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
        }
    }
}
