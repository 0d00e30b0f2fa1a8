use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::ModalitySet;

/// Accuracy grid: one row per modality set, one column per model or
/// protocol. Cells hold fractions in `[0, 1]`; `None` renders as `--`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<(ModalitySet, Vec<Option<f64>>)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableStyle {
    Csv,
    Text,
    Markdown,
}

impl FromStr for TableStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableStyle::Csv),
            "text" | "txt" => Ok(TableStyle::Text),
            "markdown" | "md" => Ok(TableStyle::Markdown),
            other => Err(Error::InvalidArgument(format!("unknown table style '{other}'"))),
        }
    }
}

impl ResultTable {
    pub fn new(columns: Vec<String>) -> Self {
        ResultTable {
            columns,
            rows: Vec::new(),
        }
    }

    /// Sets a cell, adding the row or column when missing.
    pub fn set(&mut self, modality: ModalitySet, column: &str, accuracy: f64) {
        let col = match self.columns.iter().position(|c| c == column) {
            Some(i) => i,
            None => {
                self.columns.push(column.to_string());
                for (_, cells) in &mut self.rows {
                    cells.push(None);
                }
                self.columns.len() - 1
            }
        };
        let width = self.columns.len();
        let row = match self.rows.iter().position(|(m, _)| *m == modality) {
            Some(i) => i,
            None => {
                self.rows.push((modality, vec![None; width]));
                self.rows.sort_by_key(|(m, _)| m.rank());
                self.rows.iter().position(|(m, _)| *m == modality).expect("inserted")
            }
        };
        self.rows[row].1[col] = Some(accuracy);
    }

    pub fn get(&self, modality: ModalitySet, column: &str) -> Option<f64> {
        let col = self.columns.iter().position(|c| c == column)?;
        self.rows.iter().find(|(m, _)| *m == modality)?.1[col]
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "--".to_string(), |a| format!("{:.1}", a * 100.0))
}

/// Rows come out in canonical order A, V, T, T+A, T+V, A+V, T+A+V with
/// accuracies as percentages to one decimal.
pub fn render_table(table: &ResultTable, style: TableStyle) -> String {
    let mut rows: Vec<&(ModalitySet, Vec<Option<f64>>)> = table.rows.iter().collect();
    rows.sort_by_key(|(m, _)| m.rank());
    let header: Vec<String> = std::iter::once("Modality".to_string())
        .chain(table.columns.iter().cloned())
        .collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(m, cells)| {
            std::iter::once(m.to_string())
                .chain(cells.iter().map(|&c| cell(c)))
                .collect()
        })
        .collect();
    let mut out = String::new();
    match style {
        TableStyle::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&header).expect("in-memory write");
            for r in &body {
                w.write_record(r).expect("in-memory write");
            }
            out = String::from_utf8(w.into_inner().expect("flush")).expect("utf-8");
        }
        TableStyle::Text => {
            let widths: Vec<usize> = (0..header.len())
                .map(|i| {
                    std::iter::once(&header)
                        .chain(&body)
                        .map(|r| r[i].chars().count())
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            for r in std::iter::once(&header).chain(&body) {
                let line: Vec<String> = r
                    .iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(i, (s, &w))| if i == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                    .collect();
                out.push_str(line.join("  ").trim_end());
                out.push('\n');
            }
        }
        TableStyle::Markdown => {
            out.push_str(&format!("| {} |\n", header.join(" | ")));
            let rule: Vec<&str> = header
                .iter()
                .enumerate()
                .map(|(i, _)| if i == 0 { "---" } else { "---:" })
                .collect();
            out.push_str(&format!("| {} |\n", rule.join(" | ")));
            for r in &body {
                out.push_str(&format!("| {} |\n", r.join(" | ")));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_csv_has_two_lines() {
        let mut t = ResultTable::new(vec!["SVM".into()]);
        t.set(ModalitySet::TAV, "SVM", 0.7159);
        let s = render_table(&t, TableStyle::Csv);
        assert_eq!(s, "Modality,SVM\nT + A + V,71.6\n");
    }

    #[test]
    fn rows_sorted_and_missing_cells_dashed() {
        let mut t = ResultTable::new(vec!["SVM".into(), "bc-LSTM".into()]);
        t.set(ModalitySet::TAV, "SVM", 0.5);
        t.set(ModalitySet::A, "bc-LSTM", 0.25);
        let md = render_table(&t, TableStyle::Markdown);
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines[0], "| Modality | SVM | bc-LSTM |");
        assert_eq!(lines[2], "| A | -- | 25.0 |");
        assert_eq!(lines[3], "| T + A + V | 50.0 | -- |");
    }

    #[test]
    fn new_column_extends_rows() {
        let mut t = ResultTable::new(vec![]);
        t.set(ModalitySet::T, "x", 0.1);
        t.set(ModalitySet::T, "y", 0.2);
        assert_eq!(t.get(ModalitySet::T, "y"), Some(0.2));
        assert_eq!(t.rows[0].1.len(), 2);
    }
}
