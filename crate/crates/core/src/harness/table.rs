use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{HimapError, Result};

/// Named numeric columns plus `key: value` metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub metadata: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, ..Default::default() }
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(HimapError::Dimension(format!(
                "row of {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.11e}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut table = ResultTable::default();
        let mut header = false;
        for (i, line) in text.lines().enumerate() {
            let bad = |msg: String| HimapError::SpecFile { line: i + 1, msg };
            if let Some(meta) = line.strip_prefix("# ") {
                let (k, v) = meta.split_once(": ").ok_or_else(|| bad("metadata line without ': '".into()))?;
                table.metadata.push((k.to_string(), v.to_string()));
            } else if !header {
                table.columns = if line.is_empty() { vec![] } else { line.split(',').map(str::to_string).collect() };
                header = true;
            } else {
                let row = line
                    .split(',')
                    .map(|c| c.parse::<f64>().map_err(|e| bad(format!("{c:?}: {e}"))))
                    .collect::<Result<Vec<f64>>>()?;
                table.push_row(row).map_err(|e| bad(e.to_string()))?;
            }
        }
        Ok(table)
    }
}

pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    fs::write(path, table.to_csv_string()).map_err(|e| HimapError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_table_has_header_and_metadata_only() {
        let mut t = ResultTable::new(vec!["a".into(), "b".into()]);
        t.metadata.push(("seed".into(), "7".into()));
        assert_eq!(t.to_csv_string(), "# seed: 7\na,b\n");
    }

    #[test]
    fn rejects_ragged_rows() {
        let mut t = ResultTable::new(vec!["a".into()]);
        assert!(t.push_row(vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let t = ResultTable::new(vec!["a".into()]);
        assert!(emit_csv(&t, Path::new("/nonexistent-dir/x/y.csv")).is_err());
    }

    #[test]
    fn file_output_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = ResultTable::new(vec!["x".into()]);
        t.push_row(vec![std::f64::consts::PI]).unwrap();
        let (p1, p2) = (dir.path().join("1.csv"), dir.path().join("2.csv"));
        emit_csv(&t, &p1).unwrap();
        emit_csv(&t, &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
        assert_eq!(fs::read_to_string(&p1).unwrap(), "x\n3.14159265359e0\n");
    }

    proptest! {
        #[test]
        fn round_trip_keeps_twelve_digits(values in proptest::collection::vec(-1e300f64..1e300, 1..20)) {
            let mut t = ResultTable::new((0..values.len()).map(|i| format!("c{i}")).collect());
            t.push_row(values.clone()).unwrap();
            t.push_row(vec![f64::NAN; values.len()]).unwrap();
            let back = ResultTable::parse_csv(&t.to_csv_string()).unwrap();
            prop_assert_eq!(&back.columns, &t.columns);
            for (x, y) in values.iter().zip(&back.rows[0]) {
                prop_assert!((x - y).abs() <= 5e-12 * x.abs());
                // Re-emitting the parsed value reproduces the same text.
                prop_assert_eq!(format!("{x:.11e}"), format!("{y:.11e}"));
            }
            prop_assert!(back.rows[1].iter().all(|v| v.is_nan()));
        }
    }
}
