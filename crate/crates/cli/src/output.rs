//! Report files. Everything written here is a pure function of the inputs, so
//! re-running a command reproduces its outputs byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.path(name);
        fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.text(name, &body)
    }

    pub fn jsonl<'a, T: Serialize + 'a>(
        &mut self,
        name: &str,
        records: impl IntoIterator<Item = &'a T>,
    ) -> Result<(), CliError> {
        let mut body = String::new();
        for r in records {
            body.push_str(&serde_json::to_string(r)?);
            body.push('\n');
        }
        self.text(name, &body)
    }

    pub fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let to_err = |e: csv::Error| CliError::Core(e.into());
        w.write_record(header).map_err(to_err)?;
        for row in rows {
            w.write_record(&row).map_err(to_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::io(&self.path(name), e.into_error()))?;
        self.text(
            name,
            &String::from_utf8(bytes).expect("csv output is UTF-8"),
        )
    }
}

/// `value` with fixed decimals, or `n/a` when undefined.
pub fn fmt_opt(value: Option<f64>, decimals: usize) -> String {
    value.map_or_else(|| "n/a".to_string(), |v| format!("{v:.decimals$}"))
}

/// Left-aligned plain-text table with a dashed rule under the header.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&line(rule.iter().map(String::as_str).collect()));
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_columns_align() {
        let t = render_table(
            &["name", "value"],
            &[
                vec!["a".into(), "1.000".into()],
                vec!["longer".into(), "n/a".into()],
            ],
        );
        assert_eq!(
            t,
            "name    value\n------  -----\na       1.000\nlonger  n/a\n"
        );
    }

    #[test]
    fn undefined_values_render_as_na() {
        assert_eq!(fmt_opt(None, 3), "n/a");
        assert_eq!(fmt_opt(Some(0.5), 3), "0.500");
    }

    #[test]
    fn files_are_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::create(&dir.path().join("nested")).unwrap();
        out.json("a.json", &vec![1, 2]).unwrap();
        out.csv("b.csv", &["x", "y"], vec![vec!["1".into(), "a,b".into()]])
            .unwrap();
        assert_eq!(out.written(), ["a.json", "b.csv"]);
        let csv = std::fs::read_to_string(out.path("b.csv")).unwrap();
        assert_eq!(csv, "x,y\n1,\"a,b\"\n");
    }
}
