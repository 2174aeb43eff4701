use std::io::BufRead;
use std::path::Path;

use super::Sample;
use crate::error::{Error, Result};

const FAITHFUL: &str = include_str!("../../data/faithful_waiting.txt");

/// Parse one value per line; blank lines and `#` comments are skipped.
/// For comma-separated rows only the first field is read.
pub fn parse_values<R: BufRead>(reader: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let field = t.split(',').next().unwrap_or("").trim();
        let v: f64 = field.parse().map_err(|_| Error::Load {
            line: i + 1,
            message: format!("not a number: {field:?}"),
        })?;
        if !v.is_finite() {
            return Err(Error::Load { line: i + 1, message: format!("non-finite value {field:?}") });
        }
        out.push(v);
    }
    Ok(out)
}

/// Load a sample from a file path, or from `builtin:faithful`.
pub fn load_sample(path: &str) -> Result<Sample> {
    if let Some(name) = path.strip_prefix("builtin:") {
        return match name {
            "faithful" => Ok(faithful_waiting()),
            _ => Err(Error::Argument(format!("unknown builtin dataset {name:?}"))),
        };
    }
    let file = std::fs::File::open(Path::new(path))?;
    Sample::new(parse_values(std::io::BufReader::new(file))?)
}

/// A CSV table: comma-separated, header row, LF line endings, numbers in
/// shortest round-trip form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|h| h.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push_nums(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|v| v.to_string()).collect());
    }

    /// A row led by a text label.
    pub fn push_labeled(&mut self, label: &str, values: &[f64]) {
        let mut row = vec![label.to_string()];
        row.extend(values.iter().map(|v| v.to_string()));
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Numeric column by header name (unparseable cells become NaN).
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r.get(i).and_then(|c| c.parse().ok()).unwrap_or(f64::NAN)).collect())
    }
}

/// Old Faithful waiting times between eruptions (minutes), n = 272.
pub fn faithful_waiting() -> Sample {
    Sample::new(parse_values(FAITHFUL.as_bytes()).expect("bundled data parses")).expect("bundled data valid")
}
