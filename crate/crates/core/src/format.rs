//! Shared pieces of the line-oriented text formats.

use std::str::FromStr;

use crate::error::{parse_err, Result};

/// Reals are written with 17 significant digits so they round-trip exactly.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn parse_reals(line: &str, line_no: usize) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| parse_err(line_no, format!("not a real number: {tok:?}")))
        })
        .collect()
}

/// `key = value` header lines followed by a body of data lines.
///
/// Blank lines and lines starting with `#` are skipped everywhere. Line
/// numbers are 1-based.
#[derive(Debug, Clone)]
pub(crate) struct Header {
    entries: Vec<(usize, String, String)>,
    body: Vec<(usize, String)>,
    last_line: usize,
}

impl Header {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut body = Vec::new();
        let mut last_line = 0;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            last_line = line_no;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) if body.is_empty() => {
                    entries.push((line_no, k.trim().to_string(), v.trim().to_string()));
                }
                Some(_) => return Err(parse_err(line_no, "header line after data lines")),
                None => body.push((line_no, line.to_string())),
            }
        }
        Ok(Self {
            entries,
            body,
            last_line,
        })
    }

    pub fn get(&self, key: &str) -> Result<(usize, &str)> {
        self.entries
            .iter()
            .find(|(_, k, _)| k == key)
            .map(|(l, _, v)| (*l, v.as_str()))
            .ok_or_else(|| parse_err(self.last_line, format!("missing header key `{key}`")))
    }

    pub fn get_parsed<T: FromStr>(&self, key: &str) -> Result<T> {
        let (line, value) = self.get(key)?;
        value
            .parse::<T>()
            .map_err(|_| parse_err(line, format!("bad value for `{key}`: {value:?}")))
    }

    pub fn body(&self) -> &[(usize, String)] {
        &self.body
    }

    pub fn last_line(&self) -> usize {
        self.last_line
    }
}
