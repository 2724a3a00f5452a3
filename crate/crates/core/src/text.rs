// Line-oriented text helpers shared by the checkpoint formats.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::str::FromStr;

use crate::error::{Error, Result};

pub(crate) struct Lines<'a> {
    inner: core::iter::Enumerate<core::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            line: 0,
        }
    }

    pub(crate) fn err(&self, reason: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            reason: reason.into(),
        }
    }

    /// Next non-empty line, split on whitespace.
    pub(crate) fn next_fields(&mut self) -> Result<Vec<&'a str>> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Ok(t.split_whitespace().collect());
            }
        }
        Err(Error::Parse {
            line: self.line + 1,
            reason: "unexpected end of input".into(),
        })
    }

    /// Next line, which must begin with `key`; returns the remaining fields.
    pub(crate) fn expect(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let fields = self.next_fields()?;
        if fields.first() != Some(&key) {
            return Err(self.err(format!("expected `{key}`, found `{}`", fields.join(" "))));
        }
        Ok(fields[1..].to_vec())
    }

    pub(crate) fn parse<T: FromStr>(&self, field: Option<&&str>) -> Result<T> {
        let s = field.ok_or_else(|| self.err("missing field"))?;
        s.parse::<T>()
            .map_err(|_| self.err(format!("cannot parse `{s}`")))
    }

    /// Parses the first field of the next line, which must begin with `key`.
    pub(crate) fn value<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let fields = self.expect(key)?;
        self.parse(fields.first())
    }

    /// Parses every field of the next line, which must begin with `key`.
    pub(crate) fn values<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        let fields = self.expect(key)?;
        self.parse_all(&fields)
    }

    pub(crate) fn parse_all<T: FromStr>(&self, fields: &[&str]) -> Result<Vec<T>> {
        fields.iter().map(|f| self.parse(Some(f))).collect()
    }
}

pub(crate) fn push_values(out: &mut String, key: &str, values: &[f64]) {
    use core::fmt::Write;
    out.push_str(key);
    for v in values {
        let _ = write!(out, " {v:?}");
    }
    out.push('\n');
}
