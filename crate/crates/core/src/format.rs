//! Shared plumbing for the line-oriented text formats.
//!
//! Every format starts with a `#<kind> v1` header line. Blank lines and lines
//! beginning with `//` are ignored; tokens are whitespace separated.

use std::fmt;
use std::io::BufRead;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct FormatError {
    pub kind: &'static str,
    /// 1-based; 0 when the error is not tied to a single line.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(
                f,
                "{} file, line {}: {}",
                self.kind, self.line, self.message
            )
        } else {
            write!(f, "{} file: {}", self.kind, self.message)
        }
    }
}

pub(crate) struct LineReader<R> {
    inner: std::io::Lines<R>,
    kind: &'static str,
    line: usize,
    buf: String,
}

impl<R: BufRead> LineReader<R> {
    pub fn new(source: R, kind: &'static str) -> Self {
        LineReader {
            inner: source.lines(),
            kind,
            line: 0,
            buf: String::new(),
        }
    }

    pub fn error_at(&self, line: usize, message: impl Into<String>) -> FormatError {
        FormatError {
            kind: self.kind,
            line,
            message: message.into(),
        }
    }

    fn next_raw(&mut self) -> Result<Option<usize>, FormatError> {
        for l in self.inner.by_ref() {
            self.line += 1;
            let l = l.map_err(|e| FormatError {
                kind: self.kind,
                line: self.line,
                message: e.to_string(),
            })?;
            let trimmed = l.trim();
            if trimmed.is_empty() || trimmed.starts_with("//") {
                continue;
            }
            self.buf = trimmed.to_string();
            return Ok(Some(self.line));
        }
        Ok(None)
    }

    pub fn expect_header(&mut self, header: &str) -> Result<(), FormatError> {
        match self.next_raw()? {
            Some(_) if self.buf == header => Ok(()),
            Some(n) => Err(self.error_at(
                n,
                format!("expected header `{header}`, found `{}`", self.buf),
            )),
            None => Err(self.error_at(0, format!("empty input; expected header `{header}`"))),
        }
    }

    /// Next non-blank line split into tokens.
    pub fn next_tokens(&mut self) -> Result<Option<(usize, Vec<String>)>, FormatError> {
        match self.next_raw()? {
            Some(n) => Ok(Some((
                n,
                self.buf.split_whitespace().map(str::to_string).collect(),
            ))),
            None => Ok(None),
        }
    }
}
