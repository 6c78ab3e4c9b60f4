use std::fmt;

/// Where a token or construct sits in the source: 1-based line and column
/// (columns count characters), and its length in characters.
///
/// Spans never take part in equality, so two trees parsed from differently
/// formatted text compare equal when their content matches.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
    pub len: u32,
}

impl Span {
    pub fn new(line: u32, col: u32, len: u32) -> Self {
        Span { line, col, len }
    }

    /// Smallest span covering both, assuming `self` starts first on the same line.
    pub fn to(self, end: Span) -> Span {
        if end.line == self.line && end.col >= self.col {
            Span { len: end.col + end.len - self.col, ..self }
        } else {
            self
        }
    }

    /// Whether the position `(line, col)` lies inside this span.
    pub fn contains(&self, line: u32, col: u32) -> bool {
        line == self.line && col >= self.col && col < self.col + self.len.max(1)
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Code {
    Lexical,
    Syntax,
    Unresolved,
    Duplicate,
    ForbiddenTransition,
    DimensionMismatch,
    InvalidValue,
    Unsupported,
    DuplicateRun,
    PhantomOnly,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::Lexical => "E001",
            Code::Syntax => "E002",
            Code::Unresolved => "E003",
            Code::Duplicate => "E004",
            Code::ForbiddenTransition => "E005",
            Code::DimensionMismatch => "E006",
            Code::InvalidValue => "E007",
            Code::Unsupported => "E008",
            Code::DuplicateRun => "E009",
            Code::PhantomOnly => "W001",
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            Code::PhantomOnly => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: Code,
    pub message: String,
    pub line: u32,
    pub col: u32,
    pub len: u32,
    /// The full source line the diagnostic points into.
    pub snippet: String,
}

impl Diagnostic {
    pub fn new(code: Code, message: impl Into<String>, span: Span, source: &str) -> Self {
        let snippet = source
            .lines()
            .nth(span.line.saturating_sub(1) as usize)
            .unwrap_or("")
            .trim_end_matches('\r')
            .to_string();
        Diagnostic {
            severity: code.severity(),
            code,
            message: message.into(),
            line: span.line,
            col: span.col,
            len: span.len,
            snippet,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        writeln!(f, "{sev}[{}]: {}", self.code.as_str(), self.message)?;
        let gutter = self.line.to_string().len();
        writeln!(f, "{:gutter$}--> {}:{}", "", self.line, self.col)?;
        writeln!(f, "{:gutter$} |", "")?;
        writeln!(f, "{} | {}", self.line, self.snippet)?;
        let pad: String = self
            .snippet
            .chars()
            .take(self.col.saturating_sub(1) as usize)
            .map(|c| if c == '\t' { '\t' } else { ' ' })
            .collect();
        write!(f, "{:gutter$} | {pad}{}", "", "^".repeat(self.len.max(1) as usize))
    }
}

/// Renders a batch of diagnostics, one block per entry.
pub fn render(diagnostics: &[Diagnostic]) -> String {
    diagnostics.iter().map(|d| format!("{d}\n")).collect::<Vec<_>>().join("\n")
}
