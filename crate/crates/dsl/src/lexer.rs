use crate::diagnostic::{Code, Diagnostic, Span};

pub const KEYWORDS: &[&str] = &[
    "scenario",
    "observer",
    "detector",
    "wave",
    "interaction",
    "observe",
    "drift",
    "run",
    "primary",
    "physiological",
    "const",
    "pulse",
];

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Keyword(&'static str),
    Int(u64),
    Num(f64),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Colon,
    Arrow,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Keyword(k) => format!("keyword `{k}`"),
            TokenKind::Int(i) => format!("integer `{i}`"),
            TokenKind::Num(n) => format!("number `{n}`"),
            TokenKind::LBrace => "`{`".into(),
            TokenKind::RBrace => "`}`".into(),
            TokenKind::LBracket => "`[`".into(),
            TokenKind::RBracket => "`]`".into(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Comma => "`,`".into(),
            TokenKind::Colon => "`:`".into(),
            TokenKind::Arrow => "`->`".into(),
            TokenKind::Eof => "end of file".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Splits the source into tokens, ending with [`TokenKind::Eof`]. Stops at
/// the first character that cannot start a token.
pub fn lex(source: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut cur = Cursor { chars: source.chars().peekable(), line: 1, col: 1 };
    let mut tokens = Vec::new();
    loop {
        while let Some(c) = cur.peek() {
            if c == '#' {
                while cur.peek().is_some_and(|c| c != '\n') {
                    cur.bump();
                }
            } else if c.is_whitespace() {
                cur.bump();
            } else {
                break;
            }
        }
        let (line, col) = (cur.line, cur.col);
        let Some(c) = cur.bump() else {
            tokens.push(Token { kind: TokenKind::Eof, span: Span::new(line, col, 1) });
            return Ok(tokens);
        };
        let single = |kind| Token { kind, span: Span::new(line, col, 1) };
        let token = match c {
            '{' => single(TokenKind::LBrace),
            '}' => single(TokenKind::RBrace),
            '[' => single(TokenKind::LBracket),
            ']' => single(TokenKind::RBracket),
            '(' => single(TokenKind::LParen),
            ')' => single(TokenKind::RParen),
            ',' => single(TokenKind::Comma),
            ':' => single(TokenKind::Colon),
            '-' if cur.peek() == Some('>') => {
                cur.bump();
                Token { kind: TokenKind::Arrow, span: Span::new(line, col, 2) }
            }
            '-' if cur.peek().is_some_and(|c| c.is_ascii_digit()) => number(&mut cur, c, line, col, source)?,
            c if c.is_ascii_digit() => number(&mut cur, c, line, col, source)?,
            c if is_ident_start(c) => {
                let mut text = String::from(c);
                while let Some(n) = cur.peek().filter(|&n| is_ident_continue(n)) {
                    text.push(n);
                    cur.bump();
                }
                let len = text.chars().count() as u32;
                let kind = match KEYWORDS.iter().find(|k| **k == text) {
                    Some(k) => TokenKind::Keyword(k),
                    None => TokenKind::Ident(text),
                };
                Token { kind, span: Span::new(line, col, len) }
            }
            other => {
                let shown = if other.is_control() { format!("{:?}", other) } else { other.to_string() };
                return Err(Diagnostic::new(
                    Code::Lexical,
                    format!("unexpected character `{shown}`"),
                    Span::new(line, col, 1),
                    source,
                ));
            }
        };
        tokens.push(token);
    }
}

/// Lexes a number whose first character (a digit or `-`) was already consumed.
fn number(cur: &mut Cursor<'_>, first: char, line: u32, col: u32, source: &str) -> Result<Token, Diagnostic> {
    let negative = first == '-';
    let mut text = String::from(first);
    let mut is_float = false;
    let digits = |cur: &mut Cursor<'_>, text: &mut String| {
        let mut n = 0;
        while let Some(d) = cur.peek().filter(|d| d.is_ascii_digit()) {
            text.push(d);
            cur.bump();
            n += 1;
        }
        n
    };
    digits(cur, &mut text);
    let bad = |cur: &Cursor<'_>, msg: &str, text: &str| {
        let len = (cur.col.max(col + 1) - col).max(text.chars().count() as u32);
        Diagnostic::new(Code::Lexical, msg, Span::new(line, col, len.max(1)), source)
    };
    if cur.peek() == Some('.') {
        cur.bump();
        text.push('.');
        is_float = true;
        if digits(cur, &mut text) == 0 {
            return Err(bad(cur, "expected digits after the decimal point", &text));
        }
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        cur.bump();
        text.push('e');
        is_float = true;
        if let Some(s) = cur.peek().filter(|s| *s == '+' || *s == '-') {
            text.push(s);
            cur.bump();
        }
        if digits(cur, &mut text) == 0 {
            return Err(bad(cur, "expected digits in the exponent", &text));
        }
    }
    if cur.peek().is_some_and(is_ident_start) {
        let mut len = text.chars().count() as u32;
        while cur.peek().is_some_and(is_ident_continue) {
            cur.bump();
            len += 1;
        }
        return Err(Diagnostic::new(
            Code::Lexical,
            "numbers take no unit suffix",
            Span::new(line, col, len),
            source,
        ));
    }
    let len = text.chars().count() as u32;
    let span = Span::new(line, col, len);
    if !is_float && !negative {
        return match text.parse::<u64>() {
            Ok(v) => Ok(Token { kind: TokenKind::Int(v), span }),
            Err(_) => Err(Diagnostic::new(Code::Lexical, "integer literal out of range", span, source)),
        };
    }
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Token { kind: TokenKind::Num(v), span }),
        _ => Err(Diagnostic::new(Code::Lexical, "number out of range", span, source)),
    }
}
