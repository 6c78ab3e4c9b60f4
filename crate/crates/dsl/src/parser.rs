use std::collections::HashMap;

use redsim_core::dynamics::EdgeKind;

use crate::ast::*;
use crate::diagnostic::{Code, Diagnostic, Span};
use crate::lexer::{lex, Token, TokenKind};

/// Parses a scenario file and checks that every name it uses is declared.
///
/// Lexical and syntax errors stop at the first problem; name resolution
/// reports every unresolved or duplicate name it finds.
pub fn parse(source: &str) -> Result<ScenarioSpec, Vec<Diagnostic>> {
    let tokens = lex(source).map_err(|d| vec![d])?;
    let spec = Parser { tokens, pos: 0, source }.file().map_err(|d| vec![d])?;
    let diags = resolve(&spec, source);
    if diags.is_empty() {
        Ok(spec)
    } else {
        Err(diags)
    }
}

type PResult<T> = Result<T, Diagnostic>;

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    source: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, code: Code, msg: impl Into<String>, span: Span) -> Diagnostic {
        Diagnostic::new(code, msg, span, self.source)
    }

    fn unexpected(&self, expected: &str) -> Diagnostic {
        let t = self.peek();
        self.error(Code::Syntax, format!("expected {expected}, found {}", t.kind.describe()), t.span)
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<Span> {
        if self.peek().kind == kind {
            Ok(self.next().span)
        } else {
            Err(self.unexpected(&kind.describe()))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek().kind, TokenKind::Keyword(k) if k == kw)
    }

    fn keyword(&mut self, kw: &str) -> PResult<Span> {
        if self.at_keyword(kw) {
            Ok(self.next().span)
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        match &self.peek().kind {
            TokenKind::Ident(name) => {
                let name = name.clone();
                Ok(Ident { name, span: self.next().span })
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    fn int(&mut self) -> PResult<Int> {
        match self.peek().kind {
            TokenKind::Int(value) => Ok(Int { value, span: self.next().span }),
            _ => Err(self.unexpected("an integer")),
        }
    }

    fn num(&mut self) -> PResult<Num> {
        match self.peek().kind {
            TokenKind::Int(v) => Ok(Num { value: v as f64, span: self.next().span }),
            TokenKind::Num(value) => Ok(Num { value, span: self.next().span }),
            _ => Err(self.unexpected("a number")),
        }
    }

    fn interval(&mut self) -> PResult<(Num, Num)> {
        self.expect(TokenKind::LBracket)?;
        let a = self.num()?;
        self.expect(TokenKind::Comma)?;
        let b = self.num()?;
        self.expect(TokenKind::RBracket)?;
        Ok((a, b))
    }

    /// `{ name: value, ... }` with an optional trailing comma. `field` parses
    /// the value of each name listed in `known`; returns the closing brace.
    fn fields(
        &mut self,
        known: &[&str],
        mut field: impl FnMut(&mut Self, &Ident) -> PResult<()>,
    ) -> PResult<Span> {
        self.expect(TokenKind::LBrace)?;
        let mut seen: Vec<String> = Vec::new();
        while self.peek().kind != TokenKind::RBrace {
            let name = match &self.peek().kind {
                TokenKind::Ident(_) => self.ident()?,
                _ => return Err(self.unexpected("a field name or `}`")),
            };
            if !known.contains(&name.name.as_str()) {
                return Err(self.error(
                    Code::Syntax,
                    format!("unknown field `{}`, expected one of: {}", name.name, known.join(", ")),
                    name.span,
                ));
            }
            if seen.contains(&name.name) {
                return Err(self.error(Code::Syntax, format!("field `{}` is given twice", name.name), name.span));
            }
            seen.push(name.name.clone());
            self.expect(TokenKind::Colon)?;
            field(self, &name)?;
            if self.peek().kind == TokenKind::Comma {
                self.next();
            } else if self.peek().kind != TokenKind::RBrace {
                return Err(self.unexpected("`,` or `}`"));
            }
        }
        Ok(self.next().span)
    }

    fn missing(&self, field: &str, span: Span) -> Diagnostic {
        self.error(Code::Syntax, format!("missing field `{field}`"), span)
    }

    fn file(mut self) -> PResult<ScenarioSpec> {
        let mut spec = ScenarioSpec::default();
        if self.at_keyword("scenario") {
            self.next();
            // Kind names may coincide with keywords, as `drift` does.
            let kind = match self.peek().kind.clone() {
                TokenKind::Keyword(k) => Ident { name: k.to_string(), span: self.next().span },
                _ => self.ident()?,
            };
            let parsed = kind.name.parse().map_err(|e: String| self.error(Code::InvalidValue, e, kind.span))?;
            spec.header = Some(Header { kind: parsed, span: kind.span });
        }
        loop {
            let tok = self.peek().clone();
            match tok.kind {
                TokenKind::Eof => return Ok(spec),
                TokenKind::Keyword(kw @ ("observer" | "detector" | "wave")) => {
                    if !spec.clauses.is_empty() || spec.run.is_some() {
                        return Err(self.error(
                            Code::Syntax,
                            format!("`{kw}` declarations must come before interactions and clauses"),
                            tok.span,
                        ));
                    }
                    spec.decls.push(self.decl()?);
                }
                TokenKind::Keyword(kw @ ("interaction" | "observe" | "drift")) => {
                    if spec.run.is_some() {
                        return Err(self.error(Code::Syntax, format!("`{kw}` after the run clause"), tok.span));
                    }
                    spec.clauses.push(self.clause()?);
                }
                TokenKind::Keyword("run") => {
                    if spec.run.is_some() {
                        return Err(self.error(Code::DuplicateRun, "a scenario has at most one run clause", tok.span));
                    }
                    spec.run = Some(self.run()?);
                }
                TokenKind::Keyword("scenario") => {
                    return Err(self.error(Code::Syntax, "the scenario header must be the first item", tok.span));
                }
                _ => return Err(self.unexpected("a declaration or clause")),
            }
        }
    }

    fn decl(&mut self) -> PResult<Decl> {
        let kw = self.next();
        let name = self.ident()?;
        match kw.kind {
            TokenKind::Keyword("observer") => Ok(Decl::Observer { name }),
            TokenKind::Keyword("detector") => {
                let mut areas = None;
                let end = self.fields(&["areas"], |p, _| {
                    areas = Some(p.int()?);
                    Ok(())
                })?;
                let areas = areas.ok_or_else(|| self.missing("areas", end))?;
                Ok(Decl::Detector { name, areas })
            }
            _ => {
                let mut particles = None;
                let end = self.fields(&["particles"], |p, _| {
                    particles = Some(p.int()?);
                    Ok(())
                })?;
                let particles = particles.ok_or_else(|| self.missing("particles", end))?;
                Ok(Decl::Wave { name, particles })
            }
        }
    }

    fn clause(&mut self) -> PResult<Clause> {
        let kw = self.next();
        match kw.kind {
            TokenKind::Keyword("interaction") => self.interaction(kw.span).map(Clause::Interaction),
            TokenKind::Keyword("observe") => {
                let observer = self.ident()?;
                let detector = self.ident()?;
                let (mut at, mut area) = (None, None);
                let end = self.fields(&["at", "area"], |p, f| {
                    match f.name.as_str() {
                        "at" => at = Some(p.num()?),
                        _ => area = Some(p.int()?),
                    }
                    Ok(())
                })?;
                Ok(Clause::Observe(Observe { observer, detector, at, area, span: kw.span.to(end) }))
            }
            _ => {
                let observer = self.ident()?;
                let (mut rate, mut neighbors, mut window, mut into) = (None, None, None, None);
                let end = self.fields(&["rate", "neighbors", "window", "into"], |p, f| {
                    match f.name.as_str() {
                        "rate" => rate = Some(p.num()?),
                        "neighbors" => neighbors = Some(p.int()?),
                        "window" => window = Some(p.interval()?),
                        _ => into = Some(p.ident()?),
                    }
                    Ok(())
                })?;
                Ok(Clause::Drift(Drift {
                    observer,
                    rate: rate.ok_or_else(|| self.missing("rate", end))?,
                    neighbors: neighbors.ok_or_else(|| self.missing("neighbors", end))?,
                    window,
                    into,
                    span: kw.span.to(end),
                }))
            }
        }
    }

    fn interaction(&mut self, start: Span) -> PResult<Interaction> {
        let kind = match self.peek().kind {
            TokenKind::Keyword("primary") => EdgeKind::Primary,
            TokenKind::Keyword("physiological") => EdgeKind::Physiological,
            TokenKind::Keyword("drift") => EdgeKind::Drift,
            _ => return Err(self.unexpected("`primary`, `physiological` or `drift`")),
        };
        self.next();
        let source = self.endpoint()?;
        self.expect(TokenKind::Arrow)?;
        let target = self.endpoint()?;
        let (mut rate, mut window, mut latency, mut area) = (None, None, None, None);
        let end = self.fields(&["rate", "window", "latency", "area"], |p, f| {
            match f.name.as_str() {
                "rate" => rate = Some(p.rate()?),
                "window" => window = Some(p.interval()?),
                "latency" => latency = Some(p.num()?),
                _ => area = Some(p.int()?),
            }
            Ok(())
        })?;
        Ok(Interaction {
            kind,
            source,
            target,
            rate: rate.ok_or_else(|| self.missing("rate", end))?,
            window,
            latency,
            area,
            span: start.to(end),
        })
    }

    fn rate(&mut self) -> PResult<RateSpec> {
        let start = self.peek().span;
        if self.at_keyword("const") {
            self.next();
            let k = self.num()?;
            Ok(RateSpec::Const { k, span: start.to(k.span) })
        } else if self.at_keyword("pulse") {
            self.next();
            let k = self.num()?;
            self.word("at")?;
            let center = self.num()?;
            self.word("width")?;
            let width = self.num()?;
            Ok(RateSpec::Pulse { k, center, width, span: start.to(width.span) })
        } else {
            Err(self.unexpected("`const` or `pulse`"))
        }
    }

    /// A contextual word such as `at` in `pulse 1 at 3 width 2`.
    fn word(&mut self, w: &str) -> PResult<()> {
        match &self.peek().kind {
            TokenKind::Ident(s) if s == w => {
                self.next();
                Ok(())
            }
            _ => Err(self.unexpected(&format!("`{w}`"))),
        }
    }

    fn endpoint(&mut self) -> PResult<Endpoint> {
        if self.peek().kind != TokenKind::LBracket {
            return match self.peek().kind {
                TokenKind::Ident(_) => Ok(Endpoint::Name(self.ident()?)),
                _ => Err(self.unexpected("a name or a label literal")),
            };
        }
        let start = self.next().span;
        let mut factors = Vec::new();
        while self.peek().kind != TokenKind::RBracket {
            let name = match self.peek().kind {
                TokenKind::Ident(_) => self.ident()?,
                _ => return Err(self.unexpected("a factor or `]`")),
            };
            self.expect(TokenKind::LParen)?;
            let mut args = Vec::new();
            loop {
                let arg = match &self.peek().kind {
                    TokenKind::Int(_) => Arg::Int(self.int()?),
                    TokenKind::Ident(_) => Arg::Word(self.ident()?),
                    _ => return Err(self.unexpected("a count or a brain state")),
                };
                args.push(arg);
                if self.peek().kind == TokenKind::Comma {
                    self.next();
                } else {
                    break;
                }
            }
            let end = self.expect(TokenKind::RParen)?;
            factors.push(FactorLit { span: name.span.to(end), name, args });
        }
        let end = self.next().span;
        Ok(Endpoint::Label(LabelLit { factors, span: start.to(end) }))
    }

    fn run(&mut self) -> PResult<RunClause> {
        let start = self.keyword("run")?;
        let mut run = RunClause::default();
        let end = self.fields(&["seed", "runs", "dt", "horizon", "scope"], |p, f| {
            match f.name.as_str() {
                "seed" => run.seed = Some(p.int()?),
                "runs" => run.runs = Some(p.int()?),
                "dt" => run.dt = Some(p.num()?),
                "horizon" => run.horizon = Some(p.num()?),
                _ => {
                    let w = p.ident()?;
                    let scope = w.name.parse().map_err(|e: String| p.error(Code::InvalidValue, e, w.span))?;
                    run.scope = Some((scope, w.span));
                }
            }
            Ok(())
        })?;
        run.span = start.to(end);
        Ok(run)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Role {
    Wave,
    Detector,
    Observer,
}

impl Role {
    fn name(self) -> &'static str {
        match self {
            Role::Wave => "wave",
            Role::Detector => "detector",
            Role::Observer => "observer",
        }
    }
}

/// Checks declarations for duplicates and every reference for a matching
/// declaration, in source order.
fn resolve(spec: &ScenarioSpec, source: &str) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut table: HashMap<&str, Role> = HashMap::new();
    for d in &spec.decls {
        let role = match d {
            Decl::Observer { .. } => Role::Observer,
            Decl::Detector { .. } => Role::Detector,
            Decl::Wave { .. } => Role::Wave,
        };
        let name = d.name();
        if table.insert(&name.name, role).is_some() {
            diags.push(Diagnostic::new(
                Code::Duplicate,
                format!("`{}` is declared more than once", name.name),
                name.span,
                source,
            ));
        }
    }
    let mut check = |id: &Ident, want: Option<Role>| match (table.get(id.name.as_str()), want) {
        (None, _) => diags.push(Diagnostic::new(
            Code::Unresolved,
            format!("unresolved identifier `{}`", id.name),
            id.span,
            source,
        )),
        (Some(&got), Some(want)) if got != want => diags.push(Diagnostic::new(
            Code::Unresolved,
            format!("`{}` is a {}, expected a {}", id.name, got.name(), want.name()),
            id.span,
            source,
        )),
        _ => {}
    };
    for c in &spec.clauses {
        match c {
            Clause::Interaction(i) => {
                for ep in [&i.source, &i.target] {
                    match ep {
                        Endpoint::Name(id) => check(id, None),
                        Endpoint::Label(l) => l.factors.iter().for_each(|f| check(&f.name, None)),
                    }
                }
            }
            Clause::Observe(o) => {
                check(&o.observer, Some(Role::Observer));
                check(&o.detector, Some(Role::Detector));
            }
            Clause::Drift(d) => check(&d.observer, Some(Role::Observer)),
        }
    }
    diags
}
