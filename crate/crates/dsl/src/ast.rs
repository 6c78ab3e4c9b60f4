//! Syntax tree of a scenario file. Every node keeps the span it was parsed
//! from; spans never affect equality.

use redsim_core::dynamics::EdgeKind;
use redsim_core::engine::TriggerScope;
use redsim_core::ScenarioKind;

use crate::diagnostic::Span;

#[derive(Debug, Clone, PartialEq)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Int {
    pub value: u64,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num {
    pub value: f64,
    pub span: Span,
}

impl Ident {
    pub fn new(name: impl Into<String>) -> Self {
        Ident { name: name.into(), span: Span::default() }
    }
}

impl Int {
    pub fn new(value: u64) -> Self {
        Int { value, span: Span::default() }
    }
}

impl Num {
    pub fn new(value: f64) -> Self {
        Num { value, span: Span::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioSpec {
    pub header: Option<Header>,
    pub decls: Vec<Decl>,
    pub clauses: Vec<Clause>,
    pub run: Option<RunClause>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub kind: ScenarioKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    Observer { name: Ident },
    Detector { name: Ident, areas: Int },
    Wave { name: Ident, particles: Int },
}

impl Decl {
    pub fn name(&self) -> &Ident {
        match self {
            Decl::Observer { name } | Decl::Detector { name, .. } | Decl::Wave { name, .. } => name,
        }
    }

    pub fn what(&self) -> &'static str {
        match self {
            Decl::Observer { .. } => "observer",
            Decl::Detector { .. } => "detector",
            Decl::Wave { .. } => "wave",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Clause {
    Interaction(Interaction),
    Observe(Observe),
    Drift(Drift),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub kind: EdgeKind,
    pub source: Endpoint,
    pub target: Endpoint,
    pub rate: RateSpec,
    pub window: Option<(Num, Num)>,
    pub latency: Option<Num>,
    pub area: Option<Int>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Endpoint {
    Name(Ident),
    Label(LabelLit),
}

impl Endpoint {
    pub fn span(&self) -> Span {
        match self {
            Endpoint::Name(i) => i.span,
            Endpoint::Label(l) => l.span,
        }
    }
}

/// `[psi(1) D(0) alice(b0, conscious)]`
#[derive(Debug, Clone, PartialEq)]
pub struct LabelLit {
    pub factors: Vec<FactorLit>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorLit {
    pub name: Ident,
    pub args: Vec<Arg>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    Int(Int),
    Word(Ident),
}

impl Arg {
    pub fn span(&self) -> Span {
        match self {
            Arg::Int(i) => i.span,
            Arg::Word(w) => w.span,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RateSpec {
    Const { k: Num, span: Span },
    Pulse { k: Num, center: Num, width: Num, span: Span },
}

impl RateSpec {
    pub fn span(&self) -> Span {
        match self {
            RateSpec::Const { span, .. } | RateSpec::Pulse { span, .. } => *span,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observe {
    pub observer: Ident,
    pub detector: Ident,
    pub at: Option<Num>,
    pub area: Option<Int>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Drift {
    pub observer: Ident,
    pub rate: Num,
    pub neighbors: Int,
    pub window: Option<(Num, Num)>,
    pub into: Option<Ident>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunClause {
    pub seed: Option<Int>,
    pub runs: Option<Int>,
    pub dt: Option<Num>,
    pub horizon: Option<Num>,
    pub scope: Option<(TriggerScope, Span)>,
    pub span: Span,
}
