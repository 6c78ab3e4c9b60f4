use std::collections::HashMap;

use redsim_core::dynamics::{EdgeKind, RateFunction};
use redsim_core::graph::GraphError;
use redsim_core::model::{
    canonicalize, rule4_allows, BrainFactor, BrainLabel, BrainMode, ComponentLabel, DetectorId, FactorState,
    ObserverId,
};
use redsim_core::scenario::{
    CustomEdge, DetectorDecl, DriftCoupling, DriftInto, Observation, PrimaryCoupling, RunConfig, ScenarioDef,
    ScenarioError, WaveDecl, MAX_NEIGHBORS,
};
use redsim_core::{CompiledScenario, ScenarioParams};

use crate::ast::*;
use crate::diagnostic::{Code, Diagnostic, Span};
use crate::parser::parse;

/// A compiled scenario together with any warnings raised on the way.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub scenario: CompiledScenario,
    pub warnings: Vec<Diagnostic>,
}

/// Parses, lowers and compiles scenario text.
pub fn compile(source: &str) -> Result<Compiled, Vec<Diagnostic>> {
    let spec = parse(source)?;
    compile_spec(&spec, source)
}

/// Lowers and compiles an already parsed tree. `source` is only used for
/// diagnostic snippets and may be empty.
pub fn compile_spec(spec: &ScenarioSpec, source: &str) -> Result<Compiled, Vec<Diagnostic>> {
    let (def, custom_targets) = Lowerer::new(source).lower(spec)?;
    let scenario = def.compile().map_err(|e| vec![compile_error(&e, source)])?;
    let graph = scenario.graph();
    let names = def.names();
    let mut warnings = Vec::new();
    for (label, span) in custom_targets {
        let Some(id) = graph.id_of(&label) else { continue };
        if !graph.has_ready(id) && !graph.has_conscious(id) && graph.outbound(id).next().is_none() {
            warnings.push(Diagnostic::new(
                Code::PhantomOnly,
                format!(
                    "{} has no ready or conscious state and no outgoing interaction, so it can only become phantom",
                    label.display(&names)
                ),
                span,
                source,
            ));
        }
    }
    Ok(Compiled { scenario, warnings })
}

/// Lowers a tree to a scenario definition without compiling the graph.
pub fn lower(spec: &ScenarioSpec, source: &str) -> Result<ScenarioDef, Vec<Diagnostic>> {
    Lowerer::new(source).lower(spec).map(|(def, _)| def)
}

fn compile_error(e: &ScenarioError, source: &str) -> Diagnostic {
    let code = match e {
        ScenarioError::DimensionMismatch(_) => Code::DimensionMismatch,
        ScenarioError::ForbiddenEdge { .. } => Code::ForbiddenTransition,
        ScenarioError::Graph(GraphError::TooManyComponents(_)) => Code::Unsupported,
        _ => Code::InvalidValue,
    };
    Diagnostic::new(code, e.to_string(), Span::new(1, 1, 1), source)
}

#[derive(Clone, Copy)]
enum Entity {
    Wave,
    Detector(DetectorId, u32),
    Observer(ObserverId),
}

struct Physiological {
    detector: DetectorId,
    rate: f64,
    latency: f64,
    span: Span,
    latency_span: Span,
}

struct Lowerer<'a> {
    source: &'a str,
    diags: Vec<Diagnostic>,
    names: HashMap<String, Entity>,
    particles: u32,
}

impl<'a> Lowerer<'a> {
    fn new(source: &'a str) -> Self {
        Lowerer { source, diags: Vec::new(), names: HashMap::new(), particles: 0 }
    }

    fn err(&mut self, code: Code, msg: impl Into<String>, span: Span) {
        self.diags.push(Diagnostic::new(code, msg, span, self.source));
    }

    fn lower(mut self, spec: &ScenarioSpec) -> Result<(ScenarioDef, Vec<(ComponentLabel, Span)>), Vec<Diagnostic>> {
        let mut wave: Option<WaveDecl> = None;
        let mut detectors = Vec::new();
        let mut observers = Vec::new();
        for d in &spec.decls {
            match d {
                Decl::Wave { name, particles } => {
                    if wave.is_some() {
                        self.err(Code::Unsupported, "only one wave per scenario is supported", name.span);
                        continue;
                    }
                    let n = match u32::try_from(particles.value) {
                        Ok(n) if n > 0 => n,
                        _ => {
                            self.err(Code::InvalidValue, "a wave needs at least one particle", particles.span);
                            1
                        }
                    };
                    self.particles = n;
                    self.names.insert(name.name.clone(), Entity::Wave);
                    wave = Some(WaveDecl { name: name.name.clone(), particles: n });
                }
                Decl::Detector { name, areas } => {
                    let n = match areas.value {
                        1..=8 => areas.value as u32,
                        _ => {
                            self.err(Code::InvalidValue, "a detector has 1 to 8 areas", areas.span);
                            1
                        }
                    };
                    let id = DetectorId(detectors.len() as u16);
                    self.names.insert(name.name.clone(), Entity::Detector(id, n));
                    detectors.push(DetectorDecl { name: name.name.clone(), areas: n });
                }
                Decl::Observer { name } => {
                    let id = ObserverId(observers.len() as u16);
                    self.names.insert(name.name.clone(), Entity::Observer(id));
                    observers.push(name.name.clone());
                }
            }
        }
        let Some(wave) = wave else {
            let span = spec.decls.first().map(|d| d.name().span).unwrap_or(Span::new(1, 1, 1));
            self.err(Code::InvalidValue, "a scenario needs a wave declaration", span);
            return Err(self.diags);
        };

        let run = self.run(spec.run.as_ref());
        let mut primaries: Vec<PrimaryCoupling> = Vec::new();
        let mut physiological: HashMap<u16, Physiological> = HashMap::new();
        let mut custom_edges = Vec::new();
        let mut custom_targets = Vec::new();
        let mut observations: Vec<Observation> = Vec::new();
        let mut drifts: Vec<DriftCoupling> = Vec::new();
        let mut observe_spans: HashMap<u16, Span> = HashMap::new();

        for c in &spec.clauses {
            match c {
                Clause::Interaction(i) => match (&i.source, &i.target) {
                    (Endpoint::Name(src), Endpoint::Name(tgt)) => match i.kind {
                        EdgeKind::Primary => {
                            if let Some(p) = self.primary(i, src, tgt) {
                                if primaries.iter().any(|q| q.detector == p.detector && q.area == p.area) {
                                    self.err(
                                        Code::Duplicate,
                                        format!("a primary interaction into {} area {} already exists", tgt.name, p.area),
                                        i.span,
                                    );
                                } else {
                                    primaries.push(p);
                                }
                            }
                        }
                        EdgeKind::Physiological => {
                            if let Some((obs, p)) = self.physiological(i, src, tgt) {
                                if physiological.contains_key(&obs.0) {
                                    self.err(
                                        Code::Duplicate,
                                        format!("observer {} already has a physiological interaction", tgt.name),
                                        i.span,
                                    );
                                } else {
                                    physiological.insert(obs.0, p);
                                }
                            }
                        }
                        EdgeKind::Drift => self.err(
                            Code::Unsupported,
                            "drift between names is declared with a `drift` clause; custom drift edges take label literals",
                            i.span,
                        ),
                    },
                    (Endpoint::Label(src), Endpoint::Label(tgt)) => {
                        if let Some(edge) = self.custom(i, src, tgt) {
                            custom_targets.push((edge.target.clone(), tgt.span));
                            custom_edges.push(edge);
                        }
                    }
                    (_, other) => self.err(
                        Code::InvalidValue,
                        "both endpoints must be names or both must be label literals",
                        other.span(),
                    ),
                },
                Clause::Observe(o) => {
                    let (Some(Entity::Observer(obs)), Some(Entity::Detector(det, areas))) =
                        (self.entity(&o.observer), self.entity(&o.detector))
                    else {
                        continue;
                    };
                    if observe_spans.insert(obs.0, o.observer.span).is_some() {
                        self.err(Code::Duplicate, format!("observer {} observes twice", o.observer.name), o.observer.span);
                        continue;
                    }
                    let area = self.area(o.area, areas, &o.detector.name);
                    let at = o.at.map_or(0.0, |a| a.value);
                    if !(at >= 0.0 && at < run.horizon) {
                        let span = o.at.map_or(o.span, |a| a.span);
                        self.err(
                            Code::InvalidValue,
                            format!("observation time {at} must lie in [0, horizon {})", run.horizon),
                            span,
                        );
                    }
                    observations.push(Observation {
                        observer: obs,
                        detector: det,
                        area,
                        at,
                        rate: ScenarioParams::default().physiological_rate,
                        latency: 0.0,
                    });
                }
                Clause::Drift(d) => {
                    let Some(Entity::Observer(obs)) = self.entity(&d.observer) else { continue };
                    if drifts.iter().any(|x| x.observer == obs) {
                        self.err(Code::Duplicate, format!("observer {} drifts twice", d.observer.name), d.observer.span);
                        continue;
                    }
                    if let Some(drift) = self.drift(d, obs, run.horizon) {
                        drifts.push(drift);
                    }
                }
            }
        }

        for (obs, p) in &physiological {
            let name = &observers[*obs as usize];
            match observations.iter_mut().find(|o| o.observer.0 == *obs) {
                None => self.err(
                    Code::InvalidValue,
                    format!("observer {name} has a physiological interaction but no observe clause"),
                    p.span,
                ),
                Some(o) if o.detector != p.detector => self.err(
                    Code::InvalidValue,
                    format!("observer {name} observes {} but is coupled to {}", detectors[o.detector.0 as usize].name, detectors[p.detector.0 as usize].name),
                    p.span,
                ),
                Some(o) => {
                    o.rate = p.rate;
                    o.latency = p.latency;
                    if p.rate * p.latency > (-1.0f64).exp() {
                        self.err(
                            Code::InvalidValue,
                            format!(
                                "rate {} with latency {} would drive weights negative (rate * latency must not exceed 1/e)",
                                p.rate, p.latency
                            ),
                            p.latency_span,
                        );
                    }
                }
            }
        }

        if !self.diags.is_empty() {
            self.diags.sort_by_key(|d| (d.line, d.col));
            return Err(self.diags);
        }
        let def = ScenarioDef {
            kind: spec.header.as_ref().map(|h| h.kind),
            wave,
            detectors,
            observers,
            primaries,
            observations,
            drifts,
            custom_edges,
            run,
        };
        def.validate().map_err(|e| vec![compile_error(&e, self.source)])?;
        Ok((def, custom_targets))
    }

    /// Looks up a name already checked by the resolver.
    fn entity(&self, id: &Ident) -> Option<Entity> {
        self.names.get(&id.name).copied()
    }

    fn area(&mut self, area: Option<Int>, areas: u32, detector: &str) -> u32 {
        match area {
            None => 1,
            Some(a) if a.value >= 1 && a.value <= areas as u64 => a.value as u32,
            Some(a) => {
                self.err(
                    Code::DimensionMismatch,
                    format!("detector {detector} has {areas} area(s), area {} referenced", a.value),
                    a.span,
                );
                1
            }
        }
    }

    fn non_negative(&mut self, n: Num, what: &str) -> f64 {
        if n.value < 0.0 {
            self.err(Code::InvalidValue, format!("{what} must be non-negative, got {}", n.value), n.span);
        }
        n.value
    }

    fn rate_function(&mut self, i: &Interaction) -> Option<RateFunction> {
        match (&i.rate, i.window) {
            (RateSpec::Const { k, .. }, None) => Some(RateFunction::Const { k: self.non_negative(*k, "a rate") }),
            (RateSpec::Const { k, .. }, Some((a, b))) => {
                let k = self.non_negative(*k, "a rate");
                if !(a.value < b.value) {
                    self.err(Code::InvalidValue, "a window needs start < end", a.span.to(b.span));
                    return None;
                }
                Some(RateFunction::Window { k, start: a.value, end: b.value })
            }
            (RateSpec::Pulse { k, center, width, .. }, None) => {
                let k = self.non_negative(*k, "a rate");
                if width.value <= 0.0 {
                    self.err(Code::InvalidValue, "a pulse width must be positive", width.span);
                    return None;
                }
                Some(RateFunction::Pulse { k, center: center.value, width: width.value })
            }
            (RateSpec::Pulse { .. }, Some((a, _))) => {
                self.err(Code::InvalidValue, "a pulse already defines its own window", a.span);
                None
            }
        }
    }

    fn no_latency(&mut self, i: &Interaction) {
        if let Some(l) = i.latency {
            self.err(Code::InvalidValue, "latency is only allowed on physiological interactions", l.span);
        }
    }

    fn primary(&mut self, i: &Interaction, src: &Ident, tgt: &Ident) -> Option<PrimaryCoupling> {
        self.no_latency(i);
        let rate = self.rate_function(i);
        let (Some(Entity::Wave), Some(Entity::Detector(detector, areas))) = (self.entity(src), self.entity(tgt)) else {
            self.err(Code::InvalidValue, "a primary interaction runs from the wave to a detector", i.span);
            return None;
        };
        let area = self.area(i.area, areas, &tgt.name);
        Some(PrimaryCoupling { detector, area, rate: rate? })
    }

    fn physiological(&mut self, i: &Interaction, src: &Ident, tgt: &Ident) -> Option<(ObserverId, Physiological)> {
        let (Some(Entity::Detector(detector, _)), Some(Entity::Observer(obs))) = (self.entity(src), self.entity(tgt))
        else {
            self.err(Code::InvalidValue, "a physiological interaction runs from a detector to an observer", i.span);
            return None;
        };
        if let Some(a) = i.area {
            self.err(Code::InvalidValue, "the watched area is set on the observe clause", a.span);
        }
        if let Some((a, _)) = i.window {
            self.err(Code::Unsupported, "physiological interactions open at the observation time; windows are not supported", a.span);
        }
        let rate = match i.rate {
            RateSpec::Const { k, .. } => self.non_negative(k, "a rate"),
            RateSpec::Pulse { span, .. } => {
                self.err(Code::Unsupported, "physiological rates must be constant", span);
                return None;
            }
        };
        let latency = i.latency.map_or(0.0, |l| self.non_negative(l, "latency"));
        let latency_span = i.latency.map_or(i.span, |l| l.span);
        Some((obs, Physiological { detector, rate, latency, span: i.span, latency_span }))
    }

    fn custom(&mut self, i: &Interaction, src: &LabelLit, tgt: &LabelLit) -> Option<CustomEdge> {
        if i.kind != EdgeKind::Physiological {
            self.no_latency(i);
        }
        if let Some(a) = i.area {
            self.err(Code::InvalidValue, "label-literal interactions take no area", a.span);
        }
        let rate = self.rate_function(i);
        let latency = i.latency.map_or(0.0, |l| self.non_negative(l, "latency"));
        let source = self.label(src);
        let target = self.label(tgt);
        let (source, target, rate) = (source?, target?, rate?);
        if source == target {
            self.err(Code::InvalidValue, "an interaction needs two different labels", tgt.span);
            return None;
        }
        if let Some(b) = target.brains().find(|b| b.mode == BrainMode::Conscious && source.brain(b.observer) != Some(b)) {
            let name = self.observer_name(Some(b.observer));
            self.err(
                Code::InvalidValue,
                format!("only a reduction makes a state conscious; {name} must carry its conscious state unchanged"),
                tgt.span,
            );
            return None;
        }
        if !rule4_allows(&source, &target) {
            let observer = source
                .brains()
                .find(|s| s.mode == BrainMode::Ready && target.brain(s.observer).is_some_and(|t| t.mode == BrainMode::Ready))
                .map(|b| b.observer);
            let name = self.observer_name(observer);
            let shown = |l: &LabelLit| crate::printer::label_text(l);
            self.err(
                Code::ForbiddenTransition,
                format!(
                    "forbidden transition {} -> {}: observer {name} holds a ready state on both sides",
                    shown(src),
                    shown(tgt)
                ),
                tgt.span,
            );
            return None;
        }
        Some(CustomEdge { kind: i.kind, source, target, rate, latency })
    }

    fn observer_name(&self, id: Option<ObserverId>) -> String {
        self.names
            .iter()
            .find(|(_, e)| matches!(e, Entity::Observer(o) if Some(*o) == id))
            .map(|(n, _)| n.clone())
            .unwrap_or_default()
    }

    fn int_arg(&mut self, arg: &Arg, what: &str) -> Option<u32> {
        match arg {
            Arg::Int(n) => match u32::try_from(n.value) {
                Ok(v) => Some(v),
                Err(_) => {
                    self.err(Code::InvalidValue, format!("{what} is out of range"), n.span);
                    None
                }
            },
            Arg::Word(w) => {
                self.err(Code::InvalidValue, format!("expected {what}, found `{}`", w.name), w.span);
                None
            }
        }
    }

    fn word_arg<T, E: std::fmt::Display>(&mut self, arg: &Arg, parse: impl Fn(&str) -> Result<T, E>) -> Option<T> {
        match arg {
            Arg::Word(w) => match parse(&w.name) {
                Ok(v) => Some(v),
                Err(e) => {
                    self.err(Code::InvalidValue, e.to_string(), w.span);
                    None
                }
            },
            Arg::Int(n) => {
                self.err(Code::InvalidValue, "expected a brain state such as `b0` or a mode such as `ready`", n.span);
                None
            }
        }
    }

    /// Builds a label from a literal. Factors left out are filled in: the
    /// wave holds the particles not yet captured, detectors read zero, and
    /// observers are in the unknown state.
    fn label(&mut self, lit: &LabelLit) -> Option<ComponentLabel> {
        let errors_before = self.diags.len();
        let mut wave = None;
        let mut detectors: HashMap<u16, Vec<u32>> = HashMap::new();
        let mut brains: HashMap<u16, BrainFactor> = HashMap::new();
        let mut seen: Vec<&str> = Vec::new();
        for f in &lit.factors {
            if seen.contains(&f.name.name.as_str()) {
                self.err(Code::InvalidValue, format!("`{}` appears twice in one label", f.name.name), f.name.span);
                continue;
            }
            seen.push(&f.name.name);
            let Some(entity) = self.entity(&f.name) else { continue };
            let arity = |n: usize, this: &mut Self| {
                if f.args.len() != n {
                    this.err(
                        Code::DimensionMismatch,
                        format!("`{}` takes {n} value(s), {} given", f.name.name, f.args.len()),
                        f.span,
                    );
                    false
                } else {
                    true
                }
            };
            match entity {
                Entity::Wave => {
                    if arity(1, self) {
                        wave = self.int_arg(&f.args[0], "a particle count");
                    }
                }
                Entity::Detector(id, areas) => {
                    if arity(areas as usize, self) {
                        let counts: Option<Vec<u32>> =
                            f.args.iter().map(|a| self.int_arg(a, "a capture count")).collect();
                        if let Some(c) = counts {
                            detectors.insert(id.0, c);
                        }
                    }
                }
                Entity::Observer(id) => {
                    if arity(2, self) {
                        let label = self.word_arg(&f.args[0], |s| s.parse::<BrainLabel>());
                        let mode = self.word_arg(&f.args[1], |s| s.parse::<BrainMode>());
                        if let (Some(label), Some(mode)) = (label, mode) {
                            match BrainFactor::new(id, label, mode) {
                                Ok(b) => {
                                    brains.insert(id.0, b);
                                }
                                Err(e) => self.err(Code::InvalidValue, e.to_string(), f.span),
                            }
                        }
                    }
                }
            }
        }
        if self.diags.len() > errors_before {
            return None;
        }
        let mut factors = Vec::new();
        let mut captured = 0u64;
        for e in self.names.values() {
            match *e {
                Entity::Detector(id, areas) => {
                    let c = detectors.remove(&id.0).unwrap_or_else(|| vec![0; areas as usize]);
                    captured += c.iter().map(|&x| x as u64).sum::<u64>();
                    factors.push(FactorState::Detector { detector: id, captures: c });
                }
                Entity::Observer(id) => {
                    let b = brains.remove(&id.0).unwrap_or_else(|| {
                        BrainFactor::new(id, BrainLabel::Unknown, BrainMode::Unknown).expect("X is unknown")
                    });
                    factors.push(FactorState::Brain(b));
                }
                Entity::Wave => {}
            }
        }
        let total = self.particles as u64;
        let remaining = match wave {
            Some(r) => r as u64,
            None => total.saturating_sub(captured),
        };
        if remaining + captured != total {
            self.err(
                Code::DimensionMismatch,
                format!("label holds {} particle(s) but the wave has {total}", remaining + captured),
                lit.span,
            );
            return None;
        }
        factors.push(FactorState::ParticleWave { remaining: remaining as u32 });
        match canonicalize(factors) {
            Ok(l) => Some(l),
            Err(e) => {
                self.err(Code::InvalidValue, e.to_string(), lit.span);
                None
            }
        }
    }

    fn drift(&mut self, d: &Drift, observer: ObserverId, horizon: f64) -> Option<DriftCoupling> {
        let rate = self.non_negative(d.rate, "a drift rate");
        let neighbors = match d.neighbors.value {
            n @ 1.. if n <= MAX_NEIGHBORS as u64 => n as u32,
            _ => {
                self.err(
                    Code::InvalidValue,
                    format!("drift neighbors must be between 1 and {MAX_NEIGHBORS}"),
                    d.neighbors.span,
                );
                return None;
            }
        };
        let window = match d.window {
            Some((a, b)) if a.value < b.value => (a.value, b.value),
            Some((a, b)) => {
                self.err(Code::InvalidValue, "a window needs start < end", a.span.to(b.span));
                return None;
            }
            None => (0.0, horizon),
        };
        let into = match d.into.as_ref().map(|i| (i.name.as_str(), i.span)) {
            None | Some(("ready", _)) => DriftInto::Ready,
            Some(("unconscious", _)) => DriftInto::Unconscious,
            Some((other, span)) => {
                self.err(Code::InvalidValue, format!("drift goes `into: ready` or `into: unconscious`, not `{other}`"), span);
                return None;
            }
        };
        Some(DriftCoupling { observer, rate, neighbors, window, into })
    }

    fn run(&mut self, run: Option<&RunClause>) -> RunConfig {
        let mut cfg = RunConfig::default();
        let Some(r) = run else { return cfg };
        if let Some(s) = r.seed {
            cfg.seed = s.value;
        }
        if let Some(n) = r.runs {
            if n.value == 0 {
                self.err(Code::InvalidValue, "runs must be at least 1", n.span);
            }
            cfg.runs = n.value;
        }
        for (field, value, what) in [(&mut cfg.dt, r.dt, "dt"), (&mut cfg.horizon, r.horizon, "horizon")] {
            if let Some(v) = value {
                if v.value <= 0.0 {
                    self.err(Code::InvalidValue, format!("{what} must be positive"), v.span);
                } else {
                    *field = v.value;
                }
            }
        }
        if let Some((scope, _)) = r.scope {
            cfg.scope = scope;
        }
        cfg
    }
}

/// The tree that prints a definition in full: every default is written out.
pub fn from_def(def: &ScenarioDef) -> Result<ScenarioSpec, String> {
    let names = def.names();
    let mut decls = vec![Decl::Wave { name: Ident::new(&def.wave.name), particles: Int::new(def.wave.particles as u64) }];
    decls.extend(
        def.detectors
            .iter()
            .map(|d| Decl::Detector { name: Ident::new(&d.name), areas: Int::new(d.areas as u64) }),
    );
    decls.extend(def.observers.iter().map(|o| Decl::Observer { name: Ident::new(o) }));

    let rate = |r: &RateFunction| -> Result<(RateSpec, Option<(Num, Num)>), String> {
        let span = Default::default();
        match *r {
            RateFunction::Const { k } => Ok((RateSpec::Const { k: Num::new(k), span }, None)),
            RateFunction::Window { k, start, end } if start.is_finite() && end.is_finite() => {
                Ok((RateSpec::Const { k: Num::new(k), span }, Some((Num::new(start), Num::new(end)))))
            }
            RateFunction::Window { .. } => Err("open-ended rate windows cannot be written as text".into()),
            RateFunction::Pulse { k, center, width } => Ok((
                RateSpec::Pulse { k: Num::new(k), center: Num::new(center), width: Num::new(width), span },
                None,
            )),
        }
    };

    let wave = Ident::new(&def.wave.name);
    let mut clauses = Vec::new();
    for p in &def.primaries {
        let (r, window) = rate(&p.rate)?;
        clauses.push(Clause::Interaction(Interaction {
            kind: EdgeKind::Primary,
            source: Endpoint::Name(wave.clone()),
            target: Endpoint::Name(Ident::new(names.detector(p.detector))),
            rate: r,
            window,
            latency: None,
            area: Some(Int::new(p.area as u64)),
            span: Span::default(),
        }));
    }
    for o in &def.observations {
        clauses.push(Clause::Interaction(Interaction {
            kind: EdgeKind::Physiological,
            source: Endpoint::Name(Ident::new(names.detector(o.detector))),
            target: Endpoint::Name(Ident::new(names.observer(o.observer))),
            rate: RateSpec::Const { k: Num::new(o.rate), span: Span::default() },
            window: None,
            latency: Some(Num::new(o.latency)),
            area: None,
            span: Span::default(),
        }));
    }
    for o in &def.observations {
        clauses.push(Clause::Observe(Observe {
            observer: Ident::new(names.observer(o.observer)),
            detector: Ident::new(names.detector(o.detector)),
            at: Some(Num::new(o.at)),
            area: Some(Int::new(o.area as u64)),
            span: Span::default(),
        }));
    }
    for d in &def.drifts {
        clauses.push(Clause::Drift(Drift {
            observer: Ident::new(names.observer(d.observer)),
            rate: Num::new(d.rate),
            neighbors: Int::new(d.neighbors as u64),
            window: Some((Num::new(d.window.0), Num::new(d.window.1))),
            into: Some(Ident::new(match d.into {
                DriftInto::Ready => "ready",
                DriftInto::Unconscious => "unconscious",
            })),
            span: Span::default(),
        }));
    }
    for e in &def.custom_edges {
        let (r, window) = rate(&e.rate)?;
        clauses.push(Clause::Interaction(Interaction {
            kind: e.kind,
            source: Endpoint::Label(label_lit(&e.source, &names)),
            target: Endpoint::Label(label_lit(&e.target, &names)),
            rate: r,
            window,
            latency: (e.kind == EdgeKind::Physiological).then(|| Num::new(e.latency)),
            area: None,
            span: Span::default(),
        }));
    }
    let run = RunClause {
        seed: Some(Int::new(def.run.seed)),
        runs: Some(Int::new(def.run.runs)),
        dt: Some(Num::new(def.run.dt)),
        horizon: Some(Num::new(def.run.horizon)),
        scope: Some((def.run.scope, Span::default())),
        span: Span::default(),
    };
    Ok(ScenarioSpec {
        header: def.kind.map(|kind| Header { kind, span: Span::default() }),
        decls,
        clauses,
        run: Some(run),
    })
}

fn label_lit(label: &ComponentLabel, names: &redsim_core::model::Names) -> LabelLit {
    let factors = label
        .factors()
        .iter()
        .map(|f| {
            let (name, args) = match f {
                FactorState::ParticleWave { remaining } => {
                    (names.wave.clone(), vec![Arg::Int(Int::new(*remaining as u64))])
                }
                FactorState::Detector { detector, captures } => (
                    names.detector(*detector).to_string(),
                    captures.iter().map(|&c| Arg::Int(Int::new(c as u64))).collect(),
                ),
                FactorState::Brain(b) => (
                    names.observer(b.observer).to_string(),
                    vec![Arg::Word(Ident::new(b.label.to_string())), Arg::Word(Ident::new(b.mode.name()))],
                ),
            };
            FactorLit { name: Ident::new(name), args, span: Span::default() }
        })
        .collect();
    LabelLit { factors, span: Span::default() }
}
