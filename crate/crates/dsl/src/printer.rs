use std::fmt::Write;

use redsim_core::dynamics::EdgeKind;

use crate::ast::*;

/// Renders a tree back to scenario text. Parsing the result gives back an
/// equal tree.
pub fn serialize(spec: &ScenarioSpec) -> String {
    let mut groups: Vec<Vec<String>> = Vec::new();
    if let Some(h) = &spec.header {
        groups.push(vec![format!("scenario {}", h.kind.name())]);
    }
    groups.push(spec.decls.iter().map(decl).collect());
    groups.push(spec.clauses.iter().map(clause).collect());
    if let Some(r) = &spec.run {
        groups.push(vec![run(r)]);
    }
    let mut out = String::new();
    for g in groups.into_iter().filter(|g| !g.is_empty()) {
        if !out.is_empty() {
            out.push('\n');
        }
        for line in g {
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}

fn fields(items: Vec<(&str, String)>) -> String {
    if items.is_empty() {
        return "{}".into();
    }
    let body: Vec<String> = items.into_iter().map(|(k, v)| format!("{k}: {v}")).collect();
    format!("{{ {} }}", body.join(", "))
}

fn interval((a, b): &(Num, Num)) -> String {
    format!("[{}, {}]", a.value, b.value)
}

fn decl(d: &Decl) -> String {
    match d {
        Decl::Observer { name } => format!("observer {}", name.name),
        Decl::Detector { name, areas } => {
            format!("detector {} {}", name.name, fields(vec![("areas", areas.value.to_string())]))
        }
        Decl::Wave { name, particles } => {
            format!("wave {} {}", name.name, fields(vec![("particles", particles.value.to_string())]))
        }
    }
}

fn endpoint(e: &Endpoint) -> String {
    match e {
        Endpoint::Name(i) => i.name.clone(),
        Endpoint::Label(l) => label_text(l),
    }
}

pub(crate) fn label_text(l: &LabelLit) -> String {
    let mut s = String::from("[");
    for (i, f) in l.factors.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let args: Vec<String> = f
            .args
            .iter()
            .map(|a| match a {
                Arg::Int(n) => n.value.to_string(),
                Arg::Word(w) => w.name.clone(),
            })
            .collect();
        let _ = write!(s, "{}({})", f.name.name, args.join(", "));
    }
    s.push(']');
    s
}

fn rate(r: &RateSpec) -> String {
    match r {
        RateSpec::Const { k, .. } => format!("const {}", k.value),
        RateSpec::Pulse { k, center, width, .. } => {
            format!("pulse {} at {} width {}", k.value, center.value, width.value)
        }
    }
}

fn clause(c: &Clause) -> String {
    match c {
        Clause::Interaction(i) => {
            let kind = match i.kind {
                EdgeKind::Primary => "primary",
                EdgeKind::Physiological => "physiological",
                EdgeKind::Drift => "drift",
            };
            let mut f = vec![("rate", rate(&i.rate))];
            if let Some(w) = &i.window {
                f.push(("window", interval(w)));
            }
            if let Some(l) = &i.latency {
                f.push(("latency", l.value.to_string()));
            }
            if let Some(a) = &i.area {
                f.push(("area", a.value.to_string()));
            }
            format!("interaction {kind} {} -> {} {}", endpoint(&i.source), endpoint(&i.target), fields(f))
        }
        Clause::Observe(o) => {
            let mut f = Vec::new();
            if let Some(at) = &o.at {
                f.push(("at", at.value.to_string()));
            }
            if let Some(a) = &o.area {
                f.push(("area", a.value.to_string()));
            }
            format!("observe {} {} {}", o.observer.name, o.detector.name, fields(f))
        }
        Clause::Drift(d) => {
            let mut f = vec![("rate", d.rate.value.to_string()), ("neighbors", d.neighbors.value.to_string())];
            if let Some(w) = &d.window {
                f.push(("window", interval(w)));
            }
            if let Some(i) = &d.into {
                f.push(("into", i.name.clone()));
            }
            format!("drift {} {}", d.observer.name, fields(f))
        }
    }
}

fn run(r: &RunClause) -> String {
    let mut f = Vec::new();
    if let Some(s) = &r.seed {
        f.push(("seed", s.value.to_string()));
    }
    if let Some(n) = &r.runs {
        f.push(("runs", n.value.to_string()));
    }
    if let Some(dt) = &r.dt {
        f.push(("dt", dt.value.to_string()));
    }
    if let Some(h) = &r.horizon {
        f.push(("horizon", h.value.to_string()));
    }
    if let Some((s, _)) = &r.scope {
        f.push(("scope", s.name().to_string()));
    }
    format!("run {}", fields(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    #[test]
    fn prints_canonical_text() {
        let src = "scenario drift\nwave psi{particles:1}\ndetector D {areas: 1,}\nobserver alice\n\
                   interaction primary psi -> D { rate: const 0.1, window: [0, 10.5] }\n\
                   observe alice D { at: 0 }\ndrift alice { rate: 0.05, neighbors: 3, into: ready }\n\
                   run { seed: 7, scope: all_positive }\n";
        let spec = parse(src).unwrap();
        let text = serialize(&spec);
        assert_eq!(
            text,
            "scenario drift\n\nwave psi { particles: 1 }\ndetector D { areas: 1 }\nobserver alice\n\n\
             interaction primary psi -> D { rate: const 0.1, window: [0, 10.5] }\n\
             observe alice D { at: 0 }\ndrift alice { rate: 0.05, neighbors: 3, into: ready }\n\n\
             run { seed: 7, scope: all_positive }\n"
        );
        assert_eq!(parse(&text).unwrap(), spec);
    }
}
