use std::path::PathBuf;

use redsim_core::catalog::{build, definition, ScenarioKind, ScenarioParams};
use redsim_dsl::{compile, from_def, lower, parse, serialize, Code, Severity};

const MINIMAL: &str = "observer alice
detector D { areas: 1 }
wave psi { particles: 1 }
interaction primary psi -> D { rate: const 0.1, window: [0,10] }
observe alice D { at: 0 }
";

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn catalog_text(kind: ScenarioKind) -> String {
    let def = definition(kind, &ScenarioParams::for_kind(kind)).unwrap();
    serialize(&from_def(&def).unwrap())
}

#[test]
fn minimal_file_matches_the_continuous_observer() {
    let spec = parse(MINIMAL).unwrap();
    let mut def = lower(&spec, MINIMAL).unwrap();
    def.kind = Some(ScenarioKind::ContinuousObserver);
    let kind = ScenarioKind::ContinuousObserver;
    assert_eq!(def, definition(kind, &ScenarioParams::for_kind(kind)).unwrap());

    let compiled = compile(MINIMAL).unwrap();
    assert!(compiled.warnings.is_empty());
    let reference = build(kind, &ScenarioParams::for_kind(kind)).unwrap();
    let (a, b) = (compiled.scenario.graph(), reference.graph());
    assert_eq!(a.labels(), b.labels());
    assert_eq!(a.edges(), b.edges());
}

#[test]
fn crlf_and_comments_are_accepted() {
    let text = MINIMAL.replace('\n', "  # note\r\n");
    assert_eq!(parse(&text).unwrap(), parse(MINIMAL).unwrap());
}

#[test]
fn undeclared_observer_is_reported_at_its_position() {
    let diags = parse("observe bob D { at: 0 }").unwrap_err();
    let d = &diags[0];
    assert_eq!((d.code, d.line, d.col), (Code::Unresolved, 1, 9));
    assert_eq!(d.message, "unresolved identifier `bob`");
    let shown = d.to_string();
    assert!(shown.starts_with("error[E003]: unresolved identifier `bob`"), "{shown}");
    assert!(shown.contains("1 | observe bob D { at: 0 }"));
    assert!(shown.contains("|         ^^^"));
}

#[test]
fn every_catalog_scenario_round_trips() {
    for kind in ScenarioKind::ALL {
        let def = definition(kind, &ScenarioParams::for_kind(kind)).unwrap();
        let spec = from_def(&def).unwrap();
        let text = serialize(&spec);
        let parsed = parse(&text).unwrap_or_else(|d| panic!("{kind}: {d:?}\n{text}"));
        assert_eq!(parsed, spec, "{kind}");
        assert_eq!(serialize(&parsed), text, "{kind}");
        assert_eq!(lower(&parsed, &text).unwrap(), def, "{kind}");
        let compiled = compile(&text).unwrap();
        let reference = build(kind, &ScenarioParams::for_kind(kind)).unwrap();
        assert_eq!(compiled.scenario.graph().labels(), reference.graph().labels(), "{kind}");
    }
}

#[test]
fn shipped_corpus_matches_the_catalog() {
    let dir = corpus_dir();
    for kind in ScenarioKind::ALL {
        let path = dir.join(format!("{}.rsl", kind.name()));
        let expected = catalog_text(kind);
        if std::env::var_os("REDSIM_BLESS").is_some() {
            std::fs::create_dir_all(&dir).unwrap();
            std::fs::write(&path, &expected).unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(text, expected, "{}", path.display());
    }
}

#[test]
fn forbidden_custom_transition_names_both_labels() {
    let src = "wave psi { particles: 1 }
detector D { areas: 1 }
observer alice
observer bob
interaction primary psi -> D { rate: const 0.1, window: [0, 10] }
interaction physiological D -> alice { rate: const 2, latency: 0 }
observe alice D { at: 0 }
interaction primary [psi(1) alice(b0, ready)] -> [D(1) alice(b1, ready)] { rate: const 0.1 }
";
    let diags = compile(src).unwrap_err();
    let d = &diags[0];
    assert_eq!(d.code, Code::ForbiddenTransition);
    assert_eq!((d.line, d.col), (8, 50));
    assert!(d.message.contains("[psi(1) alice(b0, ready)]"), "{}", d.message);
    assert!(d.message.contains("[D(1) alice(b1, ready)]"), "{}", d.message);
    assert!(d.message.contains("observer alice"));
}

#[test]
fn dimension_mismatches_are_reported() {
    let base = "wave psi { particles: 1 }\ndetector D { areas: 2 }\nobserver alice\n";
    let d = &compile(&format!("{base}interaction primary psi -> D {{ rate: const 0.1, area: 3 }}\n")).unwrap_err()[0];
    assert_eq!((d.code, d.line, d.col), (Code::DimensionMismatch, 4, 55));

    let d = &compile(&format!(
        "{base}interaction drift [D(0) alice(b0, conscious)] -> [D(0) alice(b0a, ready)] {{ rate: const 1 }}\n"
    ))
    .unwrap_err()[0];
    assert_eq!((d.code, d.line, d.col), (Code::DimensionMismatch, 4, 20));

    let d = &compile(&format!(
        "{base}interaction drift [psi(1) D(1, 0) alice(b0, conscious)] -> [alice(b0a, ready)] {{ rate: const 1 }}\n"
    ))
    .unwrap_err()[0];
    assert_eq!(d.code, Code::DimensionMismatch);
    assert!(d.message.contains("2 particle(s)"), "{}", d.message);
}

#[test]
fn invalid_values_and_unsupported_forms() {
    let base = "wave psi { particles: 1 }\ndetector D { areas: 1 }\nobserver alice\n";
    let cases = [
        ("interaction physiological D -> alice { rate: pulse 1 at 2 width 1 }\nobserve alice D {}\n", Code::Unsupported),
        ("interaction physiological D -> alice { rate: const 2 }\n", Code::InvalidValue),
        ("interaction primary psi -> D { rate: const -0.1 }\n", Code::InvalidValue),
        ("interaction primary psi -> D { rate: const 0.1, latency: 1 }\n", Code::InvalidValue),
        ("interaction primary psi -> D { rate: const 0.1, window: [5, 1] }\n", Code::InvalidValue),
        ("observe alice D { at: 100 }\n", Code::InvalidValue),
        ("interaction physiological D -> alice { rate: const 2, latency: 0.5 }\nobserve alice D {}\n", Code::InvalidValue),
        ("drift alice { rate: 0.1, neighbors: 0 }\n", Code::InvalidValue),
        ("drift alice { rate: 0.1, neighbors: 2, into: sideways }\n", Code::InvalidValue),
        ("interaction drift alice -> alice { rate: const 1 }\n", Code::Unsupported),
        ("interaction drift [alice(b0, ready)] -> [alice(b0, conscious)] { rate: const 1 }\n", Code::InvalidValue),
        ("interaction drift [alice(b0, unknown)] -> [alice(X, unknown)] { rate: const 1 }\n", Code::InvalidValue),
        ("observe alice D {}\nobserve alice D {}\n", Code::Duplicate),
        ("run { runs: 0 }\n", Code::InvalidValue),
    ];
    for (clause, code) in cases {
        let src = format!("{base}{clause}");
        let diags = compile(&src).unwrap_err();
        assert_eq!(diags[0].code, code, "{clause}: {diags:?}");
        assert!(diags[0].line >= 4, "{clause}: {diags:?}");
    }
    let d = &compile("observer alice\n").unwrap_err()[0];
    assert_eq!(d.message, "a scenario needs a wave declaration");
}

#[test]
fn physiological_defaults_and_overrides() {
    let spec = format!("{MINIMAL}interaction physiological D -> alice {{ rate: const 3, latency: 0.1 }}\n");
    let def = lower(&parse(&spec).unwrap(), &spec).unwrap();
    assert_eq!((def.observations[0].rate, def.observations[0].latency), (3.0, 0.1));
    let def = lower(&parse(MINIMAL).unwrap(), MINIMAL).unwrap();
    assert_eq!((def.observations[0].rate, def.observations[0].latency), (2.0, 0.0));
}

#[test]
fn phantom_only_targets_raise_a_warning() {
    let src = format!(
        "{MINIMAL}interaction drift [psi(1) alice(b0, conscious)] -> [psi(0) D(1) alice(U, unconscious)] {{ rate: const 0.1, window: [0, 5] }}\n"
    );
    let compiled = compile(&src).unwrap();
    assert_eq!(compiled.warnings.len(), 1);
    let w = &compiled.warnings[0];
    assert_eq!((w.severity, w.code, w.line, w.col), (Severity::Warning, Code::PhantomOnly, 6, 52));
    assert!(w.to_string().starts_with("warning[W001]"));
}

#[test]
fn custom_edges_reach_the_graph() {
    let src = format!(
        "{MINIMAL}interaction drift [psi(1) alice(b0, conscious)] -> [alice(b0a, ready)] {{ rate: const 0.2, window: [0, 5] }}\n"
    );
    let compiled = compile(&src).unwrap();
    let g = compiled.scenario.graph();
    assert!(g.ids().any(|id| g.display(id) == "[psi(1) D(0) alice(b0a, ready)]"));
    assert!(compiled.warnings.is_empty());
}

mod properties {
    use proptest::prelude::*;
    use redsim_core::catalog::{definition, ScenarioKind, ScenarioParams};
    use redsim_dsl::{from_def, lower, parse, serialize};

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]
        #[test]
        fn definitions_survive_text(
            kind in 0usize..10,
            rate in 1e-6f64..10.0,
            end in 0.5f64..30.0,
            phys in 0.01f64..50.0,
            seed in any::<u64>(),
            dt in 1e-4f64..0.5,
        ) {
            let kind = ScenarioKind::ALL[kind];
            let mut p = ScenarioParams::for_kind(kind);
            p.primary_rate = rate;
            p.area_rates = (rate, rate / 3.0);
            p.window = (0.0, end);
            p.physiological_rate = phys;
            p.seed = seed;
            p.dt = dt;
            p.observation_times.clear();
            let def = definition(kind, &p).unwrap();
            let spec = from_def(&def).unwrap();
            let text = serialize(&spec);
            let parsed = parse(&text).unwrap();
            prop_assert_eq!(&parsed, &spec);
            prop_assert_eq!(serialize(&parsed), text.clone());
            prop_assert_eq!(lower(&parsed, &text).unwrap(), def);
        }
    }
}
