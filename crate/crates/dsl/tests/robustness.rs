use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use redsim_core::catalog::ScenarioKind;
use redsim_dsl::lexer::{lex, TokenKind};
use redsim_dsl::{compile, parse, serialize};

const ALPHABET: &[u8] = b"abcdeDpsiXU_0123456789.-+e>[](){}:,# \n\r\t";
const WORDS: &[&str] = &[
    "scenario ", "wave ", "detector ", "observer ", "interaction ", "observe ", "drift ", "run ", "primary ",
    "physiological ", "const ", "pulse ", "at ", "width ", "psi", "D", "alice", "{", "}", "[", "]", "(", ")",
    ":", ",", "->", "rate", "window", "areas", "particles", "b0", "ready", "conscious", "0.1", "1", "-2",
    "\n", " ",
];

fn corpus() -> Vec<String> {
    let dir = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    ScenarioKind::ALL
        .iter()
        .map(|k| std::fs::read_to_string(dir.join(format!("{}.rsl", k.name()))).unwrap())
        .collect()
}

#[test]
fn arbitrary_input_never_panics() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut accepted = 0;
    for i in 0..100_000 {
        let len = rng.gen_range(0..120);
        let text: String = match i % 3 {
            // Raw bytes, lossily decoded.
            0 => {
                let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
                String::from_utf8_lossy(&bytes).into_owned()
            }
            1 => (0..len).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())] as char).collect(),
            _ => (0..len / 4).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect(),
        };
        match compile(&text) {
            Ok(_) => accepted += 1,
            Err(diags) => {
                assert!(!diags.is_empty());
                for d in &diags {
                    assert!(d.line >= 1 && d.col >= 1, "{text:?}: {d:?}");
                    let _ = d.to_string();
                }
            }
        }
    }
    // Almost everything random is rejected; the empty-ish inputs fail for lack of a wave.
    assert!(accepted < 1000);
}

#[test]
fn print_parse_print_is_stable_on_the_corpus() {
    for text in corpus() {
        let once = serialize(&parse(&text).unwrap());
        assert_eq!(once, text);
        assert_eq!(serialize(&parse(&once).unwrap()), once);
    }
}

/// Replaces one token of a valid file by something that cannot be valid at
/// that position, and checks the first diagnostic lands inside that token.
#[test]
fn diagnostics_point_inside_the_mutated_token() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut checked = 0;
    for text in corpus() {
        let tokens = lex(&text).unwrap();
        let lines: Vec<&str> = text.split('\n').collect();
        for _ in 0..300 {
            let i = rng.gen_range(0..tokens.len() - 1);
            let tok = &tokens[i];
            // Renaming a declaration moves the error to its uses, so only
            // references get an undeclared name.
            let declares = i > 0 && matches!(tokens[i - 1].kind, TokenKind::Keyword("observer" | "detector" | "wave"));
            let replacement = match (&tok.kind, rng.gen_range(0..3)) {
                (_, 0) => "$".to_string(),
                (TokenKind::Int(_) | TokenKind::Num(_), _) => "?".to_string(),
                (TokenKind::Ident(_), 1) if !declares => "zz_undeclared".to_string(),
                (TokenKind::Ident(_), _) => "@".to_string(),
                (TokenKind::Keyword(_), _) => "9".to_string(),
                _ => "%".to_string(),
            };
            let (line, col) = (tok.span.line as usize, tok.span.col as usize);
            let mut mutated_lines: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
            let target: Vec<char> = mutated_lines[line - 1].chars().collect();
            let before: String = target[..col - 1].iter().collect();
            let after: String = target[col - 1 + tok.span.len as usize..].iter().collect();
            mutated_lines[line - 1] = format!("{before}{replacement}{after}");
            let mutated = mutated_lines.join("\n");

            let diags = match compile(&mutated) {
                Ok(_) if replacement == "zz_undeclared" => continue, // a field name or state word
                Ok(_) => panic!("mutation accepted: {mutated}"),
                Err(d) => d,
            };
            let d = &diags[0];
            let end = col + replacement.chars().count();
            assert!(
                d.line as usize == line && (col..end).contains(&(d.col as usize)),
                "token at {line}:{col} replaced by {replacement:?}, diagnostic at {}:{}: {}\n{mutated}",
                d.line,
                d.col,
                d.message
            );
            checked += 1;
        }
    }
    assert!(checked > 2000, "{checked}");
}
