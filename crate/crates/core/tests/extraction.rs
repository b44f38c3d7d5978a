mod common;

use std::collections::BTreeSet;

use common::fixtures;
use funcbench::corpus::{count_tokens, extract_functions, ExtractionConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

/// Independent token counter: one regex alternation, longest punctuators
/// first, comments skipped.
fn reference_count(text: &str) -> usize {
    let re = Regex::new(concat!(
        r#"(?s)(?P<c>/\*.*?\*/|//[^\n]*)"#,
        r#"|(?:u8|[uUL])?"(?:\\.|[^"\\\n])*""#,
        r#"|(?:u8|[uUL])?'(?:\\.|[^'\\\n])*'"#,
        r#"|\.?[0-9](?:[eEpP][+-]|[0-9A-Za-z_.'])*"#,
        r#"|[A-Za-z_$][A-Za-z0-9_$]*"#,
        r#"|%:%:|<<=|>>=|\.\.\.|->\*|<=>"#,
        r#"|->|\+\+|--|<<|>>|<=|>=|==|!=|&&|\|\||[*/%+\-&^|]=|##|::|\.\*|<:|:>|<%|%>|%:"#,
        r#"|\S"#,
    ))
    .unwrap();
    re.captures_iter(text).filter(|c| c.name("c").is_none()).count()
}

#[test]
fn token_counts_match_reference_lexer() {
    let mut checked = 0;
    for tree in [fixtures().join("mock_project"), fixtures().join("golden_logs")] {
        let snap = extract_functions(&tree, &ExtractionConfig { min_tokens: 1, max_tokens: 100_000, exclude: vec![] })
            .unwrap();
        for r in &snap.records {
            assert_eq!(r.token_count, reference_count(&r.source_text), "{} in {}", r.name, r.file_path);
            assert_eq!(count_tokens(&r.source_text), r.token_count);
            checked += 1;
        }
    }
    assert!(checked >= 50, "only {checked} functions checked");
}

/// `void name(void) { ; ; ... }` has exactly 7 + k tokens.
fn synthetic_function(name: &str, tokens: usize, rng: &mut ChaCha8Rng) -> String {
    let k = tokens - 7;
    let mut body = String::new();
    for i in 0..k {
        body.push_str(if i % 9 == 8 { ";\n    " } else { "; " });
        if rng.random_bool(0.05) {
            body.push_str("/* not a token */ ");
        }
    }
    let lead = if rng.random_bool(0.5) { format!("/* {name}: synthetic */\n") } else { String::new() };
    format!("{lead}void {name}(void)\n{{\n    {body}\n}}\n")
}

#[test]
fn synthetic_corpus_bounds_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let dir = tempfile::tempdir().unwrap();
    let mut expected_kept = BTreeSet::new();
    let mut expected_below = 0;
    let mut expected_above = 0;
    for file in 0..10 {
        let mut src = String::from("#include <stddef.h>\n\n");
        for j in 0..10 {
            let name = format!("syn_{file}_{j}");
            // Straddle both bounds: most counts sit within three of 10 or 256.
            let tokens = match rng.random_range(0..4) {
                0 => rng.random_range(7..=13),
                1 => rng.random_range(253..=259),
                2 => rng.random_range(14..=252),
                _ => rng.random_range(260..=320),
            };
            let f = synthetic_function(&name, tokens, &mut rng);
            assert_eq!(reference_count(&f), tokens, "{f}");
            match tokens {
                t if t < 10 => expected_below += 1,
                t if t > 256 => expected_above += 1,
                _ => {
                    expected_kept.insert(name);
                }
            }
            src.push_str(&f);
            src.push('\n');
        }
        std::fs::write(dir.path().join(format!("f{file}.c")), src).unwrap();
    }
    let snap = extract_functions(dir.path(), &ExtractionConfig::default()).unwrap();
    let kept: BTreeSet<String> = snap.records.iter().map(|r| r.name.clone()).collect();
    assert_eq!(kept, expected_kept);
    assert_eq!(snap.stats.functions_found, 100);
    assert_eq!(snap.stats.below_min, expected_below);
    assert_eq!(snap.stats.above_max, expected_above);
    let fraction = (expected_below + expected_above) as f64 / 100.0;
    assert!((snap.stats.filtered_fraction() - fraction).abs() < 1e-12);
}

#[derive(Debug, Clone)]
enum Item {
    Function { stmts: usize, comment: bool },
    Prototype,
    Struct,
    Guarded { stmts: usize },
    Macro,
}

fn item() -> impl Strategy<Value = Item> {
    prop_oneof![
        4 => (1usize..40, any::<bool>()).prop_map(|(stmts, comment)| Item::Function { stmts, comment }),
        1 => Just(Item::Prototype),
        1 => Just(Item::Struct),
        1 => (1usize..10).prop_map(|stmts| Item::Guarded { stmts }),
        1 => Just(Item::Macro),
    ]
}

fn render(items: &[Item], crlf: bool) -> String {
    let mut s = String::new();
    for (i, it) in items.iter().enumerate() {
        let body = |n: usize| (0..n).map(|k| format!("    acc += {k} * x;\n")).collect::<String>();
        match it {
            Item::Function { stmts, comment } => {
                if *comment {
                    s.push_str(&format!("/* f{i} does a thing\n * over lines */\n"));
                }
                s.push_str(&format!(
                    "static int f{i}(int x)\n{{\n    int acc = 0;\n{}    return acc;\n}}\n\n",
                    body(*stmts)
                ));
            }
            Item::Prototype => s.push_str(&format!("int p{i}(const char *s, ...);\n\n")),
            Item::Struct => s.push_str(&format!("struct s{i} {{\n    int a;\n    char b[4];\n}};\n\n")),
            Item::Guarded { stmts } => s.push_str(&format!(
                "#ifdef NEVER_{i}\nint g{i}(int x)\n{{\n    int acc = 0;\n{}    return acc;\n}}\n#endif\n\n",
                body(*stmts)
            )),
            Item::Macro => s.push_str(&format!("#define M{i}(a, b) \\\n    ((a) > (b) ? (a) : (b))\n\n")),
        }
    }
    if crlf {
        s = s.replace('\n', "\r\n");
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn extraction_is_deterministic_and_self_patching(
        files in prop::collection::vec((prop::collection::vec(item(), 0..12), any::<bool>()), 1..5)
    ) {
        let dir = tempfile::tempdir().unwrap();
        let mut any_function = false;
        for (n, (items, crlf)) in files.iter().enumerate() {
            any_function |= items.iter().any(|i| matches!(i, Item::Function { .. } | Item::Guarded { .. }));
            std::fs::write(dir.path().join(format!("u{n}.c")), render(items, *crlf)).unwrap();
        }
        let cfg = ExtractionConfig { min_tokens: 1, max_tokens: 100_000, exclude: vec![] };
        let first = extract_functions(dir.path(), &cfg);
        if !any_function {
            return Ok(());
        }
        let first = first.unwrap();
        let second = extract_functions(dir.path(), &cfg).unwrap();
        prop_assert_eq!(serde_json::to_vec(&first.records).unwrap(), serde_json::to_vec(&second.records).unwrap());
        let want: usize = files
            .iter()
            .flat_map(|(items, _)| items)
            .filter(|i| matches!(i, Item::Function { .. } | Item::Guarded { .. }))
            .count();
        prop_assert_eq!(first.records.len(), want);
        for r in &first.records {
            let bytes = std::fs::read(dir.path().join(&r.file_path)).unwrap();
            prop_assert_eq!(&bytes[r.byte_span.0..r.byte_span.1], r.source_text.as_bytes());
            let mut spliced = bytes[..r.byte_span.0].to_vec();
            spliced.extend_from_slice(r.source_text.as_bytes());
            spliced.extend_from_slice(&bytes[r.byte_span.1..]);
            prop_assert_eq!(spliced, bytes);
        }
    }
}
