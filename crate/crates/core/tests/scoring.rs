use funcbench::report::{compute_delta, emit_report, leaderboard, score, ModelReport, RunManifest, Weights};
use proptest::prelude::*;

/// `n + m - 2 * LCS` over lines, by the quadratic table.
fn lcs_delta(a: &[String], b: &[String]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in (0..a.len()).rev() {
        for j in (0..b.len()).rev() {
            t[i][j] = if a[i] == b[j] { t[i + 1][j + 1] + 1 } else { t[i + 1][j].max(t[i][j + 1]) };
        }
    }
    a.len() + b.len() - 2 * t[0][0]
}

fn lines() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["{", "}", "x++;", "return x;", "", "  y = x;", "free(p);"]), 0..60)
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

fn card(id: &str, final_score: f64) -> ModelReport {
    let mut c = score(50.0, 50.0, 50.0, 0.0, Weights::default()).with_model(id);
    c.final_score = final_score;
    ModelReport { scorecard: c, excluded: false, iterations: vec![], alerts: vec![] }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn delta_matches_lcs(a in lines(), b in lines(), nl_a in any::<bool>(), nl_b in any::<bool>()) {
        let join = |v: &[String], nl: bool| {
            let mut s = v.join("\n");
            if nl && !v.is_empty() {
                s.push('\n');
            }
            s
        };
        let (ta, tb) = (join(&a, nl_a), join(&b, nl_b));
        // A trailing empty line is indistinguishable from a final newline.
        let norm = |v: &[String], t: &str| -> Vec<String> { t.lines().map(String::from).take(v.len()).collect() };
        prop_assert_eq!(compute_delta(&ta, &tb), lcs_delta(&norm(&a, &ta), &norm(&b, &tb)));
        prop_assert_eq!(compute_delta(&ta, &ta), 0);
        prop_assert_eq!(compute_delta(&ta, &tb), compute_delta(&tb, &ta));
    }

    #[test]
    fn final_is_monotone_in_each_input(
        s in prop::array::uniform3(0.0f64..=100.0),
        d in 0.0f64..50.0,
        which in 0usize..4,
        bump in 0.0f64..20.0,
    ) {
        let base = score(s[0], s[1], s[2], d, Weights::default()).final_score;
        let mut t = [s[0], s[1], s[2], d];
        t[which] = if which < 3 { (t[which] + bump).min(100.0) } else { t[which] + bump };
        let up = score(t[0], t[1], t[2], t[3], Weights::default()).final_score;
        prop_assert!(up >= base - 1e-12, "{} < {}", up, base);
    }

    #[test]
    fn ranking_survives_positive_rescaling(finals in prop::collection::vec(0.0f64..100.0, 1..12), k in 0.01f64..100.0) {
        let models: Vec<ModelReport> = finals.iter().enumerate().map(|(i, f)| card(&format!("m{i:02}"), *f)).collect();
        let scaled: Vec<ModelReport> = finals.iter().enumerate().map(|(i, f)| card(&format!("m{i:02}"), f * k)).collect();
        let order = |m: &[ModelReport]| leaderboard(m).into_iter().map(|e| (e.scorecard.model_id, e.rank)).collect::<Vec<_>>();
        prop_assert_eq!(order(&models), order(&scaled));
    }
}

#[test]
fn baseline_identity() {
    let c = score(100.0, 100.0, 100.0, 0.0, Weights::default());
    assert!((c.final_score - 100.0).abs() < 1e-12);
}

#[test]
fn report_bundle_lists_every_model() {
    let dir = tempfile::tempdir().unwrap();
    let mut excluded = card("org/echo", 99.0);
    excluded.excluded = true;
    let files = emit_report(dir.path(), &[card("org/a", 70.0), excluded, card("org/b", 80.0)], &RunManifest::default())
        .unwrap();
    let md = std::fs::read_to_string(&files.leaderboard_md).unwrap();
    let rows: Vec<&str> = md.lines().skip(2).collect();
    assert!(rows[0].starts_with("| 1 | org/b |"), "{md}");
    assert!(rows[1].starts_with("| 2 | org/a |"), "{md}");
    assert!(rows[2].starts_with("| excluded | org/echo |"), "{md}");
    assert_eq!(files.heatmaps.len(), 3);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&files.leaderboard_json).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 3);
    assert!(files.manifest.is_file());
}
