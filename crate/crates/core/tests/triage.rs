mod common;

use std::collections::BTreeSet;

use common::*;
use funcbench::sanitizer::{
    compute_s3, dedup_key, dedupe_alerts, AlertSource, Category, RunRef, SanitizerAlert, SanitizerTool,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const KINDS: &[(&str, SanitizerTool)] = &[
    ("heap-buffer-overflow", SanitizerTool::Asan),
    ("heap-use-after-free", SanitizerTool::Asan),
    ("SEGV", SanitizerTool::Asan),
    ("signed-integer-overflow", SanitizerTool::Ubsan),
    ("detected memory leaks", SanitizerTool::Lsan),
];

fn alert(kind: usize, frames: &[u8], source: AlertSource, seq: u64) -> SanitizerAlert {
    let (k, tool) = KINDS[kind];
    let frames = frames.iter().map(|f| format!("fn_{f}")).collect();
    SanitizerAlert::new(tool, k, frames, RunRef::new(source, seq, format!("run-{seq}")))
}

fn any_alert() -> impl Strategy<Value = SanitizerAlert> {
    (
        0..KINDS.len(),
        prop::collection::vec(0u8..4, 0..4),
        prop_oneof![Just(AlertSource::Compile), Just(AlertSource::Test), Just(AlertSource::Fuzz)],
        0u64..6,
    )
        .prop_map(|(k, f, s, seq)| alert(k, &f, s, seq))
}

#[test]
fn thousand_alerts_with_137_keys() {
    // Key i gets 1 + (i mod 13) copies, then the rest go to key 0.
    let mut alerts = Vec::new();
    let mut keys = BTreeSet::new();
    for i in 0..137u32 {
        let frames = [(i / 25) as u8, (i % 25) as u8];
        for c in 0..=(i % 13) {
            alerts.push(alert((i % 5) as usize, &frames, AlertSource::Test, c as u64));
        }
        keys.insert(alerts.last().unwrap().dedup_key.clone());
    }
    while alerts.len() < 1000 {
        alerts.push(alert(0, &[0, 0], AlertSource::Fuzz, alerts.len() as u64));
    }
    assert_eq!(keys.len(), 137);
    let reference = dedupe_alerts(alerts.clone());
    assert_eq!(reference.len(), 137);
    let got: BTreeSet<String> = reference.iter().map(|a| a.dedup_key.clone()).collect();
    assert_eq!(got, keys);
    let mut rng = ChaCha8Rng::seed_from_u64(137);
    for _ in 0..1000 {
        alerts.shuffle(&mut rng);
        assert_eq!(dedupe_alerts(alerts.clone()), reference);
    }
}

#[test]
fn golden_alerts_round_trip_through_json() {
    for l in golden_labels().log {
        for a in parse_golden(&l.file) {
            let json = serde_json::to_string(&a).unwrap();
            let back: SanitizerAlert = serde_json::from_str(&json).unwrap();
            assert_eq!(back, a, "{}", l.file);
            assert_eq!(a.dedup_key, dedup_key(a.category, &a.kind, &a.top_frames));
        }
    }
}

#[test]
fn compile_and_test_sightings_pool_to_one() {
    let log = std::fs::read_to_string(fixtures().join("golden_logs/01-gcc-heap_read.log")).unwrap();
    let opts = Default::default();
    let mut all = funcbench::sanitizer::parse_sanitizer_logs(&log, &RunRef::new(AlertSource::Test, 3, "t"), &opts);
    all.extend(funcbench::sanitizer::parse_sanitizer_logs(&log, &RunRef::new(AlertSource::Compile, 9, "c"), &opts));
    let unique = dedupe_alerts(all);
    assert_eq!(unique.len(), 1);
    assert_eq!(unique[0].first_seen.source, AlertSource::Compile);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn dedupe_is_idempotent_and_order_invariant(alerts in prop::collection::vec(any_alert(), 0..60), seed in any::<u64>()) {
        let once = dedupe_alerts(alerts.clone());
        prop_assert_eq!(&dedupe_alerts(once.clone()), &once);
        let mut shuffled = alerts.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(&dedupe_alerts(shuffled), &once);
        let keys: BTreeSet<&str> = alerts.iter().map(|a| a.dedup_key.as_str()).collect();
        prop_assert_eq!(once.len(), keys.len());
        prop_assert!(once.windows(2).all(|w| w[0].dedup_key < w[1].dedup_key));
        for u in &once {
            let earliest = alerts.iter().filter(|a| a.dedup_key == u.dedup_key).map(|a| &a.first_seen).min().unwrap();
            prop_assert_eq!(&u.first_seen, earliest);
        }
    }

    #[test]
    fn alerts_round_trip_through_json(a in any_alert()) {
        let back: SanitizerAlert = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn s3_is_monotone_and_leaks_weigh_less(
        others in 0usize..200,
        leaks in 0usize..200,
        penalty in 0.01f64..2.0,
        factor in 0.0f64..=1.0,
    ) {
        let set = |n: usize, l: usize| -> Vec<SanitizerAlert> {
            let mut v: Vec<SanitizerAlert> = (0..n).map(|i| alert(0, &[(i % 200) as u8, (i / 200) as u8], AlertSource::Test, 0)).collect();
            v.extend((0..l).map(|i| alert(4, &[(i % 200) as u8, (i / 200) as u8], AlertSource::Test, 0)));
            v
        };
        let base = compute_s3(&set(others, leaks), penalty, factor);
        prop_assert!((0.0..=100.0).contains(&base));
        prop_assert!(compute_s3(&set(others + 1, leaks), penalty, factor) <= base);
        prop_assert!(compute_s3(&set(others, leaks + 1), penalty, factor) >= compute_s3(&set(others + 1, leaks), penalty, factor));
        let want = (100.0 - penalty * (others as f64 + factor * leaks as f64)).max(0.0);
        prop_assert!((base - want).abs() < 1e-9);
    }

    #[test]
    fn every_alert_gets_one_category(kind in "[a-z-]{1,24}", tool in 0usize..4) {
        let tool = [SanitizerTool::Asan, SanitizerTool::Ubsan, SanitizerTool::Lsan, SanitizerTool::Other][tool];
        let a = SanitizerAlert::new(tool, kind, vec![], RunRef::new(AlertSource::Fuzz, 0, "x"));
        prop_assert!(Category::ALL.contains(&a.category));
    }
}
