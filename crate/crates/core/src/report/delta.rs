//! Line-level dissimilarity between an original function and its rewrite.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Lines deleted plus lines inserted in a shortest line diff. A changed line
/// counts twice. A missing final newline is not a difference.
pub fn compute_delta(original: &str, modified: &str) -> usize {
    let a: Vec<&str> = original.lines().collect();
    let b: Vec<&str> = modified.lines().collect();
    myers_distance(&a, &b)
}

/// Myers' O((N+M)D) greedy search for the insert/delete edit distance.
fn myers_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (n, m) = (a.len() as isize, b.len() as isize);
    let max = (n + m) as usize;
    if max == 0 {
        return 0;
    }
    let offset = max as isize;
    // v[k + offset] = furthest x reached on diagonal k.
    let mut v = vec![0isize; 2 * max + 2];
    for d in 0..=max as isize {
        let mut k = -d;
        while k <= d {
            let idx = (k + offset) as usize;
            let mut x = if k == -d || (k != d && v[idx - 1] < v[idx + 1]) { v[idx + 1] } else { v[idx - 1] + 1 };
            let mut y = x - k;
            while x < n && y < m && a[x as usize] == b[y as usize] {
                x += 1;
                y += 1;
            }
            v[idx] = x;
            if x >= n && y >= m {
                return d as usize;
            }
            k += 2;
        }
    }
    unreachable!("edit distance is bounded by n + m")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub model_id: String,
    pub per_function_changed_lines: BTreeMap<String, usize>,
    pub d_raw: f64,
    pub threshold: f64,
    pub below_threshold: bool,
}

pub const DEFAULT_DELTA_THRESHOLD: f64 = 1.0;

/// Mean changed-line count over `(function_id, original, candidate)` triples.
pub fn aggregate_delta<'a, I>(model_id: &str, pairs: I, threshold: f64) -> Result<DeltaReport, String>
where
    I: IntoIterator<Item = (&'a str, &'a str, &'a str)>,
{
    let per: BTreeMap<String, usize> =
        pairs.into_iter().map(|(id, orig, cand)| (id.to_string(), compute_delta(orig, cand))).collect();
    if per.is_empty() {
        return Err(format!("{model_id}: no generations to measure dissimilarity on"));
    }
    let d_raw = per.values().sum::<usize>() as f64 / per.len() as f64;
    Ok(DeltaReport {
        model_id: model_id.to_string(),
        per_function_changed_lines: per,
        d_raw,
        threshold,
        below_threshold: d_raw < threshold,
    })
}
