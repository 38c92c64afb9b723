use std::ops::Range;

/// Splits a sorted sequence into runs whose consecutive gaps are at most
/// `tol` (single linkage), returned as index ranges.
pub fn level_runs(sorted: &[f64], tol: f64) -> Vec<Range<usize>> {
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=sorted.len() {
        if i == sorted.len() || (sorted[i] - sorted[i - 1]).abs() > tol {
            if i > start {
                runs.push(start..i);
            }
            start = i;
        }
    }
    runs
}

/// Number of distinct levels among `values` at tolerance `tol`.
pub fn count_levels(values: &[f64], tol: f64) -> usize {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    level_runs(&v, tol).len()
}
