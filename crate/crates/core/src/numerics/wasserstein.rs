use crate::{Error, Result};

/// 1-D Wasserstein-1 distance between two equal-size empirical samples:
/// the mean absolute difference of the sorted samples.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("wasserstein_1d needs non-empty samples"));
    }
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "wasserstein_1d needs equal sample sizes, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let total: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum();
    Ok(total / sa.len() as f64)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    /// Optimal matching cost by trying every permutation.
    fn brute_force(a: &[f64], b: &[f64]) -> f64 {
        fn permute(k: usize, idx: &mut Vec<usize>, a: &[f64], b: &[f64], best: &mut f64) {
            if k == idx.len() {
                let cost: f64 = idx.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).abs()).sum();
                *best = best.min(cost / a.len() as f64);
                return;
            }
            for i in k..idx.len() {
                idx.swap(k, i);
                permute(k + 1, idx, a, b, best);
                idx.swap(k, i);
            }
        }
        let mut best = f64::INFINITY;
        permute(0, &mut (0..a.len()).collect(), a, b, &mut best);
        best
    }

    #[test]
    fn examples() {
        assert_eq!(wasserstein_1d(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(wasserstein_1d(&[0.0], &[2.0]).unwrap(), 2.0);
        let oracle = brute_force(&[0.0, 1.0], &[0.5, 1.5]);
        assert_eq!(oracle, 0.5);
        assert_eq!(wasserstein_1d(&[0.0, 1.0], &[0.5, 1.5]).unwrap(), oracle);
    }

    #[test]
    fn errors() {
        assert!(wasserstein_1d(&[], &[]).is_err());
        assert!(wasserstein_1d(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force(pairs in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..6)) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let w = wasserstein_1d(&a, &b).unwrap();
            prop_assert!((w - brute_force(&a, &b)).abs() < 1e-12);
        }

        #[test]
        fn is_a_metric(triples in prop::collection::vec((-9.0..9.0f64, -9.0..9.0f64, -9.0..9.0f64), 1..40)) {
            let a: Vec<f64> = triples.iter().map(|t| t.0).collect();
            let b: Vec<f64> = triples.iter().map(|t| t.1).collect();
            let c: Vec<f64> = triples.iter().map(|t| t.2).collect();
            let ab = wasserstein_1d(&a, &b).unwrap();
            prop_assert_eq!(ab, wasserstein_1d(&b, &a).unwrap());
            prop_assert_eq!(wasserstein_1d(&a, &a).unwrap(), 0.0);
            let ac = wasserstein_1d(&a, &c).unwrap();
            let cb = wasserstein_1d(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-12);
        }
    }
}
