//! Small numeric helpers shared across modules.

/// `max - min` of a list, zero when it has fewer than two entries.
pub fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        hi - lo
    } else {
        0.0
    }
}

/// Collapses runs of a sorted list whose consecutive gaps are at most `tol`,
/// keeping the first member of each run.
pub fn merge_close(sorted: &[f64], tol: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(sorted.len());
    let mut run_end = f64::NEG_INFINITY;
    for &x in sorted {
        if x - run_end > tol || out.is_empty() {
            out.push(x);
        }
        run_end = x;
    }
    out
}

/// Symmetric Hausdorff distance between two finite point sets.
pub fn hausdorff(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let one_way = |x: &[f64], y: &[f64]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_and_merge() {
        assert_eq!(spread(&[]), 0.0);
        assert_eq!(spread(&[3.0]), 0.0);
        assert_eq!(spread(&[1.0, -2.0, 4.0]), 6.0);
        assert_eq!(merge_close(&[0.0, 1e-12, 1.0, 2.0, 2.0 + 1e-12], 1e-9), vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn hausdorff_distance() {
        assert_eq!(hausdorff(&[0.0, 1.0], &[0.0, 1.5]), 0.5);
        assert_eq!(hausdorff(&[0.0], &[0.0, 2.0]), 2.0);
        assert!(hausdorff(&[], &[1.0]).is_infinite());
    }
}
