//! The two reproducible studies: the simplex-to-box rank-scaling scan and
//! the local-surrogate validation pipeline, with CSV/JSON emitters.

pub mod rank_scan;
pub mod validate;

/// Type-7 percentile (linear interpolation) on a pre-sorted slice.
pub fn percentile(sorted: &[f64], frac: f64) -> f64 {
    assert!(!sorted.is_empty());
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    if sorted.len() == 1 {
        return sorted[0];
    }
    let idx = frac * (sorted.len() - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    sorted[lo] + (idx - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &mut Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in medians"));
    percentile(values, 0.5)
}
