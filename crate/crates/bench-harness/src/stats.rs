//! Order statistics used by the reports.

/// Nearest-rank percentile of ascending `sorted` data: the smallest value
/// with at least `p` percent of the data at or below it.
pub fn nearest_rank(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

pub fn sorted(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    nearest_rank(&sorted(values), 50.0)
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Relative change of the VNI median over the baseline median.
pub fn overhead(median_vni: f64, median_novni: f64) -> f64 {
    (median_vni - median_novni) / median_novni
}

/// True when the series never falls before its (first) maximum and never
/// rises after it.
pub fn is_single_peaked(counts: &[usize]) -> bool {
    let Some(peak) = counts.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).map(|p| p.0)
    else {
        return true;
    };
    counts[..=peak].windows(2).all(|w| w[0] <= w[1]) && counts[peak..].windows(2).all(|w| w[0] >= w[1])
}
