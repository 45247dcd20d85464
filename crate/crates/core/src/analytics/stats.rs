use serde::Serialize;

use super::AnalyticsError;

/// Five-number summary of turn lengths in words.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TurnLengthStats {
    pub min: u32,
    pub max: u32,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Linear-interpolation quantile over an ascending slice: `h = (n-1)p`,
/// `x[floor h] + (h - floor h)(x[ceil h] - x[floor h])`.
///
/// For integer inputs and `p` in quarters every intermediate value is a
/// multiple of 1/4, so the result is exact in `f64`.
fn quantile(sorted: &[u32], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let (a, b) = (f64::from(sorted[lo]), f64::from(sorted[hi]));
    a + (h - h.floor()) * (b - a)
}

pub fn turn_length_stats(lengths: &[u32]) -> Result<TurnLengthStats, AnalyticsError> {
    if lengths.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    Ok(TurnLengthStats {
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
    })
}
