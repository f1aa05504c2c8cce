//! Evaluation metrics and the guessing baselines.

use crate::error::MetricError;

fn same_len(a: usize, b: usize) -> Result<(), MetricError> {
    if a != b {
        return Err(MetricError::LengthMismatch { predictions: a, labels: b });
    }
    if a == 0 {
        return Err(MetricError::Empty);
    }
    Ok(())
}

/// Micro-averaged F1 with each sentence a binary instance (positive = the
/// plot-hole sentence). With one predicted and one true positive per story,
/// TP = matches and FP = FN = misses, so F1 equals the exact-match rate.
pub fn f1_continuity(predictions: &[usize], labels: &[usize]) -> Result<f64, MetricError> {
    same_len(predictions.len(), labels.len())?;
    let tp = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    let miss = predictions.len() - tp;
    Ok(2.0 * tp as f64 / (2.0 * tp as f64 + 2.0 * miss as f64))
}

pub fn mse_unresolved(predictions: &[f64], labels: &[f64]) -> Result<f64, MetricError> {
    same_len(predictions.len(), labels.len())?;
    Ok(predictions.iter().zip(labels).map(|(p, l)| (p - l) * (p - l)).sum::<f64>() / predictions.len() as f64)
}

/// Constant guess of the unresolved baseline.
pub const GUESS_FRACTION: f64 = 0.05;

/// Expected F1 of guessing a uniformly random sentence: the mean of `1/n_i`.
pub fn expected_guess_f1(story_lengths: &[usize]) -> Result<f64, MetricError> {
    if story_lengths.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(story_lengths.iter().map(|&n| 1.0 / n as f64).sum::<f64>() / story_lengths.len() as f64)
}

/// MSE of always guessing 0.05. Computed as `mean((20r − 1)²) / 400`,
/// where the guess is the integer 1 and so exact in floating point.
pub fn expected_guess_mse(labels: &[f64]) -> Result<f64, MetricError> {
    if labels.is_empty() {
        return Err(MetricError::Empty);
    }
    let scale = 1.0 / GUESS_FRACTION;
    let sum: f64 = labels.iter().map(|r| (scale * r - 1.0).powi(2)).sum();
    Ok(sum / labels.len() as f64 / (scale * scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counts() {
        assert_eq!(f1_continuity(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(f1_continuity(&[0, 4], &[0, 3]).unwrap(), 0.5);
        assert_eq!(mse_unresolved(&[0.2, 0.4], &[0.2, 0.4]).unwrap(), 0.0);
        assert!((mse_unresolved(&[0.0], &[0.1]).unwrap() - 0.01).abs() < 1e-15);
        assert!(matches!(f1_continuity(&[1], &[1, 2]), Err(MetricError::LengthMismatch { .. })));
    }

    #[test]
    fn baselines() {
        assert_eq!(expected_guess_f1(&[2, 4]).unwrap(), 0.375);
        assert_eq!(expected_guess_mse(&[0.0, 0.1]).unwrap(), 2.5e-3);
    }
}
