use crate::{Error, Result};

/// Area under the ROC curve as the Mann–Whitney statistic, ties counted half.
///
/// Scores are sorted once and tie groups are swept in ascending order; the
/// statistic is accumulated as the integer `2U` so the result is exact up to
/// the final division.
pub fn auc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::Shape(format!(
            "{} labels for {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {i} is {}", scores[i])));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut twice_u: u128 = 0;
    let mut neg_below: u128 = 0;
    let (mut pos_total, mut neg_total) = (0u128, 0u128);
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        let (mut pos, mut neg) = (0u128, 0u128);
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            if labels[order[end]] == 1 {
                pos += 1;
            } else {
                neg += 1;
            }
            end += 1;
        }
        twice_u += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        pos_total += pos;
        neg_total += neg;
        start = end;
    }
    if pos_total == 0 || neg_total == 0 {
        return Err(Error::UndefinedAuc);
    }
    Ok(twice_u as f64 / (2 * pos_total * neg_total) as f64)
}

/// Threshold metrics at a fixed cut-off. Precision and recall are 0 when
/// their denominators are 0, and F1 is 0 when both are 0.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Classification {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// A score is called positive when it is at least `threshold`.
pub fn accuracy_f1(labels: &[u8], scores: &[f64], threshold: f64) -> Result<Classification> {
    if labels.len() != scores.len() {
        return Err(Error::Shape(format!(
            "{} labels for {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InsufficientData("no predictions to score".into()));
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&y, &s) in labels.iter().zip(scores) {
        match (y == 1, s >= threshold) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Classification {
        accuracy: ratio(tp + tn, labels.len()),
        precision,
        recall,
        f1,
    })
}

/// Pearson correlation from a single pass of Welford co-moment updates.
pub fn correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} x values for {} y values", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData("correlation needs at least two pairs".into()));
    }
    let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, (&a, &b)) in x.iter().zip(y).enumerate() {
        let n = (i + 1) as f64;
        let dx = a - mx;
        let dy = b - my;
        mx += dx / n;
        my += dy / n;
        sxx += dx * (a - mx);
        syy += dy * (b - my);
        sxy += dx * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_perfect_and_tied() {
        assert_eq!(auc(&[1, 0], &[0.9, 0.1]).unwrap(), 1.0);
        assert_eq!(auc(&[1, 0, 1, 0], &[0.3; 4]).unwrap(), 0.5);
        assert_eq!(auc(&[0, 1], &[0.9, 0.1]).unwrap(), 0.0);
    }

    #[test]
    fn auc_single_class_is_undefined() {
        assert!(matches!(auc(&[1, 1], &[0.2, 0.4]), Err(Error::UndefinedAuc)));
        assert!(matches!(auc(&[], &[]), Err(Error::UndefinedAuc)));
    }

    #[test]
    fn auc_rejects_nan() {
        assert!(auc(&[1, 0], &[f64::NAN, 0.1]).is_err());
    }

    #[test]
    fn threshold_metrics() {
        let c = accuracy_f1(&[1, 0], &[0.6, 0.4], 0.5).unwrap();
        assert_eq!((c.accuracy, c.f1), (1.0, 1.0));
        let c = accuracy_f1(&[1, 1, 0], &[1.0, 0.0, 0.0], 0.5).unwrap();
        assert_eq!(c.precision, 1.0);
        assert_eq!(c.recall, 0.5);
        assert!((c.f1 - 2.0 / 3.0).abs() < 1e-15);
        let c = accuracy_f1(&[1, 0, 1], &[0.1, 0.2, 0.3], 0.5).unwrap();
        assert_eq!((c.precision, c.recall, c.f1), (0.0, 0.0, 0.0));
        assert!((c.accuracy - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn threshold_is_inclusive() {
        let c = accuracy_f1(&[1], &[0.5], 0.5).unwrap();
        assert_eq!(c.recall, 1.0);
    }

    #[test]
    fn correlation_of_lines() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        assert!((correlation(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((correlation(&x, &y).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(correlation(&x, &[2.0; 10]), Err(Error::UndefinedCorrelation)));
    }
}
