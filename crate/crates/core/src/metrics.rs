//! Classification and estimation metrics, and aggregation over replications.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mann–Whitney AUC with ties counted as one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!("{} scores, {} labels", scores.len(), labels.len())));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Dataset("AUC needs both classes".into()));
    }
    // sum of midranks of the positives
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let midrank = (start + end + 1) as f64 / 2.0;
        rank_sum += midrank * order[start..end].iter().filter(|&&i| labels[i] == 1).count() as f64;
        start = end;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

impl Confusion {
    pub fn from_predictions(preds: &[u8], labels: &[u8]) -> Result<Self> {
        if preds.len() != labels.len() {
            return Err(Error::Dimension(format!("{} predictions, {} labels", preds.len(), labels.len())));
        }
        let mut c = Self::default();
        for (&p, &l) in preds.iter().zip(labels) {
            match (p, l) {
                (1, 1) => c.true_positives += 1,
                (1, _) => c.false_positives += 1,
                (_, 1) => c.false_negatives += 1,
                _ => c.true_negatives += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }
}

/// Ratios with a zero denominator are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMetrics {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn confusion_metrics(preds: &[u8], labels: &[u8]) -> Result<ConfusionMetrics> {
    if preds.is_empty() {
        return Err(Error::Dataset("no predictions".into()));
    }
    let c = Confusion::from_predictions(preds, labels)?;
    let precision = ratio(c.true_positives, c.true_positives + c.false_positives);
    let sensitivity = ratio(c.true_positives, c.true_positives + c.false_negatives);
    let f1 = match (precision, sensitivity) {
        (Some(p), Some(s)) if p + s > 0.0 => Some(2.0 * p * s / (p + s)),
        _ => None,
    };
    Ok(ConfusionMetrics {
        accuracy: (c.true_positives + c.true_negatives) as f64 / c.total() as f64,
        precision,
        sensitivity,
        specificity: ratio(c.true_negatives, c.true_negatives + c.false_positives),
        f1,
    })
}

/// Mean squared difference between probability and label.
pub fn brier(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::Dimension(format!("{} scores, {} labels", scores.len(), labels.len())));
    }
    let sum: f64 = scores.iter().zip(labels).map(|(s, &l)| (s - f64::from(l)).powi(2)).sum();
    Ok(sum / scores.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub auc: f64,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
    pub brier: f64,
}

/// All classification metrics, with classes thresholded at `threshold`.
pub fn classification_metrics(probabilities: &[f64], labels: &[u8], threshold: f64) -> Result<ClassificationMetrics> {
    let preds: Vec<u8> = probabilities.iter().map(|&p| u8::from(p >= threshold)).collect();
    let c = confusion_metrics(&preds, labels)?;
    Ok(ClassificationMetrics {
        auc: auc(probabilities, labels)?,
        accuracy: c.accuracy,
        precision: c.precision,
        sensitivity: c.sensitivity,
        specificity: c.specificity,
        f1: c.f1,
        brier: brier(probabilities, labels)?,
    })
}

/// Mean and sample standard deviation (`n − 1` denominator; 0 for a single
/// value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(Summary {
        mean,
        sd,
        count: values.len(),
    })
}

/// Summaries of named per-run metric lists, in the given order. Lists that
/// are empty are skipped.
pub fn aggregate_runs<'a>(per_run: impl IntoIterator<Item = (&'a str, &'a [f64])>) -> Vec<(String, Summary)> {
    per_run
        .into_iter()
        .filter_map(|(name, vals)| summarize(vals).map(|s| (name.to_string(), s)))
        .collect()
}

/// Per-coefficient bias and RMSE over runs, plus each run's `‖β̂ − β‖`
/// and `‖β̂‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationMetrics {
    pub bias: Vec<f64>,
    pub rmse: Vec<f64>,
    /// Mean over runs of `|β̂_j − β_j|`.
    pub mean_abs_error: Vec<f64>,
    pub error_norms: Vec<f64>,
    pub norms: Vec<f64>,
}

pub fn estimation_metrics(estimates: &[Vec<f64>], truth: &[f64]) -> Result<EstimationMetrics> {
    if estimates.is_empty() {
        return Err(Error::Dataset("no estimates".into()));
    }
    if let Some(e) = estimates.iter().find(|e| e.len() != truth.len()) {
        return Err(Error::Dimension(format!("estimate has {} entries, truth has {}", e.len(), truth.len())));
    }
    let r = estimates.len() as f64;
    let p = truth.len();
    let column = |f: &dyn Fn(f64) -> f64| -> Vec<f64> {
        (0..p)
            .map(|j| estimates.iter().map(|e| f(e[j] - truth[j])).sum::<f64>() / r)
            .collect()
    };
    Ok(EstimationMetrics {
        bias: column(&|d| d),
        rmse: column(&|d| d * d).into_iter().map(f64::sqrt).collect(),
        mean_abs_error: column(&f64::abs),
        error_norms: estimates
            .iter()
            .map(|e| e.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .collect(),
        norms: estimates.iter().map(|e| e.iter().map(|a| a * a).sum::<f64>().sqrt()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.4; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
        assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(), 0.75);
        assert!(auc(&[0.1, 0.2], &[1, 1]).is_err());
    }

    #[test]
    fn confusion_examples() {
        let labels = [1, 0, 1, 0, 1, 1];
        let m = confusion_metrics(&labels, &labels).unwrap();
        assert_eq!(
            (m.accuracy, m.precision, m.sensitivity, m.specificity, m.f1),
            (1.0, Some(1.0), Some(1.0), Some(1.0), Some(1.0))
        );
        let flipped: Vec<u8> = [1, 0, 1, 0].iter().map(|l| 1 - l).collect();
        assert_eq!(confusion_metrics(&flipped, &[1, 0, 1, 0]).unwrap().accuracy, 0.0);

        // TP=3 FP=1 FN=1 TN=5
        let preds = [1, 1, 1, 1, 0, 0, 0, 0, 0, 0];
        let truth = [1, 1, 1, 0, 1, 0, 0, 0, 0, 0];
        let m = confusion_metrics(&preds, &truth).unwrap();
        assert_eq!(m.precision, Some(0.75));
        assert_eq!(m.sensitivity, Some(0.75));
        assert_abs_diff_eq!(m.specificity.unwrap(), 5.0 / 6.0, epsilon = 1e-15);
        assert_eq!(m.accuracy, 0.8);
        assert_abs_diff_eq!(m.f1.unwrap(), 0.75, epsilon = 1e-15);

        let none = confusion_metrics(&[0, 0], &[0, 0]).unwrap();
        assert_eq!((none.precision, none.sensitivity, none.f1), (None, None, None));
        assert!(confusion_metrics(&[], &[]).is_err());
    }

    #[test]
    fn brier_examples() {
        assert_eq!(brier(&[0.5; 4], &[0, 1, 1, 0]).unwrap(), 0.25);
        assert_eq!(brier(&[1.0, 0.0], &[1, 0]).unwrap(), 0.0);
        assert_abs_diff_eq!(brier(&[0.8, 0.3], &[1, 0]).unwrap(), 0.065, epsilon = 1e-15);
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(summarize(&[2.0; 5]).unwrap().sd, 0.0);
        let s = summarize(&[0.0, 1.0]).unwrap();
        assert_eq!(s.mean, 0.5);
        assert_abs_diff_eq!(s.sd, 0.5f64.sqrt(), epsilon = 1e-15);
        assert!(summarize(&[]).is_none());

        let vals: Vec<f64> = (0..100).map(|i| ((i * 37) % 101) as f64 / 7.0 + 1e3).collect();
        let s = summarize(&vals).unwrap();
        // Welford's streaming recurrence
        let (mut mean, mut m2) = (0.0, 0.0);
        for (k, v) in vals.iter().enumerate() {
            let d = v - mean;
            mean += d / (k + 1) as f64;
            m2 += d * (v - mean);
        }
        assert_abs_diff_eq!(s.mean, mean, epsilon = 1e-12);
        assert_abs_diff_eq!(s.sd, (m2 / 99.0).sqrt(), epsilon = 1e-12);

        let a = [1.0, 2.0];
        let table = aggregate_runs([("auc", &a[..]), ("none", &[][..])]);
        assert_eq!(table.len(), 1);
        assert_eq!(table[0].0, "auc");
    }

    #[test]
    fn estimation_examples() {
        let est = vec![vec![1.0, 0.0], vec![3.0, 0.0]];
        let m = estimation_metrics(&est, &[1.0, 1.0]).unwrap();
        assert_eq!(m.bias, vec![1.0, -1.0]);
        assert_eq!(m.rmse, vec![2.0f64.sqrt(), 1.0]);
        assert_eq!(m.mean_abs_error, vec![1.0, 1.0]);
        assert_eq!(m.error_norms, vec![1.0, 5.0f64.sqrt()]);
        assert_eq!(m.norms, vec![1.0, 3.0]);
        for (r, b) in m.rmse.iter().zip(&m.bias) {
            assert!(r * r >= b * b - 1e-15);
        }
    }

    fn scores_and_labels() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (2usize..60).prop_flat_map(|n| {
            (
                prop::collection::vec(prop_oneof![(0u8..20).prop_map(|k| f64::from(k) / 20.0), 0.0f64..1.0], n),
                prop::collection::vec(0u8..=1, n),
            )
        })
        .prop_filter("both classes", |(_, l)| l.contains(&0) && l.contains(&1))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn auc_invariant_under_monotone_transforms((scores, labels) in scores_and_labels(), a in 0.1f64..5.0, b in -3.0f64..3.0) {
            let base = auc(&scores, &labels).unwrap();
            let affine: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
            let cubed: Vec<f64> = scores.iter().map(|s| (s - 0.5).powi(3)).collect();
            let logit: Vec<f64> = scores.iter().map(|s| (s.clamp(1e-9, 1.0 - 1e-9) / (1.0 - s.clamp(1e-9, 1.0 - 1e-9))).ln()).collect();
            let expd: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
            prop_assert_eq!(auc(&affine, &labels).unwrap(), base);
            prop_assert_eq!(auc(&cubed, &labels).unwrap(), base);
            prop_assert_eq!(auc(&expd, &labels).unwrap(), base);
            // the clamp can merge scores at the ends of [0, 1]
            if scores.iter().all(|s| *s > 1e-9 && *s < 1.0 - 1e-9) {
                prop_assert_eq!(auc(&logit, &labels).unwrap(), base);
            }
        }

        #[test]
        fn auc_label_swap_and_ranges((scores, labels) in scores_and_labels()) {
            let base = auc(&scores, &labels).unwrap();
            let flipped_s: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
            let flipped_l: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
            prop_assert!((auc(&flipped_s, &flipped_l).unwrap() - base).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&base));
            let b = brier(&scores, &labels).unwrap();
            prop_assert!((0.0..=1.0).contains(&b));
            let preds: Vec<u8> = scores.iter().map(|&s| u8::from(s >= 0.5)).collect();
            let m = confusion_metrics(&preds, &labels).unwrap();
            let c = Confusion::from_predictions(&preds, &labels).unwrap();
            prop_assert_eq!(m.accuracy, (c.true_positives + c.true_negatives) as f64 / labels.len() as f64);
            if let (Some(p), Some(s), Some(f)) = (m.precision, m.sensitivity, m.f1) {
                prop_assert!((2.0 / f - (1.0 / p + 1.0 / s)).abs() < 1e-9);
            }
        }
    }
}
