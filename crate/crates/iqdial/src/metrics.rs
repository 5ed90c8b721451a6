//! Evaluation metrics for ordinal multi-class prediction: unweighted
//! average recall, linearly weighted Cohen's kappa, and Spearman's rho.

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("empty label sequence")]
    Empty,
    #[error("gold and prediction lengths differ: {gold} vs {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("label {value} outside [1, {classes}]")]
    LabelOutOfRange { value: usize, classes: usize },
    #[error("correlation undefined: {side} sequence is constant")]
    UndefinedCorrelation { side: &'static str },
}

/// Paired gold/predicted labels in 1..=C.
#[derive(Clone, Debug)]
pub struct LabelPairs<'a> {
    gold: &'a [usize],
    pred: &'a [usize],
    classes: usize,
}

impl<'a> LabelPairs<'a> {
    pub fn new(gold: &'a [usize], pred: &'a [usize], classes: usize) -> Result<Self, MetricError> {
        if gold.is_empty() {
            return Err(MetricError::Empty);
        }
        if gold.len() != pred.len() {
            return Err(MetricError::LengthMismatch { gold: gold.len(), pred: pred.len() });
        }
        for &v in gold.iter().chain(pred) {
            if v < 1 || v > classes {
                return Err(MetricError::LabelOutOfRange { value: v, classes });
            }
        }
        Ok(LabelPairs { gold, pred, classes })
    }

    pub fn len(&self) -> usize {
        self.gold.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gold.is_empty()
    }
}

/// Mean of per-class recalls over the classes that occur in gold. Classes
/// absent from gold are excluded so they cannot contribute zero recalls.
pub fn uar(pairs: &LabelPairs) -> Result<f64, MetricError> {
    let c = pairs.classes;
    let mut support = vec![0usize; c];
    let mut hits = vec![0usize; c];
    for (&g, &p) in pairs.gold.iter().zip(pairs.pred) {
        support[g - 1] += 1;
        if g == p {
            hits[g - 1] += 1;
        }
    }
    let mut sum = 0.0;
    let mut present = 0;
    for k in 0..c {
        if support[k] > 0 {
            sum += hits[k] as f64 / support[k] as f64;
            present += 1;
        }
    }
    Ok(sum / present as f64)
}

/// Linearly weighted Cohen's kappa with weights |i−j|/(C−1). When both
/// raters are constant and identical the disagreement denominator is zero
/// and kappa is defined as 1.
pub fn weighted_kappa_linear(pairs: &LabelPairs) -> Result<f64, MetricError> {
    let c = pairs.classes;
    let n = pairs.len() as f64;
    let mut joint = vec![0.0; c * c];
    let mut marg_gold = vec![0.0; c];
    let mut marg_pred = vec![0.0; c];
    for (&g, &p) in pairs.gold.iter().zip(pairs.pred) {
        joint[(g - 1) * c + (p - 1)] += 1.0 / n;
        marg_gold[g - 1] += 1.0 / n;
        marg_pred[p - 1] += 1.0 / n;
    }
    let weight = |i: usize, j: usize| {
        if c == 1 {
            0.0
        } else {
            (i as f64 - j as f64).abs() / (c as f64 - 1.0)
        }
    };
    let mut observed = 0.0;
    let mut expected = 0.0;
    for i in 0..c {
        for j in 0..c {
            let w = weight(i, j);
            observed += w * joint[i * c + j];
            expected += w * marg_gold[i] * marg_pred[j];
        }
    }
    if expected == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - observed / expected)
}

/// Spearman's rho: Pearson correlation of average ranks, ties resolved to
/// the mean rank. Errors when either side is constant.
pub fn spearman_rho(pairs: &LabelPairs) -> Result<f64, MetricError> {
    let gold_const = pairs.gold.iter().all(|&v| v == pairs.gold[0]);
    let pred_const = pairs.pred.iter().all(|&v| v == pairs.pred[0]);
    if gold_const {
        return Err(MetricError::UndefinedCorrelation { side: "gold" });
    }
    if pred_const {
        return Err(MetricError::UndefinedCorrelation { side: "pred" });
    }
    let rg = average_ranks(pairs.gold);
    let rp = average_ranks(pairs.pred);
    Ok(pearson(&rg, &rp))
}

/// Average ranks (1-based); tied values share the mean of their ranks.
fn average_ranks(values: &[usize]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| values[i]);
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j hold ties; their ranks average to (i+1 + j+1)/2
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    cov / (vx.sqrt() * vy.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_scores_one() {
        let gold = [1, 2, 3, 4, 5];
        let pairs = LabelPairs::new(&gold, &gold, 5).unwrap();
        assert_eq!(uar(&pairs).unwrap(), 1.0);
        assert_eq!(weighted_kappa_linear(&pairs).unwrap(), 1.0);
        assert!((spearman_rho(&pairs).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uar_hand_computed() {
        let pairs = LabelPairs::new(&[1, 1, 2, 2], &[1, 2, 2, 2], 2).unwrap();
        assert!((uar(&pairs).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn uar_constant_predictor_balanced_gold() {
        let gold = [1, 2, 3, 4, 5, 1, 2, 3, 4, 5];
        let pred = [3; 10];
        let pairs = LabelPairs::new(&gold, &pred, 5).unwrap();
        assert!((uar(&pairs).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn kappa_hand_computed() {
        let pairs = LabelPairs::new(&[1, 1, 2, 2], &[1, 2, 2, 2], 2).unwrap();
        assert!((weighted_kappa_linear(&pairs).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kappa_symmetric_in_arguments() {
        let gold = [1, 3, 2, 5, 4, 1, 2];
        let pred = [2, 3, 2, 4, 4, 1, 5];
        let a = weighted_kappa_linear(&LabelPairs::new(&gold, &pred, 5).unwrap()).unwrap();
        let b = weighted_kappa_linear(&LabelPairs::new(&pred, &gold, 5).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn kappa_constant_equal_raters_is_one() {
        let pairs = LabelPairs::new(&[2, 2, 2], &[2, 2, 2], 5).unwrap();
        assert_eq!(weighted_kappa_linear(&pairs).unwrap(), 1.0);
    }

    #[test]
    fn spearman_reversed_is_minus_one() {
        let pairs = LabelPairs::new(&[1, 2, 3, 4, 5], &[5, 4, 3, 2, 1], 5).unwrap();
        assert!((spearman_rho(&pairs).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_hand_computed_with_ties() {
        // pred ranks (1, 2.5, 2.5) → rho = 0.5/sqrt(1/3)
        let pairs = LabelPairs::new(&[1, 2, 3], &[1, 3, 3], 5).unwrap();
        let expected = 0.5 / (1.0f64 / 3.0).sqrt();
        assert!((spearman_rho(&pairs).unwrap() - expected).abs() < 1e-12);
        assert!((spearman_rho(&pairs).unwrap() - 0.8660).abs() < 1e-4);
    }

    #[test]
    fn spearman_constant_side_errors() {
        let pairs = LabelPairs::new(&[2, 2, 2], &[1, 2, 3], 5).unwrap();
        assert!(matches!(
            spearman_rho(&pairs),
            Err(MetricError::UndefinedCorrelation { side: "gold" })
        ));
        let pairs = LabelPairs::new(&[1, 2, 3], &[2, 2, 2], 5).unwrap();
        assert!(matches!(
            spearman_rho(&pairs),
            Err(MetricError::UndefinedCorrelation { side: "pred" })
        ));
    }

    #[test]
    fn label_range_enforced() {
        assert!(LabelPairs::new(&[0, 1], &[1, 1], 5).is_err());
        assert!(LabelPairs::new(&[1, 6], &[1, 1], 5).is_err());
        assert!(LabelPairs::new(&[], &[], 5).is_err());
    }
}
