//! Classification metrics.

/// Area under the ROC curve via the Mann-Whitney statistic; tied scores
/// count one half. `None` unless both classes are present.
pub fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    // Sum of (1-based, tie-averaged) ranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum += avg;
            }
        }
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    /// Predicts positive when `score >= threshold`.
    pub fn at(scores: &[f64], labels: &[bool], threshold: f64) -> Self {
        let mut c = Confusion::default();
        for (&s, &l) in scores.iter().zip(labels) {
            match (s >= threshold, l) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    /// Positive-class F1; zero when there are no true positives.
    pub fn f1(&self) -> f64 {
        if self.tp == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / (2 * self.tp + self.fp + self.fn_) as f64
        }
    }

    pub fn accuracy_positive(&self) -> Option<f64> {
        let n = self.tp + self.fn_;
        (n > 0).then(|| self.tp as f64 / n as f64)
    }

    pub fn accuracy_negative(&self) -> Option<f64> {
        let n = self.tn + self.fp;
        (n > 0).then(|| self.tn as f64 / n as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_extremes_and_ties() {
        let l = [false, false, true, true];
        assert_eq!(auc(&[0.1, 0.2, 0.3, 0.4], &l), Some(1.0));
        assert_eq!(auc(&[0.4, 0.3, 0.2, 0.1], &l), Some(0.0));
        assert_eq!(auc(&[0.5; 4], &l), Some(0.5));
        assert_eq!(auc(&[0.1, 0.2], &[true, true]), None);
        // One tie across classes: pairs (n1,p1)=1, (n1,p2)=1, (n2,p1)=0.5, (n2,p2)=1.
        assert_eq!(auc(&[0.1, 0.3, 0.3, 0.4], &l), Some(3.5 / 4.0));
    }

    #[test]
    fn auc_duplication_and_monotone_invariance() {
        let s = [0.3, 0.1, 0.7, 0.2, 0.9, 0.4];
        let l = [true, false, true, false, false, true];
        let a = auc(&s, &l).unwrap();
        let s2: Vec<f64> = s.iter().chain(&s).copied().collect();
        let l2: Vec<bool> = l.iter().chain(&l).copied().collect();
        assert_eq!(auc(&s2, &l2).unwrap(), a);
        let t: Vec<f64> = s.iter().map(|x| (5.0 * x).exp()).collect();
        assert_eq!(auc(&t, &l).unwrap(), a);
    }

    #[test]
    fn f1_counts() {
        let c = Confusion::at(&[0.9, 0.6, 0.4, 0.1], &[true, false, true, false], 0.5);
        assert_eq!((c.tp, c.fp, c.tn, c.fn_), (1, 1, 1, 1));
        assert_eq!(c.f1(), 0.5);
    }
}
