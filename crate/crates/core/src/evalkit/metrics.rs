use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Multiclass,
    Multilabel,
}

/// Targets for a probe task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Labels {
    Multiclass {
        classes: usize,
        y: Vec<usize>,
    },
    /// Row-major `n × labels` presence flags.
    Multilabel {
        labels: usize,
        y: Vec<bool>,
    },
}

impl Labels {
    pub fn kind(&self) -> TaskKind {
        match self {
            Labels::Multiclass { .. } => TaskKind::Multiclass,
            Labels::Multilabel { .. } => TaskKind::Multilabel,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Labels::Multiclass { y, .. } => y.len(),
            Labels::Multilabel { labels, y } => y.len() / (*labels).max(1),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of outputs a linear probe needs.
    pub fn outputs(&self) -> usize {
        match self {
            Labels::Multiclass { classes, .. } => *classes,
            Labels::Multilabel { labels, .. } => *labels,
        }
    }

    pub fn select(&self, idx: &[usize]) -> Labels {
        match self {
            Labels::Multiclass { classes, y } => {
                Labels::Multiclass { classes: *classes, y: idx.iter().map(|&i| y[i]).collect() }
            }
            Labels::Multilabel { labels, y } => Labels::Multilabel {
                labels: *labels,
                y: idx.iter().flat_map(|&i| y[i * labels..(i + 1) * labels].iter().copied()).collect(),
            },
        }
    }
}

/// Predictions in the same layout as [`Labels`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Predictions {
    Multiclass(Vec<usize>),
    Multilabel { labels: usize, y: Vec<bool> },
}

/// Multiclass: mean per-class recall over classes present in `labels`.
/// Multilabel: mean over labels of balanced binary accuracy (the mean of the
/// true-positive and true-negative rates, over whichever of the two exist).
pub fn class_balanced_accuracy(pred: &Predictions, labels: &Labels) -> Result<f64> {
    match (pred, labels) {
        (Predictions::Multiclass(p), Labels::Multiclass { classes, y }) => {
            if p.len() != y.len() || y.is_empty() {
                return Err(Error::Data("predictions and labels must align and be non-empty".into()));
            }
            let mut hit = vec![0usize; *classes];
            let mut tot = vec![0usize; *classes];
            for (&pi, &yi) in p.iter().zip(y) {
                tot[yi] += 1;
                if pi == yi {
                    hit[yi] += 1;
                }
            }
            let present: Vec<f64> =
                (0..*classes).filter(|&c| tot[c] > 0).map(|c| hit[c] as f64 / tot[c] as f64).collect();
            if present.len() < *classes {
                log::warn!("{} of {classes} classes absent from labels; excluded", classes - present.len());
            }
            Ok(present.iter().sum::<f64>() / present.len() as f64)
        }
        (Predictions::Multilabel { labels: lp, y: p }, Labels::Multilabel { labels: l, y }) => {
            if lp != l || p.len() != y.len() || y.is_empty() {
                return Err(Error::Data("predictions and labels must align and be non-empty".into()));
            }
            let mut per_label = Vec::with_capacity(*l);
            for j in 0..*l {
                let (mut tp, mut pos, mut tn, mut neg) = (0usize, 0usize, 0usize, 0usize);
                for (pr, yr) in p.chunks_exact(*l).zip(y.chunks_exact(*l)) {
                    if yr[j] {
                        pos += 1;
                        tp += pr[j] as usize;
                    } else {
                        neg += 1;
                        tn += (!pr[j]) as usize;
                    }
                }
                let mut rates = Vec::new();
                if pos > 0 {
                    rates.push(tp as f64 / pos as f64);
                }
                if neg > 0 {
                    rates.push(tn as f64 / neg as f64);
                }
                per_label.push(rates.iter().sum::<f64>() / rates.len() as f64);
            }
            Ok(per_label.iter().sum::<f64>() / per_label.len() as f64)
        }
        _ => Err(Error::Data("prediction and label kinds differ".into())),
    }
}

/// Each example's share of the balanced accuracy: summing the weights of the
/// correct examples gives [`class_balanced_accuracy`] (multiclass only).
pub fn balanced_weights(y: &[usize], classes: usize) -> Vec<f64> {
    let mut tot = vec![0usize; classes];
    for &c in y {
        tot[c] += 1;
    }
    let present = tot.iter().filter(|&&t| t > 0).count() as f64;
    y.iter().map(|&c| 1.0 / (present * tot[c] as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mc(classes: usize, y: Vec<usize>) -> Labels {
        Labels::Multiclass { classes, y }
    }

    #[test]
    fn perfect_is_one() {
        let y = vec![0, 1, 2, 2, 1];
        let acc = class_balanced_accuracy(&Predictions::Multiclass(y.clone()), &mc(3, y)).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn balancing_ignores_class_sizes() {
        // class 0 (many) all right, class 1 (few) all wrong
        let y = vec![0, 0, 0, 0, 0, 0, 0, 1];
        let p = vec![0, 0, 0, 0, 0, 0, 0, 0];
        let acc = class_balanced_accuracy(&Predictions::Multiclass(p), &mc(2, y)).unwrap();
        assert_eq!(acc, 0.5);
    }

    #[test]
    fn hand_built_three_classes() {
        // recalls 1.0, 0.5, 0.0
        let y = vec![0, 0, 1, 1, 2, 2, 2];
        let p = vec![0, 0, 1, 0, 0, 1, 1];
        let acc = class_balanced_accuracy(&Predictions::Multiclass(p), &mc(3, y)).unwrap();
        assert!((acc - 0.5).abs() < 1e-15);
    }

    #[test]
    fn absent_class_is_excluded() {
        let y = vec![0, 0, 2];
        let p = vec![0, 1, 2];
        let acc = class_balanced_accuracy(&Predictions::Multiclass(p), &mc(3, y)).unwrap();
        assert!((acc - 0.75).abs() < 1e-15);
    }

    #[test]
    fn multilabel_balanced() {
        // label 0: tp 1/1, tn 1/1 -> 1; label 1: tp 0/1, tn 1/1 -> 0.5
        let y = Labels::Multilabel { labels: 2, y: vec![true, true, false, false] };
        let p = Predictions::Multilabel { labels: 2, y: vec![true, false, false, false] };
        assert!((class_balanced_accuracy(&p, &y).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_balanced_accuracy() {
        let y = vec![0, 0, 1, 1, 2, 2, 2];
        let p = vec![0, 0, 1, 0, 0, 1, 1];
        let w = balanced_weights(&y, 3);
        let s: f64 = w.iter().zip(y.iter().zip(&p)).filter(|(_, (a, b))| a == b).map(|(w, _)| w).sum();
        assert!((s - 0.5).abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_inputs() {
        assert!(class_balanced_accuracy(&Predictions::Multiclass(vec![0]), &mc(2, vec![])).is_err());
        assert!(class_balanced_accuracy(
            &Predictions::Multiclass(vec![0]),
            &Labels::Multilabel { labels: 1, y: vec![true] }
        )
        .is_err());
    }
}
