use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Label, SvmModel};
use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes, both in `Label::ALL` order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix(pub [[u64; 3]; 3]);

impl ConfusionMatrix {
    pub fn from_pairs(truth: &[Label], predicted: &[Label]) -> Self {
        let mut m = [[0u64; 3]; 3];
        for (t, p) in truth.iter().zip(predicted) {
            m[t.index()][p.index()] += 1;
        }
        ConfusionMatrix(m)
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        self.0[class].iter().sum()
    }

    pub fn col_sum(&self, class: usize) -> u64 {
        self.0.iter().map(|r| r[class]).sum()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub label: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<ClassReport>,
    pub confusion: ConfusionMatrix,
    /// Mean F1 over classes that occur in the truth or the predictions.
    pub macro_f1: f64,
    pub accuracy: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl EvalReport {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        let mut classes = Vec::with_capacity(3);
        let mut f1_sum = 0.0;
        let mut present = 0usize;
        for label in Label::ALL {
            let c = label.index();
            let tp = confusion.0[c][c];
            let precision = ratio(tp, confusion.col_sum(c));
            let recall = ratio(tp, confusion.row_sum(c));
            let f = f1(precision, recall);
            if confusion.row_sum(c) + confusion.col_sum(c) > 0 {
                f1_sum += f;
                present += 1;
            }
            classes.push(ClassReport {
                label,
                precision,
                recall,
                f1: f,
                support: confusion.row_sum(c),
            });
        }
        let diag: u64 = (0..3).map(|c| confusion.0[c][c]).sum();
        EvalReport {
            classes,
            confusion,
            macro_f1: if present == 0 { 0.0 } else { f1_sum / present as f64 },
            accuracy: ratio(diag, confusion.total()),
        }
    }

    pub fn class(&self, label: Label) -> &ClassReport {
        &self.classes[label.index()]
    }
}

/// Two-decimal table in the layout of a precision/recall/F1 report.
impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>9} {:>7} {:>8} {:>8}", "class", "precision", "recall", "f1-score", "support")?;
        for c in &self.classes {
            writeln!(
                f,
                "{:<10} {:>9.2} {:>7.2} {:>8.2} {:>8}",
                c.label.as_str(),
                c.precision,
                c.recall,
                c.f1,
                c.support
            )?;
        }
        write!(f, "macro-F1 {:.2}  accuracy {:.2}", self.macro_f1, self.accuracy)
    }
}

pub fn evaluate_predictions(truth: &[Label], predicted: &[Label]) -> Result<EvalReport> {
    if truth.is_empty() {
        return Err(Error::invalid("empty evaluation set"));
    }
    if truth.len() != predicted.len() {
        return Err(Error::invalid("truth and prediction lengths differ"));
    }
    Ok(EvalReport::from_confusion(ConfusionMatrix::from_pairs(truth, predicted)))
}

/// Classifies every test vector and scores the predictions.
pub fn evaluate(model: &SvmModel, features: &[Vec<f64>], truth: &[Label]) -> Result<EvalReport> {
    let predicted: Vec<Label> = features.iter().map(|x| model.classify_features(x)).collect();
    evaluate_predictions(truth, &predicted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    #[test]
    fn perfect_predictions_score_one() {
        let t = vec![Resolved, Neutral, Finding, Finding];
        let r = evaluate_predictions(&t, &t).unwrap();
        for c in &r.classes {
            assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
        }
        assert_eq!(r.confusion.0, [[1, 0, 0], [0, 1, 0], [0, 0, 2]]);
        assert_eq!(r.macro_f1, 1.0);
    }

    #[test]
    fn ten_sentence_fixture_matches_hand_arithmetic() {
        // truth/pred pairs:
        //   R->R x3, R->N x1, N->N x2, N->F x1, F->F x2, F->R x1
        // confusion = [[3,1,0],[0,2,1],[1,0,2]]
        // Resolved: P = 3/4, R = 3/4, F1 = 3/4
        // Neutral:  P = 2/3, R = 2/3, F1 = 2/3
        // Finding:  P = 2/3, R = 2/3, F1 = 2/3
        let pairs = [
            (Resolved, Resolved), (Resolved, Resolved), (Resolved, Resolved), (Resolved, Neutral),
            (Neutral, Neutral), (Neutral, Neutral), (Neutral, Finding),
            (Finding, Finding), (Finding, Finding), (Finding, Resolved),
        ];
        let (t, p): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let r = evaluate_predictions(&t, &p).unwrap();
        assert_eq!(r.confusion.0, [[3, 1, 0], [0, 2, 1], [1, 0, 2]]);
        assert_eq!(r.class(Resolved).precision, 3.0 / 4.0);
        assert_eq!(r.class(Resolved).recall, 3.0 / 4.0);
        assert_eq!(r.class(Neutral).precision, 2.0 / 3.0);
        assert_eq!(r.class(Finding).recall, 2.0 / 3.0);
        assert_eq!(r.accuracy, 7.0 / 10.0);
        for c in 0..3 {
            assert_eq!(r.confusion.row_sum(c), r.classes[c].support);
        }
    }

    #[test]
    fn zero_over_zero_is_zero() {
        let t = vec![Resolved, Resolved];
        let p = vec![Neutral, Neutral];
        let r = evaluate_predictions(&t, &p).unwrap();
        assert_eq!(r.class(Resolved).f1, 0.0);
        assert_eq!(r.class(Neutral).precision, 0.0);
        assert_eq!(r.class(Finding).f1, 0.0);
        // Finding never occurs, so it does not enter the macro average.
        assert_eq!(r.macro_f1, 0.0);
    }

    #[test]
    fn display_rounds_to_two_decimals() {
        let t = vec![Resolved, Resolved, Neutral];
        let p = vec![Resolved, Neutral, Neutral];
        let s = evaluate_predictions(&t, &p).unwrap().to_string();
        assert!(s.contains("resolved        1.00    0.50     0.67"), "{s}");
    }

    #[test]
    fn empty_set_is_rejected() {
        assert!(evaluate_predictions(&[], &[]).is_err());
    }
}
