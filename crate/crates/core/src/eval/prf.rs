use std::ops::{Add, AddAssign};

use serde::Serialize;

/// Precision, recall and F1, with the counts they came from when the metric
/// is count-based. `0/0` is taken as 0.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Prf {
        let precision = ratio(tp as f64, (tp + fp) as f64);
        let recall = ratio(tp as f64, (tp + fn_) as f64);
        Prf {
            precision,
            recall,
            f1: f1(precision, recall),
            tp,
            fp,
            fn_,
        }
    }

    /// For metrics defined on scores rather than counts.
    pub fn from_scores(precision: f64, recall: f64) -> Prf {
        Prf {
            precision,
            recall,
            f1: f1(precision, recall),
            ..Prf::default()
        }
    }

    pub fn perfect() -> Prf {
        Prf::from_scores(1.0, 1.0)
    }
}

/// Sums counts and recomputes the ratios.
impl Add for Prf {
    type Output = Prf;

    fn add(self, other: Prf) -> Prf {
        Prf::from_counts(self.tp + other.tp, self.fp + other.fp, self.fn_ + other.fn_)
    }
}

impl AddAssign for Prf {
    fn add_assign(&mut self, other: Prf) {
        *self = *self + other;
    }
}

impl std::iter::Sum for Prf {
    fn sum<I: Iterator<Item = Prf>>(iter: I) -> Prf {
        iter.fold(Prf::default(), |a, b| a + b)
    }
}
