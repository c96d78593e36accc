use serde::{Deserialize, Serialize};

use crate::skeleton::{ClassLabel, FeatureVector};
use crate::svm::SvmModel;

use super::HarnessError;

/// 2×2 confusion counts; rows are the true class, columns the prediction,
/// both ordered class 1 then class 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 2]; 2],
}

fn slot(label: ClassLabel) -> usize {
    match label {
        ClassLabel::One => 0,
        ClassLabel::Two => 1,
    }
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: ClassLabel, predicted: ClassLabel) {
        self.counts[slot(truth)][slot(predicted)] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, class: ClassLabel) -> usize {
        self.counts[slot(class)].iter().sum()
    }

    /// Fraction of `class` samples predicted correctly; `None` if the class is absent.
    pub fn class_accuracy(&self, class: ClassLabel) -> Option<f64> {
        let n = self.row_total(class);
        (n > 0).then(|| self.counts[slot(class)][slot(class)] as f64 / n as f64)
    }

    /// Trace over total.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        (self.counts[0][0] + self.counts[1][1]) as f64 / total as f64
    }
}

/// Scores `model` on a labelled test set.
pub fn evaluate(model: &SvmModel, test: &[FeatureVector]) -> Result<ConfusionMatrix, HarnessError> {
    if test.is_empty() {
        return Err(HarnessError::Config("test set is empty".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (i, fv) in test.iter().enumerate() {
        let truth = fv
            .label
            .ok_or_else(|| HarnessError::Config(format!("test sample {i} has no label")))?;
        let predicted = ClassLabel::from_sign(model.predict(&fv.values)?);
        cm.record(truth, predicted);
    }
    Ok(cm)
}
