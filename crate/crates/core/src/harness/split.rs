use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::skeleton::{ClassLabel, FeatureVector};
use crate::svm::LabeledSample;

use super::HarnessError;

/// Indices of a stratified train/test partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn select<T: Clone>(&self, items: &[T]) -> (Vec<T>, Vec<T>) {
        (
            self.train.iter().map(|&i| items[i].clone()).collect(),
            self.test.iter().map(|&i| items[i].clone()).collect(),
        )
    }
}

pub fn class_counts(samples: &[FeatureVector]) -> [usize; 2] {
    let mut counts = [0; 2];
    for s in samples {
        match s.label {
            Some(ClassLabel::One) => counts[0] += 1,
            Some(ClassLabel::Two) => counts[1] += 1,
            None => {}
        }
    }
    counts
}

/// Draws `train_per_class[c]` samples of each class for training; everything
/// else goes to the test set. Both lists are returned in ascending index order.
pub fn split(samples: &[FeatureVector], train_per_class: [usize; 2], seed: u64) -> Result<Split, HarnessError> {
    if let Some(i) = samples.iter().position(|s| s.label.is_none()) {
        return Err(HarnessError::InfeasibleSplit(format!("sample {i} has no label")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, &want) in [ClassLabel::One, ClassLabel::Two].iter().zip(&train_per_class) {
        let mut idx: Vec<usize> = (0..samples.len())
            .filter(|&i| samples[i].label == Some(*class))
            .collect();
        if want > idx.len() {
            return Err(HarnessError::InfeasibleSplit(format!(
                "class {class}: asked for {want} training samples, only {} available",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..want]);
        test.extend_from_slice(&idx[want..]);
    }
    if test.is_empty() {
        return Err(HarnessError::InfeasibleSplit(
            "training counts consume every sample; test set would be empty".into(),
        ));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Converts labelled features to SVM samples (class 1 → +1, class 2 → −1).
pub fn to_samples(features: &[FeatureVector]) -> Result<Vec<LabeledSample>, HarnessError> {
    features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let label = f
                .label
                .ok_or_else(|| HarnessError::Config(format!("feature vector {i} has no label")))?;
            Ok(LabeledSample {
                features: f.values.to_vec(),
                label: label.to_sign(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::ANGLE_COUNT;

    fn dataset(n1: usize, n2: usize) -> Vec<FeatureVector> {
        (0..n1 + n2)
            .map(|i| FeatureVector {
                values: [i as f64; ANGLE_COUNT],
                label: Some(if i < n1 { ClassLabel::One } else { ClassLabel::Two }),
            })
            .collect()
    }

    #[test]
    fn protocol_counts() {
        let data = dataset(130, 160);
        let s = split(&data, [70, 90], 1).unwrap();
        let (train, test) = s.select(&data);
        assert_eq!(class_counts(&train), [70, 90]);
        assert_eq!(class_counts(&test), [60, 70]);
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..290).collect::<Vec<_>>());
    }

    #[test]
    fn seeded() {
        let data = dataset(20, 20);
        assert_eq!(split(&data, [5, 5], 3).unwrap(), split(&data, [5, 5], 3).unwrap());
        assert_ne!(split(&data, [5, 5], 3).unwrap(), split(&data, [5, 5], 4).unwrap());
    }

    #[test]
    fn infeasible() {
        let data = dataset(5, 5);
        assert!(matches!(split(&data, [6, 1], 0), Err(HarnessError::InfeasibleSplit(_))));
        assert!(matches!(split(&data, [5, 5], 0), Err(HarnessError::InfeasibleSplit(_))));
    }

    #[test]
    fn label_encoding() {
        let data = dataset(1, 1);
        let s = to_samples(&data).unwrap();
        assert_eq!((s[0].label, s[1].label), (1, -1));
    }
}
