//! Hyperparameter search for the RBF SVM over `(C, σ)`.
//!
//! Both searches score candidates with the same fitness: accuracy under a
//! [`TuningProtocol`]. The default protocol is stratified 5-fold cross
//! validation on the training set, so the test set stays untouched until the
//! final evaluation.

use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qga::{self, BoxError, FitnessFunction, GenerationRecord, QgaConfig, QgaError, SearchSpace};
use crate::svm::{self, Kernel, LabeledSample, SvmError, TrainConfig};

#[derive(Debug, Error)]
pub enum TuningError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("SVM training failed at C={c}, sigma={sigma}: {source}")]
    Svm {
        c: f64,
        sigma: f64,
        #[source]
        source: SvmError,
    },
    #[error("grid cell {index} (C={c}, sigma={sigma}) failed: {source}")]
    GridCell {
        index: usize,
        c: f64,
        sigma: f64,
        #[source]
        source: BoxError,
    },
    #[error(transparent)]
    Qga(#[from] QgaError),
}

/// How a candidate `(C, σ)` is scored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitnessMode {
    /// Mean validation accuracy over `k` stratified folds.
    KfoldCv { k: usize },
    /// Accuracy on a stratified held-out `fraction` of the data.
    Holdout { fraction: f64 },
    /// Accuracy on the data the model was trained on.
    TrainAccuracy,
}

impl Default for FitnessMode {
    fn default() -> Self {
        FitnessMode::KfoldCv { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningProtocol {
    pub mode: FitnessMode,
    pub seed: u64,
    /// Solver settings; `penalty_c` is replaced by each candidate's C.
    pub svm: TrainConfig,
    /// Evaluate grid cells on the rayon pool.
    pub parallel: bool,
}

impl Default for TuningProtocol {
    fn default() -> Self {
        Self {
            mode: FitnessMode::default(),
            seed: 0,
            svm: TrainConfig::default(),
            parallel: true,
        }
    }
}

impl TuningProtocol {
    pub fn validate(&self) -> Result<(), TuningError> {
        match self.mode {
            FitnessMode::KfoldCv { k } if k < 2 => Err(TuningError::InvalidProtocol(format!(
                "k-fold needs k >= 2, got {k}"
            ))),
            FitnessMode::Holdout { fraction } if !(fraction > 0.0 && fraction < 1.0) => {
                Err(TuningError::InvalidProtocol(format!(
                    "holdout fraction must be in (0, 1), got {fraction}"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// One train/validate partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validate: Vec<usize>,
}

/// Indices of each class, shuffled with `seed`.
fn shuffled_by_class(data: &[LabeledSample], seed: u64) -> [Vec<usize>; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..data.len()).filter(|&i| data[i].label > 0).collect();
    let mut neg: Vec<usize> = (0..data.len()).filter(|&i| data[i].label < 0).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    [pos, neg]
}

/// Builds the folds a protocol evaluates on.
pub fn plan_folds(data: &[LabeledSample], protocol: &TuningProtocol) -> Result<Vec<Fold>, TuningError> {
    protocol.validate()?;
    let classes = shuffled_by_class(data, protocol.seed);
    let (n_pos, n_neg) = (classes[0].len(), classes[1].len());
    if n_pos == 0 || n_neg == 0 {
        return Err(TuningError::InsufficientData(format!(
            "need both classes, have {n_pos} positive and {n_neg} negative samples"
        )));
    }
    match protocol.mode {
        FitnessMode::KfoldCv { k } => {
            if n_pos < k || n_neg < k {
                return Err(TuningError::InsufficientData(format!(
                    "{k}-fold CV needs at least {k} samples per class, have {n_pos} and {n_neg}"
                )));
            }
            let mut membership = vec![0usize; data.len()];
            let mut slot = 0usize;
            for class in &classes {
                for &idx in class {
                    membership[idx] = slot % k;
                    slot += 1;
                }
            }
            Ok((0..k)
                .map(|f| {
                    let (validate, train): (Vec<usize>, Vec<usize>) =
                        (0..data.len()).partition(|&i| membership[i] == f);
                    Fold { train, validate }
                })
                .collect())
        }
        FitnessMode::Holdout { fraction } => {
            if n_pos < 2 || n_neg < 2 {
                return Err(TuningError::InsufficientData(
                    "holdout needs at least 2 samples per class".into(),
                ));
            }
            let mut validate = Vec::new();
            let mut train = Vec::new();
            for class in &classes {
                let held = ((class.len() as f64 * fraction).round() as usize).clamp(1, class.len() - 1);
                validate.extend_from_slice(&class[..held]);
                train.extend_from_slice(&class[held..]);
            }
            validate.sort_unstable();
            train.sort_unstable();
            Ok(vec![Fold { train, validate }])
        }
        FitnessMode::TrainAccuracy => {
            let all: Vec<usize> = (0..data.len()).collect();
            Ok(vec![Fold {
                train: all.clone(),
                validate: all,
            }])
        }
    }
}

/// Accuracy of an RBF SVM as a function of `(C, σ)`.
#[derive(Debug, Clone)]
pub struct SvmFitness {
    data: Vec<LabeledSample>,
    folds: Vec<Fold>,
    svm: TrainConfig,
}

/// Builds the fitness function for `data` under `protocol`.
pub fn fitness_for(data: &[LabeledSample], protocol: &TuningProtocol) -> Result<SvmFitness, TuningError> {
    let folds = plan_folds(data, protocol)?;
    Ok(SvmFitness {
        data: data.to_vec(),
        folds,
        svm: protocol.svm.clone(),
    })
}

impl SvmFitness {
    /// Uses a caller-supplied fold plan. Each fold's train and validate sets
    /// must be in range and disjoint.
    pub fn with_folds(data: &[LabeledSample], folds: Vec<Fold>, svm: TrainConfig) -> Result<Self, TuningError> {
        if folds.is_empty() {
            return Err(TuningError::InvalidProtocol("no folds".into()));
        }
        for (f, fold) in folds.iter().enumerate() {
            let mut seen = vec![false; data.len()];
            for &i in &fold.train {
                if i >= data.len() || seen[i] {
                    return Err(TuningError::InvalidProtocol(format!("fold {f}: bad training index {i}")));
                }
                seen[i] = true;
            }
            if fold.validate.is_empty() {
                return Err(TuningError::InvalidProtocol(format!("fold {f} has no validation samples")));
            }
            for &i in &fold.validate {
                if i >= data.len() || seen[i] {
                    return Err(TuningError::InvalidProtocol(format!(
                        "fold {f}: validation index {i} is out of range or also used for training"
                    )));
                }
                seen[i] = true;
            }
        }
        Ok(Self {
            data: data.to_vec(),
            folds,
            svm,
        })
    }

    pub fn folds(&self) -> &[Fold] {
        &self.folds
    }

    /// Validation predictions per fold as `(sample index, predicted label)`.
    pub fn fold_predictions(&self, c: f64, sigma: f64) -> Result<Vec<Vec<(usize, i8)>>, TuningError> {
        let kernel = Kernel::rbf(sigma).map_err(|source| TuningError::Svm { c, sigma, source })?;
        let config = TrainConfig {
            penalty_c: c,
            ..self.svm.clone()
        };
        self.folds
            .iter()
            .map(|fold| {
                let train: Vec<LabeledSample> = fold.train.iter().map(|&i| self.data[i].clone()).collect();
                let model = svm::train(&train, kernel, &config)
                    .map_err(|source| TuningError::Svm { c, sigma, source })?;
                fold.validate
                    .iter()
                    .map(|&i| {
                        model
                            .predict(&self.data[i].features)
                            .map(|p| (i, p))
                            .map_err(|source| TuningError::Svm { c, sigma, source })
                    })
                    .collect()
            })
            .collect()
    }

    /// Mean validation accuracy over the folds, in `[0, 1]`.
    pub fn accuracy(&self, c: f64, sigma: f64) -> Result<f64, TuningError> {
        let per_fold = self.fold_predictions(c, sigma)?;
        let sum: f64 = per_fold
            .iter()
            .map(|preds| {
                let correct = preds.iter().filter(|&&(i, p)| self.data[i].label == p).count();
                correct as f64 / preds.len() as f64
            })
            .sum();
        Ok(sum / per_fold.len() as f64)
    }
}

impl FitnessFunction for SvmFitness {
    fn evaluate(&self, params: &[f64]) -> Result<f64, BoxError> {
        if params.len() != 2 {
            return Err(format!("expected (C, sigma), got {} parameters", params.len()).into());
        }
        Ok(self.accuracy(params[0], params[1])?)
    }
}

/// Candidate values for the grid baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub c_values: Vec<f64>,
    pub sigma_values: Vec<f64>,
}

impl ParamGrid {
    pub fn new(c_values: Vec<f64>, sigma_values: Vec<f64>) -> Result<Self, TuningError> {
        let grid = Self {
            c_values,
            sigma_values,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// `{2^lo, …, 2^hi}` on each axis.
    pub fn powers_of_two(c_exps: (i32, i32), sigma_exps: (i32, i32)) -> Result<Self, TuningError> {
        let axis = |(lo, hi): (i32, i32)| (lo..=hi).map(|e| 2f64.powi(e)).collect::<Vec<_>>();
        Self::new(axis(c_exps), axis(sigma_exps))
    }

    pub fn validate(&self) -> Result<(), TuningError> {
        for (name, values) in [("C", &self.c_values), ("sigma", &self.sigma_values)] {
            if values.is_empty() {
                return Err(TuningError::InvalidGrid(format!("{name} axis is empty")));
            }
            if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(TuningError::InvalidGrid(format!("{name} values must be positive")));
            }
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(TuningError::InvalidGrid(format!(
                    "{name} values must be strictly ascending"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.c_values.len() * self.sigma_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cells in evaluation order: C ascending, then σ ascending.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.c_values
            .iter()
            .flat_map(|&c| self.sigma_values.iter().map(move |&s| (c, s)))
            .collect()
    }
}

impl Default for ParamGrid {
    /// `C ∈ {2⁻², …, 2⁴}`, `σ ∈ {2⁻⁴, …, 2⁴}`: 63 cells.
    fn default() -> Self {
        Self::powers_of_two((-2, 4), (-4, 4)).expect("valid default grid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TuningMethod {
    Grid,
    Qga,
}

impl fmt::Display for TuningMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TuningMethod::Grid => "grid",
            TuningMethod::Qga => "qga",
        })
    }
}

/// One evaluated candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    /// Grid cell index, or QGA generation.
    pub step: usize,
    pub c: f64,
    pub sigma: f64,
    pub fitness: f64,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningResult {
    pub method: TuningMethod,
    pub best_c: f64,
    pub best_sigma: f64,
    pub fitness: f64,
    pub wall_time_secs: f64,
    pub trace: Vec<TraceEntry>,
    /// Best-so-far fitness per QGA generation; empty for grid search.
    pub generation_best: Vec<f64>,
}

impl TuningResult {
    /// One line per evaluation: `method step C sigma fitness seconds`.
    pub fn trace_text(&self) -> String {
        let mut out = String::from("# method step C sigma fitness seconds\n");
        for e in &self.trace {
            out.push_str(&format!(
                "{} {} {} {} {} {:.6}\n",
                self.method, e.step, e.c, e.sigma, e.fitness, e.elapsed_secs
            ));
        }
        out
    }
}

/// Exhaustive search over `grid` with an arbitrary fitness. Ties go to the
/// earliest cell, i.e. smallest C then smallest σ.
pub fn grid_search_with<F: FitnessFunction + ?Sized>(
    grid: &ParamGrid,
    fitness: &F,
    parallel: bool,
) -> Result<TuningResult, TuningError> {
    grid.validate()?;
    let start = Instant::now();
    let cells = grid.cells();
    let eval = |(index, &(c, sigma)): (usize, &(f64, f64))| {
        let value = fitness
            .evaluate(&[c, sigma])
            .map_err(|source| TuningError::GridCell {
                index,
                c,
                sigma,
                source,
            })?;
        Ok(TraceEntry {
            step: index,
            c,
            sigma,
            fitness: value,
            elapsed_secs: start.elapsed().as_secs_f64(),
        })
    };
    let trace: Vec<TraceEntry> = if parallel {
        cells.par_iter().enumerate().map(eval).collect::<Result<_, TuningError>>()?
    } else {
        cells.iter().enumerate().map(eval).collect::<Result<_, TuningError>>()?
    };
    let mut best = &trace[0];
    for e in &trace[1..] {
        if e.fitness > best.fitness {
            best = e;
        }
    }
    Ok(TuningResult {
        method: TuningMethod::Grid,
        best_c: best.c,
        best_sigma: best.sigma,
        fitness: best.fitness,
        wall_time_secs: start.elapsed().as_secs_f64(),
        generation_best: Vec::new(),
        trace,
    })
}

/// Grid search baseline scored with [`fitness_for`].
pub fn grid_search(
    data: &[LabeledSample],
    grid: &ParamGrid,
    protocol: &TuningProtocol,
) -> Result<TuningResult, TuningError> {
    let fitness = fitness_for(data, protocol)?;
    grid_search_with(grid, &fitness, protocol.parallel)
}

/// QGA search with an arbitrary two-parameter fitness.
pub fn qga_tune_with<F: FitnessFunction + ?Sized>(
    space: &SearchSpace,
    fitness: &F,
    config: &QgaConfig,
) -> Result<TuningResult, TuningError> {
    if space.dims.len() != 2 {
        return Err(TuningError::InvalidProtocol(format!(
            "QGA tuning needs a (C, sigma) space, got {} dimensions",
            space.dims.len()
        )));
    }
    let start = Instant::now();
    let mut trace = Vec::new();
    let mut observer = |record: &GenerationRecord| {
        let elapsed = start.elapsed().as_secs_f64();
        trace.extend(record.individuals.iter().map(|ind| TraceEntry {
            step: record.generation,
            c: ind.decoded[0],
            sigma: ind.decoded[1],
            fitness: ind.fitness,
            elapsed_secs: elapsed,
        }));
    };
    let result = qga::run(space, fitness, config, &mut observer)?;
    Ok(TuningResult {
        method: TuningMethod::Qga,
        best_c: result.best_params[0],
        best_sigma: result.best_params[1],
        fitness: result.best_fitness,
        wall_time_secs: start.elapsed().as_secs_f64(),
        trace,
        generation_best: result.history,
    })
}

/// QGA search scored with [`fitness_for`].
pub fn qga_tune(
    data: &[LabeledSample],
    space: &SearchSpace,
    protocol: &TuningProtocol,
    config: &QgaConfig,
) -> Result<TuningResult, TuningError> {
    let fitness = fitness_for(data, protocol)?;
    qga_tune_with(space, &fitness, config)
}
