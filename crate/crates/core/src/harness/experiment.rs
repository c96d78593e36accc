//! End-to-end experiment: load or generate data, split, tune, retrain, test.
//!
//! Everything random is seeded from the master seed through [`derive_seed`],
//! so the report body is a pure function of the config. Wall-clock timings go
//! to a separate `timing.toml` and the trace files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::qga::{Dimension, QgaConfig, Scale, SearchSpace};
use crate::skeleton::{ClassLabel, FeatureVector, ANGLE_COUNT};
use crate::svm::{self, Kernel, SvmModel, TrainConfig};
use crate::tuning::{self, FitnessMode, ParamGrid, TuningMethod, TuningProtocol, TuningResult};

use super::io::{extract_features, load_dataset, read_file, write_annotations, write_capture, write_features, write_file};
use super::metrics::{evaluate, ConfusionMatrix};
use super::split::{class_counts, split, to_samples};
use super::synth::{synth_generate, SynthSpec};
use super::HarnessError;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Where the labelled windows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Synthetic(SynthSpec),
    Files { capture: PathBuf, annotation: PathBuf },
    Features { features: PathBuf },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SynthSpec::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitnessKind {
    #[default]
    Cv,
    Holdout,
    Train,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Training windows of class 1 and class 2; the rest are test windows.
    pub train_per_class: [usize; 2],
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_per_class: [70, 90],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub fitness: FitnessKind,
    pub folds: usize,
    pub holdout_fraction: f64,
    pub svm_tolerance: f64,
    pub svm_max_passes: usize,
    pub parallel: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            fitness: FitnessKind::Cv,
            folds: 5,
            holdout_fraction: 0.3,
            svm_tolerance: 1e-3,
            svm_max_passes: 1000,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QgaSettings {
    pub population_size: usize,
    pub qubit_length: usize,
    pub max_generations: usize,
    pub delta_theta: f64,
    pub catastrophe_patience: usize,
    pub convergence_epsilon: f64,
    pub parallel: bool,
}

impl Default for QgaSettings {
    fn default() -> Self {
        let q = QgaConfig::default();
        Self {
            population_size: q.population_size,
            qubit_length: q.qubit_length,
            max_generations: q.max_generations,
            delta_theta: q.delta_theta,
            catastrophe_patience: q.catastrophe_patience,
            convergence_epsilon: q.convergence_epsilon,
            parallel: q.parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSettings {
    pub c_range: [f64; 2],
    pub sigma_range: [f64; 2],
    pub c_bits: usize,
    pub sigma_bits: usize,
    pub scale: Scale,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            c_range: [0.25, 16.0],
            sigma_range: [0.0625, 16.0],
            c_bits: 30,
            sigma_bits: 30,
            scale: Scale::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub methods: Vec<TuningMethod>,
    /// Not echoed into the report, so reruns into other directories compare equal.
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
    pub data: DataSource,
    pub split: SplitConfig,
    pub protocol: ProtocolConfig,
    pub qga: QgaSettings,
    pub search: SearchSettings,
    pub grid: ParamGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            methods: vec![TuningMethod::Grid, TuningMethod::Qga],
            output_dir: None,
            data: DataSource::default(),
            split: SplitConfig::default(),
            protocol: ProtocolConfig::default(),
            qga: QgaSettings::default(),
            search: SearchSettings::default(),
            grid: ParamGrid::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads a config file. Relative data paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let mut config = Self::from_toml(&read_file(path)?)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut config.data {
            DataSource::Files { capture, annotation } => {
                resolve(capture);
                resolve(annotation);
            }
            DataSource::Features { features } => resolve(features),
            DataSource::Synthetic(_) => {}
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.seed > i64::MAX as u64 {
            return Err(HarnessError::Config(format!(
                "seed {} does not fit in 63 bits",
                self.seed
            )));
        }
        if self.methods.is_empty() {
            return Err(HarnessError::Config("no tuning methods requested".into()));
        }
        self.grid.validate()?;
        self.protocol().validate()?;
        self.qga_config(0).validate(&self.search_space()?).map_err(|e| HarnessError::Config(e.to_string()))?;
        if let DataSource::Synthetic(spec) = &self.data {
            spec.validate()?;
            for (have, want) in spec.windows_per_class.iter().zip(&self.split.train_per_class) {
                if want > have {
                    return Err(HarnessError::Config(format!(
                        "split asks for {want} training windows but the generator makes {have}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn search_space(&self) -> Result<SearchSpace, HarnessError> {
        let s = &self.search;
        SearchSpace::new(vec![
            Dimension::new("C", s.c_range[0], s.c_range[1], s.c_bits).with_scale(s.scale),
            Dimension::new("sigma", s.sigma_range[0], s.sigma_range[1], s.sigma_bits).with_scale(s.scale),
        ])
        .map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn protocol(&self) -> TuningProtocol {
        let p = &self.protocol;
        TuningProtocol {
            mode: match p.fitness {
                FitnessKind::Cv => FitnessMode::KfoldCv { k: p.folds },
                FitnessKind::Holdout => FitnessMode::Holdout {
                    fraction: p.holdout_fraction,
                },
                FitnessKind::Train => FitnessMode::TrainAccuracy,
            },
            seed: derive_seed(self.seed, SeedStream::Protocol),
            svm: self.train_config(1.0),
            parallel: p.parallel,
        }
    }

    fn train_config(&self, penalty_c: f64) -> TrainConfig {
        TrainConfig {
            penalty_c,
            tolerance: self.protocol.svm_tolerance,
            max_passes: self.protocol.svm_max_passes,
            seed: derive_seed(self.seed, SeedStream::Protocol),
        }
    }

    pub fn qga_config(&self, seed: u64) -> QgaConfig {
        let q = &self.qga;
        QgaConfig {
            population_size: q.population_size,
            qubit_length: q.qubit_length,
            max_generations: q.max_generations,
            delta_theta: q.delta_theta,
            catastrophe_patience: q.catastrophe_patience,
            convergence_epsilon: q.convergence_epsilon,
            seed,
            parallel: q.parallel,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum SeedStream {
    Synthetic = 1,
    Split = 2,
    Protocol = 3,
    Qga = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sub-seed for one stage, 63 bits wide so it survives a TOML round trip.
pub fn derive_seed(master: u64, stream: SeedStream) -> u64 {
    splitmix64(master ^ splitmix64(stream as u64)) >> 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub master: u64,
    pub synthetic: u64,
    pub split: u64,
    pub protocol: u64,
    pub qga: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub source: String,
    pub feature_dim: usize,
    pub class_counts: [usize; 2],
    pub train_counts: [usize; 2],
    pub test_counts: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: TuningMethod,
    pub best_c: f64,
    pub best_sigma: f64,
    pub tuning_fitness: f64,
    pub evaluations: usize,
    /// Best-so-far fitness per QGA generation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub generation_best: Vec<f64>,
    pub support_vectors: usize,
    pub test_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class1_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class2_accuracy: Option<f64>,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub seeds: SeedReport,
    pub dataset: DatasetSummary,
    pub methods: Vec<MethodReport>,
    pub config: ExperimentConfig,
    /// Full tuning results with timings; not part of the report file.
    #[serde(skip)]
    pub tuning: Vec<TuningResult>,
    #[serde(skip)]
    pub models: Vec<SvmModel>,
    #[serde(skip)]
    pub features: Vec<FeatureVector>,
}

impl ExperimentReport {
    pub fn method(&self, method: TuningMethod) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// The report body. Contains no timings, so equal configs give equal text.
    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Report(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let report: Self = toml::from_str(text).map_err(|e| HarnessError::Report(e.to_string()))?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(HarnessError::Report(format!(
                "unsupported schema version {}",
                report.schema_version
            )));
        }
        Ok(report)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml(&read_file(path)?)
    }
}

fn gather_features(config: &ExperimentConfig, seed: u64) -> Result<(Vec<FeatureVector>, String), HarnessError> {
    match &config.data {
        DataSource::Synthetic(spec) => {
            let capture = synth_generate(spec, seed)?;
            let features = extract_features(&capture.frames, &capture.annotations, "synthetic")?;
            Ok((features, "synthetic".into()))
        }
        DataSource::Files { capture, annotation } => Ok((
            load_dataset(capture, annotation)?,
            format!("capture {} / annotation {}", capture.display(), annotation.display()),
        )),
        DataSource::Features { features } => Ok((
            super::io::load_features(features)?,
            format!("features {}", features.display()),
        )),
    }
}

/// Runs the configured experiment. If `output_dir` is set, the report, the
/// timings, tuning traces, trained models and extracted features are written there.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    config.validate().map_err(HarnessError::in_stage("config"))?;
    let seeds = SeedReport {
        master: config.seed,
        synthetic: derive_seed(config.seed, SeedStream::Synthetic),
        split: derive_seed(config.seed, SeedStream::Split),
        protocol: derive_seed(config.seed, SeedStream::Protocol),
        qga: derive_seed(config.seed, SeedStream::Qga),
    };

    let (features, source) = gather_features(config, seeds.synthetic).map_err(HarnessError::in_stage("load"))?;
    let partition = split(&features, config.split.train_per_class, seeds.split)
        .map_err(HarnessError::in_stage("split"))?;
    let (train, test) = partition.select(&features);
    let train_samples = to_samples(&train)?;

    let protocol = config.protocol();
    let space = config.search_space()?;
    let mut methods = Vec::new();
    let mut tuning_results = Vec::new();
    let mut models = Vec::new();
    for &method in &config.methods {
        let stage = match method {
            TuningMethod::Grid => "grid search",
            TuningMethod::Qga => "qga tuning",
        };
        let result = match method {
            TuningMethod::Grid => tuning::grid_search(&train_samples, &config.grid, &protocol),
            TuningMethod::Qga => tuning::qga_tune(&train_samples, &space, &protocol, &config.qga_config(seeds.qga)),
        }
        .map_err(|e| HarnessError::in_stage(stage)(e.into()))?;

        let kernel = Kernel::rbf(result.best_sigma)?;
        let model = svm::train(&train_samples, kernel, &config.train_config(result.best_c))
            .map_err(|e| HarnessError::in_stage("final training")(e.into()))?;
        let confusion = evaluate(&model, &test).map_err(HarnessError::in_stage("evaluation"))?;
        methods.push(MethodReport {
            method,
            best_c: result.best_c,
            best_sigma: result.best_sigma,
            tuning_fitness: result.fitness,
            evaluations: result.trace.len(),
            generation_best: result.generation_best.clone(),
            support_vectors: model.multipliers.len(),
            test_accuracy: confusion.accuracy(),
            class1_accuracy: confusion.class_accuracy(ClassLabel::One),
            class2_accuracy: confusion.class_accuracy(ClassLabel::Two),
            confusion,
        });
        tuning_results.push(result);
        models.push(model);
    }

    let report = ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        seeds,
        dataset: DatasetSummary {
            source,
            feature_dim: ANGLE_COUNT,
            class_counts: class_counts(&features),
            train_counts: class_counts(&train),
            test_counts: class_counts(&test),
        },
        methods,
        config: config.clone(),
        tuning: tuning_results,
        models,
        features,
    };
    if let Some(dir) = &config.output_dir {
        write_outputs(&report, dir).map_err(HarnessError::in_stage("write outputs"))?;
    }
    Ok(report)
}

/// Writes `report.toml`, `timing.toml`, `<method>_trace.txt`,
/// `<method>_model.txt` and `features.txt` into `dir`.
pub fn write_outputs(report: &ExperimentReport, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_file(&dir.join("report.toml"), &report.to_toml()?)?;
    let mut timing = String::from("# wall-clock seconds per tuning method; informational only\n");
    for result in &report.tuning {
        timing.push_str(&format!("{} = {:.6}\n", result.method, result.wall_time_secs));
        write_file(&dir.join(format!("{}_trace.txt", result.method)), &result.trace_text())?;
    }
    write_file(&dir.join("timing.toml"), &timing)?;
    for (result, model) in report.tuning.iter().zip(&report.models) {
        write_file(&dir.join(format!("{}_model.txt", result.method)), &model.to_text())?;
    }
    if !report.features.is_empty() {
        write_file(&dir.join("features.txt"), &write_features(&report.features)?)?;
    }
    Ok(())
}

/// Writes a synthetic capture and its annotations.
pub fn write_synthetic(spec: &SynthSpec, seed: u64, capture: &Path, annotation: &Path) -> Result<usize, HarnessError> {
    let cap = synth_generate(spec, seed)?;
    write_file(capture, &write_capture(&cap.frames))?;
    write_file(annotation, &write_annotations(&cap.annotations))?;
    Ok(cap.annotations.len())
}

fn pct(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

/// Human-readable summary of a report.
pub fn render_text(report: &ExperimentReport) -> String {
    let d = &report.dataset;
    let mut out = String::new();
    out.push_str(&format!("dataset: {}\n", d.source));
    out.push_str(&format!(
        "  windows: class 1 = {}, class 2 = {} ({} features each)\n",
        d.class_counts[0], d.class_counts[1], d.feature_dim
    ));
    out.push_str(&format!(
        "  train: {} + {}, test: {} + {}\n",
        d.train_counts[0], d.train_counts[1], d.test_counts[0], d.test_counts[1]
    ));
    out.push_str(&format!("master seed: {}\n\n", report.seeds.master));
    out.push_str(&format!(
        "{:<6} {:>10} {:>10} {:>12} {:>10} {:>6}\n",
        "method", "C", "sigma", "tuning fit", "test acc", "evals"
    ));
    for m in &report.methods {
        out.push_str(&format!(
            "{:<6} {:>10.4} {:>10.4} {:>12} {:>10} {:>6}\n",
            m.method.to_string(),
            m.best_c,
            m.best_sigma,
            pct(m.tuning_fitness),
            pct(m.test_accuracy),
            m.evaluations
        ));
    }
    for m in &report.methods {
        let c = &m.confusion.counts;
        let acc = |a: Option<f64>| a.map_or("-".to_string(), pct);
        out.push_str(&format!("\nconfusion matrix ({}), rows = true class\n", m.method));
        out.push_str(&format!("{:>10} {:>8} {:>8} {:>10}\n", "", "pred 1", "pred 2", "accuracy"));
        out.push_str(&format!("{:>10} {:>8} {:>8} {:>10}\n", "class 1", c[0][0], c[0][1], acc(m.class1_accuracy)));
        out.push_str(&format!("{:>10} {:>8} {:>8} {:>10}\n", "class 2", c[1][0], c[1][1], acc(m.class2_accuracy)));
        if !m.generation_best.is_empty() {
            let trace: Vec<String> = m.generation_best.iter().map(|&f| pct(f)).collect();
            out.push_str(&format!("best fitness by generation: {}\n", trace.join(" ")));
        }
    }
    out
}
