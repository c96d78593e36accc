//! Binary soft-margin kernel SVM.
//!
//! Training solves the dual problem
//!
//! ```text
//! max_λ  Σ λ_k − ½ Σ_i Σ_j λ_i λ_j y_i y_j K(x_i, x_j)
//! s.t.   Σ λ_k y_k = 0,   0 ≤ λ_k ≤ C
//! ```
//!
//! with sequential minimal optimization. Each step picks the maximal violating
//! pair under the first-order KKT gap, updates the two multipliers analytically
//! and refreshes the gradient. The full Gram matrix is cached, which is fine for
//! the few hundred samples an action dataset holds.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvmError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training data is empty")]
    EmptyData,
    #[error("training data contains only class {0:+}")]
    SingleClass(i8),
    #[error("label must be +1 or -1, got {0}")]
    BadLabel(i8),
    #[error("non-finite feature value in sample {0}")]
    NonFinite(usize),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("SMO did not converge after {iterations} iterations (KKT gap {gap:.3e}, tolerance {tolerance:.1e})")]
    NotConverged {
        iterations: usize,
        gap: f64,
        tolerance: f64,
    },
    #[error("model parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Kernel function and its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `exp(-‖x−y‖² / σ²)`
    Rbf { sigma: f64 },
    /// `(x·y + c)^d`
    Polynomial { c: f64, d: u32 },
    /// `tanh(k·(x·y) + v)`
    Sigmoid { k: f64, v: f64 },
    /// `x·y`
    Linear,
}

impl Kernel {
    pub fn rbf(sigma: f64) -> Result<Self, SvmError> {
        let k = Kernel::Rbf { sigma };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), SvmError> {
        match *self {
            Kernel::Rbf { sigma } if !(sigma > 0.0 && sigma.is_finite()) => Err(
                SvmError::InvalidKernel(format!("RBF sigma must be positive, got {sigma}")),
            ),
            Kernel::Polynomial { d: 0, .. } => Err(SvmError::InvalidKernel(
                "polynomial degree must be at least 1".into(),
            )),
            Kernel::Polynomial { c, .. } if !c.is_finite() => {
                Err(SvmError::InvalidKernel("polynomial offset must be finite".into()))
            }
            Kernel::Sigmoid { k, v } if !(k.is_finite() && v.is_finite()) => {
                Err(SvmError::InvalidKernel("sigmoid parameters must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    /// Evaluates the kernel on two equal-length vectors.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, SvmError> {
        if x.len() != y.len() {
            return Err(SvmError::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Kernel::Rbf { sigma } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (sigma * sigma)).exp()
            }
            Kernel::Polynomial { c, d } => (dot(x, y) + c).powi(d as i32),
            Kernel::Sigmoid { k, v } => (k * dot(x, y) + v).tanh(),
            Kernel::Linear => dot(x, y),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Kernel::Rbf { sigma } => write!(f, "rbf sigma={sigma}"),
            Kernel::Polynomial { c, d } => write!(f, "polynomial c={c} d={d}"),
            Kernel::Sigmoid { k, v } => write!(f, "sigmoid k={k} v={v}"),
            Kernel::Linear => write!(f, "linear"),
        }
    }
}

impl FromStr for Kernel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split_whitespace();
        let kind = parts.next().ok_or("empty kernel description")?;
        let mut param = |name: &str| -> Result<f64, String> {
            let tok = parts.next().ok_or(format!("missing {name}"))?;
            let value = tok
                .strip_prefix(name)
                .and_then(|t| t.strip_prefix('='))
                .ok_or(format!("expected {name}=<value>, got {tok:?}"))?;
            value.parse().map_err(|e| format!("bad {name}: {e}"))
        };
        let kernel = match kind {
            "rbf" => Kernel::Rbf {
                sigma: param("sigma")?,
            },
            "polynomial" => {
                let c = param("c")?;
                let d = param("d")?;
                if d.fract() != 0.0 || d < 0.0 {
                    return Err(format!("polynomial degree must be a whole number, got {d}"));
                }
                Kernel::Polynomial { c, d: d as u32 }
            }
            "sigmoid" => Kernel::Sigmoid {
                k: param("k")?,
                v: param("v")?,
            },
            "linear" => Kernel::Linear,
            other => return Err(format!("unknown kernel kind {other:?}")),
        };
        kernel.validate().map_err(|e| e.to_string())?;
        Ok(kernel)
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// A training or test sample with label ±1.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: i8,
}

impl LabeledSample {
    pub fn new(features: Vec<f64>, label: i8) -> Result<Self, SvmError> {
        if label != 1 && label != -1 {
            return Err(SvmError::BadLabel(label));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(SvmError::NonFinite(0));
        }
        Ok(Self { features, label })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Box bound C on every multiplier.
    pub penalty_c: f64,
    /// Stopping threshold on the maximal KKT violation.
    pub tolerance: f64,
    /// Iteration budget, in units of `N` pair updates.
    pub max_passes: usize,
    /// Recorded with the model. The solver itself is deterministic.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            penalty_c: 1.0,
            tolerance: 1e-3,
            max_passes: 1000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_c(penalty_c: f64) -> Self {
        Self {
            penalty_c,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), SvmError> {
        if !(self.penalty_c > 0.0 && self.penalty_c.is_finite()) {
            return Err(SvmError::InvalidConfig(format!(
                "penalty_c must be positive, got {}",
                self.penalty_c
            )));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(SvmError::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_passes == 0 {
            return Err(SvmError::InvalidConfig("max_passes must be positive".into()));
        }
        Ok(())
    }
}

/// Multipliers below this fraction of C are treated as zero.
pub const SUPPORT_THRESHOLD: f64 = 1e-8;

/// A trained classifier: the kernel expansion over its support vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub support_labels: Vec<i8>,
    pub multipliers: Vec<f64>,
    /// Positions of the support vectors in the training set.
    pub support_indices: Vec<usize>,
    pub bias: f64,
    pub kernel: Kernel,
    pub penalty_c: f64,
    pub tolerance: f64,
    pub iterations: usize,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    /// `Σ λ_k y_k K(sv_k, x) + b`
    pub fn decision_value(&self, x: &[f64]) -> Result<f64, SvmError> {
        let dim = self.dim();
        if !self.support_vectors.is_empty() && x.len() != dim {
            return Err(SvmError::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        Ok(self.decision_unchecked(x))
    }

    fn decision_unchecked(&self, x: &[f64]) -> f64 {
        let mut sum = self.bias;
        for ((sv, &y), &lambda) in self
            .support_vectors
            .iter()
            .zip(&self.support_labels)
            .zip(&self.multipliers)
        {
            sum += lambda * f64::from(y) * self.kernel.eval_unchecked(sv, x);
        }
        sum
    }

    /// Sign of the decision value. A value of exactly zero maps to +1.
    pub fn predict(&self, x: &[f64]) -> Result<i8, SvmError> {
        Ok(if self.decision_value(x)? >= 0.0 { 1 } else { -1 })
    }

    /// Writes the versioned text form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("qgasvm-model v1\n");
        out.push_str(&format!("kernel {}\n", self.kernel));
        out.push_str(&format!("penalty_c {}\n", self.penalty_c));
        out.push_str(&format!("tolerance {}\n", self.tolerance));
        out.push_str(&format!("bias {}\n", self.bias));
        out.push_str(&format!("dim {}\n", self.dim()));
        out.push_str(&format!("support_vectors {}\n", self.multipliers.len()));
        for i in 0..self.multipliers.len() {
            out.push_str(&format!(
                "{} {} {}",
                self.multipliers[i], self.support_labels[i], self.support_indices[i]
            ));
            for v in &self.support_vectors[i] {
                out.push_str(&format!(" {v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SvmError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let err = |line: usize, message: String| SvmError::Parse {
            line: line + 1,
            message,
        };
        let mut header = |key: &str| -> Result<(usize, String), SvmError> {
            let (n, line) = lines
                .next()
                .ok_or_else(|| err(0, format!("missing `{key}` line")))?;
            let rest = line
                .strip_prefix(key)
                .ok_or_else(|| err(n, format!("expected `{key}`")))?;
            Ok((n, rest.trim().to_string()))
        };
        let (n, version) = header("qgasvm-model")?;
        if version != "v1" {
            return Err(err(n, format!("unsupported version {version:?}")));
        }
        let (n, kernel) = header("kernel")?;
        let kernel: Kernel = kernel.parse().map_err(|e| err(n, e))?;
        let mut number = |key: &str| -> Result<(usize, f64), SvmError> {
            let (n, v) = header(key)?;
            v.parse::<f64>()
                .map(|x| (n, x))
                .map_err(|e| err(n, format!("bad {key}: {e}")))
        };
        let (_, penalty_c) = number("penalty_c")?;
        let (_, tolerance) = number("tolerance")?;
        let (_, bias) = number("bias")?;
        let (_, dim) = number("dim")?;
        let (_, count) = number("support_vectors")?;
        let dim = dim as usize;
        let count = count as usize;

        let mut model = SvmModel {
            support_vectors: Vec::with_capacity(count),
            support_labels: Vec::with_capacity(count),
            multipliers: Vec::with_capacity(count),
            support_indices: Vec::with_capacity(count),
            bias,
            kernel,
            penalty_c,
            tolerance,
            iterations: 0,
        };
        for _ in 0..count {
            let (n, line) = lines
                .next()
                .ok_or_else(|| err(0, "fewer support vectors than declared".into()))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != dim + 3 {
                return Err(err(
                    n,
                    format!("expected {} fields, found {}", dim + 3, fields.len()),
                ));
            }
            let lambda: f64 = fields[0].parse().map_err(|e| err(n, format!("{e}")))?;
            let label: i8 = fields[1].parse().map_err(|e| err(n, format!("{e}")))?;
            let index: usize = fields[2].parse().map_err(|e| err(n, format!("{e}")))?;
            let features = fields[3..]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| err(n, format!("{e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            model.multipliers.push(lambda);
            model.support_labels.push(label);
            model.support_indices.push(index);
            model.support_vectors.push(features);
        }
        if let Some((n, _)) = lines.next() {
            return Err(err(n, "trailing data after support vectors".into()));
        }
        Ok(model)
    }
}

fn validate_data(data: &[LabeledSample]) -> Result<usize, SvmError> {
    let first = data.first().ok_or(SvmError::EmptyData)?;
    let dim = first.features.len();
    let mut has_pos = false;
    let mut has_neg = false;
    for (i, s) in data.iter().enumerate() {
        if s.features.len() != dim {
            return Err(SvmError::DimensionMismatch {
                expected: dim,
                found: s.features.len(),
            });
        }
        if s.features.iter().any(|v| !v.is_finite()) {
            return Err(SvmError::NonFinite(i));
        }
        match s.label {
            1 => has_pos = true,
            -1 => has_neg = true,
            l => return Err(SvmError::BadLabel(l)),
        }
    }
    match (has_pos, has_neg) {
        (true, true) => Ok(dim),
        (true, false) => Err(SvmError::SingleClass(1)),
        _ => Err(SvmError::SingleClass(-1)),
    }
}

/// Dual objective `Σλ − ½ λᵀQλ` with `Q_ij = y_i y_j K(x_i, x_j)`.
pub fn dual_objective(data: &[LabeledSample], kernel: &Kernel, multipliers: &[f64]) -> f64 {
    let mut linear = 0.0;
    let mut quad = 0.0;
    for (i, si) in data.iter().enumerate() {
        linear += multipliers[i];
        if multipliers[i] == 0.0 {
            continue;
        }
        for (j, sj) in data.iter().enumerate() {
            if multipliers[j] == 0.0 {
                continue;
            }
            quad += multipliers[i]
                * multipliers[j]
                * f64::from(si.label * sj.label)
                * kernel.eval_unchecked(&si.features, &sj.features);
        }
    }
    linear - 0.5 * quad
}

/// Full solution of the dual, including zero multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub multipliers: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub gap: f64,
}

struct Smo<'a> {
    labels: Vec<f64>,
    gram: Vec<f64>,
    n: usize,
    c: f64,
    alpha: Vec<f64>,
    // gradient of ½αᵀQα − eᵀα
    grad: Vec<f64>,
    _data: &'a [LabeledSample],
}

impl<'a> Smo<'a> {
    fn new(data: &'a [LabeledSample], kernel: &Kernel, c: f64) -> Self {
        let n = data.len();
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let k = kernel.eval_unchecked(&data[i].features, &data[j].features);
                gram[i * n + j] = k;
                gram[j * n + i] = k;
            }
        }
        Self {
            labels: data.iter().map(|s| f64::from(s.label)).collect(),
            gram,
            n,
            c,
            alpha: vec![0.0; n],
            grad: vec![-1.0; n],
            _data: data,
        }
    }

    fn q(&self, i: usize, j: usize) -> f64 {
        self.labels[i] * self.labels[j] * self.gram[i * self.n + j]
    }

    fn in_up(&self, t: usize) -> bool {
        (self.labels[t] > 0.0 && self.alpha[t] < self.c) || (self.labels[t] < 0.0 && self.alpha[t] > 0.0)
    }

    fn in_low(&self, t: usize) -> bool {
        (self.labels[t] > 0.0 && self.alpha[t] > 0.0) || (self.labels[t] < 0.0 && self.alpha[t] < self.c)
    }

    /// Maximal violating pair and the current gap `m(α) − M(α)`.
    fn select(&self) -> (usize, usize, f64) {
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        for t in 0..self.n {
            let v = -self.labels[t] * self.grad[t];
            if self.in_up(t) && v > gmax {
                gmax = v;
                i = t;
            }
            if self.in_low(t) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        (i, j, gmax - gmin)
    }

    fn step(&mut self, i: usize, j: usize) {
        let (yi, yj) = (self.labels[i], self.labels[j]);
        let (ai, aj) = (self.alpha[i], self.alpha[j]);
        let mut quad = self.gram[i * self.n + i] + self.gram[j * self.n + j]
            - 2.0 * self.gram[i * self.n + j];
        if quad <= 0.0 {
            quad = 1e-12;
        }
        // Move along the direction that keeps Σ yα fixed: α_i += y_i t, α_j -= y_j t.
        let mut t = (-yi * self.grad[i] + yj * self.grad[j]) / quad;
        // Feasible range for t.
        let (lo_i, hi_i) = if yi > 0.0 { (-ai, self.c - ai) } else { (ai - self.c, ai) };
        let (lo_j, hi_j) = if yj > 0.0 { (aj - self.c, aj) } else { (-aj, self.c - aj) };
        let lo = lo_i.max(lo_j);
        let hi = hi_i.min(hi_j);
        t = t.clamp(lo, hi);

        let new_i = snap(ai + yi * t, self.c);
        let new_j = snap(aj - yj * t, self.c);
        let di = new_i - ai;
        let dj = new_j - aj;
        self.alpha[i] = new_i;
        self.alpha[j] = new_j;
        for k in 0..self.n {
            self.grad[k] += self.q(k, i) * di + self.q(k, j) * dj;
        }
    }

    fn bias(&self) -> f64 {
        let mut sum = 0.0;
        let mut free = 0usize;
        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        for t in 0..self.n {
            // y_t − Σ λ_i y_i K(x_i, x_t) = −y_t · grad_t
            let r = -self.labels[t] * self.grad[t];
            if self.alpha[t] > 0.0 && self.alpha[t] < self.c {
                sum += r;
                free += 1;
            } else if self.in_up(t) {
                // y = +1 at 0 or y = -1 at C: lower bound on b.
                lb = lb.max(r);
            } else {
                ub = ub.min(r);
            }
        }
        if free > 0 {
            sum / free as f64
        } else if lb.is_finite() && ub.is_finite() {
            0.5 * (lb + ub)
        } else if lb.is_finite() {
            lb
        } else if ub.is_finite() {
            ub
        } else {
            0.0
        }
    }
}

fn snap(a: f64, c: f64) -> f64 {
    if a <= 0.0 {
        0.0
    } else if a >= c {
        c
    } else {
        a
    }
}

/// Solves the dual and returns every multiplier.
pub fn solve_dual(
    data: &[LabeledSample],
    kernel: &Kernel,
    config: &TrainConfig,
) -> Result<DualSolution, SvmError> {
    validate_data(data)?;
    kernel.validate()?;
    config.validate()?;
    let mut smo = Smo::new(data, kernel, config.penalty_c);
    let budget = config.max_passes.saturating_mul(data.len().max(1));
    let mut iterations = 0;
    loop {
        let (i, j, gap) = smo.select();
        if i == usize::MAX || j == usize::MAX || gap < config.tolerance {
            return Ok(DualSolution {
                bias: smo.bias(),
                multipliers: smo.alpha,
                iterations,
                gap: gap.max(0.0),
            });
        }
        if iterations >= budget {
            return Err(SvmError::NotConverged {
                iterations,
                gap,
                tolerance: config.tolerance,
            });
        }
        smo.step(i, j);
        iterations += 1;
    }
}

/// Trains a model and keeps the support vectors.
pub fn train(
    data: &[LabeledSample],
    kernel: Kernel,
    config: &TrainConfig,
) -> Result<SvmModel, SvmError> {
    let solution = solve_dual(data, &kernel, config)?;
    let threshold = SUPPORT_THRESHOLD * config.penalty_c;
    let mut model = SvmModel {
        support_vectors: Vec::new(),
        support_labels: Vec::new(),
        multipliers: Vec::new(),
        support_indices: Vec::new(),
        bias: solution.bias,
        kernel,
        penalty_c: config.penalty_c,
        tolerance: config.tolerance,
        iterations: solution.iterations,
    };
    for (idx, (&lambda, sample)) in solution.multipliers.iter().zip(data).enumerate() {
        if lambda > threshold {
            model.support_vectors.push(sample.features.clone());
            model.support_labels.push(sample.label);
            model.multipliers.push(lambda);
            model.support_indices.push(idx);
        }
    }
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KktCase {
    /// λ outside `[0, C]`.
    OutOfBox,
    /// λ = 0 but `y·f(x) < 1 − tol`.
    Zero,
    /// 0 < λ < C but `|y·f(x) − 1| > tol`.
    Free,
    /// λ = C but `y·f(x) > 1 + tol`.
    Bound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktViolation {
    pub index: usize,
    pub multiplier: f64,
    pub margin: f64,
    pub case: KktCase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub violations: Vec<KktViolation>,
    /// `|Σ λ_k y_k|`
    pub equality_residual: f64,
}

impl KktReport {
    pub fn is_clean(&self, tolerance: f64) -> bool {
        self.violations.is_empty() && self.equality_residual <= tolerance
    }
}

/// Checks every training sample against its KKT case.
///
/// `data` must be the training set in the order the model was trained on,
/// since multipliers are matched through `support_indices`.
pub fn check_kkt(model: &SvmModel, data: &[LabeledSample], tolerance: f64) -> KktReport {
    let mut multipliers = vec![0.0; data.len()];
    let mut residual = 0.0;
    for (&idx, (&lambda, &y)) in model
        .support_indices
        .iter()
        .zip(model.multipliers.iter().zip(&model.support_labels))
    {
        if idx < data.len() {
            multipliers[idx] = lambda;
        }
        residual += lambda * f64::from(y);
    }
    let c = model.penalty_c;
    let bound_eps = SUPPORT_THRESHOLD * c;
    let mut violations = Vec::new();
    for (index, sample) in data.iter().enumerate() {
        let lambda = multipliers[index];
        let margin = f64::from(sample.label) * model.decision_unchecked(&sample.features);
        let case = if !(0.0..=c).contains(&lambda) {
            Some(KktCase::OutOfBox)
        } else if lambda <= bound_eps {
            (margin < 1.0 - tolerance).then_some(KktCase::Zero)
        } else if lambda >= c - bound_eps {
            (margin > 1.0 + tolerance).then_some(KktCase::Bound)
        } else {
            ((margin - 1.0).abs() > tolerance).then_some(KktCase::Free)
        };
        if let Some(case) = case {
            violations.push(KktViolation {
                index,
                multiplier: lambda,
                margin,
                case,
            });
        }
    }
    KktReport {
        violations,
        equality_residual: residual.abs(),
    }
}
