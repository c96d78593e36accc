//! Quantum-inspired genetic algorithm.
//!
//! Each candidate is a chromosome of `m` qubit genes `(α, β)` with
//! `α² + β² = 1`. Measuring a gene yields bit 1 with probability `β²`. The
//! measured bit strings are decoded into real parameters, scored by a fitness
//! function, and every chromosome is then rotated towards the best individual
//! found so far using a fixed lookup table of rotation directions.
//!
//! Randomness comes from ChaCha8 streams keyed by `(seed, generation,
//! chromosome, purpose)`, so results do not depend on whether fitness
//! evaluations run in parallel.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum QgaError {
    #[error("invalid QGA config: {0}")]
    InvalidConfig(String),
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("fitness evaluation failed at generation {generation}, individual {individual}: {source}")]
    Fitness {
        generation: usize,
        individual: usize,
        #[source]
        source: BoxError,
    },
    #[error("fitness at generation {generation}, individual {individual} is not finite ({value})")]
    NonFiniteFitness {
        generation: usize,
        individual: usize,
        value: f64,
    },
}

/// One qubit: amplitudes of `|0⟩` and `|1⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitGene {
    pub alpha: f64,
    pub beta: f64,
}

impl QubitGene {
    /// Equal superposition `(1/√2, 1/√2)`.
    pub const UNIFORM: QubitGene = QubitGene {
        alpha: FRAC_1_SQRT_2,
        beta: FRAC_1_SQRT_2,
    };

    pub fn prob_one(&self) -> f64 {
        self.beta * self.beta
    }

    pub fn norm_sqr(&self) -> f64 {
        self.alpha * self.alpha + self.beta * self.beta
    }

    /// Applies `[[cos θ, −sin θ], [sin θ, cos θ]]`.
    pub fn rotated(&self, theta: f64) -> QubitGene {
        let (s, c) = theta.sin_cos();
        QubitGene {
            alpha: c * self.alpha - s * self.beta,
            beta: s * self.alpha + c * self.beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QubitChromosome {
    pub genes: Vec<QubitGene>,
}

impl QubitChromosome {
    pub fn uniform(len: usize) -> Self {
        Self {
            genes: vec![QubitGene::UNIFORM; len],
        }
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }
}

/// How a dimension's integer code maps onto its range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// `low + t · (high − low)`
    #[default]
    Linear,
    /// `low · (high / low)^t`, requires `low > 0`
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dimension {
    pub name: String,
    pub low: f64,
    pub high: f64,
    pub bits: usize,
    pub scale: Scale,
}

impl Dimension {
    pub fn new(name: impl Into<String>, low: f64, high: f64, bits: usize) -> Self {
        Self {
            name: name.into(),
            low,
            high,
            bits,
            scale: Scale::Linear,
        }
    }

    pub fn with_scale(mut self, scale: Scale) -> Self {
        self.scale = scale;
        self
    }

    /// Maps an integer code in `0..2^bits` onto the range.
    pub fn value_of(&self, code: u64) -> f64 {
        let max = ((1u128 << self.bits) - 1) as f64;
        let t = code as f64 / max;
        match self.scale {
            Scale::Linear => self.low + t * (self.high - self.low),
            Scale::Log => self.low * (self.high / self.low).powf(t),
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.low && value <= self.high
    }
}

/// Boxed parameter space; bit widths of all dimensions sum to the qubit length.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub dims: Vec<Dimension>,
}

impl SearchSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self, QgaError> {
        if dims.is_empty() {
            return Err(QgaError::InvalidSpace("no dimensions".into()));
        }
        for d in &dims {
            if !d.low.is_finite() || !d.high.is_finite() || d.low >= d.high {
                return Err(QgaError::InvalidSpace(format!(
                    "{}: need low < high, got [{}, {}]",
                    d.name, d.low, d.high
                )));
            }
            if d.bits == 0 || d.bits > 63 {
                return Err(QgaError::InvalidSpace(format!(
                    "{}: bits must be in 1..=63, got {}",
                    d.name, d.bits
                )));
            }
            if d.scale == Scale::Log && d.low <= 0.0 {
                return Err(QgaError::InvalidSpace(format!(
                    "{}: log scale needs a positive lower bound",
                    d.name
                )));
            }
        }
        Ok(Self { dims })
    }

    /// `C ∈ [2⁻², 2⁴]`, `σ ∈ [2⁻⁴, 2⁴]`, 30 bits each.
    pub fn svm_default() -> Self {
        Self::new(vec![
            Dimension::new("C", 0.25, 16.0, 30),
            Dimension::new("sigma", 0.0625, 16.0, 30),
        ])
        .expect("valid default space")
    }

    pub fn total_bits(&self) -> usize {
        self.dims.iter().map(|d| d.bits).sum()
    }

    pub fn contains(&self, params: &[f64]) -> bool {
        params.len() == self.dims.len() && self.dims.iter().zip(params).all(|(d, &v)| d.contains(v))
    }
}

/// Decodes a bit string, first bit of each slice most significant.
pub fn decode(bits: &[bool], space: &SearchSpace) -> Vec<f64> {
    assert_eq!(bits.len(), space.total_bits(), "bit string length");
    let mut offset = 0;
    space
        .dims
        .iter()
        .map(|d| {
            let code = bits[offset..offset + d.bits]
                .iter()
                .fold(0u64, |acc, &b| (acc << 1) | u64::from(b));
            offset += d.bits;
            d.value_of(code)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QgaConfig {
    pub population_size: usize,
    pub qubit_length: usize,
    pub max_generations: usize,
    /// Rotation magnitude in radians.
    pub delta_theta: f64,
    /// Generations without improvement before the population is reset; 0 disables.
    pub catastrophe_patience: usize,
    /// Stop once the best fitness improves by less than this between generations.
    /// Zero runs to `max_generations`.
    pub convergence_epsilon: f64,
    pub seed: u64,
    /// Evaluate fitness of a generation on the rayon pool.
    pub parallel: bool,
}

impl Default for QgaConfig {
    fn default() -> Self {
        Self {
            population_size: 80,
            qubit_length: 60,
            max_generations: 5,
            delta_theta: 0.01 * PI,
            catastrophe_patience: 0,
            convergence_epsilon: 0.0,
            seed: 0,
            parallel: true,
        }
    }
}

impl QgaConfig {
    pub fn validate(&self, space: &SearchSpace) -> Result<(), QgaError> {
        if self.population_size < 2 {
            return Err(QgaError::InvalidConfig(format!(
                "population_size must be at least 2, got {}",
                self.population_size
            )));
        }
        if !(self.delta_theta > 0.0 && self.delta_theta.is_finite()) {
            return Err(QgaError::InvalidConfig(format!(
                "delta_theta must be positive, got {}",
                self.delta_theta
            )));
        }
        if self.convergence_epsilon.is_nan() || self.convergence_epsilon < 0.0 {
            return Err(QgaError::InvalidConfig(
                "convergence_epsilon must be non-negative".into(),
            ));
        }
        if self.qubit_length != space.total_bits() {
            return Err(QgaError::InvalidConfig(format!(
                "qubit_length {} does not match the search space's {} bits",
                self.qubit_length,
                space.total_bits()
            )));
        }
        if self.population_size >= 1 << 22 {
            return Err(QgaError::InvalidConfig("population_size too large".into()));
        }
        Ok(())
    }
}

/// Every chromosome starts in equal superposition.
pub fn init_population(config: &QgaConfig) -> Vec<QubitChromosome> {
    vec![QubitChromosome::uniform(config.qubit_length); config.population_size]
}

/// Collapses each gene: bit 1 when a uniform draw falls below `β²`.
pub fn measure<R: Rng + ?Sized>(chromosome: &QubitChromosome, rng: &mut R) -> Vec<bool> {
    chromosome
        .genes
        .iter()
        .map(|g| rng.random::<f64>() < g.prob_one())
        .collect()
}

/// Direction entry of the rotation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignRule {
    Plus,
    Minus,
    Zero,
    /// Either direction, chosen at random.
    Either,
}

/// Which sign column of the table a gene falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrant {
    /// `αβ > 0`
    SameSign,
    /// `αβ < 0`
    OppositeSign,
    /// `α = 0`
    AlphaZero,
    /// `β = 0`
    BetaZero,
}

impl Quadrant {
    pub fn of(gene: &QubitGene) -> Self {
        if gene.alpha == 0.0 {
            Quadrant::AlphaZero
        } else if gene.beta == 0.0 {
            Quadrant::BetaZero
        } else if gene.alpha * gene.beta > 0.0 {
            Quadrant::SameSign
        } else {
            Quadrant::OppositeSign
        }
    }
}

/// Rotation table row for `(x_i, best_i, f(x) > f(best))`: whether to rotate at
/// all, and the sign for each quadrant column in the order
/// `[αβ>0, αβ<0, α=0, β=0]`.
pub fn strategy(x: bool, best: bool, current_better: bool) -> (bool, [SignRule; 4]) {
    use SignRule::*;
    match (x, best, current_better) {
        (false, true, false) | (true, false, true) => (true, [Plus, Minus, Zero, Either]),
        (false, true, true) | (true, false, false) => (true, [Minus, Plus, Either, Zero]),
        _ => (false, [Zero; 4]),
    }
}

/// Signed rotation angle for one gene. `coin` is consulted only for `Either` cells.
pub fn rotation_angle(
    x: bool,
    best: bool,
    current_better: bool,
    gene: &QubitGene,
    delta_theta: f64,
    coin: impl FnOnce() -> bool,
) -> f64 {
    let (active, signs) = strategy(x, best, current_better);
    if !active {
        return 0.0;
    }
    let rule = match Quadrant::of(gene) {
        Quadrant::SameSign => signs[0],
        Quadrant::OppositeSign => signs[1],
        Quadrant::AlphaZero => signs[2],
        Quadrant::BetaZero => signs[3],
    };
    match rule {
        SignRule::Plus => delta_theta,
        SignRule::Minus => -delta_theta,
        SignRule::Zero => 0.0,
        SignRule::Either => {
            if coin() {
                delta_theta
            } else {
                -delta_theta
            }
        }
    }
}

/// Rotates every gene of `chromosome` according to the table.
pub fn rotate<R: Rng + ?Sized>(
    chromosome: &QubitChromosome,
    measured: &[bool],
    best: &[bool],
    current_better: bool,
    delta_theta: f64,
    rng: &mut R,
) -> QubitChromosome {
    assert_eq!(measured.len(), chromosome.len());
    assert_eq!(best.len(), chromosome.len());
    let genes = chromosome
        .genes
        .iter()
        .zip(measured.iter().zip(best))
        .map(|(gene, (&x, &b))| {
            let theta = rotation_angle(x, b, current_better, gene, delta_theta, || {
                rng.random::<bool>()
            });
            if theta == 0.0 {
                *gene
            } else {
                gene.rotated(theta)
            }
        })
        .collect();
    QubitChromosome { genes }
}

/// Fitness to maximise. Implementations must be safe to call from several threads.
pub trait FitnessFunction: Sync {
    fn evaluate(&self, params: &[f64]) -> Result<f64, BoxError>;
}

impl<F> FitnessFunction for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, params: &[f64]) -> Result<f64, BoxError> {
        Ok(self(params))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredIndividual {
    pub bits: Vec<bool>,
    pub decoded: Vec<f64>,
    pub fitness: f64,
}

/// What happened in one generation.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub individuals: Vec<MeasuredIndividual>,
    pub best_params: Vec<f64>,
    pub best_fitness: f64,
    /// The population was reset before this generation was measured.
    pub after_catastrophe: bool,
}

impl GenerationRecord {
    /// `generation best_fitness p1 p2 ...`, whitespace separated.
    pub fn trace_line(&self) -> String {
        let mut line = format!("{} {}", self.generation, self.best_fitness);
        for p in &self.best_params {
            line.push_str(&format!(" {p}"));
        }
        line
    }
}

pub trait Observer {
    fn on_generation(&mut self, record: &GenerationRecord);
}

impl Observer for () {
    fn on_generation(&mut self, _: &GenerationRecord) {}
}

impl<F: FnMut(&GenerationRecord)> Observer for F {
    fn on_generation(&mut self, record: &GenerationRecord) {
        self(record)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QgaResult {
    pub best_params: Vec<f64>,
    pub best_bits: Vec<bool>,
    pub best_fitness: f64,
    /// Best-so-far fitness after each generation, starting with the initial measurement.
    pub history: Vec<f64>,
    pub catastrophes: usize,
}

const PURPOSE_MEASURE: u64 = 0;
const PURPOSE_ROTATE: u64 = 1;

/// Substream for one chromosome in one generation.
pub fn stream_rng(seed: u64, generation: usize, individual: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 24) | ((individual as u64) << 2) | purpose);
    rng
}

fn evaluate_generation<F: FitnessFunction + ?Sized>(
    population: &[QubitChromosome],
    space: &SearchSpace,
    fitness: &F,
    config: &QgaConfig,
    generation: usize,
) -> Result<Vec<MeasuredIndividual>, QgaError> {
    let one = |(idx, chromosome): (usize, &QubitChromosome)| {
        let mut rng = stream_rng(config.seed, generation, idx, PURPOSE_MEASURE);
        let bits = measure(chromosome, &mut rng);
        let decoded = decode(&bits, space);
        let value = fitness
            .evaluate(&decoded)
            .map_err(|source| QgaError::Fitness {
                generation,
                individual: idx,
                source,
            })?;
        if !value.is_finite() {
            return Err(QgaError::NonFiniteFitness {
                generation,
                individual: idx,
                value,
            });
        }
        Ok(MeasuredIndividual {
            bits,
            decoded,
            fitness: value,
        })
    };
    if config.parallel {
        population.par_iter().enumerate().map(one).collect()
    } else {
        population.iter().enumerate().map(one).collect()
    }
}

/// Runs the measure / evaluate / rotate loop and returns the best individual seen.
pub fn run<F: FitnessFunction + ?Sized>(
    space: &SearchSpace,
    fitness: &F,
    config: &QgaConfig,
    observer: &mut dyn Observer,
) -> Result<QgaResult, QgaError> {
    config.validate(space)?;
    let mut population = init_population(config);
    let mut best: Option<MeasuredIndividual> = None;
    let mut history = Vec::with_capacity(config.max_generations + 1);
    let mut stale = 0usize;
    let mut catastrophes = 0usize;
    let mut after_catastrophe = false;
    let mut generation = 0usize;

    loop {
        let individuals = evaluate_generation(&population, space, fitness, config, generation)?;
        let mut improved = false;
        for ind in &individuals {
            if best.as_ref().is_none_or(|b| ind.fitness > b.fitness) {
                best = Some(ind.clone());
                improved = true;
            }
        }
        let best_ref = best.as_ref().expect("population is non-empty");
        let previous = history.last().copied();
        history.push(best_ref.fitness);
        observer.on_generation(&GenerationRecord {
            generation,
            individuals: individuals.clone(),
            best_params: best_ref.decoded.clone(),
            best_fitness: best_ref.fitness,
            after_catastrophe,
        });

        if generation >= config.max_generations {
            break;
        }
        if config.convergence_epsilon > 0.0 {
            if let Some(prev) = previous {
                if best_ref.fitness - prev < config.convergence_epsilon {
                    break;
                }
            }
        }

        population = population
            .iter()
            .zip(&individuals)
            .enumerate()
            .map(|(idx, (chromosome, ind))| {
                let mut rng = stream_rng(config.seed, generation, idx, PURPOSE_ROTATE);
                rotate(
                    chromosome,
                    &ind.bits,
                    &best_ref.bits,
                    ind.fitness > best_ref.fitness,
                    config.delta_theta,
                    &mut rng,
                )
            })
            .collect();

        stale = if improved { 0 } else { stale + 1 };
        after_catastrophe = false;
        if config.catastrophe_patience > 0 && stale >= config.catastrophe_patience {
            population = init_population(config);
            stale = 0;
            catastrophes += 1;
            after_catastrophe = true;
        }
        generation += 1;
    }

    let best = best.expect("population is non-empty");
    Ok(QgaResult {
        best_params: best.decoded,
        best_bits: best.bits,
        best_fitness: best.fitness,
        history,
        catastrophes,
    })
}
