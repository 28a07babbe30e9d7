//! Synthetic regression experiments comparing centered and simplified
//! directional KeRF as the number of trees grows.
//!
//! A sweep regenerates a uniform dataset for every repetition, splits it into
//! train and test parts, and for each tree count `M` and each algorithm fits a
//! finite KeRF and records the squared test error. Every random draw comes
//! from a counter-addressed substream of the master seed, so the record set is
//! a pure function of the configuration.

mod config;
mod output;
mod sweep;

pub use config::{parse_key_values, ExperimentOptions};
pub use output::{emit_outputs, read_records_csv, write_records_csv, write_summary_csv, RECORDS_HEADER, SUMMARY_HEADER};
pub use sweep::{
    dump_partitions, run_sweep, summarize, ExperimentConfig, ExperimentRecord, SummaryRow, BENCHMARK_M_VALUES,
};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::forests::TrainingSet;
use crate::partition::Point;

/// Regression function of a synthetic target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetKind {
    /// `x_1 + x_2`
    Linear,
    /// `x_1^2 + x_2^2`
    Quadratic,
    /// `2 x_1 + exp(-x_2^2)`
    Exp2d,
    /// A constant, for degenerate test configurations.
    Constant(f64),
}

impl TargetKind {
    pub const BENCHMARK: [TargetKind; 3] = [TargetKind::Linear, TargetKind::Quadratic, TargetKind::Exp2d];

    pub fn name(&self) -> &'static str {
        match self {
            TargetKind::Linear => "linear",
            TargetKind::Quadratic => "quadratic",
            TargetKind::Exp2d => "exp2d",
            TargetKind::Constant(_) => "constant",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(TargetKind::Linear),
            "quadratic" => Ok(TargetKind::Quadratic),
            "exp2d" => Ok(TargetKind::Exp2d),
            other => Err(Error::Parse(format!("unknown target {other:?}"))),
        }
    }

    /// Stable small integer used to address random substreams.
    pub(crate) fn stream_tag(&self) -> u64 {
        match self {
            TargetKind::Linear => 0,
            TargetKind::Quadratic => 1,
            TargetKind::Exp2d => 2,
            TargetKind::Constant(_) => 3,
        }
    }

    fn min_dim(&self) -> usize {
        match self {
            TargetKind::Constant(_) => 1,
            _ => 2,
        }
    }
}

/// A regression function plus additive Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetFunction {
    kind: TargetKind,
    noise_variance: f64,
}

/// Noise variance of the linear and quadratic benchmark targets.
pub const BENCHMARK_NOISE_VARIANCE: f64 = 0.5;

impl TargetFunction {
    pub fn new(kind: TargetKind, noise_variance: f64) -> Result<Self> {
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(Error::domain(format!("noise variance {noise_variance} is invalid")));
        }
        if kind == TargetKind::Exp2d && noise_variance != 0.0 {
            return Err(Error::domain("the exp2d target is noise-free"));
        }
        Ok(TargetFunction { kind, noise_variance })
    }

    /// Benchmark form: variance 1/2 noise on linear and quadratic, none on exp2d.
    pub fn benchmark(kind: TargetKind) -> Self {
        let noise = match kind {
            TargetKind::Linear | TargetKind::Quadratic => BENCHMARK_NOISE_VARIANCE,
            _ => 0.0,
        };
        TargetFunction { kind, noise_variance: noise }
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Noise-free regression value `m(x)`.
    pub fn mean(&self, x: &[f64]) -> f64 {
        match self.kind {
            TargetKind::Linear => x[0] + x[1],
            TargetKind::Quadratic => x[0] * x[0] + x[1] * x[1],
            TargetKind::Exp2d => 2.0 * x[0] + (-x[1] * x[1]).exp(),
            TargetKind::Constant(c) => c,
        }
    }
}

/// Draws `n` points uniformly in `[0, 1]^d` with responses `m(X) + eps`.
pub fn generate_dataset<R: Rng + ?Sized>(target: &TargetFunction, n: usize, d: usize, rng: &mut R) -> Result<TrainingSet> {
    if n < 1 {
        return Err(Error::domain("dataset needs at least one point"));
    }
    if d < target.kind.min_dim() {
        return Err(Error::domain(format!(
            "target {} needs d >= {}, got {d}",
            target.kind.name(),
            target.kind.min_dim()
        )));
    }
    let noise = Normal::new(0.0, target.noise_variance.sqrt()).map_err(|e| Error::domain(e.to_string()))?;
    let mut points = Vec::with_capacity(n);
    let mut responses = Vec::with_capacity(n);
    for _ in 0..n {
        let coords: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let mut y = target.mean(&coords);
        if target.noise_variance > 0.0 {
            y += noise.sample(rng);
        }
        points.push(Point::new(coords)?);
        responses.push(y);
    }
    TrainingSet::new(points, responses)
}

/// Training-side size for `n` points and test fraction `f`:
/// `ceil(n (1 - f))`, with float round-off below 1e-9 ignored.
pub fn train_size(n: usize, test_fraction: f64) -> usize {
    (n as f64 * (1.0 - test_fraction) - 1e-9).ceil() as usize
}

/// Uniformly random split without replacement into
/// `(train, test)` of sizes `ceil(n (1 - f))` and the rest.
pub fn train_test_split<R: Rng + ?Sized>(
    data: &TrainingSet,
    test_fraction: f64,
    rng: &mut R,
) -> Result<(TrainingSet, TrainingSet)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::domain(format!("test fraction {test_fraction} is not in (0, 1)")));
    }
    let n = data.len();
    let n_train = train_size(n, test_fraction);
    if n_train == 0 || n_train >= n {
        return Err(Error::domain(format!(
            "splitting {n} points at fraction {test_fraction} leaves an empty side"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let take = |idx: &[usize]| {
        TrainingSet::new(
            idx.iter().map(|&i| data.points()[i].clone()).collect(),
            idx.iter().map(|&i| data.responses()[i]).collect(),
        )
    };
    Ok((take(&order[..n_train])?, take(&order[n_train..])?))
}
