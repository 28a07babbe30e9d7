use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{generate_dataset, train_test_split, TargetFunction};
use crate::error::{Error, Result};
use crate::forests::{CenteredTree, DirectionalSchedule, Partition, TrainingSet};
use crate::kernel::{kerf_predict_batch, Flavor};
use crate::rng::{derived_seed, substream};

/// Tree counts of the benchmark sweep.
pub const BENCHMARK_M_VALUES: [usize; 7] = [1, 50, 100, 200, 300, 400, 500];

const DATA_STREAM: u64 = 1;
const SPLIT_STREAM: u64 = 2;
const PARTITION_STREAM: u64 = 3;

/// Everything that determines a sweep's output.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub d: usize,
    pub k: u32,
    /// Strictly increasing tree counts.
    pub m_values: Vec<usize>,
    pub reps: usize,
    pub test_fraction: f64,
    pub master_seed: u64,
    pub target: TargetFunction,
    pub algorithms: Vec<Flavor>,
    /// Worker threads; `None` uses the global rayon pool. Output does not
    /// depend on this.
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// The benchmark protocol: n = 1500 uniform points in 2-D, 80/20 split,
    /// depth 11, seven tree counts, 30 repetitions, both algorithms.
    pub fn benchmark(target: TargetFunction, master_seed: u64) -> Self {
        ExperimentConfig {
            n: 1500,
            d: 2,
            k: 11,
            m_values: BENCHMARK_M_VALUES.to_vec(),
            reps: 30,
            test_fraction: 0.2,
            master_seed,
            target,
            algorithms: Flavor::ALL.to_vec(),
            threads: None,
        }
    }

    /// Depth `ceil(log2 n_train)`, so leaves hold about one training point.
    pub fn default_depth(n: usize, test_fraction: f64) -> u32 {
        let n_train = super::train_size(n, test_fraction).max(1);
        n_train.next_power_of_two().trailing_zeros()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::domain("n must be at least 2"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::domain("test fraction must lie in (0, 1)"));
        }
        if self.reps < 1 {
            return Err(Error::domain("reps must be at least 1"));
        }
        if self.m_values.is_empty() {
            return Err(Error::domain("m_values must not be empty"));
        }
        if self.m_values[0] < 1 || self.m_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("m_values must be positive and strictly increasing"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::domain("at least one algorithm is required"));
        }
        if self.threads == Some(0) {
            return Err(Error::domain("threads must be at least 1"));
        }
        Ok(())
    }

    /// Seed of the forest drawn for one sweep cell; tree `t` uses substream `t`.
    pub fn cell_seed(&self, rep: usize, m_index: usize, flavor: Flavor) -> u64 {
        derived_seed(
            self.master_seed,
            &[self.target.kind().stream_tag(), PARTITION_STREAM, rep as u64, m_index as u64, flavor as u64],
        )
    }

    /// Train and test data of repetition `rep`, shared by every cell of it.
    pub fn rep_data(&self, rep: usize) -> Result<(TrainingSet, TrainingSet)> {
        let tag = self.target.kind().stream_tag();
        let mut data_rng = substream(self.master_seed, &[tag, DATA_STREAM, rep as u64]);
        let data = generate_dataset(&self.target, self.n, self.d, &mut data_rng)?;
        let mut split_rng = substream(self.master_seed, &[tag, SPLIT_STREAM, rep as u64]);
        train_test_split(&data, self.test_fraction, &mut split_rng)
    }
}

/// One `(target, algorithm, M, repetition)` measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub target: String,
    pub algorithm: String,
    pub n_train: usize,
    pub n_test: usize,
    pub d: usize,
    pub k: u32,
    pub m: usize,
    pub rep: usize,
    /// Seed of the substream the record's partitions were drawn from.
    pub seed: u64,
    /// Sum of squared test residuals.
    pub l2_sum: f64,
    pub mse: f64,
    /// Test points that received no kernel mass (predicted as 0).
    pub empty_predictions: usize,
}

pub(crate) fn algorithm_name(flavor: Flavor) -> &'static str {
    match flavor {
        Flavor::Centered => "centered-kerf",
        Flavor::Directional => "directional-kerf",
    }
}

enum Forest {
    Centered(Vec<CenteredTree>),
    Directional(Vec<DirectionalSchedule>),
}

impl Forest {
    /// Tree `t` of a cell is drawn from substream `t` of the cell seed.
    fn sample(flavor: Flavor, m: usize, k: u32, d: usize, seed: u64) -> Result<Self> {
        let rngs = (0..m).map(|t| substream(seed, &[t as u64]));
        Ok(match flavor {
            Flavor::Centered => Forest::Centered(
                rngs.map(|mut r| CenteredTree::sample(k, d, &mut r))
                    .collect::<Result<_>>()?,
            ),
            Flavor::Directional => Forest::Directional(
                rngs.map(|mut r| DirectionalSchedule::sample(k, d, &mut r))
                    .collect::<Result<_>>()?,
            ),
        })
    }

    fn predict(&self, train: &TrainingSet, test: &TrainingSet) -> Result<Vec<crate::forests::Prediction>> {
        match self {
            Forest::Centered(f) => kerf_predict_batch(f, train, test.points()),
            Forest::Directional(f) => kerf_predict_batch(f, train, test.points()),
        }
    }

    fn to_text(&self) -> String {
        match self {
            Forest::Centered(f) => f.iter().map(Partition::to_text).collect(),
            Forest::Directional(f) => f.iter().map(Partition::to_text).collect(),
        }
    }
}

fn in_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::domain(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Runs every `(rep, M, algorithm)` cell of the sweep.
///
/// Records come back ordered by repetition, then `M`, then algorithm. Within
/// one repetition all cells share the same train/test data.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    config.validate()?;
    in_pool(config.threads, || {
        let data = (0..config.reps)
            .into_par_iter()
            .map(|rep| config.rep_data(rep))
            .collect::<Result<Vec<_>>>()?;
        let jobs: Vec<(usize, usize, Flavor)> = (0..config.reps)
            .flat_map(|rep| {
                (0..config.m_values.len())
                    .flat_map(move |mi| config.algorithms.iter().map(move |&f| (rep, mi, f)))
            })
            .collect();
        jobs.into_par_iter()
            .map(|(rep, mi, flavor)| {
                let (train, test) = &data[rep];
                let m = config.m_values[mi];
                let seed = config.cell_seed(rep, mi, flavor);
                let forest = Forest::sample(flavor, m, config.k, config.d, seed)?;
                let preds = forest.predict(train, test)?;
                let l2_sum: f64 = preds
                    .iter()
                    .zip(test.responses())
                    .map(|(p, y)| (p.value - y) * (p.value - y))
                    .sum();
                Ok(ExperimentRecord {
                    target: config.target.kind().name().to_string(),
                    algorithm: algorithm_name(flavor).to_string(),
                    n_train: train.len(),
                    n_test: test.len(),
                    d: config.d,
                    k: config.k,
                    m,
                    rep,
                    seed,
                    l2_sum,
                    mse: l2_sum / test.len() as f64,
                    empty_predictions: preds.iter().filter(|p| p.empty).count(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?
}

/// Writes the partitions of every sweep cell to
/// `dir/trees/<target>_rep<r>_M<m>_<algorithm>.txt`, regenerating them from
/// their seeds. Returns the written paths.
pub fn dump_partitions(config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let tree_dir = dir.join("trees");
    fs::create_dir_all(&tree_dir).map_err(|e| Error::io(&tree_dir, e))?;
    let mut written = Vec::new();
    for rep in 0..config.reps {
        for (mi, &m) in config.m_values.iter().enumerate() {
            for &flavor in &config.algorithms {
                let forest = Forest::sample(flavor, m, config.k, config.d, config.cell_seed(rep, mi, flavor))?;
                let path = tree_dir.join(format!(
                    "{}_rep{rep}_M{m}_{}.txt",
                    config.target.kind().name(),
                    algorithm_name(flavor)
                ));
                fs::write(&path, forest.to_text()).map_err(|e| Error::io(&path, e))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

/// Mean and spread of mse across repetitions for one `(target, algorithm, M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub target: String,
    pub algorithm: String,
    pub m: usize,
    pub mean_mse: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single rep.
    pub std_mse: f64,
    pub reps: usize,
    /// Fewer than two repetitions, so `std_mse` carries no information.
    pub low_replication: bool,
}

/// Groups records by `(target, algorithm, M)` in order of first appearance.
pub fn summarize(records: &[ExperimentRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::domain("cannot summarize an empty record set"));
    }
    let mut groups: Vec<((&str, &str, usize), Vec<f64>)> = Vec::new();
    for r in records {
        let key = (r.target.as_str(), r.algorithm.as_str(), r.m);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r.mse),
            None => groups.push((key, vec![r.mse])),
        }
    }
    // order: target by first appearance, then algorithm, then M
    let target_rank = |t: &str| groups.iter().position(|((gt, _, _), _)| *gt == t).unwrap();
    let mut rows: Vec<SummaryRow> = groups
        .iter()
        .map(|((target, algorithm, m), v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std = if v.len() > 1 {
                (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                target: target.to_string(),
                algorithm: algorithm.to_string(),
                m: *m,
                mean_mse: mean,
                std_mse: std,
                reps: v.len(),
                low_replication: v.len() < 2,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        (target_rank(&a.target), &a.algorithm, a.m).cmp(&(target_rank(&b.target), &b.algorithm, b.m))
    });
    Ok(rows)
}
