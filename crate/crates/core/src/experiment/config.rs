use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use super::sweep::{ExperimentConfig, BENCHMARK_M_VALUES};
use super::{TargetFunction, TargetKind, BENCHMARK_NOISE_VARIANCE};
use crate::error::{Error, Result};
use crate::kernel::Flavor;

pub const DEFAULT_SEED: u64 = 42;

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected key=value", i + 1)))?;
        out.insert(key.trim().replace('_', "-"), value.trim().to_string());
    }
    Ok(out)
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|v| v.trim().parse().map_err(|_| Error::Parse(format!("bad list element {v:?}"))))
        .collect()
}

/// Partially specified experiment settings, as read from flags or a config
/// file. Unset fields fall back to the benchmark protocol.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOptions {
    /// `linear`, `quadratic`, `exp2d` or `all`.
    pub target: Option<String>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub k: Option<u32>,
    pub m_values: Option<Vec<usize>>,
    pub reps: Option<usize>,
    pub test_fraction: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Noise variance for the noisy targets (linear, quadratic).
    pub noise_variance: Option<f64>,
    pub threads: Option<usize>,
    pub dump_trees: Option<bool>,
}

impl ExperimentOptions {
    pub fn from_key_values(map: &BTreeMap<String, String>) -> Result<Self> {
        fn get<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
            map.get(key)
                .map(|v| v.parse().map_err(|_| Error::Parse(format!("bad value {v:?} for {key}"))))
                .transpose()
        }
        const KNOWN: [&str; 12] = [
            "target", "n", "d", "k", "m-values", "reps", "test-fraction", "seed", "out", "noise-variance", "threads",
            "dump-trees",
        ];
        if let Some(unknown) = map.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(Error::Parse(format!("unknown config key {unknown:?}")));
        }
        Ok(ExperimentOptions {
            target: map.get("target").cloned(),
            n: get(map, "n")?,
            d: get(map, "d")?,
            k: get(map, "k")?,
            m_values: map.get("m-values").map(|s| parse_list(s)).transpose()?,
            reps: get(map, "reps")?,
            test_fraction: get(map, "test-fraction")?,
            seed: get(map, "seed")?,
            out: map.get("out").map(PathBuf::from),
            noise_variance: get(map, "noise-variance")?,
            threads: get(map, "threads")?,
            dump_trees: get(map, "dump-trees")?,
        })
    }

    /// Fields set in `over` win.
    pub fn overlay(self, over: ExperimentOptions) -> Self {
        ExperimentOptions {
            target: over.target.or(self.target),
            n: over.n.or(self.n),
            d: over.d.or(self.d),
            k: over.k.or(self.k),
            m_values: over.m_values.or(self.m_values),
            reps: over.reps.or(self.reps),
            test_fraction: over.test_fraction.or(self.test_fraction),
            seed: over.seed.or(self.seed),
            out: over.out.or(self.out),
            noise_variance: over.noise_variance.or(self.noise_variance),
            threads: over.threads.or(self.threads),
            dump_trees: over.dump_trees.or(self.dump_trees),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("results"))
    }

    /// One validated configuration per requested target.
    pub fn resolve(&self) -> Result<Vec<ExperimentConfig>> {
        let kinds = match self.target.as_deref().unwrap_or("all") {
            "all" => TargetKind::BENCHMARK.to_vec(),
            one => vec![TargetKind::parse(one)?],
        };
        let n = self.n.unwrap_or(1500);
        let test_fraction = self.test_fraction.unwrap_or(0.2);
        let noise = self.noise_variance.unwrap_or(BENCHMARK_NOISE_VARIANCE);
        kinds
            .into_iter()
            .map(|kind| {
                let target = match kind {
                    TargetKind::Exp2d => TargetFunction::benchmark(kind),
                    _ => TargetFunction::new(kind, noise)?,
                };
                let config = ExperimentConfig {
                    n,
                    d: self.d.unwrap_or(2),
                    k: self.k.unwrap_or_else(|| ExperimentConfig::default_depth(n, test_fraction)),
                    m_values: self.m_values.clone().unwrap_or_else(|| BENCHMARK_M_VALUES.to_vec()),
                    reps: self.reps.unwrap_or(30),
                    test_fraction,
                    master_seed: self.seed.unwrap_or(DEFAULT_SEED),
                    target,
                    algorithms: Flavor::ALL.to_vec(),
                    threads: self.threads,
                };
                config.validate()?;
                Ok(config)
            })
            .collect()
    }
}
