//! Independent verifiers of the connection probability of random dyadic
//! partitions.
//!
//! For a pair `(x, z)` and depth `k` the lab computes the probability that the
//! two points share a cell in four ways that do not share code paths beyond
//! the 1-D cell index:
//!
//! * the closed-form multinomial kernel ([`crate::kernel::centered_kernel`]),
//! * a level-by-level recursion over the first split ([`exact_connection_centered`]),
//! * exhaustive enumeration of labeled centered trees ([`enumerate_centered`])
//!   and of directional schedules ([`enumerate_directional`]),
//! * Monte Carlo sampling of either construction ([`mc_connection`]).
//!
//! The centered law is "every internal node label independent and uniform",
//! so a depth-`k` tree over `d` coordinates is one of `d^(2^k - 1)` equally
//! likely labeled trees.

use std::io::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forests::{CenteredTree, DirectionalSchedule, Partition};
use crate::kernel::{centered_kernel, centered_kernel_exact, Flavor, KernelSpec};
use crate::partition::{cell_index_unchecked, check_same_dim, Point, MAX_CELL_DEPTH};
use crate::rng::{derived_seed, substream};

/// Most labeled centered trees [`enumerate_centered`] will walk.
pub const CENTERED_ENUMERATION_CAP: u128 = 1 << 7;

/// Most schedules [`enumerate_directional`] will walk.
pub const DIRECTIONAL_ENUMERATION_CAP: u128 = 10_000_000;

/// Absolute tolerance between floating exact values.
pub const EXACT_TOLERANCE: f64 = 1e-12;

/// Monte Carlo acceptance band `5 sqrt(p (1 - p) / M) + 1e-6`.
pub fn mc_tolerance(p: f64, samples: u64) -> f64 {
    5.0 * (p * (1.0 - p) / samples as f64).max(0.0).sqrt() + 1e-6
}

/// Number of partitions that keep a pair together, out of all considered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConnectionCount {
    pub connected: u64,
    pub total: u64,
}

impl ConnectionCount {
    /// `connected / total` as an exact (reduced) rational.
    pub fn ratio(&self) -> BigRational {
        BigRational::new(BigInt::from(self.connected), BigInt::from(self.total))
    }

    pub fn value(&self) -> f64 {
        self.connected as f64 / self.total as f64
    }
}

/// Moves `t` into its half of `[0, 1]` and stretches that half back to the
/// unit interval: `t -> 2t - (cell_index(t, 1) - 1)`. Exact for floats.
#[inline]
fn zoom(t: f64) -> f64 {
    2.0 * t - (cell_index_unchecked(t, 1) - 1) as f64
}

fn recurse_probability(k: u32, x: &mut [f64], z: &mut [f64]) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let d = x.len();
    let mut sum = 0.0;
    for j in 0..d {
        if cell_index_unchecked(x[j], 1) != cell_index_unchecked(z[j], 1) {
            continue;
        }
        let (xj, zj) = (x[j], z[j]);
        x[j] = zoom(xj);
        z[j] = zoom(zj);
        sum += recurse_probability(k - 1, x, z);
        x[j] = xj;
        z[j] = zj;
    }
    sum / d as f64
}

fn recurse_count(k: u32, x: &mut [f64], z: &mut [f64]) -> u128 {
    if k == 0 {
        return 1;
    }
    let mut sum = 0;
    for j in 0..x.len() {
        if cell_index_unchecked(x[j], 1) != cell_index_unchecked(z[j], 1) {
            continue;
        }
        let (xj, zj) = (x[j], z[j]);
        x[j] = zoom(xj);
        z[j] = zoom(zj);
        sum += recurse_count(k - 1, x, z);
        x[j] = xj;
        z[j] = zj;
    }
    sum
}

/// Connection probability of a depth-`k` centered tree by recursion on the
/// root split: the root picks coordinate `j` with probability `1/d`; the pair
/// survives iff it sits on one side of the midpoint, and then each half is an
/// independent centered tree of depth `k - 1` on the zoomed-in half-cell.
pub fn exact_connection_centered(k: u32, x: &Point, z: &Point) -> Result<f64> {
    check_same_dim(x, z)?;
    let mut xs = x.coords().to_vec();
    let mut zs = z.coords().to_vec();
    Ok(recurse_probability(k, &mut xs, &mut zs))
}

/// [`exact_connection_centered`] as an exact rational.
pub fn exact_connection_centered_ratio(k: u32, x: &Point, z: &Point) -> Result<BigRational> {
    check_same_dim(x, z)?;
    let d = x.dim() as u128;
    let den = d.checked_pow(k).ok_or(Error::Capacity {
        what: "exact recursion",
        needed: u128::MAX,
        cap: u128::MAX,
    })?;
    let mut xs = x.coords().to_vec();
    let mut zs = z.coords().to_vec();
    let num = recurse_count(k, &mut xs, &mut zs);
    Ok(BigRational::new(BigInt::from(num), BigInt::from(den)))
}

fn checked_space(d: usize, exponent: u128, cap: u128, what: &'static str) -> Result<u64> {
    let mut size: u128 = 1;
    for _ in 0..exponent {
        size = size.saturating_mul(d as u128);
        if size > cap {
            return Err(Error::Capacity { what, needed: size, cap });
        }
    }
    Ok(size as u64)
}

/// Walks every labeled centered tree of depth `k` and counts those whose
/// leaves hold `x` and `z` together.
pub fn enumerate_centered(k: u32, x: &Point, z: &Point) -> Result<ConnectionCount> {
    check_same_dim(x, z)?;
    let d = x.dim();
    if k >= 64 {
        return Err(Error::Capacity {
            what: "centered tree enumeration",
            needed: u128::MAX,
            cap: CENTERED_ENUMERATION_CAP,
        });
    }
    let nodes = (1u128 << k) - 1;
    let total = checked_space(d, nodes, CENTERED_ENUMERATION_CAP, "centered tree enumeration")?;
    let mut labels = vec![0u16; nodes as usize];
    let mut connected = 0;
    for index in 0..total {
        // base-d digits of the tree index are its labels
        let mut rest = index;
        for l in labels.iter_mut() {
            *l = (rest % d as u64) as u16;
            rest /= d as u64;
        }
        let tree = CenteredTree::new(k, d, labels.clone())?;
        if tree.leaf_of(x)? == tree.leaf_of(z)? {
            connected += 1;
        }
    }
    Ok(ConnectionCount { connected, total })
}

/// Walks all `d^k` directional schedules and counts those whose grid holds
/// `x` and `z` in one cell.
pub fn enumerate_directional(k: u32, x: &Point, z: &Point) -> Result<ConnectionCount> {
    check_same_dim(x, z)?;
    let d = x.dim();
    if k > MAX_CELL_DEPTH {
        return Err(Error::domain(format!("depth {k} exceeds {MAX_CELL_DEPTH}")));
    }
    let total = checked_space(d, k as u128, DIRECTIONAL_ENUMERATION_CAP, "directional schedule enumeration")?;
    // the schedule is an odometer over base-d digits; split counts are kept
    // in step with it so each schedule costs O(d) to test
    let mut sequence = vec![0usize; k as usize];
    let mut counts = vec![0u32; d];
    counts[0] = k;
    let mut connected = 0;
    for _ in 0..total {
        let together = x
            .coords()
            .iter()
            .zip(z.coords())
            .zip(&counts)
            .all(|((&a, &b), &c)| cell_index_unchecked(a, c) == cell_index_unchecked(b, c));
        connected += together as u64;
        for l in sequence.iter_mut() {
            counts[*l] -= 1;
            *l = (*l + 1) % d;
            counts[*l] += 1;
            if *l != 0 {
                break;
            }
        }
    }
    Ok(ConnectionCount { connected, total })
}

const MC_BLOCK: u64 = 4096;

/// Fraction of `samples` independently drawn partitions that keep `x` and `z`
/// together. Blocks of draws use their own substreams of `seed`, so the
/// estimate does not depend on the thread count.
pub fn mc_connection(flavor: Flavor, k: u32, x: &Point, z: &Point, samples: u64, seed: u64) -> Result<f64> {
    check_same_dim(x, z)?;
    if samples == 0 {
        return Err(Error::domain("Monte Carlo needs at least one sample"));
    }
    let d = x.dim();
    let blocks = samples.div_ceil(MC_BLOCK);
    let hits = (0..blocks)
        .into_par_iter()
        .map(|b| -> Result<u64> {
            let mut rng = substream(seed, &[flavor as u64, b]);
            let n = MC_BLOCK.min(samples - b * MC_BLOCK);
            let mut hits = 0;
            match flavor {
                Flavor::Centered => {
                    let mut tree = CenteredTree::sample(k, d, &mut rng)?;
                    for i in 0..n {
                        if i > 0 {
                            tree.resample(&mut rng);
                        }
                        hits += tree.same_cell(x, z)? as u64;
                    }
                }
                Flavor::Directional => {
                    let mut s = DirectionalSchedule::sample(k, d, &mut rng)?;
                    for i in 0..n {
                        if i > 0 {
                            s.resample(&mut rng);
                        }
                        hits += s.same_cell(x, z)? as u64;
                    }
                }
            }
            Ok(hits)
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum::<u64>();
    Ok(hits as f64 / samples as f64)
}

/// Parameters of an [`equivalence_report`] run.
#[derive(Debug, Clone)]
pub struct EquivalenceConfig {
    pub pairs: usize,
    pub k_max: u32,
    pub d_max: usize,
    /// Monte Carlo draws per flavor and row; 0 skips the Monte Carlo columns.
    pub mc_samples: u64,
    pub seed: u64,
}

/// One `(pair, d, k)` row of the report.
#[derive(Debug, Clone)]
pub struct EquivalenceRow {
    pub d: usize,
    pub k: u32,
    pub x: Point,
    pub z: Point,
    pub kernel_closed_form: f64,
    pub oracle_exact: f64,
    /// `None` when the instance exceeds the enumeration cap.
    pub enum_centered: Option<ConnectionCount>,
    pub enum_directional: Option<ConnectionCount>,
    pub mc_centered: Option<f64>,
    pub mc_directional: Option<f64>,
    pub mc_samples: u64,
    pub seed: u64,
    /// All exact routes agree (rationally, and within 1e-12 in floats).
    pub exact_pass: bool,
    /// Both Monte Carlo estimates fall inside the band (true when skipped).
    pub mc_pass: bool,
}

impl EquivalenceRow {
    pub fn pass(&self) -> bool {
        self.exact_pass && self.mc_pass
    }
}

/// Evaluates a single instance with every verifier.
pub fn equivalence_row(k: u32, x: &Point, z: &Point, mc_samples: u64, seed: u64) -> Result<EquivalenceRow> {
    check_same_dim(x, z)?;
    let d = x.dim();
    let spec = KernelSpec::centered(k, d)?;
    let closed = centered_kernel(&spec, x, z)?;
    let closed_exact = centered_kernel_exact(&spec, x, z)?;
    let oracle = exact_connection_centered(k, x, z)?;
    let oracle_exact = exact_connection_centered_ratio(k, x, z)?;

    let skip_capacity = |r: Result<ConnectionCount>| match r {
        Ok(c) => Ok(Some(c)),
        Err(Error::Capacity { .. }) => Ok(None),
        Err(e) => Err(e),
    };
    let enum_centered = skip_capacity(enumerate_centered(k, x, z))?;
    let enum_directional = skip_capacity(enumerate_directional(k, x, z))?;

    let mut exact_pass = (closed - oracle).abs() <= EXACT_TOLERANCE && closed_exact == oracle_exact;
    for c in enum_centered.iter().chain(&enum_directional) {
        exact_pass &= c.ratio() == closed_exact && (c.value() - closed).abs() <= EXACT_TOLERANCE;
    }

    let (mc_centered, mc_directional) = if mc_samples > 0 {
        (
            Some(mc_connection(Flavor::Centered, k, x, z, mc_samples, seed)?),
            Some(mc_connection(Flavor::Directional, k, x, z, mc_samples, seed)?),
        )
    } else {
        (None, None)
    };
    let band = mc_tolerance(closed, mc_samples.max(1));
    let mc_pass = [mc_centered, mc_directional]
        .iter()
        .flatten()
        .all(|m| (m - closed).abs() <= band);

    Ok(EquivalenceRow {
        d,
        k,
        x: x.clone(),
        z: z.clone(),
        kernel_closed_form: closed,
        oracle_exact: oracle,
        enum_centered,
        enum_directional,
        mc_centered,
        mc_directional,
        mc_samples,
        seed,
        exact_pass,
        mc_pass,
    })
}

const PAIR_STREAM: u64 = 0x7061_6972;
const ROW_STREAM: u64 = 0x726f_77;

/// Draws a uniform pair in `[0, 1]^d` from the report's seed.
pub fn report_pair(seed: u64, pair: usize, d: usize) -> (Point, Point) {
    use rand::Rng;
    let mut rng = substream(seed, &[PAIR_STREAM, pair as u64, d as u64]);
    let mut draw = || Point::new((0..d).map(|_| rng.random::<f64>()).collect()).expect("unit draws");
    let x = draw();
    let z = draw();
    (x, z)
}

/// Tabulates every verifier over random pairs, dimensions `1..=d_max` and
/// depths `0..=k_max`. Instances beyond an enumeration cap leave that column
/// empty instead of failing the run.
pub fn equivalence_report(config: &EquivalenceConfig) -> Result<Vec<EquivalenceRow>> {
    if config.pairs == 0 {
        return Err(Error::domain("the report needs at least one pair"));
    }
    if config.d_max == 0 {
        return Err(Error::domain("d_max must be at least 1"));
    }
    let jobs: Vec<(usize, usize, u32)> = (0..config.pairs)
        .flat_map(|p| (1..=config.d_max).flat_map(move |d| (0..=config.k_max).map(move |k| (p, d, k))))
        .collect();
    jobs.into_par_iter()
        .map(|(p, d, k)| {
            let (x, z) = report_pair(config.seed, p, d);
            let seed = derived_seed(config.seed, &[ROW_STREAM, p as u64, d as u64, k as u64]);
            equivalence_row(k, &x, &z, config.mc_samples, seed)
        })
        .collect()
}

/// Header of the report CSV.
pub const REPORT_HEADER: &str =
    "d,k,x,z,kernel_closed_form,oracle_exact,enum_centered,enum_directional,mc_centered,mc_directional,M,seed,pass";

/// Writes rows as CSV. Enumeration cells hold `connected/total`; skipped
/// cells are empty.
pub fn write_report_csv<W: Write>(rows: &[EquivalenceRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    let count = |c: &Option<ConnectionCount>| c.map(|c| format!("{}/{}", c.connected, c.total)).unwrap_or_default();
    let float = |v: &Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.d,
            r.k,
            r.x,
            r.z,
            r.kernel_closed_form,
            r.oracle_exact,
            count(&r.enum_centered),
            count(&r.enum_directional),
            float(&r.mc_centered),
            float(&r.mc_directional),
            r.mc_samples,
            r.seed,
            r.pass()
        )?;
    }
    Ok(())
}

/// Floating value of an exact rational.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
