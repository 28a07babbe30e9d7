//! Geometry of midpoint dyadic partitions of the unit cube.
//!
//! Cells are left-open and right-closed: at depth `c` along one coordinate the
//! `m`-th cell (1-based) is `((m - 1) / 2^c, m / 2^c]`, except that the lower
//! boundary `0` joins cell 1. A point sitting exactly on a split midpoint
//! therefore belongs to the lower cell. Every tree walk in the crate uses the
//! same convention, so tree-based cell assignment and the closed-form kernel
//! agree bit for bit.

use std::fmt;
use std::ops::Index;

use num_bigint::BigUint;

use crate::error::{Error, Result};

/// Largest per-coordinate depth accepted by [`cell_index`].
pub const MAX_CELL_DEPTH: u32 = 62;

/// Depth up to which multinomial coefficients are computed in exact integers.
pub const EXACT_MULTINOMIAL_MAX_DEPTH: u32 = 20;

/// A point of `[0, 1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::domain("a point needs at least one coordinate"));
        }
        if let Some((j, t)) = coords
            .iter()
            .enumerate()
            .find(|(_, t)| !(0.0..=1.0).contains(*t))
        {
            return Err(Error::domain(format!(
                "coordinate {j} = {t} is outside [0, 1]"
            )));
        }
        Ok(Point(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }
}

impl Index<usize> for Point {
    type Output = f64;

    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

impl fmt::Display for Point {
    /// Semicolon-joined coordinates, as used in CSV output.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, t) in self.0.iter().enumerate() {
            if j > 0 {
                f.write_str(";")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

pub(crate) fn check_same_dim(a: &Point, b: &Point) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::domain(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Per-coordinate split counts `(k_1, ..., k_d)` with their total `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SplitCountVector {
    counts: Vec<u32>,
    total: u32,
}

impl SplitCountVector {
    pub fn new(counts: Vec<u32>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::domain("split counts need at least one coordinate"));
        }
        let total = counts
            .iter()
            .try_fold(0u32, |acc, &c| acc.checked_add(c))
            .ok_or_else(|| Error::domain("split count total overflows"))?;
        Ok(SplitCountVector { counts, total })
    }

    /// Builds a vector and checks it against a declared total.
    pub fn with_total(counts: Vec<u32>, total: u32) -> Result<Self> {
        let v = Self::new(counts)?;
        if v.total != total {
            return Err(Error::domain(format!(
                "split counts sum to {}, declared total is {total}",
                v.total
            )));
        }
        Ok(v)
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }
}

/// The grid cell of a point relative to a [`SplitCountVector`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellAddress {
    indices: Vec<u64>,
    counts: SplitCountVector,
}

impl CellAddress {
    /// Computes the address of `x` in the grid with `counts[j]` dyadic splits
    /// along coordinate `j`.
    pub fn locate(x: &Point, counts: &SplitCountVector) -> Result<Self> {
        if x.dim() != counts.dim() {
            return Err(Error::domain(format!(
                "dimension mismatch: point has {}, counts have {}",
                x.dim(),
                counts.dim()
            )));
        }
        let indices = x
            .coords()
            .iter()
            .zip(counts.counts())
            .map(|(&t, &c)| cell_index(t, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(CellAddress {
            indices,
            counts: counts.clone(),
        })
    }

    /// 1-based indices, `1 <= indices[j] <= 2^counts[j]`.
    pub fn indices(&self) -> &[u64] {
        &self.indices
    }

    pub fn counts(&self) -> &SplitCountVector {
        &self.counts
    }
}

/// Index of the dyadic cell at depth `c` containing `t`: `max(1, ceil(2^c t))`.
pub fn cell_index(t: f64, c: u32) -> Result<u64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("{t} is outside [0, 1]")));
    }
    if c > MAX_CELL_DEPTH {
        return Err(Error::domain(format!(
            "depth {c} exceeds the supported maximum {MAX_CELL_DEPTH}"
        )));
    }
    Ok(cell_index_unchecked(t, c))
}

/// [`cell_index`] without validation. Scaling by a power of two is exact in
/// binary floating point, so the ceiling is exact too.
#[inline]
pub(crate) fn cell_index_unchecked(t: f64, c: u32) -> u64 {
    let scaled = (t * (1u64 << c) as f64).ceil() as u64;
    scaled.max(1)
}

/// Whether `a` and `b` fall in the same dyadic cell at depth `c`.
pub fn same_cell_1d(a: f64, b: f64, c: u32) -> Result<bool> {
    Ok(cell_index(a, c)? == cell_index(b, c)?)
}

/// Largest `c <= max_depth` such that `a` and `b` share a cell at depth `c`.
///
/// Co-cell membership is monotone in depth (a depth-`c+1` cell sits inside a
/// depth-`c` cell), so the kernel indicator for `k_j` splits reduces to
/// `k_j <= shared_depth(...)`.
pub(crate) fn shared_depth(a: f64, b: f64, max_depth: u32) -> u32 {
    let mut c = 0;
    while c < max_depth && cell_index_unchecked(a, c + 1) == cell_index_unchecked(b, c + 1) {
        c += 1;
    }
    c
}

/// Ordered `d`-tuples of non-negative integers summing to `k`, in
/// colexicographic order (the last coordinate varies slowest).
#[derive(Debug, Clone)]
pub struct Compositions {
    current: Option<Vec<u32>>,
    total: u32,
}

impl Iterator for Compositions {
    type Item = SplitCountVector;

    fn next(&mut self) -> Option<SplitCountVector> {
        let cur = self.current.as_mut()?;
        let out = SplitCountVector {
            counts: cur.clone(),
            total: self.total,
        };
        // first non-zero entry carries one unit right, the rest returns to slot 0
        match cur.iter().position(|&c| c > 0) {
            Some(i) if i + 1 < cur.len() => {
                let v = cur[i];
                cur[i] = 0;
                cur[i + 1] += 1;
                cur[0] = v - 1;
            }
            _ => self.current = None,
        }
        Some(out)
    }
}

/// Enumerates every composition of `k` into `d` ordered parts.
pub fn compositions(k: u32, d: usize) -> Result<Compositions> {
    if d < 1 {
        return Err(Error::domain("compositions need d >= 1"));
    }
    let mut first = vec![0; d];
    first[0] = k;
    Ok(Compositions {
        current: Some(first),
        total: k,
    })
}

/// Number of compositions of `k` into `d` parts, `C(k + d - 1, d - 1)`.
pub fn composition_count(k: u32, d: usize) -> u128 {
    let n = k as u128 + d as u128 - 1;
    let r = (d as u128 - 1).min(k as u128);
    (0..r).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// `k! / (k_1! ... k_d!)` as an exact integer when `k <= 20`.
pub fn multinomial_coefficient(counts: &SplitCountVector) -> Option<u64> {
    if counts.total() > EXACT_MULTINOMIAL_MAX_DEPTH {
        return None;
    }
    // product of binomials C(k_1 + ... + k_j, k_j); every partial product is
    // itself a multinomial coefficient and bounded by 20!
    let mut acc = 1u64;
    let mut running = 0u64;
    for &c in counts.counts() {
        for i in 1..=c as u64 {
            running += 1;
            acc = acc * running / i;
        }
    }
    Some(acc)
}

/// `k! / (k_1! ... k_d!)` in arbitrary precision.
pub fn multinomial_coefficient_big(counts: &SplitCountVector) -> BigUint {
    let mut acc = BigUint::from(1u32);
    let mut running = 0u64;
    for &c in counts.counts() {
        for i in 1..=c as u64 {
            running += 1;
            acc = acc * running / i;
        }
    }
    acc
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Probability of the split counts under `k` uniform coordinate draws:
/// `k! / (k_1! ... k_d!) * d^(-k)`.
pub fn multinomial_weight(counts: &SplitCountVector) -> f64 {
    let k = counts.total();
    let d = counts.dim() as f64;
    match multinomial_coefficient(counts) {
        Some(coef) => coef as f64 * d.powi(-(k as i32)),
        None => {
            let log = ln_factorial(k)
                - counts.counts().iter().map(|&c| ln_factorial(c)).sum::<f64>()
                - k as f64 * d.ln();
            log.exp()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cell_index_examples() {
        assert_eq!(cell_index(0.3, 1).unwrap(), 1);
        assert_eq!(cell_index(0.0, 5).unwrap(), 1);
        assert_eq!(cell_index(0.5, 1).unwrap(), 1);
        assert_eq!(cell_index(1.0, 1).unwrap(), 2);
        assert_eq!(cell_index(1.0, 0).unwrap(), 1);
        assert_eq!(cell_index(0.25, 2).unwrap(), 1);
        assert_eq!(cell_index(0.2500001, 2).unwrap(), 2);
    }

    #[test]
    fn cell_index_rejects_out_of_domain() {
        assert!(matches!(cell_index(-0.1, 1), Err(Error::Domain(_))));
        assert!(matches!(cell_index(1.5, 1), Err(Error::Domain(_))));
        assert!(matches!(cell_index(f64::NAN, 1), Err(Error::Domain(_))));
        assert!(matches!(cell_index(0.5, 63), Err(Error::Domain(_))));
    }

    #[test]
    fn same_cell_examples() {
        assert!(same_cell_1d(0.1, 0.2, 1).unwrap());
        assert!(!same_cell_1d(0.6, 0.4, 1).unwrap());
        assert!(same_cell_1d(0.37, 0.37, 9).unwrap());
    }

    #[test]
    fn shared_depth_matches_scan() {
        assert_eq!(shared_depth(0.1, 0.2, 10), 2);
        assert_eq!(shared_depth(0.6, 0.4, 10), 0);
        assert_eq!(shared_depth(0.3, 0.3, 7), 7);
    }

    #[test]
    fn compositions_examples() {
        let c: Vec<_> = compositions(0, 3).unwrap().map(|v| v.counts().to_vec()).collect();
        assert_eq!(c, vec![vec![0, 0, 0]]);

        let c: Vec<_> = compositions(2, 2).unwrap().map(|v| v.counts().to_vec()).collect();
        assert_eq!(c, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);

        assert_eq!(compositions(5, 3).unwrap().count(), 21);
        assert!(compositions(3, 0).is_err());
    }

    #[test]
    fn compositions_are_colex_ordered() {
        let c: Vec<Vec<u32>> = compositions(2, 3).unwrap().map(|v| v.counts().to_vec()).collect();
        assert_eq!(
            c,
            vec![
                vec![2, 0, 0],
                vec![1, 1, 0],
                vec![0, 2, 0],
                vec![1, 0, 1],
                vec![0, 1, 1],
                vec![0, 0, 2],
            ]
        );
    }

    #[test]
    fn composition_counts_match_binomial() {
        for k in 0..=10 {
            for d in 1..=10 {
                let all: Vec<_> = compositions(k, d).unwrap().collect();
                assert_eq!(all.len() as u128, composition_count(k, d), "k={k} d={d}");
                let distinct: std::collections::HashSet<_> = all.iter().cloned().collect();
                assert_eq!(distinct.len(), all.len());
                assert!(all.iter().all(|v| v.total() == k && v.dim() == d));
            }
        }
    }

    #[test]
    fn multinomial_examples() {
        let zero = SplitCountVector::new(vec![0, 0, 0]).unwrap();
        assert_eq!(multinomial_weight(&zero), 1.0);
        let ones = SplitCountVector::new(vec![1, 1]).unwrap();
        assert_eq!(multinomial_weight(&ones), 0.5);
        let total: f64 = compositions(6, 3).unwrap().map(|v| multinomial_weight(&v)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multinomial_exact_and_big_agree() {
        for k in 0..=EXACT_MULTINOMIAL_MAX_DEPTH {
            for v in compositions(k, 3).unwrap() {
                let exact = multinomial_coefficient(&v).unwrap();
                assert_eq!(BigUint::from(exact), multinomial_coefficient_big(&v));
            }
        }
        let twenty = SplitCountVector::new(vec![20]).unwrap();
        assert_eq!(multinomial_coefficient(&twenty), Some(1));
        let wide = SplitCountVector::new(vec![1; 20]).unwrap();
        assert_eq!(multinomial_coefficient(&wide), Some(2_432_902_008_176_640_000));
    }

    #[test]
    fn log_space_weights_continue_smoothly() {
        // k = 21 forces the log-space branch
        let v = SplitCountVector::new(vec![10, 11]).unwrap();
        let exact = multinomial_coefficient_big(&v).to_string().parse::<f64>().unwrap()
            * 0.5f64.powi(21);
        assert!((multinomial_weight(&v) - exact).abs() < 1e-12);
    }

    #[test]
    fn weights_sum_to_one() {
        for k in 0..=20 {
            for d in 1..=6 {
                let total: f64 = compositions(k, d).unwrap().map(|v| multinomial_weight(&v)).sum();
                assert!((total - 1.0).abs() < 1e-12, "k={k} d={d} total={total}");
            }
        }
    }

    #[test]
    fn split_count_vector_checks_total() {
        assert!(SplitCountVector::with_total(vec![1, 2], 3).is_ok());
        assert!(SplitCountVector::with_total(vec![1, 2], 4).is_err());
        assert!(SplitCountVector::new(vec![]).is_err());
    }

    #[test]
    fn cell_address_bounds() {
        let x = Point::new(vec![0.1, 0.6, 1.0]).unwrap();
        let counts = SplitCountVector::new(vec![1, 1, 3]).unwrap();
        let a = CellAddress::locate(&x, &counts).unwrap();
        assert_eq!(a.indices(), &[1, 2, 8]);
        let bad = SplitCountVector::new(vec![1, 1]).unwrap();
        assert!(CellAddress::locate(&x, &bad).is_err());
    }

    #[test]
    fn point_validation() {
        assert!(Point::new(vec![]).is_err());
        assert!(Point::new(vec![0.0, 1.0]).is_ok());
        assert!(Point::new(vec![0.5, 1.01]).is_err());
        assert_eq!(Point::new(vec![0.25, 1.0]).unwrap().to_string(), "0.25;1");
    }

    proptest! {
        #[test]
        fn cell_index_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0u32..=40) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(cell_index(lo, c).unwrap() <= cell_index(hi, c).unwrap());
        }

        #[test]
        fn cell_index_in_range(t in 0.0f64..=1.0, c in 0u32..=40) {
            let m = cell_index(t, c).unwrap();
            prop_assert!(m >= 1 && m <= 1u64 << c);
        }

        #[test]
        fn co_cell_refines(a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0u32..=40) {
            if same_cell_1d(a, b, c + 1).unwrap() {
                prop_assert!(same_cell_1d(a, b, c).unwrap());
            }
        }

        #[test]
        fn dyadic_points_go_to_lower_cell(m in 1u64..=64, c in 1u32..=6) {
            prop_assume!(m <= 1u64 << c);
            let t = m as f64 / (1u64 << c) as f64;
            prop_assert_eq!(cell_index(t, c).unwrap(), m);
        }
    }
}
