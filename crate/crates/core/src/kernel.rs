//! Kernel random forest (KeRF) estimators.
//!
//! A finite KeRF pools the cells around a query across all `M` partitions
//! before averaging, which is the same as a Nadaraya-Watson style average
//! weighted by the forest's proximity kernel. As `M` grows the proximity
//! kernel converges to the connection probability, which for both the
//! centered and the simplified directional constructions is the closed-form
//! multinomial kernel evaluated by [`centered_kernel`].

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::forests::{CellStats, Partition, Prediction, TrainingSet};
use crate::partition::{
    check_same_dim, compositions, multinomial_coefficient, multinomial_coefficient_big, multinomial_weight, shared_depth,
    Point, EXACT_MULTINOMIAL_MAX_DEPTH, MAX_CELL_DEPTH,
};

/// Which random partition construction a forest uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Flavor {
    Centered,
    Directional,
}

impl Flavor {
    pub const ALL: [Flavor; 2] = [Flavor::Centered, Flavor::Directional];

    pub fn name(self) -> &'static str {
        match self {
            Flavor::Centered => "centered",
            Flavor::Directional => "directional",
        }
    }
}

/// Depth, dimension and construction of an infinite-forest kernel. The
/// flavor does not change kernel values; it is carried for bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelSpec {
    pub depth: u32,
    pub dim: usize,
    pub flavor: Flavor,
}

impl KernelSpec {
    pub fn new(depth: u32, dim: usize, flavor: Flavor) -> Result<Self> {
        if dim < 1 {
            return Err(Error::domain("kernel dimension must be at least 1"));
        }
        if depth > MAX_CELL_DEPTH {
            return Err(Error::domain(format!("kernel depth {depth} exceeds {MAX_CELL_DEPTH}")));
        }
        Ok(KernelSpec { depth, dim, flavor })
    }

    pub fn centered(depth: u32, dim: usize) -> Result<Self> {
        Self::new(depth, dim, Flavor::Centered)
    }

    fn check_points(&self, x: &Point, z: &Point) -> Result<()> {
        check_same_dim(x, z)?;
        if x.dim() != self.dim {
            return Err(Error::domain(format!(
                "points have dimension {}, kernel has {}",
                x.dim(),
                self.dim
            )));
        }
        Ok(())
    }
}

fn check_forest<P: Partition>(partitions: &[P], dim: usize) -> Result<()> {
    if partitions.is_empty() {
        return Err(Error::domain("a forest needs at least one partition"));
    }
    if let Some(p) = partitions.iter().find(|p| p.dim() != dim) {
        return Err(Error::domain(format!(
            "partition of dimension {} used with points of dimension {dim}",
            p.dim()
        )));
    }
    Ok(())
}

/// Fraction of the partitions in which `x` and `z` share a cell.
pub fn proximity_finite<P: Partition>(partitions: &[P], x: &Point, z: &Point) -> Result<f64> {
    check_same_dim(x, z)?;
    check_forest(partitions, x.dim())?;
    let hits = partitions
        .iter()
        .filter(|p| p.cell_key_unchecked(x.coords()) == p.cell_key_unchecked(z.coords()))
        .count();
    Ok(hits as f64 / partitions.len() as f64)
}

/// Finite KeRF prediction in the cell-aggregation form:
/// `sum_j sum_i Y_i 1{X_i in A_j(x)} / sum_j N_j(x)`.
pub fn kerf_predict_finite<P: Partition>(partitions: &[P], data: &TrainingSet, x: &Point) -> Result<Prediction> {
    Ok(kerf_predict_batch(partitions, data, std::slice::from_ref(x))?[0])
}

/// Finite KeRF prediction in the kernel form:
/// `sum_i K_M(x, X_i) Y_i / sum_i K_M(x, X_i)`.
pub fn kerf_predict_finite_kernel_form<P: Partition>(
    partitions: &[P],
    data: &TrainingSet,
    x: &Point,
) -> Result<Prediction> {
    check_forest(partitions, x.dim())?;
    data.check_dim(x.dim())?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, y) in data.iter() {
        let k = proximity_finite(partitions, x, p)?;
        num += k * y;
        den += k;
    }
    Ok(Prediction::ratio(num, den))
}

/// Dense tables up to this depth, a hash map beyond.
const DENSE_TABLE_MAX_DEPTH: u32 = 20;

enum CellTable {
    Dense { cells: Vec<CellStats>, touched: Vec<u64> },
    Sparse(HashMap<u64, CellStats>),
}

impl CellTable {
    fn for_depth(depth: u32) -> Self {
        if depth <= DENSE_TABLE_MAX_DEPTH {
            CellTable::Dense {
                cells: vec![CellStats::default(); 1 << depth],
                touched: Vec::new(),
            }
        } else {
            CellTable::Sparse(HashMap::new())
        }
    }

    fn add(&mut self, key: u64, y: f64) {
        match self {
            CellTable::Dense { cells, touched } => {
                let cell = &mut cells[key as usize];
                if cell.count == 0 {
                    touched.push(key);
                }
                cell.add(y);
            }
            CellTable::Sparse(map) => map.entry(key).or_default().add(y),
        }
    }

    fn get(&self, key: u64) -> CellStats {
        match self {
            CellTable::Dense { cells, .. } => cells[key as usize],
            CellTable::Sparse(map) => map.get(&key).copied().unwrap_or_default(),
        }
    }

    fn clear(&mut self) {
        match self {
            CellTable::Dense { cells, touched } => {
                for key in touched.drain(..) {
                    cells[key as usize] = CellStats::default();
                }
            }
            CellTable::Sparse(map) => map.clear(),
        }
    }
}

/// Cell-aggregation KeRF predictions for many query points at once.
///
/// Each partition is visited once: training points are binned into its cells,
/// then every query picks up the totals of its own cell. Accumulation order is
/// fixed (partitions in order, training points in order), so results do not
/// depend on how callers parallelize around this function.
pub fn kerf_predict_batch<P: Partition>(
    partitions: &[P],
    data: &TrainingSet,
    queries: &[Point],
) -> Result<Vec<Prediction>> {
    let dim = match (queries.first(), data.dim()) {
        (Some(q), _) => q.dim(),
        (None, Some(d)) => d,
        (None, None) => return Ok(Vec::new()),
    };
    check_forest(partitions, dim)?;
    data.check_dim(dim)?;
    if let Some(q) = queries.iter().find(|q| q.dim() != dim) {
        return Err(Error::domain(format!("query of dimension {} among dimension {dim}", q.dim())));
    }

    let max_depth = partitions.iter().map(|p| p.depth()).max().unwrap_or(0);
    let mut table = CellTable::for_depth(max_depth);
    let mut num = vec![0.0; queries.len()];
    let mut den = vec![0usize; queries.len()];
    for p in partitions {
        for (x, y) in data.iter() {
            table.add(p.cell_key_unchecked(x.coords()), y);
        }
        for (q, (n, c)) in queries.iter().zip(num.iter_mut().zip(den.iter_mut())) {
            let stats = table.get(p.cell_key_unchecked(q.coords()));
            *n += stats.response_sum;
            *c += stats.count;
        }
        table.clear();
    }
    Ok(num
        .into_iter()
        .zip(den)
        .map(|(n, c)| Prediction::ratio(n, c as f64))
        .collect())
}

fn shared_depths(spec: &KernelSpec, x: &Point, z: &Point) -> Vec<u32> {
    x.coords()
        .iter()
        .zip(z.coords())
        .map(|(&a, &b)| shared_depth(a, b, spec.depth))
        .collect()
}

/// Closed-form connection probability of a depth-`k` centered forest:
/// `sum over k_1 + ... + k_d = k of k!/(k_1!...k_d!) d^-k prod_j 1{x_j, z_j co-cell at depth k_j}`.
pub fn centered_kernel(spec: &KernelSpec, x: &Point, z: &Point) -> Result<f64> {
    spec.check_points(x, z)?;
    let shared = shared_depths(spec, x, z);
    let surviving = compositions(spec.depth, spec.dim)?
        .filter(|v| v.counts().iter().zip(&shared).all(|(c, s)| c <= s));
    // integer numerator over d^k when both fit, so K(x, x) is exactly 1
    let den = (spec.dim as u128).checked_pow(spec.depth);
    if let (Some(den), true) = (den, spec.depth <= EXACT_MULTINOMIAL_MAX_DEPTH) {
        let mut num = 0u128;
        for v in surviving {
            num += multinomial_coefficient(&v).expect("depth within exact range") as u128;
        }
        return Ok(num as f64 / den as f64);
    }
    let total = surviving.map(|v| multinomial_weight(&v)).sum::<f64>();
    Ok(total.min(1.0))
}

/// [`centered_kernel`] in exact rational arithmetic.
pub fn centered_kernel_exact(spec: &KernelSpec, x: &Point, z: &Point) -> Result<BigRational> {
    spec.check_points(x, z)?;
    let shared = shared_depths(spec, x, z);
    let num = compositions(spec.depth, spec.dim)?
        .filter(|v| v.counts().iter().zip(&shared).all(|(c, s)| c <= s))
        .fold(BigInt::zero(), |acc, v| acc + BigInt::from(multinomial_coefficient_big(&v)));
    let den = BigInt::from(spec.dim).pow(spec.depth);
    Ok(BigRational::new(num, den))
}

/// Infinite KeRF prediction `sum_i K(x, X_i) Y_i / sum_i K(x, X_i)` with the
/// closed-form kernel. Serves both constructions, whose kernels coincide.
pub fn kerf_predict_infinite(spec: &KernelSpec, data: &TrainingSet, x: &Point) -> Result<Prediction> {
    if data.is_empty() {
        return Err(Error::domain("infinite KeRF needs at least one training point"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, y) in data.iter() {
        let k = centered_kernel(spec, x, p)?;
        num += k * y;
        den += k;
    }
    Ok(Prediction::ratio(num, den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forests::{CenteredTree, DirectionalSchedule};
    use crate::rng::substream;
    use proptest::prelude::*;
    use rand::Rng;

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    fn random_point<R: Rng>(rng: &mut R, d: usize) -> Point {
        pt(&(0..d).map(|_| rng.random::<f64>()).collect::<Vec<_>>())
    }

    #[test]
    fn closed_form_examples() {
        let x = pt(&[0.1, 0.6]);
        let z = pt(&[0.2, 0.4]);
        assert_eq!(centered_kernel(&KernelSpec::centered(0, 2).unwrap(), &x, &z).unwrap(), 1.0);
        assert_eq!(centered_kernel(&KernelSpec::centered(1, 2).unwrap(), &x, &z).unwrap(), 0.5);
        assert_eq!(centered_kernel(&KernelSpec::centered(2, 2).unwrap(), &x, &z).unwrap(), 0.25);
        let exact = centered_kernel_exact(&KernelSpec::centered(2, 2).unwrap(), &x, &z).unwrap();
        assert_eq!(exact, BigRational::new(1.into(), 4.into()));
    }

    #[test]
    fn closed_form_rejects_mismatched_dims() {
        let spec = KernelSpec::centered(2, 2).unwrap();
        assert!(centered_kernel(&spec, &pt(&[0.1]), &pt(&[0.2])).is_err());
        assert!(centered_kernel(&spec, &pt(&[0.1, 0.2]), &pt(&[0.2])).is_err());
        assert!(KernelSpec::centered(2, 0).is_err());
    }

    #[test]
    fn proximity_examples() {
        let x = pt(&[0.2, 0.3]);
        let z = pt(&[0.7, 0.3]);
        let split0 = CenteredTree::new(1, 2, vec![0]).unwrap();
        let split1 = CenteredTree::new(1, 2, vec![1]).unwrap();
        assert_eq!(proximity_finite(&[split0.clone()], &x, &x).unwrap(), 1.0);
        assert_eq!(proximity_finite(&[split0.clone()], &x, &z).unwrap(), 0.0);
        let forest = vec![split1.clone(), split1.clone(), split1, split0];
        assert_eq!(proximity_finite(&forest, &x, &z).unwrap(), 0.75);
        assert!(proximity_finite::<CenteredTree>(&[], &x, &z).is_err());
    }

    #[test]
    fn finite_kerf_examples() {
        let tree = CenteredTree::new(1, 2, vec![0]).unwrap();
        let data = TrainingSet::new(vec![pt(&[0.1, 0.1]), pt(&[0.9, 0.9])], vec![2.5, 7.0]).unwrap();
        let p = kerf_predict_finite(&[tree.clone()], &data, &pt(&[0.3, 0.8])).unwrap();
        assert_eq!(p, Prediction { value: 2.5, empty: false });

        let deep = CenteredTree::new(2, 2, vec![0, 0, 0]).unwrap();
        let p = kerf_predict_finite(&[deep], &data, &pt(&[0.4, 0.1])).unwrap();
        assert_eq!(p, Prediction { value: 0.0, empty: true });
        let p = kerf_predict_finite_kernel_form(&[tree], &data, &pt(&[0.4, 0.1])).unwrap();
        assert_eq!(p.value, 2.5);
    }

    #[test]
    fn finite_kerf_constant_responses() {
        let mut rng = substream(11, &[]);
        let pts: Vec<Point> = (0..30).map(|_| random_point(&mut rng, 2)).collect();
        let data = TrainingSet::new(pts, vec![-1.25; 30]).unwrap();
        let forest: Vec<_> = (0..6).map(|_| DirectionalSchedule::sample(3, 2, &mut rng).unwrap()).collect();
        for _ in 0..50 {
            let p = kerf_predict_finite(&forest, &data, &random_point(&mut rng, 2)).unwrap();
            if !p.empty {
                assert!((p.value + 1.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn aggregation_and_kernel_forms_agree() {
        let mut rng = substream(12, &[]);
        let pts: Vec<Point> = (0..20).map(|_| random_point(&mut rng, 2)).collect();
        let ys: Vec<f64> = (0..20).map(|_| rng.random_range(-3.0..3.0)).collect();
        let data = TrainingSet::new(pts, ys).unwrap();
        let forest: Vec<_> = (0..5).map(|_| CenteredTree::sample(3, 2, &mut rng).unwrap()).collect();
        for _ in 0..100 {
            let x = random_point(&mut rng, 2);
            let a = kerf_predict_finite(&forest, &data, &x).unwrap();
            let b = kerf_predict_finite_kernel_form(&forest, &data, &x).unwrap();
            assert_eq!(a.empty, b.empty);
            assert!((a.value - b.value).abs() <= 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn batch_matches_single_queries_with_sparse_tables() {
        let mut rng = substream(13, &[]);
        let pts: Vec<Point> = (0..40).map(|_| random_point(&mut rng, 3)).collect();
        let ys: Vec<f64> = (0..40).map(|_| rng.random()).collect();
        let data = TrainingSet::new(pts, ys).unwrap();
        // depth 24 directional schedules exercise the hash-map path
        let forest: Vec<_> = (0..4).map(|_| DirectionalSchedule::sample(24, 3, &mut rng).unwrap()).collect();
        let queries: Vec<Point> = data.points().iter().take(10).cloned().collect();
        let batch = kerf_predict_batch(&forest, &data, &queries).unwrap();
        for (q, b) in queries.iter().zip(&batch) {
            assert_eq!(*b, kerf_predict_finite_kernel_form(&forest, &data, q).unwrap());
        }
    }

    #[test]
    fn infinite_kerf_examples() {
        let mut rng = substream(14, &[]);
        let pts: Vec<Point> = (0..10).map(|_| random_point(&mut rng, 2)).collect();
        let ys: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let data = TrainingSet::new(pts, ys).unwrap();
        let x = random_point(&mut rng, 2);
        let p = kerf_predict_infinite(&KernelSpec::centered(0, 2).unwrap(), &data, &x).unwrap();
        assert!((p.value - 4.5).abs() < 1e-12);

        let data = TrainingSet::new(vec![pt(&[0.1, 0.1]), pt(&[0.9, 0.9])], vec![3.0, 100.0]).unwrap();
        let spec = KernelSpec::centered(2, 2).unwrap();
        let p = kerf_predict_infinite(&spec, &data, &pt(&[0.1, 0.1])).unwrap();
        assert_eq!(p, Prediction { value: 3.0, empty: false });

        let empty = TrainingSet::new(vec![], vec![]).unwrap();
        assert!(kerf_predict_infinite(&spec, &empty, &x).is_err());
    }

    proptest! {
        #[test]
        fn kernel_symmetric_normalized_bounded(
            xs in proptest::collection::vec(0.0f64..=1.0, 1..5),
            zs in proptest::collection::vec(0.0f64..=1.0, 5),
            k in 0u32..12,
        ) {
            let d = xs.len();
            let x = pt(&xs);
            let z = pt(&zs[..d]);
            let spec = KernelSpec::centered(k, d).unwrap();
            let kxz = centered_kernel(&spec, &x, &z).unwrap();
            prop_assert_eq!(kxz, centered_kernel(&spec, &z, &x).unwrap());
            prop_assert_eq!(centered_kernel(&spec, &x, &x).unwrap(), 1.0);
            prop_assert!((0.0..=1.0).contains(&kxz));
            let deeper = KernelSpec::centered(k + 1, d).unwrap();
            prop_assert!(centered_kernel(&deeper, &x, &z).unwrap() <= kxz + 1e-12);
        }
    }
}
