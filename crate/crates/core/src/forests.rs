//! Centered trees, simplified directional schedules, and the classic
//! per-tree and finite-forest regression estimators.
//!
//! Coordinates are 0-based in the Rust API (`0..d`). The plain-text partition
//! format written by [`Partition::to_text`] uses 1-based labels.

use std::fmt::Write as _;

use rand::Rng;
use smallvec::{smallvec, SmallVec};

use crate::error::{Error, Result};
use crate::partition::{cell_index_unchecked, check_same_dim, CellAddress, Point, SplitCountVector};

/// Deepest centered tree we are willing to materialize (2^26 - 1 labels).
pub const MAX_CENTERED_DEPTH: u32 = 26;

/// Deepest directional schedule; cell keys must fit in 64 bits.
pub const MAX_DIRECTIONAL_DEPTH: u32 = 62;

/// A data-independent partition of `[0, 1]^d` into `2^depth` cells.
pub trait Partition: Send + Sync {
    fn dim(&self) -> usize;

    fn depth(&self) -> u32;

    /// Identifier in `0..2^depth` of the cell containing `x`. No validation:
    /// `x` must have length `dim()` and lie in the unit cube.
    fn cell_key_unchecked(&self, x: &[f64]) -> u64;

    fn cell_key(&self, x: &Point) -> Result<u64> {
        if x.dim() != self.dim() {
            return Err(Error::domain(format!(
                "dimension mismatch: point has {}, partition has {}",
                x.dim(),
                self.dim()
            )));
        }
        Ok(self.cell_key_unchecked(x.coords()))
    }

    fn same_cell(&self, x: &Point, z: &Point) -> Result<bool> {
        check_same_dim(x, z)?;
        Ok(self.cell_key(x)? == self.cell_key(z)?)
    }

    /// Plain-text form: a header line `centered k d` or `directional k d`,
    /// then one line of space-separated 1-based labels.
    fn to_text(&self) -> String;
}

fn check_depth_dim(k: u32, d: usize, max_depth: u32) -> Result<()> {
    if d < 1 || d > u16::MAX as usize {
        return Err(Error::domain(format!("dimension {d} is out of range")));
    }
    if k > max_depth {
        return Err(Error::domain(format!(
            "depth {k} exceeds the supported maximum {max_depth}"
        )));
    }
    Ok(())
}

/// One draw of the centered construction: a complete binary tree of depth `k`
/// whose internal nodes are labeled with the coordinate they split.
///
/// Labels are stored in heap order; node `i` has children `2i + 1` (lower
/// half) and `2i + 2` (upper half).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CenteredTree {
    depth: u32,
    dim: usize,
    labels: Vec<u16>,
}

impl CenteredTree {
    pub fn new(depth: u32, dim: usize, labels: Vec<u16>) -> Result<Self> {
        check_depth_dim(depth, dim, MAX_CENTERED_DEPTH)?;
        let expected = (1usize << depth) - 1;
        if labels.len() != expected {
            return Err(Error::domain(format!(
                "depth {depth} needs {expected} labels, got {}",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= dim) {
            return Err(Error::domain(format!("label {bad} is not a coordinate of dimension {dim}")));
        }
        Ok(CenteredTree { depth, dim, labels })
    }

    /// Draws every internal label independently and uniformly.
    pub fn sample<R: Rng + ?Sized>(k: u32, d: usize, rng: &mut R) -> Result<Self> {
        check_depth_dim(k, d, MAX_CENTERED_DEPTH)?;
        let mut tree = CenteredTree {
            depth: k,
            dim: d,
            labels: vec![0; (1usize << k) - 1],
        };
        tree.resample(rng);
        Ok(tree)
    }

    /// Redraws all labels in place, reusing the allocation.
    pub fn resample<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let d = self.dim as u16;
        for l in &mut self.labels {
            *l = rng.random_range(0..d);
        }
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn leaf_count(&self) -> u64 {
        1 << self.depth
    }

    /// The leaf containing `x`, encoded by its root-to-leaf path bits (first
    /// decision in the most significant bit, 1 = upper half).
    pub fn leaf_of(&self, x: &Point) -> Result<u64> {
        self.cell_key(x)
    }

    /// Explicit box `[(lo_j, hi_j)]` of a leaf, obtained by halving intervals
    /// along the leaf's path.
    pub fn leaf_box(&self, leaf: u64) -> Result<Vec<(f64, f64)>> {
        if leaf >= self.leaf_count() {
            return Err(Error::domain(format!("leaf {leaf} does not exist")));
        }
        let mut bounds = vec![(0.0, 1.0); self.dim];
        let mut node = 0usize;
        for level in (0..self.depth).rev() {
            let j = self.labels[node] as usize;
            let (lo, hi) = bounds[j];
            let mid = 0.5 * (lo + hi);
            if (leaf >> level) & 1 == 1 {
                bounds[j] = (mid, hi);
                node = 2 * node + 2;
            } else {
                bounds[j] = (lo, mid);
                node = 2 * node + 1;
            }
        }
        Ok(bounds)
    }
}

impl Partition for CenteredTree {
    fn dim(&self) -> usize {
        self.dim
    }

    fn depth(&self) -> u32 {
        self.depth
    }

    fn cell_key_unchecked(&self, x: &[f64]) -> u64 {
        // split counts so far along each coordinate; the (c+1)-th split of
        // coordinate j sends x up iff cell_index(x_j, c + 1) is even
        let mut splits: SmallVec<[u32; 8]> = smallvec![0; self.dim];
        let mut node = 0usize;
        let mut path = 0u64;
        for _ in 0..self.depth {
            let j = self.labels[node] as usize;
            splits[j] += 1;
            let upper = cell_index_unchecked(x[j], splits[j]) & 1 == 0;
            path = (path << 1) | upper as u64;
            node = 2 * node + 1 + upper as usize;
        }
        path
    }

    fn to_text(&self) -> String {
        format_partition("centered", self.depth, self.dim, &self.labels)
    }
}

/// One draw of the simplified directional construction: the coordinate split
/// at each level, shared by every node of that level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectionalSchedule {
    dim: usize,
    sequence: Vec<u16>,
    counts: Vec<u32>,
}

impl DirectionalSchedule {
    pub fn new(dim: usize, sequence: Vec<u16>) -> Result<Self> {
        check_depth_dim(sequence.len() as u32, dim, MAX_DIRECTIONAL_DEPTH)?;
        if sequence.len() > MAX_DIRECTIONAL_DEPTH as usize {
            return Err(Error::domain("schedule is too long"));
        }
        if let Some(&bad) = sequence.iter().find(|&&l| l as usize >= dim) {
            return Err(Error::domain(format!("label {bad} is not a coordinate of dimension {dim}")));
        }
        let mut counts = vec![0u32; dim];
        for &l in &sequence {
            counts[l as usize] += 1;
        }
        Ok(DirectionalSchedule { dim, sequence, counts })
    }

    /// Draws `k` coordinates independently and uniformly.
    pub fn sample<R: Rng + ?Sized>(k: u32, d: usize, rng: &mut R) -> Result<Self> {
        check_depth_dim(k, d, MAX_DIRECTIONAL_DEPTH)?;
        let mut s = DirectionalSchedule {
            dim: d,
            sequence: vec![0; k as usize],
            counts: vec![0; d],
        };
        s.resample(rng);
        Ok(s)
    }

    pub fn resample<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let d = self.dim as u16;
        self.counts.iter_mut().for_each(|c| *c = 0);
        for l in &mut self.sequence {
            *l = rng.random_range(0..d);
            self.counts[*l as usize] += 1;
        }
    }

    pub fn sequence(&self) -> &[u16] {
        &self.sequence
    }

    /// Occurrences of each coordinate in the schedule.
    pub fn counts(&self) -> SplitCountVector {
        SplitCountVector::with_total(self.counts.clone(), self.sequence.len() as u32)
            .expect("schedule counts always sum to its length")
    }

    /// The grid cell of `x`; depends on the schedule only through its counts.
    pub fn cell_of(&self, x: &Point) -> Result<CellAddress> {
        CellAddress::locate(x, &self.counts())
    }
}

impl Partition for DirectionalSchedule {
    fn dim(&self) -> usize {
        self.dim
    }

    fn depth(&self) -> u32 {
        self.sequence.len() as u32
    }

    fn cell_key_unchecked(&self, x: &[f64]) -> u64 {
        let mut key = 0u64;
        for (&t, &c) in x.iter().zip(&self.counts) {
            key = (key << c) | (cell_index_unchecked(t, c) - 1);
        }
        key
    }

    fn to_text(&self) -> String {
        format_partition("directional", self.depth(), self.dim, &self.sequence)
    }
}

fn format_partition(kind: &str, k: u32, d: usize, labels: &[u16]) -> String {
    let mut out = format!("{kind} {k} {d}\n");
    for (i, l) in labels.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{}", l + 1).unwrap();
    }
    out.push('\n');
    out
}

/// Either kind of partition, as read back from text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnyPartition {
    Centered(CenteredTree),
    Directional(DirectionalSchedule),
}

impl Partition for AnyPartition {
    fn dim(&self) -> usize {
        match self {
            AnyPartition::Centered(t) => t.dim(),
            AnyPartition::Directional(s) => s.dim(),
        }
    }

    fn depth(&self) -> u32 {
        match self {
            AnyPartition::Centered(t) => t.depth(),
            AnyPartition::Directional(s) => s.depth(),
        }
    }

    fn cell_key_unchecked(&self, x: &[f64]) -> u64 {
        match self {
            AnyPartition::Centered(t) => t.cell_key_unchecked(x),
            AnyPartition::Directional(s) => s.cell_key_unchecked(x),
        }
    }

    fn to_text(&self) -> String {
        match self {
            AnyPartition::Centered(t) => t.to_text(),
            AnyPartition::Directional(s) => s.to_text(),
        }
    }
}

/// Parses a sequence of partitions in the plain-text format (two lines each).
pub fn parse_partitions(text: &str) -> Result<Vec<AnyPartition>> {
    let mut lines = text.lines();
    let mut out = Vec::new();
    while let Some(header) = lines.next() {
        if header.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [kind, k, d] = fields[..] else {
            return Err(Error::Parse(format!("bad partition header {header:?}")));
        };
        let k: u32 = k.parse().map_err(|_| Error::Parse(format!("bad depth {k:?}")))?;
        let d: usize = d.parse().map_err(|_| Error::Parse(format!("bad dimension {d:?}")))?;
        let body = lines
            .next()
            .ok_or_else(|| Error::Parse("missing label line".into()))?;
        let labels = body
            .split_whitespace()
            .map(|s| match s.parse::<u16>() {
                Ok(l) if l >= 1 => Ok(l - 1),
                _ => Err(Error::Parse(format!("bad label {s:?}"))),
            })
            .collect::<Result<Vec<u16>>>()?;
        out.push(match kind {
            "centered" => AnyPartition::Centered(CenteredTree::new(k, d, labels)?),
            "directional" => {
                if labels.len() != k as usize {
                    return Err(Error::Parse(format!(
                        "directional depth {k} with {} labels",
                        labels.len()
                    )));
                }
                AnyPartition::Directional(DirectionalSchedule::new(d, labels)?)
            }
            other => return Err(Error::Parse(format!("unknown partition kind {other:?}"))),
        });
    }
    Ok(out)
}

/// Regression sample `(X_i, Y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    points: Vec<Point>,
    responses: Vec<f64>,
}

impl TrainingSet {
    pub fn new(points: Vec<Point>, responses: Vec<f64>) -> Result<Self> {
        if points.len() != responses.len() {
            return Err(Error::domain(format!(
                "{} points but {} responses",
                points.len(),
                responses.len()
            )));
        }
        if let Some(first) = points.first() {
            if points.iter().any(|p| p.dim() != first.dim()) {
                return Err(Error::domain("training points have mixed dimensions"));
            }
        }
        Ok(TrainingSet { points, responses })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Shared dimension of the points, `None` when empty.
    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Point::dim)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.points.iter().zip(self.responses.iter().copied())
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        match self.dim() {
            Some(have) if have != d => Err(Error::domain(format!(
                "training set has dimension {have}, expected {d}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Training points in one cell and their response total.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CellStats {
    pub count: usize,
    pub response_sum: f64,
}

impl CellStats {
    pub fn add(&mut self, y: f64) {
        self.count += 1;
        self.response_sum += y;
    }
}

/// Statistics of the training points sharing `x`'s cell.
pub fn cell_stats<P: Partition + ?Sized>(partition: &P, data: &TrainingSet, x: &Point) -> Result<CellStats> {
    data.check_dim(partition.dim())?;
    let key = partition.cell_key(x)?;
    let mut stats = CellStats::default();
    for (p, y) in data.iter() {
        if partition.cell_key_unchecked(p.coords()) == key {
            stats.add(y);
        }
    }
    Ok(stats)
}

/// A prediction together with the empty-cell flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub value: f64,
    /// No training mass reached the query; `value` is the 0 sentinel.
    pub empty: bool,
}

impl Prediction {
    pub(crate) fn ratio(num: f64, den: f64) -> Self {
        if den > 0.0 {
            Prediction { value: num / den, empty: false }
        } else {
            Prediction { value: 0.0, empty: true }
        }
    }
}

/// Mean response of the training points in `x`'s cell; 0 and flagged when
/// the cell is empty.
pub fn tree_predict<P: Partition + ?Sized>(partition: &P, data: &TrainingSet, x: &Point) -> Result<Prediction> {
    let stats = cell_stats(partition, data, x)?;
    Ok(Prediction::ratio(stats.response_sum, stats.count as f64))
}

/// Output of [`forest_predict`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestPrediction {
    pub value: f64,
    /// Trees whose cell around the query was empty (each contributed 0).
    pub empty_trees: usize,
}

/// Average of the per-tree predictions.
pub fn forest_predict<P: Partition>(partitions: &[P], data: &TrainingSet, x: &Point) -> Result<ForestPrediction> {
    if partitions.is_empty() {
        return Err(Error::domain("a forest needs at least one tree"));
    }
    let mut sum = 0.0;
    let mut empty_trees = 0;
    for p in partitions {
        let pred = tree_predict(p, data, x)?;
        sum += pred.value;
        empty_trees += pred.empty as usize;
    }
    Ok(ForestPrediction {
        value: sum / partitions.len() as f64,
        empty_trees,
    })
}
