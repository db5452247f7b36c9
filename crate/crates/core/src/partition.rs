//! Multi-hop connectivity partitions.
//!
//! A distance matrix is thresholded at the radio range into a boolean
//! connectivity matrix. The matrix is then squared under boolean algebra
//! (`C <- C·C`, AND for product, OR for sum) until a squaring returns the
//! same matrix. Because the diagonal is forced true, every squaring is
//! monotone and at least doubles the hop count covered, so the fixpoint is
//! the reflexive-transitive closure and is reached after at most
//! `ceil(log2(n-1)) + 1` squarings (the last one confirms the fixpoint).
//!
//! Vehicles `i` and `j` share a partition iff bit `(i, j)` of the closure is
//! set. [`union_find_partitions`] computes the same partitions through a
//! disjoint-set forest and serves as an independent check.

use std::fmt;

use thiserror::Error;

use crate::geo::DistanceMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartitionError {
    #[error("range must be positive, got {0} m")]
    NonPositiveRange(f64),
    #[error("connectivity matrix is not a closure fixpoint")]
    NotClosed,
}

const WORD: usize = u64::BITS as usize;

/// Square boolean matrix with rows packed into `u64` words.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ConnectivityMatrix {
    n: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl ConnectivityMatrix {
    /// `n`×`n` matrix with only the diagonal set.
    pub fn identity(n: usize) -> Self {
        let words_per_row = n.div_ceil(WORD);
        let mut m = Self {
            n,
            words_per_row,
            bits: vec![0; n * words_per_row],
        };
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Builds a symmetric matrix with a true diagonal from an undirected
    /// edge list.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut m = Self::identity(n);
        for (i, j) in edges {
            m.set(i, j, true);
            m.set(j, i, true);
        }
        m
    }

    /// Builds a matrix from a row-major boolean predicate. Returns `None`
    /// when the result would not be symmetric with a true diagonal.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> bool) -> Option<Self> {
        let mut m = Self::identity(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, f(i, j));
            }
        }
        m.is_well_formed().then_some(m)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        assert!(
            i < self.n && j < self.n,
            "index ({i}, {j}) out of bounds for {}",
            self.n
        );
        self.bits[i * self.words_per_row + j / WORD] >> (j % WORD) & 1 == 1
    }

    fn set(&mut self, i: usize, j: usize, value: bool) {
        assert!(
            i < self.n && j < self.n,
            "index ({i}, {j}) out of bounds for {}",
            self.n
        );
        let word = &mut self.bits[i * self.words_per_row + j / WORD];
        let mask = 1u64 << (j % WORD);
        if value {
            *word |= mask;
        } else {
            *word &= !mask;
        }
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    /// Number of set bits.
    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Symmetric with every diagonal bit set.
    pub fn is_well_formed(&self) -> bool {
        (0..self.n).all(|i| self.get(i, i) && (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

impl fmt::Debug for ConnectivityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ConnectivityMatrix({})", self.n)?;
        for i in 0..self.n {
            let row: String = (0..self.n)
                .map(|j| if self.get(i, j) { '1' } else { '.' })
                .collect();
            writeln!(f, "  {row}")?;
        }
        Ok(())
    }
}

/// Squaring count and convergence flag for one closure run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClosureTrace {
    pub squarings: usize,
    pub converged: bool,
}

/// Upper bound on squarings (confirming squaring included) for `n` vehicles.
pub fn squaring_bound(n: usize) -> usize {
    let reach = n.saturating_sub(1).max(1);
    // ceil(log2(reach))
    (usize::BITS - (reach - 1).leading_zeros()) as usize + 1
}

/// Partition label per vehicle, dense from 0 in first-occurrence order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartitionAssignment {
    labels: Vec<usize>,
    partition_count: usize,
}

impl PartitionAssignment {
    /// Relabels arbitrary component keys into first-occurrence order.
    fn from_keys(keys: impl IntoIterator<Item = usize>) -> Self {
        let mut mapping = std::collections::HashMap::new();
        let labels: Vec<usize> = keys
            .into_iter()
            .map(|k| {
                let next = mapping.len();
                *mapping.entry(k).or_insert(next)
            })
            .collect();
        Self {
            partition_count: mapping.len(),
            labels,
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn partition_count(&self) -> usize {
        self.partition_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn same_partition(&self, i: usize, j: usize) -> bool {
        self.labels[i] == self.labels[j]
    }

    /// Vehicle indices grouped per label.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.partition_count];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }
}

fn check_range(range_m: f64) -> Result<(), PartitionError> {
    if range_m > 0.0 {
        Ok(())
    } else {
        Err(PartitionError::NonPositiveRange(range_m))
    }
}

/// Thresholds distances: bit `(i, j)` is set iff `d(i, j) <= range_m`.
/// The diagonal is always set.
pub fn connectivity_from_distances(
    d: &DistanceMatrix,
    range_m: f64,
) -> Result<ConnectivityMatrix, PartitionError> {
    check_range(range_m)?;
    let n = d.len();
    let mut c = ConnectivityMatrix::identity(n);
    for i in 0..n {
        let base = i * c.words_per_row;
        for (j, &dist) in d.row(i).iter().enumerate() {
            if dist <= range_m {
                c.bits[base + j / WORD] |= 1 << (j % WORD);
            }
        }
    }
    Ok(c)
}

/// One boolean product of `c` with itself. Row `i` of the result is the OR
/// of every row `k` with `c(i, k)` set.
pub fn boolean_square(c: &ConnectivityMatrix) -> ConnectivityMatrix {
    let w = c.words_per_row;
    let mut out = vec![0u64; c.bits.len()];
    for i in 0..c.n {
        let dst = &mut out[i * w..(i + 1) * w];
        for (word_idx, &word) in c.row(i).iter().enumerate() {
            let mut rest = word;
            while rest != 0 {
                let k = word_idx * WORD + rest.trailing_zeros() as usize;
                rest &= rest - 1;
                for (d, s) in dst.iter_mut().zip(c.row(k)) {
                    *d |= s;
                }
            }
        }
    }
    ConnectivityMatrix {
        n: c.n,
        words_per_row: w,
        bits: out,
    }
}

/// Triple-loop boolean product, kept as the reference definition for
/// [`boolean_square`].
pub fn boolean_square_reference(c: &ConnectivityMatrix) -> ConnectivityMatrix {
    let n = c.len();
    let mut out = ConnectivityMatrix {
        n,
        words_per_row: c.words_per_row,
        bits: vec![0; c.bits.len()],
    };
    for i in 0..n {
        for j in 0..n {
            let mut any = false;
            for k in 0..n {
                any |= c.get(i, k) && c.get(k, j);
            }
            out.set(i, j, any);
        }
    }
    out
}

/// Squares until the product equals its operand.
pub fn multihop_closure(c: &ConnectivityMatrix) -> (ConnectivityMatrix, ClosureTrace) {
    let mut current = c.clone();
    let mut squarings = 0;
    loop {
        let next = boolean_square(&current);
        squarings += 1;
        if next == current {
            return (
                current,
                ClosureTrace {
                    squarings,
                    converged: true,
                },
            );
        }
        current = next;
    }
}

/// Reads partitions off a closed matrix: vehicle 0's partition is label 0,
/// the next vehicle not yet labelled opens label 1, and so on.
pub fn extract_partitions(
    closed: &ConnectivityMatrix,
) -> Result<PartitionAssignment, PartitionError> {
    if boolean_square(closed) != *closed {
        return Err(PartitionError::NotClosed);
    }
    Ok(labels_from_closed(closed))
}

fn labels_from_closed(closed: &ConnectivityMatrix) -> PartitionAssignment {
    let n = closed.len();
    let mut labels = vec![usize::MAX; n];
    let mut count = 0;
    for i in 0..n {
        if labels[i] != usize::MAX {
            continue;
        }
        for (j, label) in labels.iter_mut().enumerate().skip(i) {
            if closed.get(i, j) {
                *label = count;
            }
        }
        count += 1;
    }
    PartitionAssignment {
        labels,
        partition_count: count,
    }
}

/// Threshold, close, and extract in one call.
pub fn partition_frame(
    d: &DistanceMatrix,
    range_m: f64,
) -> Result<(PartitionAssignment, ClosureTrace), PartitionError> {
    let c = connectivity_from_distances(d, range_m)?;
    let (closed, trace) = multihop_closure(&c);
    Ok((labels_from_closed(&closed), trace))
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns `true` if `a` and `b` were in different sets.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Connected components of the threshold graph via union-find, labelled in
/// the same first-occurrence order as [`extract_partitions`].
pub fn union_find_partitions(
    d: &DistanceMatrix,
    range_m: f64,
) -> Result<PartitionAssignment, PartitionError> {
    check_range(range_m)?;
    let n = d.len();
    let mut sets = DisjointSet::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if d.get(i, j) <= range_m {
                sets.union(i, j);
            }
        }
    }
    Ok(PartitionAssignment::from_keys((0..n).map(|i| sets.find(i))))
}
