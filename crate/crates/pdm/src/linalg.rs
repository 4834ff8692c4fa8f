//! Block-structured vectors, arc-indexed equality constraint systems
//! `A_I x = b_I`, dual variables supported on an active arc set, operator
//! norms, and the basic-index-set test.

use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::union_find::UnionFind;

/// An `m`-block vector with blocks of dimension `n`, stored block-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    m: usize,
    n: usize,
    data: Vec<f64>,
}

impl BlockVector {
    pub fn zeros(m: usize, n: usize) -> Self {
        assert!(m >= 1 && n >= 1, "block structure must be nonempty");
        BlockVector {
            m,
            n,
            data: vec![0.0; m * n],
        }
    }

    pub fn from_vec(m: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != m * n {
            return Err(Error::DimensionMismatch {
                axis: "block vector length",
                expected: m * n,
                actual: data.len(),
            });
        }
        if m == 0 || n == 0 {
            return Err(Error::invalid("block structure", "m and n must be >= 1"));
        }
        Ok(BlockVector { m, n, data })
    }

    pub fn from_blocks(blocks: &[Vec<f64>]) -> Result<Self> {
        let m = blocks.len();
        if m == 0 {
            return Err(Error::invalid("blocks", "at least one block required"));
        }
        let n = blocks[0].len();
        let mut data = Vec::with_capacity(m * n);
        for (i, b) in blocks.iter().enumerate() {
            if b.len() != n {
                return Err(Error::DimensionMismatch {
                    axis: "block dimension",
                    expected: n,
                    actual: blocks[i].len(),
                });
            }
            data.extend_from_slice(b);
        }
        BlockVector::from_vec(m, n, data)
    }

    pub fn block_count(&self) -> usize {
        self.m
    }

    pub fn block_dim(&self) -> usize {
        self.n
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn dot(&self, other: &BlockVector) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn inf_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &BlockVector) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += alpha * b;
        }
    }

    pub fn sub(&self, other: &BlockVector) -> BlockVector {
        debug_assert_eq!(self.data.len(), other.data.len());
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a - b)
            .collect();
        BlockVector {
            m: self.m,
            n: self.n,
            data,
        }
    }

    pub fn check_shape(&self, m: usize, n: usize, axis: &'static str) -> Result<()> {
        if self.m != m || self.n != n {
            return Err(Error::DimensionMismatch {
                axis,
                expected: m * n,
                actual: self.m * self.n,
            });
        }
        Ok(())
    }
}

/// A sorted, duplicate-free subset of arc indices `{0, …, universe-1}`.
///
/// The empty set is a valid value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    universe: usize,
    members: Vec<usize>,
}

impl IndexSet {
    pub fn new(universe: usize, mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if let Some(&last) = members.last() {
            if last >= universe {
                return Err(Error::IndexOutOfRange {
                    index: last,
                    universe,
                });
            }
        }
        Ok(IndexSet { universe, members })
    }

    pub fn empty(universe: usize) -> Self {
        IndexSet {
            universe,
            members: Vec::new(),
        }
    }

    pub fn full(universe: usize) -> Self {
        IndexSet {
            universe,
            members: (0..universe).collect(),
        }
    }

    pub fn universe_size(&self) -> usize {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn is_subset_of(&self, other: &IndexSet) -> bool {
        self.universe == other.universe && self.members.iter().all(|&i| other.contains(i))
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut members = self.members.clone();
        members.extend_from_slice(&other.members);
        IndexSet::new(self.universe, members).expect("members already in range")
    }

    /// Members of `self` not present in `other`.
    pub fn difference(&self, other: &IndexSet) -> Vec<usize> {
        self.members
            .iter()
            .copied()
            .filter(|&i| !other.contains(i))
            .collect()
    }
}

/// Arc-indexed dual variables with implicit zeros outside the active set.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector {
    l: usize,
    n: usize,
    active: IndexSet,
    values: Vec<f64>, // |active| blocks of dimension n, in ascending arc order
}

impl DualVector {
    pub fn zero(l: usize, n: usize) -> Self {
        DualVector {
            l,
            n,
            active: IndexSet::empty(l),
            values: Vec::new(),
        }
    }

    pub fn new(active: IndexSet, n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != active.len() * n {
            return Err(Error::DimensionMismatch {
                axis: "dual values length",
                expected: active.len() * n,
                actual: values.len(),
            });
        }
        Ok(DualVector {
            l: active.universe_size(),
            n,
            active,
            values,
        })
    }

    /// Restrict the blocks of a full `l`-block vector to the given set.
    pub fn restrict(full: &BlockVector, active: &IndexSet) -> Self {
        debug_assert_eq!(full.block_count(), active.universe_size());
        let n = full.block_dim();
        let mut values = Vec::with_capacity(active.len() * n);
        for i in active.iter() {
            values.extend_from_slice(full.block(i));
        }
        DualVector {
            l: active.universe_size(),
            n,
            active: active.clone(),
            values,
        }
    }

    pub fn arc_count(&self) -> usize {
        self.l
    }

    pub fn block_dim(&self) -> usize {
        self.n
    }

    pub fn active(&self) -> &IndexSet {
        &self.active
    }

    /// Block for arc `i`, or `None` when the arc is inactive (implicit zero).
    pub fn get(&self, i: usize) -> Option<&[f64]> {
        self.active
            .members()
            .binary_search(&i)
            .ok()
            .map(|pos| &self.values[pos * self.n..(pos + 1) * self.n])
    }

    /// Expand to a full `l`-block vector with explicit zeros.
    pub fn to_block_vector(&self) -> BlockVector {
        let mut out = BlockVector::zeros(self.l.max(1), self.n);
        if self.l == 0 {
            return out;
        }
        for (pos, i) in self.active.iter().enumerate() {
            out.block_mut(i)
                .copy_from_slice(&self.values[pos * self.n..(pos + 1) * self.n]);
        }
        out
    }

    /// Projection onto `Y_I`: blocks for arcs in `I` are kept, the rest are
    /// dropped. Idempotent.
    pub fn project(&self, set: &IndexSet) -> DualVector {
        let mut members = Vec::new();
        let mut values = Vec::new();
        for (pos, i) in self.active.iter().enumerate() {
            if set.contains(i) {
                members.push(i);
                values.extend_from_slice(&self.values[pos * self.n..(pos + 1) * self.n]);
            }
        }
        DualVector {
            l: self.l,
            n: self.n,
            active: IndexSet {
                universe: self.l,
                members,
            },
            values,
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Euclidean norm of the difference, treating inactive blocks as zero.
    pub fn diff_norm(&self, other: &DualVector) -> f64 {
        debug_assert_eq!(self.l, other.l);
        debug_assert_eq!(self.n, other.n);
        let mut acc = 0.0;
        let union: IndexSet = self.active.union(&other.active);
        let zeros = vec![0.0; self.n];
        for i in union.iter() {
            let a = self.get(i).unwrap_or(&zeros);
            let b = other.get(i).unwrap_or(&zeros);
            for j in 0..self.n {
                let d = a[j] - b[j];
                acc += d * d;
            }
        }
        acc.sqrt()
    }
}

/// Small dense row-major matrix used for explicit constraint rows,
/// Kirchhoff matrices, and rank computations.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in &rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    axis: "matrix row length",
                    expected: c,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(DenseMatrix { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Stack vertically. Column counts must match.
    pub fn stack(&self, below: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != below.cols {
            return Err(Error::DimensionMismatch {
                axis: "stacked matrix columns",
                expected: self.cols,
                actual: below.cols,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&below.data);
        Ok(DenseMatrix {
            rows: self.rows + below.rows,
            cols: self.cols,
            data,
        })
    }

    /// Append one column on the right.
    pub fn augment(&self, col: &[f64]) -> Result<DenseMatrix> {
        if col.len() != self.rows {
            return Err(Error::DimensionMismatch {
                axis: "augmented column length",
                expected: self.rows,
                actual: col.len(),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, self.cols + 1);
        for r in 0..self.rows {
            out.data[r * (self.cols + 1)..r * (self.cols + 1) + self.cols]
                .copy_from_slice(self.row(r));
            out.data[r * (self.cols + 1) + self.cols] = col[r];
        }
        Ok(out)
    }

    /// Numerical rank via Gaussian elimination with partial pivoting.
    pub fn rank(&self, tol: f64) -> usize {
        let mut a = self.data.clone();
        let (rows, cols) = (self.rows, self.cols);
        let scale = a.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        let threshold = tol * scale;
        let mut rank = 0;
        let mut pivot_row = 0;
        for col in 0..cols {
            if pivot_row >= rows {
                break;
            }
            // find pivot
            let mut best = pivot_row;
            for r in pivot_row + 1..rows {
                if a[r * cols + col].abs() > a[best * cols + col].abs() {
                    best = r;
                }
            }
            if a[best * cols + col].abs() <= threshold {
                continue;
            }
            if best != pivot_row {
                for c in 0..cols {
                    a.swap(pivot_row * cols + c, best * cols + c);
                }
            }
            let pivot = a[pivot_row * cols + col];
            for r in pivot_row + 1..rows {
                let factor = a[r * cols + col] / pivot;
                if factor != 0.0 {
                    for c in col..cols {
                        a[r * cols + c] -= factor * a[pivot_row * cols + c];
                    }
                }
            }
            pivot_row += 1;
            rank += 1;
        }
        rank
    }
}

/// One row block `A_i` of the constraint system.
#[derive(Debug, Clone, PartialEq)]
pub enum ArcRow {
    /// Consensus form: `A_i x = x_s - x_t` (signed identity blocks).
    Consensus { s: usize, t: usize },
    /// Explicit `n x (m*n)` row block.
    Dense(DenseMatrix),
}

/// The matrix family `A_I` with right-hand sides `b_I` over `l` arcs.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcConstraintSystem {
    m: usize,
    n: usize,
    rows: Vec<ArcRow>,
    b: BlockVector, // l blocks of dimension n
}

impl ArcConstraintSystem {
    pub fn new(m: usize, n: usize, rows: Vec<ArcRow>, b: BlockVector) -> Result<Self> {
        let l = rows.len();
        b.check_shape(l.max(1), n, "right-hand side b")?;
        for (i, row) in rows.iter().enumerate() {
            match row {
                ArcRow::Consensus { s, t } => {
                    if *s == *t || *s >= m || *t >= m {
                        return Err(Error::invalid(
                            format!("rows[{i}]"),
                            "consensus arc needs distinct endpoints within 0..m",
                        ));
                    }
                }
                ArcRow::Dense(mat) => {
                    if mat.rows() != n || mat.cols() != m * n {
                        return Err(Error::DimensionMismatch {
                            axis: "dense row block shape",
                            expected: n * m * n,
                            actual: mat.rows() * mat.cols(),
                        });
                    }
                }
            }
        }
        Ok(ArcConstraintSystem { m, n, rows, b })
    }

    /// Consensus system `x_s = x_t` over the given oriented arcs, `b = 0`.
    pub fn consensus(m: usize, n: usize, arcs: &[(usize, usize)]) -> Result<Self> {
        let rows = arcs
            .iter()
            .map(|&(s, t)| ArcRow::Consensus { s, t })
            .collect::<Vec<_>>();
        let b = BlockVector::zeros(arcs.len().max(1), n);
        ArcConstraintSystem::new(m, n, rows, b)
    }

    pub fn block_count(&self) -> usize {
        self.m
    }

    pub fn block_dim(&self) -> usize {
        self.n
    }

    pub fn arc_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &ArcRow {
        &self.rows[i]
    }

    pub fn rhs(&self) -> &BlockVector {
        &self.b
    }

    pub fn rhs_block(&self, i: usize) -> &[f64] {
        self.b.block(i)
    }

    fn check_index_set(&self, set: &IndexSet) -> Result<()> {
        if set.universe_size() != self.arc_count() {
            return Err(Error::DimensionMismatch {
                axis: "index set universe",
                expected: self.arc_count(),
                actual: set.universe_size(),
            });
        }
        Ok(())
    }

    fn apply_row(&self, i: usize, x: &BlockVector, out: &mut [f64]) {
        match &self.rows[i] {
            ArcRow::Consensus { s, t } => {
                let (xs, xt) = (x.block(*s), x.block(*t));
                for j in 0..self.n {
                    out[j] = xs[j] - xt[j];
                }
            }
            ArcRow::Dense(mat) => {
                let xv = x.as_slice();
                for r in 0..self.n {
                    let row = mat.row(r);
                    out[r] = row.iter().zip(xv.iter()).map(|(a, b)| a * b).sum();
                }
            }
        }
    }

    /// `A_I x`, laid out as an `l`-block vector with zeros for arcs outside `I`.
    pub fn apply(&self, set: &IndexSet, x: &BlockVector) -> Result<BlockVector> {
        self.check_index_set(set)?;
        x.check_shape(self.m, self.n, "primal vector x")?;
        let mut out = BlockVector::zeros(self.arc_count().max(1), self.n);
        for i in set.iter() {
            let mut block = vec![0.0; self.n];
            self.apply_row(i, x, &mut block);
            out.block_mut(i).copy_from_slice(&block);
        }
        Ok(out)
    }

    /// `Σ_{i ∈ I} A_i^T y_i`; blocks of `y` outside `I` are treated as zero.
    /// Accumulation runs in ascending arc order for determinism.
    pub fn apply_transpose(&self, set: &IndexSet, y: &DualVector) -> Result<BlockVector> {
        self.check_index_set(set)?;
        if y.arc_count() != self.arc_count() || y.block_dim() != self.n {
            return Err(Error::DimensionMismatch {
                axis: "dual vector y",
                expected: self.arc_count() * self.n,
                actual: y.arc_count() * y.block_dim(),
            });
        }
        let mut out = BlockVector::zeros(self.m, self.n);
        for i in set.iter() {
            let Some(yi) = y.get(i) else { continue };
            match &self.rows[i] {
                ArcRow::Consensus { s, t } => {
                    let bs = out.block_mut(*s);
                    for j in 0..self.n {
                        bs[j] += yi[j];
                    }
                    let bt = out.block_mut(*t);
                    for j in 0..self.n {
                        bt[j] -= yi[j];
                    }
                }
                ArcRow::Dense(mat) => {
                    let ov = out.as_mut_slice();
                    for r in 0..self.n {
                        let row = mat.row(r);
                        for (c, a) in row.iter().enumerate() {
                            ov[c] += a * yi[r];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// `‖A_I x - b_I‖` over the active arcs.
    pub fn residual_norm(&self, set: &IndexSet, x: &BlockVector) -> Result<f64> {
        let ax = self.apply(set, x)?;
        let mut acc = 0.0;
        for i in set.iter() {
            let a = ax.block(i);
            let b = self.b.block(i);
            for j in 0..self.n {
                let d = a[j] - b[j];
                acc += d * d;
            }
        }
        Ok(acc.sqrt())
    }

    /// Power-iteration estimate of `‖A_I‖` (largest singular value).
    ///
    /// Deterministic: the starting vector comes from a fixed-seed RNG, so
    /// it is generic with respect to every eigenspace (a structured start
    /// such as all-ones lies in the null space of consensus systems).
    /// Errors when `I` is empty (callers use the empty-set fast path
    /// instead).
    pub fn operator_norm(&self, set: &IndexSet, tol: f64) -> Result<f64> {
        self.check_index_set(set)?;
        if set.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        if !(tol > 0.0) {
            return Err(Error::invalid("tol", "must be positive"));
        }
        let mn = self.m * self.n;
        // Iteration cap sized so the successive-estimate stop below is the
        // practical exit; hitting the cap returns a 1%-inflated estimate,
        // which stays safe for stepsize bounds that divide by the norm.
        let cap = (10 * mn).max(20_000);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x9e37_79b9_7f4a_7c15);
        let mut z = BlockVector::zeros(self.m, self.n);
        for v in z.as_mut_slice() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let zn = z.norm();
        z.scale(1.0 / zn);
        let mut eig = 0.0f64;
        let mut prev_change = f64::INFINITY;
        for iter in 0..cap {
            let az = self.apply(set, &z)?;
            let dual = DualVector::restrict(&az, set);
            let w = self.apply_transpose(set, &dual)?;
            let new_eig = z.dot(&w);
            let wn = w.norm();
            if wn == 0.0 {
                return Ok(0.0);
            }
            let change = (new_eig - eig).abs();
            if iter > 0 {
                // Geometric remaining-error estimate from successive changes.
                let ratio = if prev_change > 0.0 {
                    change / prev_change
                } else {
                    0.0
                };
                let remaining = if ratio < 1.0 {
                    change * ratio / (1.0 - ratio)
                } else {
                    f64::INFINITY
                };
                let gate = tol * new_eig.abs().max(f64::MIN_POSITIVE);
                if change <= gate && remaining <= gate {
                    return Ok(new_eig.max(0.0).sqrt());
                }
            }
            prev_change = change;
            eig = new_eig;
            z = w;
            z.scale(1.0 / wn);
        }
        Ok(eig.max(0.0).sqrt() * 1.01)
    }

    /// Dense `|I|*n x m*n` matrix of the rows in `I` (ascending arc order).
    pub fn dense_submatrix(&self, set: &IndexSet) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(set.len() * self.n, self.m * self.n);
        for (pos, i) in set.iter().enumerate() {
            match &self.rows[i] {
                ArcRow::Consensus { s, t } => {
                    for j in 0..self.n {
                        out.set(pos * self.n + j, s * self.n + j, 1.0);
                        out.set(pos * self.n + j, t * self.n + j, -1.0);
                    }
                }
                ArcRow::Dense(mat) => {
                    for r in 0..self.n {
                        for c in 0..self.m * self.n {
                            out.set(pos * self.n + r, c, mat.get(r, c));
                        }
                    }
                }
            }
        }
        out
    }

    fn rhs_column(&self, set: &IndexSet) -> Vec<f64> {
        let mut col = Vec::with_capacity(set.len() * self.n);
        for i in set.iter() {
            col.extend_from_slice(self.b.block(i));
        }
        col
    }

    /// True iff `A_I x = b_I  ⟹  A_J x = b_J` (requires `I ⊆ J`).
    ///
    /// Consensus rows with `b = 0` reduce to a connectivity question: the
    /// arcs of `I` must connect the same vertex partition as the arcs of
    /// `J`. The general case compares row-space ranks with a consistency
    /// check on the right-hand sides.
    pub fn is_basic_index_set(&self, set_i: &IndexSet, set_j: &IndexSet) -> Result<bool> {
        self.check_index_set(set_i)?;
        self.check_index_set(set_j)?;
        if !set_i.is_subset_of(set_j) {
            return Err(Error::NotASubset);
        }
        let homogeneous_consensus = set_j.iter().all(|i| {
            matches!(self.rows[i], ArcRow::Consensus { .. })
                && self.b.block(i).iter().all(|&v| v == 0.0)
        });
        if homogeneous_consensus {
            let mut uf = UnionFind::new(self.m);
            for i in set_i.iter() {
                if let ArcRow::Consensus { s, t } = self.rows[i] {
                    uf.union(s, t);
                }
            }
            for i in set_j.iter() {
                if let ArcRow::Consensus { s, t } = self.rows[i] {
                    if !uf.connected(s, t) {
                        return Ok(false);
                    }
                }
            }
            return Ok(true);
        }

        const RANK_TOL: f64 = 1e-9;
        let a_i = self.dense_submatrix(set_i);
        let a_j = self.dense_submatrix(set_j);
        let rank_i = a_i.rank(RANK_TOL);
        let aug_i = a_i.augment(&self.rhs_column(set_i))?;
        let rank_aug_i = aug_i.rank(RANK_TOL);
        if rank_aug_i > rank_i {
            // F_I is empty; the implication holds vacuously.
            return Ok(true);
        }
        let stacked = a_i.stack(&a_j)?;
        if stacked.rank(RANK_TOL) > rank_i {
            return Ok(false);
        }
        let mut rhs = self.rhs_column(set_i);
        rhs.extend(self.rhs_column(set_j));
        let aug_stacked = stacked.augment(&rhs)?;
        Ok(aug_stacked.rank(RANK_TOL) == rank_aug_i)
    }
}
