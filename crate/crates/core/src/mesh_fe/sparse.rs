use crate::error::{Error, Result};

/// Square matrix in compressed sparse row form with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays, checking their consistency.
    pub fn from_csr(
        n: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != n + 1 || row_ptr[0] != 0 {
            return Err(Error::Dimension("row_ptr must have n + 1 entries starting at 0".into()));
        }
        if col_idx.len() != values.len() || *row_ptr.last().unwrap() != col_idx.len() {
            return Err(Error::Dimension("col_idx/values length disagrees with row_ptr".into()));
        }
        for r in 0..n {
            if row_ptr[r] > row_ptr[r + 1] {
                return Err(Error::Dimension(format!("row_ptr decreases at row {r}")));
            }
            let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if cols.iter().any(|&c| c >= n) || cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Dimension(format!(
                    "row {r} has out-of-range or unsorted column indices"
                )));
            }
        }
        Ok(SparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; n + 1];
        for &(r, c, _) in triplets {
            if r >= n || c >= n {
                return Err(Error::Dimension(format!("triplet ({r}, {c}) outside {n}x{n}")));
            }
            counts[r + 1] += 1;
        }
        for r in 0..n {
            counts[r + 1] += counts[r];
        }
        let mut next = counts.clone();
        let mut entries = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            entries[next[r]] = (c, v);
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for r in 0..n {
            let row = &mut entries[counts[r]..counts[r + 1]];
            row.sort_by_key(|e| e.0);
            for &(c, v) in row.iter() {
                if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Same sparsity pattern as `self` with every value set to zero.
    pub fn zeros_like(&self) -> Self {
        SparseMatrix {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: vec![0.0; self.values.len()],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    /// Position of entry `(r, c)` in the value array, if stored.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let start = self.row_ptr[r];
        self.col_idx[start..self.row_ptr[r + 1]]
            .binary_search(&c)
            .ok()
            .map(|k| start + k)
    }

    /// Entry `(r, c)`, zero when not stored.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |k| self.values[k])
    }

    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.n == other.n && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n, "matvec: input length");
        assert_eq!(y.len(), self.n, "matvec: output length");
        for (r, out) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *out = s;
        }
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.matvec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    /// `self += alpha * other` for matrices sharing one pattern.
    pub fn add_scaled(&mut self, alpha: f64, other: &SparseMatrix) -> Result<()> {
        if !self.same_pattern(other) {
            return Err(Error::Dimension("add_scaled requires identical sparsity patterns".into()));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.values {
            *v *= alpha;
        }
    }

    /// Drops explicitly stored zeros.
    pub fn finalized(&self) -> SparseMatrix {
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_ptr.push(0);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.values[k] != 0.0 {
                    col_idx.push(self.col_idx[k]);
                    values.push(self.values[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            n: self.n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        (0..self.n).all(|r| self.row(r).0.iter().all(|&c| self.position(c, r).is_some()))
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Row-major dense copy, intended for small matrices.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                d[r][c] = v;
            }
        }
        d
    }
}

/// One `coeff * matrix` contribution at block position `(row, col)`.
#[derive(Clone, Debug)]
pub struct BlockEntry<'a> {
    pub row: usize,
    pub col: usize,
    pub matrix: &'a SparseMatrix,
    pub coeff: f64,
}

/// Coupled linear system made of `num_blocks x num_blocks` square blocks of
/// size `block_size`. Entries sharing a position are summed.
#[derive(Clone, Debug)]
pub struct BlockSystem<'a> {
    pub num_blocks: usize,
    pub block_size: usize,
    pub entries: Vec<BlockEntry<'a>>,
    pub rhs: Vec<f64>,
}

impl<'a> BlockSystem<'a> {
    pub fn new(num_blocks: usize, block_size: usize) -> Self {
        BlockSystem {
            num_blocks,
            block_size,
            entries: Vec::new(),
            rhs: vec![0.0; num_blocks * block_size],
        }
    }

    pub fn add(&mut self, row: usize, col: usize, matrix: &'a SparseMatrix, coeff: f64) {
        self.entries.push(BlockEntry {
            row,
            col,
            matrix,
            coeff,
        });
    }

    pub fn rhs_block_mut(&mut self, b: usize) -> &mut [f64] {
        let n = self.block_size;
        &mut self.rhs[b * n..(b + 1) * n]
    }

    fn validate(&self) -> Result<()> {
        if self.rhs.len() != self.num_blocks * self.block_size {
            return Err(Error::Dimension(format!(
                "rhs has {} entries, expected {}",
                self.rhs.len(),
                self.num_blocks * self.block_size
            )));
        }
        for e in &self.entries {
            if e.row >= self.num_blocks || e.col >= self.num_blocks {
                return Err(Error::Dimension(format!(
                    "block ({}, {}) outside a {}x{} grid",
                    e.row, e.col, self.num_blocks, self.num_blocks
                )));
            }
            if e.matrix.dim() != self.block_size {
                return Err(Error::Dimension(format!(
                    "block ({}, {}) has size {}, expected {}",
                    e.row,
                    e.col,
                    e.matrix.dim(),
                    self.block_size
                )));
            }
        }
        Ok(())
    }

    /// Monolithic matrix keeping every structurally present entry.
    ///
    /// Unknowns are ordered block-major: all nodes of block 0, then block 1, and
    /// so on. The pattern depends only on the block layout and the patterns of
    /// the contributing matrices, never on their values.
    pub fn assemble(&self) -> Result<SparseMatrix> {
        self.validate()?;
        let n = self.block_size;
        let total = self.num_blocks * n;
        let mut by_row: Vec<Vec<&BlockEntry>> = vec![Vec::new(); self.num_blocks];
        for e in &self.entries {
            by_row[e.row].push(e);
        }
        for row in &mut by_row {
            row.sort_by_key(|e| e.col);
        }
        let mut row_ptr = Vec::with_capacity(total + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        row_ptr.push(0);
        for blocks in &by_row {
            for r in 0..n {
                scratch.clear();
                for e in blocks {
                    let (cols, vals) = e.matrix.row(r);
                    let offset = e.col * n;
                    scratch.extend(cols.iter().zip(vals).map(|(&c, &v)| (c + offset, e.coeff * v)));
                }
                scratch.sort_by_key(|p| p.0);
                let start = col_idx.len();
                for &(c, v) in &scratch {
                    if col_idx.len() > start && *col_idx.last().unwrap() == c {
                        *values.last_mut().unwrap() += v;
                    } else {
                        col_idx.push(c);
                        values.push(v);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        Ok(SparseMatrix {
            n: total,
            row_ptr,
            col_idx,
            values,
        })
    }
}

/// Flattens a block system into a finalized monolithic matrix and its RHS.
pub fn flatten_block_system(sys: &BlockSystem) -> Result<(SparseMatrix, Vec<f64>)> {
    Ok((sys.assemble()?.finalized(), sys.rhs.clone()))
}
