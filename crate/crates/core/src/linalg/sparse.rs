use crate::scalar::Scalar;

/// Coordinate-format accumulator; duplicates are summed on conversion.
#[derive(Debug, Clone, Default)]
pub struct Triplets<T> {
    pub nrows: usize,
    pub ncols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Scalar> Triplets<T> {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: T) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    /// Pushes `value` into the upper triangle of a symmetric matrix.
    pub fn push_sym(&mut self, row: usize, col: usize, value: T) {
        if row <= col {
            self.push(row, col, value);
        } else {
            self.push(col, row, value);
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_csc(&self) -> CscMatrix<T> {
        CscMatrix::from_triplets(self.nrows, self.ncols, &self.entries)
    }
}

/// Compressed sparse column matrix with sorted row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix<T> {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowind: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Scalar> CscMatrix<T> {
    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, T)]) -> Self {
        let mut sorted: Vec<(usize, usize, T)> = entries.to_vec();
        sorted.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut colptr = vec![0usize; ncols + 1];
        let mut rowind = Vec::with_capacity(sorted.len());
        let mut values: Vec<T> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            rowind.push(r);
            values.push(v);
            colptr[c + 1] += 1;
            last = Some((r, c));
        }
        for c in 0..ncols {
            colptr[c + 1] += colptr[c];
        }
        Self {
            nrows,
            ncols,
            colptr,
            rowind,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.rowind.len()
    }

    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.colptr[j]..self.colptr[j + 1]).map(move |p| (self.rowind[p], self.values[p]))
    }

    /// `y = A x`
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        y.iter_mut().for_each(|v| *v = T::zero());
        for j in 0..self.ncols {
            let xj = x[j];
            for (i, v) in self.col(j) {
                y[i] += v * xj;
            }
        }
    }

    /// `y = Aᵀ x`
    pub fn matvec_t(&self, x: &[T], y: &mut [T]) {
        for (j, yj) in y.iter_mut().enumerate().take(self.ncols) {
            *yj = self.col(j).map(|(i, v)| v * x[i]).sum();
        }
    }

    /// `y = A x` where `self` stores only the upper triangle of a symmetric matrix.
    pub fn sym_upper_matvec(&self, x: &[T], y: &mut [T]) {
        y.iter_mut().for_each(|v| *v = T::zero());
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                y[i] += v * x[j];
                if i != j {
                    y[j] += v * x[i];
                }
            }
        }
    }

    /// Dense row-major copy, intended for tests and tiny systems.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.ncols]; self.nrows];
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                d[i][j] += v;
            }
        }
        d
    }

    pub fn transpose(&self) -> Self {
        let entries: Vec<(usize, usize, T)> = (0..self.ncols)
            .flat_map(|j| self.col(j).map(move |(i, v)| (j, i, v)))
            .collect();
        Self::from_triplets(self.ncols, self.nrows, &entries)
    }
}
