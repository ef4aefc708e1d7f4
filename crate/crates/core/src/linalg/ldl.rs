//! Up-looking sparse LDLᵀ for quasi-definite systems with dynamic pivot regularization.

use super::{minimum_degree, CscMatrix, LinalgError};
use crate::scalar::Scalar;

/// Ordering, elimination tree and column counts for one sparsity pattern.
#[derive(Debug, Clone)]
pub struct LdlSymbolic {
    n: usize,
    perm: Vec<usize>,
    // permuted upper pattern
    pcolptr: Vec<usize>,
    prowind: Vec<usize>,
    // original nnz index -> permuted nnz index
    map: Vec<usize>,
    orig_colptr: Vec<usize>,
    orig_rowind: Vec<usize>,
    etree: Vec<Option<usize>>,
    lcolptr: Vec<usize>,
}

impl LdlSymbolic {
    /// Analyzes the upper triangle of a symmetric matrix using a minimum-degree ordering.
    pub fn analyze<T: Scalar>(upper: &CscMatrix<T>) -> Result<Self, LinalgError> {
        let perm = minimum_degree(upper);
        Self::with_permutation(upper, perm)
    }

    pub fn with_permutation<T: Scalar>(
        upper: &CscMatrix<T>,
        perm: Vec<usize>,
    ) -> Result<Self, LinalgError> {
        let n = upper.ncols;
        if upper.nrows != n {
            return Err(LinalgError::NotSquare {
                rows: upper.nrows,
                cols: n,
            });
        }
        for j in 0..n {
            let mut has_diag = false;
            for (i, _) in upper.col(j) {
                if i > j {
                    return Err(LinalgError::NotUpper { row: i, col: j });
                }
                has_diag |= i == j;
            }
            if !has_diag {
                return Err(LinalgError::MissingDiagonal(j));
            }
        }
        let mut iperm = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            iperm[p] = k;
        }

        // permuted upper pattern, remembering where each original entry lands
        let mut entries: Vec<(usize, usize, usize)> = Vec::with_capacity(upper.nnz());
        for j in 0..n {
            for p in upper.colptr[j]..upper.colptr[j + 1] {
                let i = upper.rowind[p];
                let (pi, pj) = (iperm[i], iperm[j]);
                let (r, c) = if pi <= pj { (pi, pj) } else { (pj, pi) };
                entries.push((r, c, p));
            }
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (c, r));
        let mut pcolptr = vec![0usize; n + 1];
        let mut prowind = Vec::with_capacity(entries.len());
        let mut map = vec![0usize; upper.nnz()];
        for (k, &(r, c, p)) in entries.iter().enumerate() {
            prowind.push(r);
            pcolptr[c + 1] += 1;
            map[p] = k;
        }
        for c in 0..n {
            pcolptr[c + 1] += pcolptr[c];
        }

        // elimination tree and column counts of L
        let mut etree: Vec<Option<usize>> = vec![None; n];
        let mut lnz = vec![0usize; n];
        let mut mark = vec![usize::MAX; n];
        for j in 0..n {
            mark[j] = j;
            for &r in &prowind[pcolptr[j]..pcolptr[j + 1]] {
                let mut i = r;
                while mark[i] != j {
                    if etree[i].is_none() {
                        etree[i] = Some(j);
                    }
                    lnz[i] += 1;
                    mark[i] = j;
                    i = etree[i].expect("parent set above");
                }
            }
        }
        let mut lcolptr = vec![0usize; n + 1];
        for i in 0..n {
            lcolptr[i + 1] = lcolptr[i] + lnz[i];
        }

        Ok(Self {
            n,
            perm,
            pcolptr,
            prowind,
            map,
            orig_colptr: upper.colptr.clone(),
            orig_rowind: upper.rowind.clone(),
            etree,
            lcolptr,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor_nnz(&self) -> usize {
        self.lcolptr[self.n]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FactorStats {
    pub positive: usize,
    pub negative: usize,
    /// pivots whose raw value violated the requested sign or fell below the threshold
    pub regularized: usize,
}

/// Numeric LDLᵀ factor of `P A Pᵀ`.
#[derive(Debug, Clone)]
pub struct LdlFactor<T> {
    symbolic: LdlSymbolic,
    li: Vec<usize>,
    lx: Vec<T>,
    d: Vec<T>,
    stats: FactorStats,
}

impl<T: Scalar> LdlFactor<T> {
    pub fn new(symbolic: LdlSymbolic) -> Self {
        let nnz = symbolic.factor_nnz();
        let n = symbolic.n;
        Self {
            symbolic,
            li: vec![0; nnz],
            lx: vec![T::zero(); nnz],
            d: vec![T::zero(); n],
            stats: FactorStats::default(),
        }
    }

    pub fn symbolic(&self) -> &LdlSymbolic {
        &self.symbolic
    }

    pub fn stats(&self) -> FactorStats {
        self.stats
    }

    /// Factors `upper` (same pattern as analyzed).
    ///
    /// `signs[k]` (original ordering) gives the expected pivot sign; a pivot with
    /// `sign * d <= eps` is replaced by `sign * delta`. With `signs = None` a pivot
    /// with `|d| <= eps` is an error.
    pub fn factor(
        &mut self,
        upper: &CscMatrix<T>,
        signs: Option<&[i8]>,
        eps: T,
        delta: T,
    ) -> Result<FactorStats, LinalgError> {
        let sym = &self.symbolic;
        if upper.colptr != sym.orig_colptr || upper.rowind != sym.orig_rowind {
            return Err(LinalgError::PatternMismatch);
        }
        let n = sym.n;
        let mut ax = vec![T::zero(); sym.prowind.len()];
        for (p, &q) in sym.map.iter().enumerate() {
            ax[q] += upper.values[p];
        }

        let mut y = vec![T::zero(); n];
        let mut lnext = vec![0usize; n];
        let mut mark = vec![usize::MAX; n];
        let mut pattern: Vec<usize> = Vec::with_capacity(n);
        let mut stats = FactorStats::default();

        for k in 0..n {
            pattern.clear();
            mark[k] = k;
            let mut diag = T::zero();
            for p in sym.pcolptr[k]..sym.pcolptr[k + 1] {
                let i = sym.prowind[p];
                if i == k {
                    diag += ax[p];
                    continue;
                }
                y[i] += ax[p];
                let mut r = i;
                while mark[r] != k {
                    mark[r] = k;
                    pattern.push(r);
                    r = sym.etree[r].expect("row pattern follows the elimination tree");
                }
            }
            // parents carry larger indices, so ascending order is topological
            pattern.sort_unstable();
            for &i in &pattern {
                let yi = y[i];
                y[i] = T::zero();
                let start = sym.lcolptr[i];
                for p in start..start + lnext[i] {
                    y[self.li[p]] -= self.lx[p] * yi;
                }
                let lki = yi / self.d[i];
                diag -= lki * yi;
                let slot = start + lnext[i];
                self.li[slot] = k;
                self.lx[slot] = lki;
                lnext[i] += 1;
            }
            let orig = sym.perm[k];
            match signs {
                Some(s) => {
                    let sign = if s[orig] >= 0 { T::one() } else { -T::one() };
                    if sign * diag <= eps {
                        diag = sign * delta;
                        stats.regularized += 1;
                    }
                }
                None => {
                    if diag.abs() <= eps {
                        return Err(LinalgError::ZeroPivot(orig));
                    }
                }
            }
            if diag > T::zero() {
                stats.positive += 1;
            } else {
                stats.negative += 1;
            }
            self.d[k] = diag;
        }
        self.stats = stats;
        Ok(stats)
    }

    /// Solves `A x = b` in place (original ordering).
    pub fn solve_in_place(&self, b: &mut [T]) {
        let sym = &self.symbolic;
        let n = sym.n;
        let mut x: Vec<T> = (0..n).map(|k| b[sym.perm[k]]).collect();
        for j in 0..n {
            let xj = x[j];
            for p in sym.lcolptr[j]..sym.lcolptr[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for (xk, dk) in x.iter_mut().zip(&self.d) {
            *xk /= *dk;
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for p in sym.lcolptr[j]..sym.lcolptr[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        for k in 0..n {
            b[sym.perm[k]] = x[k];
        }
    }
}
