use std::collections::BTreeSet;

use super::CscMatrix;
use crate::scalar::Scalar;

/// Fill-reducing permutation by exact minimum degree on the elimination graph.
///
/// Returns `perm` with `perm[k]` = original index eliminated at step `k`.
/// Ties are broken by lowest index so the ordering is deterministic.
pub fn minimum_degree<T: Scalar>(upper: &CscMatrix<T>) -> Vec<usize> {
    let n = upper.ncols;
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for j in 0..n {
        for (i, _) in upper.col(j) {
            if i != j {
                adj[i].insert(j);
                adj[j].insert(i);
            }
        }
    }
    let mut eliminated = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| !eliminated[v])
            .min_by_key(|&v| (adj[v].len(), v))
            .expect("at least one node remains");
        eliminated[v] = true;
        perm.push(v);
        let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        for &u in &nbrs {
            adj[u].remove(&v);
            for &w in &nbrs {
                if w != u {
                    adj[u].insert(w);
                }
            }
        }
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Triplets;

    #[test]
    fn arrow_matrix_puts_hub_last() {
        // node 0 connected to all others: eliminating it first would fill everything
        let n = 6;
        let mut t = Triplets::new(n, n);
        for j in 0..n {
            t.push_sym(j, j, 1.0);
            if j > 0 {
                t.push_sym(0, j, 1.0);
            }
        }
        let perm = minimum_degree(&t.to_csc());
        let pos = perm.iter().position(|&v| v == 0).unwrap();
        assert!(pos >= n - 2, "hub eliminated too early: {perm:?}");
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>());
    }
}
