use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::linalg::SparseMatrix;

/// Minimum-degree ordering of the graph of `A + Aᵀ`.
///
/// Uses an explicit elimination graph: eliminating a vertex turns its
/// neighbourhood into a clique. Explicitly stored zeros are ignored. A vertex
/// with a zero diagonal (a saddle-point constraint) only becomes eligible
/// once one of its neighbours has been eliminated, which fills its diagonal
/// and lets the factorisation keep diagonal pivots. Ties break on the
/// smaller vertex index, so the result is deterministic.
pub fn minimum_degree(a: &SparseMatrix) -> Vec<usize> {
    let n = a.nrows().max(a.ncols());
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut eligible = vec![false; n];
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if v == 0.0 {
                continue;
            }
            if i == j {
                eligible[i] = true;
            } else {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }

    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n)
        .filter(|&v| eligible[v])
        .map(|v| Reverse((adj[v].len(), v)))
        .collect();
    let mut order = Vec::with_capacity(n);
    let mut merged = Vec::new();

    loop {
        let v = match heap.pop() {
            Some(Reverse((deg, v))) => {
                if eliminated[v] || deg != adj[v].len() {
                    continue;
                }
                v
            }
            None => match (0..n).find(|&v| !eliminated[v]) {
                Some(v) => v,
                None => break,
            },
        };
        eliminated[v] = true;
        order.push(v);
        let nbrs = std::mem::take(&mut adj[v]);
        for &u in &nbrs {
            merged.clear();
            let au = &adj[u];
            let (mut p, mut q) = (0, 0);
            while p < au.len() || q < nbrs.len() {
                let x = if q >= nbrs.len() || (p < au.len() && au[p] <= nbrs[q]) {
                    let x = au[p];
                    if q < nbrs.len() && nbrs[q] == x {
                        q += 1;
                    }
                    p += 1;
                    x
                } else {
                    let x = nbrs[q];
                    q += 1;
                    x
                };
                if x != v && x != u {
                    merged.push(x);
                }
            }
            std::mem::swap(&mut adj[u], &mut merged);
            eligible[u] = true;
            heap.push(Reverse((adj[u].len(), u)));
        }
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn is_permutation() {
        let t: Vec<_> = (0..20)
            .flat_map(|i| {
                let mut e = vec![(i, i, 4.0)];
                if i + 1 < 20 {
                    e.push((i, i + 1, -1.0));
                }
                if i >= 5 {
                    e.push((i, i - 5, -1.0));
                }
                e
            })
            .collect();
        let a = SparseMatrix::from_triplets(20, 20, &t).unwrap();
        let mut p = minimum_degree(&a);
        p.sort_unstable();
        assert_eq!(p, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn zero_diagonal_waits_for_a_neighbour() {
        // [[0, 1], [1, 1]]: vertex 0 has no diagonal entry.
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert_eq!(minimum_degree(&a), vec![1, 0]);
    }

    #[test]
    fn star_centre_goes_last() {
        let mut t = vec![];
        for i in 0..6 {
            t.push((i, i, 1.0));
            if i > 0 {
                t.push((0, i, 1.0));
            }
        }
        let a = SparseMatrix::from_triplets(6, 6, &t).unwrap();
        let p = minimum_degree(&a);
        assert_ne!(p[0], 0);
    }
}
