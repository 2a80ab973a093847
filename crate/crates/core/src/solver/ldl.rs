//! Sparse LDL' factorization of symmetric quasidefinite matrices.
//!
//! The pattern is fixed once (ordering, elimination tree, column counts) and
//! the numeric factorization is repeated with new values, which is what an
//! interior-point method needs. The ordering is a greedy minimum degree on
//! the elimination graph; nodes of very high initial degree are set aside
//! and ordered last.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

const NONE: usize = usize::MAX;

/// Symbolic structure of a symmetric matrix and its factor.
#[derive(Debug, Clone)]
pub struct LdlSymbolic {
    dim: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    iperm: Vec<usize>,
    /// Upper-triangular CSC of the permuted matrix.
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// Position in the CSC value array of each input entry.
    entry_slot: Vec<usize>,
    etree: Vec<usize>,
    l_ptr: Vec<usize>,
}

/// Numeric factor `P K P' = L D L'`.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    d_inv: Vec<f64>,
    /// Number of pivots replaced by the dynamic regularization.
    pub bumped_pivots: usize,
}

impl LdlFactor {
    /// False when elimination overflowed.
    pub fn is_finite(&self) -> bool {
        self.d_inv.iter().chain(&self.l_val).all(|v| v.is_finite())
    }
}

impl LdlSymbolic {
    /// `entries` lists structural positions `(i, j)` in original numbering,
    /// either triangle, duplicates allowed. Every diagonal is added.
    pub fn new(dim: usize, entries: &[(usize, usize)]) -> Self {
        let perm = min_degree_order(dim, entries);
        let mut iperm = vec![0; dim];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        // (row, col) in permuted upper triangle for each entry, then diagonals
        let mut coords: Vec<(usize, usize)> = entries
            .iter()
            .map(|&(i, j)| {
                let (a, b) = (iperm[i], iperm[j]);
                if a <= b {
                    (a, b)
                } else {
                    (b, a)
                }
            })
            .collect();
        coords.extend((0..dim).map(|k| (k, k)));

        let mut order: Vec<usize> = (0..coords.len()).collect();
        order.sort_unstable_by_key(|&e| (coords[e].1, coords[e].0));
        let mut col_ptr = vec![0usize; dim + 1];
        let mut row_idx = Vec::with_capacity(coords.len());
        let mut slot = vec![0usize; coords.len()];
        let mut last: Option<(usize, usize)> = None;
        for &e in &order {
            let c = coords[e];
            if last != Some(c) {
                row_idx.push(c.0);
                col_ptr[c.1 + 1] += 1;
                last = Some(c);
            }
            slot[e] = row_idx.len() - 1;
        }
        for j in 0..dim {
            col_ptr[j + 1] += col_ptr[j];
        }
        slot.truncate(entries.len());

        let (etree, lnz) = elimination_tree(dim, &col_ptr, &row_idx);
        let mut l_ptr = vec![0usize; dim + 1];
        for i in 0..dim {
            l_ptr[i + 1] = l_ptr[i] + lnz[i];
        }

        Self { dim, perm, iperm, col_ptr, row_idx, entry_slot: slot, etree, l_ptr }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factor_nnz(&self) -> usize {
        self.l_ptr[self.dim]
    }

    pub fn num_slots(&self) -> usize {
        self.row_idx.len()
    }

    /// Accumulates entry values (same order as the `entries` given to
    /// [`LdlSymbolic::new`]) and diagonal values into CSC storage.
    pub fn assemble(&self, entry_values: &[f64], diag: &[f64]) -> Vec<f64> {
        let mut vals = vec![0.0; self.row_idx.len()];
        for (&s, &v) in self.entry_slot.iter().zip(entry_values) {
            vals[s] += v;
        }
        for (old, &d) in diag.iter().enumerate() {
            let k = self.iperm[old];
            // diagonal is the last entry of its upper-triangular column
            vals[self.col_ptr[k + 1] - 1] += d;
        }
        vals
    }

    /// Numeric factorization. `signs[old]` is the expected pivot sign
    /// (+1 or -1); pivots that lose it or vanish are replaced by
    /// `sign * bump`.
    pub fn factor(&self, vals: &[f64], signs: &[f64], bump_tol: f64, bump: f64) -> LdlFactor {
        let n = self.dim;
        let lnz_total = self.l_ptr[n];
        let mut l_idx = vec![0usize; lnz_total];
        let mut l_val = vec![0.0; lnz_total];
        let mut d = vec![0.0; n];
        let mut d_inv = vec![0.0; n];
        let mut next = self.l_ptr[..n].to_vec();
        let mut y_vals = vec![0.0; n];
        let mut y_mark = vec![false; n];
        let mut y_idx = vec![0usize; n];
        let mut buffer = vec![0usize; n];
        let mut bumped = 0;

        for k in 0..n {
            let mut nnz_y = 0;
            let mut orig = 0.0_f64;
            let mut mass = 0.0_f64;
            for p in self.col_ptr[k]..self.col_ptr[k + 1] {
                let b = self.row_idx[p];
                if b == k {
                    d[k] = vals[p];
                    orig = vals[p];
                    continue;
                }
                y_vals[b] = vals[p];
                if !y_mark[b] {
                    y_mark[b] = true;
                    buffer[0] = b;
                    let mut n_e = 1;
                    let mut nx = self.etree[b];
                    while nx != NONE && nx < k {
                        if y_mark[nx] {
                            break;
                        }
                        y_mark[nx] = true;
                        buffer[n_e] = nx;
                        n_e += 1;
                        nx = self.etree[nx];
                    }
                    while n_e > 0 {
                        n_e -= 1;
                        y_idx[nnz_y] = buffer[n_e];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let c = y_idx[i];
                let tmp = next[c];
                let yc = y_vals[c];
                let start = self.l_ptr[c];
                let (idx, val) = (&l_idx[start..tmp], &l_val[start..tmp]);
                let y = &mut y_vals[..];
                for t in 0..idx.len() {
                    // SAFETY: every stored row index is < dim == y.len()
                    unsafe {
                        *y.get_unchecked_mut(*idx.get_unchecked(t)) -= val.get_unchecked(t) * yc;
                    }
                }
                l_idx[tmp] = k;
                let lv = yc * d_inv[c];
                l_val[tmp] = lv;
                d[k] -= yc * lv;
                mass += (yc * lv).abs();
                next[c] += 1;
                y_vals[c] = 0.0;
                y_mark[c] = false;
            }
            let sign = signs[self.perm[k]];
            if !(d[k] * sign > bump_tol) {
                // for a quasidefinite matrix |d_k| >= |K_kk| in exact arithmetic;
                // a lost sign means cancellation, so the true pivot is
                // unresolved below a fraction of the eliminated mass
                d[k] = sign * bump.max(orig.abs()).max(1e-8 * mass);
                bumped += 1;
            }
            d_inv[k] = 1.0 / d[k];
        }
        LdlFactor { l_idx, l_val, d_inv, bumped_pivots: bumped }
    }

    /// Solves `K x = b` in place (original numbering).
    pub fn solve(&self, f: &LdlFactor, b: &mut [f64]) {
        let n = self.dim;
        let mut x: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let xi = x[i];
            if xi != 0.0 {
                for j in self.l_ptr[i]..self.l_ptr[i + 1] {
                    x[f.l_idx[j]] -= f.l_val[j] * xi;
                }
            }
        }
        for (xi, di) in x.iter_mut().zip(&f.d_inv) {
            *xi *= di;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in self.l_ptr[i]..self.l_ptr[i + 1] {
                acc -= f.l_val[j] * x[f.l_idx[j]];
            }
            x[i] = acc;
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = x[new];
        }
    }

    /// `y = K x` for the matrix held in `vals` (original numbering).
    pub fn multiply(&self, vals: &[f64], x: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = vec![0.0; n];
        for j in 0..n {
            let oj = self.perm[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                let oi = self.perm[i];
                let v = vals[p];
                y[oi] += v * x[oj];
                if i != j {
                    y[oj] += v * x[oi];
                }
            }
        }
        y
    }
}

fn elimination_tree(n: usize, col_ptr: &[usize], row_idx: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut work = vec![NONE; n];
    let mut lnz = vec![0usize; n];
    let mut etree = vec![NONE; n];
    for j in 0..n {
        work[j] = j;
        for &r in &row_idx[col_ptr[j]..col_ptr[j + 1]] {
            let mut i = r;
            while work[i] != j {
                if etree[i] == NONE {
                    etree[i] = j;
                }
                lnz[i] += 1;
                work[i] = j;
                i = etree[i];
            }
        }
    }
    (etree, lnz)
}

/// Greedy minimum-degree ordering on the explicit elimination graph.
pub fn min_degree_order(n: usize, entries: &[(usize, usize)]) -> Vec<usize> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(i, j) in entries {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }

    let dense_cut = (2.0 * (n as f64).sqrt()).max(32.0) as usize;
    let dense: Vec<bool> = adj.iter().map(|a| a.len() > dense_cut).collect();
    for a in adj.iter_mut() {
        a.retain(|&v| !dense[v]);
    }

    let mut alive: Vec<bool> = dense.iter().map(|d| !d).collect();
    let mut remaining = alive.iter().filter(|a| **a).count();
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).filter(|&v| alive[v]).map(|v| Reverse((adj[v].len(), v))).collect();
    let mut order = Vec::with_capacity(n);
    let mut merged = Vec::new();

    while let Some(Reverse((deg, p))) = heap.pop() {
        if !alive[p] || deg != adj[p].len() {
            continue;
        }
        if deg + 1 >= remaining || 2 * deg > remaining + 32 {
            // what is left is (nearly) complete; order by degree
            heap.push(Reverse((deg, p)));
            break;
        }
        alive[p] = false;
        remaining -= 1;
        order.push(p);
        let nbrs = std::mem::take(&mut adj[p]);
        for &u in &nbrs {
            merged.clear();
            let (a, b) = (&adj[u], &nbrs);
            let (mut ia, mut ib) = (0, 0);
            while ia < a.len() || ib < b.len() {
                let next = match (a.get(ia), b.get(ib)) {
                    (Some(&x), Some(&y)) if x < y => {
                        ia += 1;
                        x
                    }
                    (Some(&x), Some(&y)) if y < x => {
                        ib += 1;
                        y
                    }
                    (Some(&x), Some(_)) => {
                        ia += 1;
                        ib += 1;
                        x
                    }
                    (Some(&x), None) => {
                        ia += 1;
                        x
                    }
                    (None, Some(&y)) => {
                        ib += 1;
                        y
                    }
                    (None, None) => unreachable!(),
                };
                if next != u && next != p {
                    merged.push(next);
                }
            }
            std::mem::swap(&mut adj[u], &mut merged);
            heap.push(Reverse((adj[u].len(), u)));
        }
    }

    let mut rest: Vec<usize> = (0..n).filter(|&v| alive[v]).collect();
    rest.sort_by_key(|&v| (adj[v].len(), v));
    order.extend(rest);
    let mut dense_nodes: Vec<usize> = (0..n).filter(|&v| dense[v]).collect();
    dense_nodes.sort_unstable();
    order.extend(dense_nodes);
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut x = b.to_vec();
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| m[i][k].abs().partial_cmp(&m[j][k].abs()).unwrap()).unwrap();
            m.swap(k, piv);
            x.swap(k, piv);
            for i in k + 1..n {
                let f = m[i][k] / m[k][k];
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                x[i] -= f * x[k];
            }
        }
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
            x[k] = (x[k] - s) / m[k][k];
        }
        x
    }

    #[test]
    fn quasidefinite_solve_matches_dense() {
        // [[4, 1, 2], [1, 3, 0], [2, 0, -1]] : two positive, one negative pivot
        let entries = vec![(0, 1), (0, 2)];
        let sym = LdlSymbolic::new(3, &entries);
        let vals = sym.assemble(&[1.0, 2.0], &[4.0, 3.0, -1.0]);
        let f = sym.factor(&vals, &[1.0, 1.0, -1.0], 1e-14, 1e-8);
        assert_eq!(f.bumped_pivots, 0);
        let mut b = vec![1.0, 2.0, 3.0];
        sym.solve(&f, &mut b);
        let full = vec![vec![4.0, 1.0, 2.0], vec![1.0, 3.0, 0.0], vec![2.0, 0.0, -1.0]];
        let want = dense_solve(&full, &[1.0, 2.0, 3.0]);
        for (g, w) in b.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
        let back = sym.multiply(&vals, &want);
        for (g, w) in back.iter().zip(&[1.0, 2.0, 3.0]) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn arrow_matrix_random_values() {
        // arrow pattern: node 0 couples to everything
        let n = 40;
        let entries: Vec<(usize, usize)> = (1..n).map(|i| (0, i)).chain((1..n - 1).map(|i| (i, i + 1))).collect();
        let sym = LdlSymbolic::new(n, &entries);
        let ev: Vec<f64> = (0..entries.len()).map(|k| ((k * 37 % 11) as f64 - 5.0) / 10.0).collect();
        let diag: Vec<f64> = (0..n).map(|i| 5.0 + i as f64).collect();
        let vals = sym.assemble(&ev, &diag);
        let f = sym.factor(&vals, &vec![1.0; n], 1e-14, 1e-8);
        let mut full = vec![vec![0.0; n]; n];
        for (k, &(i, j)) in entries.iter().enumerate() {
            full[i][j] += ev[k];
            full[j][i] += ev[k];
        }
        for i in 0..n {
            full[i][i] += diag[i];
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = b.clone();
        sym.solve(&f, &mut x);
        let want = dense_solve(&full, &b);
        for (g, w) in x.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10);
        }
    }

    #[test]
    fn ordering_is_a_permutation() {
        let entries: Vec<(usize, usize)> = (0..50).flat_map(|i| [(i, (i * 7 + 3) % 50), (i, (i * 13 + 1) % 50)]).collect();
        let mut p = min_degree_order(50, &entries);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }
}

