//! Direct solver for the coarse operator: reverse Cuthill–McKee ordering
//! followed by an envelope (skyline) Cholesky factorization.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Reverse Cuthill–McKee permutation: `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows();
    let degree: Vec<usize> = (0..n)
        .map(|i| a.row(i).0.iter().filter(|&&j| j != i).count())
        .collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut neighbors = Vec::new();
    while order.len() < n {
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
            .expect("unvisited vertex remains");
        let root = pseudo_peripheral(a, seed, &degree);
        visited[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            neighbors.clear();
            neighbors.extend(a.row(u).0.iter().copied().filter(|&j| !visited[j]));
            neighbors.sort_by_key(|&j| (degree[j], j));
            for &j in &neighbors {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

/// Repeated BFS from the farthest, lowest-degree vertex until the
/// eccentricity stops growing.
fn pseudo_peripheral(a: &CsrMatrix, start: usize, degree: &[usize]) -> usize {
    let mut root = start;
    let mut ecc = 0;
    loop {
        let levels = bfs_levels(a, root);
        let max_level = levels.iter().filter_map(|l| *l).max().unwrap_or(0);
        if max_level <= ecc && ecc > 0 {
            return root;
        }
        let candidate = levels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Some(max_level))
            .min_by_key(|(i, _)| (degree[*i], *i))
            .map(|(i, _)| i)
            .unwrap_or(root);
        if max_level <= ecc {
            return root;
        }
        ecc = max_level;
        root = candidate;
    }
}

fn bfs_levels(a: &CsrMatrix, root: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; a.n_rows()];
    level[root] = Some(0);
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        let lu = level[u].unwrap();
        for &j in a.row(u).0 {
            if level[j].is_none() {
                level[j] = Some(lu + 1);
                queue.push_back(j);
            }
        }
    }
    level
}

/// Cholesky factor of a symmetric positive definite matrix stored by rows
/// over its envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    first: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.n_rows() != a.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: a.n_rows(),
                found: a.n_cols(),
            });
        }
        let n = a.n_rows();
        let perm = reverse_cuthill_mckee(a);
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for &j in a.row(old).0 {
                let jn = inverse[j];
                if jn < first[new] {
                    first[new] = jn;
                }
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            offsets.push(offsets[i] + i - first[i] + 1);
        }
        let mut values = vec![0.0; offsets[n]];
        for (new, &old) in perm.iter().enumerate() {
            let (cols, vals) = a.row(old);
            for (&j, &v) in cols.iter().zip(vals) {
                let jn = inverse[j];
                if jn <= new {
                    values[offsets[new] + jn - first[new]] = v;
                }
            }
        }

        let scale = a.max_abs();
        for i in 0..n {
            let fi = first[i];
            let row_i = offsets[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut s = values[row_i + j - fi];
                let (ri, rj) = (row_i + lo - fi, offsets[j] + lo - fj);
                let len = j - lo;
                let (li, lj) = (&values[ri..ri + len], &values[rj..rj + len]);
                s -= li.iter().zip(lj).map(|(x, y)| x * y).sum::<f64>();
                values[row_i + j - fi] = s / values[offsets[j] + j - fj];
            }
            let row = &values[row_i..row_i + i - fi];
            let d = values[row_i + i - fi] - row.iter().map(|x| x * x).sum::<f64>();
            if !(d > 1e-14 * scale) {
                return Err(Error::SingularCoarse { row: perm[i], pivot: d });
            }
            values[row_i + i - fi] = d.sqrt();
        }
        Ok(Self {
            n,
            perm,
            first,
            offsets,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.offsets[i]..self.offsets[i + 1]];
            let s: f64 = row[..i - fi].iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.offsets[i]..self.offsets[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (l, v) in row[..i - fi].iter().zip(&mut y[fi..i]) {
                *v -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}
