//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use bamg::prelude::*;
use bamg::strength::StrengthGraph;
use rand::Rng;

pub fn dense_matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, m, p) = (a.len(), b.len(), b.first().map_or(0, |r| r.len()));
    let mut c = vec![vec![0.0; p]; n];
    for i in 0..n {
        for k in 0..m {
            for j in 0..p {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

pub fn dense_transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols = a.first().map_or(0, |r| r.len());
    (0..cols).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// `B^T B + n I` for a random `B`: symmetric positive definite and mostly sparse.
pub fn random_spd<R: Rng>(n: usize, rng: &mut R) -> CsrMatrix {
    let b: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| if rng.gen_bool(0.15) { rng.gen_range(-1.0..1.0) } else { 0.0 })
                .collect()
        })
        .collect();
    let mut m = dense_matmul(&dense_transpose(&b), &b);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] += n as f64;
    }
    CsrMatrix::from_dense(&m).unwrap()
}

pub fn random_dense<R: Rng>(rows: usize, cols: usize, density: f64, rng: &mut R) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| if rng.gen_bool(density) { rng.gen_range(-1.0..1.0) } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Least squares `min ||X p - y||` by Householder QR. Returns `(p, ||X p - y||^2)`.
pub fn qr_least_squares(x: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let m = x.len();
    let n = x.first().map_or(0, |r| r.len());
    let mut r: Vec<Vec<f64>> = x.to_vec();
    let mut b = y.to_vec();
    for k in 0..n.min(m) {
        let norm: f64 = (k..m).map(|i| r[i][k] * r[i][k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| r[i][k]).collect();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|t| t * t).sum();
        if vv == 0.0 {
            continue;
        }
        for j in k..n {
            let s: f64 = (k..m).map(|i| v[i - k] * r[i][j]).sum::<f64>() * 2.0 / vv;
            for i in k..m {
                r[i][j] -= s * v[i - k];
            }
        }
        let s: f64 = (k..m).map(|i| v[i - k] * b[i]).sum::<f64>() * 2.0 / vv;
        for i in k..m {
            b[i] -= s * v[i - k];
        }
    }
    let mut p = vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s -= r[k][j] * p[j];
        }
        p[k] = s / r[k][k];
    }
    let res: f64 = (n..m).map(|i| b[i] * b[i]).sum();
    (p, res)
}

/// Residual-corrected targets `v_i - (A v)_i / a_ii` computed from dense data.
pub fn dense_targets(a: &[Vec<f64>], vectors: &[Vec<f64>], i: usize) -> Vec<f64> {
    vectors
        .iter()
        .map(|v| {
            let av: f64 = a[i].iter().zip(v).map(|(x, y)| x * y).sum();
            v[i] - av / a[i][i]
        })
        .collect()
}

/// Weighted LS of targets `t` on the values of `set`, via QR.
pub fn weighted_fit(vectors: &[Vec<f64>], weights: &[f64], t: &[f64], set: &[usize]) -> (Vec<f64>, f64) {
    let x: Vec<Vec<f64>> = vectors
        .iter()
        .zip(weights)
        .map(|(v, w)| set.iter().map(|&j| w.sqrt() * v[j]).collect())
        .collect();
    let y: Vec<f64> = t.iter().zip(weights).map(|(t, w)| w.sqrt() * t).collect();
    qr_least_squares(&x, &y)
}

/// Vertices within `depth` steps of `i` in the pattern of dense `a`, excluding `i`.
pub fn bfs_within(a: &[Vec<f64>], i: usize, depth: usize) -> Vec<usize> {
    let n = a.len();
    let mut dist = vec![usize::MAX; n];
    dist[i] = 0;
    let mut queue = VecDeque::from([i]);
    while let Some(u) = queue.pop_front() {
        if dist[u] == depth {
            continue;
        }
        for v in 0..n {
            if v != u && a[u][v] != 0.0 && dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    (0..n).filter(|&v| v != i && dist[v] != usize::MAX).collect()
}

/// Exhaustive version of the interpolatory-set search: every subset of
/// coarse points within `depth`, best per size, then the penalty rule.
pub fn exhaustive_selection(
    a: &[Vec<f64>],
    vectors: &[Vec<f64>],
    weights: &[f64],
    coarse: &[bool],
    i: usize,
    depth: usize,
    caliber: usize,
    gamma: f64,
) -> (Vec<usize>, f64) {
    let pool: Vec<usize> = bfs_within(a, i, depth).into_iter().filter(|&j| coarse[j]).collect();
    if pool.is_empty() {
        return (Vec::new(), f64::INFINITY);
    }
    let t = dense_targets(a, vectors, i);
    let corr: f64 = vectors
        .iter()
        .zip(weights)
        .zip(&t)
        .map(|((v, w), t)| w * (v[i] - t).powi(2))
        .sum();
    let energy: f64 = weights.iter().zip(&t).map(|(w, t)| w * t * t).sum();
    let reference = if corr > 0.0 { corr } else { energy };
    let norm = |ls: f64| (ls / reference).clamp(1e-16, 1.0 - 1e-16);

    let caliber = caliber.min(vectors.len()).min(pool.len());
    let mut best: Vec<Option<(Vec<usize>, f64)>> = vec![None; caliber + 1];
    for mask in 1u64..(1u64 << pool.len()) {
        let size = mask.count_ones() as usize;
        if size > caliber {
            continue;
        }
        let set: Vec<usize> = (0..pool.len()).filter(|b| mask >> b & 1 == 1).map(|b| pool[b]).collect();
        let (_, ls) = weighted_fit(vectors, weights, &t, &set);
        if best[size].as_ref().is_none_or(|b| ls < b.1) {
            best[size] = Some((set, ls));
        }
    }
    let mut incumbent = best[1].clone().unwrap();
    for entry in best.iter().skip(2).flatten() {
        let (set, ls) = entry;
        let exponent = gamma * (set.len() - incumbent.0.len()) as f64;
        if norm(*ls) < norm(incumbent.1).powf(exponent) {
            incumbent = (set.clone(), *ls);
        }
    }
    incumbent
}

/// Independence in the symmetrized graph and maximality within `candidates`.
pub fn independent_and_maximal(g: &StrengthGraph, candidates: &[usize], set: &[usize]) -> bool {
    let adjacent = |i: usize, j: usize| g.strong_set(i).any(|k| k == j) || g.strong_set(j).any(|k| k == i);
    for (p, &i) in set.iter().enumerate() {
        if !candidates.contains(&i) {
            return false;
        }
        if set[p + 1..].iter().any(|&j| adjacent(i, j)) {
            return false;
        }
    }
    candidates
        .iter()
        .filter(|c| g.contains(**c))
        .all(|&c| set.contains(&c) || set.iter().any(|&s| adjacent(c, s)))
}

/// Random directed graph on `n` vertices with edge probability `p`.
pub fn random_strength_graph<R: Rng>(n: usize, p: f64, rng: &mut R) -> StrengthGraph {
    let edges: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            let mut list = Vec::new();
            for j in 0..n {
                if j != i && rng.gen_bool(p) {
                    list.push((j, rng.gen_range(0.1..1.0)));
                }
            }
            list
        })
        .collect();
    StrengthGraph::from_edges(vec![true; n], edges).unwrap()
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}
