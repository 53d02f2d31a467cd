//! Symmetric sparse linear algebra for the element systems.
//!
//! The stiffness matrices here are symmetric positive definite once the
//! Dirichlet rows are eliminated, with a mesh-graph sparsity pattern whose
//! bandwidth collapses under a breadth-first reordering. That makes a
//! profile (skyline) `L D L^T` factorization the right direct method: the
//! envelope below the skyline fills in, nothing else does, and one
//! factorization serves every right-hand side of the decomposition solve.
//! A Jacobi-preconditioned conjugate gradient is kept as a fallback path
//! for configurations where the envelope grows too fat.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Which linear solver backs the element systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolver {
    /// Reverse Cuthill-McKee ordering plus skyline `L D L^T`.
    #[default]
    Direct,
    /// Jacobi-preconditioned conjugate gradient.
    Pcg,
}

/// Compressed sparse rows holding the full symmetric pattern.
#[derive(Debug, Clone)]
pub struct SymCsr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SymCsr {
    /// Builds from coordinate triplets, summing duplicates. The input must
    /// contain both halves of the symmetric pattern (element assembly
    /// naturally produces them).
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; n + 1];
        for &(i, j, _) in triplets {
            if i >= n || j >= n {
                return Err(Error::Solve(format!(
                    "triplet ({i}, {j}) outside dimension {n}"
                )));
            }
            counts[i + 1] += 1;
        }
        let row_ptr: Vec<usize> = counts
            .iter()
            .scan(0, |acc, &c| {
                *acc += c;
                Some(*acc)
            })
            .collect();
        let mut fill = row_ptr.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            cols[fill[i]] = j;
            vals[fill[i]] = v;
            fill[i] += 1;
        }
        // Sort each row by column and merge duplicates.
        let mut out_cols = Vec::with_capacity(triplets.len());
        let mut out_vals = Vec::with_capacity(triplets.len());
        let mut out_ptr = vec![0usize; n + 1];
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for i in 0..n {
            scratch.clear();
            for k in row_ptr[i]..fill[i] {
                scratch.push((cols[k], vals[k]));
            }
            scratch.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for &(c, v) in scratch.iter() {
                if last == Some(c) {
                    *out_vals.last_mut().unwrap() += v;
                } else {
                    out_cols.push(c);
                    out_vals.push(v);
                    last = Some(c);
                }
            }
            out_ptr[i + 1] = out_cols.len();
        }
        Ok(SymCsr {
            n,
            row_ptr: out_ptr,
            cols: out_cols,
            vals: out_vals,
        })
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[i] = s;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.cols[lo..hi].binary_search(&j) {
            Ok(k) => self.vals[lo + k],
            Err(_) => 0.0,
        }
    }

    /// Largest asymmetry `|a_ij - a_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.vals.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                worst = worst.max((self.vals[k] - self.get(j, i)).abs());
            }
        }
        worst / scale
    }
}

/// Reverse Cuthill-McKee ordering: returns `perm` with `perm[new] = old`.
/// Ties are broken by ascending degree then ascending index, and the
/// breadth-first start is a pseudo-peripheral node found by two sweeps, so
/// the ordering is deterministic.
pub fn rcm_order(a: &SymCsr) -> Vec<usize> {
    let n = a.n;
    let degree: Vec<usize> = (0..n).map(|i| a.row_ptr[i + 1] - a.row_ptr[i]).collect();
    let bfs_levels = |start: usize| -> (Vec<usize>, usize, usize) {
        let mut level = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::from([start]);
        level[start] = 0;
        let mut last = start;
        let mut depth = 0;
        while let Some(u) = queue.pop_front() {
            last = u;
            depth = level[u];
            for k in a.row_ptr[u]..a.row_ptr[u + 1] {
                let v = a.cols[k];
                if level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        (level, last, depth)
    };
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    for comp_seed in 0..n {
        if visited[comp_seed] {
            continue;
        }
        // Pseudo-peripheral start: BFS from the component's minimum-degree
        // node, then from the deepest node found.
        let mut start = comp_seed;
        {
            let (level0, _, _) = bfs_levels(comp_seed);
            let mut best = (usize::MAX, usize::MAX);
            for v in 0..n {
                if level0[v] != usize::MAX && !visited[v] && (degree[v], v) < best {
                    best = (degree[v], v);
                    start = v;
                }
            }
            let (_, far, _) = bfs_levels(start);
            start = far;
        }
        let mut queue = std::collections::VecDeque::from([start]);
        visited[start] = true;
        let mut comp = Vec::new();
        while let Some(u) = queue.pop_front() {
            comp.push(u);
            let mut nbrs: Vec<usize> = (a.row_ptr[u]..a.row_ptr[u + 1])
                .map(|k| a.cols[k])
                .filter(|&v| !visited[v])
                .collect();
            nbrs.sort_by_key(|&v| (degree[v], v));
            nbrs.dedup();
            for v in nbrs {
                if !visited[v] {
                    visited[v] = true;
                    queue.push_back(v);
                }
            }
        }
        comp.reverse();
        order.extend(comp);
    }
    order
}

/// Skyline `L D L^T` factorization of a permuted symmetric matrix.
pub struct SkylineLdl {
    n: usize,
    /// `perm[new] = old` node mapping used at factor time.
    perm: Vec<usize>,
    inv: Vec<usize>,
    /// First stored column of each row.
    jmin: Vec<usize>,
    ptr: Vec<usize>,
    /// Strictly-lower envelope entries of `L`, row by row.
    low: Vec<f64>,
    diag: Vec<f64>,
}

impl SkylineLdl {
    /// Factors `a` under the ordering `perm` (`perm[new] = old`). Fails if
    /// a pivot drops below `pivot_floor` times the largest diagonal, which
    /// for the assembled systems means the matrix was not positive
    /// definite.
    pub fn factor(a: &SymCsr, perm: Vec<usize>, pivot_floor: f64) -> Result<Self> {
        let n = a.n;
        if perm.len() != n {
            return Err(Error::Solve("permutation length mismatch".into()));
        }
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut jmin: Vec<usize> = (0..n).collect();
        for i_old in 0..n {
            for k in a.row_ptr[i_old]..a.row_ptr[i_old + 1] {
                let j_old = a.cols[k];
                let (hi, lo) = (inv[i_old].max(inv[j_old]), inv[i_old].min(inv[j_old]));
                jmin[hi] = jmin[hi].min(lo);
            }
        }
        let mut ptr = vec![0usize; n + 1];
        for i in 0..n {
            ptr[i + 1] = ptr[i] + (i - jmin[i]);
        }
        let mut low = vec![0.0; ptr[n]];
        let mut diag = vec![0.0; n];
        for i_old in 0..n {
            for k in a.row_ptr[i_old]..a.row_ptr[i_old + 1] {
                let j_old = a.cols[k];
                let (i, j) = (inv[i_old], inv[j_old]);
                if i == j {
                    diag[i] = a.vals[k];
                } else if j < i {
                    low[ptr[i] + (j - jmin[i])] = a.vals[k];
                }
            }
        }
        let max_diag = diag.iter().fold(0.0f64, |m, &d| m.max(d.abs())).max(1e-300);
        // In-place envelope factorization; `t` caches L[i][k] * D[k].
        let mut t = vec![0.0; n];
        for i in 0..n {
            let jm = jmin[i];
            for j in jm..i {
                let mut s = low[ptr[i] + (j - jm)];
                let kstart = jm.max(jmin[j]);
                for k in kstart..j {
                    s -= low[ptr[i] + (k - jm)] * diag[k] * low[ptr[j] + (k - jmin[j])];
                }
                t[j] = s;
                low[ptr[i] + (j - jm)] = s / diag[j];
            }
            let mut d = diag[i];
            for j in jm..i {
                d -= low[ptr[i] + (j - jm)] * t[j];
            }
            if d <= pivot_floor * max_diag {
                return Err(Error::Solve(format!(
                    "pivot {d:.3e} at row {i} of {n} below floor: matrix is not positive definite"
                )));
            }
            diag[i] = d;
        }
        Ok(SkylineLdl {
            n,
            perm,
            inv,
            jmin,
            ptr,
            low,
            diag,
        })
    }

    /// Solves `A x = b` using the stored factorization.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z: Vec<f64> = (0..n).map(|i| b[self.perm[i]]).collect();
        for i in 0..n {
            let jm = self.jmin[i];
            let mut s = z[i];
            for j in jm..i {
                s -= self.low[self.ptr[i] + (j - jm)] * z[j];
            }
            z[i] = s;
        }
        for i in 0..n {
            z[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            let jm = self.jmin[i];
            for j in jm..i {
                z[j] -= self.low[self.ptr[i] + (j - jm)] * z[i];
            }
        }
        (0..n).map(|i| z[self.inv[i]]).collect()
    }

    /// Envelope size, a proxy for factorization cost.
    pub fn envelope(&self) -> usize {
        self.low.len()
    }
}

/// Jacobi-preconditioned conjugate gradient. Returns the solution and the
/// iteration count; fails if the residual has not dropped below `tol`
/// relative to `|b|` within `max_iter` iterations.
pub fn pcg_jacobi(a: &SymCsr, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let n = a.n;
    let inv_d: Vec<f64> = (0..n)
        .map(|i| {
            let d = a.get(i, i);
            if d > 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_d).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        a.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::Solve(format!(
                "conjugate gradient met nonpositive curvature {pap:.3e}"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= tol * bnorm {
            return Ok((x, it + 1));
        }
        for i in 0..n {
            z[i] = r[i] * inv_d[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Solve(format!(
        "conjugate gradient stalled after {max_iter} iterations"
    )))
}
