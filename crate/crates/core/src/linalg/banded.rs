//! Bandwidth-reducing ordering and banded direct factorizations.

use super::sparse::CsrMatrix;
use super::{C64, ZERO};
use crate::error::{Error, Result};
use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

/// Reverse Cuthill–McKee ordering of the symmetrized sparsity pattern.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.rows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in a.triplets() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();

    let bfs_last_level = |start: usize, visited_base: &[bool]| -> (usize, usize) {
        let mut level = vec![usize::MAX; n];
        let mut q = VecDeque::new();
        level[start] = 0;
        q.push_back(start);
        let mut last = start;
        while let Some(v) = q.pop_front() {
            last = v;
            for &w in &adj[v] {
                if !visited_base[w] && level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    q.push_back(w);
                }
            }
        }
        // lowest-degree vertex on the deepest level
        let depth = level[last];
        let mut best = last;
        for v in 0..n {
            if level[v] == depth && degree[v] < degree[best] {
                best = v;
            }
        }
        (best, depth)
    };

    while order.len() < n {
        let seed = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| degree[v])
            .unwrap();
        // pseudo-peripheral start
        let mut start = seed;
        let mut depth = 0;
        for _ in 0..4 {
            let (cand, d) = bfs_last_level(start, &visited);
            if d <= depth {
                break;
            }
            depth = d;
            start = cand;
        }
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nb.sort_by_key(|&w| (degree[w], w));
            for w in nb {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn permute_vec(perm: &[usize], x: &[C64]) -> Vec<C64> {
    perm.iter().map(|&old| x[old]).collect()
}

fn unpermute_vec(perm: &[usize], y: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; y.len()];
    for (new, &old) in perm.iter().enumerate() {
        out[old] = y[new];
    }
    out
}

/// LU factorization with partial pivoting of a banded (after reordering)
/// square matrix. `L` is kept in product form.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    perm: Vec<usize>,
    u: Vec<C64>,
    mult: Vec<C64>,
    pivots: Vec<usize>,
    min_pivot: f64,
}

impl BandedLu {
    /// Factors `a` after a reverse Cuthill–McKee reordering.
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let perm = reverse_cuthill_mckee(a);
        Self::with_ordering(a, perm)
    }

    pub fn with_ordering(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::Dimension {
                expected: a.rows(),
                found: a.cols(),
            });
        }
        let n = a.rows();
        let p = a.permute(&perm);
        let (bl, bu) = p.bandwidth();
        let kl = bl.max(bu);
        let ku = kl;
        let width = 2 * kl + ku + 1;
        let mut u = vec![ZERO; n * width];
        let idx = |q: usize, c: usize| q * width + (c + kl - q);
        for (i, j, v) in p.triplets() {
            u[idx(i, j)] = v;
        }
        let scale = p.max_abs().max(f64::MIN_POSITIVE);
        let mut mult = vec![ZERO; n * kl.max(1)];
        let mut pivots = vec![0; n];
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut piv = k;
            let mut best = u[idx(k, k)].norm();
            for r in k + 1..=last_row {
                let v = u[idx(r, k)].norm();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            pivots[k] = piv;
            if piv != k {
                for c in k..=last_col {
                    u.swap(idx(k, c), idx(piv, c));
                }
            }
            let pivot = u[idx(k, k)];
            min_pivot = min_pivot.min(pivot.norm() / scale);
            if pivot.norm() <= f64::MIN_POSITIVE * scale || !pivot.norm().is_finite() {
                return Err(Error::NearSingular {
                    pivot: pivot.norm(),
                    ritz: 0.0,
                });
            }
            let inv = C64::new(1.0, 0.0) / pivot;
            for r in k + 1..=last_row {
                let l = u[idx(r, k)] * inv;
                mult[k * kl + (r - k - 1)] = l;
                u[idx(r, k)] = ZERO;
                if l != ZERO {
                    for c in k + 1..=last_col {
                        let ukc = u[idx(k, c)];
                        u[idx(r, c)] -= l * ukc;
                    }
                }
            }
        }
        Ok(Self {
            n,
            kl,
            ku,
            width,
            perm,
            u,
            mult,
            pivots,
            min_pivot,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Smallest pivot magnitude relative to the largest matrix entry.
    pub fn min_relative_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        assert_eq!(b.len(), self.n);
        let (n, kl, ku, w) = (self.n, self.kl, self.ku, self.width);
        let mut y = permute_vec(&self.perm, b);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                y.swap(k, p);
            }
            let yk = y[k];
            if yk != ZERO {
                for r in k + 1..=(k + kl).min(n - 1) {
                    y[r] -= self.mult[k * kl + (r - k - 1)] * yk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = y[k];
            for c in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.u[k * w + (c + kl - k)] * y[c];
            }
            y[k] = s / self.u[k * w + kl];
        }
        unpermute_vec(&self.perm, &y)
    }
}

/// Cholesky factorization `A = L L†` of a hermitian positive-definite banded
/// matrix (natural ordering unless one is supplied).
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    k: usize,
    perm: Option<Vec<usize>>,
    l: Vec<C64>,
}

impl BandedCholesky {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        Self::build(a, None)
    }

    pub fn with_ordering(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        Self::build(a, Some(perm))
    }

    fn build(a: &CsrMatrix, perm: Option<Vec<usize>>) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::Dimension {
                expected: a.rows(),
                found: a.cols(),
            });
        }
        let n = a.rows();
        let p = match &perm {
            Some(pm) => a.permute(pm),
            None => a.clone(),
        };
        let k = p.bandwidth().0;
        let w = k + 1;
        let mut l = vec![ZERO; n * w];
        for (i, j, v) in p.triplets() {
            if j <= i {
                l[i * w + (j + k - i)] = v;
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(k);
            for j in lo..=i {
                let lo_p = lo.max(j.saturating_sub(k));
                let mut s = l[i * w + (j + k - i)];
                for q in lo_p..j {
                    s -= l[i * w + (q + k - i)] * l[j * w + (q + k - j)].conj();
                }
                if i == j {
                    if s.re <= 0.0 || !s.re.is_finite() {
                        return Err(Error::NearSingular {
                            pivot: s.re,
                            ritz: 0.0,
                        });
                    }
                    l[i * w + k] = C64::new(libm::sqrt(s.re), 0.0);
                } else {
                    l[i * w + (j + k - i)] = s / l[j * w + k].re;
                }
            }
        }
        Ok(Self { n, k, perm, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut y = match &self.perm {
            Some(p) => permute_vec(p, b),
            None => b.to_vec(),
        };
        self.solve_in_place(&mut y);
        match &self.perm {
            Some(p) => unpermute_vec(p, &y),
            None => y,
        }
    }

    /// In-place solve in the factor's own ordering.
    pub fn solve_in_place(&self, y: &mut [C64]) {
        let (n, k) = (self.n, self.k);
        let w = k + 1;
        for i in 0..n {
            let mut s = y[i];
            for q in i.saturating_sub(k)..i {
                s -= self.l[i * w + (q + k - i)] * y[q];
            }
            y[i] = s / self.l[i * w + k].re;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for r in i + 1..=(i + k).min(n.saturating_sub(1)) {
                s -= self.l[r * w + (i + k - r)].conj() * y[r];
            }
            y[i] = s / self.l[i * w + k].re;
        }
    }
}
