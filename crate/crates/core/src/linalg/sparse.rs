//! Compressed sparse row storage for complex matrices.

use super::dense::DenseMatrix;
use super::{C64, ZERO};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

/// Anything that can apply a square matrix to a vector.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// `y = M x`; `y` is overwritten.
    fn apply(&self, x: &[C64], y: &mut [C64]);

    fn apply_new(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.dim()];
        self.apply(x, &mut y);
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

/// Accumulates (row, col, value) entries; duplicates are summed on build.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl TripletBuilder {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: C64) {
        debug_assert!(i < self.rows && j < self.cols);
        if v != ZERO {
            self.entries.push((i, j, v));
        }
    }

    /// Pushes `v` at (i, j) and `conj(v)` at (j, i); on the diagonal only the
    /// real part is kept. The result is hermitian by construction.
    pub fn push_hermitian(&mut self, i: usize, j: usize, v: C64) {
        if i == j {
            self.push(i, i, C64::new(v.re, 0.0));
        } else {
            self.push(i, j, v);
            self.push(j, i, v.conj());
        }
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries
            .sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; self.rows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<C64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.rows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            values,
        }
    }
}

impl CsrMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        TripletBuilder::new(rows, cols).build()
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut b = TripletBuilder::new(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            b.push(i, i, C64::new(*v, 0.0));
        }
        b.build()
    }

    pub fn from_dense(m: &DenseMatrix, drop_below: f64) -> Self {
        let mut b = TripletBuilder::new(m.rows(), m.cols());
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if m[(i, j)].norm() > drop_below {
                    b.push(i, j, m[(i, j)]);
                }
            }
        }
        b.build()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => ZERO,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *yi = acc;
        }
    }

    pub fn adjoint(&self) -> Self {
        let mut b = TripletBuilder::new(self.cols, self.rows);
        for (i, j, v) in self.triplets() {
            b.push(j, i, v.conj());
        }
        b.build()
    }

    pub fn transpose(&self) -> Self {
        let mut b = TripletBuilder::new(self.cols, self.rows);
        for (i, j, v) in self.triplets() {
            b.push(j, i, v);
        }
        b.build()
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= c;
        }
        out
    }

    /// `self + c·other`
    pub fn add_scaled(&self, c: C64, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut b = TripletBuilder::new(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            b.push(i, j, v);
        }
        for (i, j, v) in other.triplets() {
            b.push(i, j, c * v);
        }
        b.build().drop_zeros()
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_scaled(C64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(C64::new(-1.0, 0.0), other)
    }

    /// `self + shift·I`
    pub fn shift_diagonal(&self, shift: C64) -> Self {
        assert_eq!(self.rows, self.cols);
        self.add_scaled(shift, &Self::identity(self.rows))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut b = TripletBuilder::new(self.rows, other.cols);
        let mut acc = vec![ZERO; other.cols];
        let mut mark = vec![usize::MAX; other.cols];
        let mut touched = Vec::new();
        for i in 0..self.rows {
            touched.clear();
            for (k, a) in self.row(i) {
                for (j, bv) in other.row(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = ZERO;
                        touched.push(j);
                    }
                    acc[j] += a * bv;
                }
            }
            for &j in &touched {
                b.push(i, j, acc[j]);
            }
        }
        b.build()
    }

    fn drop_zeros(mut self) -> Self {
        let mut indptr = vec![0usize; self.rows + 1];
        let mut w = 0;
        for i in 0..self.rows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                if self.values[k] != ZERO {
                    self.values[w] = self.values[k];
                    self.indices[w] = self.indices[k];
                    w += 1;
                }
            }
            indptr[i + 1] = w;
        }
        self.values.truncate(w);
        self.indices.truncate(w);
        self.indptr = indptr;
        self
    }

    /// `max |M_ij - conj(M_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, j, v) in self.triplets() {
            d = d.max((v - self.get(j, i).conj()).norm());
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Largest absolute row sum; an upper bound for the spectral norm of a
    /// hermitian matrix.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Half-bandwidths (lower, upper).
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut lo = 0;
        let mut hi = 0;
        for (i, j, _) in self.triplets() {
            if j < i {
                lo = lo.max(i - j);
            } else {
                hi = hi.max(j - i);
            }
        }
        (lo, hi)
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    /// Symmetric permutation `P M Pᵀ`: entry (i, j) moves to (inv[i], inv[j])
    /// where `perm[new] = old`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        assert_eq!(self.rows, self.cols);
        let mut inv = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut b = TripletBuilder::new(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            b.push(inv[i], inv[j], v);
        }
        b.build()
    }

    /// Sub-matrix with the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut colmap = vec![usize::MAX; self.cols];
        for (new, &old) in cols.iter().enumerate() {
            colmap[old] = new;
        }
        let mut b = TripletBuilder::new(rows.len(), cols.len());
        for (new_i, &i) in rows.iter().enumerate() {
            for (j, v) in self.row(i) {
                if colmap[j] != usize::MAX {
                    b.push(new_i, colmap[j], v);
                }
            }
        }
        b.build()
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let mut b = TripletBuilder::new(self.rows * other.rows, self.cols * other.cols);
        for (i, j, a) in self.triplets() {
            for (k, l, c) in other.triplets() {
                b.push(i * other.rows + k, j * other.cols + l, a * c);
            }
        }
        b.build()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    /// Lower-triangle coordinate list, one `row col re im` line per entry,
    /// 0-based indices.
    pub fn to_coordinate_text(&self) -> String {
        let mut s = String::new();
        for (i, j, v) in self.triplets() {
            if j <= i {
                let _ = writeln!(s, "{} {} {:e} {:e}", i, j, v.re, v.im);
            }
        }
        s
    }

    /// Rebuilds a hermitian matrix from its lower-triangle coordinate list.
    pub fn from_coordinate_text(n: usize, text: &str) -> Option<Self> {
        let mut b = TripletBuilder::new(n, n);
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let mut it = line.split_whitespace();
            let i: usize = it.next()?.parse().ok()?;
            let j: usize = it.next()?.parse().ok()?;
            let re: f64 = it.next()?.parse().ok()?;
            let im: f64 = it.next()?.parse().ok()?;
            if i >= n || j > i {
                return None;
            }
            b.push_hermitian(i, j, C64::new(re, im));
        }
        Some(b.build())
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.rows
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.matvec_into(x, y);
    }
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.copy_from_slice(&self.matvec(x));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn duplicates_are_summed_and_hermitian_push_is_exact() {
        let mut b = TripletBuilder::new(3, 3);
        b.push_hermitian(0, 1, c(1.0, 2.0));
        b.push_hermitian(0, 1, c(1.0, 0.0));
        b.push_hermitian(2, 2, c(5.0, 3.0));
        let m = b.build();
        assert_eq!(m.get(0, 1), c(2.0, 2.0));
        assert_eq!(m.get(1, 0), c(2.0, -2.0));
        assert_eq!(m.get(2, 2), c(5.0, 0.0));
        assert_eq!(m.hermiticity_defect(), 0.0);
    }

    #[test]
    fn matmul_matches_dense() {
        let mut b = TripletBuilder::new(3, 3);
        b.push(0, 0, c(1.0, 1.0));
        b.push(0, 2, c(2.0, 0.0));
        b.push(1, 1, c(0.0, -1.0));
        b.push(2, 0, c(3.0, 0.5));
        let a = b.build();
        let p = a.matmul(&a.adjoint()).to_dense();
        let q = a.to_dense().matmul(&a.to_dense().adjoint());
        assert!(p.sub(&q).max_abs() < 1e-15);
    }

    #[test]
    fn coordinate_text_round_trip() {
        let mut b = TripletBuilder::new(3, 3);
        b.push_hermitian(1, 0, c(0.25, -1.5));
        b.push_hermitian(2, 2, c(-3.0, 0.0));
        let m = b.build();
        let text = m.to_coordinate_text();
        assert_eq!(text.lines().count(), 2);
        let back = CsrMatrix::from_coordinate_text(3, &text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn permutation_preserves_spectrum_shape() {
        let mut b = TripletBuilder::new(3, 3);
        b.push_hermitian(0, 2, c(1.0, 0.0));
        let m = b.build();
        let p = m.permute(&[2, 0, 1]);
        assert_eq!(p.get(0, 1), c(1.0, 0.0));
        assert_eq!(p.bandwidth(), (1, 1));
    }
}
