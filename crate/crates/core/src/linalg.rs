//! Dense/sparse matrix storage and the spectral norm estimator.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

/// Compressed sparse rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    /// Sums duplicate coordinates; drops explicit zeros.
    pub fn from_triplets(rows: usize, cols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last = None;
        for (i, j, v) in t {
            assert!(i < rows && j < cols, "triplet ({i}, {j}) outside {rows}x{cols}");
            if last == Some((i, j)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        let mut m = SparseMatrix { rows, cols, indptr, indices, values };
        m.prune();
        m
    }

    fn prune(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut indptr = vec![0; self.rows + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.rows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                if self.values[k] != 0.0 {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[i + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.indptr[i]..self.indptr[i + 1];
        match self.indices[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                m[(i, self.indices[k])] = self.values[k];
            }
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Matrix {
    Dense(DMatrix<f64>),
    Sparse(SparseMatrix),
}

/// Density below which accumulated matrices are kept sparse.
pub const SPARSE_DENSITY: f64 = 0.05;

impl Matrix {
    /// Picks storage by density.
    pub fn from_triplets(rows: usize, cols: usize, t: Vec<(usize, usize, f64)>) -> Self {
        let sparse = SparseMatrix::from_triplets(rows, cols, t);
        if (sparse.nnz() as f64) < SPARSE_DENSITY * rows as f64 * cols as f64 {
            Matrix::Sparse(sparse)
        } else {
            Matrix::Dense(sparse.to_dense())
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.nrows(),
            Matrix::Sparse(m) => m.rows,
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.ncols(),
            Matrix::Sparse(m) => m.cols,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Matrix::Dense(m) => m[(i, j)],
            Matrix::Sparse(m) => m.get(i, j),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Matrix::Dense(m) => m.clone(),
            Matrix::Sparse(m) => m.to_dense(),
        }
    }

    /// `y = M x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        match self {
            Matrix::Dense(m) => {
                y.iter_mut().for_each(|v| *v = 0.0);
                for (j, &xj) in x.iter().enumerate() {
                    if xj != 0.0 {
                        for (yi, &a) in y.iter_mut().zip(m.column(j).iter()) {
                            *yi += a * xj;
                        }
                    }
                }
            }
            Matrix::Sparse(m) => {
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi = (m.indptr[i]..m.indptr[i + 1]).map(|k| m.values[k] * x[m.indices[k]]).sum();
                }
            }
        }
    }

    /// `y = Mᵀ x`.
    pub fn matvec_t(&self, x: &[f64], y: &mut [f64]) {
        match self {
            Matrix::Dense(m) => {
                for (j, yj) in y.iter_mut().enumerate() {
                    *yj = m.column(j).iter().zip(x).map(|(a, b)| a * b).sum();
                }
            }
            Matrix::Sparse(m) => {
                y.iter_mut().for_each(|v| *v = 0.0);
                for (i, &xi) in x.iter().enumerate() {
                    for k in m.indptr[i]..m.indptr[i + 1] {
                        y[m.indices[k]] += m.values[k] * xi;
                    }
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NormMethod {
    DenseEigen,
    PowerIteration,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit; `value` is then the best estimate.
    pub converged: bool,
    pub method: NormMethod,
}

pub const DEFAULT_NORM_TOL: f64 = 1e-6;
pub const DENSE_FALLBACK_DIM: usize = 64;
const START_SEED: u64 = 0x05ee_d0f5_ca1e;

/// `⌈10·ln(dim)⌉ + 200`.
pub fn default_max_iters(dim: usize) -> usize {
    (10.0 * (dim.max(1) as f64).ln()).ceil() as usize + 200
}

/// Largest singular value. Exact eigen-decomposition of the small Gram matrix
/// when the short side is at most 64, power iteration on `MᵀM` otherwise.
pub fn spectral_norm(m: &Matrix, tol: f64, max_iters: usize) -> NormEstimate {
    let (r, c) = (m.rows(), m.cols());
    if r == 0 || c == 0 {
        return NormEstimate { value: 0.0, iterations: 0, converged: true, method: NormMethod::DenseEigen };
    }
    if r.min(c) <= DENSE_FALLBACK_DIM {
        return NormEstimate {
            value: gram_norm(m),
            iterations: 0,
            converged: true,
            method: NormMethod::DenseEigen,
        };
    }
    power_iteration(m, tol, max_iters)
}

fn gram_norm(m: &Matrix) -> f64 {
    let small = m.rows().min(m.cols());
    let mut g = DMatrix::<f64>::zeros(small, small);
    match m {
        Matrix::Dense(a) => {
            if a.nrows() <= a.ncols() {
                g = a * a.transpose();
            } else {
                g = a.transpose() * a;
            }
        }
        Matrix::Sparse(a) => {
            if a.rows <= a.cols {
                let mut rows_of_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); a.cols];
                for i in 0..a.rows {
                    for k in a.indptr[i]..a.indptr[i + 1] {
                        rows_of_col[a.indices[k]].push((i, a.values[k]));
                    }
                }
                accumulate_gram(&mut g, &rows_of_col);
            } else {
                let rows: Vec<Vec<(usize, f64)>> = (0..a.rows)
                    .map(|i| (a.indptr[i]..a.indptr[i + 1]).map(|k| (a.indices[k], a.values[k])).collect())
                    .collect();
                accumulate_gram(&mut g, &rows);
            }
        }
    }
    let top = g.symmetric_eigenvalues().max();
    top.max(0.0).sqrt()
}

fn accumulate_gram(g: &mut DMatrix<f64>, groups: &[Vec<(usize, f64)>]) {
    for group in groups {
        for &(a, x) in group {
            for &(b, y) in group {
                g[(a, b)] += x * y;
            }
        }
    }
}

fn power_iteration(m: &Matrix, tol: f64, max_iters: usize) -> NormEstimate {
    let (r, c) = (m.rows(), m.cols());
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED ^ (r as u64) << 32 ^ c as u64);
    let mut v: Vec<f64> = (0..c).map(|_| StandardNormal.sample(&mut rng)).collect();
    normalize(&mut v);
    let mut w = vec![0.0; r];
    let mut z = vec![0.0; c];
    let mut best = 0.0f64;
    let mut prev = f64::NAN;
    let mut confirmations = 0;
    for it in 1..=max_iters.max(1) {
        m.matvec(&v, &mut w);
        let lambda: f64 = w.iter().map(|x| x * x).sum();
        best = best.max(lambda);
        if lambda == 0.0 {
            return NormEstimate { value: 0.0, iterations: it, converged: true, method: NormMethod::PowerIteration };
        }
        if (lambda - prev).abs() <= tol * lambda {
            confirmations += 1;
            if confirmations > 2 {
                return NormEstimate {
                    value: best.sqrt(),
                    iterations: it,
                    converged: true,
                    method: NormMethod::PowerIteration,
                };
            }
        } else {
            confirmations = 0;
        }
        prev = lambda;
        m.matvec_t(&w, &mut z);
        std::mem::swap(&mut v, &mut z);
        normalize(&mut v);
    }
    NormEstimate { value: best.sqrt(), iterations: max_iters, converged: false, method: NormMethod::PowerIteration }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Reference norm by dense SVD.
pub fn svd_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

pub fn to_dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
