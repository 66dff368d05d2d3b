//! Small dense helpers on `&[f64]`.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `y += s * x`
pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `Aᵀ y`
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            axpy(&mut out, *yi, self.row(i));
        }
        out
    }

    /// Largest eigenvalue of `AᵀA` (= ‖A‖²) by power iteration.
    ///
    /// Stops when the Rayleigh quotient changes by less than `tol` (relative)
    /// or after `max_iter` iterations.
    pub fn spectral_norm_sq(&self, max_iter: usize, tol: f64) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        // deterministic start with all components active
        let mut v: Vec<f64> = (0..self.cols).map(|j| 1.0 + 0.1 * (j as f64).sin()).collect();
        let n0 = norm(&v);
        v.iter_mut().for_each(|x| *x /= n0);
        let mut estimate = 0.0;
        for _ in 0..max_iter {
            let w = self.tr_mul_vec(&self.mul_vec(&v));
            let next = dot(&v, &w);
            let nw = norm(&w);
            if nw == 0.0 {
                return 0.0;
            }
            v = w.into_iter().map(|x| x / nw).collect();
            let done = (next - estimate).abs() <= tol * next.abs();
            estimate = next;
            if done {
                break;
            }
        }
        estimate
    }
}
