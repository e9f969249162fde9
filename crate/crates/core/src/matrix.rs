//! Dense small-matrix kernel: vec/hat operators, Kronecker and Hadamard
//! products, LU solves with partial pivoting, and real unsymmetric
//! eigenvalues via Hessenberg reduction + Francis double-shift QR.
//!
//! Problem sizes here are at most 2n² with n ≤ 6 or so; everything is dense
//! and allocation cost is irrelevant next to clarity.

use num_complex::Complex64;
use std::ops::{Index, IndexMut};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("dimension mismatch: left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    DimensionMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("matrix is singular to working precision: pivot {pivot_magnitude:.3e} at index {pivot_index} (threshold {threshold:.3e})")]
    Singular {
        pivot_index: usize,
        pivot_magnitude: f64,
        threshold: f64,
    },
    #[error("QR eigenvalue iteration failed to converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
}

/// Row-major dense matrix of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Column vector of ones (V_n in the reduction formulas).
    pub fn ones_col(n: usize) -> Self {
        DenseMatrix { rows: n, cols: 1, data: vec![1.0; n] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        DenseMatrix { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Column vector from a slice.
    pub fn col_from(v: &[f64]) -> Self {
        DenseMatrix { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> DenseMatrix {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add dimension mismatch");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        DenseMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "sub dimension mismatch");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        DenseMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        let data = self.data.iter().map(|a| a * s).collect();
        DenseMatrix { rows: self.rows, cols: self.cols, data }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Induced infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// vec(M): stack the columns of M into a single column vector.
pub fn vec_of(m: &DenseMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.rows() * m.cols());
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Inverse of `vec_of`: rebuild an r×c matrix from its column-stacked vector.
pub fn unvec(v: &[f64], rows: usize, cols: usize) -> DenseMatrix {
    assert_eq!(v.len(), rows * cols, "unvec length mismatch");
    DenseMatrix::from_fn(rows, cols, |i, j| v[j * rows + i])
}

/// M̂ = diag(vec(M)).
pub fn hat(m: &DenseMatrix) -> DenseMatrix {
    let v = vec_of(m);
    let mut out = DenseMatrix::zeros(v.len(), v.len());
    for (i, x) in v.iter().enumerate() {
        out[(i, i)] = *x;
    }
    out
}

/// Kronecker product A ⊗ B.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let (ra, ca) = (a.rows(), a.cols());
    let (rb, cb) = (b.rows(), b.cols());
    let mut out = DenseMatrix::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for p in 0..rb {
                for q in 0..cb {
                    out[(i * rb + p, j * cb + q)] = aij * b[(p, q)];
                }
            }
        }
    }
    out
}

/// Hadamard (entrywise) product A ∗ B.
pub fn hadamard(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, MatrixError> {
    if (a.rows(), a.cols()) != (b.rows(), b.cols()) {
        return Err(MatrixError::DimensionMismatch {
            left_rows: a.rows(),
            left_cols: a.cols(),
            right_rows: b.rows(),
            right_cols: b.cols(),
        });
    }
    Ok(DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] * b[(i, j)]))
}

/// Relative pivot threshold below which a matrix is declared singular.
/// Well-posed manifold systems sit far above it; degenerate user inputs
/// fall below.
const SINGULARITY_RTOL: f64 = 1e-13;

/// LU factorization with partial pivoting, reusable across right-hand sides.
pub struct LuFactors {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

pub fn lu_factor(a: &DenseMatrix) -> Result<LuFactors, MatrixError> {
    assert_eq!(a.rows(), a.cols(), "lu_factor requires a square matrix");
    let n = a.rows();
    let threshold = SINGULARITY_RTOL * a.norm_inf();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut piv = k;
        let mut best = lu[(k, k)].abs();
        for i in (k + 1)..n {
            if lu[(i, k)].abs() > best {
                best = lu[(i, k)].abs();
                piv = i;
            }
        }
        if best <= threshold {
            return Err(MatrixError::Singular {
                pivot_index: k,
                pivot_magnitude: best,
                threshold,
            });
        }
        if piv != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(piv, j)];
                lu[(piv, j)] = tmp;
            }
            perm.swap(k, piv);
        }
        let pivot = lu[(k, k)];
        for i in (k + 1)..n {
            let factor = lu[(i, k)] / pivot;
            lu[(i, k)] = factor;
            if factor == 0.0 {
                continue;
            }
            for j in (k + 1)..n {
                lu[(i, j)] -= factor * lu[(k, j)];
            }
        }
    }
    Ok(LuFactors { lu, perm })
}

impl LuFactors {
    /// Solve A·X = B for the (possibly multi-column) right-hand side B.
    pub fn solve(&self, b: &DenseMatrix) -> DenseMatrix {
        let n = self.lu.rows();
        assert_eq!(b.rows(), n, "right-hand side has wrong row count");
        let k = b.cols();
        let mut x = DenseMatrix::zeros(n, k);
        // apply permutation
        for i in 0..n {
            for j in 0..k {
                x[(i, j)] = b[(self.perm[i], j)];
            }
        }
        // forward substitution (unit lower triangle)
        for i in 0..n {
            for r in 0..i {
                let f = self.lu[(i, r)];
                if f == 0.0 {
                    continue;
                }
                for j in 0..k {
                    let v = x[(r, j)];
                    x[(i, j)] -= f * v;
                }
            }
        }
        // back substitution
        for i in (0..n).rev() {
            for r in (i + 1)..n {
                let f = self.lu[(i, r)];
                if f == 0.0 {
                    continue;
                }
                for j in 0..k {
                    let v = x[(r, j)];
                    x[(i, j)] -= f * v;
                }
            }
            let d = self.lu[(i, i)];
            for j in 0..k {
                x[(i, j)] /= d;
            }
        }
        x
    }
}

/// Solve A·X = B with partial pivoting. B may have several columns.
pub fn lu_solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, MatrixError> {
    Ok(lu_factor(a)?.solve(b))
}

/// Eigenvalues of a real square matrix together with the largest real part.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    pub max_real_part: f64,
}

impl Spectrum {
    fn new(mut eigenvalues: Vec<Complex64>) -> Self {
        eigenvalues.sort_by(|a, b| {
            b.re.partial_cmp(&a.re).unwrap().then(b.im.partial_cmp(&a.im).unwrap())
        });
        let max_real_part =
            eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        Spectrum { eigenvalues, max_real_part }
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// All eigenvalues of a real square matrix (eigenvectors are never needed
/// here). Householder reduction to Hessenberg form followed by the Francis
/// double-shift QR iteration; eigenvalue-only variant of the classic
/// JAMA/EISPACK hqr2 routine.
pub fn eigenvalues(a: &DenseMatrix) -> Result<Spectrum, MatrixError> {
    assert_eq!(a.rows(), a.cols(), "eigenvalues requires a square matrix");
    let n = a.rows();
    if n == 0 {
        return Ok(Spectrum::new(Vec::new()));
    }
    let mut h = a.clone();
    hessenberg(&mut h);
    let (d, e) = hqr(&mut h)?;
    let eig = d.into_iter().zip(e).map(|(re, im)| Complex64::new(re, im)).collect();
    Ok(Spectrum::new(eig))
}

/// In-place Householder reduction to upper Hessenberg form (JAMA `orthes`,
/// without accumulating the transformation).
fn hessenberg(h: &mut DenseMatrix) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let mut scale = 0.0;
        for i in m..=high {
            scale += h[(i, m - 1)].abs();
        }
        if scale == 0.0 {
            continue;
        }
        let mut hsum = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hsum += ort[i] * ort[i];
        }
        let mut g = hsum.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hsum -= ort[m] * g;
        ort[m] -= g;
        // apply the Householder similarity H <- (I - u uᵗ/h) H (I - u uᵗ/h)
        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[(i, j)];
            }
            f /= hsum;
            for i in m..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h[(i, j)];
            }
            f /= hsum;
            for j in m..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[(m, m - 1)] = scale * g;
    }
    // clear the numerically-zero entries below the subdiagonal
    for i in 2..n {
        for j in 0..(i - 1) {
            h[(i, j)] = 0.0;
        }
    }
}

/// Iterations allowed per eigenvalue before declaring non-convergence.
const QR_MAX_ITER_PER_EIGENVALUE: usize = 40;

/// Francis double-shift QR on an upper Hessenberg matrix; returns the real
/// and imaginary parts of the eigenvalues (JAMA `hqr2` with the eigenvector
/// accumulation removed).
fn hqr(hm: &mut DenseMatrix) -> Result<(Vec<f64>, Vec<f64>), MatrixError> {
    let nn = hm.rows();
    let mut d = vec![0.0; nn];
    let mut e = vec![0.0; nn];
    let eps = f64::EPSILON;

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += hm[(i, j)].abs();
        }
    }
    if norm == 0.0 {
        return Ok((d, e)); // zero matrix
    }

    let low: isize = 0;
    let mut n = nn as isize - 1;
    let mut exshift = 0.0;
    let mut iter = 0usize;
    let mut total_iter = 0usize;
    let (mut p, mut q, mut r, mut s, mut z);
    let (mut x, mut y, mut w);
    r = 0.0;
    q = 0.0;
    p = 0.0;

    macro_rules! h {
        ($i:expr, $j:expr) => {
            hm[($i as usize, $j as usize)]
        };
    }

    while n >= low {
        // find a small subdiagonal element
        let mut l = n;
        while l > low {
            s = h![l - 1, l - 1].abs() + h![l, l].abs();
            if s == 0.0 {
                s = norm;
            }
            if h![l, l - 1].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // one real root
            h![n, n] += exshift;
            d[n as usize] = h![n, n];
            e[n as usize] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            // a pair of roots
            w = h![n, n - 1] * h![n - 1, n];
            p = (h![n - 1, n - 1] - h![n, n]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h![n, n] += exshift;
            h![n - 1, n - 1] += exshift;
            x = h![n, n];
            if q >= 0.0 {
                // real pair
                z = if p >= 0.0 { p + z } else { p - z };
                d[(n - 1) as usize] = x + z;
                d[n as usize] = d[(n - 1) as usize];
                if z != 0.0 {
                    d[n as usize] = x - w / z;
                }
                e[(n - 1) as usize] = 0.0;
                e[n as usize] = 0.0;
            } else {
                // complex pair
                d[(n - 1) as usize] = x + p;
                d[n as usize] = x + p;
                e[(n - 1) as usize] = z;
                e[n as usize] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            // form a shift
            x = h![n, n];
            y = 0.0;
            w = 0.0;
            if l < n {
                y = h![n - 1, n - 1];
                w = h![n, n - 1] * h![n - 1, n];
            }
            if iter == 10 || iter == 20 {
                // exceptional shift
                exshift += x;
                let mut i = low;
                while i <= n {
                    h![i, i] -= x;
                    i += 1;
                }
                s = h![n, n - 1].abs() + h![n - 1, n - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            iter += 1;
            total_iter += 1;
            if iter > QR_MAX_ITER_PER_EIGENVALUE {
                return Err(MatrixError::NoConvergence { iterations: total_iter });
            }

            // two consecutive small subdiagonal elements
            let mut m = n - 2;
            while m >= l {
                z = h![m, m];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h![m + 1, m] + h![m, m + 1];
                q = h![m + 1, m + 1] - z - r - s;
                r = h![m + 2, m + 1];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h![m, m - 1].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h![m - 1, m - 1].abs() + z.abs() + h![m + 1, m + 1].abs()))
                {
                    break;
                }
                m -= 1;
            }
            let mut i = m + 2;
            while i <= n {
                h![i, i - 2] = 0.0;
                if i > m + 2 {
                    h![i, i - 3] = 0.0;
                }
                i += 1;
            }

            // double QR sweep over rows l..n
            let mut k = m;
            while k < n {
                let notlast = k != n - 1;
                if k != m {
                    p = h![k, k - 1];
                    q = h![k + 1, k - 1];
                    r = if notlast { h![k + 2, k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h![k, k - 1] = -s * x;
                    } else if l != m {
                        h![k, k - 1] = -h![k, k - 1];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    // row modification
                    for j in (k as usize)..nn {
                        let mut pp = h![k, j] + q * h![k + 1, j];
                        if notlast {
                            pp += r * h![k + 2, j];
                        }
                        h![k, j] -= pp * x;
                        h![k + 1, j] -= pp * y;
                        if notlast {
                            h![k + 2, j] -= pp * z;
                        }
                    }
                    // column modification
                    let upper = if n < k + 3 { n } else { k + 3 };
                    for i in 0..=(upper as usize) {
                        let mut pp = x * h![i, k] + y * h![i, k + 1];
                        if notlast {
                            pp += z * h![i, k + 2];
                        }
                        h![i, k] -= pp;
                        h![i, k + 1] -= pp * q;
                        if notlast {
                            h![i, k + 2] -= pp * r;
                        }
                    }
                }
                k += 1;
            }
        }
    }
    Ok((d, e))
}
