//! Dense symmetric matrices, Cholesky factorization and extreme eigenvalues.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Row-major dense square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(DenseMatrix { n, data })
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows_mut(&mut self) -> std::slice::ChunksMut<'_, f64> {
        self.data.chunks_mut(self.n.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    /// Largest `|a_ij - a_ji|` relative to the largest `|a_ij|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                scale = scale.max(self.get(i, j).abs());
                if j > i {
                    worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
                }
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Copy the upper triangle from the lower one.
    pub fn symmetrize_from_lower(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in 0..i {
                let v = self.data[i * n + j];
                self.data[j * n + i] = v;
            }
        }
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

/// Write `m` as two little-endian `u64` dimensions (rows, columns)
/// followed by the entries as row-major little-endian `f64`.
pub fn write_matrix(m: &DenseMatrix, out: &mut impl std::io::Write) -> Result<()> {
    out.write_all(&(m.n as u64).to_le_bytes())?;
    out.write_all(&(m.n as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * m.n);
    for row in m.data.chunks(m.n.max(1)) {
        buf.clear();
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

/// Read a square matrix written by [`write_matrix`].
pub fn read_matrix(input: &mut impl std::io::Read) -> Result<DenseMatrix> {
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    if rows != cols {
        return Err(Error::Format(format!("expected a square matrix, got {rows}x{cols}")));
    }
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * rows * cols {
        return Err(Error::Format(format!(
            "{} payload bytes for a {rows}x{cols} matrix",
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenseMatrix::from_row_major(rows, data)
}

/// Lower Cholesky factor `L` with `A = L L^T`, stored row-major (upper part
/// is left as zeros).
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: DenseMatrix,
}

const BLOCK: usize = 48;

impl Cholesky {
    /// Factor an SPD matrix; only the lower triangle is read. Fails with
    /// [`Error::NotPositiveDefinite`] at the first non-positive pivot.
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        Self::factor_owned(a.clone())
    }

    pub fn factor_owned(mut a: DenseMatrix) -> Result<Self> {
        let n = a.n;
        let data = &mut a.data;
        // Row-blocked left-looking (Cholesky-Banachiewicz): each row of the
        // factor already computed is streamed once per block of rows.
        let mut start = 0;
        while start < n {
            let end = (start + BLOCK).min(n);
            for j in 0..end {
                let (head, tail) = data.split_at_mut(start * n);
                let row_j: &[f64] = if j < start {
                    &head[j * n..j * n + j]
                } else {
                    // j is inside the block: copy to avoid aliasing.
                    &[]
                };
                let diag_j = if j < start { head[j * n + j] } else { 0.0 };
                if j < start {
                    for i in start..end {
                        let ri = &mut tail[(i - start) * n..(i - start) * n + n];
                        let s = ri[j] - dot(&ri[..j], row_j);
                        ri[j] = s / diag_j;
                    }
                } else {
                    let row_j: Vec<f64> = tail[(j - start) * n..(j - start) * n + j].to_vec();
                    let jj = {
                        let rj = &mut tail[(j - start) * n..(j - start) * n + n];
                        let s = rj[j] - dot(&rj[..j], &row_j);
                        if !(s > 0.0) {
                            return Err(Error::NotPositiveDefinite { pivot: j, value: s });
                        }
                        let d = s.sqrt();
                        rj[j] = d;
                        d
                    };
                    for i in j + 1..end {
                        let ri = &mut tail[(i - start) * n..(i - start) * n + n];
                        let s = ri[j] - dot(&ri[..j], &row_j);
                        ri[j] = s / jj;
                    }
                }
            }
            start = end;
        }
        for i in 0..n {
            for j in i + 1..n {
                data[i * n + j] = 0.0;
            }
        }
        Ok(Cholesky { l: a })
    }

    pub fn dim(&self) -> usize {
        self.l.n
    }

    pub fn factor_matrix(&self) -> &DenseMatrix {
        &self.l
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.l.n).map(|i| self.l.get(i, i)).collect()
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.n;
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let row = self.l.row(i);
            y[i] = (y[i] - dot(&row[..i], &y[..i])) / row[i];
        }
        // Backward substitution with L^T, column-oriented on the rows of L.
        for i in (0..n).rev() {
            let row = self.l.row(i);
            y[i] /= row[i];
            let yi = y[i];
            for (k, &l) in row[..i].iter().enumerate() {
                y[k] -= l * yi;
            }
        }
        y
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..n {
        s += a[k] * b[k];
    }
    s
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Extreme eigenvalues `(lambda_min, lambda_max)` of a symmetric matrix from
/// a full symmetric eigendecomposition.
pub fn extreme_eigenvalues_dense(a: &DenseMatrix) -> (f64, f64) {
    let eig = SymmetricEigen::new(a.to_nalgebra());
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Extreme eigenvalues of an SPD matrix by power iteration on `A` and on
/// `A^-1` (through a Cholesky factor), stopping at `tol` relative change.
pub fn extreme_eigenvalues_iterative(a: &DenseMatrix, tol: f64, max_iter: usize) -> Result<(f64, f64)> {
    let n = a.dim();
    let chol = Cholesky::factor(a)?;
    let start: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    let lambda_max = power_iteration(|x| a.mul_vec(x), &start, tol, max_iter);
    let inv_max = power_iteration(|x| chol.solve(x), &start, tol, max_iter);
    Ok((1.0 / inv_max, lambda_max))
}

fn power_iteration(apply: impl Fn(&[f64]) -> Vec<f64>, start: &[f64], tol: f64, max_iter: usize) -> f64 {
    let mut x = start.to_vec();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let y = apply(&x);
        let next = dot(&x, &y);
        let ny = norm2(&y);
        x = y.into_iter().map(|v| v / ny).collect();
        if (next - lambda).abs() <= tol * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> DenseMatrix {
        // A = B B^T + n I for a fixed B.
        let b: Vec<f64> = (0..n * n).map(|k| ((k * 37 % 17) as f64 - 8.0) / 8.0).collect();
        let mut a = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum();
                a.set(i, j, s + if i == j { n as f64 } else { 0.0 });
            }
        }
        a
    }

    #[test]
    fn identity_solve() {
        let chol = Cholesky::factor(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(chol.solve(&[1.0, 0.0, 0.0]), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn factor_reconstructs_across_blocks() {
        for n in [1, 5, BLOCK - 1, BLOCK, BLOCK + 3, 2 * BLOCK + 7] {
            let a = spd(n);
            let chol = Cholesky::factor(&a).unwrap();
            let l = chol.factor_matrix();
            for i in 0..n {
                for j in 0..=i {
                    let s: f64 = (0..=j).map(|k| l.get(i, k) * l.get(j, k)).sum();
                    assert!((s - a.get(i, j)).abs() <= 1e-10 * a.get(i, i).abs(), "n={n} ({i},{j})");
                }
            }
            let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let b = a.mul_vec(&x_true);
            let x = chol.solve(&b);
            for i in 0..n {
                assert!((x[i] - x_true[i]).abs() < 1e-9);
            }
            assert!(chol.diagonal().iter().all(|&d| d > 0.0));
        }
    }

    #[test]
    fn indefinite_reports_pivot() {
        let mut a = spd(6);
        a.set(3, 3, -a.get(3, 3));
        match Cholesky::factor(&a) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn eigenvalue_routes_agree() {
        let a = DenseMatrix::from_diagonal(&[2.0, 8.0]);
        assert_eq!(extreme_eigenvalues_dense(&a), (2.0, 8.0));
        let a = spd(20);
        let (lo, hi) = extreme_eigenvalues_dense(&a);
        let (lo2, hi2) = extreme_eigenvalues_iterative(&a, 1e-12, 10_000).unwrap();
        assert!((lo - lo2).abs() <= 1e-6 * lo);
        assert!((hi - hi2).abs() <= 1e-6 * hi);
    }

    #[test]
    fn matrix_file_round_trip() {
        let a = spd(5);
        let mut buf = Vec::new();
        write_matrix(&a, &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 8 * 25);
        assert_eq!(&buf[..8], &5u64.to_le_bytes());
        assert_eq!(&buf[16..24], &a.get(0, 0).to_le_bytes());
        assert_eq!(&buf[24..32], &a.get(0, 1).to_le_bytes());
        assert_eq!(read_matrix(&mut buf.as_slice()).unwrap(), a);
        buf.pop();
        assert!(matches!(read_matrix(&mut buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn asymmetry_measure() {
        let mut a = DenseMatrix::identity(2);
        a.set(0, 1, 0.5);
        assert_eq!(a.asymmetry(), 0.5);
        a.symmetrize_from_lower();
        assert_eq!(a.get(0, 1), 0.0);
    }
}
