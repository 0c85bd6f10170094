//! Minimal dense row-major matrix and the vector helpers used across the crate.

use crate::error::{Error, Result};

/// Dense real matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::DegenerateInput("matrix with zero rows".into()));
        }
        let c = rows[0].len();
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Mat { rows: r, cols: c, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// Largest absolute asymmetry `|A_ij - A_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols.min(self.rows) {
                d = d.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        d
    }

    /// Matrix-vector product.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: x.len(),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `I - gamma * u u^T` for a unit vector `u`.
    pub fn projector(u: &[f64], gamma: f64) -> Self {
        let p = u.len();
        let mut m = Mat::identity(p);
        for i in 0..p {
            let gi = gamma * u[i];
            let row = m.row_mut(i);
            for j in 0..p {
                row[j] -= gi * u[j];
            }
        }
        m
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Normalizes in place; errors on (near) zero input.
pub fn normalize(a: &mut [f64]) -> Result<f64> {
    let n = norm(a);
    if n < 1e-300 {
        return Err(Error::DegenerateInput("cannot normalize a zero vector".into()));
    }
    for v in a.iter_mut() {
        *v /= n;
    }
    Ok(n)
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
///
/// `A` is consumed. Errors with `SingularJacobian`-style pivot breakdown
/// mapped to `Numeric` since callers attach their own context.
pub fn solve_linear(mut a: Mat, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for k in 0..n {
        let mut piv = k;
        let mut best = a.get(k, k).abs();
        for i in (k + 1)..n {
            let v = a.get(i, k).abs();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best < 1e-14 * scale {
            return Err(Error::Numeric(format!(
                "singular linear system (pivot {best:.3e} at column {k})"
            )));
        }
        if piv != k {
            for j in 0..n {
                let tmp = a.get(k, j);
                a.set(k, j, a.get(piv, j));
                a.set(piv, j, tmp);
            }
            b.swap(k, piv);
        }
        for i in (k + 1)..n {
            let f = a.get(i, k) / a.get(k, k);
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                let v = a.get(i, j) - f * a.get(k, j);
                a.set(i, j, v);
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in (i + 1)..n {
            s -= a.get(i, j) * x[j];
        }
        x[i] = s / a.get(i, i);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_linear_roundtrip() {
        let a = Mat::from_rows(&[
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ])
        .unwrap();
        let x_true = vec![1.0, -2.0, 0.5];
        let b = a.matvec(&x_true).unwrap();
        let x = solve_linear(a, b).unwrap();
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_linear_singular() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(solve_linear(a, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn projector_removes_component() {
        let u = vec![1.0, 0.0, 0.0];
        let m = Mat::projector(&u, 1.0);
        let y = m.matvec(&[3.0, 2.0, -1.0]).unwrap();
        assert_eq!(y, vec![0.0, 2.0, -1.0]);
    }
}
