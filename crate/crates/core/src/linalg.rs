//! Small dense matrices for the covariance engine.

use std::ops::{Index, IndexMut};

use crate::scalar::Real;

/// Square row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, T::one())
    }

    pub fn scaled_identity(dim: usize, value: T) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = value;
        }
        m
    }

    pub fn from_rows(rows: &[&[T]]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "matrix must be square");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn trace(&self) -> T {
        (0..self.dim).fold(T::zero(), |acc, i| acc + self[(i, i)])
    }

    /// Quadratic form `vᵀ M v`.
    pub fn quadratic_form(&self, v: &[T]) -> T {
        assert_eq!(v.len(), self.dim);
        let mut acc = T::zero();
        for i in 0..self.dim {
            let mut row = T::zero();
            for j in 0..self.dim {
                row = row + self[(i, j)] * v[j];
            }
            acc = acc + v[i] * row;
        }
        acc
    }

    /// Largest relative deviation from symmetry, `max|Mij − Mji| / max|M|`.
    pub fn asymmetry(&self) -> T {
        let scale = self
            .data
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()))
            .max(T::min_positive_value());
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }

    /// Replace `M` by `S M Sᵀ` where `S` acts as the `k×k` block `s` on the
    /// coordinates `idx` and as the identity elsewhere.
    pub fn congruence_on(&mut self, idx: &[usize], s: &Mat<T>) {
        let k = idx.len();
        assert_eq!(s.dim, k);
        let n = self.dim;
        // rows: M[idx, :] <- s · M[idx, :]
        let mut rows = vec![T::zero(); k * n];
        for a in 0..k {
            for c in 0..n {
                let mut acc = T::zero();
                for b in 0..k {
                    acc = acc + s[(a, b)] * self[(idx[b], c)];
                }
                rows[a * n + c] = acc;
            }
        }
        for a in 0..k {
            for c in 0..n {
                self[(idx[a], c)] = rows[a * n + c];
            }
        }
        // columns: M[:, idx] <- M[:, idx] · sᵀ
        let mut cols = vec![T::zero(); n * k];
        for r in 0..n {
            for a in 0..k {
                let mut acc = T::zero();
                for b in 0..k {
                    acc = acc + self[(r, idx[b])] * s[(a, b)];
                }
                cols[r * k + a] = acc;
            }
        }
        for r in 0..n {
            for a in 0..k {
                self[(r, idx[a])] = cols[r * k + a];
            }
        }
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<T> {
        let n = self.dim;
        let mut a = self.clone();
        let eps = T::epsilon();
        for _sweep in 0..100 {
            let mut off = T::zero();
            let mut diag = T::zero();
            for i in 0..n {
                diag = diag + a[(i, i)] * a[(i, i)];
                for j in (i + 1)..n {
                    off = off + a[(i, j)] * a[(i, j)];
                }
            }
            if off <= eps * eps * diag.max(T::min_positive_value()) {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (T::two() * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
        ev
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.dim + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.dim + j]
    }
}

/// Eigen-decomposition of a real symmetric 2×2 matrix `[[a, b], [b, d]]`.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns.
pub fn sym2_eigen<T: Real>(a: T, b: T, d: T) -> ([T; 2], [[T; 2]; 2]) {
    let half_tr = (a + d) * T::half();
    let diff = (a - d) * T::half();
    let rad = (diff * diff + b * b).sqrt();
    let (l1, l2) = (half_tr + rad, half_tr - rad);
    if b == T::zero() {
        return if a >= d {
            ([a, d], [[T::one(), T::zero()], [T::zero(), T::one()]])
        } else {
            ([d, a], [[T::zero(), T::one()], [T::one(), T::zero()]])
        };
    }
    let angle = T::half() * (T::two() * b).atan2(a - d);
    let (s, c) = angle.sin_cos();
    ([l1, l2], [[c, -s], [s, c]])
}

/// Symmetric square root factor `L` with `L Lᵀ = M` for a 2×2 PSD matrix,
/// clamping eigenvalues in `[-tol, 0)` to zero. Returns the most negative
/// eigenvalue on failure.
pub fn sym2_sqrt<T: Real>(a: T, b: T, d: T, tol: T) -> Result<[[T; 2]; 2], T> {
    let (vals, vecs) = sym2_eigen(a, b, d);
    let min = vals[0].min(vals[1]);
    if min < -tol {
        return Err(min);
    }
    let s = [vals[0].max(T::zero()).sqrt(), vals[1].max(T::zero()).sqrt()];
    let mut l = [[T::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            l[i][j] = (0..2).fold(T::zero(), |acc, k| acc + vecs[i][k] * s[k] * vecs[j][k]);
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_matches_known_spectrum() {
        let m = Mat::<f64>::from_rows(&[&[2.0, 1.0, 0.0], &[1.0, 2.0, 0.0], &[0.0, 0.0, 5.0]]);
        let ev = m.symmetric_eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-12);
        assert!((ev[1] - 3.0).abs() < 1e-12);
        assert!((ev[2] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn sym2_sqrt_reconstructs() {
        let (a, b, d) = (0.7_f64, -0.3, 0.4);
        let l = sym2_sqrt(a, b, d, 1e-12).unwrap();
        let m00 = l[0][0] * l[0][0] + l[0][1] * l[0][1];
        let m01 = l[0][0] * l[1][0] + l[0][1] * l[1][1];
        let m11 = l[1][0] * l[1][0] + l[1][1] * l[1][1];
        assert!((m00 - a).abs() < 1e-14 && (m01 - b).abs() < 1e-14 && (m11 - d).abs() < 1e-14);
    }

    #[test]
    fn sym2_sqrt_rejects_indefinite() {
        assert!(sym2_sqrt(1.0_f64, 2.0, 1.0, 1e-9).is_err());
    }

    #[test]
    fn congruence_matches_full_product() {
        let mut m = Mat::from_rows(&[
            &[1.0, 0.2, 0.1, 0.0],
            &[0.2, 2.0, 0.0, 0.3],
            &[0.1, 0.0, 1.5, 0.4],
            &[0.0, 0.3, 0.4, 3.0],
        ]);
        let s = Mat::from_rows(&[&[0.0, 1.0], &[-1.0, 0.5]]);
        let full = {
            let mut f = Mat::<f64>::identity(4);
            f[(1, 1)] = 0.0;
            f[(1, 3)] = 1.0;
            f[(3, 1)] = -1.0;
            f[(3, 3)] = 0.5;
            f
        };
        let mut expect = Mat::zeros(4);
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = 0.0;
                for k in 0..4 {
                    for l in 0..4 {
                        acc += full[(i, k)] * m[(k, l)] * full[(j, l)];
                    }
                }
                expect[(i, j)] = acc;
            }
        }
        m.congruence_on(&[1, 3], &s);
        for i in 0..4 {
            for j in 0..4 {
                assert!((m[(i, j)] - expect[(i, j)]).abs() < 1e-14);
            }
        }
    }
}
