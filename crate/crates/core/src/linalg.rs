//! Small dense linear algebra: LU factorization with partial pivoting.
//!
//! The implicit radial solves and dual-norm Gram systems are at most a few
//! dozen unknowns per mode, so a plain dense LU is the right tool.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone)]
pub struct DMat {
    pub n: usize,
    pub a: Vec<f64>,
}

impl DMat {
    pub fn zeros(n: usize) -> Self {
        DMat {
            n,
            a: vec![0.0; n * n],
        }
    }

    pub fn eye(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] += v;
    }

    pub fn matmul(&self, other: &DMat) -> DMat {
        let n = self.n;
        let mut out = DMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.a[i * n + j] += aik * other.a[k * n + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += self.a[i * n + j] * x[j];
            }
            y[i] = s;
        }
        y
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.a.iter_mut() {
            *v *= s;
        }
    }

    pub fn add_mat(&mut self, other: &DMat, s: f64) {
        for (v, w) in self.a.iter_mut().zip(other.a.iter()) {
            *v += s * w;
        }
    }
}

/// LU factorization with partial pivoting of a real square matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl Lu {
    pub fn factor(m: &DMat) -> Result<Lu> {
        let n = m.n;
        let mut lu = m.a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut maxv = lu[k * n + k].abs();
            for i in (k + 1)..n {
                let v = lu[i * n + k].abs();
                if v > maxv {
                    maxv = v;
                    p = i;
                }
            }
            if maxv == 0.0 || !maxv.is_finite() {
                return Err(Error::ConfigurationError(format!(
                    "singular matrix in LU factorization at column {k}"
                )));
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            let pivval = lu[k * n + k];
            for i in (k + 1)..n {
                let f = lu[i * n + k] / pivval;
                lu[i * n + k] = f;
                for j in (k + 1)..n {
                    lu[i * n + j] -= f * lu[k * n + j];
                }
            }
        }
        Ok(Lu { n, lu, piv })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }

    /// Solve with a complex right-hand side by splitting into two real solves.
    pub fn solve_complex(&self, b: &[Complex64]) -> Vec<Complex64> {
        let re: Vec<f64> = b.iter().map(|z| z.re).collect();
        let im: Vec<f64> = b.iter().map(|z| z.im).collect();
        let xr = self.solve(&re);
        let xi = self.solve(&im);
        xr.into_iter()
            .zip(xi)
            .map(|(r, i)| Complex64::new(r, i))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_random_system() {
        let n = 7;
        let mut m = DMat::zeros(n);
        // deterministic pseudo-random entries
        let mut s = 1234567u64;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, next());
            }
            m.add(i, i, 3.0);
        }
        let xtrue: Vec<f64> = (0..n).map(|i| (i as f64) - 2.5).collect();
        let b = m.matvec(&xtrue);
        let lu = Lu::factor(&m).unwrap();
        let x = lu.solve(&b);
        for (a, b) in x.iter().zip(xtrue.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn lu_rejects_singular() {
        let mut m = DMat::zeros(3);
        m.set(0, 0, 1.0);
        m.set(1, 1, 1.0);
        // third row zero
        assert!(Lu::factor(&m).is_err());
    }
}
