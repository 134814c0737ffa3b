//! Chebyshev-Gauss-Lobatto collocation on a mapped interval [a, b].
//!
//! Nodes include both endpoints, which is what lets the shell solver impose
//! Navier slip rows exactly at r = 1 and r = 1 + eps. Quadrature weights are
//! Clenshaw-Curtis (exact for polynomials of degree <= nrad - 1), and
//! differentiation is spectral via the coefficient recurrence.
//!
//! Node i corresponds to the CGL angle pi*i/(n-1); the affine map
//! x = a + (b-a)(1 - xi)/2 with xi = cos(pi*i/(n-1)) makes the nodes ascend
//! from a to b, so xi = 1 - 2(x-a)/(b-a) and d(xi)/dx = -2/(b-a).

use crate::error::{Error, Result};
use crate::linalg::DMat;

/// Chebyshev-Gauss-Lobatto basis on [a, b] with n nodes (max degree n - 1).
#[derive(Debug, Clone)]
pub struct ChebBasis {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    /// Nodes in ascending order, nodes[0] = a, nodes[n-1] = b.
    pub nodes: Vec<f64>,
    /// Clenshaw-Curtis weights for the plain integral over [a, b].
    pub weights: Vec<f64>,
    /// Nodal differentiation matrix d/dx.
    pub dmat: DMat,
}

impl ChebBasis {
    pub fn new(n: usize, a: f64, b: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("chebyshev basis needs n >= 2, got {n}")));
        }
        if !(b > a) {
            return Err(Error::invalid(format!("bad interval [{a}, {b}]")));
        }
        let nn = (n - 1) as f64;
        let mut nodes = vec![0.0; n];
        for (i, node) in nodes.iter_mut().enumerate() {
            let xi = (std::f64::consts::PI * i as f64 / nn).cos();
            *node = a + (b - a) * 0.5 * (1.0 - xi);
        }
        nodes[0] = a;
        nodes[n - 1] = b;

        let weights = clenshaw_curtis(n, a, b);
        let dmat = diff_matrix(&nodes);
        Ok(ChebBasis {
            n,
            a,
            b,
            nodes,
            weights,
            dmat,
        })
    }

    /// Nodal values -> Chebyshev coefficients (degree 0..n-1).
    pub fn to_coeffs(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n;
        let nn = n - 1;
        let mut c = vec![0.0; n];
        for (k, ck) in c.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, fj) in f.iter().enumerate() {
                let halve = if j == 0 || j == nn { 0.5 } else { 1.0 };
                s += halve * fj * (std::f64::consts::PI * (j * k) as f64 / nn as f64).cos();
            }
            let gk = if k == 0 || k == nn { 2.0 } else { 1.0 };
            *ck = 2.0 * s / (nn as f64 * gk);
        }
        c
    }

    /// Chebyshev coefficients -> nodal values.
    pub fn to_nodal(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n;
        let nn = n - 1;
        let mut f = vec![0.0; n];
        for (j, fj) in f.iter_mut().enumerate() {
            let mut s = 0.0;
            for (k, ck) in c.iter().enumerate() {
                s += ck * (std::f64::consts::PI * (j * k) as f64 / nn as f64).cos();
            }
            *fj = s;
        }
        f
    }

    /// Differentiate in coefficient space, including the affine map factor.
    pub fn diff_coeffs(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut d = vec![0.0; n];
        if n >= 2 {
            d[n - 2] = 2.0 * (n as f64 - 1.0) * c[n - 1];
            for k in (0..n - 2).rev() {
                let kk = k as f64;
                d[k] = if k + 2 < n { d[k + 2] } else { 0.0 };
                d[k] += 2.0 * (kk + 1.0) * c[k + 1];
            }
            d[0] *= 0.5;
        }
        let scale = -2.0 / (self.b - self.a); // d(xi)/dx
        for v in d.iter_mut() {
            *v *= scale;
        }
        d
    }

    /// Evaluate a coefficient vector at an arbitrary point x in [a, b].
    pub fn eval(&self, c: &[f64], x: f64) -> f64 {
        let xi = 1.0 - 2.0 * (x - self.a) / (self.b - self.a);
        // Clenshaw recurrence for sum_k c_k T_k(xi)
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &ck in c.iter().skip(1).rev() {
            let t = 2.0 * xi * b1 - b2 + ck;
            b2 = b1;
            b1 = t;
        }
        xi * b1 - b2 + c[0]
    }

    /// Integral over [a, b] by the Clenshaw-Curtis weights.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}

/// Clenshaw-Curtis weights on the mapped CGL nodes (ascending order).
fn clenshaw_curtis(n: usize, a: f64, b: f64) -> Vec<f64> {
    let nn = n - 1;
    let mut w = vec![0.0; n];
    // integral = sum_k c_k m_k with m_k = int_{-1}^1 T_k = 2/(1-k^2) (even k);
    // substituting the DCT for c_k gives one weight per node.
    for (j, wj) in w.iter_mut().enumerate() {
        let halve = if j == 0 || j == nn { 0.5 } else { 1.0 };
        let mut s = 0.0;
        for k in (0..n).step_by(2) {
            let gk = if k == 0 || k == nn { 2.0 } else { 1.0 };
            let mk = 2.0 / (1.0 - (k * k) as f64);
            s += (2.0 / (nn as f64 * gk))
                * (std::f64::consts::PI * (j * k) as f64 / nn as f64).cos()
                * mk
                * halve;
        }
        *wj = s * (b - a) * 0.5;
    }
    w
}

/// Standard CGL nodal differentiation matrix, written for ascending nodes.
fn diff_matrix(nodes: &[f64]) -> DMat {
    let n = nodes.len();
    let mut d = DMat::zeros(n);
    let c = |i: usize| -> f64 {
        if i == 0 || i == n - 1 {
            2.0
        } else {
            1.0
        }
    };
    for i in 0..n {
        let mut rowsum = 0.0;
        for j in 0..n {
            if i != j {
                let v = (c(i) / c(j)) * ((-1.0f64).powi((i + j) as i32)) / (nodes[i] - nodes[j]);
                d.set(i, j, v);
                rowsum += v;
            }
        }
        // negative sum trick for the diagonal
        d.set(i, i, -rowsum);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_integrate_monomials() {
        // oracle: closed-form integral of r^k over [1, 1.5]
        let cb = ChebBasis::new(8, 1.0, 1.5).unwrap();
        for k in 0..8 {
            let f: Vec<f64> = cb.nodes.iter().map(|r| r.powi(k)).collect();
            let q = cb.integrate(&f);
            let exact = (1.5f64.powi(k + 1) - 1.0) / (k as f64 + 1.0);
            assert!((q - exact).abs() < 1e-13, "k={k}: {q} vs {exact}");
        }
    }

    #[test]
    fn coeff_roundtrip_and_derivative() {
        let cb = ChebBasis::new(12, 1.0, 1.1).unwrap();
        let f: Vec<f64> = cb.nodes.iter().map(|r| r.exp()).collect();
        let c = cb.to_coeffs(&f);
        let back = cb.to_nodal(&c);
        for (x, y) in f.iter().zip(&back) {
            assert!((x - y).abs() < 1e-12);
        }
        let dc = cb.diff_coeffs(&c);
        let df = cb.to_nodal(&dc);
        for (r, d) in cb.nodes.iter().zip(&df) {
            assert!((d - r.exp()).abs() < 1e-10, "deriv at {r}: {d}");
        }
        // eval off-grid against the oracle
        let x = 1.0371;
        assert!((cb.eval(&c, x) - x.exp()).abs() < 1e-12);
    }

    #[test]
    fn nodal_diff_matrix_matches_polynomial() {
        let cb = ChebBasis::new(9, 1.0, 1.3).unwrap();
        let f: Vec<f64> = cb.nodes.iter().map(|r| r * r).collect();
        let df = cb.dmat.matvec(&f);
        for (r, d) in cb.nodes.iter().zip(&df) {
            assert!((d - 2.0 * r).abs() < 1e-11, "at {r}: {d}");
        }
    }

    #[test]
    fn polynomial_differentiation_exact() {
        // spectral differentiation is exact on polynomials of degree < n
        let cb = ChebBasis::new(6, 1.0, 1.4).unwrap();
        let f: Vec<f64> = cb.nodes.iter().map(|r| 1.0 + 3.0 * r.powi(4)).collect();
        let dc = cb.diff_coeffs(&cb.to_coeffs(&f));
        let df = cb.to_nodal(&dc);
        for (r, d) in cb.nodes.iter().zip(&df) {
            assert!((d - 12.0 * r.powi(3)).abs() < 1e-11);
        }
    }
}
