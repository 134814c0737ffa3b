//! Quadrature grids and forward/inverse spectral transforms for scalar
//! fields on the unit sphere and on the thin shell.
//!
//! The sphere grid is Gauss-Legendre in colatitude and equispaced in
//! longitude; together the weights realize the surface measure exactly for
//! band-limited integrands. Spherical harmonics are fully normalized
//! (orthonormal over the sphere) with the Condon-Shortley phase. The shell
//! grid adds Chebyshev-Gauss-Lobatto nodes on [1, 1+eps] so that the polar
//! change of variables int_Omega f dx = int_S2 int_1^{1+eps} f r^2 dr dH^2
//! is reproduced by a tensor rule.

use std::sync::Arc;

use num_complex::Complex64;

use crate::cheb::ChebBasis;
use crate::error::{Error, Result};
use crate::gauss::gauss_legendre;

pub const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Triangle index for (l, m) with 0 <= m <= l.
#[inline]
pub fn tri_idx(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

#[inline]
fn tri_len(lt: usize) -> usize {
    (lt + 1) * (lt + 2) / 2
}

/// Spectral coefficients of a real scalar field on the sphere.
///
/// Stores the full range |m| <= l; real fields keep the conjugate symmetry
/// c_{l,-m} = (-1)^m conj(c_{l,m}) as an enforced invariant.
#[derive(Debug, Clone)]
pub struct SphCoeffs {
    pub lmax: usize,
    pub data: Vec<Complex64>,
}

impl SphCoeffs {
    pub fn zeros(lmax: usize) -> Self {
        SphCoeffs {
            lmax,
            data: vec![Complex64::new(0.0, 0.0); (lmax + 1) * (lmax + 1)],
        }
    }

    #[inline]
    pub fn idx(l: usize, m: i64) -> usize {
        l * l + (m + l as i64) as usize
    }

    #[inline]
    pub fn get(&self, l: usize, m: i64) -> Complex64 {
        self.data[Self::idx(l, m)]
    }

    /// Set c_{l,m} and mirror the conjugate-symmetric partner, keeping the
    /// real-field invariant c_{l,-m} = (-1)^m conj(c_{l,m}).
    pub fn set(&mut self, l: usize, m: i64, v: Complex64) {
        self.data[Self::idx(l, m)] = v;
        if m != 0 {
            let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            self.data[Self::idx(l, -m)] = sign * v.conj();
        }
    }

    /// Sum of |c_lm|^2 over all (l, m); equals the squared L2 norm.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Max |c_lm| over a degree range, handy in tests.
    pub fn max_abs_in(&self, lrange: std::ops::RangeInclusive<usize>) -> f64 {
        let mut mx = 0.0f64;
        for l in lrange {
            if l > self.lmax {
                break;
            }
            for m in -(l as i64)..=(l as i64) {
                mx = mx.max(self.get(l, m).norm());
            }
        }
        mx
    }
}

/// Gauss-Legendre x equispaced-longitude quadrature grid with precomputed
/// normalized associated Legendre tables up to `table_lmax`.
#[derive(Debug)]
pub struct SphereGrid {
    pub lmax: usize,
    pub table_lmax: usize,
    pub nlat: usize,
    pub nlon: usize,
    /// Colatitude per ring.
    pub theta: Vec<f64>,
    /// sin(theta) per ring, strictly positive (poles excluded).
    pub sin_theta: Vec<f64>,
    /// Gauss-Legendre weight per ring (sums to 2).
    pub glw: Vec<f64>,
    /// Longitudes.
    pub phi: Vec<f64>,
    /// Full quadrature weight per node, sums to 4 pi.
    pub weights: Vec<f64>,
    /// Outward normal n(y) = y per node.
    pub normals: Vec<[f64; 3]>,
    /// Local frame vectors per node.
    pub e_theta: Vec<[f64; 3]>,
    pub e_phi: Vec<[f64; 3]>,
    plm: Vec<f64>,
    dplm: Vec<f64>,
    cosm: Vec<f64>,
    sinm: Vec<f64>,
}

impl SphereGrid {
    /// Build a grid for band limit `lmax` with 3/2-rule dealiasing margins.
    pub fn new(lmax: usize) -> Result<Arc<SphereGrid>> {
        if lmax < 2 {
            return Err(Error::invalid(format!("lmax must be >= 2, got {lmax}")));
        }
        // 3/2 rule plus margin: Cartesian components of tangent fields carry
        // degree lmax + 2, and cubic-type extraction integrals must stay
        // alias-free for the conserved low modes.
        let nlat = (3 * (lmax + 1)).div_ceil(2) + 2;
        let nlon = 3 * lmax + 8;
        let table_lmax = lmax + 2;

        let (x, glw) = gauss_legendre(nlat);
        let theta: Vec<f64> = x.iter().map(|&xi| xi.acos()).collect();
        let sin_theta: Vec<f64> = x.iter().map(|&xi| (1.0 - xi * xi).sqrt()).collect();
        let phi: Vec<f64> = (0..nlon)
            .map(|j| 2.0 * std::f64::consts::PI * j as f64 / nlon as f64)
            .collect();

        let wphi = 2.0 * std::f64::consts::PI / nlon as f64;
        let mut weights = Vec::with_capacity(nlat * nlon);
        let mut normals = Vec::with_capacity(nlat * nlon);
        let mut e_theta = Vec::with_capacity(nlat * nlon);
        let mut e_phi = Vec::with_capacity(nlat * nlon);
        for i in 0..nlat {
            let (st, ct) = (sin_theta[i], x[i]);
            for j in 0..nlon {
                let (sp, cp) = phi[j].sin_cos();
                weights.push(glw[i] * wphi);
                normals.push([st * cp, st * sp, ct]);
                e_theta.push([ct * cp, ct * sp, -st]);
                e_phi.push([-sp, cp, 0.0]);
            }
        }

        let ntri = tri_len(table_lmax);
        let mut plm = vec![0.0; nlat * ntri];
        let mut dplm = vec![0.0; nlat * ntri];
        for i in 0..nlat {
            legendre_tables(
                table_lmax,
                x[i],
                sin_theta[i],
                &mut plm[i * ntri..(i + 1) * ntri],
                &mut dplm[i * ntri..(i + 1) * ntri],
            );
        }

        let mut cosm = vec![0.0; (table_lmax + 1) * nlon];
        let mut sinm = vec![0.0; (table_lmax + 1) * nlon];
        for m in 0..=table_lmax {
            for j in 0..nlon {
                let a = m as f64 * phi[j];
                cosm[m * nlon + j] = a.cos();
                sinm[m * nlon + j] = a.sin();
            }
        }

        Ok(Arc::new(SphereGrid {
            lmax,
            table_lmax,
            nlat,
            nlon,
            theta,
            sin_theta,
            glw,
            phi,
            weights,
            normals,
            e_theta,
            e_phi,
            plm,
            dplm,
            cosm,
            sinm,
        }))
    }

    #[inline]
    pub fn nang(&self) -> usize {
        self.nlat * self.nlon
    }

    /// (theta, phi) of node `idx`.
    pub fn node_angles(&self, idx: usize) -> (f64, f64) {
        (self.theta[idx / self.nlon], self.phi[idx % self.nlon])
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.nang() {
            return Err(Error::shape(format!(
                "field has {len} values, grid has {} nodes",
                self.nang()
            )));
        }
        Ok(())
    }

    /// Surface integral of a nodal scalar field.
    pub fn quadrature(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f.len())?;
        Ok(f.iter().zip(&self.weights).map(|(v, w)| v * w).sum())
    }

    /// L2(S^2) inner product of two nodal scalar fields.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check_len(f.len())?;
        self.check_len(g.len())?;
        Ok(f.iter()
            .zip(g)
            .zip(&self.weights)
            .map(|((a, b), w)| a * b * w)
            .sum())
    }

    #[inline]
    pub fn plm_at(&self, ring: usize, l: usize, m: usize) -> f64 {
        self.plm[ring * tri_len(self.table_lmax) + tri_idx(l, m)]
    }

    #[inline]
    fn dplm_at(&self, ring: usize, l: usize, m: usize) -> f64 {
        self.dplm[ring * tri_len(self.table_lmax) + tri_idx(l, m)]
    }

    /// Ring-wise Fourier analysis: g_m(i) = (2 pi / nlon) sum_j f_ij e^{-i m phi_j}.
    fn phi_analysis(&self, f: &[f64], lt: usize) -> Vec<Complex64> {
        let (nlat, nlon) = (self.nlat, self.nlon);
        let wphi = 2.0 * std::f64::consts::PI / nlon as f64;
        let mut g = vec![Complex64::new(0.0, 0.0); nlat * (lt + 1)];
        for i in 0..nlat {
            let row = &f[i * nlon..(i + 1) * nlon];
            for m in 0..=lt {
                let (cm, sm) = (&self.cosm[m * nlon..], &self.sinm[m * nlon..]);
                let mut re = 0.0;
                let mut im = 0.0;
                for j in 0..nlon {
                    re += row[j] * cm[j];
                    im -= row[j] * sm[j];
                }
                g[i * (lt + 1) + m] = Complex64::new(re * wphi, im * wphi);
            }
        }
        g
    }

    /// Ring-wise synthesis of a real field from m >= 0 ring coefficients
    /// (the 2 pi / nlon factor of the analysis is NOT included here).
    fn phi_synthesis(&self, g: &[Complex64], lt: usize) -> Vec<f64> {
        let (nlat, nlon) = (self.nlat, self.nlon);
        let mut f = vec![0.0; nlat * nlon];
        for i in 0..nlat {
            for m in 0..=lt {
                let z = g[i * (lt + 1) + m];
                if z.re == 0.0 && z.im == 0.0 {
                    continue;
                }
                let kappa = if m == 0 { 1.0 } else { 2.0 };
                let (cm, sm) = (&self.cosm[m * nlon..], &self.sinm[m * nlon..]);
                let row = &mut f[i * nlon..(i + 1) * nlon];
                for j in 0..nlon {
                    row[j] += kappa * (z.re * cm[j] - z.im * sm[j]);
                }
            }
        }
        f
    }

    /// Forward scalar transform truncated at the grid band limit.
    pub fn sht_forward(&self, f: &[f64]) -> Result<SphCoeffs> {
        self.sht_forward_lt(f, self.lmax)
    }

    /// Forward scalar transform truncated at `lt` (lt <= table_lmax).
    pub fn sht_forward_lt(&self, f: &[f64], lt: usize) -> Result<SphCoeffs> {
        self.check_len(f.len())?;
        assert!(lt <= self.table_lmax);
        let g = self.phi_analysis(f, lt);
        let mut c = SphCoeffs::zeros(lt);
        for m in 0..=lt {
            for l in m..=lt {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..self.nlat {
                    acc += self.glw[i] * self.plm_at(i, l, m) * g[i * (lt + 1) + m];
                }
                c.set(l, m as i64, acc);
            }
        }
        Ok(c)
    }

    /// Inverse scalar transform (real synthesis).
    pub fn sht_inverse(&self, c: &SphCoeffs) -> Result<Vec<f64>> {
        let lt = c.lmax;
        if lt > self.table_lmax {
            return Err(Error::shape(format!(
                "coefficients go to degree {lt}, grid tables stop at {}",
                self.table_lmax
            )));
        }
        let mut g = vec![Complex64::new(0.0, 0.0); self.nlat * (lt + 1)];
        for i in 0..self.nlat {
            for m in 0..=lt {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in m..=lt {
                    acc += self.plm_at(i, l, m) * c.get(l, m as i64);
                }
                g[i * (lt + 1) + m] = acc;
            }
        }
        Ok(self.phi_synthesis(&g, lt))
    }

    /// Tangential gradient of a scalar given by coefficients, evaluated at
    /// the nodes in Cartesian components. Exact for resolved inputs.
    pub fn grad_coeffs(&self, c: &SphCoeffs) -> [Vec<f64>; 3] {
        let lt = c.lmax.min(self.table_lmax);
        let np = lt + 1;
        let mut gt = vec![Complex64::new(0.0, 0.0); self.nlat * np];
        let mut gp = vec![Complex64::new(0.0, 0.0); self.nlat * np];
        for i in 0..self.nlat {
            let ist = 1.0 / self.sin_theta[i];
            for m in 0..=lt {
                let mut at = Complex64::new(0.0, 0.0);
                let mut ap = Complex64::new(0.0, 0.0);
                for l in m..=lt {
                    let clm = c.get(l, m as i64);
                    at += self.dplm_at(i, l, m) * clm;
                    ap += self.plm_at(i, l, m) * clm;
                }
                gt[i * np + m] = at;
                gp[i * np + m] = Complex64::new(0.0, m as f64 * ist) * ap;
            }
        }
        let ft = self.phi_synthesis(&gt, lt);
        let fp = self.phi_synthesis(&gp, lt);
        let mut out = [
            vec![0.0; self.nang()],
            vec![0.0; self.nang()],
            vec![0.0; self.nang()],
        ];
        for idx in 0..self.nang() {
            for d in 0..3 {
                out[d][idx] = ft[idx] * self.e_theta[idx][d] + fp[idx] * self.e_phi[idx][d];
            }
        }
        out
    }

    /// Tangential gradient of a nodal scalar field (transforms at full
    /// table capacity first).
    pub fn grad_scalar(&self, f: &[f64]) -> Result<[Vec<f64>; 3]> {
        let c = self.sht_forward_lt(f, self.table_lmax)?;
        Ok(self.grad_coeffs(&c))
    }
}

/// Normalized associated Legendre values and theta-derivatives at one x.
///
/// q(l, m) are defined so that Y_lm = q_lm(theta) e^{i m phi} is orthonormal
/// over the sphere; the Condon-Shortley phase is included.
fn legendre_tables(lt: usize, x: f64, s: f64, q: &mut [f64], dq: &mut [f64]) {
    q[tri_idx(0, 0)] = (1.0 / FOUR_PI).sqrt();
    dq[tri_idx(0, 0)] = 0.0;
    for m in 1..=lt {
        let f = -((2.0 * m as f64 + 1.0) / (2.0 * m as f64)).sqrt();
        q[tri_idx(m, m)] = f * s * q[tri_idx(m - 1, m - 1)];
        dq[tri_idx(m, m)] = f * (x * q[tri_idx(m - 1, m - 1)] + s * dq[tri_idx(m - 1, m - 1)]);
    }
    for m in 0..lt {
        let f = (2.0 * m as f64 + 3.0).sqrt();
        q[tri_idx(m + 1, m)] = f * x * q[tri_idx(m, m)];
        dq[tri_idx(m + 1, m)] = f * (-s * q[tri_idx(m, m)] + x * dq[tri_idx(m, m)]);
    }
    for m in 0..=lt {
        for l in (m + 2)..=lt {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            q[tri_idx(l, m)] = a * (x * q[tri_idx(l - 1, m)] - b * q[tri_idx(l - 2, m)]);
            dq[tri_idx(l, m)] =
                a * (-s * q[tri_idx(l - 1, m)] + x * dq[tri_idx(l - 1, m)] - b * dq[tri_idx(l - 2, m)]);
        }
    }
}

/// Shell grid: sphere grid tensored with Chebyshev-Gauss-Lobatto radii.
#[derive(Debug)]
pub struct ShellGrid {
    pub base: Arc<SphereGrid>,
    pub eps: f64,
    pub nrad: usize,
    pub cheb: ChebBasis,
}

impl ShellGrid {
    pub fn new(base: Arc<SphereGrid>, eps: f64, nrad: usize) -> Result<Arc<ShellGrid>> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::invalid(format!("eps must lie in (0,1), got {eps}")));
        }
        if nrad < 4 {
            return Err(Error::invalid(format!("nrad must be >= 4, got {nrad}")));
        }
        let cheb = ChebBasis::new(nrad, 1.0, 1.0 + eps)?;
        Ok(Arc::new(ShellGrid {
            base,
            eps,
            nrad,
            cheb,
        }))
    }

    #[inline]
    pub fn rnodes(&self) -> &[f64] {
        &self.cheb.nodes
    }

    #[inline]
    pub fn rweights(&self) -> &[f64] {
        &self.cheb.weights
    }

    #[inline]
    pub fn nval(&self) -> usize {
        self.nrad * self.base.nang()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.nval() {
            return Err(Error::shape(format!(
                "volume field has {len} values, grid has {}",
                self.nval()
            )));
        }
        Ok(())
    }

    /// Volume integral over the shell using the polar change of variables.
    pub fn quadrature(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f.len())?;
        let nang = self.base.nang();
        let mut total = 0.0;
        for (k, (&rk, &wk)) in self.rnodes().iter().zip(self.rweights()).enumerate() {
            let slab = &f[k * nang..(k + 1) * nang];
            let ang: f64 = slab
                .iter()
                .zip(&self.base.weights)
                .map(|(v, w)| v * w)
                .sum();
            total += wk * rk * rk * ang;
        }
        Ok(total)
    }

    /// L2(Omega_eps) inner product of nodal volume scalars.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check_len(f.len())?;
        self.check_len(g.len())?;
        let nang = self.base.nang();
        let mut total = 0.0;
        for (k, (&rk, &wk)) in self.rnodes().iter().zip(self.rweights()).enumerate() {
            let a = &f[k * nang..(k + 1) * nang];
            let b = &g[k * nang..(k + 1) * nang];
            let ang: f64 = a
                .iter()
                .zip(b)
                .zip(&self.base.weights)
                .map(|((x, y), w)| x * y * w)
                .sum();
            total += wk * rk * rk * ang;
        }
        Ok(total)
    }
}

/// Spectral representation of a scalar on the shell: spherical harmonics in
/// the angles times Chebyshev in radius.
#[derive(Debug, Clone)]
pub struct RadialSphCoeffs {
    pub lmax: usize,
    pub nrad: usize,
    /// data[(l(l+1)+m) * nrad + k]
    pub data: Vec<Complex64>,
}

impl RadialSphCoeffs {
    pub fn zeros(lmax: usize, nrad: usize) -> Self {
        RadialSphCoeffs {
            lmax,
            nrad,
            data: vec![Complex64::new(0.0, 0.0); (lmax + 1) * (lmax + 1) * nrad],
        }
    }

    #[inline]
    pub fn slice(&self, l: usize, m: i64) -> &[Complex64] {
        let base = SphCoeffs::idx(l, m) * self.nrad;
        &self.data[base..base + self.nrad]
    }

    #[inline]
    pub fn slice_mut(&mut self, l: usize, m: i64) -> &mut [Complex64] {
        let base = SphCoeffs::idx(l, m) * self.nrad;
        &mut self.data[base..base + self.nrad]
    }
}

/// Forward transform of a nodal volume scalar to harmonic x Chebyshev form.
pub fn shell_forward(grid: &ShellGrid, f: &[f64]) -> Result<RadialSphCoeffs> {
    grid.check_len(f.len())?;
    let nang = grid.base.nang();
    let lmax = grid.base.lmax;
    let mut per_radius: Vec<SphCoeffs> = Vec::with_capacity(grid.nrad);
    for k in 0..grid.nrad {
        per_radius.push(grid.base.sht_forward(&f[k * nang..(k + 1) * nang])?);
    }
    let mut out = RadialSphCoeffs::zeros(lmax, grid.nrad);
    let mut re = vec![0.0; grid.nrad];
    let mut im = vec![0.0; grid.nrad];
    for l in 0..=lmax {
        for m in -(l as i64)..=(l as i64) {
            for k in 0..grid.nrad {
                let z = per_radius[k].get(l, m);
                re[k] = z.re;
                im[k] = z.im;
            }
            let cre = grid.cheb.to_coeffs(&re);
            let cim = grid.cheb.to_coeffs(&im);
            let dst = out.slice_mut(l, m);
            for k in 0..grid.nrad {
                dst[k] = Complex64::new(cre[k], cim[k]);
            }
        }
    }
    Ok(out)
}

/// Inverse of [`shell_forward`].
pub fn shell_inverse(grid: &ShellGrid, c: &RadialSphCoeffs) -> Result<Vec<f64>> {
    if c.lmax != grid.base.lmax || c.nrad != grid.nrad {
        return Err(Error::shape("coefficient shape does not match shell grid"));
    }
    let nang = grid.base.nang();
    let mut out = vec![0.0; grid.nval()];
    let mut per_radius: Vec<SphCoeffs> = (0..grid.nrad)
        .map(|_| SphCoeffs::zeros(c.lmax))
        .collect();
    let mut re = vec![0.0; grid.nrad];
    let mut im = vec![0.0; grid.nrad];
    for l in 0..=c.lmax {
        for m in -(l as i64)..=(l as i64) {
            let src = c.slice(l, m);
            for k in 0..grid.nrad {
                re[k] = src[k].re;
                im[k] = src[k].im;
            }
            let nre = grid.cheb.to_nodal(&re);
            let nim = grid.cheb.to_nodal(&im);
            for k in 0..grid.nrad {
                per_radius[k].data[SphCoeffs::idx(l, m)] = Complex64::new(nre[k], nim[k]);
            }
        }
    }
    for k in 0..grid.nrad {
        let nodal = grid.base.sht_inverse(&per_radius[k])?;
        out[k * nang..(k + 1) * nang].copy_from_slice(&nodal);
    }
    Ok(out)
}

/// Spectral radial derivative d/dr in harmonic x Chebyshev space.
pub fn chebyshev_diff(grid: &ShellGrid, c: &RadialSphCoeffs) -> RadialSphCoeffs {
    let mut out = RadialSphCoeffs::zeros(c.lmax, c.nrad);
    let mut re = vec![0.0; c.nrad];
    let mut im = vec![0.0; c.nrad];
    for l in 0..=c.lmax {
        for m in -(l as i64)..=(l as i64) {
            let src = c.slice(l, m);
            for k in 0..c.nrad {
                re[k] = src[k].re;
                im[k] = src[k].im;
            }
            let dre = grid.cheb.diff_coeffs(&re);
            let dim = grid.cheb.diff_coeffs(&im);
            let dst = out.slice_mut(l, m);
            for k in 0..c.nrad {
                dst[k] = Complex64::new(dre[k], dim[k]);
            }
        }
    }
    out
}


#[cfg(test)]
mod symmetry_tests {
    use super::*;

    #[test]
    fn forward_transform_keeps_conjugate_symmetry() {
        // real nodal fields produce c_{l,-m} = (-1)^m conj(c_{l,m})
        let g = SphereGrid::new(6).unwrap();
        let f: Vec<f64> = (0..g.nang())
            .map(|i| {
                let n = g.normals[i];
                (3.0 * n[0] + 1.0).sin() * (2.0 * n[2]).cos() + 0.3 * n[1]
            })
            .collect();
        let c = g.sht_forward(&f).unwrap();
        for l in 0..=g.lmax {
            for m in 1..=(l as i64) {
                let plus = c.get(l, m);
                let minus = c.get(l, -m);
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let expect = sign * plus.conj();
                assert!((minus - expect).norm() < 1e-14, "l={l} m={m}");
            }
        }
    }
}
