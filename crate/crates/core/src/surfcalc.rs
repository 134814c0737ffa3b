//! Tangential differential calculus on the sphere and full-gradient
//! calculus on the shell.
//!
//! Everything is extrinsic: tangent fields are stored in Cartesian
//! components at the grid nodes, the projection P = I - n (x) n is applied
//! pointwise, and angular derivatives are spectral. The surface gradient of
//! a vector field is the matrix (D_i v_j), its trace the surface
//! divergence, and P (grad v)_S P the surface strain.

use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{ShellGrid, SphCoeffs, SphereGrid};

pub type Mat3 = [[f64; 3]; 3];
pub type Vec3 = [f64; 3];

// ---------------------------------------------------------------------------
// small pointwise matrix/vector helpers

#[inline]
pub fn dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross3(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn mat_mul3(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    c
}

#[inline]
pub fn mat_sym3(a: &Mat3) -> Mat3 {
    let mut s = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            s[i][j] = 0.5 * (a[i][j] + a[j][i]);
        }
    }
    s
}

#[inline]
pub fn mat_frob_inner(a: &Mat3, b: &Mat3) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

#[inline]
pub fn projector(n: &Vec3) -> Mat3 {
    let mut p = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            p[i][j] = if i == j { 1.0 } else { 0.0 };
            p[i][j] -= n[i] * n[j];
        }
    }
    p
}

#[inline]
pub fn mat_vec3(a: &Mat3, x: &Vec3) -> Vec3 {
    [
        a[0][0] * x[0] + a[0][1] * x[1] + a[0][2] * x[2],
        a[1][0] * x[0] + a[1][1] * x[1] + a[1][2] * x[2],
        a[2][0] * x[0] + a[2][1] * x[1] + a[2][2] * x[2],
    ]
}

// ---------------------------------------------------------------------------
// field containers

/// Tangential vector field on the sphere (nodal Cartesian components).
#[derive(Debug, Clone)]
pub struct TangentField {
    pub comps: [Vec<f64>; 3],
}

impl TangentField {
    pub fn zeros(grid: &SphereGrid) -> Self {
        let n = grid.nang();
        TangentField {
            comps: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        }
    }

    pub fn len(&self) -> usize {
        self.comps[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.comps[0].is_empty()
    }

    #[inline]
    pub fn at(&self, idx: usize) -> Vec3 {
        [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]]
    }

    #[inline]
    pub fn set_at(&mut self, idx: usize, v: Vec3) {
        self.comps[0][idx] = v[0];
        self.comps[1][idx] = v[1];
        self.comps[2][idx] = v[2];
    }

    pub fn axpy(&mut self, alpha: f64, other: &TangentField) {
        for d in 0..3 {
            for (a, b) in self.comps[d].iter_mut().zip(&other.comps[d]) {
                *a += alpha * b;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for d in 0..3 {
            for a in self.comps[d].iter_mut() {
                *a *= alpha;
            }
        }
    }

    /// Max |v . n| over the nodes; tangency residual.
    pub fn normal_residual(&self, grid: &SphereGrid) -> f64 {
        let mut mx = 0.0f64;
        for idx in 0..self.len() {
            mx = mx.max(dot3(&self.at(idx), &grid.normals[idx]).abs());
        }
        mx
    }
}

/// L2 inner product of two (not necessarily tangential) nodal vector fields.
pub fn inner_sphere(grid: &SphereGrid, a: &TangentField, b: &TangentField) -> Result<f64> {
    let mut s = 0.0;
    for d in 0..3 {
        s += grid.inner(&a.comps[d], &b.comps[d])?;
    }
    Ok(s)
}

pub fn l2_norm_sphere(grid: &SphereGrid, a: &TangentField) -> Result<f64> {
    Ok(inner_sphere(grid, a, a)?.max(0.0).sqrt())
}

/// H1 norm: ||v||^2 + ||grad_S2 v||^2 (Frobenius norm of the matrix field).
pub fn h1_norm_sphere(grid: &SphereGrid, a: &TangentField) -> Result<f64> {
    let g = tangential_gradient_vec(grid, a)?;
    let l2 = inner_sphere(grid, a, a)?;
    let gr = g.norm_sq(grid)?;
    Ok((l2 + gr).max(0.0).sqrt())
}

/// 3x3 matrix field on the sphere nodes.
#[derive(Debug, Clone)]
pub struct SurfaceMatrixField {
    pub vals: Vec<Mat3>,
}

impl SurfaceMatrixField {
    pub fn zeros(grid: &SphereGrid) -> Self {
        SurfaceMatrixField {
            vals: vec![[[0.0; 3]; 3]; grid.nang()],
        }
    }

    pub fn trace_field(&self) -> Vec<f64> {
        self.vals
            .iter()
            .map(|m| m[0][0] + m[1][1] + m[2][2])
            .collect()
    }

    /// Integral of the squared Frobenius norm.
    pub fn norm_sq(&self, grid: &SphereGrid) -> Result<f64> {
        let f: Vec<f64> = self.vals.iter().map(|m| mat_frob_inner(m, m)).collect();
        grid.quadrature(&f)
    }

    pub fn inner(&self, grid: &SphereGrid, other: &SurfaceMatrixField) -> Result<f64> {
        let f: Vec<f64> = self
            .vals
            .iter()
            .zip(&other.vals)
            .map(|(a, b)| mat_frob_inner(a, b))
            .collect();
        grid.quadrature(&f)
    }
}

/// Vector field on the shell (nodal Cartesian components, radius-major).
#[derive(Debug, Clone)]
pub struct VolumeField {
    pub comps: [Vec<f64>; 3],
    pub nrad: usize,
    pub nang: usize,
}

impl VolumeField {
    pub fn zeros(grid: &ShellGrid) -> Self {
        let n = grid.nval();
        VolumeField {
            comps: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            nrad: grid.nrad,
            nang: grid.base.nang(),
        }
    }

    #[inline]
    pub fn at(&self, k: usize, i: usize) -> Vec3 {
        let idx = k * self.nang + i;
        [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]]
    }

    #[inline]
    pub fn set_at(&mut self, k: usize, i: usize, v: Vec3) {
        let idx = k * self.nang + i;
        self.comps[0][idx] = v[0];
        self.comps[1][idx] = v[1];
        self.comps[2][idx] = v[2];
    }

    pub fn axpy(&mut self, alpha: f64, other: &VolumeField) {
        for d in 0..3 {
            for (a, b) in self.comps[d].iter_mut().zip(&other.comps[d]) {
                *a += alpha * b;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for d in 0..3 {
            for a in self.comps[d].iter_mut() {
                *a *= alpha;
            }
        }
    }

    /// Angular slab of one component at radial index k.
    pub fn slab(&self, d: usize, k: usize) -> &[f64] {
        &self.comps[d][k * self.nang..(k + 1) * self.nang]
    }
}

pub fn inner_shell(grid: &ShellGrid, a: &VolumeField, b: &VolumeField) -> Result<f64> {
    let mut s = 0.0;
    for d in 0..3 {
        s += grid.inner(&a.comps[d], &b.comps[d])?;
    }
    Ok(s)
}

pub fn l2_norm_shell(grid: &ShellGrid, a: &VolumeField) -> Result<f64> {
    Ok(inner_shell(grid, a, a)?.max(0.0).sqrt())
}

pub fn h1_norm_shell(grid: &ShellGrid, a: &VolumeField) -> Result<f64> {
    let g = full_gradient_shell(grid, a)?;
    let l2 = inner_shell(grid, a, a)?;
    Ok((l2 + g.norm_sq(grid)?).max(0.0).sqrt())
}

/// 3x3 matrix field on the shell nodes.
#[derive(Debug, Clone)]
pub struct VolumeMatrixField {
    pub vals: Vec<Mat3>,
    pub nrad: usize,
    pub nang: usize,
}

impl VolumeMatrixField {
    #[inline]
    pub fn at(&self, k: usize, i: usize) -> &Mat3 {
        &self.vals[k * self.nang + i]
    }

    pub fn norm_sq(&self, grid: &ShellGrid) -> Result<f64> {
        let f: Vec<f64> = self.vals.iter().map(|m| mat_frob_inner(m, m)).collect();
        grid.quadrature(&f)
    }

    pub fn inner(&self, grid: &ShellGrid, other: &VolumeMatrixField) -> Result<f64> {
        let f: Vec<f64> = self
            .vals
            .iter()
            .zip(&other.vals)
            .map(|(a, b)| mat_frob_inner(a, b))
            .collect();
        grid.quadrature(&f)
    }
}

/// Rigid rotation field r_a(x) = a x x; strain-free on both domains.
#[derive(Debug, Clone, Copy)]
pub struct RotationField {
    pub axis: Vec3,
}

impl RotationField {
    pub fn new(axis: Vec3) -> Self {
        RotationField { axis }
    }

    /// Restriction to the unit sphere.
    pub fn on_sphere(&self, grid: &SphereGrid) -> TangentField {
        let mut v = TangentField::zeros(grid);
        for (idx, n) in grid.normals.iter().enumerate() {
            v.set_at(idx, cross3(&self.axis, n));
        }
        v
    }

    /// Restriction to the shell.
    pub fn on_shell(&self, grid: &ShellGrid) -> VolumeField {
        let mut u = VolumeField::zeros(grid);
        for (k, &r) in grid.rnodes().iter().enumerate() {
            for (i, n) in grid.base.normals.iter().enumerate() {
                let x = [r * n[0], r * n[1], r * n[2]];
                u.set_at(k, i, cross3(&self.axis, &x));
            }
        }
        u
    }
}

// ---------------------------------------------------------------------------
// sphere operators

fn check_finite(f: &[f64]) -> Result<()> {
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::DataError("non-finite value in input field".into()));
    }
    Ok(())
}

/// Tangential gradient of a scalar: P grad of any extension, spectral.
pub fn tangential_gradient(grid: &SphereGrid, eta: &[f64]) -> Result<TangentField> {
    check_finite(eta)?;
    let comps = grid.grad_scalar(eta)?;
    Ok(TangentField { comps })
}

/// Tangential gradient matrix (D_i v_j) of a 3-component field.
pub fn tangential_gradient_vec(grid: &SphereGrid, v: &TangentField) -> Result<SurfaceMatrixField> {
    let mut out = SurfaceMatrixField::zeros(grid);
    for j in 0..3 {
        check_finite(&v.comps[j])?;
        let gj = grid.grad_scalar(&v.comps[j])?;
        for idx in 0..grid.nang() {
            for i in 0..3 {
                out.vals[idx][i][j] = gj[i][idx];
            }
        }
    }
    Ok(out)
}

/// Surface divergence div_S2 v = tr (D_i v_j) for any 3-component field.
pub fn surface_divergence(grid: &SphereGrid, v: &TangentField) -> Result<Vec<f64>> {
    let mut div = vec![0.0; grid.nang()];
    for j in 0..3 {
        check_finite(&v.comps[j])?;
        let gj = grid.grad_scalar(&v.comps[j])?;
        for idx in 0..grid.nang() {
            div[idx] += gj[j][idx];
        }
    }
    Ok(div)
}

/// Surface strain D_S2(v) = P (grad_S2 v)_S P; symmetric and tangential.
pub fn surface_strain(grid: &SphereGrid, v: &TangentField) -> Result<SurfaceMatrixField> {
    let g = tangential_gradient_vec(grid, v)?;
    let mut out = SurfaceMatrixField::zeros(grid);
    for idx in 0..grid.nang() {
        let p = projector(&grid.normals[idx]);
        let s = mat_sym3(&g.vals[idx]);
        out.vals[idx] = mat_mul3(&p, &mat_mul3(&s, &p));
    }
    Ok(out)
}

/// Covariant derivative of v along w: P [(w . grad_S2) v].
///
/// Both fields must be tangential; the Gauss formula
/// (w . grad_S2) v = nabla_w v - (v . w) n then holds pointwise.
pub fn covariant_derivative(
    grid: &SphereGrid,
    w: &TangentField,
    v: &TangentField,
) -> Result<TangentField> {
    let tol = 1e-8;
    if w.normal_residual(grid) > tol || v.normal_residual(grid) > tol {
        return Err(Error::InvariantViolation(
            "covariant derivative needs tangential inputs".into(),
        ));
    }
    let mut out = TangentField::zeros(grid);
    let mut dirder = [vec![0.0; grid.nang()], vec![0.0; grid.nang()], vec![0.0; grid.nang()]];
    for j in 0..3 {
        let gj = grid.grad_scalar(&v.comps[j])?;
        for idx in 0..grid.nang() {
            let wv = w.at(idx);
            dirder[j][idx] = wv[0] * gj[0][idx] + wv[1] * gj[1][idx] + wv[2] * gj[2][idx];
        }
    }
    for idx in 0..grid.nang() {
        let n = grid.normals[idx];
        let d = [dirder[0][idx], dirder[1][idx], dirder[2][idx]];
        let dn = dot3(&d, &n);
        out.set_at(idx, [d[0] - dn * n[0], d[1] - dn * n[1], d[2] - dn * n[2]]);
    }
    Ok(out)
}

/// Scalar vorticity curl_S2 v = -div_S2 (n x v).
pub fn surface_curl(grid: &SphereGrid, v: &TangentField) -> Result<Vec<f64>> {
    let mut nxv = TangentField::zeros(grid);
    for idx in 0..grid.nang() {
        nxv.set_at(idx, cross3(&grid.normals[idx], &v.at(idx)));
    }
    let mut d = surface_divergence(grid, &nxv)?;
    for v in d.iter_mut() {
        *v = -*v;
    }
    Ok(d)
}

/// Velocity from a streamfunction: v = n x grad_S2 psi (solenoidal).
pub fn stream_velocity(grid: &SphereGrid, psi: &SphCoeffs) -> TangentField {
    let g = grid.grad_coeffs(psi);
    let mut v = TangentField::zeros(grid);
    for idx in 0..grid.nang() {
        let gv = [g[0][idx], g[1][idx], g[2][idx]];
        v.set_at(idx, cross3(&grid.normals[idx], &gv));
    }
    v
}

/// Tangential gradient field from potential coefficients: grad_S2 chi.
pub fn potential_velocity(grid: &SphereGrid, chi: &SphCoeffs) -> TangentField {
    let g = grid.grad_coeffs(chi);
    TangentField { comps: g }
}

/// Solve the surface Poisson problem Lap_S2 eta = rhs with zero mean,
/// diagonally in harmonic space.
pub fn poisson_solve(grid: &SphereGrid, rhs: &[f64]) -> Result<SphCoeffs> {
    let mut c = grid.sht_forward_lt(rhs, grid.table_lmax)?;
    c.data[0] = num_complex::Complex64::new(0.0, 0.0);
    for l in 1..=c.lmax {
        let lam = -(l as f64) * (l as f64 + 1.0);
        for m in -(l as i64)..=(l as i64) {
            let v = c.get(l, m) / lam;
            c.data[SphCoeffs::idx(l, m)] = v;
        }
    }
    Ok(c)
}

/// Helmholtz-Leray projection on tangential fields: v - grad_S2 eta where
/// Lap eta = div v with zero mean. Idempotent, orthogonal, annihilates
/// pure surface gradients.
pub fn leray_project_sphere(grid: &SphereGrid, v: &TangentField) -> Result<TangentField> {
    let div = surface_divergence(grid, v)?;
    let eta = poisson_solve(grid, &div)?;
    let g = grid.grad_coeffs(&eta);
    let mut out = v.clone();
    for d in 0..3 {
        for (a, b) in out.comps[d].iter_mut().zip(&g[d]) {
            *a -= b;
        }
    }
    Ok(out)
}

/// Vorticity coefficients of a tangential field (l = 0 mode is zero).
pub fn velocity_to_vorticity(grid: &SphereGrid, v: &TangentField) -> Result<SphCoeffs> {
    let curl = surface_curl(grid, v)?;
    let mut c = grid.sht_forward(&curl)?;
    c.data[0] = num_complex::Complex64::new(0.0, 0.0);
    Ok(c)
}

/// Solenoidal velocity from vorticity coefficients: psi = Lap^{-1} omega,
/// v = n x grad psi.
pub fn vorticity_to_velocity(grid: &SphereGrid, omega: &SphCoeffs) -> TangentField {
    let mut psi = SphCoeffs::zeros(omega.lmax);
    for l in 1..=omega.lmax {
        let lam = -(l as f64) * (l as f64 + 1.0);
        for m in -(l as i64)..=(l as i64) {
            psi.data[SphCoeffs::idx(l, m)] = omega.get(l, m) / lam;
        }
    }
    stream_velocity(grid, &psi)
}

// ---------------------------------------------------------------------------
// shell operators

/// Full Cartesian gradient (d_i u_j) of a volume vector field, assembled
/// from the spectral radial derivative and the per-radius surface gradient
/// via grad f = n d_r f + (1/r) grad_S2 f.
pub fn full_gradient_shell(grid: &ShellGrid, u: &VolumeField) -> Result<VolumeMatrixField> {
    let nang = grid.base.nang();
    if u.nrad != grid.nrad || u.nang != nang {
        return Err(Error::shape("volume field does not match shell grid"));
    }
    let nrad = grid.nrad;
    let mut out = VolumeMatrixField {
        vals: vec![[[0.0; 3]; 3]; grid.nval()],
        nrad,
        nang,
    };
    let dr = &grid.cheb.dmat;
    let mut profile = vec![0.0; nrad];
    for j in 0..3 {
        // radial derivative at every node
        let mut du_dr = vec![0.0; grid.nval()];
        for i in 0..nang {
            for k in 0..nrad {
                profile[k] = u.comps[j][k * nang + i];
            }
            let d = dr.matvec(&profile);
            for k in 0..nrad {
                du_dr[k * nang + i] = d[k];
            }
        }
        // angular gradient per radius
        for k in 0..nrad {
            let slab = &u.comps[j][k * nang..(k + 1) * nang];
            let g = grid.base.grad_scalar(slab)?;
            let rinv = 1.0 / grid.rnodes()[k];
            for idx in 0..nang {
                let n = grid.base.normals[idx];
                for i in 0..3 {
                    out.vals[k * nang + idx][i][j] =
                        n[i] * du_dr[k * nang + idx] + rinv * g[i][idx];
                }
            }
        }
    }
    Ok(out)
}

/// Symmetric part of the full gradient: the strain rate tensor D(u).
pub fn strain_shell(grid: &ShellGrid, u: &VolumeField) -> Result<VolumeMatrixField> {
    let mut g = full_gradient_shell(grid, u)?;
    for m in g.vals.iter_mut() {
        *m = mat_sym3(m);
    }
    Ok(g)
}

/// Divergence of a volume vector field (trace of the full gradient).
pub fn divergence_shell(grid: &ShellGrid, u: &VolumeField) -> Result<Vec<f64>> {
    let g = full_gradient_shell(grid, u)?;
    Ok(g.vals.iter().map(|m| m[0][0] + m[1][1] + m[2][2]).collect())
}

/// Cartesian gradient of a volume scalar: n d_r f + (1/r) grad_S2 f.
pub fn scalar_gradient_shell(grid: &ShellGrid, f: &[f64]) -> Result<VolumeField> {
    let nang = grid.base.nang();
    if f.len() != grid.nval() {
        return Err(Error::shape("volume scalar does not match shell grid"));
    }
    let mut out = VolumeField::zeros(grid);
    let dr = &grid.cheb.dmat;
    let mut profile = vec![0.0; grid.nrad];
    let mut df_dr = vec![0.0; grid.nval()];
    for i in 0..nang {
        for k in 0..grid.nrad {
            profile[k] = f[k * nang + i];
        }
        let d = dr.matvec(&profile);
        for k in 0..grid.nrad {
            df_dr[k * nang + i] = d[k];
        }
    }
    for k in 0..grid.nrad {
        let slab = &f[k * nang..(k + 1) * nang];
        let g = grid.base.grad_scalar(slab)?;
        let rinv = 1.0 / grid.rnodes()[k];
        for i in 0..nang {
            let n = grid.base.normals[i];
            let dfr = df_dr[k * nang + i];
            out.set_at(
                k,
                i,
                [
                    n[0] * dfr + rinv * g[0][i],
                    n[1] * dfr + rinv * g[1][i],
                    n[2] * dfr + rinv * g[2][i],
                ],
            );
        }
    }
    Ok(out)
}

/// Radial derivative field (n-bar . grad) u, one Cartesian component each.
pub fn normal_derivative_shell(grid: &ShellGrid, u: &VolumeField) -> Result<VolumeField> {
    let nang = grid.base.nang();
    if u.nrad != grid.nrad || u.nang != nang {
        return Err(Error::shape("volume field does not match shell grid"));
    }
    let mut out = VolumeField::zeros(grid);
    let dr = &grid.cheb.dmat;
    let mut profile = vec![0.0; grid.nrad];
    for j in 0..3 {
        for i in 0..nang {
            for k in 0..grid.nrad {
                profile[k] = u.comps[j][k * nang + i];
            }
            let d = dr.matvec(&profile);
            for k in 0..grid.nrad {
                out.comps[j][k * nang + i] = d[k];
            }
        }
    }
    Ok(out)
}

/// Componentwise vector Laplacian on the shell:
/// Lap f = d_rr f + (2/r) d_r f + (1/r^2) Lap_S2 f per Cartesian component.
pub fn vector_laplacian_shell(grid: &ShellGrid, u: &VolumeField) -> Result<VolumeField> {
    let nang = grid.base.nang();
    if u.nrad != grid.nrad || u.nang != nang {
        return Err(Error::shape("volume field does not match shell grid"));
    }
    let sphere = &grid.base;
    let lt = sphere.table_lmax;
    let mut out = VolumeField::zeros(grid);
    let dr = &grid.cheb.dmat;
    let mut profile = vec![0.0; grid.nrad];
    for d in 0..3 {
        // radial part
        for i in 0..nang {
            for k in 0..grid.nrad {
                profile[k] = u.comps[d][k * nang + i];
            }
            let d1 = dr.matvec(&profile);
            let d2 = dr.matvec(&d1);
            for k in 0..grid.nrad {
                let r = grid.rnodes()[k];
                out.comps[d][k * nang + i] = d2[k] + 2.0 / r * d1[k];
            }
        }
        // angular part
        for k in 0..grid.nrad {
            let slab = &u.comps[d][k * nang..(k + 1) * nang];
            let mut c = sphere.sht_forward_lt(slab, lt)?;
            for l in 0..=lt {
                let lam = -(l as f64) * (l as f64 + 1.0);
                for m in -(l as i64)..=(l as i64) {
                    let idx = crate::grid::SphCoeffs::idx(l, m);
                    c.data[idx] *= lam;
                }
            }
            let lap_ang = sphere.sht_inverse(&c)?;
            let r2inv = 1.0 / (grid.rnodes()[k] * grid.rnodes()[k]);
            for i in 0..nang {
                out.comps[d][k * nang + i] += r2inv * lap_ang[i];
            }
        }
    }
    Ok(out)
}

/// Pointwise advection (u . grad) w from the full gradient of w.
pub fn advection_shell(grid: &ShellGrid, u: &VolumeField, w: &VolumeField) -> Result<VolumeField> {
    let gw = full_gradient_shell(grid, w)?;
    let nang = grid.base.nang();
    let mut out = VolumeField::zeros(grid);
    for k in 0..grid.nrad {
        for i in 0..nang {
            let uv = u.at(k, i);
            let m = gw.at(k, i);
            out.set_at(
                k,
                i,
                [
                    uv[0] * m[0][0] + uv[1] * m[1][0] + uv[2] * m[2][0],
                    uv[0] * m[0][1] + uv[1] * m[1][1] + uv[2] * m[2][1],
                    uv[0] * m[0][2] + uv[1] * m[1][2] + uv[2] * m[2][2],
                ],
            );
        }
    }
    Ok(out)
}

/// Curl of a volume field from its full gradient.
pub fn curl_shell(grid: &ShellGrid, u: &VolumeField) -> Result<VolumeField> {
    let g = full_gradient_shell(grid, u)?;
    let nang = grid.base.nang();
    let mut out = VolumeField::zeros(grid);
    for k in 0..grid.nrad {
        for i in 0..nang {
            let m = g.at(k, i);
            // (curl u)_i = eps_ijk d_j u_k with (grad)_jk = d_j u_k
            out.set_at(
                k,
                i,
                [m[1][2] - m[2][1], m[2][0] - m[0][2], m[0][1] - m[1][0]],
            );
        }
    }
    Ok(out)
}

/// Max |u . n_eps| over the two boundary spheres.
pub fn boundary_normal_residual(grid: &ShellGrid, u: &VolumeField) -> f64 {
    let nang = grid.base.nang();
    let mut mx = 0.0f64;
    for &k in &[0usize, grid.nrad - 1] {
        for i in 0..nang {
            mx = mx.max(dot3(&u.at(k, i), &grid.base.normals[i]).abs());
        }
    }
    mx
}

/// Max |P D(u) n| over the two boundary spheres (tangential stress).
pub fn boundary_stress_residual(grid: &ShellGrid, u: &VolumeField) -> Result<f64> {
    let d = strain_shell(grid, u)?;
    let nang = grid.base.nang();
    let mut mx = 0.0f64;
    for &k in &[0usize, grid.nrad - 1] {
        for i in 0..nang {
            let n = grid.base.normals[i];
            let dn = mat_vec3(d.at(k, i), &n);
            let dn_dot_n = dot3(&dn, &n);
            let t = [
                dn[0] - dn_dot_n * n[0],
                dn[1] - dn_dot_n * n[1],
                dn[2] - dn_dot_n * n[2],
            ];
            mx = mx.max(dot3(&t, &t).sqrt());
        }
    }
    Ok(mx)
}

// ---------------------------------------------------------------------------
// random field generation (probes, tests)

/// Random real band-limited coefficients with unit-scale entries.
pub fn random_coeffs(lmax: usize, rng: &mut StdRng) -> SphCoeffs {
    let mut c = SphCoeffs::zeros(lmax);
    for l in 0..=lmax {
        for m in 0..=(l as i64) {
            let v = if m == 0 {
                num_complex::Complex64::new(rng.gen_range(-1.0..1.0), 0.0)
            } else {
                num_complex::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            };
            c.set(l, m, v);
        }
    }
    c
}

/// Random tangential field: stream + potential parts from random scalars.
pub fn random_tangent_field(grid: &SphereGrid, rng: &mut StdRng) -> TangentField {
    let psi = random_coeffs(grid.lmax, rng);
    let chi = random_coeffs(grid.lmax, rng);
    let mut v = stream_velocity(grid, &psi);
    let g = potential_velocity(grid, &chi);
    v.axpy(1.0, &g);
    v
}

/// Random scalar field, band-limited at the grid's lmax.
pub fn random_scalar_field(grid: &SphereGrid, rng: &mut StdRng) -> Vec<f64> {
    let c = random_coeffs(grid.lmax, rng);
    grid.sht_inverse(&c).expect("grid-sized synthesis")
}

/// Random volume field with u . n_eps = 0 on both boundary spheres:
/// a random smooth field minus a radially blended normal part.
pub fn random_slip_volume_field(grid: &ShellGrid, rng: &mut StdRng) -> VolumeField {
    let nang = grid.base.nang();
    let mut w = VolumeField::zeros(grid);
    for d in 0..3 {
        let a = random_scalar_field(&grid.base, rng);
        let b = random_scalar_field(&grid.base, rng);
        let c0 = rng.gen_range(-1.0..1.0);
        let c1 = rng.gen_range(-1.0..1.0);
        for (k, &r) in grid.rnodes().iter().enumerate() {
            // radial profile normalized to the shell thickness
            let s = (r - 1.0) / grid.eps;
            let pr0 = 1.0 + c0 * s;
            let pr1 = c1 * s * (1.0 - s);
            for i in 0..nang {
                w.comps[d][k * nang + i] = pr0 * a[i] + pr1 * b[i];
            }
        }
    }
    // subtract beta(r) (w . n) n with beta = 1 at both boundaries
    let gamma: f64 = rng.gen_range(0.0..1.0);
    let mut u = w.clone();
    for (k, &r) in grid.rnodes().iter().enumerate() {
        let beta = 1.0 - gamma * (r - 1.0) * (1.0 + grid.eps - r) * 4.0 / (grid.eps * grid.eps);
        for i in 0..nang {
            let n = grid.base.normals[i];
            let wv = w.at(k, i);
            let wn = dot3(&wv, &n);
            u.set_at(
                k,
                i,
                [
                    wv[0] - beta * wn * n[0],
                    wv[1] - beta * wn * n[1],
                    wv[2] - beta * wn * n[2],
                ],
            );
        }
    }
    u
}

/// Remove the L2(S2) projections onto the three rotation fields.
pub fn deflate_rotations_sphere(grid: &SphereGrid, v: &mut TangentField) -> Result<()> {
    for axis in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
        let ra = RotationField::new(axis).on_sphere(grid);
        let nn = inner_sphere(grid, &ra, &ra)?;
        let pr = inner_sphere(grid, v, &ra)? / nn;
        v.axpy(-pr, &ra);
    }
    Ok(())
}

/// Remove the L2(Omega_eps) projections onto the three rotation fields.
pub fn deflate_rotations_shell(grid: &ShellGrid, u: &mut VolumeField) -> Result<()> {
    for axis in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
        let ra = RotationField::new(axis).on_shell(grid);
        let nn = inner_shell(grid, &ra, &ra)?;
        let pr = inner_shell(grid, u, &ra)? / nn;
        u.axpy(-pr, &ra);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// inequality probes

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProbeKind {
    KornSphere,
    KornShellUniform,
    Ladyzhenskaya,
    ProductThin,
    NormalTrace,
}

/// Empirical-constant report for one inequality probe.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub kind: ProbeKind,
    /// One entry per shell grid for shell probes, single entry otherwise.
    pub per_eps: Vec<ProbeEps>,
    /// Number of degenerate samples skipped (zero right-hand side).
    pub skipped: usize,
    /// True when a Killing-field sample produced an unbounded ratio.
    pub killing_flagged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeEps {
    pub eps: Option<f64>,
    pub max_ratio: f64,
    pub ratios: Vec<f64>,
}

/// Run one inequality probe over random samples.
///
/// Ratios are LHS / RHS of the inequality with the stated eps powers folded
/// into the RHS, so a uniform constant shows up as a bounded ratio.
pub fn probe_inequality(
    kind: ProbeKind,
    samples: usize,
    sphere: &Arc<SphereGrid>,
    shells: &[Arc<ShellGrid>],
    seed: u64,
    include_killing_counterexample: bool,
) -> Result<ProbeReport> {
    let mut skipped = 0usize;
    let mut killing_flagged = false;
    let mut per_eps = Vec::new();
    match kind {
        ProbeKind::KornSphere => {
            let mut rng = StdRng::seed_from_u64(seed);
            let mut ratios = Vec::new();
            for _ in 0..samples {
                let mut v = random_tangent_field(sphere, &mut rng);
                deflate_rotations_sphere(sphere, &mut v)?;
                let h1 = h1_norm_sphere(sphere, &v)?;
                let d = surface_strain(sphere, &v)?.norm_sq(sphere)?.max(0.0).sqrt();
                if d < 1e-13 {
                    skipped += 1;
                    continue;
                }
                ratios.push(h1 / d);
            }
            if include_killing_counterexample {
                let ra = RotationField::new([0.0, 0.0, 1.0]).on_sphere(sphere);
                let d = surface_strain(sphere, &ra)?.norm_sq(sphere)?.max(0.0).sqrt();
                let l2 = l2_norm_sphere(sphere, &ra)?;
                if d < 1e-10 * l2 {
                    killing_flagged = true;
                }
            }
            let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
            per_eps.push(ProbeEps {
                eps: None,
                max_ratio,
                ratios,
            });
        }
        ProbeKind::KornShellUniform => {
            for shell in shells {
                let mut rng = StdRng::seed_from_u64(seed);
                let mut ratios = Vec::new();
                for _ in 0..samples {
                    let mut u = random_slip_volume_field(shell, &mut rng);
                    deflate_rotations_shell(shell, &mut u)?;
                    let h1 = h1_norm_shell(shell, &u)?;
                    let d = strain_shell(shell, &u)?.norm_sq(shell)?.max(0.0).sqrt();
                    if d < 1e-13 {
                        skipped += 1;
                        continue;
                    }
                    ratios.push(h1 / d);
                }
                let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
                per_eps.push(ProbeEps {
                    eps: Some(shell.eps),
                    max_ratio,
                    ratios,
                });
            }
        }
        ProbeKind::Ladyzhenskaya => {
            let mut rng = StdRng::seed_from_u64(seed);
            let mut ratios = Vec::new();
            for _ in 0..samples {
                let f = random_scalar_field(sphere, &mut rng);
                let l4 = sphere
                    .quadrature(&f.iter().map(|v| v.powi(4)).collect::<Vec<_>>())?
                    .max(0.0)
                    .powf(0.25);
                let l2 = sphere.inner(&f, &f)?.max(0.0).sqrt();
                let g = sphere.grad_scalar(&f)?;
                let gsq: f64 = (0..3).map(|d| sphere.inner(&g[d], &g[d]).unwrap()).sum();
                let h1 = (l2 * l2 + gsq).sqrt();
                let rhs = l2.sqrt() * h1.sqrt();
                if rhs < 1e-13 {
                    skipped += 1;
                    continue;
                }
                ratios.push(l4 / rhs);
            }
            let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
            per_eps.push(ProbeEps {
                eps: None,
                max_ratio,
                ratios,
            });
        }
        ProbeKind::ProductThin => {
            for shell in shells {
                let mut rng = StdRng::seed_from_u64(seed);
                let mut ratios = Vec::new();
                for _ in 0..samples {
                    let eta = random_scalar_field(sphere, &mut rng);
                    let phi3 = random_slip_volume_field(shell, &mut rng);
                    let phi = phi3.comps[0].clone();
                    let nang = shell.base.nang();
                    let mut prod = vec![0.0; shell.nval()];
                    for k in 0..shell.nrad {
                        for i in 0..nang {
                            prod[k * nang + i] = eta[i] * phi[k * nang + i];
                        }
                    }
                    let lhs = shell.inner(&prod, &prod)?.max(0.0).sqrt();
                    let eta_l2 = sphere.inner(&eta, &eta)?.max(0.0).sqrt();
                    let g = sphere.grad_scalar(&eta)?;
                    let gsq: f64 = (0..3).map(|d| sphere.inner(&g[d], &g[d]).unwrap()).sum();
                    let eta_h1 = (eta_l2 * eta_l2 + gsq).sqrt();
                    let sf = scalar_volume_h1(shell, &phi)?;
                    let rhs = eta_l2.sqrt() * eta_h1.sqrt() * sf.0.sqrt() * sf.1.sqrt();
                    if rhs < 1e-13 {
                        skipped += 1;
                        continue;
                    }
                    ratios.push(lhs / rhs);
                }
                let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
                per_eps.push(ProbeEps {
                    eps: Some(shell.eps),
                    max_ratio,
                    ratios,
                });
            }
        }
        ProbeKind::NormalTrace => {
            for shell in shells {
                let mut rng = StdRng::seed_from_u64(seed);
                let mut ratios = Vec::new();
                for _ in 0..samples {
                    let u = random_slip_volume_field(shell, &mut rng);
                    let nang = shell.base.nang();
                    let mut un = vec![0.0; shell.nval()];
                    for k in 0..shell.nrad {
                        for i in 0..nang {
                            un[k * nang + i] = dot3(&u.at(k, i), &shell.base.normals[i]);
                        }
                    }
                    let lhs = shell.inner(&un, &un)?.max(0.0).sqrt();
                    let rhs = shell.eps * h1_norm_shell(shell, &u)?;
                    if rhs < 1e-13 {
                        skipped += 1;
                        continue;
                    }
                    ratios.push(lhs / rhs);
                }
                let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
                per_eps.push(ProbeEps {
                    eps: Some(shell.eps),
                    max_ratio,
                    ratios,
                });
            }
        }
    }
    Ok(ProbeReport {
        kind,
        per_eps,
        skipped,
        killing_flagged,
    })
}

/// (L2 norm, H1 norm) of a scalar function on the shell.
fn scalar_volume_h1(grid: &ShellGrid, f: &[f64]) -> Result<(f64, f64)> {
    let u = VolumeField {
        comps: [f.to_vec(), vec![0.0; f.len()], vec![0.0; f.len()]],
        nrad: grid.nrad,
        nang: grid.base.nang(),
    };
    let l2 = grid.inner(f, f)?.max(0.0).sqrt();
    let g = full_gradient_shell(grid, &u)?;
    // only column 0 is nonzero
    let gsq: f64 = {
        let vals: Vec<f64> = g
            .vals
            .iter()
            .map(|m| m[0][0] * m[0][0] + m[1][0] * m[1][0] + m[2][0] * m[2][0])
            .collect();
        grid.quadrature(&vals)?
    };
    Ok((l2, (l2 * l2 + gsq).max(0.0).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FOUR_PI;
    use num_complex::Complex64;

    fn grid8() -> Arc<SphereGrid> {
        SphereGrid::new(8).unwrap()
    }

    fn max_abs(f: &[f64]) -> f64 {
        f.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn projector_relations_at_nodes() {
        let g = grid8();
        for n in g.normals.iter().step_by(7) {
            let p = projector(n);
            let pp = mat_mul3(&p, &p);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((pp[i][j] - p[i][j]).abs() < 1e-14);
                    assert!((p[i][j] - p[j][i]).abs() < 1e-14);
                }
            }
            assert!((mat_frob_inner(&p, &p) - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn matrix_inner_product_identities() {
        // A:B = A^T:B^T and [AB]:C = B:[A^T C] on fixed matrices, exact
        let a: Mat3 = [[1.0, 2.0, -0.5], [0.3, -1.0, 4.0], [2.5, 0.0, 1.5]];
        let b: Mat3 = [[0.7, -2.0, 3.5], [1.1, 0.4, -0.6], [-1.3, 2.2, 0.9]];
        let c: Mat3 = [[0.2, 1.0, -1.0], [3.0, -0.7, 0.5], [0.8, 1.6, -2.4]];
        let tr = |m: &Mat3| -> Mat3 {
            let mut t = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    t[i][j] = m[j][i];
                }
            }
            t
        };
        let ab = mat_frob_inner(&a, &b);
        let atbt = mat_frob_inner(&tr(&a), &tr(&b));
        assert!((ab - atbt).abs() < 1e-14 * ab.abs().max(1.0));
        let ab_c = mat_frob_inner(&mat_mul3(&a, &b), &c);
        let b_atc = mat_frob_inner(&b, &mat_mul3(&tr(&a), &c));
        assert!((ab_c - b_atc).abs() < 1e-12 * ab_c.abs().max(1.0));
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = grid8();
        let f = vec![1.0; g.nang()];
        let gr = tangential_gradient(&g, &f).unwrap();
        for d in 0..3 {
            assert!(max_abs(&gr.comps[d]) < 1e-12);
        }
    }

    #[test]
    fn gradient_of_normal_is_projector() {
        // grad_S2 n = P and div_S2 n = 2
        let g = grid8();
        let mut n_field = TangentField::zeros(&g);
        for (idx, n) in g.normals.iter().enumerate() {
            n_field.set_at(idx, *n);
        }
        let gm = tangential_gradient_vec(&g, &n_field).unwrap();
        for (idx, n) in g.normals.iter().enumerate() {
            let p = projector(n);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((gm.vals[idx][i][j] - p[i][j]).abs() < 1e-10);
                }
            }
        }
        let div = surface_divergence(&g, &n_field).unwrap();
        for v in &div {
            assert!((v - 2.0).abs() < 1e-10);
        }
        // strain of n is P as well
        let st = surface_strain(&g, &n_field).unwrap();
        for (idx, n) in g.normals.iter().enumerate() {
            let p = projector(n);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((st.vals[idx][i][j] - p[i][j]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn laplace_beltrami_eigenvalue_matches_fd_oracle() {
        // f = Re Y_3^1; independent finite-difference oracle for the
        // eigenvalue -l(l+1) = -12, then the spectral identity at 1e-10
        let y31 = |theta: f64, phi: f64| -> f64 {
            -(0.125) * (42.0 / std::f64::consts::PI).sqrt()
                * theta.sin()
                * (5.0 * theta.cos().powi(2) - 1.0)
                * phi.cos()
        };
        // FD Laplacian on the sphere at a few generic points
        let h = 1e-4;
        for (t0, p0) in [(1.0, 0.7), (2.0, 3.0), (0.8, 5.1)] {
            let ft = |t: f64| y31(t, p0);
            let fp = |p: f64| y31(t0, p);
            let d_theta = (ft(t0 + h) - ft(t0 - h)) / (2.0 * h);
            let dd_theta = (ft(t0 + h) - 2.0 * ft(t0) + ft(t0 - h)) / (h * h);
            let dd_phi = (fp(p0 + h) - 2.0 * fp(p0) + fp(p0 - h)) / (h * h);
            let lap = dd_theta + (t0.cos() / t0.sin()) * d_theta + dd_phi / t0.sin().powi(2);
            let lam = lap / y31(t0, p0);
            assert!((lam + 12.0).abs() < 1e-4, "fd eigenvalue {lam}");
        }

        let g = grid8();
        let f: Vec<f64> = (0..g.nang())
            .map(|i| {
                let (t, p) = g.node_angles(i);
                y31(t, p)
            })
            .collect();
        let gr = tangential_gradient(&g, &f).unwrap();
        let div = surface_divergence(&g, &gr).unwrap();
        for (d, v) in div.iter().zip(&f) {
            assert!((d + 12.0 * v).abs() < 1e-10, "{d} vs {}", -12.0 * v);
        }
    }

    #[test]
    fn divergence_of_rotation_and_curl_type_fields() {
        let g = grid8();
        let ra = RotationField::new([0.3, -0.5, 0.81]).on_sphere(&g);
        let div = surface_divergence(&g, &ra).unwrap();
        assert!(max_abs(&div) < 1e-11);

        // curl-type field: gradient of Y_2^0 rotated 90 degrees in the
        // tangent plane, i.e. n x grad Y_2^0; solenoidal by construction
        let mut psi = SphCoeffs::zeros(g.lmax);
        psi.set(2, 0, Complex64::new(1.0, 0.0));
        let v = stream_velocity(&g, &psi);
        let div = surface_divergence(&g, &v).unwrap();
        assert!(max_abs(&div) < 1e-11);
    }

    #[test]
    fn strain_of_rotation_vanishes() {
        let g = grid8();
        let ra = RotationField::new([1.0, 2.0, -0.4]).on_sphere(&g);
        let st = surface_strain(&g, &ra).unwrap();
        let mut mx = 0.0f64;
        for m in &st.vals {
            mx = mx.max(mat_frob_inner(m, m).sqrt());
        }
        assert!(mx < 1e-11, "strain of killing field {mx}");
        assert!(ra.normal_residual(&g) < 1e-13);
    }

    #[test]
    fn strain_trace_equals_divergence_for_tangential() {
        let g = grid8();
        let mut rng = StdRng::seed_from_u64(7);
        let v = random_tangent_field(&g, &mut rng);
        let st = surface_strain(&g, &v).unwrap();
        let tr = st.trace_field();
        let div = surface_divergence(&g, &v).unwrap();
        for (a, b) in tr.iter().zip(&div) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn tangential_part_identities() {
        // tangential-part-gradient and tangential-part-strain for a general (non-tangential) field
        let g = grid8();
        let mut rng = StdRng::seed_from_u64(11);
        let vt = random_tangent_field(&g, &mut rng);
        let eta = random_scalar_field(&g, &mut rng);
        let mut v = TangentField::zeros(&g);
        for idx in 0..g.nang() {
            let n = g.normals[idx];
            let t = vt.at(idx);
            v.set_at(idx, [t[0] + eta[idx] * n[0], t[1] + eta[idx] * n[1], t[2] + eta[idx] * n[2]]);
        }
        let mut vtau = TangentField::zeros(&g);
        for idx in 0..g.nang() {
            let n = g.normals[idx];
            let val = v.at(idx);
            let vn = dot3(&val, &n);
            vtau.set_at(idx, [val[0] - vn * n[0], val[1] - vn * n[1], val[2] - vn * n[2]]);
        }
        let gv = tangential_gradient_vec(&g, &v).unwrap();
        let gvt = tangential_gradient_vec(&g, &vtau).unwrap();
        let mut worst = 0.0f64;
        for idx in 0..g.nang() {
            let n = g.normals[idx];
            let p = projector(&n);
            let vn = dot3(&v.at(idx), &n);
            let t = vtau.at(idx);
            // grad v_tau = (grad v) P - v_tau (x) n - (v.n) P
            let gp = mat_mul3(&gv.vals[idx], &p);
            for i in 0..3 {
                for j in 0..3 {
                    let expect = gp[i][j] - t[i] * n[j] - vn * p[i][j];
                    worst = worst.max((gvt.vals[idx][i][j] - expect).abs());
                }
            }
        }
        assert!(worst < 1e-9, "tangential-part-gradient residual {worst}");

        // D(v_tau) = D(v) - (v.n) P
        let sv = surface_strain(&g, &v).unwrap();
        let svt = surface_strain(&g, &vtau).unwrap();
        let mut worst = 0.0f64;
        for idx in 0..g.nang() {
            let p = projector(&g.normals[idx]);
            let vn = dot3(&v.at(idx), &g.normals[idx]);
            for i in 0..3 {
                for j in 0..3 {
                    let expect = sv.vals[idx][i][j] - vn * p[i][j];
                    worst = worst.max((svt.vals[idx][i][j] - expect).abs());
                }
            }
        }
        assert!(worst < 1e-9, "tangential-part-strain residual {worst}");
    }

    #[test]
    fn gradient_decomposition_for_tangential_fields() {
        // gradient-decomposition: grad v = P (grad v) P - v (x) n for tangential v
        let g = grid8();
        let mut rng = StdRng::seed_from_u64(3);
        let v = random_tangent_field(&g, &mut rng);
        let gv = tangential_gradient_vec(&g, &v).unwrap();
        let mut worst = 0.0f64;
        for idx in 0..g.nang() {
            let n = g.normals[idx];
            let p = projector(&n);
            let pgp = mat_mul3(&p, &mat_mul3(&gv.vals[idx], &p));
            let t = v.at(idx);
            for i in 0..3 {
                for j in 0..3 {
                    let expect = pgp[i][j] - t[i] * n[j];
                    worst = worst.max((gv.vals[idx][i][j] - expect).abs());
                }
            }
        }
        assert!(worst < 1e-9, "gradient-decomposition residual {worst}");
    }

    #[test]
    fn gauss_formula_pointwise() {
        let g = grid8();
        let mut rng = StdRng::seed_from_u64(5);
        let v = random_tangent_field(&g, &mut rng);
        let w = random_tangent_field(&g, &mut rng);
        let cov = covariant_derivative(&g, &w, &v).unwrap();
        // directional derivative (w . grad_S2) v
        let mut worst = 0.0f64;
        let mut dir = [vec![0.0; g.nang()], vec![0.0; g.nang()], vec![0.0; g.nang()]];
        for j in 0..3 {
            let gj = g.grad_scalar(&v.comps[j]).unwrap();
            for idx in 0..g.nang() {
                let wv = w.at(idx);
                dir[j][idx] = wv[0] * gj[0][idx] + wv[1] * gj[1][idx] + wv[2] * gj[2][idx];
            }
        }
        for idx in 0..g.nang() {
            let n = g.normals[idx];
            let vw = dot3(&v.at(idx), &w.at(idx));
            let c = cov.at(idx);
            for j in 0..3 {
                let expect = c[j] - vw * n[j];
                worst = worst.max((dir[j][idx] - expect).abs());
            }
        }
        assert!(worst < 1e-9, "Gauss formula residual {worst}");
    }

    #[test]
    fn covariant_derivative_of_rotation_along_itself() {
        // nabla_{r_a} r_a = grad_S2 ((a.y)^2 / 2): brute-force pointwise via
        // P[a x (a x y)] = (a.y) P a, and its Leray projection vanishes
        let g = grid8();
        let a = [0.0, 0.0, 1.0];
        let ra = RotationField::new(a).on_sphere(&g);
        let cov = covariant_derivative(&g, &ra, &ra).unwrap();
        let f: Vec<f64> = g.normals.iter().map(|n| 0.5 * dot3(&a, n).powi(2)).collect();
        let gr = tangential_gradient(&g, &f).unwrap();
        for idx in 0..g.nang() {
            let c = cov.at(idx);
            let e = gr.at(idx);
            for d in 0..3 {
                assert!((c[d] - e[d]).abs() < 1e-10);
            }
        }
        let proj = leray_project_sphere(&g, &cov).unwrap();
        for d in 0..3 {
            assert!(max_abs(&proj.comps[d]) < 1e-10);
        }
    }

    #[test]
    fn covariant_derivative_trivial_and_errors() {
        let g = grid8();
        let z = TangentField::zeros(&g);
        let mut rng = StdRng::seed_from_u64(9);
        let v = random_tangent_field(&g, &mut rng);
        let c = covariant_derivative(&g, &z, &v).unwrap();
        for d in 0..3 {
            assert!(max_abs(&c.comps[d]) < 1e-14);
        }
        // non-tangential input rejected
        let mut bad = v.clone();
        for idx in 0..g.nang() {
            let n = g.normals[idx];
            let t = bad.at(idx);
            bad.set_at(idx, [t[0] + 0.5 * n[0], t[1] + 0.5 * n[1], t[2] + 0.5 * n[2]]);
        }
        assert!(matches!(
            covariant_derivative(&g, &bad, &v),
            Err(Error::InvariantViolation(_))
        ));
    }

    #[test]
    fn trilinear_antisymmetry() {
        // (nabla_v w, zeta) = -(w, nabla_v zeta) for solenoidal v
        let g = grid8();
        let mut rng = StdRng::seed_from_u64(21);
        let psi = random_coeffs(g.lmax, &mut rng);
        let v = stream_velocity(&g, &psi);
        let w = random_tangent_field(&g, &mut rng);
        let z = random_tangent_field(&g, &mut rng);
        let a = inner_sphere(&g, &covariant_derivative(&g, &v, &w).unwrap(), &z).unwrap();
        let b = inner_sphere(&g, &w, &covariant_derivative(&g, &v, &z).unwrap()).unwrap();
        let scale = l2_norm_sphere(&g, &w).unwrap() * l2_norm_sphere(&g, &z).unwrap();
        assert!((a + b).abs() < 1e-9 * scale.max(1.0), "antisym {a} vs {b}");
        let c = inner_sphere(&g, &covariant_derivative(&g, &v, &w).unwrap(), &w).unwrap();
        assert!(c.abs() < 1e-9 * scale.max(1.0), "energy term {c}");
    }

    #[test]
    fn integration_by_parts_with_curvature() {
        // int (D_i eta) zeta = -int eta (D_i zeta - 2 zeta n_i)
        let g = grid8();
        let mut rng = StdRng::seed_from_u64(33);
        let eta = random_scalar_field(&g, &mut rng);
        let zeta = random_scalar_field(&g, &mut rng);
        let geta = tangential_gradient(&g, &eta).unwrap();
        let gzeta = tangential_gradient(&g, &zeta).unwrap();
        let neta = g.inner(&eta, &eta).unwrap().sqrt();
        let nzeta = g.inner(&zeta, &zeta).unwrap().sqrt();
        for i in 0..3 {
            let lhs = g.inner(&geta.comps[i], &zeta).unwrap();
            let inner_term: Vec<f64> = (0..g.nang())
                .map(|idx| eta[idx] * (gzeta.comps[i][idx] - 2.0 * zeta[idx] * g.normals[idx][i]))
                .collect();
            let rhs = -g.quadrature(&inner_term).unwrap();
            assert!((lhs - rhs).abs() < 1e-9 * (neta * nzeta).max(1.0), "i={i}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn leray_projection_examples() {
        let g = grid8();
        // solenoidal field unchanged
        let ra = RotationField::new([0.0, 1.0, 0.0]).on_sphere(&g);
        let p = leray_project_sphere(&g, &ra).unwrap();
        for d in 0..3 {
            for (a, b) in p.comps[d].iter().zip(&ra.comps[d]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        // pure gradient annihilated
        let mut chi = SphCoeffs::zeros(g.lmax);
        chi.set(2, 2, Complex64::new(0.7, -0.3));
        let grad = potential_velocity(&g, &chi);
        let p = leray_project_sphere(&g, &grad).unwrap();
        for d in 0..3 {
            assert!(max_abs(&p.comps[d]) < 1e-11);
        }
        // mixed field: r_a + grad Y_1^0 -> r_a (Hodge uniqueness oracle:
        // direct subtraction)
        let mut chi = SphCoeffs::zeros(g.lmax);
        chi.set(1, 0, Complex64::new(1.3, 0.0));
        let grad = potential_velocity(&g, &chi);
        let mut mixed = ra.clone();
        mixed.axpy(1.0, &grad);
        let p = leray_project_sphere(&g, &mixed).unwrap();
        for d in 0..3 {
            for (a, b) in p.comps[d].iter().zip(&ra.comps[d]) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        // idempotence, orthogonality, small divergence on a random field
        let mut rng = StdRng::seed_from_u64(13);
        let v = random_tangent_field(&g, &mut rng);
        let p1 = leray_project_sphere(&g, &v).unwrap();
        let p2 = leray_project_sphere(&g, &p1).unwrap();
        let mut diff = p1.clone();
        diff.axpy(-1.0, &p2);
        assert!(l2_norm_sphere(&g, &diff).unwrap() < 1e-10);
        let mut resid = v.clone();
        resid.axpy(-1.0, &p1);
        let ortho = inner_sphere(&g, &resid, &p1).unwrap();
        assert!(ortho.abs() < 1e-10 * l2_norm_sphere(&g, &v).unwrap().powi(2).max(1.0));
        let div = surface_divergence(&g, &p1).unwrap();
        let divnorm = g.inner(&div, &div).unwrap().sqrt();
        assert!(divnorm < 1e-9, "divergence after projection {divnorm}");
    }

    #[test]
    fn surface_curl_of_rotation() {
        // curl r_a = 2 (a . y): symbolic oracle via stream function -(a.y)
        let g = grid8();
        let a = [0.2, -0.4, 0.9];
        let ra = RotationField::new(a).on_sphere(&g);
        let curl = surface_curl(&g, &ra).unwrap();
        for (idx, n) in g.normals.iter().enumerate() {
            assert!((curl[idx] - 2.0 * dot3(&a, n)).abs() < 1e-10);
        }
    }

    #[test]
    fn full_gradient_shell_examples() {
        let sg = SphereGrid::new(6).unwrap();
        let shell = ShellGrid::new(sg, 0.2, 8).unwrap();
        // u = r_a: gradient antisymmetric, strain zero
        let ra = RotationField::new([0.5, 0.1, -1.0]).on_shell(&shell);
        let gm = full_gradient_shell(&shell, &ra).unwrap();
        let mut worst = 0.0f64;
        for m in &gm.vals {
            for i in 0..3 {
                for j in 0..3 {
                    worst = worst.max((m[i][j] + m[j][i]).abs());
                }
            }
        }
        assert!(worst < 1e-9, "antisymmetry {worst}");
        let st = strain_shell(&shell, &ra).unwrap();
        let mut worst = 0.0f64;
        for m in &st.vals {
            worst = worst.max(mat_frob_inner(m, m).sqrt());
        }
        assert!(worst < 1e-9, "D(r_a) {worst}");
        assert!(boundary_normal_residual(&shell, &ra) < 1e-12);
        assert!(boundary_stress_residual(&shell, &ra).unwrap() < 1e-9);

        // u(x) = x: gradient is the identity
        let mut u = VolumeField::zeros(&shell);
        for (k, &r) in shell.rnodes().iter().enumerate() {
            for (i, n) in shell.base.normals.iter().enumerate() {
                u.set_at(k, i, [r * n[0], r * n[1], r * n[2]]);
            }
        }
        let gm = full_gradient_shell(&shell, &u).unwrap();
        let mut worst = 0.0f64;
        for m in &gm.vals {
            for i in 0..3 {
                for j in 0..3 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((m[i][j] - expect).abs());
                }
            }
        }
        assert!(worst < 1e-10, "identity map {worst}");
    }

    #[test]
    fn korn_probe_flags_killing_field() {
        let g = grid8();
        let report = probe_inequality(ProbeKind::KornSphere, 6, &g, &[], 99, true).unwrap();
        assert!(report.killing_flagged);
        assert!(report.per_eps[0].max_ratio.is_finite());
        assert!(report.per_eps[0].max_ratio > 0.0);
    }

    #[test]
    fn rotation_momentum_identity_norm() {
        // || r_a ||^2 on the sphere = 8 pi / 3 for unit axis
        let g = grid8();
        let ra = RotationField::new([0.0, 0.0, 1.0]).on_sphere(&g);
        let nn = inner_sphere(&g, &ra, &ra).unwrap();
        assert!((nn - 8.0 * std::f64::consts::PI / 3.0).abs() < 1e-10, "{nn} vs {}", 8.0 * std::f64::consts::PI / 3.0);
        let _ = FOUR_PI;
    }
}
