//! Operator-identity suite: the tangential-calculus and average/extension
//! identities evaluated as relative residuals on random band-limited data.
//!
//! This backs both the `ops-check` command and the acceptance gate; every
//! entry is a pointwise or integrated identity that must hold to spectral
//! accuracy on resolved fields.


use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::avgext::{
    avg_gradient_identity_check, extend_constant_scalar, extend_weighted,
    unfold_pairing_check, AverageOp,
};
use crate::error::Result;
use crate::grid::{ShellGrid, SphereGrid};
use crate::surfcalc::{
    covariant_derivative, divergence_shell, dot3, full_gradient_shell, inner_sphere,
    l2_norm_shell, l2_norm_sphere, mat_frob_inner, mat_mul3, potential_velocity, projector,
    random_coeffs, random_scalar_field, random_slip_volume_field, random_tangent_field,
    scalar_gradient_shell, strain_shell, stream_velocity, surface_divergence, surface_strain,
    tangential_gradient, tangential_gradient_vec, Mat3, TangentField,
};

/// One identity with its measured relative residual.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub residual: f64,
}

fn entry(out: &mut Vec<IdentityCheck>, name: &str, residual: f64) {
    out.push(IdentityCheck {
        name: name.to_string(),
        residual,
    });
}

/// Run the full operator-identity suite at the given resolution.
pub fn identity_suite(
    lmax: usize,
    nrad: usize,
    eps: f64,
    seed: u64,
) -> Result<Vec<IdentityCheck>> {
    let grid = SphereGrid::new(lmax)?;
    let shell = ShellGrid::new(grid.clone(), eps, nrad)?;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::new();
    let nang = grid.nang();

    // random fields shared by several checks
    let eta = random_scalar_field(&grid, &mut rng);
    let zeta = random_scalar_field(&grid, &mut rng);
    let vt = stream_velocity(&grid, &random_coeffs(grid.lmax, &mut rng));
    let wt = random_tangent_field(&grid, &mut rng);
    let mut vgen = random_tangent_field(&grid, &mut rng);
    // general (non-tangential) field: tangent + eta n
    for i in 0..nang {
        let n = grid.normals[i];
        let t = vgen.at(i);
        vgen.set_at(
            i,
            [
                t[0] + eta[i] * n[0],
                t[1] + eta[i] * n[1],
                t[2] + eta[i] * n[2],
            ],
        );
    }
    let vgen_scale = l2_norm_sphere(&grid, &vgen)?.max(1.0);

    // normal-gradient: grad_S2 n = P and div_S2 n = 2
    {
        let mut nf = TangentField::zeros(&grid);
        for (i, n) in grid.normals.iter().enumerate() {
            nf.set_at(i, *n);
        }
        let gm = tangential_gradient_vec(&grid, &nf)?;
        let div = surface_divergence(&grid, &nf)?;
        let mut worst = 0.0f64;
        for (i, n) in grid.normals.iter().enumerate() {
            let p = projector(n);
            for a in 0..3 {
                for b in 0..3 {
                    worst = worst.max((gm.vals[i][a][b] - p[a][b]).abs());
                }
            }
            worst = worst.max((div[i] - 2.0).abs());
        }
        entry(&mut out, "normal-gradient", worst);
    }

    // tangential-part-gradient and tangential-part-strain for the general field
    {
        let mut vtau = TangentField::zeros(&grid);
        for i in 0..nang {
            let n = grid.normals[i];
            let val = vgen.at(i);
            let vn = dot3(&val, &n);
            vtau.set_at(i, [val[0] - vn * n[0], val[1] - vn * n[1], val[2] - vn * n[2]]);
        }
        let gv = tangential_gradient_vec(&grid, &vgen)?;
        let gvt = tangential_gradient_vec(&grid, &vtau)?;
        let sv = surface_strain(&grid, &vgen)?;
        let svt = surface_strain(&grid, &vtau)?;
        let mut worst_vt = 0.0f64;
        let mut worst_str = 0.0f64;
        for i in 0..nang {
            let n = grid.normals[i];
            let p = projector(&n);
            let vn = dot3(&vgen.at(i), &n);
            let t = vtau.at(i);
            let gp = mat_mul3(&gv.vals[i], &p);
            for a in 0..3 {
                for b in 0..3 {
                    let expect = gp[a][b] - t[a] * n[b] - vn * p[a][b];
                    worst_vt = worst_vt.max((gvt.vals[i][a][b] - expect).abs());
                    let expect = sv.vals[i][a][b] - vn * p[a][b];
                    worst_str = worst_str.max((svt.vals[i][a][b] - expect).abs());
                }
            }
        }
        entry(&mut out, "tangential-part-gradient", worst_vt / vgen_scale);
        entry(&mut out, "tangential-part-strain", worst_str / vgen_scale);
    }

    // gauss-formula: (w . grad_S2) v = cov - (v.w) n for tangential fields
    {
        let cov = covariant_derivative(&grid, &wt, &vt)?;
        let mut worst = 0.0f64;
        let mut dir = [vec![0.0; nang], vec![0.0; nang], vec![0.0; nang]];
        for (j, dirj) in dir.iter_mut().enumerate() {
            let gj = grid.grad_scalar(&vt.comps[j])?;
            for i in 0..nang {
                let wv = wt.at(i);
                dirj[i] = wv[0] * gj[0][i] + wv[1] * gj[1][i] + wv[2] * gj[2][i];
            }
        }
        for i in 0..nang {
            let n = grid.normals[i];
            let vw = dot3(&vt.at(i), &wt.at(i));
            let c = cov.at(i);
            for j in 0..3 {
                worst = worst.max((dir[j][i] - (c[j] - vw * n[j])).abs());
            }
        }
        let scale = l2_norm_sphere(&grid, &vt)?.max(1.0) * l2_norm_sphere(&grid, &wt)?.max(1.0);
        entry(&mut out, "gauss-formula", worst / scale);
    }

    // gradient-decomposition: grad v = P (grad v) P - v (x) n for tangential v
    {
        let gv = tangential_gradient_vec(&grid, &vt)?;
        let mut worst = 0.0f64;
        for i in 0..nang {
            let n = grid.normals[i];
            let p = projector(&n);
            let pgp = mat_mul3(&p, &mat_mul3(&gv.vals[i], &p));
            let t = vt.at(i);
            for a in 0..3 {
                for b in 0..3 {
                    worst = worst.max((gv.vals[i][a][b] - (pgp[a][b] - t[a] * n[b])).abs());
                }
            }
        }
        entry(&mut out, "gradient-decomposition", worst / l2_norm_sphere(&grid, &vt)?.max(1.0));
    }

    // constant-extension-gradient: grad eta-bar = (1/|x|) (grad_S2 eta)-bar pointwise
    {
        let bar = extend_constant_scalar(&shell, &eta)?;
        let g3 = scalar_gradient_shell(&shell, &bar)?;
        let gs = tangential_gradient(&grid, &eta)?;
        let mut worst = 0.0f64;
        for (k, &r) in shell.rnodes().iter().enumerate() {
            for i in 0..nang {
                let gv = g3.at(k, i);
                let e = gs.at(i);
                for d in 0..3 {
                    worst = worst.max((gv[d] - e[d] / r).abs());
                }
            }
        }
        let scale = grid.inner(&eta, &eta)?.max(1.0).sqrt();
        entry(&mut out, "constant-extension-gradient", worst / scale);
    }

    // matrix-inner-identities on random matrices
    {
        let mut m = || -> Mat3 {
            let mut a = [[0.0; 3]; 3];
            for row in a.iter_mut() {
                for v in row.iter_mut() {
                    *v = rng.gen_range(-1.0..1.0);
                }
            }
            a
        };
        let a = m();
        let b = m();
        let c = m();
        let tr = |x: &Mat3| -> Mat3 {
            let mut t = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    t[i][j] = x[j][i];
                }
            }
            t
        };
        let r1 = (mat_frob_inner(&a, &b) - mat_frob_inner(&tr(&a), &tr(&b))).abs();
        let r2 = (mat_frob_inner(&mat_mul3(&a, &b), &c) - mat_frob_inner(&b, &mat_mul3(&tr(&a), &c)))
            .abs();
        entry(&mut out, "matrix-inner-identities", r1.max(r2));
    }

    // average-gradient-exchange: gradient/average exchange on a smooth volume scalar
    let mut phi = vec![0.0; shell.nval()];
    {
        let eta2 = random_scalar_field(&grid, &mut rng);
        for (k, &r) in shell.rnodes().iter().enumerate() {
            let s = (r - 1.0) / eps;
            for i in 0..nang {
                phi[k * nang + i] = (1.0 + 0.4 * s + 0.2 * s * s) * eta2[i];
            }
        }
        let op = AverageOp::new(2, shell.clone());
        let res = avg_gradient_identity_check(&op, &phi, None)?;
        let scale = shell.inner(&phi, &phi)?.max(1.0).sqrt();
        entry(&mut out, "average-gradient-exchange", res.gradient / scale);
    }

    // average-divergence-exchange and tangential-average-divergence on a slip field
    {
        let u = random_slip_volume_field(&shell, &mut rng);
        let op = AverageOp::new(1, shell.clone());
        // full divergence identity:
        // div_S2 M^k u = M^{k+1}(div u) + (k+1) M^k(u . n-bar)
        let mv = op.apply_vec(&u)?;
        let div_m = surface_divergence(&grid, &mv)?;
        let div_u = divergence_shell(&shell, &u)?;
        let m1 = AverageOp::new(2, shell.clone()).apply_scalar(&div_u)?;
        let mut un = vec![0.0; shell.nval()];
        for k in 0..shell.nrad {
            for i in 0..nang {
                un[k * nang + i] = dot3(&u.at(k, i), &grid.normals[i]);
            }
        }
        let mk_un = op.apply_scalar(&un)?;
        let resid: Vec<f64> = (0..nang)
            .map(|i| div_m[i] - m1[i] - 2.0 * mk_un[i])
            .collect();
        let scale = crate::surfcalc::h1_norm_shell(&shell, &u)?.max(1.0);
        let r = grid.inner(&resid, &resid)?.max(0.0).sqrt();
        entry(&mut out, "average-divergence-exchange", r / scale);

        let res = avg_gradient_identity_check(&op, &phi, Some(&u))?;
        entry(&mut out, "tangential-average-divergence", res.divergence.unwrap() / scale);
    }

    // extension identities for a mixed tangential field
    {
        let mut v = stream_velocity(&grid, &random_coeffs(grid.lmax, &mut rng));
        v.axpy(1.0, &potential_velocity(&grid, &random_coeffs(grid.lmax, &mut rng)));
        let vscale = l2_norm_sphere(&grid, &v)?.max(1.0);
        let ve = extend_weighted(&shell, &v)?;
        let grad = full_gradient_shell(&shell, &ve)?;
        let gs = tangential_gradient_vec(&grid, &v)?;
        let mut worst = 0.0f64;
        for k in 0..shell.nrad {
            for i in 0..nang {
                let n = grid.normals[i];
                let val = v.at(i);
                let m = grad.at(k, i);
                for a in 0..3 {
                    for b in 0..3 {
                        worst = worst.max((m[a][b] - (gs.vals[i][a][b] + n[a] * val[b])).abs());
                    }
                }
            }
        }
        entry(&mut out, "extension-gradient", worst / vscale);

        let divv = divergence_shell(&shell, &ve)?;
        let div_s = surface_divergence(&grid, &v)?;
        let mut worst = 0.0f64;
        for k in 0..shell.nrad {
            for i in 0..nang {
                let vn = dot3(&v.at(i), &grid.normals[i]);
                worst = worst.max((divv[k * nang + i] - div_s[i] - vn).abs());
            }
        }
        entry(&mut out, "extension-divergence", worst / vscale);

        // strain and advection identities need tangential v
        let vtan = stream_velocity(&grid, &random_coeffs(grid.lmax, &mut rng));
        let vscale = l2_norm_sphere(&grid, &vtan)?.max(1.0);
        let vte = extend_weighted(&shell, &vtan)?;
        let dv = strain_shell(&shell, &vte)?;
        let ds = surface_strain(&grid, &vtan)?;
        let mut worst = 0.0f64;
        for k in 0..shell.nrad {
            for i in 0..nang {
                let m = dv.at(k, i);
                for a in 0..3 {
                    for b in 0..3 {
                        worst = worst.max((m[a][b] - ds.vals[i][a][b]).abs());
                    }
                }
            }
        }
        entry(&mut out, "extension-strain", worst / vscale);

        let cov = covariant_derivative(&grid, &vtan, &vtan)?;
        let gradv = full_gradient_shell(&shell, &vte)?;
        let mut worst = 0.0f64;
        for (k, &r) in shell.rnodes().iter().enumerate() {
            for i in 0..nang {
                let uv = vte.at(k, i);
                let m = gradv.at(k, i);
                let vv = vtan.at(i);
                let n = grid.normals[i];
                for j in 0..3 {
                    let adv = uv[0] * m[0][j] + uv[1] * m[1][j] + uv[2] * m[2][j];
                    let expect = r * (cov.at(i)[j] - dot3(&vv, &vv) * n[j]);
                    worst = worst.max((adv - expect).abs());
                }
            }
        }
        entry(&mut out, "extension-advection", worst / (vscale * vscale).max(1.0));

        // unfold-pairing: unfold pairing against a random slip test field
        let psi = random_slip_volume_field(&shell, &mut rng);
        let resid = unfold_pairing_check(&shell, &vtan, &psi)?;
        let scale = vscale * l2_norm_shell(&shell, &psi)?.max(1.0);
        entry(&mut out, "unfold-pairing", resid / scale);
    }

    // integration-by-parts: integration by parts with the curvature term
    {
        let geta = tangential_gradient(&grid, &eta)?;
        let gzeta = tangential_gradient(&grid, &zeta)?;
        let neta = grid.inner(&eta, &eta)?.max(0.0).sqrt();
        let nzeta = grid.inner(&zeta, &zeta)?.max(0.0).sqrt();
        let mut worst = 0.0f64;
        for d in 0..3 {
            let lhs = grid.inner(&geta.comps[d], &zeta)?;
            let term: Vec<f64> = (0..nang)
                .map(|i| eta[i] * (gzeta.comps[d][i] - 2.0 * zeta[i] * grid.normals[i][d]))
                .collect();
            let rhs = -grid.quadrature(&term)?;
            worst = worst.max((lhs - rhs).abs());
        }
        entry(&mut out, "integration-by-parts", worst / (neta * nzeta).max(1.0));
    }

    // sphere-trilinear-antisymmetry: trilinear antisymmetry on the sphere
    {
        let vsol = stream_velocity(&grid, &random_coeffs(grid.lmax, &mut rng));
        let a = inner_sphere(&grid, &covariant_derivative(&grid, &vsol, &wt)?, &vt)?;
        let b = inner_sphere(&grid, &wt, &covariant_derivative(&grid, &vsol, &vt)?)?;
        let scale = l2_norm_sphere(&grid, &wt)?.max(1.0)
            * l2_norm_sphere(&grid, &vt)?.max(1.0)
            * l2_norm_sphere(&grid, &vsol)?.max(1.0);
        entry(&mut out, "sphere-trilinear-antisymmetry", (a + b).abs() / scale);
    }

    // shell-trilinear-antisymmetry: trilinear antisymmetry on the shell
    {
        let vtan = stream_velocity(&grid, &random_coeffs(grid.lmax, &mut rng));
        let usol = extend_weighted(&shell, &vtan)?;
        let z = random_slip_volume_field(&shell, &mut rng);
        let adv = crate::surfcalc::advection_shell(&shell, &usol, &z)?;
        let a = crate::surfcalc::inner_shell(&shell, &adv, &z)?;
        let scale = l2_norm_shell(&shell, &usol)?.max(1.0)
            * l2_norm_shell(&shell, &z)?.powi(2).max(1.0);
        entry(&mut out, "shell-trilinear-antisymmetry", a.abs() / scale);
    }

    Ok(out)
}
