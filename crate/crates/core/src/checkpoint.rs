//! Self-describing JSON checkpoints for solver states.
//!
//! The sphere record stores (t, lmax, nu, omega coefficients); the shell
//! record adds (eps, nrad) and the toroidal/poloidal blocks. Coefficients
//! are flattened into parallel re/im arrays in the storage order of the
//! in-memory types.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SphCoeffs;
use crate::shell_ns::TriRadial;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SphereCheckpoint {
    pub version: u32,
    pub t: f64,
    pub lmax: usize,
    pub nu: f64,
    pub omega_re: Vec<f64>,
    pub omega_im: Vec<f64>,
}

impl SphereCheckpoint {
    pub fn from_state(state: &crate::sphere_ns::SolverState2D) -> Self {
        SphereCheckpoint {
            version: CHECKPOINT_VERSION,
            t: state.t,
            lmax: state.omega.lmax,
            nu: state.nu,
            omega_re: state.omega.data.iter().map(|z| z.re).collect(),
            omega_im: state.omega.data.iter().map(|z| z.im).collect(),
        }
    }

    pub fn omega(&self) -> Result<SphCoeffs> {
        let n = (self.lmax + 1) * (self.lmax + 1);
        if self.omega_re.len() != n || self.omega_im.len() != n {
            return Err(Error::DataError("checkpoint coefficient count mismatch".into()));
        }
        let mut c = SphCoeffs::zeros(self.lmax);
        for (i, z) in c.data.iter_mut().enumerate() {
            *z = Complex64::new(self.omega_re[i], self.omega_im[i]);
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShellCheckpoint {
    pub version: u32,
    pub t: f64,
    pub lmax: usize,
    pub nu: f64,
    pub eps: f64,
    pub nrad: usize,
    pub tor_re: Vec<f64>,
    pub tor_im: Vec<f64>,
    pub pol_re: Vec<f64>,
    pub pol_im: Vec<f64>,
}

impl ShellCheckpoint {
    pub fn from_state(state: &crate::shell_ns::SolverState3D) -> Self {
        ShellCheckpoint {
            version: CHECKPOINT_VERSION,
            t: state.t,
            lmax: state.tor.lmax,
            nu: state.nu,
            eps: state.eps,
            nrad: state.tor.nrad,
            tor_re: state.tor.data.iter().map(|z| z.re).collect(),
            tor_im: state.tor.data.iter().map(|z| z.im).collect(),
            pol_re: state.pol.data.iter().map(|z| z.re).collect(),
            pol_im: state.pol.data.iter().map(|z| z.im).collect(),
        }
    }

    pub fn potentials(&self) -> Result<(TriRadial, TriRadial)> {
        let n = (self.lmax + 1) * (self.lmax + 2) / 2 * self.nrad;
        if self.tor_re.len() != n || self.pol_re.len() != n {
            return Err(Error::DataError("checkpoint block size mismatch".into()));
        }
        let mut tor = TriRadial::zeros(self.lmax, self.nrad);
        let mut pol = TriRadial::zeros(self.lmax, self.nrad);
        for i in 0..n {
            tor.data[i] = Complex64::new(self.tor_re[i], self.tor_im[i]);
            pol.data[i] = Complex64::new(self.pol_re[i], self.pol_im[i]);
        }
        Ok((tor, pol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SphereGrid;
    use crate::sphere_ns::{init_sphere_solver, Forcing2D};
    use crate::surfcalc::RotationField;

    #[test]
    fn sphere_checkpoint_roundtrip() {
        let g = SphereGrid::new(4).unwrap();
        let v0 = RotationField::new([0.0, 0.0, 1.0]).on_sphere(&g);
        let mut st = init_sphere_solver(g, &v0, 1.0, Forcing2D::None, 1e-3).unwrap();
        st.run(3).unwrap();
        let ck = SphereCheckpoint::from_state(&st);
        let json = serde_json::to_string(&ck).unwrap();
        let back: SphereCheckpoint = serde_json::from_str(&json).unwrap();
        let omega = back.omega().unwrap();
        for (a, b) in omega.data.iter().zip(&st.omega.data) {
            assert_eq!(a, b);
        }
        assert_eq!(back.version, CHECKPOINT_VERSION);
    }
}
