//! Navier-Stokes solver on the unit sphere in vorticity-streamfunction
//! form.
//!
//! The tangential velocity is v = n x grad_S2 psi with Lap_S2 psi = omega,
//! which makes v solenoidal by construction and eliminates the pressure.
//! The vorticity evolves by
//! d_t omega + v . grad_S2 omega = nu (Lap_S2 omega + 2 omega) + curl f,
//! whose linear part is diagonal in harmonic space with symbol
//! mu_l = 2 - l(l+1). Time stepping is Crank-Nicolson for the viscous term
//! and Adams-Bashforth 2 for advection and forcing; the first step pairs
//! Crank-Nicolson with an explicit Euler tendency so that purely linear
//! solutions see the second-order scheme from step one.
//!
//! The l = 1 vorticity modes carry the angular momenta (v, r_a); they have
//! mu_1 = 0 and evolve freely, so conservation under rotation-orthogonal
//! data is emergent rather than imposed.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{SphCoeffs, SphereGrid};
use crate::surfcalc::{
    dot3, inner_sphere, l2_norm_sphere, leray_project_sphere, surface_curl, surface_divergence,
    surface_strain, vorticity_to_velocity, RotationField, TangentField,
};

/// Time-dependent forcing for the sphere problem, given by its L2 Riesz
/// tangent field sampled at the quadrature nodes.
#[derive(Clone)]
pub enum Forcing2D {
    None,
    Riesz(Arc<dyn Fn(f64, &SphereGrid) -> TangentField + Send + Sync>),
}

impl Forcing2D {
    pub fn sample(&self, t: f64, grid: &SphereGrid) -> Option<TangentField> {
        match self {
            Forcing2D::None => None,
            Forcing2D::Riesz(f) => Some(f(t, grid)),
        }
    }
}

impl std::fmt::Debug for Forcing2D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Forcing2D::None => write!(f, "Forcing2D::None"),
            Forcing2D::Riesz(_) => write!(f, "Forcing2D::Riesz(..)"),
        }
    }
}

/// One ledger sample per accepted step.
#[derive(Debug, Clone)]
pub struct LedgerSample2D {
    pub t: f64,
    /// ||v||^2_{L2}
    pub energy: f64,
    /// ||D_S2(v)||^2_{L2}
    pub dissipation: f64,
    /// <f, v>
    pub forcing_power: f64,
    /// (v, r_{e_i}) for the three axes
    pub momenta: [f64; 3],
}

/// Energy and angular-momentum ledger for a sphere run.
#[derive(Debug, Clone, Default)]
pub struct EnergyLedger2D {
    pub samples: Vec<LedgerSample2D>,
}

impl EnergyLedger2D {
    /// Residual of the energy equality
    /// 1/2 ||v(t)||^2 + 2 nu int ||D(v)||^2 - 1/2 ||v0||^2 - int <f, v>
    /// at the last sample, with trapezoid time integrals.
    pub fn energy_residual(&self, nu: f64) -> f64 {
        if self.samples.len() < 2 {
            return 0.0;
        }
        let first = &self.samples[0];
        let last = self.samples.last().unwrap();
        let mut dissip = 0.0;
        let mut power = 0.0;
        for w in self.samples.windows(2) {
            let dt = w[1].t - w[0].t;
            dissip += 0.5 * dt * (w[0].dissipation + w[1].dissipation);
            power += 0.5 * dt * (w[0].forcing_power + w[1].forcing_power);
        }
        0.5 * last.energy + 2.0 * nu * dissip - 0.5 * first.energy - power
    }

    /// Max drift of each angular momentum from its initial value.
    pub fn momentum_drift(&self) -> [f64; 3] {
        let mut drift = [0.0f64; 3];
        if let Some(first) = self.samples.first() {
            for s in &self.samples {
                for d in 0..3 {
                    drift[d] = drift[d].max((s.momenta[d] - first.momenta[d]).abs());
                }
            }
        }
        drift
    }
}

/// Summary returned by [`SolverState2D::energy_report`].
#[derive(Debug, Clone)]
pub struct EnergyReport2D {
    pub t: f64,
    pub energy: f64,
    pub energy_residual: f64,
    pub momentum_drift: [f64; 3],
    /// E_0 = ||v0||^2 + (1/nu) int_0^t ||f||_*^2 ds (L2 surrogate for the
    /// dual norm when the forcing has an L2 Riesz vector).
    pub e0: f64,
}

/// Time-stepping state for the 2D problem.
pub struct SolverState2D {
    pub grid: Arc<SphereGrid>,
    pub t: f64,
    pub omega: SphCoeffs,
    pub nu: f64,
    pub dt: f64,
    pub forcing: Forcing2D,
    pub ledger: EnergyLedger2D,
    pub steps: usize,
    /// True when the initial field needed a Leray projection.
    pub projected_initial: bool,
    prev_tendency: Option<SphCoeffs>,
    /// running (1/nu)-free int ||f||^2, trapezoid, L2 surrogate
    forcing_sq_integral: f64,
    prev_forcing_sq: f64,
    initial_energy: f64,
}

impl std::fmt::Debug for SolverState2D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolverState2D")
            .field("t", &self.t)
            .field("nu", &self.nu)
            .field("dt", &self.dt)
            .field("steps", &self.steps)
            .finish()
    }
}

/// Initialize the sphere solver from a solenoidal tangential field.
///
/// A field with a gradient component is Leray-projected first and the
/// state records that it happened.
pub fn init_sphere_solver(
    grid: Arc<SphereGrid>,
    v0: &TangentField,
    nu: f64,
    forcing: Forcing2D,
    dt: f64,
) -> Result<SolverState2D> {
    if !(nu > 0.0) {
        return Err(Error::invalid(format!("viscosity must be positive, got {nu}")));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    if v0.normal_residual(&grid) > 1e-8 {
        return Err(Error::invalid("initial field is not tangential"));
    }
    let div = surface_divergence(&grid, v0)?;
    let divnorm = grid.inner(&div, &div)?.max(0.0).sqrt();
    let vnorm = l2_norm_sphere(&grid, v0)?;
    let (v_clean, projected) = if divnorm > 1e-9 * vnorm.max(1.0) {
        (leray_project_sphere(&grid, v0)?, true)
    } else {
        (v0.clone(), false)
    };
    let omega = crate::surfcalc::velocity_to_vorticity(&grid, &v_clean)?;
    let mut state = SolverState2D {
        grid,
        t: 0.0,
        omega,
        nu,
        dt,
        forcing,
        ledger: EnergyLedger2D::default(),
        steps: 0,
        projected_initial: projected,
        prev_tendency: None,
        forcing_sq_integral: 0.0,
        prev_forcing_sq: 0.0,
        initial_energy: 0.0,
    };
    let s = state.sample(0.0)?;
    state.initial_energy = s.energy;
    state.prev_forcing_sq = state.forcing_norm_sq(0.0)?;
    state.ledger.samples.push(s);
    Ok(state)
}

impl SolverState2D {
    /// Current velocity reconstructed from the vorticity.
    pub fn velocity(&self) -> TangentField {
        vorticity_to_velocity(&self.grid, &self.omega)
    }

    fn forcing_norm_sq(&self, t: f64) -> Result<f64> {
        match self.forcing.sample(t, &self.grid) {
            None => Ok(0.0),
            Some(f) => inner_sphere(&self.grid, &f, &f),
        }
    }

    fn sample(&self, t: f64) -> Result<LedgerSample2D> {
        let v = self.velocity();
        let energy = inner_sphere(&self.grid, &v, &v)?;
        let dissipation = surface_strain(&self.grid, &v)?.norm_sq(&self.grid)?;
        let forcing_power = match self.forcing.sample(t, &self.grid) {
            None => 0.0,
            Some(f) => inner_sphere(&self.grid, &f, &v)?,
        };
        let mut momenta = [0.0f64; 3];
        for (d, axis) in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
            .iter()
            .enumerate()
        {
            let ra = RotationField::new(*axis).on_sphere(&self.grid);
            momenta[d] = inner_sphere(&self.grid, &v, &ra)?;
        }
        Ok(LedgerSample2D {
            t,
            energy,
            dissipation,
            forcing_power,
            momenta,
        })
    }

    /// Explicit tendency: -(v . grad) omega + curl f, truncated at lmax.
    fn tendency(&self, t: f64) -> Result<SphCoeffs> {
        let grid = &self.grid;
        let v = self.velocity();
        let gw = grid.grad_coeffs(&self.omega);
        let mut adv = vec![0.0; grid.nang()];
        for idx in 0..grid.nang() {
            let vv = v.at(idx);
            adv[idx] = -(vv[0] * gw[0][idx] + vv[1] * gw[1][idx] + vv[2] * gw[2][idx]);
        }
        if let Some(f) = self.forcing.sample(t, grid) {
            let curlf = surface_curl(grid, &f)?;
            for (a, c) in adv.iter_mut().zip(&curlf) {
                *a += c;
            }
        }
        let mut a = grid.sht_forward(&adv)?;
        a.data[0] = Complex64::new(0.0, 0.0);
        Ok(a)
    }

    /// Advective Courant number for the current state.
    pub fn courant(&self) -> f64 {
        let v = self.velocity();
        let mut vmax = 0.0f64;
        for idx in 0..v.len() {
            vmax = vmax.max(dot3(&v.at(idx), &v.at(idx)).sqrt());
        }
        let h = std::f64::consts::PI / self.grid.nlat as f64;
        vmax * self.dt / h
    }

    /// Advance one IMEX step (Crank-Nicolson viscous, AB2 advective).
    pub fn step(&mut self) -> Result<()> {
        let courant = self.courant();
        if courant > 1.0 {
            return Err(Error::StepRejected(format!(
                "advective Courant number {courant:.3} exceeds 1"
            )));
        }
        let a_now = self.tendency(self.t)?;
        let lmax = self.omega.lmax;
        let mut new = SphCoeffs::zeros(lmax);
        let half_nu_dt = 0.5 * self.nu * self.dt;
        for l in 1..=lmax {
            let mu = 2.0 - (l as f64) * (l as f64 + 1.0);
            let denom = 1.0 - half_nu_dt * mu;
            let gain = 1.0 + half_nu_dt * mu;
            for m in -(l as i64)..=(l as i64) {
                let idx = SphCoeffs::idx(l, m);
                let expl = match &self.prev_tendency {
                    // first step: explicit Euler tendency
                    None => a_now.data[idx],
                    Some(prev) => 1.5 * a_now.data[idx] - 0.5 * prev.data[idx],
                };
                new.data[idx] = (gain * self.omega.data[idx] + self.dt * expl) / denom;
            }
        }
        self.omega = new;
        self.prev_tendency = Some(a_now);
        self.t += self.dt;
        self.steps += 1;
        // ledger bookkeeping
        let fsq = self.forcing_norm_sq(self.t)?;
        self.forcing_sq_integral += 0.5 * self.dt * (self.prev_forcing_sq + fsq);
        self.prev_forcing_sq = fsq;
        let s = self.sample(self.t)?;
        self.ledger.samples.push(s);
        Ok(())
    }

    /// Advance n steps.
    pub fn run(&mut self, n: usize) -> Result<()> {
        for _ in 0..n {
            self.step()?;
        }
        Ok(())
    }

    /// Energy-equality residual and conserved-quantity summary.
    pub fn energy_report(&self) -> Result<EnergyReport2D> {
        if self.steps == 0 {
            return Err(Error::PreconditionError(
                "energy report needs at least one step".into(),
            ));
        }
        let last = self.ledger.samples.last().unwrap();
        Ok(EnergyReport2D {
            t: self.t,
            energy: last.energy,
            energy_residual: self.ledger.energy_residual(self.nu),
            momentum_drift: self.ledger.momentum_drift(),
            e0: self.initial_energy + self.forcing_sq_integral / self.nu,
        })
    }

    /// Angular momentum (v, r_a) at the current time.
    pub fn momentum(&self, axis: [f64; 3]) -> Result<f64> {
        let v = self.velocity();
        let ra = RotationField::new(axis).on_sphere(&self.grid);
        inner_sphere(&self.grid, &v, &ra)
    }
}
