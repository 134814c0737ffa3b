//! Browser demo bindings: an interactive sphere flow, a thin-film
//! convergence study, and a Korn-constant probe, exposed through
//! wasm-bindgen for the static page in `www/`.

use std::sync::Arc;

use wasm_bindgen::prelude::*;

use thinshell::grid::{SphCoeffs, SphereGrid};
use thinshell::harness::{run_sweep, DataPreset, SweepConfig, SweepMode};
use thinshell::sphere_ns::{init_sphere_solver, Forcing2D, SolverState2D};
use thinshell::surfcalc::{self, ProbeKind, RotationField};

fn err_to_js(e: thinshell::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Interactive vorticity-streamfunction flow on the unit sphere.
#[wasm_bindgen]
pub struct SphereFlow {
    state: SolverState2D,
    grid: Arc<SphereGrid>,
}

#[wasm_bindgen]
impl SphereFlow {
    /// Presets: "two-mode-zonal", "random", "rotation", "tilted-bands".
    #[wasm_bindgen(constructor)]
    pub fn new(
        lmax: usize,
        nu: f64,
        dt: f64,
        preset: &str,
        seed: u32,
    ) -> Result<SphereFlow, JsValue> {
        let grid = SphereGrid::new(lmax).map_err(err_to_js)?;
        let v0 = match preset {
            "rotation" => RotationField::new([0.0, 0.0, 1.0]).on_sphere(&grid),
            "two-mode-zonal" => DataPreset::TwoModeZonal {
                l1: 2,
                l2: 3,
                amp1: 6.0,
                amp2: 3.0,
            }
            .initial_field(&grid),
            "tilted-bands" => {
                let mut omega = SphCoeffs::zeros(grid.lmax);
                omega.set(3, 0, num_complex::Complex64::new(5.0, 0.0));
                omega.set(4, 2, num_complex::Complex64::new(2.5, 1.5));
                omega.set(5, 4.min(grid.lmax as i64), num_complex::Complex64::new(0.0, 2.0));
                surfcalc::vorticity_to_velocity(&grid, &omega)
            }
            _ => DataPreset::RandomOrthogonal {
                seed: seed as u64,
                amp: 4.0,
            }
            .initial_field(&grid),
        };
        let state =
            init_sphere_solver(grid.clone(), &v0, nu, Forcing2D::None, dt).map_err(err_to_js)?;
        Ok(SphereFlow { state, grid })
    }

    pub fn step(&mut self, n: usize) -> Result<(), JsValue> {
        self.state.run(n).map_err(err_to_js)
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn energy(&self) -> f64 {
        self.state
            .ledger
            .samples
            .last()
            .map(|s| s.energy)
            .unwrap_or(0.0)
    }

    pub fn momentum_z(&self) -> f64 {
        self.state
            .ledger
            .samples
            .last()
            .map(|s| s.momenta[2])
            .unwrap_or(0.0)
    }

    /// Ledger time series as JSON: {t: [...], energy: [...]}.
    pub fn energy_series(&self) -> String {
        let t: Vec<f64> = self.state.ledger.samples.iter().map(|s| s.t).collect();
        let e: Vec<f64> = self.state.ledger.samples.iter().map(|s| s.energy).collect();
        serde_json::json!({ "t": t, "energy": e }).to_string()
    }

    /// Render the vorticity on an orthographic globe into an RGBA buffer.
    ///
    /// `tilt` and `spin` are view angles in radians; pixels outside the
    /// disk stay transparent.
    pub fn render_vorticity(&self, width: u32, height: u32, tilt: f64, spin: f64) -> Vec<u8> {
        let w = width as usize;
        let h = height as usize;
        let omega = self
            .grid
            .sht_inverse(&self.state.omega)
            .unwrap_or_else(|_| vec![0.0; self.grid.nang()]);
        let mut maxabs = 1e-12f64;
        for v in &omega {
            maxabs = maxabs.max(v.abs());
        }
        let (st, ct) = tilt.sin_cos();
        let (sp, cp) = spin.sin_cos();
        let radius = 0.48 * w.min(h) as f64;
        let cx = w as f64 / 2.0;
        let cy = h as f64 / 2.0;
        let mut img = vec![0u8; w * h * 4];
        for py in 0..h {
            for px in 0..w {
                let x = (px as f64 - cx) / radius;
                let y = (cy - py as f64) / radius;
                let rr = x * x + y * y;
                let o = (py * w + px) * 4;
                if rr > 1.0 {
                    continue;
                }
                let z = (1.0 - rr).sqrt();
                // tilt about the x-axis, then spin about the polar axis
                let y2 = y * ct - z * st;
                let z2 = y * st + z * ct;
                let x3 = x * cp + z2 * sp;
                let z3 = -x * sp + z2 * cp;
                let point = [x3, y2, z3];
                let val = self.sample(&omega, &point) / maxabs;
                let (r, g, b) = diverging_color(val);
                // simple limb shading
                let shade = 0.72 + 0.28 * z;
                img[o] = (r * shade) as u8;
                img[o + 1] = (g * shade) as u8;
                img[o + 2] = (b * shade) as u8;
                img[o + 3] = 255;
            }
        }
        img
    }
}

impl SphereFlow {
    /// Bilinear sample of a nodal field at a unit vector.
    fn sample(&self, f: &[f64], p: &[f64; 3]) -> f64 {
        let g = &self.grid;
        let theta = p[2].clamp(-1.0, 1.0).acos();
        let phi = p[1].atan2(p[0]).rem_euclid(2.0 * std::f64::consts::PI);
        let nlat = g.nlat;
        let nlon = g.nlon;
        // rings are stored with descending theta
        let mut lo = 0usize;
        let mut hi = nlat - 1;
        if theta >= g.theta[0] {
            hi = 0;
        } else if theta <= g.theta[nlat - 1] {
            lo = nlat - 1;
        } else {
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if g.theta[mid] > theta {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let (i0, i1, wlat) = if lo == hi {
            (lo, lo, 0.0)
        } else {
            let t0 = g.theta[lo];
            let t1 = g.theta[hi];
            (lo, hi, ((theta - t0) / (t1 - t0)).clamp(0.0, 1.0))
        };
        let fx = phi / (2.0 * std::f64::consts::PI) * nlon as f64;
        let j0 = (fx.floor() as usize) % nlon;
        let j1 = (j0 + 1) % nlon;
        let wlon = fx - fx.floor();
        let v00 = f[i0 * nlon + j0];
        let v01 = f[i0 * nlon + j1];
        let v10 = f[i1 * nlon + j0];
        let v11 = f[i1 * nlon + j1];
        (1.0 - wlat) * ((1.0 - wlon) * v00 + wlon * v01)
            + wlat * ((1.0 - wlon) * v10 + wlon * v11)
    }
}

/// Blue-white-red diverging colormap on [-1, 1], returning 0..255 floats.
fn diverging_color(v: f64) -> (f64, f64, f64) {
    let v = v.clamp(-1.0, 1.0);
    if v < 0.0 {
        let t = 1.0 + v;
        (60.0 + 195.0 * t, 80.0 + 175.0 * t, 255.0)
    } else {
        let t = 1.0 - v;
        (255.0, 60.0 + 195.0 * t, 60.0 + 195.0 * t)
    }
}

/// Run a manufactured thin-film sweep and return the rate data as JSON:
/// {eps, d_sol, avg_diff, slope_d_sol, slope_avg}.
#[wasm_bindgen]
pub fn convergence_study(
    lmax: usize,
    nrad: usize,
    nu: f64,
    dt: f64,
    t_final: f64,
) -> Result<String, JsValue> {
    let grid = SphereGrid::new(lmax).map_err(err_to_js)?;
    let config = SweepConfig {
        lmax,
        nrad,
        nu,
        dt,
        t_final,
        eps_list: vec![0.2, 0.1, 0.05, 0.025],
        mode: SweepMode::Manufactured,
        data: DataPreset::TwoModeZonal {
            l1: 2,
            l2: 3,
            amp1: 1.0,
            amp2: 0.5,
        },
        sample_stride: 5,
        seed: 1,
    };
    let report = run_sweep(&config, &grid).map_err(err_to_js)?;
    let eps: Vec<f64> = report.entries.iter().map(|e| e.eps).collect();
    let d_sol: Vec<f64> = report.entries.iter().map(|e| e.d_sol).collect();
    let avg: Vec<f64> = report.entries.iter().map(|e| e.sup_avg_diff).collect();
    Ok(serde_json::json!({
        "eps": eps,
        "d_sol": d_sol,
        "avg_diff": avg,
        "slope_d_sol": report.slope_d_sol,
        "slope_avg": report.slope_avg_diff,
    })
    .to_string())
}

/// Empirical Korn constants: sphere plus a shell eps-sweep, as JSON.
#[wasm_bindgen]
pub fn korn_probe(lmax: usize, nrad: usize, samples: usize, seed: u32) -> Result<String, JsValue> {
    let grid = SphereGrid::new(lmax).map_err(err_to_js)?;
    let mut shells = Vec::new();
    for eps in [0.2, 0.1, 0.05] {
        shells.push(thinshell::grid::ShellGrid::new(grid.clone(), eps, nrad).map_err(err_to_js)?);
    }
    let sphere = surfcalc::probe_inequality(
        ProbeKind::KornSphere,
        samples,
        &grid,
        &[],
        seed as u64,
        true,
    )
    .map_err(err_to_js)?;
    let shell = surfcalc::probe_inequality(
        ProbeKind::KornShellUniform,
        samples,
        &grid,
        &shells,
        seed as u64,
        false,
    )
    .map_err(err_to_js)?;
    let shell_eps: Vec<f64> = shell.per_eps.iter().filter_map(|p| p.eps).collect();
    let shell_ratio: Vec<f64> = shell.per_eps.iter().map(|p| p.max_ratio).collect();
    Ok(serde_json::json!({
        "sphere_constant": sphere.per_eps[0].max_ratio,
        "killing_flagged": sphere.killing_flagged,
        "shell_eps": shell_eps,
        "shell_constants": shell_ratio,
    })
    .to_string())
}
