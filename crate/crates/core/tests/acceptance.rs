//! Acceptance suite: one test per gate criterion, each printing a
//! PASS/FAIL line with the measured quantities.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture` to see
//! every line; the assertions carry the same numbers either way.

use std::sync::Arc;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::SeedableRng;

use thinshell::avgext::{extend_constant, extend_weighted};
use thinshell::grid::{ShellGrid, SphCoeffs, SphereGrid};
use thinshell::harness::{
    global_mode_check, run_sweep, scaling_ratio_suite, DataPreset, SweepConfig, SweepMode,
};
use thinshell::opscheck::identity_suite;
use thinshell::shell_ns::{init_shell_solver, Forcing3D};
use thinshell::sphere_ns::{init_sphere_solver, Forcing2D};
use thinshell::surfcalc::{
    self, inner_sphere, l2_norm_shell, l2_norm_sphere, probe_inequality, random_coeffs,
    random_tangent_field, stream_velocity, vorticity_to_velocity, ProbeKind, RotationField,
};

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "[{}] criterion {}: {}",
        if pass { "PASS" } else { "FAIL" },
        criterion,
        detail
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_1_operator_identity_suite() {
    let t0 = std::time::Instant::now();
    let checks = identity_suite(12, 10, 0.1, 20250808).unwrap();
    let tol = 1e-8;
    let names = [
        "normal-gradient", "tangential-part-gradient", "tangential-part-strain", "gauss-formula", "gradient-decomposition", "constant-extension-gradient", "matrix-inner-identities",
        "average-gradient-exchange", "average-divergence-exchange", "tangential-average-divergence", "extension-gradient", "extension-divergence", "extension-strain",
        "extension-advection", "unfold-pairing",
    ];
    let mut worst = 0.0f64;
    for name in names {
        let c = checks
            .iter()
            .find(|c| c.name == name)
            .unwrap_or_else(|| panic!("identity {name} missing from suite"));
        worst = worst.max(c.residual);
    }
    let elapsed = t0.elapsed().as_secs_f64();
    report(
        "1 (operator identities)",
        worst <= tol && elapsed < 30.0,
        &format!(
            "{} identities at lmax=12 nrad=10 eps=0.1, worst residual {:.3e} (tol {:.0e}), {:.2}s",
            names.len(),
            worst,
            tol,
            elapsed
        ),
    );
}

#[test]
fn criterion_2_explicit_constant_bounds() {
    let grid = SphereGrid::new(10).unwrap();
    let mut violations = 0usize;
    let mut max_ratio_bar = 0.0f64;
    let mut max_ratio_diff = 0.0f64;
    for &eps in &[0.2, 0.1, 0.05] {
        let shell = ShellGrid::new(grid.clone(), eps, 10).unwrap();
        let mut rng = StdRng::seed_from_u64(2);
        for _ in 0..100 {
            let v = random_tangent_field(&grid, &mut rng);
            let vnorm = l2_norm_sphere(&grid, &v).unwrap();
            let vbar = extend_constant(&shell, &v).unwrap();
            let ve = extend_weighted(&shell, &v).unwrap();
            // ||eta-bar|| <= 2 eps^(1/2) ||eta||
            let nbar = l2_norm_shell(&shell, &vbar).unwrap();
            max_ratio_bar = max_ratio_bar.max(nbar / (2.0 * eps.sqrt() * vnorm));
            if nbar > 2.0 * eps.sqrt() * vnorm {
                violations += 1;
            }
            // ||v_E - v-bar|| <= 2 eps^(3/2) ||v||
            let mut d = ve.clone();
            d.axpy(-1.0, &vbar);
            let ndiff = l2_norm_shell(&shell, &d).unwrap();
            max_ratio_diff = max_ratio_diff.max(ndiff / (2.0 * eps.powf(1.5) * vnorm));
            if ndiff > 2.0 * eps.powf(1.5) * vnorm {
                violations += 1;
            }
        }
    }
    report(
        "2 (explicit constant 2 bounds)",
        violations == 0,
        &format!(
            "100 fields x 3 eps, 0 required: {violations} violations; sharpest fractions of the bound: {:.3}, {:.3}",
            max_ratio_bar, max_ratio_diff
        ),
    );
}

#[test]
fn criterion_3_scaling_ratio_suite() {
    let t0 = std::time::Instant::now();
    let grid = SphereGrid::new(8).unwrap();
    let ratios = scaling_ratio_suite(&grid, 10, &[0.2, 0.1, 0.05, 0.025], 3, 3).unwrap();
    let mut all_ok = true;
    let mut detail = String::new();
    for r in &ratios {
        let ok = r.spread < 4.0 && !r.monotone_blowup;
        if !ok {
            all_ok = false;
        }
        detail.push_str(&format!("{}: spread {:.2}; ", r.name, r.spread));
    }
    let elapsed = t0.elapsed().as_secs_f64();
    if elapsed >= 120.0 {
        all_ok = false;
    }
    report(
        "3 (scaling-law ratios)",
        all_ok,
        &format!("{detail}runtime {elapsed:.1}s (< 120s)"),
    );
}

#[test]
fn criterion_4_sphere_solver_physics() {
    let grid = SphereGrid::new(8).unwrap();

    // (a) single-mode linear decay at dt = 1e-3, t = 0.1, nu = 1
    let mut omega0 = SphCoeffs::zeros(grid.lmax);
    omega0.set(2, 1, Complex64::new(0.8, -0.4));
    let v0 = vorticity_to_velocity(&grid, &omega0);
    let mut st = init_sphere_solver(grid.clone(), &v0, 1.0, Forcing2D::None, 1e-3).unwrap();
    st.run(100).unwrap();
    let factor = (-4.0f64 * 0.1).exp(); // mu_2 = 2 - 6 = -4
    let rel = (st.omega.get(2, 1) - omega0.get(2, 1) * factor).norm()
        / (omega0.get(2, 1) * factor).norm();
    let pass_a = rel < 1e-6;

    // (b) energy-equality residual drops by >= 3.5 when dt halves
    let mut rng = StdRng::seed_from_u64(4);
    let vr = stream_velocity(&grid, &random_coeffs(grid.lmax, &mut rng));
    let mut residuals = Vec::new();
    for &dt in &[2e-3, 1e-3] {
        let mut s = init_sphere_solver(grid.clone(), &vr, 0.5, Forcing2D::None, dt).unwrap();
        s.run((0.1 / dt).round() as usize).unwrap();
        residuals.push(s.energy_report().unwrap().energy_residual.abs());
    }
    let order_ratio = residuals[0] / residuals[1];
    let pass_b = order_ratio >= 3.5;

    // (c) rotation field stationary over [0, 1]
    let ra = RotationField::new([0.0, 0.0, 1.0]).on_sphere(&grid);
    let mut s = init_sphere_solver(grid.clone(), &ra, 1.0, Forcing2D::None, 0.01).unwrap();
    s.run(100).unwrap();
    let v = s.velocity();
    let mut d = v.clone();
    d.axpy(-1.0, &ra);
    let drift = l2_norm_sphere(&grid, &d).unwrap();
    let pass_c = drift < 1e-8;

    // (d) angular momenta conserved to 1e-9 under orthogonal data
    let mut psi = random_coeffs(grid.lmax, &mut rng);
    for m in -1i64..=1 {
        psi.data[SphCoeffs::idx(1, m)] = Complex64::new(0.0, 0.0);
    }
    let v0 = stream_velocity(&grid, &psi);
    let mut fpsi = random_coeffs(grid.lmax, &mut rng);
    for m in -1i64..=1 {
        fpsi.data[SphCoeffs::idx(1, m)] = Complex64::new(0.0, 0.0);
    }
    let forcing = Forcing2D::Riesz(Arc::new(move |_t, g: &SphereGrid| {
        stream_velocity(g, &fpsi)
    }));
    let mut s = init_sphere_solver(grid.clone(), &v0, 1.0, forcing, 2e-3).unwrap();
    s.run(100).unwrap();
    let drift_m = s
        .ledger
        .momentum_drift()
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    let pass_d = drift_m < 1e-9;

    report(
        "4 (2D solver physics)",
        pass_a && pass_b && pass_c && pass_d,
        &format!(
            "mode decay rel {rel:.2e} (<1e-6); residual ratio {order_ratio:.2} (>=3.5); \
             rotation drift {drift:.2e} (<1e-8); momentum drift {drift_m:.2e} (<1e-9)"
        ),
    );
}

#[test]
fn criterion_5_shell_solver_physics() {
    let t0 = std::time::Instant::now();
    // lmax = 10, nrad = 8, eps = 0.1; T = 0.5
    let grid = SphereGrid::new(10).unwrap();
    let shell = ShellGrid::new(grid.clone(), 0.1, 8).unwrap();
    let mut rng = StdRng::seed_from_u64(5);
    let mut psi = random_coeffs(grid.lmax, &mut rng);
    for m in -1i64..=1 {
        psi.data[SphCoeffs::idx(1, m)] = Complex64::new(0.0, 0.0);
    }
    let v = stream_velocity(&grid, &psi);
    let mut u0 = extend_weighted(&shell, &v).unwrap();
    let scale = l2_norm_shell(&shell, &u0).unwrap();
    u0.scale(0.05 / scale);
    let nu = 0.05;
    let dt = 4e-4;
    let mut st = init_shell_solver(shell.clone(), &u0, nu, Forcing3D::None, dt).unwrap();
    st.run((0.5 / dt).round() as usize).unwrap();
    let (div, bn, bs) = st.ledger.max_residuals();
    let e0 = 0.5 * st.ledger.samples[0].energy;
    let slack = st.ledger.worst_energy_slack(nu);
    let drift = st
        .ledger
        .momentum_drift()
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    let elapsed = t0.elapsed().as_secs_f64();
    let pass = div < 1e-9
        && bn < 1e-9
        && bs < 1e-7
        && slack > -1e-6 * e0
        && drift < 1e-8
        && elapsed < 300.0;
    report(
        "5 (3D solver physics)",
        pass,
        &format!(
            "div {div:.2e} (<1e-9); u.n {bn:.2e} (<1e-9); stress {bs:.2e} (<1e-7); \
             energy slack {:.2e} rel (>-1e-6); momentum drift {drift:.2e} (<1e-8); {elapsed:.0}s (<300s)",
            slack / e0
        ),
    );
}

#[test]
fn criterion_6_local_rate_check() {
    let t0 = std::time::Instant::now();
    let grid = SphereGrid::new(8).unwrap();
    let config = SweepConfig {
        lmax: 8,
        nrad: 10,
        nu: 1.0,
        dt: 1e-3,
        t_final: 0.5,
        eps_list: vec![0.2, 0.1, 0.05, 0.025],
        mode: SweepMode::Manufactured,
        data: DataPreset::TwoModeZonal {
            l1: 2,
            l2: 3,
            amp1: 1.0,
            amp2: 0.5,
        },
        sample_stride: 5,
        seed: 6,
    };
    let rep = run_sweep(&config, &grid).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    let pass = rep.entries.iter().all(|e| e.failure.is_none())
        && rep.slope_d_sol >= 1.8
        && rep.slope_avg_diff >= 0.9
        && elapsed < 600.0;
    report(
        "6 (local difference-estimate rates)",
        pass,
        &format!(
            "slope D_sol {:.3} (>=1.8, theory 2); slope sup|M0 u - v| {:.3} (>=0.9, theory 1); {elapsed:.0}s (<600s)",
            rep.slope_d_sol, rep.slope_avg_diff
        ),
    );
}

#[test]
fn criterion_7_global_mode() {
    let grid = SphereGrid::new(8).unwrap();
    let config = SweepConfig {
        lmax: 8,
        nrad: 10,
        nu: 1.0,
        dt: 0.01,
        t_final: 50.0,
        eps_list: vec![0.2, 0.1, 0.05, 0.025],
        mode: SweepMode::Manufactured,
        data: DataPreset::TwoModeZonal {
            l1: 2,
            l2: 3,
            amp1: 1.0,
            amp2: 0.5,
        },
        sample_stride: 100,
        seed: 7,
    };
    // horizon 50 / nu with nu = 1
    let rep = global_mode_check(&config, &grid, 50.0).unwrap();
    let pass = rep.energy_bound_ratio <= 4.0 && rep.sweep.slope_extra_dissipation >= 1.8;
    report(
        "7 (global mode)",
        pass,
        &format!(
            "energy bound ratio {:.3} (<=4); extra-dissipation slope {:.3} (>=1.8); fitted global constants <= {:.3}",
            rep.energy_bound_ratio,
            rep.sweep.slope_extra_dissipation,
            rep.global_bound_ratios.iter().cloned().fold(0.0, f64::max)
        ),
    );
}

#[test]
fn criterion_8_korn_probes() {
    let grid = SphereGrid::new(10).unwrap();
    let sphere_report =
        probe_inequality(ProbeKind::KornSphere, 50, &grid, &[], 8, true).unwrap();
    let mut shells = Vec::new();
    for &eps in &[0.2, 0.1, 0.05] {
        shells.push(ShellGrid::new(grid.clone(), eps, 10).unwrap());
    }
    let shell_report =
        probe_inequality(ProbeKind::KornShellUniform, 50, &grid, &shells, 8, false).unwrap();
    let sphere_max = sphere_report.per_eps[0].max_ratio;
    let shell_max: Vec<f64> = shell_report.per_eps.iter().map(|p| p.max_ratio).collect();
    let mx = shell_max.iter().cloned().fold(f64::MIN, f64::max);
    let mn = shell_max.iter().cloned().fold(f64::MAX, f64::min);
    let variation = (mx - mn) / mn;
    let pass = sphere_report.killing_flagged
        && sphere_max.is_finite()
        && shell_max.iter().all(|r| r.is_finite())
        && variation < 0.25;
    // orthogonality-deflated samples never degenerate
    let pass = pass && sphere_report.skipped == 0 && shell_report.skipped == 0;
    report(
        "8 (Korn probes)",
        pass,
        &format!(
            "sphere constant {sphere_max:.3}; shell constants {:?} (variation {:.1}% < 25%); killing flagged: {}",
            shell_max
                .iter()
                .map(|v| (v * 1000.0).round() / 1000.0)
                .collect::<Vec<_>>(),
            variation * 100.0,
            sphere_report.killing_flagged
        ),
    );
}

// the fields r_a are also exercised across the suite; keep one direct check
// that the shell rotation stays conserved under the 3D stepper with data
// orthogonality (part of criterion 5's conditions)
#[test]
fn rotation_momentum_cross_check() {
    let grid = SphereGrid::new(6).unwrap();
    let shell = ShellGrid::new(grid.clone(), 0.1, 8).unwrap();
    let ra = RotationField::new([0.0, 0.0, 1.0]).on_shell(&shell);
    let mut st = init_shell_solver(shell.clone(), &ra, 1.0, Forcing3D::None, 2e-3).unwrap();
    st.run(25).unwrap();
    let m0 = st.ledger.samples[0].momenta[2];
    let m1 = st.ledger.samples.last().unwrap().momenta[2];
    assert!((m1 - m0).abs() < 1e-8 * m0.abs());
    // sanity: the momentum equals the closed-form radial factor
    let vsph = RotationField::new([0.0, 0.0, 1.0]).on_sphere(&grid);
    let rsq = inner_sphere(&grid, &vsph, &vsph).unwrap();
    let e5 = ((1.0 + shell.eps).powi(5) - 1.0) / 5.0;
    assert!((m0 - e5 * rsq).abs() < 1e-9 * m0.abs());
    let _ = surfcalc::l2_norm_shell(&shell, &ra).unwrap();
}
