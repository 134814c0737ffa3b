//! Command-line driver: operator-identity checks, solver runs, difference
//! studies and Korn probes, with CSV/JSON outputs and run manifests.
//!
//! Exit codes: 0 success, 1 a check failed or a run was rejected,
//! 2 usage or configuration errors.

mod config;
mod csvout;

use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;

use thinshell::checkpoint::{ShellCheckpoint, SphereCheckpoint};
use thinshell::grid::{ShellGrid, SphereGrid};
use thinshell::harness::{
    global_mode_check, run_sweep, scaling_ratio_suite, DataPreset, SweepConfig, SweepMode,
    SweepReport,
};
use thinshell::opscheck::identity_suite;
use thinshell::shell_ns::{init_shell_solver, Forcing3D};
use thinshell::sphere_ns::{init_sphere_solver, Forcing2D};
use thinshell::surfcalc::{self, ProbeKind, RotationField, TangentField, VolumeField};
use thinshell::Error;

use config::{manifest_body, parse_args, usage, RunConfig};
use csvout::CsvWriter;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cfg = match parse_args(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("{}", usage());
            return ExitCode::from(2);
        }
    };
    if let Err(e) = std::fs::create_dir_all(&cfg.out) {
        eprintln!("error: cannot create output directory: {e}");
        return ExitCode::from(2);
    }
    let manifest_path = cfg.out.join(format!("manifest-{}.txt", cfg.command));
    if std::fs::write(&manifest_path, manifest_body(&cfg)).is_err() {
        eprintln!("error: cannot write manifest");
        return ExitCode::from(2);
    }

    let result = match cfg.command.as_str() {
        "ops-check" => cmd_ops_check(&cfg),
        "solve-sphere" => cmd_solve(&cfg, true),
        "solve-shell" => cmd_solve(&cfg, false),
        "diff-study" => cmd_diff_study(&cfg),
        "korn-probe" => cmd_korn_probe(&cfg),
        _ => unreachable!(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidParameter(_)
                | Error::ConfigurationError(_)
                | Error::PreconditionError(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> thinshell::Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::DataError(format!("json serialization: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn cmd_ops_check(cfg: &RunConfig) -> thinshell::Result<ExitCode> {
    let checks = identity_suite(cfg.lmax, cfg.nrad, cfg.eps, cfg.seed)?;
    write_json(&cfg.out.join("ops-check.json"), &checks)?;
    let mut worst = 0.0f64;
    let mut failures = 0usize;
    for c in &checks {
        let ok = c.residual <= cfg.tol;
        println!(
            "{} {:12} residual {:.3e} (tol {:.1e})",
            if ok { "ok  " } else { "FAIL" },
            c.name,
            c.residual,
            cfg.tol
        );
        worst = worst.max(c.residual);
        if !ok {
            failures += 1;
        }
    }
    println!("{} identities, worst residual {:.3e}", checks.len(), worst);
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn sphere_initial(cfg: &RunConfig, grid: &Arc<SphereGrid>) -> thinshell::Result<TangentField> {
    match cfg.preset.as_str() {
        "rotation" => Ok(RotationField::new([0.0, 0.0, 1.0]).on_sphere(grid)),
        "two-mode-zonal" => Ok(DataPreset::TwoModeZonal {
            l1: 2,
            l2: 3,
            amp1: 1.0,
            amp2: 0.5,
        }
        .initial_field(grid)),
        "random" => Ok(DataPreset::RandomOrthogonal {
            seed: cfg.seed,
            amp: 1.0,
        }
        .initial_field(grid)),
        "zero" => Ok(TangentField::zeros(grid)),
        other => Err(Error::ConfigurationError(format!(
            "unknown preset '{other}' (rotation | two-mode-zonal | random | zero)"
        ))),
    }
}

fn shell_initial(cfg: &RunConfig, grid: &Arc<ShellGrid>) -> thinshell::Result<VolumeField> {
    match cfg.preset.as_str() {
        "rotation" => Ok(RotationField::new([0.0, 0.0, 1.0]).on_shell(grid)),
        "zero" => Ok(VolumeField::zeros(grid)),
        "two-mode-zonal" | "random" => {
            let v = sphere_initial(cfg, &grid.base)?;
            thinshell::avgext::extend_weighted(grid, &v)
        }
        other => Err(Error::ConfigurationError(format!(
            "unknown preset '{other}' (rotation | two-mode-zonal | random | zero)"
        ))),
    }
}

fn cmd_solve(cfg: &RunConfig, sphere_cmd: bool) -> thinshell::Result<ExitCode> {
    let grid = SphereGrid::new(cfg.lmax)?;
    let nsteps = (cfg.t_final / cfg.dt).round().max(1.0) as usize;
    if sphere_cmd {
        let v0 = sphere_initial(cfg, &grid)?;
        let mut st = init_sphere_solver(grid.clone(), &v0, cfg.nu, Forcing2D::None, cfg.dt)?;
        let mut csv = CsvWriter::new(&cfg.out.join("sphere-ledger.csv"))?;
        csv.header(&[
            "t",
            "energy",
            "dissipation",
            "forcing_power",
            "momentum_x",
            "momentum_y",
            "momentum_z",
        ])?;
        let write_row = |csv: &mut CsvWriter, s: &thinshell::sphere_ns::LedgerSample2D| {
            csv.row(&[
                s.t,
                s.energy,
                s.dissipation,
                s.forcing_power,
                s.momenta[0],
                s.momenta[1],
                s.momenta[2],
            ])
        };
        write_row(&mut csv, &st.ledger.samples[0])?;
        for step in 1..=nsteps {
            if let Err(e) = st.step() {
                eprintln!("step {step}: {e}");
                eprintln!("courant number was {:.3}", st.courant());
                return Ok(ExitCode::from(1));
            }
            if step % cfg.stride == 0 || step == nsteps {
                write_row(&mut csv, st.ledger.samples.last().unwrap())?;
            }
        }
        let ck = SphereCheckpoint::from_state(&st);
        write_json(&cfg.out.join("sphere-checkpoint.json"), &ck)?;
        let report = st.energy_report()?;
        write_json(
            &cfg.out.join("sphere-energy-report.json"),
            &SphereRunSummary {
                t: report.t,
                energy: report.energy,
                energy_residual: report.energy_residual,
                momentum_drift: report.momentum_drift,
                e0: report.e0,
            },
        )?;
        println!(
            "sphere run t = {:.4}: energy {:.6e}, energy residual {:.3e}, momentum drift {:.3e}",
            report.t,
            report.energy,
            report.energy_residual,
            report.momentum_drift.iter().cloned().fold(0.0, f64::max)
        );
        Ok(ExitCode::SUCCESS)
    } else {
        let shell = ShellGrid::new(grid, cfg.eps, cfg.nrad)?;
        let u0 = shell_initial(cfg, &shell)?;
        let mut st = init_shell_solver(shell.clone(), &u0, cfg.nu, Forcing3D::None, cfg.dt)?;
        let mut csv = CsvWriter::new(&cfg.out.join("shell-ledger.csv"))?;
        csv.header(&[
            "t",
            "energy",
            "dissipation",
            "forcing_power",
            "momentum_x",
            "momentum_y",
            "momentum_z",
            "div_residual",
            "bc_normal_residual",
            "bc_stress_residual",
        ])?;
        let write_row = |csv: &mut CsvWriter, s: &thinshell::shell_ns::LedgerSample3D| {
            csv.row(&[
                s.t,
                s.energy,
                s.dissipation,
                s.forcing_power,
                s.momenta[0],
                s.momenta[1],
                s.momenta[2],
                s.div_residual,
                s.bc_normal_residual,
                s.bc_stress_residual,
            ])
        };
        write_row(&mut csv, &st.ledger.samples[0])?;
        for step in 1..=nsteps {
            if let Err(e) = st.step3d() {
                eprintln!("step {step}: {e}");
                eprintln!("courant number was {:.3}", st.courant()?);
                return Ok(ExitCode::from(1));
            }
            if step % cfg.stride == 0 || step == nsteps {
                write_row(&mut csv, st.ledger.samples.last().unwrap())?;
            }
        }
        let ck = ShellCheckpoint::from_state(&st);
        write_json(&cfg.out.join("shell-checkpoint.json"), &ck)?;
        let slack = st.ledger.worst_energy_slack(cfg.nu);
        let (div, bn, bs) = st.ledger.max_residuals();
        println!(
            "shell run t = {:.4}: energy {:.6e}, worst slack {:.3e}, div {:.2e}, bc ({:.2e}, {:.2e})",
            st.t,
            st.ledger.samples.last().unwrap().energy,
            slack,
            div,
            bn,
            bs
        );
        Ok(ExitCode::SUCCESS)
    }
}

#[derive(serde::Serialize)]
struct SphereRunSummary {
    t: f64,
    energy: f64,
    energy_residual: f64,
    momentum_drift: [f64; 3],
    e0: f64,
}

fn sweep_config(cfg: &RunConfig) -> thinshell::Result<SweepConfig> {
    let eps_list = cfg.eps_list.clone().ok_or_else(|| {
        Error::ConfigurationError("diff-study needs --eps with a comma list".into())
    })?;
    if eps_list.len() < 3 {
        return Err(Error::ConfigurationError(format!(
            "diff-study needs at least 3 eps values, got {}",
            eps_list.len()
        )));
    }
    let data = match cfg.preset.as_str() {
        "two-mode-zonal" => DataPreset::TwoModeZonal {
            l1: 2,
            l2: 3,
            amp1: 1.0,
            amp2: 0.5,
        },
        "random" => DataPreset::RandomOrthogonal {
            seed: cfg.seed,
            amp: 1.0,
        },
        "rotation" => DataPreset::TwoModeZonal {
            l1: 1,
            l2: 2,
            amp1: 1.0,
            amp2: 0.0,
        },
        other => {
            return Err(Error::ConfigurationError(format!(
                "unknown preset '{other}' for diff-study"
            )))
        }
    };
    let mode = match cfg.mode.as_str() {
        "manufactured" | "global" => SweepMode::Manufactured,
        "timestep" => SweepMode::Timestep,
        other => {
            return Err(Error::ConfigurationError(format!(
                "unknown mode '{other}' (manufactured | timestep | global)"
            )))
        }
    };
    Ok(SweepConfig {
        lmax: cfg.lmax,
        nrad: cfg.nrad,
        nu: cfg.nu,
        dt: cfg.dt,
        t_final: cfg.t_final,
        eps_list,
        mode,
        data,
        sample_stride: cfg.stride,
        seed: cfg.seed,
    })
}

fn write_sweep_outputs(cfg: &RunConfig, report: &SweepReport) -> thinshell::Result<()> {
    write_json(&cfg.out.join("sweep-report.json"), report)?;
    let mut csv = CsvWriter::new(&cfg.out.join("sweep.csv"))?;
    csv.header(&[
        "eps",
        "t_final",
        "D_data",
        "D_sol",
        "Dsol_grad_tan",
        "Dsol_grad_rad",
        "F_v",
        "G_v",
        "sup_avg_diff",
        "extra_dissipation",
        "slope_D_sol",
        "slope_avg_diff",
        "slope_extra_dissipation",
    ])?;
    for e in &report.entries {
        csv.row(&[
            e.eps,
            e.t_final,
            e.d_data,
            e.d_sol,
            e.dsol_grad_tan,
            e.dsol_grad_rad,
            e.f_v,
            e.g_v,
            e.sup_avg_diff,
            e.extra_dissipation,
            report.slope_d_sol,
            report.slope_avg_diff,
            report.slope_extra_dissipation,
        ])?;
    }
    // gnuplot-friendly rate table
    let mut table = String::from("# eps  D_sol  sup_avg_diff  extra_dissipation\n");
    for e in &report.entries {
        table.push_str(&format!(
            "{:.6e}  {:.12e}  {:.12e}  {:.12e}\n",
            e.eps, e.d_sol, e.sup_avg_diff, e.extra_dissipation
        ));
    }
    table.push_str(&format!(
        "# slopes: D_sol {:.4}  avg {:.4}  extra {:.4}\n",
        report.slope_d_sol, report.slope_avg_diff, report.slope_extra_dissipation
    ));
    std::fs::write(cfg.out.join("rates.dat"), table)?;
    Ok(())
}

fn cmd_diff_study(cfg: &RunConfig) -> thinshell::Result<ExitCode> {
    let sweep_cfg = sweep_config(cfg)?;
    let sphere = SphereGrid::new(cfg.lmax)?;
    if cfg.mode == "global" {
        let horizon = if cfg.horizon > 0.0 {
            cfg.horizon
        } else {
            50.0 / cfg.nu
        };
        let report = global_mode_check(&sweep_cfg, &sphere, horizon)?;
        write_json(&cfg.out.join("global-report.json"), &report)?;
        write_sweep_outputs(cfg, &report.sweep)?;
        println!(
            "global mode: energy bound ratio {:.3} (E0 {:.4e}), extra-dissipation slope {:.3}",
            report.energy_bound_ratio, report.e0, report.sweep.slope_extra_dissipation
        );
        let failed = report.sweep.entries.iter().any(|e| e.failure.is_some());
        return Ok(if failed {
            ExitCode::from(1)
        } else {
            ExitCode::SUCCESS
        });
    }
    let report = run_sweep(&sweep_cfg, &sphere)?;
    write_sweep_outputs(cfg, &report)?;
    for e in &report.entries {
        match &e.failure {
            None => println!(
                "eps {:>7.4}: D_data {:.4e}  D_sol {:.4e}  sup|M0 u - v| {:.4e}",
                e.eps, e.d_data, e.d_sol, e.sup_avg_diff
            ),
            Some(msg) => println!("eps {:>7.4}: FAILED ({msg})", e.eps),
        }
    }
    println!(
        "slopes: D_sol {:.3}  sup|M0 u - v| {:.3}",
        report.slope_d_sol, report.slope_avg_diff
    );
    let failed = report.entries.iter().any(|e| e.failure.is_some());
    Ok(if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_korn_probe(cfg: &RunConfig) -> thinshell::Result<ExitCode> {
    let sphere = SphereGrid::new(cfg.lmax)?;
    let eps_list = cfg.eps_list.clone().unwrap_or_else(|| vec![0.2, 0.1, 0.05]);
    let mut shells = Vec::new();
    for &eps in &eps_list {
        shells.push(ShellGrid::new(sphere.clone(), eps, cfg.nrad)?);
    }
    let sphere_report = surfcalc::probe_inequality(
        ProbeKind::KornSphere,
        cfg.samples,
        &sphere,
        &[],
        cfg.seed,
        true,
    )?;
    let shell_report = surfcalc::probe_inequality(
        ProbeKind::KornShellUniform,
        cfg.samples,
        &sphere,
        &shells,
        cfg.seed,
        false,
    )?;
    write_json(&cfg.out.join("korn-sphere.json"), &sphere_report)?;
    write_json(&cfg.out.join("korn-shell.json"), &shell_report)?;
    let mut csv = CsvWriter::new(&cfg.out.join("korn.csv"))?;
    csv.header(&["eps", "max_ratio"])?;
    csv.row_mixed(&["-".to_string()], &[sphere_report.per_eps[0].max_ratio])?;
    for pe in &shell_report.per_eps {
        csv.row(&[pe.eps.unwrap_or(f64::NAN), pe.max_ratio])?;
    }
    println!(
        "sphere Korn: max ratio {:.4} over {} samples (killing flagged: {})",
        sphere_report.per_eps[0].max_ratio, cfg.samples, sphere_report.killing_flagged
    );
    for pe in &shell_report.per_eps {
        println!(
            "shell Korn eps {:.4}: max ratio {:.4}",
            pe.eps.unwrap_or(f64::NAN),
            pe.max_ratio
        );
    }
    // also emit the scaling-ratio suite over the same eps list
    let ratios = scaling_ratio_suite(&sphere, cfg.nrad, &eps_list, 3, cfg.seed)?;
    write_json(&cfg.out.join("scaling-ratios.json"), &ratios)?;
    Ok(ExitCode::SUCCESS)
}
