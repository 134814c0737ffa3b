//! Flat key-value run configuration with command-line overrides.
//!
//! The config format is one `key = value` pair per line, `#` comments;
//! command-line flags override file values. Manifests echo the effective
//! configuration so runs are trivially diffable.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: String,
    pub lmax: usize,
    pub nrad: usize,
    pub eps: f64,
    pub eps_list: Option<Vec<f64>>,
    pub nu: f64,
    pub dt: f64,
    pub t_final: f64,
    pub mode: String,
    pub preset: String,
    pub out: PathBuf,
    pub seed: u64,
    pub tol: f64,
    pub samples: usize,
    pub stride: usize,
    pub horizon: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: String::new(),
            lmax: 10,
            nrad: 8,
            eps: 0.1,
            eps_list: None,
            nu: 1.0,
            dt: 1e-3,
            t_final: 0.5,
            mode: "manufactured".to_string(),
            preset: "two-mode-zonal".to_string(),
            out: PathBuf::from("out"),
            seed: 0,
            tol: 1e-8,
            samples: 50,
            stride: 5,
            horizon: 0.0,
        }
    }
}

#[derive(Debug)]
pub enum UsageError {
    Message(String),
}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UsageError::Message(m) => write!(f, "{m}"),
        }
    }
}

fn parse_kv(list: &mut BTreeMap<String, String>, key: &str, value: &str) {
    list.insert(key.trim().to_string(), value.trim().to_string());
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, UsageError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError::Message(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => parse_kv(&mut map, k, v),
            None => {
                return Err(UsageError::Message(format!(
                    "config line {} is not 'key = value': {line}",
                    lineno + 1
                )))
            }
        }
    }
    Ok(map)
}

/// Parse argv into a RunConfig: subcommand first, then --key value flags,
/// file config loaded via --config with flags taking precedence.
pub fn parse_args(args: &[String]) -> Result<RunConfig, UsageError> {
    if args.is_empty() {
        return Err(UsageError::Message(usage()));
    }
    let command = args[0].clone();
    let known = [
        "ops-check",
        "solve-sphere",
        "solve-shell",
        "diff-study",
        "korn-probe",
    ];
    if !known.contains(&command.as_str()) {
        return Err(UsageError::Message(format!(
            "unknown command '{command}'\n{}",
            usage()
        )));
    }
    let mut flags = BTreeMap::new();
    let mut i = 1;
    while i < args.len() {
        let a = &args[i];
        let key = a
            .strip_prefix("--")
            .ok_or_else(|| UsageError::Message(format!("expected --flag, got '{a}'")))?;
        let value = args
            .get(i + 1)
            .ok_or_else(|| UsageError::Message(format!("flag --{key} needs a value")))?;
        parse_kv(&mut flags, key, value);
        i += 2;
    }

    let mut merged = BTreeMap::new();
    if let Some(path) = flags.get("config") {
        merged = read_config_file(Path::new(path))?;
    }
    for (k, v) in &flags {
        if k != "config" {
            merged.insert(k.clone(), v.clone());
        }
    }

    let mut cfg = RunConfig {
        command,
        ..Default::default()
    };
    for (k, v) in &merged {
        apply_key(&mut cfg, k, v)?;
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn apply_key(cfg: &mut RunConfig, key: &str, value: &str) -> Result<(), UsageError> {
    let bad = |what: &str| UsageError::Message(format!("bad value for {what}: '{value}'"));
    match key {
        "lmax" => cfg.lmax = value.parse().map_err(|_| bad("lmax"))?,
        "nrad" => cfg.nrad = value.parse().map_err(|_| bad("nrad"))?,
        "eps" => {
            // one value or a comma list
            if value.contains(',') {
                let list: Result<Vec<f64>, _> =
                    value.split(',').map(|s| s.trim().parse::<f64>()).collect();
                cfg.eps_list = Some(list.map_err(|_| bad("eps"))?);
            } else {
                cfg.eps = value.parse().map_err(|_| bad("eps"))?;
            }
        }
        "eps_list" => {
            let list: Result<Vec<f64>, _> =
                value.split(',').map(|s| s.trim().parse::<f64>()).collect();
            cfg.eps_list = Some(list.map_err(|_| bad("eps_list"))?);
        }
        "nu" => cfg.nu = value.parse().map_err(|_| bad("nu"))?,
        "dt" => cfg.dt = value.parse().map_err(|_| bad("dt"))?,
        "tfinal" | "t_final" => cfg.t_final = value.parse().map_err(|_| bad("tfinal"))?,
        "mode" => cfg.mode = value.to_string(),
        "preset" => cfg.preset = value.to_string(),
        "out" => cfg.out = PathBuf::from(value),
        "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
        "tol" => cfg.tol = value.parse().map_err(|_| bad("tol"))?,
        "samples" => cfg.samples = value.parse().map_err(|_| bad("samples"))?,
        "stride" => cfg.stride = value.parse().map_err(|_| bad("stride"))?,
        "horizon" => cfg.horizon = value.parse().map_err(|_| bad("horizon"))?,
        other => {
            return Err(UsageError::Message(format!("unknown key '{other}'")));
        }
    }
    Ok(())
}

fn validate(cfg: &RunConfig) -> Result<(), UsageError> {
    if cfg.lmax < 2 {
        return Err(UsageError::Message(format!(
            "lmax must be at least 2, got {}",
            cfg.lmax
        )));
    }
    if cfg.nrad < 4 {
        return Err(UsageError::Message(format!(
            "nrad must be at least 4, got {}",
            cfg.nrad
        )));
    }
    if !(cfg.nu > 0.0) || !(cfg.dt > 0.0) {
        return Err(UsageError::Message("nu and dt must be positive".into()));
    }
    if cfg.stride == 0 {
        return Err(UsageError::Message("stride must be at least 1".into()));
    }
    Ok(())
}

/// Echo of the effective configuration, one key per line, sorted.
pub fn manifest_body(cfg: &RunConfig) -> String {
    let eps_list = cfg
        .eps_list
        .as_ref()
        .map(|l| {
            l.iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(",")
        })
        .unwrap_or_else(|| "-".to_string());
    format!(
        "command = {}\n\
         artifact = thinshell {}\n\
         dt = {}\n\
         eps = {}\n\
         eps_list = {}\n\
         horizon = {}\n\
         lmax = {}\n\
         mode = {}\n\
         nrad = {}\n\
         nu = {}\n\
         out = {}\n\
         preset = {}\n\
         samples = {}\n\
         seed = {}\n\
         stride = {}\n\
         tfinal = {}\n\
         tol = {}\n",
        cfg.command,
        env!("CARGO_PKG_VERSION"),
        cfg.dt,
        cfg.eps,
        eps_list,
        cfg.horizon,
        cfg.lmax,
        cfg.mode,
        cfg.nrad,
        cfg.nu,
        cfg.out.display(),
        cfg.preset,
        cfg.samples,
        cfg.seed,
        cfg.stride,
        cfg.t_final,
        cfg.tol,
    )
}

pub fn usage() -> String {
    "usage: thinshell <command> [--flag value ...]\n\
     commands: ops-check | solve-sphere | solve-shell | diff-study | korn-probe\n\
     flags: --config PATH --eps X[,X...] --lmax N --nrad N --nu X --dt X\n\
            --tfinal X --mode M --out DIR --seed N --tol X\n\
            (--preset NAME --samples N --stride N --horizon X)"
        .to_string()
}
