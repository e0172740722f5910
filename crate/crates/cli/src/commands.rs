use std::fs;
use std::io::Write;
use std::path::Path;

use gfbm_core::analysis::suite::{default_checks, parse_checks, run_suite, SuiteConfig};
use gfbm_core::analysis::{hurst_estimate_rows, sigma_closed_form, sigma_composition};
use gfbm_core::io::{parse_grid, parse_manifest, read_paths_csv, write_paths_csv, RunManifest};
use gfbm_core::params::classify_raw;
use gfbm_core::simulation::{sample_derivative, sample_exact, sample_riemann, Method, PathEnsemble};
use gfbm_core::special::{kappa, kappa_closed_form, kappa_quadrature, normalization_c};
use gfbm_core::{Grid, KernelContext, ModelParams, QuadratureSpec, Regime, RiemannSpec};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::{CliError, Command, GridArgs, Route};

pub(crate) fn run(command: Command, argv: &[String]) -> Result<(), CliError> {
    match command {
        Command::Kappa { params, route } => {
            let p = params.params()?;
            let spec = QuadratureSpec::precise();
            let k = match route {
                Route::Auto => kappa(&p, &spec)?,
                Route::Closed => kappa_closed_form(&p)?,
                Route::Quad => kappa_quadrature(&p, &spec)?,
            };
            print_json(&json!({
                "alpha": p.alpha(),
                "gamma": p.gamma(),
                "kappa": k.value,
                "route": k.route,
                "abs_error_estimate": k.abs_error_estimate,
                "c": normalization_c(&p)?,
            }))
        }
        Command::Classify { alpha, gamma, labels } => {
            let label = classify_raw(alpha, gamma);
            let hurst = (label.regime != Regime::Invalid).then_some(alpha - 0.5 * gamma + 0.5);
            let mut out = json!({ "regime": label.regime, "H": hurst });
            if labels {
                out["is_fbm"] = json!(label.is_fbm);
                out["is_bm"] = json!(label.is_bm);
                out["h_half_non_bm"] = json!(label.h_half_non_bm);
            }
            print_json(&out)
        }
        Command::Cov { params, grid, out } => {
            let p = params.params()?;
            kernel_matrix("cov", p, &grid, out, argv, |ctx, s, t| ctx.psi(s, t))
        }
        Command::Phi { params, grid, out } => {
            let p = params.params()?;
            kernel_matrix("phi", p, &grid, out, argv, |ctx, s, t| ctx.phi(s, t))
        }
        Command::Simulate {
            params,
            method,
            paths,
            grid_n,
            t_max,
            seed,
            mesh,
            out,
        } => {
            let p = params.params()?;
            let ctx = KernelContext::new(p)?;
            let seed = seed.unwrap_or_else(clock_seed);
            let ens = simulate(&ctx, method, paths, grid_n, t_max, seed, mesh)?;
            let mut csv = Vec::new();
            write_paths_csv(&mut csv, &ens.grid, ens.paths())?;
            match out {
                Some(path) => {
                    write_file(&path, &csv)?;
                    let mut m = manifest("simulate", argv, p, Some(seed), &path);
                    m.method = Some(method);
                    m.jitter = ens.jitter;
                    m.truncation = ens.truncation;
                    write_manifest(&path, &m)
                }
                None => std::io::stdout().write_all(&csv).map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                }),
            }
        }
        Command::Estimate { input } => {
            let file = fs::File::open(&input).map_err(|source| CliError::Io {
                path: input.clone(),
                source,
            })?;
            let (grid, rows) = read_paths_csv(std::io::BufReader::new(file))?;
            let hurst = hurst_estimate_rows(&grid, &rows)?;
            let mut out = json!({ "hurst_estimate": hurst, "paths": rows.len(), "times": grid.len() });
            if let Ok(text) = fs::read_to_string(manifest_path(&input)) {
                let m = parse_manifest(&text)?;
                out["hurst"] = json!(m.params.hurst());
            }
            print_json(&out)
        }
        Command::Verify {
            params,
            checks,
            paths,
            seed,
            out,
        } => {
            let p = params.params()?;
            let ctx = KernelContext::new(p)?;
            let checks = match checks {
                Some(list) => parse_checks(&list)?,
                None => default_checks(&ctx),
            };
            let reports = run_suite(&ctx, &checks, &SuiteConfig { paths, seed })?;
            let text = serde_json::to_string_pretty(&reports).expect("reports serialize");
            match &out {
                Some(path) => {
                    write_file(path, format!("{text}\n").as_bytes())?;
                    write_manifest(path, &manifest("verify", argv, p, Some(seed), path))?;
                }
                None => println!("{text}"),
            }
            let failed: Vec<String> = reports
                .iter()
                .filter(|r| !r.passed)
                .map(|r| r.check_name.clone())
                .collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::ChecksFailed(failed))
            }
        }
        Command::Sigma { params, b } => {
            let p = params.params()?;
            let ctx = KernelContext::new(p)?;
            let sigma = sigma_composition(&ctx, b)?;
            print_json(&json!({
                "b": b,
                "H": p.hurst(),
                "sigma": sigma,
                "closed_form": sigma_closed_form(p.hurst(), b),
            }))
        }
    }
}

fn simulate(
    ctx: &KernelContext,
    method: Method,
    paths: usize,
    grid_n: usize,
    t_max: f64,
    seed: u64,
    mesh: Option<f64>,
) -> Result<PathEnsemble, CliError> {
    let grid = match method {
        // The derivative is singular at t = 0, so its grid starts one step in.
        Method::Derivative => {
            if grid_n == 0 {
                return Err(gfbm_core::GfbmError::InvalidGrid("need at least one step".into()).into());
            }
            Grid::new((1..=grid_n).map(|k| t_max * k as f64 / grid_n as f64).collect())?
        }
        _ => Grid::uniform(grid_n, t_max)?,
    };
    let mut rspec = RiemannSpec::default();
    if let Some(h) = mesh {
        rspec = rspec.with_mesh(h);
    }
    Ok(match method {
        Method::ExactFactorization => sample_exact(ctx, &grid, paths, seed)?,
        Method::RiemannDiscretization => sample_riemann(ctx, &grid, &rspec, paths, seed)?,
        Method::Derivative => sample_derivative(ctx, &grid, &rspec, paths, seed)?,
    })
}

fn kernel_matrix(
    command: &str,
    params: ModelParams,
    args: &GridArgs,
    out: Option<String>,
    argv: &[String],
    kernel: impl Fn(&KernelContext, f64, f64) -> gfbm_core::Result<f64> + Sync,
) -> Result<(), CliError> {
    let ctx = KernelContext::new(params)?;
    let grid = load_grid(args)?;
    let times = grid.times();
    let rows = times
        .par_iter()
        .map(|&s| {
            times
                .iter()
                .map(|&t| kernel(&ctx, s, t))
                .collect::<gfbm_core::Result<Vec<f64>>>()
        })
        .collect::<gfbm_core::Result<Vec<_>>>()?;
    let mut csv = Vec::new();
    write_paths_csv(&mut csv, &grid, &rows)?;
    match out {
        Some(path) => {
            write_file(&path, &csv)?;
            write_manifest(&path, &manifest(command, argv, params, None, &path))
        }
        None => std::io::stdout().write_all(&csv).map_err(|source| CliError::Io {
            path: "<stdout>".into(),
            source,
        }),
    }
}

fn load_grid(args: &GridArgs) -> Result<Grid, CliError> {
    if let Some(path) = &args.grid {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        return Ok(parse_grid(&text)?);
    }
    let spec = args.uniform.as_deref().unwrap_or_default();
    let (n, t) = spec
        .split_once(',')
        .and_then(|(n, t)| Some((n.trim().parse::<usize>().ok()?, t.trim().parse::<f64>().ok()?)))
        .ok_or_else(|| CliError::Usage(format!("--uniform expects N,T, got '{spec}'")))?;
    Ok(Grid::uniform(n, t)?)
}

fn manifest(command: &str, argv: &[String], params: ModelParams, seed: Option<u64>, output: &str) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        argv: argv.to_vec(),
        params,
        seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        outputs: vec![output.to_string()],
        method: None,
        jitter: None,
        truncation: None,
    }
}

fn manifest_path(output: &str) -> String {
    format!("{output}.manifest.json")
}

fn write_manifest(output: &str, m: &RunManifest) -> Result<(), CliError> {
    write_file(&manifest_path(output), format!("{}\n", m.to_json()?).as_bytes())
}

fn write_file(path: &str, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = Path::new(path).parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_string(),
        source,
    })
}

fn print_json(value: &Value) -> Result<(), CliError> {
    println!("{value}");
    Ok(())
}

fn clock_seed() -> u64 {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap_or_default();
    now.as_secs() ^ u64::from(now.subsec_nanos()).rotate_left(32)
}
