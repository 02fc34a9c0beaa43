//! `soligas` — command-line front end: field evaluation, charges, soliton
//! positions, projections, gas generation, hypothesis checks, kinetic
//! evolution and theorem verification, with CSV/JSON outputs and gnuplot
//! script generation.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use soligas::effective::scan_effective;
use soligas::gas::{
    check_assumptions, generate_ultra_dilute, generate_uniform, AssumptionConstants,
    AssumptionExponents, UltraDiluteParams, UniformGasParams,
};
use soligas::hydro::{effective_velocity, ghd_evolve, DensityField};
use soligas::model::{RegularizedSign, SolitonConfig};
use soligas::observables::{integrate_density, Interval};
use soligas::positions::{expand, extremal_and_core, ContinuationScanner};
use soligas::projections::fluid_cell_projection;
use soligas::tau::FieldEvaluator;
use soligas::verify::{default_suite, verify_weak_limit, GaussianTest, TheoremReport};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "soligas",
    version,
    about = "KdV multi-soliton fields, soliton positions and soliton-gas kinetics"
)]
struct Cli {
    /// Width of the regularised sign band used by the position solvers.
    #[arg(long, global = true, default_value_t = soligas::model::DEFAULT_EPSILON)]
    epsilon: f64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate u and its derivatives on a grid; write CSV.
    Field {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
        xmin: f64,
        #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
        xmax: f64,
        #[arg(long, default_value_t = 1000)]
        points: usize,
        /// Highest derivative of u to report (0..=4).
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrate conserved densities; write JSON.
    Charges {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, num_args = 1.., default_values_t = vec![0usize, 1, 2])]
        k: Vec<usize>,
        /// Bounded interval [a b]; full line when omitted.
        #[arg(long, num_args = 2, allow_negative_numbers = true)]
        interval: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the position equations at one observation point; JSON.
    Positions {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        xstar: f64,
        /// Also report extremal positions and the core interval.
        #[arg(long)]
        extremal: bool,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Effective positions and imprecision for a local scale; JSON.
    Effective {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "deltaX")]
        delta_x: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also dump the position trajectories X_i(x*) as CSV.
        #[arg(long)]
        traj: Option<PathBuf>,
        /// Trajectory-dump stride in x*.
        #[arg(long, default_value_t = 0.05)]
        traj_stride: f64,
    },
    /// Fluid-cell projection onto an interval; JSON.
    Project {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, num_args = 2, allow_negative_numbers = true)]
        cell: Vec<f64>,
        #[arg(long = "deltaX")]
        delta_x: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a soliton-gas configuration; JSON config.
    Gas {
        /// ultra-dilute | uniform
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: usize,
        /// Spacing scale R for the ultra-dilute construction.
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        /// Dilution exponent for the ultra-dilute construction.
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        chi_star: f64,
        #[arg(long, default_value_t = 2.0)]
        chi_max: f64,
        /// Impact-parameter span for the uniform gas.
        #[arg(long, default_value_t = 20.0)]
        ell: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure the regularity/density hypotheses; JSON report.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        #[arg(long, default_value_t = 0.0)]
        nu: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        /// Slack exponent in the variation bound.
        #[arg(long, default_value_t = 0.1)]
        slack: f64,
        #[arg(long, default_value_t = 0.25)]
        eta: f64,
        #[arg(long, default_value_t = 1.0)]
        chi_star: f64,
        #[arg(long, default_value_t = 3.0)]
        a_const: f64,
        #[arg(long, default_value_t = 2.0)]
        c_const: f64,
        #[arg(long, default_value_t = 1.0)]
        b_const: f64,
        #[arg(long, default_value_t = 1.0)]
        d_const: f64,
        #[arg(long, default_value_t = 1.0)]
        u_const: f64,
        #[arg(long, default_value_t = 1.0)]
        g_const: f64,
        /// Number of observation points across the padded core.
        #[arg(long, default_value_t = 33)]
        grid: usize,
    },
    /// Evolve a phase-space density with the kinetic equation; CSV.
    Ghd {
        /// Initial density CSV (chi,x,rho); a built-in bump when omitted.
        #[arg(long)]
        rho0: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        chi_nodes: usize,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Effective-position trajectories at given times; CSV (t,i,x_eff).
    Micro {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        times: Vec<f64>,
        #[arg(long = "deltaX")]
        delta_x: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run theorem verification suites; JSON reports + summary CSV.
    Verify {
        /// all | local | support | fluid | weak
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long)]
        config: PathBuf,
        /// Extra configs (increasing N) for the weak-limit ladder.
        #[arg(long, num_args = 1..)]
        ladder: Option<Vec<PathBuf>>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit a gnuplot script for a produced CSV.
    Plot {
        /// field | trajectories | density
        #[arg(long)]
        kind: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    arguments: Vec<String>,
    seed: Option<u64>,
    versions: Versions,
    timestamp_unix: u64,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct Versions {
    soligas: &'static str,
    cli: &'static str,
}

fn write_manifest(command: &str, seed: Option<u64>, outputs: &[&Path]) -> Result<()> {
    let manifest = RunManifest {
        command: command.to_string(),
        arguments: std::env::args().collect(),
        seed,
        versions: Versions {
            soligas: env!("CARGO_PKG_VERSION"),
            cli: env!("CARGO_PKG_VERSION"),
        },
        timestamp_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let first = outputs
        .first()
        .ok_or_else(|| anyhow!("manifest needs at least one output"))?;
    let path = PathBuf::from(format!("{}.manifest.json", first.display()));
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn load_config(path: &Path) -> Result<SolitonConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    SolitonConfig::from_json_str(&text).map_err(|e| anyhow!("{e}"))
}

fn main() -> ExitCode {
    if let Ok(v) = std::env::var("SOLIGAS_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let solver = e
                .downcast_ref::<soligas::Error>()
                .map(|err| matches!(err, soligas::Error::SolverFailure { .. }))
                .unwrap_or(false);
            if solver {
                ExitCode::from(3)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let sgn = RegularizedSign::new(cli.epsilon).map_err(|e| anyhow!("{e}"))?;
    match cli.cmd {
        Cmd::Field { config, xmin, xmax, points, order, out } => {
            if points < 2 || xmax <= xmin || order > 4 {
                bail!("need points >= 2, xmax > xmin, order <= 4");
            }
            let cfg = load_config(&config)?;
            let ev = FieldEvaluator::new(&cfg, order)?;
            let xs: Vec<f64> = (0..points)
                .map(|k| xmin + (xmax - xmin) * k as f64 / (points - 1) as f64)
                .collect();
            let jets = ev.eval_grid(&xs)?;
            let mut csv = String::from("x");
            for d in 0..=order {
                if d == 0 {
                    csv.push_str(",u");
                } else {
                    csv.push_str(&format!(",u_{}", "x".repeat(d)));
                }
            }
            csv.push_str(",log_tau,representation\n");
            for jet in &jets {
                csv.push_str(&format!("{}", jet.x));
                for d in 0..=order {
                    csv.push_str(&format!(",{}", jet.du(d)));
                }
                csv.push_str(&format!(",{},{}\n", jet.log_tau, jet.representation));
            }
            fs::write(&out, csv)?;
            write_manifest("field", None, &[&out])?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Charges { config, k, interval, out } => {
            let cfg = load_config(&config)?;
            let domain = match interval.as_deref() {
                Some([a, b]) => Interval::Bounded(*a, *b),
                Some(_) => bail!("--interval takes exactly two numbers"),
                None => Interval::FullLine,
            };
            #[derive(Serialize)]
            struct Charge {
                k: usize,
                integral: f64,
                spectral_sum: f64,
            }
            let mut charges = Vec::new();
            for &kk in &k {
                let integral = integrate_density(&cfg, kk, domain)?;
                let spectral_sum: f64 =
                    cfg.chi().iter().map(|c| c.powi(2 * kk as i32 + 1)).sum();
                charges.push(Charge { k: kk, integral, spectral_sum });
            }
            fs::write(&out, serde_json::to_string_pretty(&charges)?)?;
            write_manifest("charges", None, &[&out])?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Positions { config, xstar, extremal, out } => {
            let cfg = load_config(&config)?;
            let sol = expand(&cfg, xstar, sgn)?;
            let body = if extremal {
                let core = extremal_and_core(&cfg)?;
                serde_json::json!({ "solution": sol, "core": core })
            } else {
                serde_json::json!({ "solution": sol })
            };
            let text = serde_json::to_string_pretty(&body)?;
            match out {
                Some(path) => {
                    fs::write(&path, text)?;
                    write_manifest("positions", None, &[&path])?;
                }
                None => println!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Effective { config, delta_x, out, traj, traj_stride } => {
            let cfg = load_config(&config)?;
            let eff = scan_effective(&cfg, delta_x, sgn)?;
            fs::write(&out, serde_json::to_string_pretty(&eff)?)?;
            let mut outputs: Vec<&Path> = vec![&out];
            let traj_path;
            if let Some(path) = traj {
                if !(traj_stride > 0.0) {
                    bail!("--traj-stride must be positive");
                }
                let core = extremal_and_core(&cfg)?;
                let lo = core.x_minus - 1.0 - delta_x;
                let hi = core.x_plus + 1.0 + delta_x;
                let mut scanner = ContinuationScanner::starting_at(&cfg, sgn, lo)?;
                let mut csv = String::from("x_star,i,X\n");
                let steps = ((hi - lo) / traj_stride).ceil() as usize;
                for s in 0..=steps {
                    let x = lo + (hi - lo) * s as f64 / steps as f64;
                    scanner.advance_to(x)?;
                    for (i, xi) in scanner.positions().iter().enumerate() {
                        csv.push_str(&format!("{x},{i},{xi}\n"));
                    }
                }
                fs::write(&path, csv)?;
                traj_path = path;
                outputs.push(&traj_path);
            }
            write_manifest("effective", None, &outputs)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Project { config, cell, delta_x, out } => {
            let cfg = load_config(&config)?;
            let [a, b] = cell.as_slice() else {
                bail!("--cell takes exactly two numbers");
            };
            let fc = fluid_cell_projection(&cfg, *a, *b, delta_x, sgn)?;
            fs::write(&out, serde_json::to_string_pretty(&fc)?)?;
            write_manifest("project", None, &[&out])?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Gas { kind, n, r, eps, chi_star, chi_max, ell, seed, out } => {
            let cfg = match kind.as_str() {
                "ultra-dilute" => {
                    generate_ultra_dilute(UltraDiluteParams {
                        n,
                        spacing_scale: r,
                        exponent: eps,
                        chi_star,
                        chi_max,
                    })?
                    .0
                }
                "uniform" => generate_uniform(UniformGasParams {
                    n,
                    ell,
                    chi_range: (chi_star, chi_max),
                    seed,
                })?,
                other => bail!("unknown gas kind '{other}' (ultra-dilute | uniform)"),
            };
            fs::write(&out, cfg.to_json_string())?;
            write_manifest("gas", Some(seed), &[&out])?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Check {
            config,
            report,
            alpha,
            beta,
            sigma,
            mu,
            nu,
            gamma,
            slack,
            eta,
            chi_star,
            a_const,
            c_const,
            b_const,
            d_const,
            u_const,
            g_const,
            grid,
        } => {
            let cfg = load_config(&config)?;
            let core = extremal_and_core(&cfg)?;
            let pad = 2.0 / cfg.chi()[0];
            let m = grid.max(2);
            let points: Vec<f64> = (0..m)
                .map(|k| {
                    core.x_minus - pad
                        + (core.x_plus - core.x_minus + 2.0 * pad) * k as f64 / (m - 1) as f64
                })
                .collect();
            let rep = check_assumptions(
                &cfg,
                AssumptionExponents { alpha, beta, sigma, mu, nu, gamma, epsilon: slack, eta },
                AssumptionConstants {
                    chi_star,
                    a: a_const,
                    c: c_const,
                    b: b_const,
                    d: d_const,
                    u: u_const,
                    g: g_const,
                },
                &points,
                sgn,
            )?;
            fs::write(&report, serde_json::to_string_pretty(&rep)?)?;
            write_manifest("check", None, &[&report])?;
            Ok(if rep.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Cmd::Ghd { rho0, chi_nodes, t_end, out } => {
            let field = match rho0 {
                Some(path) => read_density_csv(&path)?,
                None => default_density(chi_nodes)?,
            };
            let (evolved, steps) = ghd_evolve(&field, t_end)?;
            let vel = effective_velocity(&evolved)?;
            eprintln!(
                "evolved to t = {} in {steps} steps (velocity residual {:.2e})",
                evolved.time, vel.residual
            );
            fs::write(&out, density_csv(&evolved))?;
            write_manifest("ghd", None, &[&out])?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Micro { config, times, delta_x, out } => {
            let cfg = load_config(&config)?;
            let traj = soligas::hydro::microscopic_trajectories(&cfg, &times, delta_x, sgn)?;
            let mut csv = String::from("t,i,x_eff\n");
            for (t, xs) in times.iter().zip(&traj) {
                for (i, x) in xs.iter().enumerate() {
                    csv.push_str(&format!("{t},{i},{x}\n"));
                }
            }
            fs::write(&out, csv)?;
            write_manifest("micro", None, &[&out])?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify { suite, config, ladder, out } => {
            let cfg = load_config(&config)?;
            fs::create_dir_all(&out)?;
            let mut reports: Vec<TheoremReport> = Vec::new();
            let wanted = |name: &str| suite == "all" || suite == name;
            if wanted("local") || wanted("support") || wanted("fluid") {
                for report in default_suite(&cfg, sgn)? {
                    let keep = match report.theorem.as_str() {
                        "local_form_decay" => wanted("local"),
                        "support_decay" => wanted("support"),
                        "fluid_cell_mean" => wanted("fluid"),
                        _ => suite == "all",
                    };
                    if keep {
                        reports.push(report);
                    }
                }
            }
            if wanted("weak") {
                if let Some(paths) = &ladder {
                    let mut configs = vec![cfg.clone()];
                    for p in paths {
                        configs.push(load_config(p)?);
                    }
                    configs.sort_by_key(|c| c.n());
                    let f = GaussianTest { centre: 0.0, width: 4.0, amplitude: 1.0 };
                    reports.push(verify_weak_limit(&configs, 0, 2.1, 0.5, f, sgn)?);
                } else if suite == "weak" {
                    bail!("--suite weak needs --ladder with additional configs");
                }
            }
            if reports.is_empty() {
                bail!("unknown suite '{suite}' (all | local | support | fluid | weak)");
            }
            let mut summary = String::from("theorem,pass\n");
            let mut outputs: Vec<PathBuf> = Vec::new();
            let mut all_pass = true;
            for report in &reports {
                let path = out.join(format!("{}.json", report.theorem));
                fs::write(&path, serde_json::to_string_pretty(report)?)?;
                summary.push_str(&format!("{},{}\n", report.theorem, report.pass));
                all_pass &= report.pass;
                println!(
                    "{}: {}",
                    report.theorem,
                    if report.pass { "pass" } else { "FAIL" }
                );
                outputs.push(path);
            }
            let summary_path = out.join("summary.csv");
            fs::write(&summary_path, summary)?;
            outputs.push(summary_path);
            let refs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
            write_manifest("verify", None, &refs)?;
            Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Cmd::Plot { kind, input, out } => {
            let script = plot_script(&kind, &input)?;
            fs::write(&out, script)?;
            write_manifest("plot", None, &[&out])?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn density_csv(f: &DensityField) -> String {
    let mut csv = String::from("chi,x,rho\n");
    for (ci, chi) in f.chi_grid.iter().enumerate() {
        for xi in 0..f.n_cells {
            csv.push_str(&format!("{},{},{}\n", chi, f.cell_centre(xi), f.rho(ci, xi)));
        }
    }
    csv
}

fn read_density_csv(path: &Path) -> Result<DensityField> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading density {}", path.display()))?;
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 && line.trim().starts_with("chi") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            bail!("line {}: expected chi,x,rho", lineno + 1);
        }
        rows.push((cols[0].parse()?, cols[1].parse()?, cols[2].parse()?));
    }
    let mut chis: Vec<f64> = rows.iter().map(|r| r.0).collect();
    chis.sort_by(|a, b| a.partial_cmp(b).unwrap());
    chis.dedup();
    let mut xs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    if xs.len() < 2 {
        bail!("need at least two x cells");
    }
    let dx = xs[1] - xs[0];
    let mut field = DensityField::zeros(chis.clone(), xs[0] - dx / 2.0, dx, xs.len())
        .map_err(|e| anyhow!("{e}"))?;
    let find = |grid: &[f64], v: f64| -> Result<usize> {
        grid.iter()
            .position(|g| (g - v).abs() < 1e-12 * v.abs().max(1.0))
            .ok_or_else(|| anyhow!("grid value {v} not found"))
    };
    for (c, x, r) in rows {
        let ci = find(&chis, c)?;
        let xi = find(&xs, x)?;
        field.set_rho(ci, xi, r);
    }
    Ok(field)
}

fn default_density(chi_nodes: usize) -> Result<DensityField> {
    let nodes = chi_nodes.max(1);
    let chi_grid: Vec<f64> = (0..nodes).map(|i| 1.0 + i as f64 / nodes as f64).collect();
    let mut f =
        DensityField::zeros(chi_grid.clone(), 0.0, 0.5, 200).map_err(|e| anyhow!("{e}"))?;
    for (ci, chi) in chi_grid.iter().enumerate() {
        for xi in 0..200 {
            let x = f.cell_centre(xi);
            let bump = 0.05 * (-((x - 20.0) / 5.0).powi(2)).exp();
            f.set_rho(ci, xi, bump * (2.0 - chi).max(0.0));
        }
    }
    Ok(f)
}

fn plot_script(kind: &str, input: &Path) -> Result<String> {
    let input = input.display();
    Ok(match kind {
        "field" => format!(
            "set datafile separator ','\n\
             set xlabel 'x'\nset ylabel 'u'\nset grid\n\
             plot '{input}' using 1:2 skip 1 with lines title 'u(x)'\n\
             pause -1\n"
        ),
        "trajectories" => format!(
            "set datafile separator ','\n\
             set xlabel 'x*'\nset ylabel 'X_i'\nset grid\n\
             plot for [i=0:63] '{input}' using ($2==i?$1:1/0):3 skip 1 \
             with lines notitle\npause -1\n"
        ),
        "density" => format!(
            "set datafile separator ','\n\
             set xlabel 'x'\nset ylabel 'chi'\nset view map\n\
             splot '{input}' using 2:1:3 skip 1 with points pt 5 ps 1 palette notitle\n\
             pause -1\n"
        ),
        other => bail!("unknown plot kind '{other}' (field | trajectories | density)"),
    })
}
