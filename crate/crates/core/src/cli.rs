//! `piston` command-line interface. Exit codes: 0 success, 1 usage or
//! configuration error, 2 numerical failure (partial outputs and a
//! `failure.json` are left in the run directory).

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::asymptotics::{sweep_kg, sweep_steady, sweep_unsteady, FitRow, Quantity, SweepResult};
use crate::error::PistonError;
use crate::exec::Execution;
use crate::io::artifacts::{self, FitEntry, FitsDocument};
use crate::io::config::{parse_config, Format, Plots, RunConfig};
use crate::io::output::{create_dir, write_json, write_text, Header, Table};
use crate::io::svg::{Plot, Series, Style};
use crate::lagrangian::{compare_with_oracle, run_oracle, OracleConfig};
use crate::moc::{
    decomposition_residual, hypothesis_monitor, narrow_check, narrow_seeds, piston_reflection_residual, run,
    shock_reflection_residual, SolutionTrace,
};
use crate::piston::{validate, PistonSpec};
use crate::shock_polar::{reflection_coefficient, solve_steady_piston};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

/// Environment variable that overrides `--out`.
pub const OUT_ENV: &str = "PISTON_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "piston",
    version,
    about = "Piston-driven shocks at vanishing upstream density"
)]
struct Cli {
    /// Configuration file (flat `[section] key = value`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root; a run directory is created inside it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true, value_enum)]
    plots: Option<Plots>,
    /// Worker threads for sweeps; 1 runs sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Constant-speed piston: post-shock state and shock speed.
    Steady,
    /// Characteristic solver run with diagnostics.
    Simulate,
    /// Lagrangian reference solver run.
    Oracle,
    /// Compare a stored solver run with a stored oracle run.
    Compare {
        #[arg(long)]
        moc: PathBuf,
        #[arg(long)]
        oracle: PathBuf,
        /// Start of the comparison window (default 1.5·t0).
        #[arg(long)]
        from: Option<f64>,
    },
    SweepSteady,
    SweepKg,
    SweepUnsteady,
    /// Hypothesis and narrow-estimate monitors on a stored solver run.
    Check {
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Numerical(PistonError),
    /// A run stopped early; `failure.json` is already written.
    Stopped(String),
}

impl From<PistonError> for Failure {
    fn from(e: PistonError) -> Self {
        match e {
            PistonError::Config(_) | PistonError::Io(_) => Failure::Usage(e.to_string()),
            other => Failure::Numerical(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Everything a subcommand needs to write its outputs.
struct RunDir {
    path: PathBuf,
    header: Header,
    format: Format,
    plots: Plots,
}

impl RunDir {
    fn table(&self, table: &Table, stem: &str) -> CliResult<()> {
        table.write(&self.path, stem, self.format, &self.header)?;
        Ok(())
    }

    fn json<T: serde::Serialize>(&self, name: &str, body: &T) -> CliResult<()> {
        write_json(&self.path.join(name), &self.header, body)?;
        Ok(())
    }

    fn svg(&self, name: &str, plot: &Plot) -> CliResult<()> {
        if self.plots == Plots::Svg {
            write_text(&self.path.join(name), &plot.render())?;
        }
        Ok(())
    }

    fn failure(&self, kind: &str, message: &str) {
        let _ = self.json("failure.json", &json!({ "kind": kind, "message": message }));
    }
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            Ok(parse_config(&text)?)
        }
        None => Ok(RunConfig::default()),
    }
}

fn open_run_dir(cli: &Cli, cfg: &RunConfig) -> CliResult<RunDir> {
    let root = std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .or_else(|| cli.out.clone())
        .unwrap_or_else(|| cfg.output.dir.clone());
    let hash = cfg.hash();
    let path = match &cfg.output.run_id {
        Some(id) => root.join(id),
        None => {
            let ms = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0);
            let stem = format!("{}-{ms}", &hash[..12]);
            let mut path = root.join(&stem);
            let mut n = 1;
            while path.exists() {
                path = root.join(format!("{stem}-{n}"));
                n += 1;
            }
            path
        }
    };
    create_dir(&path)?;
    write_text(&path.join("config.echo"), &cfg.echo())?;
    Ok(RunDir {
        path,
        header: Header::new(&hash),
        format: cli.format.unwrap_or(cfg.output.format),
        plots: cli.plots.unwrap_or(cfg.output.plots),
    })
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            EXIT_OK
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e}");
            EXIT_NUMERICAL
        }
        Err(Failure::Stopped(msg)) => {
            eprintln!("numerical failure: {msg}");
            EXIT_NUMERICAL
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<PathBuf> {
    let cfg = load_config(cli.config.as_deref())?;
    let exec = Execution::from_jobs(cli.jobs);
    let dir = open_run_dir(cli, &cfg)?;
    let outcome = match &cli.command {
        Command::Steady => steady(&cfg, &dir),
        Command::Simulate => simulate(&cfg, &dir),
        Command::Oracle => oracle(&cfg, &dir),
        Command::Compare { moc, oracle, from } => compare(moc, oracle, *from, &dir),
        Command::SweepSteady => sweep_steady_cmd(&cfg, &dir, exec),
        Command::SweepKg => sweep_kg_cmd(&cfg, &dir),
        Command::SweepUnsteady => sweep_unsteady_cmd(&cfg, &dir, exec),
        Command::Check { run } => check(run, &dir),
    };
    if let Err(Failure::Numerical(e)) = &outcome {
        dir.failure(error_kind(e), &e.to_string());
    }
    outcome.map(|_| dir.path)
}

fn error_kind(e: &PistonError) -> &'static str {
    match e {
        PistonError::Domain(_) => "domain",
        PistonError::Entropy { .. } => "entropy",
        PistonError::NonPhysical(_) => "non_physical",
        PistonError::ShockVanishes { .. } => "shock_vanishes",
        PistonError::Bracket(_) => "bracket",
        PistonError::NoConvergence { .. } => "no_convergence",
        PistonError::TimeStep { .. } => "time_step",
        PistonError::Vacuum { .. } => "vacuum",
        PistonError::Positivity { .. } => "positivity",
        PistonError::NoShock { .. } => "no_shock",
        PistonError::Insufficient(_) => "insufficient",
        PistonError::Config(_) => "config",
        PistonError::Io(_) => "io",
    }
}

fn steady(cfg: &RunConfig, dir: &RunDir) -> CliResult<()> {
    let gamma = cfg.gamma()?;
    let rho_inf = cfg.rho_inf()?;
    let w0 = match cfg.piston_spec()? {
        PistonSpec::Constant { w0 } => *w0,
        other => {
            return Err(Failure::Usage(format!(
                "steady needs a constant piston, got {}",
                other.label()
            )))
        }
    };
    let st = solve_steady_piston(w0, rho_inf, gamma, cfg.solver.tol)?;
    let (mass, momentum) = st.rh_residuals(gamma);
    dir.json(
        "steady.json",
        &json!({
            "gamma": gamma.value(),
            "rho_inf": rho_inf,
            "w0": w0,
            "rho0": st.rho0,
            "u0": st.u0,
            "s0": st.s0,
            "tau": st.tau,
            "s0_minus_u0": st.lead,
            "c0": st.c0(gamma),
            "lambda_plus_minus_s0": st.lambda_plus_gap(gamma),
            "s0_minus_lambda_minus": st.lambda_minus_gap(gamma),
            "k_g": reflection_coefficient(st.tau, gamma)?,
            "residuals": { "mass": mass, "momentum": momentum },
        }),
    )
}

fn snapshot_plot(table: &Table, title: &str) -> Plot {
    let t = table.f64_column("t").unwrap_or_default();
    let x = table.f64_column("x").unwrap_or_default();
    let rho = table.f64_column("rho").unwrap_or_default();
    let last = t.last().copied().unwrap_or(f64::NAN);
    let points = (0..t.len()).filter(|&i| t[i] == last).map(|i| (x[i], rho[i])).collect();
    Plot {
        title: format!("{title}, t = {last:.4}"),
        x_label: "x".into(),
        y_label: "density".into(),
        series: vec![Series {
            label: "rho".into(),
            points,
            style: Style::Line,
        }],
        ..Plot::default()
    }
}

fn simulate(cfg: &RunConfig, dir: &RunDir) -> CliResult<()> {
    let gamma = cfg.gamma()?;
    let rho_inf = cfg.rho_inf()?;
    let spec = cfg.piston_spec()?;
    let piston = spec.build()?;
    let (t0, t_end) = (cfg.solver.t0, cfg.solver.t_end);
    let assumptions = validate(
        &piston,
        rho_inf,
        gamma,
        cfg.monitor.kappa,
        cfg.monitor.varrho,
        t_end,
        4001,
    );
    let mut step = cfg.step_config();
    step.tracers = narrow_seeds(cfg.monitor.narrow_points, cfg.monitor.seed, t0, t_end);
    let trace = run(&piston, rho_inf, gamma, t0, t_end, cfg.solver.n_nodes, &step)?;

    let snapshots = artifacts::moc_snapshots(&trace);
    dir.table(&snapshots, "snapshots")?;
    dir.table(&artifacts::shock_table(&trace.shock_history), "shock")?;
    dir.table(&artifacts::records_table(&trace.records), "records")?;
    dir.table(&artifacts::tracers_table(&trace.tracers), "tracers")?;

    let window = (1.5 * t0, t_end);
    let monitor = hypothesis_monitor(&trace.monitor_samples(), cfg.monitor_params(), gamma, rho_inf);
    let decomposition = decomposition_residual(&trace)
        .ok()
        .map(|(p, m)| (p.l1(window.0, window.1), m.l1(window.0, window.1)));
    // Normalized residuals are 0/0 noise in a uniform flow; the scale shows when.
    let decomposition_scale = trace
        .records
        .iter()
        .filter(|r| r.t >= window.0)
        .map(|r| r.decomp_scale)
        .fold(0.0, f64::max);
    let last = trace.records.last();
    dir.json(
        "summary.json",
        &json!({
            "gamma": gamma.value(),
            "rho_inf": rho_inf,
            "piston": spec,
            "t0": t0,
            "t_end": t_end,
            "n_nodes": cfg.solver.n_nodes,
            "completed": trace.completed(),
            "failure": trace.failure,
            "steps": trace.records.len(),
            "retries": trace.retries,
            "final": last.map(|r| json!({ "t": r.t, "s": r.s, "k": r.k, "k_g": r.k_g, "width": r.width() })),
            "assumptions": assumptions,
            "mass_defect": trace.mass_defect(),
            "residual_window": [window.0, window.1],
            "shock_reflection_residual": shock_reflection_residual(&trace).l1(window.0, window.1),
            "piston_reflection_residual": piston_reflection_residual(&trace).l1(window.0, window.1),
            "decomposition_residual": decomposition.map(|(p, m)| json!({ "plus": p, "minus": m, "scale_max": decomposition_scale })),
            "hypothesis": {
                "params": monitor.params,
                "all_pass": monitor.all_pass,
                "pass_rate": monitor.pass_rate,
                "worst_ratio": monitor.worst_ratio,
                "nu_hat_candidate": monitor.nu_hat_candidate,
            },
        }),
    )?;
    dir.svg("snapshot.svg", &snapshot_plot(&snapshots, "characteristic solver"))?;
    let k_points = trace.shock_history.iter().map(|s| (s.t, s.k)).collect();
    dir.svg(
        "shock_k.svg",
        &Plot {
            title: "shock density ratio".into(),
            x_label: "t".into(),
            y_label: "k".into(),
            series: vec![Series {
                label: "k".into(),
                points: k_points,
                style: Style::Line,
            }],
            ..Plot::default()
        },
    )?;
    if let Some(f) = &trace.failure {
        dir.failure(&f.kind, &f.message);
        return Err(Failure::Stopped(f.message.clone()));
    }
    Ok(())
}

fn oracle(cfg: &RunConfig, dir: &RunDir) -> CliResult<()> {
    let gamma = cfg.gamma()?;
    let rho_inf = cfg.rho_inf()?;
    let spec = cfg.piston_spec()?;
    let piston = spec.build()?;
    let t_end = cfg.solver.t_end;
    let ocfg = OracleConfig {
        snapshot_times: vec![cfg.solver.t0, 0.5 * (cfg.solver.t0 + t_end)],
        ..cfg.oracle.clone()
    };
    let trace = run_oracle(&piston, rho_inf, gamma, t_end, &ocfg)?;
    let snapshots = artifacts::oracle_snapshots(&trace, piston.w(t_end));
    dir.table(&snapshots, "snapshots")?;
    dir.table(&artifacts::oracle_history_table(&trace.history), "oracle_shock")?;
    let last = trace.history.last();
    dir.json(
        "summary.json",
        &json!({
            "gamma": gamma.value(),
            "rho_inf": rho_inf,
            "piston": spec,
            "t_end": t_end,
            "n_cells": ocfg.n_cells,
            "cfl": ocfg.cfl,
            "steps": trace.steps,
            "total_mass": trace.total_mass,
            "tainted": trace.tainted,
            "momentum_defect": trace.momentum_defect,
            "final": last,
        }),
    )?;
    dir.svg("snapshot.svg", &snapshot_plot(&snapshots, "Lagrangian reference"))
}

fn read_echo(run: &Path) -> CliResult<RunConfig> {
    let path = run.join("config.echo");
    let text = std::fs::read_to_string(&path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok(parse_config(&text)?)
}

fn compare(moc_dir: &Path, oracle_dir: &Path, from: Option<f64>, dir: &RunDir) -> CliResult<()> {
    let moc_cfg = read_echo(moc_dir)?;
    let rho_inf = moc_cfg.rho_inf()?;
    let shocks = artifacts::shocks_from_table(&Table::read(moc_dir, "shock")?, rho_inf)?;
    let history = artifacts::oracle_history_from_table(&Table::read(oracle_dir, "oracle_shock")?)?;
    let summary_path = oracle_dir.join("summary.json");
    let summary: serde_json::Value = std::fs::read_to_string(&summary_path)
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok())
        .ok_or_else(|| Failure::Usage(format!("{}: missing or unreadable", summary_path.display())))?;
    let tainted = summary["tainted"].as_bool().unwrap_or(true);
    let t_from = from.unwrap_or(1.5 * moc_cfg.solver.t0);
    let cmp = compare_with_oracle(&shocks, &history, t_from, tainted)?;
    dir.json(
        "compare.json",
        &json!({
            "moc_run": moc_dir.display().to_string(),
            "oracle_run": oracle_dir.display().to_string(),
            "comparison": cmp,
        }),
    )
}

fn write_fits(dir: &RunDir, entries: Vec<FitEntry>) -> CliResult<()> {
    dir.json("fits.json", &FitsDocument { fits: entries })
}

fn fit_plots(dir: &RunDir, res: &SweepResult, x_label: &str) -> CliResult<()> {
    if dir.plots != Plots::Svg {
        return Ok(());
    }
    let mut quantities: Vec<Quantity> = res.fits.iter().map(|f| f.quantity).collect();
    quantities.dedup();
    for q in quantities {
        let mut series = Vec::new();
        for fit in res.fits.iter().filter(|f| f.quantity == q) {
            let pts: Vec<(f64, f64)> = res
                .rows
                .iter()
                .filter(|r| r.gamma == fit.gamma && r.quantity == q)
                .map(|r| (r.x, r.value))
                .collect();
            let line = pts
                .iter()
                .map(|&(x, _)| (x, fit.prefactor * x.powf(fit.leading_exponent)))
                .collect();
            series.push(Series {
                label: format!("γ = {}", fit.gamma),
                points: pts,
                style: Style::Markers,
            });
            series.push(Series {
                label: format!("leading order, γ = {}", fit.gamma),
                points: line,
                style: Style::Line,
            });
        }
        let plot = Plot {
            title: q.name().into(),
            x_label: x_label.into(),
            y_label: q.name().into(),
            log_x: true,
            log_y: true,
            series,
        };
        dir.svg(&format!("fit_{}.svg", q.name()), &plot)?;
    }
    Ok(())
}

fn report_fits(fits: &[FitRow]) {
    for f in fits {
        eprintln!(
            "{} γ={} exponent {:.6} (leading {:.6}) prefactor ratio {:.6} {}",
            f.quantity.name(),
            f.gamma,
            f.fit.exponent,
            f.leading_exponent,
            f.prefactor_ratio(),
            if f.pass { "pass" } else { "FAIL" }
        );
    }
}

fn sweep_steady_cmd(cfg: &RunConfig, dir: &RunDir, exec: Execution) -> CliResult<()> {
    let res = sweep_steady(&cfg.sweep_config()?, exec)?;
    dir.table(&artifacts::sweep_table(&res.rows), "sweep")?;
    write_fits(dir, res.fits.iter().map(FitEntry::from_row).collect())?;
    report_fits(&res.fits);
    fit_plots(dir, &res, "rho_inf")
}

fn sweep_kg_cmd(cfg: &RunConfig, dir: &RunDir) -> CliResult<()> {
    let res = sweep_kg(&cfg.sweep.gammas, &cfg.k_grid(), cfg.kg_tolerance())?;
    dir.table(&artifacts::sweep_table(&res.rows), "sweep")?;
    write_fits(dir, res.fits.iter().map(FitEntry::from_row).collect())?;
    report_fits(&res.fits);
    fit_plots(dir, &res, "k")
}

fn sweep_unsteady_cmd(cfg: &RunConfig, dir: &RunDir, exec: Execution) -> CliResult<()> {
    let ucfg = cfg.unsteady_config()?;
    let res = sweep_unsteady(&ucfg, exec)?;
    dir.table(&artifacts::sweep_table(&res.rows), "sweep")?;
    let mut entries = vec![FitEntry {
        gamma: ucfg.gamma,
        quantity: Quantity::MaxTDc.name().into(),
        exponent: res.dc_fit.exponent,
        prefactor: res.dc_fit.prefactor(),
        free_prefactor: res.dc_fit.prefactor(),
        r2: res.dc_fit.r_squared,
        leading_exponent: res.dc_bound_exponent,
        leading_prefactor: None,
        exponent_tol: ucfg.exponent_margin,
        prefactor_tol: None,
        criterion: "at_least".into(),
        pass: res.dc_pass,
    }];
    if let Some(fit) = res.interior_fit {
        entries.push(FitEntry {
            gamma: ucfg.gamma,
            quantity: Quantity::InteriorRhoDeviation.name().into(),
            exponent: fit.exponent,
            prefactor: fit.prefactor(),
            free_prefactor: fit.prefactor(),
            r2: fit.r_squared,
            leading_exponent: f64::NAN,
            leading_prefactor: None,
            exponent_tol: f64::NAN,
            prefactor_tol: None,
            criterion: "observational".into(),
            pass: true,
        });
    }
    write_fits(dir, entries)?;
    dir.json("unsteady.json", &json!({ "config": ucfg, "points": res.points }))?;
    eprintln!(
        "max t|∂±c| exponent {:.4} vs bound exponent {:.4}: {}",
        res.dc_fit.exponent,
        res.dc_bound_exponent,
        if res.dc_pass { "pass" } else { "FAIL" }
    );
    Ok(())
}

/// Rebuild enough of a solver trace from a run directory for the monitors.
pub fn load_trace(run_dir: &Path) -> std::result::Result<(RunConfig, SolutionTrace), PistonError> {
    let text = std::fs::read_to_string(run_dir.join("config.echo"))
        .map_err(|e| PistonError::Io(format!("{}: {e}", run_dir.display())))?;
    let cfg = parse_config(&text)?;
    let gamma = cfg.gamma()?;
    let rho_inf = cfg.rho_inf()?;
    let trace = SolutionTrace {
        gamma,
        rho_inf,
        t0: cfg.solver.t0,
        t_end: cfg.solver.t_end,
        n_nodes: cfg.solver.n_nodes,
        levels: Vec::new(),
        shock_history: artifacts::shocks_from_table(&Table::read(run_dir, "shock")?, rho_inf)?,
        records: artifacts::records_from_table(&Table::read(run_dir, "records")?)?,
        tracers: artifacts::tracers_from_table(&Table::read(run_dir, "tracers")?)?,
        failure: None,
        retries: 0,
    };
    Ok((cfg, trace))
}

fn check(run_dir: &Path, dir: &RunDir) -> CliResult<()> {
    let (cfg, trace) = load_trace(run_dir)?;
    let piston = cfg.piston_spec()?.build()?;
    let hyp = hypothesis_monitor(
        &trace.monitor_samples(),
        cfg.monitor_params(),
        trace.gamma,
        trace.rho_inf,
    );
    let narrow = narrow_check(&trace, &piston, cfg.monitor.delta1, cfg.monitor.sigma)?;
    let assumptions = validate(
        &piston,
        trace.rho_inf,
        trace.gamma,
        cfg.monitor.kappa,
        cfg.monitor.varrho,
        trace.t_end,
        4001,
    );
    let (ab, speed, us) = artifacts::shock_identity_residuals(&trace.shock_history, trace.gamma)?;
    eprintln!(
        "hypotheses {} (pass rates {:?}); narrow {} ({} pass, {} fail, {} inconclusive); width failures {}",
        if hyp.all_pass { "hold" } else { "VIOLATED" },
        hyp.pass_rate,
        if narrow.all_pass { "holds" } else { "VIOLATED" },
        narrow.n_pass,
        narrow.n_fail,
        narrow.n_inconclusive,
        narrow.width_failures
    );
    dir.json(
        "check.json",
        &json!({
            "run": run_dir.display().to_string(),
            "assumptions": assumptions,
            "hypothesis": hyp,
            "narrow": narrow,
            "shock_identities": { "a_plus_b": ab, "tangent_speed": speed, "post_shock_velocity": us },
        }),
    )
}
