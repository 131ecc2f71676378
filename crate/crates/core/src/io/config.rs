//! Flat sectioned `key = value` configuration.
//!
//! ```text
//! [gas]
//! gamma = 1.4
//! rho_inf = 1e-6
//! [piston]
//! type = constant   # constant | decaying | log_periodic | tabulated
//! w0 = 1
//! ```
//!
//! Values are numbers, bare words, quoted strings, `true`/`false`, or
//! comma-separated lists. `#` starts a comment. Every violation in a file
//! is reported, each with its line number where one exists.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{FitTolerance, GeometricGrid, SweepConfig, UnsteadyConfig, UnsteadyFamily};
use crate::error::{PistonError, Result};
use crate::gas::Gamma;
use crate::interp::Scheme;
use crate::lagrangian::OracleConfig;
use crate::moc::{MonitorParams, StepConfig};
use crate::piston::{acceleration_bound, PistonSpec, DEFAULT_KAPPA, DEFAULT_VARRHO};

const SECTIONS: &[(&str, &[&str])] = &[
    ("gas", &["gamma", "rho_inf"]),
    (
        "piston",
        &["type", "w0", "w_a", "w_b", "omega", "fraction", "times", "speeds"],
    ),
    (
        "solver",
        &[
            "t0",
            "t_end",
            "n_nodes",
            "theta",
            "corrector_passes",
            "tol",
            "snapshot_every",
            "scheme",
        ],
    ),
    (
        "monitor",
        &[
            "delta1",
            "delta2",
            "kappa",
            "varrho",
            "sigma",
            "nu_hat",
            "seed",
            "narrow_points",
        ],
    ),
    (
        "oracle",
        &["n_cells", "cfl", "plateau_window", "plateau_gap", "history_every"],
    ),
    (
        "sweep",
        &[
            "gammas",
            "rho_hi",
            "rho_lo",
            "rho_count",
            "k_lo",
            "k_hi",
            "k_count",
            "exponent_tol",
            "prefactor_tol",
            "kg_prefactor_tol",
            "kg_exponent_tol",
            "family",
            "exponent_margin",
        ],
    ),
    ("output", &["dir", "format", "plots", "run_id"]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Plots {
    #[default]
    None,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSection {
    pub t0: f64,
    pub t_end: f64,
    pub n_nodes: usize,
    pub theta: f64,
    pub corrector_passes: usize,
    pub tol: f64,
    pub snapshot_every: usize,
    pub scheme: Scheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSection {
    pub delta1: f64,
    pub delta2: f64,
    pub kappa: f64,
    pub varrho: f64,
    pub sigma: Option<f64>,
    pub nu_hat: Option<f64>,
    pub seed: u64,
    pub narrow_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    pub gammas: Vec<f64>,
    /// Unset grid keys fall back to the running sweep's own default grid.
    pub rho_hi: Option<f64>,
    pub rho_lo: Option<f64>,
    pub rho_count: Option<usize>,
    pub k_lo: f64,
    pub k_hi: f64,
    pub k_count: usize,
    pub exponent_tol: f64,
    pub prefactor_tol: f64,
    pub kg_exponent_tol: f64,
    pub kg_prefactor_tol: f64,
    pub family: UnsteadyFamily,
    pub exponent_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: Format,
    pub plots: Plots,
    pub run_id: Option<String>,
}

/// A fully validated configuration. `gas` and `piston` are absent when the
/// file has no such section; subcommands that need them report that.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub gamma: Option<f64>,
    pub rho_inf: Option<f64>,
    pub piston: Option<PistonSpec>,
    /// Amplitude fraction when the piston amplitude was derived from the
    /// acceleration bound.
    pub piston_fraction: Option<f64>,
    pub solver: SolverSection,
    pub monitor: MonitorSection,
    pub oracle: OracleConfig,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("").expect("empty configuration is valid")
    }
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    raw: String,
}

/// Pulls typed values out of the raw table and collects every problem.
struct Reader {
    table: BTreeMap<(String, String), Entry>,
    errors: Vec<String>,
}

impl Reader {
    fn has(&self, sec: &str, key: &str) -> bool {
        self.table.contains_key(&(sec.to_string(), key.to_string()))
    }

    fn has_section(&self, sec: &str) -> bool {
        self.table.keys().any(|(s, _)| s == sec)
    }

    fn raw(&self, sec: &str, key: &str) -> Option<Entry> {
        self.table.get(&(sec.to_string(), key.to_string())).cloned()
    }

    fn fail(&mut self, sec: &str, key: &str, line: Option<usize>, msg: impl AsRef<str>) {
        let at = line.map(|l| format!("line {l}: ")).unwrap_or_default();
        self.errors.push(format!("{at}[{sec}] {key}: {}", msg.as_ref()));
    }

    fn parse<T>(&mut self, sec: &str, key: &str, conv: impl Fn(&str) -> std::result::Result<T, String>) -> Option<T> {
        let e = self.raw(sec, key)?;
        match conv(&e.raw) {
            Ok(v) => Some(v),
            Err(msg) => {
                self.fail(sec, key, Some(e.line), msg);
                None
            }
        }
    }

    fn line(&self, sec: &str, key: &str) -> Option<usize> {
        self.raw(sec, key).map(|e| e.line)
    }

    /// Optional number checked by `ok`; `what` describes the valid range.
    fn num_opt(&mut self, sec: &str, key: &str, ok: impl Fn(f64) -> bool, what: &str) -> Option<f64> {
        let v = self.parse(sec, key, parse_f64)?;
        if ok(v) {
            Some(v)
        } else {
            let line = self.line(sec, key);
            self.fail(sec, key, line, format!("{v} out of range, need {what}"));
            None
        }
    }

    fn num(&mut self, sec: &str, key: &str, default: f64, ok: impl Fn(f64) -> bool, what: &str) -> f64 {
        if self.has(sec, key) {
            self.num_opt(sec, key, ok, what).unwrap_or(default)
        } else {
            default
        }
    }

    fn required(&mut self, sec: &str, key: &str, ok: impl Fn(f64) -> bool, what: &str) -> Option<f64> {
        if !self.has(sec, key) {
            self.fail(sec, key, None, "missing required key");
            return None;
        }
        self.num_opt(sec, key, ok, what)
    }

    fn count(&mut self, sec: &str, key: &str, default: usize, min: usize) -> usize {
        let Some(v) = self.parse(sec, key, |s| {
            s.parse::<usize>()
                .map_err(|_| format!("`{s}` is not a non-negative integer"))
        }) else {
            return default;
        };
        if v < min {
            let line = self.line(sec, key);
            self.fail(sec, key, line, format!("{v} out of range, need ≥ {min}"));
            return default;
        }
        v
    }

    fn word<T>(&mut self, sec: &str, key: &str, default: T, choices: &[(&str, T)]) -> T
    where
        T: Copy,
    {
        let names: Vec<&str> = choices.iter().map(|c| c.0).collect();
        self.parse(sec, key, |s| {
            choices
                .iter()
                .find(|c| c.0 == unquote(s))
                .map(|c| c.1)
                .ok_or_else(|| format!("`{s}` is not one of {}", names.join(", ")))
        })
        .unwrap_or(default)
    }

    fn list(&mut self, sec: &str, key: &str) -> Option<Vec<f64>> {
        self.parse(sec, key, |s| s.split(',').map(|p| parse_f64(p.trim())).collect())
    }
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    if s.len() >= 2 && s.starts_with('"') && s.ends_with('"') {
        &s[1..s.len() - 1]
    } else {
        s
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let s = unquote(s);
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a finite number")),
    }
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn tokenize(text: &str) -> (BTreeMap<(String, String), Entry>, Vec<String>) {
    let mut table = BTreeMap::new();
    let mut errors = Vec::new();
    let mut section: Option<String> = None;
    for (idx, full) in text.lines().enumerate() {
        let line = idx + 1;
        let body = strip_comment(full).trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                errors.push(format!("line {line}: malformed section header `{body}`"));
                section = None;
                continue;
            };
            let name = name.trim();
            if SECTIONS.iter().any(|s| s.0 == name) {
                section = Some(name.to_string());
            } else {
                let known: Vec<&str> = SECTIONS.iter().map(|s| s.0).collect();
                errors.push(format!(
                    "line {line}: unknown section [{name}] (known: {})",
                    known.join(", ")
                ));
                section = None;
            }
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            errors.push(format!("line {line}: expected `key = value`, got `{body}`"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = section.clone() else {
            errors.push(format!("line {line}: key `{key}` outside a known section"));
            continue;
        };
        let keys = SECTIONS.iter().find(|s| s.0 == sec).map(|s| s.1).unwrap_or(&[]);
        if !keys.contains(&key) {
            errors.push(format!(
                "line {line}: [{sec}] unknown key `{key}` (known: {})",
                keys.join(", ")
            ));
            continue;
        }
        if value.is_empty() {
            errors.push(format!("line {line}: [{sec}] {key}: empty value"));
            continue;
        }
        let k = (sec.clone(), key.to_string());
        if let Some(prev) = table.get(&k) {
            let prev: &Entry = prev;
            errors.push(format!(
                "line {line}: [{sec}] {key}: duplicate key (first set on line {})",
                prev.line
            ));
            continue;
        }
        table.insert(
            k,
            Entry {
                line,
                raw: value.to_string(),
            },
        );
    }
    (table, errors)
}

fn positive(v: f64) -> bool {
    v > 0.0
}

fn unit_open(v: f64) -> bool {
    v > 0.0 && v < 1.0
}

/// Parse and validate a configuration; on failure every violation is listed.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let (table, errors) = tokenize(text);
    let mut r = Reader { table, errors };

    let gas = r.has_section("gas");
    let gamma = if gas {
        r.required("gas", "gamma", |v| Gamma::new(v).is_ok(), "γ∈(1,3)")
    } else {
        None
    };
    let rho_inf = if gas {
        r.required("gas", "rho_inf", positive, "ρ∞ > 0")
    } else {
        None
    };

    let solver = SolverSection {
        t0: r.num("solver", "t0", 1.0, positive, "t0 > 0"),
        t_end: r.num("solver", "t_end", 10.0, positive, "t_end > t0"),
        n_nodes: r.count("solver", "n_nodes", 50, 4),
        theta: r.num("solver", "theta", 0.8, |v| v > 0.0 && v <= 1.0, "θ∈(0,1]"),
        corrector_passes: r.count("solver", "corrector_passes", 2, 0),
        tol: r.num("solver", "tol", 1e-12, |v| v > 0.0 && v < 1e-3, "0 < tol < 1e-3"),
        snapshot_every: r.count("solver", "snapshot_every", 100, 1),
        scheme: r.word(
            "solver",
            "scheme",
            Scheme::LocalCubic,
            &[
                ("local_cubic", Scheme::LocalCubic),
                ("monotone_cubic", Scheme::MonotoneCubic),
            ],
        ),
    };
    if solver.t_end <= solver.t0 {
        let line = r.line("solver", "t_end");
        r.fail(
            "solver",
            "t_end",
            line,
            format!("t_end = {} must exceed t0 = {}", solver.t_end, solver.t0),
        );
    }

    let monitor = MonitorSection {
        delta1: r.num("monitor", "delta1", 0.1, positive, "δ₁ > 0"),
        delta2: r.num("monitor", "delta2", 0.1, positive, "δ₂ > 0"),
        kappa: r.num("monitor", "kappa", DEFAULT_KAPPA, positive, "κ > 0"),
        varrho: r.num("monitor", "varrho", DEFAULT_VARRHO, positive, "ϱ > 0"),
        sigma: r.num_opt("monitor", "sigma", positive, "σ > 0"),
        nu_hat: r.num_opt("monitor", "nu_hat", positive, "ν̂ > 0"),
        seed: r
            .parse("monitor", "seed", |s| {
                s.parse::<u64>()
                    .map_err(|_| format!("`{s}` is not a non-negative integer"))
            })
            .unwrap_or(0),
        narrow_points: r.count("monitor", "narrow_points", 100, 0),
    };

    let (piston, piston_fraction) = parse_piston(&mut r, gamma, rho_inf, &monitor);

    let oracle_default = OracleConfig::default();
    let oracle = OracleConfig {
        n_cells: r.count(
            "oracle",
            "n_cells",
            oracle_default.n_cells,
            crate::lagrangian::MIN_CELLS,
        ),
        cfl: r.num("oracle", "cfl", oracle_default.cfl, unit_open, "cfl∈(0,1)"),
        plateau_window: r.count("oracle", "plateau_window", oracle_default.plateau_window, 1),
        plateau_gap: r.count("oracle", "plateau_gap", oracle_default.plateau_gap, 0),
        history_every: r.count("oracle", "history_every", oracle_default.history_every, 1),
        ..oracle_default
    };

    let gammas = r.list("sweep", "gammas").unwrap_or_else(|| vec![1.4, 2.0, 2.5]);
    if gammas.is_empty() || gammas.iter().any(|&g| Gamma::new(g).is_err()) {
        let line = r.line("sweep", "gammas");
        r.fail("sweep", "gammas", line, "every entry must lie in γ∈(1,3)");
    }
    let sweep = SweepSection {
        gammas,
        rho_hi: r
            .has("sweep", "rho_hi")
            .then(|| r.num("sweep", "rho_hi", 1e-6, positive, "ρ > 0")),
        rho_lo: r
            .has("sweep", "rho_lo")
            .then(|| r.num("sweep", "rho_lo", 1e-10, positive, "ρ > 0")),
        rho_count: r.has("sweep", "rho_count").then(|| r.count("sweep", "rho_count", 9, 4)),
        k_lo: r.num("sweep", "k_lo", 1e4, |v| v > 1e3 && v < 1e9, "k∈(1e3,1e9)"),
        k_hi: r.num("sweep", "k_hi", 1e8, |v| v > 1e3 && v < 1e9, "k∈(1e3,1e9)"),
        k_count: r.count("sweep", "k_count", 9, 3),
        exponent_tol: r.num("sweep", "exponent_tol", 0.01, positive, "> 0"),
        prefactor_tol: r.num("sweep", "prefactor_tol", 0.01, positive, "> 0"),
        kg_exponent_tol: r.num("sweep", "kg_exponent_tol", 0.005, positive, "> 0"),
        kg_prefactor_tol: r.num("sweep", "kg_prefactor_tol", 0.02, positive, "> 0"),
        family: r.word(
            "sweep",
            "family",
            UnsteadyFamily::Decaying,
            &[
                ("decaying", UnsteadyFamily::Decaying),
                ("log_periodic", UnsteadyFamily::LogPeriodic),
            ],
        ),
        exponent_margin: r.num("sweep", "exponent_margin", 0.05, |v| v >= 0.0, "≥ 0"),
    };
    if matches!((sweep.rho_lo, sweep.rho_hi), (Some(lo), Some(hi)) if lo >= hi) {
        let line = r.line("sweep", "rho_lo");
        r.fail(
            "sweep",
            "rho_lo",
            line,
            "rho_lo must be below rho_hi (grid decreases toward 0)",
        );
    }
    if sweep.k_lo >= sweep.k_hi {
        let line = r.line("sweep", "k_lo");
        r.fail("sweep", "k_lo", line, "k_lo must be below k_hi");
    }

    let output = OutputSection {
        dir: r
            .parse("output", "dir", |s| Ok(PathBuf::from(unquote(s))))
            .unwrap_or_else(|| PathBuf::from("out")),
        format: r.word(
            "output",
            "format",
            Format::Csv,
            &[("csv", Format::Csv), ("json", Format::Json)],
        ),
        plots: r.word(
            "output",
            "plots",
            Plots::None,
            &[("none", Plots::None), ("svg", Plots::Svg)],
        ),
        run_id: r.parse("output", "run_id", |s| {
            let id = unquote(s);
            if id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                Ok(id.to_string())
            } else {
                Err(format!("`{id}` may only contain letters, digits, '-' and '_'"))
            }
        }),
    };

    if !r.errors.is_empty() {
        return Err(PistonError::Config(r.errors));
    }
    Ok(RunConfig {
        gamma,
        rho_inf,
        piston,
        piston_fraction,
        solver,
        monitor,
        oracle,
        sweep,
        output,
    })
}

fn parse_piston(
    r: &mut Reader,
    gamma: Option<f64>,
    rho_inf: Option<f64>,
    monitor: &MonitorSection,
) -> (Option<PistonSpec>, Option<f64>) {
    if !r.has_section("piston") {
        return (None, None);
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Kind {
        Constant,
        Decaying,
        LogPeriodic,
        Tabulated,
    }
    if !r.has("piston", "type") {
        r.fail("piston", "type", None, "missing required key");
        return (None, None);
    }
    let kind = r.parse("piston", "type", |s| match unquote(s) {
        "constant" => Ok(Kind::Constant),
        "decaying" => Ok(Kind::Decaying),
        "log_periodic" => Ok(Kind::LogPeriodic),
        "tabulated" => Ok(Kind::Tabulated),
        other => Err(format!(
            "`{other}` is not one of constant, decaying, log_periodic, tabulated"
        )),
    });
    let Some(kind) = kind else { return (None, None) };
    let allowed: &[&str] = match kind {
        Kind::Constant => &["type", "w0"],
        Kind::Decaying => &["type", "w_a", "w_b", "fraction"],
        Kind::LogPeriodic => &["type", "w_a", "w_b", "omega", "fraction"],
        Kind::Tabulated => &["type", "times", "speeds"],
    };
    let stray: Vec<(String, usize)> = r
        .table
        .iter()
        .filter(|((s, k), _)| s == "piston" && !allowed.contains(&k.as_str()))
        .map(|((_, k), e)| (k.clone(), e.line))
        .collect();
    for (k, line) in stray {
        r.fail("piston", &k, Some(line), "not used by this piston type");
    }
    // amplitude: explicit w_b, or a fraction of the acceleration bound
    let amplitude = |r: &mut Reader| -> (Option<f64>, Option<f64>) {
        match (r.has("piston", "w_b"), r.has("piston", "fraction")) {
            (true, true) => {
                let line = r.line("piston", "fraction");
                r.fail("piston", "fraction", line, "give either w_b or fraction, not both");
                (None, None)
            }
            (true, false) => (r.num_opt("piston", "w_b", |v| v >= 0.0, "w_b ≥ 0"), None),
            (false, true) => {
                let f = r.num_opt("piston", "fraction", |v| (0.0..1.0).contains(&v), "fraction∈[0,1)");
                let (Some(f), Some(g), Some(rho)) = (f, gamma, rho_inf) else {
                    return (None, f);
                };
                let Ok(g) = Gamma::new(g) else { return (None, Some(f)) };
                (
                    Some(f * acceleration_bound(monitor.kappa, monitor.varrho, rho, g)),
                    Some(f),
                )
            }
            (false, false) => {
                r.fail("piston", "w_b", None, "missing: give w_b or fraction");
                (None, None)
            }
        }
    };
    match kind {
        Kind::Constant => (
            r.required("piston", "w0", positive, "w0 > 0")
                .map(|w0| PistonSpec::Constant { w0 }),
            None,
        ),
        Kind::Decaying => {
            let w_a = r.required("piston", "w_a", positive, "w_a > 0");
            let (w_b, frac) = amplitude(r);
            (w_a.zip(w_b).map(|(w_a, w_b)| PistonSpec::Decaying { w_a, w_b }), frac)
        }
        Kind::LogPeriodic => {
            let w_a = r.required("piston", "w_a", positive, "w_a > 0");
            let omega = r.required("piston", "omega", positive, "ω > 0");
            let (amp, frac) = amplitude(r);
            // with `fraction` the acceleration amplitude w_b·ω is the scaled bound
            let w_b = match (amp, frac, omega) {
                (Some(a), Some(_), Some(om)) => Some(a / om),
                (a, None, _) => a,
                _ => None,
            };
            match (w_a, w_b, omega) {
                (Some(w_a), Some(w_b), Some(omega)) => (Some(PistonSpec::LogPeriodic { w_a, w_b, omega }), frac),
                _ => (None, frac),
            }
        }
        Kind::Tabulated => {
            let times = r.list("piston", "times");
            let speeds = r.list("piston", "speeds");
            for key in ["times", "speeds"] {
                if !r.has("piston", key) {
                    r.fail("piston", key, None, "missing required key");
                }
            }
            let (Some(times), Some(speeds)) = (times, speeds) else {
                return (None, None);
            };
            if times.len() != speeds.len() {
                let line = r.line("piston", "speeds");
                r.fail(
                    "piston",
                    "speeds",
                    line,
                    format!("{} speeds for {} times", speeds.len(), times.len()),
                );
                return (None, None);
            }
            let spec = PistonSpec::Tabulated {
                knots: times.into_iter().zip(speeds).collect(),
            };
            if let Err(e) = spec.build() {
                let line = r.line("piston", "times");
                r.fail("piston", "times", line, e.to_string());
                return (None, None);
            }
            (Some(spec), None)
        }
    }
}

fn fmt_num(v: f64) -> String {
    crate::io::output::fmt_f64(v)
}

impl RunConfig {
    pub fn gamma(&self) -> Result<Gamma> {
        let g = self
            .gamma
            .ok_or_else(|| PistonError::Config(vec!["[gas] gamma: missing required key".into()]))?;
        Gamma::new(g)
    }

    pub fn rho_inf(&self) -> Result<f64> {
        self.rho_inf
            .ok_or_else(|| PistonError::Config(vec!["[gas] rho_inf: missing required key".into()]))
    }

    pub fn piston_spec(&self) -> Result<&PistonSpec> {
        self.piston
            .as_ref()
            .ok_or_else(|| PistonError::Config(vec!["[piston] section missing".into()]))
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig {
            theta: self.solver.theta,
            corrector_passes: self.solver.corrector_passes,
            tol: self.solver.tol,
            snapshot_every: self.solver.snapshot_every,
            scheme: self.solver.scheme,
            ..StepConfig::default()
        }
    }

    pub fn monitor_params(&self) -> MonitorParams {
        MonitorParams {
            delta1: self.monitor.delta1,
            delta2: self.monitor.delta2,
            nu_hat: self.monitor.nu_hat,
        }
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        Ok(SweepConfig {
            gammas: self.sweep.gammas.clone(),
            grid: self.rho_grid(GeometricGrid::default())?,
            w0: match self.piston {
                Some(PistonSpec::Constant { w0 }) => w0,
                _ => 1.0,
            },
            tolerance: FitTolerance {
                exponent: self.sweep.exponent_tol,
                prefactor: self.sweep.prefactor_tol,
            },
            ..SweepConfig::default()
        })
    }

    /// The `[sweep]` ρ∞ grid, with unset keys taken from `default`.
    fn rho_grid(&self, default: GeometricGrid) -> Result<GeometricGrid> {
        let w = &self.sweep;
        let hi = w.rho_hi.unwrap_or(default.anchor);
        let lo = w
            .rho_lo
            .unwrap_or_else(|| default.points().last().copied().unwrap_or(hi));
        let grid = GeometricGrid::spanning(hi, lo, w.rho_count.unwrap_or(default.count));
        grid.check_decreasing()
            .map_err(|e| PistonError::Config(vec![format!("[sweep] ρ∞ grid: {e}")]))?;
        Ok(grid)
    }

    pub fn k_grid(&self) -> Vec<f64> {
        GeometricGrid::spanning(self.sweep.k_lo, self.sweep.k_hi, self.sweep.k_count).points()
    }

    pub fn kg_tolerance(&self) -> FitTolerance {
        FitTolerance {
            exponent: self.sweep.kg_exponent_tol,
            prefactor: self.sweep.kg_prefactor_tol,
        }
    }

    pub fn unsteady_config(&self) -> Result<UnsteadyConfig> {
        let mut cfg = UnsteadyConfig {
            grid: self.rho_grid(UnsteadyConfig::default().grid)?,
            family: self.sweep.family,
            kappa: self.monitor.kappa,
            varrho: self.monitor.varrho,
            t0: self.solver.t0,
            t_end: self.solver.t_end,
            n_nodes: self.solver.n_nodes,
            monitor: self.monitor_params(),
            exponent_margin: self.sweep.exponent_margin,
            ..UnsteadyConfig::default()
        };
        if let Some(g) = self.gamma {
            cfg.gamma = g;
        }
        match (&self.piston, self.piston_fraction) {
            (Some(PistonSpec::Decaying { w_a, .. }), Some(f)) => {
                cfg.family = UnsteadyFamily::Decaying;
                cfg.w_a = *w_a;
                cfg.fraction = f;
            }
            (Some(PistonSpec::LogPeriodic { w_a, omega, .. }), Some(f)) => {
                cfg.family = UnsteadyFamily::LogPeriodic;
                cfg.w_a = *w_a;
                cfg.omega = *omega;
                cfg.fraction = f;
            }
            (Some(_), None) => {
                return Err(PistonError::Config(vec![
                    "[piston] fraction: the unsteady sweep rescales the amplitude with ρ∞ and needs `fraction`".into(),
                ]))
            }
            _ => {}
        }
        Ok(cfg)
    }

    /// Canonical text form: every key with its effective value. Parsing it
    /// back yields the same configuration.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let kv = |out: &mut String, k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        if self.gamma.is_some() || self.rho_inf.is_some() {
            out.push_str("[gas]\n");
            if let Some(g) = self.gamma {
                kv(&mut out, "gamma", fmt_num(g));
            }
            if let Some(r) = self.rho_inf {
                kv(&mut out, "rho_inf", fmt_num(r));
            }
        }
        if let Some(p) = &self.piston {
            out.push_str("\n[piston]\n");
            kv(&mut out, "type", p.label().to_string());
            match p {
                PistonSpec::Constant { w0 } => kv(&mut out, "w0", fmt_num(*w0)),
                PistonSpec::Decaying { w_a, w_b } => {
                    kv(&mut out, "w_a", fmt_num(*w_a));
                    match self.piston_fraction {
                        Some(f) => kv(&mut out, "fraction", fmt_num(f)),
                        None => kv(&mut out, "w_b", fmt_num(*w_b)),
                    }
                }
                PistonSpec::LogPeriodic { w_a, w_b, omega } => {
                    kv(&mut out, "w_a", fmt_num(*w_a));
                    kv(&mut out, "omega", fmt_num(*omega));
                    match self.piston_fraction {
                        Some(f) => kv(&mut out, "fraction", fmt_num(f)),
                        None => kv(&mut out, "w_b", fmt_num(*w_b)),
                    }
                }
                PistonSpec::Tabulated { knots } => {
                    let list =
                        |f: fn(&(f64, f64)) -> f64| knots.iter().map(|k| fmt_num(f(k))).collect::<Vec<_>>().join(", ");
                    kv(&mut out, "times", list(|k| k.0));
                    kv(&mut out, "speeds", list(|k| k.1));
                }
            }
        }
        let s = &self.solver;
        out.push_str("\n[solver]\n");
        kv(&mut out, "t0", fmt_num(s.t0));
        kv(&mut out, "t_end", fmt_num(s.t_end));
        kv(&mut out, "n_nodes", s.n_nodes.to_string());
        kv(&mut out, "theta", fmt_num(s.theta));
        kv(&mut out, "corrector_passes", s.corrector_passes.to_string());
        kv(&mut out, "tol", fmt_num(s.tol));
        kv(&mut out, "snapshot_every", s.snapshot_every.to_string());
        let scheme = match s.scheme {
            Scheme::LocalCubic => "local_cubic",
            Scheme::MonotoneCubic => "monotone_cubic",
        };
        kv(&mut out, "scheme", scheme.to_string());
        let m = &self.monitor;
        out.push_str("\n[monitor]\n");
        kv(&mut out, "delta1", fmt_num(m.delta1));
        kv(&mut out, "delta2", fmt_num(m.delta2));
        kv(&mut out, "kappa", fmt_num(m.kappa));
        kv(&mut out, "varrho", fmt_num(m.varrho));
        if let Some(v) = m.sigma {
            kv(&mut out, "sigma", fmt_num(v));
        }
        if let Some(v) = m.nu_hat {
            kv(&mut out, "nu_hat", fmt_num(v));
        }
        kv(&mut out, "seed", m.seed.to_string());
        kv(&mut out, "narrow_points", m.narrow_points.to_string());
        let o = &self.oracle;
        out.push_str("\n[oracle]\n");
        kv(&mut out, "n_cells", o.n_cells.to_string());
        kv(&mut out, "cfl", fmt_num(o.cfl));
        kv(&mut out, "plateau_window", o.plateau_window.to_string());
        kv(&mut out, "plateau_gap", o.plateau_gap.to_string());
        kv(&mut out, "history_every", o.history_every.to_string());
        let w = &self.sweep;
        out.push_str("\n[sweep]\n");
        kv(
            &mut out,
            "gammas",
            w.gammas.iter().map(|g| fmt_num(*g)).collect::<Vec<_>>().join(", "),
        );
        if let Some(v) = w.rho_hi {
            kv(&mut out, "rho_hi", fmt_num(v));
        }
        if let Some(v) = w.rho_lo {
            kv(&mut out, "rho_lo", fmt_num(v));
        }
        if let Some(v) = w.rho_count {
            kv(&mut out, "rho_count", v.to_string());
        }
        kv(&mut out, "k_lo", fmt_num(w.k_lo));
        kv(&mut out, "k_hi", fmt_num(w.k_hi));
        kv(&mut out, "k_count", w.k_count.to_string());
        kv(&mut out, "exponent_tol", fmt_num(w.exponent_tol));
        kv(&mut out, "prefactor_tol", fmt_num(w.prefactor_tol));
        kv(&mut out, "kg_exponent_tol", fmt_num(w.kg_exponent_tol));
        kv(&mut out, "kg_prefactor_tol", fmt_num(w.kg_prefactor_tol));
        let fam = match w.family {
            UnsteadyFamily::Decaying => "decaying",
            UnsteadyFamily::LogPeriodic => "log_periodic",
        };
        kv(&mut out, "family", fam.to_string());
        kv(&mut out, "exponent_margin", fmt_num(w.exponent_margin));
        let p = &self.output;
        out.push_str("\n[output]\n");
        kv(&mut out, "dir", format!("\"{}\"", p.dir.display()));
        kv(
            &mut out,
            "format",
            if p.format == Format::Json { "json" } else { "csv" }.to_string(),
        );
        kv(
            &mut out,
            "plots",
            if p.plots == Plots::Svg { "svg" } else { "none" }.to_string(),
        );
        if let Some(id) = &p.run_id {
            kv(&mut out, "run_id", id.clone());
        }
        out
    }

    /// Hex SHA-256 of [`RunConfig::echo`] without the `[output]` section,
    /// so runs that differ only in where and how they are written share it.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let echo = self.echo();
        let body = echo.split("\n[output]\n").next().unwrap_or(&echo);
        let digest = Sha256::digest(body.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[gas]\ngamma = 1.4\nrho_inf = 1e-6\n[piston]\ntype = constant\nw0 = 1\n";

    #[test]
    fn minimal_fills_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.gamma, Some(1.4));
        assert_eq!(c.piston, Some(PistonSpec::Constant { w0: 1.0 }));
        assert_eq!(c.solver.t0, 1.0);
        assert_eq!(c.solver.n_nodes, 50);
        assert_eq!(c.monitor.delta1, 0.1);
        assert_eq!(c.oracle.n_cells, 4000);
        assert_eq!(c.output.format, Format::Csv);
    }

    #[test]
    fn gamma_range_error() {
        let err = parse_config(&MINIMAL.replace("1.4", "3.5")).unwrap_err().to_string();
        assert!(err.contains("γ∈(1,3)"), "{err}");
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn reports_every_violation() {
        let text = "[gas]\ngamma = 3.5\nrho_inf = -1\n[solver]\nthetaa = 0.5\n[piston]\ntype = constant\n";
        let Err(PistonError::Config(errs)) = parse_config(text) else {
            panic!("expected config errors")
        };
        assert!(errs.len() >= 4, "{errs:?}");
        assert!(errs.iter().any(|e| e.contains("thetaa")));
        assert!(errs.iter().any(|e| e.contains("rho_inf")));
        assert!(errs.iter().any(|e| e.contains("w0") && e.contains("missing")));
    }

    #[test]
    fn comments_lists_and_quotes() {
        let text = "# header\n[gas] # trailing\ngamma = 2 # exact\nrho_inf = 0.5\n[piston]\ntype = \"tabulated\"\ntimes = 0, 1, 2\nspeeds = 1, 1.2, 1.1\n[output]\ndir = \"a # b\"\n";
        let c = parse_config(text).unwrap();
        assert_eq!(
            c.piston,
            Some(PistonSpec::Tabulated {
                knots: vec![(0.0, 1.0), (1.0, 1.2), (2.0, 1.1)]
            })
        );
        assert_eq!(c.output.dir, PathBuf::from("a # b"));
    }

    #[test]
    fn fraction_scales_amplitude() {
        let text = "[gas]\ngamma = 1.4\nrho_inf = 1e-4\n[piston]\ntype = decaying\nw_a = 1\nfraction = 0.5\n";
        let c = parse_config(text).unwrap();
        let g = Gamma::new(1.4).unwrap();
        assert_eq!(c.piston, Some(PistonSpec::decaying_scaled(1.0, 0.5, 1.0, 0.1, 1e-4, g)));
        let both = format!("{text}w_b = 0.1\n");
        assert!(parse_config(&both).is_err());
    }

    #[test]
    fn duplicates_and_stray_keys() {
        let text = format!("{MINIMAL}w0 = 2\nomega = 3\n");
        let Err(PistonError::Config(errs)) = parse_config(&text) else {
            panic!()
        };
        assert!(errs.iter().any(|e| e.contains("duplicate")));
        assert!(errs.iter().any(|e| e.contains("omega")));
    }

    #[test]
    fn echo_round_trips() {
        let text = "[gas]\ngamma = 1.4\nrho_inf = 1e-4\n[piston]\ntype = log_periodic\nw_a = 1\nomega = 2\nfraction = 0.5\n[monitor]\nsigma = 0.2\n[output]\nrun_id = abc\n";
        let c = parse_config(text).unwrap();
        let back = parse_config(&c.echo()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn hash_ignores_output_section() {
        let a = parse_config("[gas]\ngamma = 2\nrho_inf = 0.5\n[output]\nrun_id = a\n").unwrap();
        let b = parse_config("[gas]\ngamma = 2\nrho_inf = 0.5\n[output]\nrun_id = b\nformat = json\n").unwrap();
        let c = parse_config("[gas]\ngamma = 2.5\nrho_inf = 0.5\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
