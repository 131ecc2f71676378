//! Shock-fitting method of characteristics on the wedge `w(t) ≤ x ≤ s(t)`.
//!
//! Nodes sit at fixed fractions of the instantaneous interval. Each step
//! traces both characteristics back from every new node to the previous
//! level, picks up the transported Riemann invariant there by monotone
//! cubic interpolation, and closes the two ends with the piston speed and
//! the Rankine–Hugoniot relation respectively.

mod diagnostics;
mod monitor;
mod tracer;

pub use diagnostics::{
    char_derivatives, decomposition_residual, decomposition_residuals, piston_reflection_residual,
    shock_reflection_residual, shock_reflection_residual_with, CharDiagnostics, Ratio, ResidualSeries,
};
pub use monitor::{
    hypothesis_monitor, narrow_check, narrow_seeds, HypothesisReport, LevelCheck, MonitorParams, MonitorSample,
    NarrowReport, NarrowSample,
};
pub use tracer::{trace_characteristic, Family, TracerRecord, TracerSeed};

use serde::{Deserialize, Serialize};

use crate::error::{PistonError, Result};
use crate::gas::{density_from_sound_speed, eigenvalues, riemann_invariants, sound_speed, Gamma, GasState};
use crate::interp::{Interpolant, Scheme};
use crate::piston::Piston;
use crate::shock_polar::{shock_state_from_k, solve_k_from_r_plus, solve_steady_piston, ShockSample};

/// One grid node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub x: f64,
    pub state: GasState,
}

/// The solution on one time level.
#[derive(Debug, Clone)]
pub struct TimeLevel {
    pub step: usize,
    pub t: f64,
    pub piston_x: f64,
    pub shock: ShockSample,
    pub nodes: Vec<Node>,
    pub diag: Option<CharDiagnostics>,
}

impl TimeLevel {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn width(&self) -> f64 {
        self.shock.s - self.piston_x
    }

    pub fn spacing(&self) -> f64 {
        self.width() / (self.nodes.len() - 1) as f64
    }

    /// `∫ρ dx` over the wedge by the trapezoidal rule.
    pub fn mass(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| 0.5 * (w[0].state.rho + w[1].state.rho) * (w[1].x - w[0].x))
            .sum()
    }

    /// Check the structural invariants of a level.
    pub fn validate(&self, piston: &Piston, tol: f64) -> Result<()> {
        let n = self.nodes.len();
        if n < 3 {
            return Err(PistonError::Insufficient(format!("level has {n} nodes, need ≥ 3")));
        }
        if self.nodes[0].x != self.piston_x || self.nodes[n - 1].x != self.shock.s {
            return Err(PistonError::NonPhysical(
                "end nodes detached from piston or shock".into(),
            ));
        }
        if self.nodes.windows(2).any(|w| !(w[1].x > w[0].x)) {
            return Err(PistonError::NonPhysical(format!(
                "nodes not increasing at t = {}",
                self.t
            )));
        }
        if let Some(bad) = self.nodes.iter().find(|nd| !(nd.state.rho > 0.0)) {
            return Err(PistonError::NonPhysical(format!(
                "non-positive density {} at x = {}",
                bad.state.rho, bad.x
            )));
        }
        let wp = piston.w_prime(self.t);
        if (self.nodes[0].state.u - wp).abs() > tol * wp.abs().max(1.0) {
            return Err(PistonError::NonPhysical(format!(
                "piston node velocity {} differs from w'(t) = {wp}",
                self.nodes[0].state.u
            )));
        }
        let last = self.nodes[n - 1].state;
        let sh = self.shock.state;
        if (last.rho - sh.rho).abs() > tol * sh.rho || (last.u - sh.u).abs() > tol * sh.u.abs().max(1.0) {
            return Err(PistonError::NonPhysical(
                "shock node state differs from shock sample".into(),
            ));
        }
        if !(self.shock.k > 1.0) {
            return Err(PistonError::Entropy { k: self.shock.k });
        }
        Ok(())
    }
}

/// Solver controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    /// Fraction of the characteristic crossing time of one cell used as `Δt`.
    pub theta: f64,
    /// Corrector passes after the predictor.
    pub corrector_passes: usize,
    /// Relative tolerance of the shock closure.
    pub tol: f64,
    /// Store every `snapshot_every`-th level; the first and last are always kept.
    pub snapshot_every: usize,
    /// Retries with halved `θ` after a rejected step.
    pub max_retries: usize,
    pub max_steps: usize,
    /// Compute characteristic derivatives at every step.
    pub diagnostics: bool,
    /// Characteristics to follow during the run.
    pub tracers: Vec<TracerSeed>,
    /// Interpolation of the invariants on the previous level.
    pub scheme: Scheme,
    /// Interpolation used by the derivative diagnostics.
    pub diagnostic_scheme: Scheme,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            theta: 0.8,
            corrector_passes: 2,
            tol: 1e-12,
            snapshot_every: 100,
            max_retries: 3,
            max_steps: 10_000_000,
            diagnostics: true,
            tracers: Vec::new(),
            scheme: Scheme::LocalCubic,
            diagnostic_scheme: Scheme::LocalCubic,
        }
    }
}

/// Per-step scalar record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub piston_x: f64,
    pub s: f64,
    pub k: f64,
    pub k_g: f64,
    pub w_prime: f64,
    pub w_second: f64,
    pub mass: f64,
    /// `max |ρ − ρ_S|`
    pub h1: f64,
    /// `max |s' − u|`
    pub h2: f64,
    /// `max t·max(|∂⁺c|, |∂⁻c|)`; NaN without diagnostics.
    pub h3: f64,
    pub shock_dpc: f64,
    pub shock_dmc: f64,
    pub piston_dpc: f64,
    pub piston_dmc: f64,
    /// Interior mean of the first decomposition residual.
    pub decomp_plus: f64,
    /// Interior mean of the second decomposition residual.
    pub decomp_minus: f64,
    /// `max(|∂⁺c|, |∂⁻c|)/t` over the level.
    pub decomp_scale: f64,
}

impl StepRecord {
    pub fn width(&self) -> f64 {
        self.s - self.piston_x
    }
}

/// Why a run stopped early.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub step: usize,
    pub t: f64,
    pub kind: String,
    pub message: String,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct SolutionTrace {
    pub gamma: Gamma,
    pub rho_inf: f64,
    pub t0: f64,
    pub t_end: f64,
    pub n_nodes: usize,
    pub levels: Vec<TimeLevel>,
    pub shock_history: Vec<ShockSample>,
    pub records: Vec<StepRecord>,
    pub tracers: Vec<TracerRecord>,
    pub failure: Option<FailureRecord>,
    pub retries: usize,
}

impl SolutionTrace {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn last_level(&self) -> Option<&TimeLevel> {
        self.levels.last()
    }

    /// Monitor inputs for every step.
    pub fn monitor_samples(&self) -> Vec<MonitorSample> {
        self.records
            .iter()
            .map(|r| MonitorSample {
                t: r.t,
                w_prime: r.w_prime,
                h1: r.h1,
                h2: r.h2,
                h3: r.h3,
            })
            .collect()
    }

    /// Worst relative mismatch between the mass gained since the start,
    /// `∫ρ dx (t) − ∫ρ dx (t0)`, and the mass swept by the shock,
    /// `ρ∞ (s(t) − s(t0))`, relative to `ρ∞ s(t)`. The start-up wedge
    /// itself is not compared because it is the constant-speed solution for
    /// `w'(t0)` placed at `w(t0)`.
    pub fn mass_defect(&self) -> f64 {
        let Some(first) = self.records.first() else {
            return 0.0;
        };
        self.records
            .iter()
            .map(|r| {
                let gained = r.mass - first.mass;
                let swept = self.rho_inf * (r.s - first.s);
                (gained - swept).abs() / (self.rho_inf * r.s)
            })
            .fold(0.0, f64::max)
    }
}

/// Riemann invariants of a level as interpolants in `x`.
pub(crate) struct LevelInterp {
    r_plus: Interpolant,
    r_minus: Interpolant,
    factor: f64,
    lo: f64,
    hi: f64,
}

impl LevelInterp {
    pub(crate) fn new(level: &TimeLevel, gamma: Gamma, scheme: Scheme) -> Result<Self> {
        let mut xs = Vec::with_capacity(level.nodes.len());
        let mut rp = Vec::with_capacity(level.nodes.len());
        let mut rm = Vec::with_capacity(level.nodes.len());
        for nd in &level.nodes {
            let (m, p) = riemann_invariants(nd.state, gamma)?;
            xs.push(nd.x);
            rp.push(p);
            rm.push(m);
        }
        Ok(LevelInterp {
            r_plus: Interpolant::new(scheme, xs.clone(), rp)?,
            r_minus: Interpolant::new(scheme, xs, rm)?,
            factor: 0.25 * (gamma.value() - 1.0),
            lo: level.piston_x,
            hi: level.shock.s,
        })
    }

    pub(crate) fn span(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub(crate) fn r_plus(&self, x: f64) -> f64 {
        self.r_plus.eval(x)
    }

    pub(crate) fn r_minus(&self, x: f64) -> f64 {
        self.r_minus.eval(x)
    }

    pub(crate) fn sound_speed(&self, x: f64) -> f64 {
        self.factor * (self.r_plus(x) - self.r_minus(x))
    }

    pub(crate) fn lambda(&self, family: Family, x: f64) -> f64 {
        let (p, m) = (self.r_plus(x), self.r_minus(x));
        let u = 0.5 * (p + m);
        let c = self.factor * (p - m);
        match family {
            Family::Plus => u + c,
            Family::Minus => u - c,
        }
    }
}

/// Foot of the characteristic through `(head, t + dt)` on the level at `t`,
/// using the trapezoidal rule on the slope.
pub(crate) fn trace_back(
    interp: &LevelInterp,
    family: Family,
    head: f64,
    head_slope: f64,
    dt: f64,
    t: f64,
) -> Result<f64> {
    let mut foot = head - dt * head_slope;
    for _ in 0..3 {
        foot = head - 0.5 * dt * (head_slope + interp.lambda(family, foot));
    }
    let (lo, hi) = interp.span();
    let slack = 1e-9 * (hi - lo);
    if foot < lo - slack || foot > hi + slack {
        return Err(PistonError::TimeStep {
            t,
            reason: format!("{family:?} foot {foot} outside previous span [{lo}, {hi}]"),
        });
    }
    Ok(foot.clamp(lo, hi))
}

fn check_gamma_rho(rho_inf: f64) -> Result<()> {
    if !(rho_inf > 0.0) || !rho_inf.is_finite() {
        return Err(PistonError::Domain(format!(
            "far-field density must be positive, got {rho_inf}"
        )));
    }
    Ok(())
}

/// Self-similar start at `t0` for the constant-speed piston `w'(t0)`.
pub fn init_from_steady(
    piston: &Piston,
    rho_inf: f64,
    gamma: Gamma,
    t0: f64,
    n_nodes: usize,
    tol: f64,
) -> Result<TimeLevel> {
    check_gamma_rho(rho_inf)?;
    if !(t0 > 0.0) || !t0.is_finite() {
        return Err(PistonError::Domain(format!(
            "start time must be positive (shock and piston coincide at t = 0), got {t0}"
        )));
    }
    if n_nodes < 3 {
        return Err(PistonError::Insufficient(format!("need ≥ 3 nodes, got {n_nodes}")));
    }
    let p = piston.evaluate(t0)?;
    let steady = solve_steady_piston(p.w_prime, rho_inf, gamma, tol)?;
    let mut shock = shock_state_from_k(steady.tau, rho_inf, gamma)?;
    let width = steady.lead * t0;
    shock.t = t0;
    shock.s = p.w + width;
    let state = GasState::new(steady.rho0, p.w_prime);
    shock.state = state;
    let nodes = (0..n_nodes)
        .map(|i| {
            let x = if i + 1 == n_nodes {
                shock.s
            } else {
                p.w + width * i as f64 / (n_nodes - 1) as f64
            };
            Node { x, state }
        })
        .collect();
    Ok(TimeLevel {
        step: 0,
        t: t0,
        piston_x: p.w,
        shock,
        nodes,
        diag: None,
    })
}

/// `θ·(node spacing)/(max λ+ − min λ−)`.
pub fn stable_dt(level: &TimeLevel, gamma: Gamma, theta: f64) -> Result<f64> {
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for nd in &level.nodes {
        let (m, p) = eigenvalues(nd.state, gamma)?;
        hi = hi.max(p);
        lo = lo.min(m);
    }
    Ok(theta * level.spacing() / (hi - lo))
}

/// One step with `Δt` from [`stable_dt`].
pub fn step(level: &TimeLevel, piston: &Piston, rho_inf: f64, gamma: Gamma, cfg: &StepConfig) -> Result<TimeLevel> {
    if !(cfg.theta > 0.0 && cfg.theta <= 1.0) {
        return Err(PistonError::Domain(format!("theta = {} outside (0, 1]", cfg.theta)));
    }
    let dt = stable_dt(level, gamma, cfg.theta)?;
    advance(level, dt, piston, rho_inf, gamma, cfg)
}

/// One step of prescribed size.
pub fn advance(
    level: &TimeLevel,
    dt: f64,
    piston: &Piston,
    rho_inf: f64,
    gamma: Gamma,
    cfg: &StepConfig,
) -> Result<TimeLevel> {
    let n = level.nodes.len();
    let t1 = level.t + dt;
    let old = LevelInterp::new(level, gamma, cfg.scheme)?;
    let pp = piston.evaluate(t1)?;
    let quarter = 0.25 * (gamma.value() - 1.0);

    // Head slopes start from the old node at the same fraction.
    let mut head_plus = Vec::with_capacity(n);
    let mut head_minus = Vec::with_capacity(n);
    for nd in &level.nodes {
        let (m, p) = eigenvalues(nd.state, gamma)?;
        head_minus.push(m);
        head_plus.push(p);
    }
    let mut s_prime_new = level.shock.s_prime;
    let mut nodes = level.nodes.clone();
    let mut shock = level.shock;

    for _ in 0..=cfg.corrector_passes {
        let s1 = level.shock.s + 0.5 * dt * (level.shock.s_prime + s_prime_new);
        let width = s1 - pp.w;
        if !(width > 0.0) {
            return Err(PistonError::TimeStep {
                t: t1,
                reason: "shock overtaken by piston".into(),
            });
        }
        for (i, node) in nodes.iter_mut().enumerate() {
            let x = if i == 0 {
                pp.w
            } else if i + 1 == n {
                s1
            } else {
                pp.w + width * i as f64 / (n - 1) as f64
            };
            let state = if i == 0 {
                let foot = trace_back(&old, Family::Minus, x, head_minus[i], dt, t1)?;
                let r_minus = old.r_minus(foot);
                let c = 0.5 * (gamma.value() - 1.0) * (pp.w_prime - r_minus);
                if !(c > 0.0) {
                    return Err(PistonError::Vacuum { t: t1, c });
                }
                GasState::new(density_from_sound_speed(c, gamma)?, pp.w_prime)
            } else if i + 1 == n {
                let foot = trace_back(&old, Family::Plus, x, head_plus[i], dt, t1)?;
                let r_plus = old.r_plus(foot);
                let k = solve_k_from_r_plus(r_plus, rho_inf, gamma, cfg.tol)?;
                if !(k > 1.0) {
                    return Err(PistonError::Entropy { k });
                }
                shock = shock_state_from_k(k, rho_inf, gamma)?;
                shock.t = t1;
                shock.s = s1;
                s_prime_new = shock.s_prime;
                shock.state
            } else {
                let fp = trace_back(&old, Family::Plus, x, head_plus[i], dt, t1)?;
                let fm = trace_back(&old, Family::Minus, x, head_minus[i], dt, t1)?;
                let (rp, rm) = (old.r_plus(fp), old.r_minus(fm));
                let c = quarter * (rp - rm);
                if !(c > 0.0) {
                    return Err(PistonError::Vacuum { t: t1, c });
                }
                GasState::new(density_from_sound_speed(c, gamma)?, 0.5 * (rp + rm))
            };
            *node = Node { x, state };
        }
        for (i, nd) in nodes.iter().enumerate() {
            let c = sound_speed(nd.state.rho, gamma)?;
            head_plus[i] = nd.state.u + c;
            head_minus[i] = nd.state.u - c;
        }
    }
    Ok(TimeLevel {
        step: level.step + 1,
        t: t1,
        piston_x: pp.w,
        shock,
        nodes,
        diag: None,
    })
}

fn failure_kind(e: &PistonError) -> &'static str {
    match e {
        PistonError::TimeStep { .. } => "time_step",
        PistonError::Vacuum { .. } => "vacuum",
        PistonError::Entropy { .. } | PistonError::ShockVanishes { .. } => "entropy",
        PistonError::Bracket(_) | PistonError::NoConvergence { .. } => "root_solve",
        _ => "other",
    }
}

fn record_for(level: &TimeLevel, piston: &Piston, dt: f64) -> StepRecord {
    let rho_s = level.shock.state.rho;
    let sp = level.shock.s_prime;
    let h1 = level
        .nodes
        .iter()
        .map(|nd| (nd.state.rho - rho_s).abs())
        .fold(0.0, f64::max);
    let h2 = level.nodes.iter().map(|nd| (sp - nd.state.u).abs()).fold(0.0, f64::max);
    let n = level.nodes.len();
    let nan = f64::NAN;
    let (mut h3, mut sdp, mut sdm, mut pdp, mut pdm, mut dp, mut dm, mut scale) =
        (nan, nan, nan, nan, nan, nan, nan, nan);
    if let Some(d) = &level.diag {
        h3 = d
            .dpc
            .iter()
            .chain(d.dmc.iter())
            .map(|v| (level.t * v).abs())
            .fold(0.0, f64::max);
        sdp = d.dpc[n - 1];
        sdm = d.dmc[n - 1];
        pdp = d.dpc[0];
        pdm = d.dmc[0];
        let interior = 1..n - 1;
        if d.decomposition_residual_plus[1..n - 1].iter().all(|v| v.is_finite()) {
            let m = (n - 2) as f64;
            dp = interior
                .clone()
                .map(|j| d.decomposition_residual_plus[j].abs())
                .sum::<f64>()
                / m;
            dm = interior.map(|j| d.decomposition_residual_minus[j].abs()).sum::<f64>() / m;
        }
        scale = d.dpc.iter().chain(d.dmc.iter()).map(|v| v.abs()).fold(0.0, f64::max) / level.t;
    }
    let p = piston.evaluate(level.t).unwrap_or(crate::piston::PistonPoint {
        w: nan,
        w_prime: nan,
        w_second: nan,
    });
    StepRecord {
        step: level.step,
        t: level.t,
        dt,
        piston_x: level.piston_x,
        s: level.shock.s,
        k: level.shock.k,
        k_g: level.shock.k_g,
        w_prime: p.w_prime,
        w_second: p.w_second,
        mass: level.mass(),
        h1,
        h2,
        h3,
        shock_dpc: sdp,
        shock_dmc: sdm,
        piston_dpc: pdp,
        piston_dmc: pdm,
        decomp_plus: dp,
        decomp_minus: dm,
        decomp_scale: scale,
    }
}

/// Integrate from the self-similar start at `t0` to `t_end`.
///
/// Step failures end the run early; the partial trace carries a
/// [`FailureRecord`]. Invalid inputs are returned as errors.
pub fn run(
    piston: &Piston,
    rho_inf: f64,
    gamma: Gamma,
    t0: f64,
    t_end: f64,
    n_nodes: usize,
    cfg: &StepConfig,
) -> Result<SolutionTrace> {
    if !(t_end > t0) {
        return Err(PistonError::Domain(format!("t_end = {t_end} must exceed t0 = {t0}")));
    }
    if !(cfg.theta > 0.0 && cfg.theta <= 1.0) {
        return Err(PistonError::Domain(format!("theta = {} outside (0, 1]", cfg.theta)));
    }
    let mut current = init_from_steady(piston, rho_inf, gamma, t0, n_nodes, cfg.tol)?;
    let mut trace = SolutionTrace {
        gamma,
        rho_inf,
        t0,
        t_end,
        n_nodes,
        levels: vec![current.clone()],
        shock_history: vec![current.shock],
        records: vec![record_for(&current, piston, 0.0)],
        tracers: Vec::new(),
        failure: None,
        retries: 0,
    };
    let mut tracers = tracer::TracerSet::new(&cfg.tracers, cfg.scheme);
    tracers.activate(&current, gamma)?;
    let every = cfg.snapshot_every.max(1);
    let mut stored_last = true;

    while current.t < t_end {
        if current.step >= cfg.max_steps {
            trace.failure = Some(FailureRecord {
                step: current.step,
                t: current.t,
                kind: "step_budget".into(),
                message: format!("step budget {} exhausted", cfg.max_steps),
            });
            break;
        }
        let remaining = t_end - current.t;
        let mut theta = cfg.theta;
        let mut attempt = 0;
        let next = loop {
            let outcome = stable_dt(&current, gamma, theta).and_then(|dt| {
                let count = (remaining / dt).ceil().max(1.0);
                let dt = if count <= 1.0 { remaining } else { remaining / count };
                advance(&current, dt, piston, rho_inf, gamma, cfg)
            });
            match outcome {
                Err(PistonError::TimeStep { .. }) if attempt < cfg.max_retries => {
                    attempt += 1;
                    trace.retries += 1;
                    theta *= 0.5;
                }
                other => break other,
            }
        };
        let mut next = match next {
            Ok(level) => level,
            Err(e) => {
                trace.failure = Some(FailureRecord {
                    step: current.step + 1,
                    t: current.t,
                    kind: failure_kind(&e).into(),
                    message: e.to_string(),
                });
                break;
            }
        };
        if next.t >= t_end * (1.0 - 1e-15) {
            next.t = t_end;
            next.shock.t = t_end;
        }
        if cfg.diagnostics {
            let mut d = match char_derivatives(&current, &next, gamma, cfg.diagnostic_scheme) {
                Ok(d) => d,
                Err(e) => {
                    trace.failure = Some(FailureRecord {
                        step: next.step,
                        t: next.t,
                        kind: "diagnostics".into(),
                        message: e.to_string(),
                    });
                    break;
                }
            };
            if current.diag.is_some() {
                if let Ok((p, m)) = decomposition_residuals(&current, &next, &d, gamma, cfg.diagnostic_scheme) {
                    d.decomposition_residual_plus = p;
                    d.decomposition_residual_minus = m;
                }
            }
            next.diag = Some(d);
        }
        tracers.advance(&current, &next, gamma)?;
        tracers.activate(&next, gamma)?;
        trace.records.push(record_for(&next, piston, next.t - current.t));
        trace.shock_history.push(next.shock);
        stored_last = next.step % every == 0;
        if stored_last {
            trace.levels.push(next.clone());
        }
        current = next;
    }
    if !stored_last {
        trace.levels.push(current.clone());
    }
    trace.tracers = tracers.finish();
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::piston::PistonSpec;

    fn g(v: f64) -> Gamma {
        Gamma::new(v).unwrap()
    }

    #[test]
    fn init_example() {
        let p = PistonSpec::Constant { w0: 1.0 }.build().unwrap();
        let lv = init_from_steady(&p, 2.0 / 3.0, g(2.0), 1.0, 5, 1e-12).unwrap();
        assert!((lv.shock.s - 2.0).abs() < 1e-12);
        assert!((lv.shock.s_prime - 2.0).abs() < 1e-12);
        for nd in &lv.nodes {
            assert!((nd.state.rho - 4.0 / 3.0).abs() < 1e-12);
            assert_eq!(nd.state.u, 1.0);
        }
        lv.validate(&p, 1e-12).unwrap();
        let small = init_from_steady(&p, 2.0 / 3.0, g(2.0), 1.0, 3, 1e-12).unwrap();
        small.validate(&p, 1e-12).unwrap();
        assert!(init_from_steady(&p, 2.0 / 3.0, g(2.0), 0.0, 5, 1e-12).is_err());
        assert!(init_from_steady(&p, 2.0 / 3.0, g(2.0), 1.0, 2, 1e-12).is_err());
    }

    #[test]
    fn width_scales_with_density() {
        let p = PistonSpec::Constant { w0: 1.0 }.build().unwrap();
        let gm = g(1.4);
        let e = (gm.value() - 1.0) / gm.value();
        let w1 = init_from_steady(&p, 1e-8, gm, 2.0, 5, 1e-12).unwrap().width();
        let w2 = init_from_steady(&p, 1e-10, gm, 2.0, 5, 1e-12).unwrap().width();
        let slope = (w1 / w2).ln() / 100f64.ln();
        assert!((slope - e).abs() < 0.01, "{slope}");
    }

    #[test]
    fn constant_piston_step_is_exact() {
        let p = PistonSpec::Constant { w0: 1.0 }.build().unwrap();
        let gm = g(2.0);
        let lv = init_from_steady(&p, 2.0 / 3.0, gm, 1.0, 11, 1e-12).unwrap();
        let cfg = StepConfig::default();
        let mut cur = lv.clone();
        for _ in 0..20 {
            let dt = stable_dt(&cur, gm, cfg.theta).unwrap();
            let width = cur.width();
            let c_min = cur
                .nodes
                .iter()
                .map(|n| n.state.sound_speed(gm).unwrap())
                .fold(f64::INFINITY, f64::min);
            assert!(dt <= width / (2.0 * c_min) * cfg.theta + 1e-15);
            cur = step(&cur, &p, 2.0 / 3.0, gm, &cfg).unwrap();
            cur.validate(&p, 1e-10).unwrap();
            for nd in &cur.nodes {
                assert!((nd.state.rho - 4.0 / 3.0).abs() < 1e-12);
                assert!((nd.state.u - 1.0).abs() < 1e-12);
            }
            assert!((cur.shock.s - 2.0 * cur.t).abs() < 1e-10 * cur.t);
        }
    }

    #[test]
    fn run_rejects_bad_horizon() {
        let p = PistonSpec::Constant { w0: 1.0 }.build().unwrap();
        let cfg = StepConfig::default();
        assert!(run(&p, 1e-4, g(1.4), 0.0, 1.0, 10, &cfg).is_err());
        assert!(run(&p, 1e-4, g(1.4), 2.0, 1.0, 10, &cfg).is_err());
    }

    #[test]
    fn constant_run_is_self_similar() {
        let p = PistonSpec::Constant { w0: 1.0 }.build().unwrap();
        let gm = g(1.4);
        let rho_inf = 1e-4;
        let cfg = StepConfig {
            snapshot_every: 50,
            ..StepConfig::default()
        };
        let tr = run(&p, rho_inf, gm, 1.0, 3.0, 20, &cfg).unwrap();
        assert!(tr.completed());
        let steady = solve_steady_piston(1.0, rho_inf, gm, 1e-12).unwrap();
        let last = tr.last_level().unwrap();
        assert_eq!(last.t, 3.0);
        assert!((last.shock.state.rho / steady.rho0 - 1.0).abs() < 1e-10);
        assert!((last.shock.s / (steady.s0 * 3.0) - 1.0).abs() < 1e-10);
        for r in &tr.records[1..] {
            assert!(r.h3 < 1e-9, "{}", r.h3);
        }
        assert!(tr.mass_defect() < 1e-10);
    }

    #[test]
    fn interleaving_and_entropy() {
        let p = PistonSpec::Decaying { w_a: 1.0, w_b: 0.01 }.build().unwrap();
        let gm = g(1.4);
        let cfg = StepConfig {
            snapshot_every: 10,
            ..StepConfig::default()
        };
        let tr = run(&p, 1e-4, gm, 1.0, 2.0, 20, &cfg).unwrap();
        assert!(tr.completed());
        for lv in &tr.levels {
            lv.validate(&p, 1e-10).unwrap();
            let (m, pl) = eigenvalues(lv.nodes[0].state, gm).unwrap();
            let wp = p.w_prime(lv.t);
            assert!(m < wp && wp < pl);
            let (m, pl) = eigenvalues(lv.shock.state, gm).unwrap();
            assert!(m < lv.shock.s_prime && lv.shock.s_prime < pl);
            assert!(lv.shock.k > 1.0);
        }
    }
}
