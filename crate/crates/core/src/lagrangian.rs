//! First-order Godunov-type reference solver in mass coordinates.
//!
//! With `dm = ρ dx` the piston sits at `m = 0` and the system becomes
//! `v_t − u_m = 0`, `u_t + p_m = 0` with `v = 1/ρ`, `p = v^{−γ}`. Interface
//! states come from a two-wave solver whose impedances are the Lagrangian
//! sound speed `ρc` widened by the compression `max(u_L − u_R, 0)`, which is
//! the strong-shock mass flux when the density ratio is large.

use serde::{Deserialize, Serialize};

use crate::error::{PistonError, Result};
use crate::gas::{Gamma, GasState};
use crate::piston::Piston;
use crate::shock_polar::{solve_steady_piston, ShockSample};

/// Density ratio that counts as a shock for [`LagGrid::locate_shock`].
pub const SHOCK_THRESHOLD: f64 = 1.5;
/// Minimum number of cells.
pub const MIN_CELLS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct LagGrid {
    pub m_edges: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub t: f64,
    pub rho_inf: f64,
}

/// Interface fluxes of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepFlux {
    pub dt: f64,
    pub piston_pressure: f64,
    pub far_pressure: f64,
}

/// Detected shock and the averaged state behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockLocation {
    /// Interface index with the largest density jump.
    pub interface: usize,
    pub m: f64,
    pub x: f64,
    pub plateau: GasState,
    pub ratio: f64,
}

#[inline]
fn pressure(v: f64, g: f64) -> f64 {
    v.powf(-g)
}

/// Lagrangian sound speed `ρc = √γ v^{−(γ+1)/2}` divided by `p`, which
/// reuses the pressure power: `ρc/p = √(γ v^{γ−1})`.
#[inline]
fn lagrangian_speed_from_p(v: f64, p: f64, g: f64) -> f64 {
    (g / (p * v)).sqrt()
}

struct Fluxes {
    us: Vec<f64>,
    ps: Vec<f64>,
    zmax: f64,
}

fn check_cfl(cfl: f64) -> Result<()> {
    if cfl > 0.0 && cfl < 1.0 {
        Ok(())
    } else {
        Err(PistonError::Domain(format!("cfl = {cfl} outside (0, 1)")))
    }
}

impl LagGrid {
    pub fn init(rho_inf: f64, total_mass: f64, n_cells: usize) -> Result<Self> {
        if n_cells < MIN_CELLS {
            return Err(PistonError::Insufficient(format!(
                "need ≥ {MIN_CELLS} cells, got {n_cells}"
            )));
        }
        if !(rho_inf > 0.0 && total_mass > 0.0) {
            return Err(PistonError::Domain(format!(
                "density {rho_inf} and total mass {total_mass} must be positive"
            )));
        }
        let dm = total_mass / n_cells as f64;
        Ok(LagGrid {
            m_edges: (0..=n_cells).map(|i| i as f64 * dm).collect(),
            v: vec![1.0 / rho_inf; n_cells],
            u: vec![0.0; n_cells],
            t: 0.0,
            rho_inf,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.v.len()
    }

    fn dm(&self, i: usize) -> f64 {
        self.m_edges[i + 1] - self.m_edges[i]
    }

    pub fn momentum(&self) -> f64 {
        (0..self.n_cells()).map(|i| self.u[i] * self.dm(i)).sum()
    }

    /// Interface velocities and pressures for the current state, with the
    /// piston moving at `w_prime` and the far field at rest, plus the
    /// largest impedance seen.
    fn fluxes(&self, w_prime: f64, g: f64) -> Fluxes {
        let n = self.n_cells();
        let mut us = vec![0.0; n + 1];
        let mut ps = vec![0.0; n + 1];
        let far_v = 1.0 / self.rho_inf;
        let cell = |i: usize| {
            let v = if i < n { self.v[i] } else { far_v };
            let u = if i < n { self.u[i] } else { 0.0 };
            let p = pressure(v, g);
            (v, u, p, p * lagrangian_speed_from_p(v, p, g))
        };
        let (v0, u0, p0, z0) = cell(0);
        let z = z0 + (w_prime - u0).max(0.0) / v0;
        us[0] = w_prime;
        ps[0] = p0 + z * (w_prime - u0);
        let mut zmax: f64 = z;
        let mut left = (v0, u0, p0, z0);
        for i in 1..=n {
            let right = cell(i);
            let squeeze = (left.1 - right.1).max(0.0);
            let zl = left.3 + squeeze / left.0;
            let zr = right.3 + squeeze / right.0;
            us[i] = (zl * left.1 + zr * right.1 - (right.2 - left.2)) / (zl + zr);
            ps[i] = (zr * left.2 + zl * right.2 - zl * zr * (right.1 - left.1)) / (zl + zr);
            zmax = zmax.max(zl).max(zr);
            left = right;
        }
        Fluxes { us, ps, zmax }
    }

    fn min_dm(&self) -> f64 {
        (0..self.n_cells()).map(|i| self.dm(i)).fold(f64::INFINITY, f64::min)
    }

    /// Largest stable step for the current state.
    pub fn stable_dt(&self, w_prime: f64, gamma: Gamma, cfl: f64) -> f64 {
        cfl * self.min_dm() / self.fluxes(w_prime, gamma.value()).zmax
    }

    /// One conservative update with the piston at speed `w_prime`.
    pub fn step_fv(&mut self, w_prime: f64, gamma: Gamma, cfl: f64) -> Result<StepFlux> {
        check_cfl(cfl)?;
        let f = self.fluxes(w_prime, gamma.value());
        let dt = cfl * self.min_dm() / f.zmax;
        self.apply(f, dt)
    }

    /// One update of size `dt`; the caller guarantees stability.
    pub fn step_dt(&mut self, w_prime: f64, gamma: Gamma, dt: f64) -> Result<StepFlux> {
        let f = self.fluxes(w_prime, gamma.value());
        self.apply(f, dt)
    }

    /// Step limited by `cfl` and by `t_cap`, with the piston speed taken at
    /// the step midpoint.
    fn step_capped(&mut self, piston: &Piston, g: f64, cfl: f64, t_cap: f64) -> Result<StepFlux> {
        let mut f = self.fluxes(piston.w_prime(self.t), g);
        let dt = (cfl * self.min_dm() / f.zmax).min(t_cap - self.t);
        let wp = piston.w_prime(self.t + 0.5 * dt);
        let (v0, u0) = (self.v[0], self.u[0]);
        let p0 = pressure(v0, g);
        let z = p0 * lagrangian_speed_from_p(v0, p0, g) + (wp - u0).max(0.0) / v0;
        f.us[0] = wp;
        f.ps[0] = p0 + z * (wp - u0);
        self.apply(f, dt)
    }

    fn apply(&mut self, f: Fluxes, dt: f64) -> Result<StepFlux> {
        let n = self.n_cells();
        for i in 0..n {
            let r = dt / self.dm(i);
            self.v[i] += r * (f.us[i + 1] - f.us[i]);
            self.u[i] -= r * (f.ps[i + 1] - f.ps[i]);
            if !(self.v[i] > 0.0) {
                return Err(PistonError::Positivity {
                    cell: i,
                    t: self.t + dt,
                    v: self.v[i],
                });
            }
        }
        self.t += dt;
        Ok(StepFlux {
            dt,
            piston_pressure: f.ps[0],
            far_pressure: f.ps[n],
        })
    }

    /// Cell centres `(x, ρ, u)` with the piston at `piston_x`.
    pub fn to_eulerian(&self, piston_x: f64) -> Vec<(f64, f64, f64)> {
        let mut x = piston_x;
        (0..self.n_cells())
            .map(|i| {
                let len = self.v[i] * self.dm(i);
                let centre = x + 0.5 * len;
                x += len;
                (centre, 1.0 / self.v[i], self.u[i])
            })
            .collect()
    }

    /// Eulerian position of edge `i`.
    fn edge_x(&self, piston_x: f64, i: usize) -> f64 {
        piston_x + (0..i).map(|j| self.v[j] * self.dm(j)).sum::<f64>()
    }

    /// Interface of largest density jump and the average over `window`
    /// cells that end `gap` cells behind it.
    pub fn locate_shock(&self, piston_x: f64, window: usize, gap: usize) -> Result<ShockLocation> {
        let n = self.n_cells();
        let rho: Vec<f64> = self.v.iter().map(|v| 1.0 / v).collect();
        let ratio = rho.iter().copied().fold(0.0, f64::max) / self.rho_inf;
        if !(ratio > SHOCK_THRESHOLD) {
            return Err(PistonError::NoShock {
                ratio,
                threshold: SHOCK_THRESHOLD,
            });
        }
        let mut best = 1;
        let mut jump = 0.0;
        for i in 1..n {
            let d = (rho[i] - rho[i - 1]).abs();
            if d > jump {
                jump = d;
                best = i;
            }
        }
        let hi = best.saturating_sub(gap).max(1);
        let lo = hi.saturating_sub(window.max(1));
        let cells = lo..hi;
        let count = cells.len() as f64;
        let rho_avg = cells.clone().map(|i| rho[i]).sum::<f64>() / count;
        let u_avg = cells.map(|i| self.u[i]).sum::<f64>() / count;
        Ok(ShockLocation {
            interface: best,
            m: self.m_edges[best],
            x: self.edge_x(piston_x, best),
            plateau: GasState::new(rho_avg, u_avg),
            ratio,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub n_cells: usize,
    pub cfl: f64,
    /// Total mass is `ρ∞ s_est(t_end)·mass_margin`.
    pub mass_margin: f64,
    pub plateau_window: usize,
    pub plateau_gap: usize,
    /// Record the shock every this many steps.
    pub history_every: usize,
    /// Times at which full Eulerian snapshots are kept.
    pub snapshot_times: Vec<f64>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            n_cells: 4000,
            cfl: 0.8,
            mass_margin: 1.05 / 0.9,
            plateau_window: 20,
            plateau_gap: 6,
            history_every: 20,
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSample {
    pub t: f64,
    pub piston_x: f64,
    pub shock_m: f64,
    pub shock_x: f64,
    pub rho: f64,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSnapshot {
    pub t: f64,
    pub cells: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct OracleTrace {
    pub gamma: Gamma,
    pub rho_inf: f64,
    pub t_end: f64,
    pub total_mass: f64,
    pub grid: LagGrid,
    pub history: Vec<OracleSample>,
    pub snapshots: Vec<OracleSnapshot>,
    /// Shock came within 10% of the cells from the far edge.
    pub tainted: bool,
    /// `|Σu Δm − ∫(p_piston − p_far) dt|`, relative to the momentum scale.
    pub momentum_defect: f64,
    pub steps: usize,
}

impl OracleTrace {
    /// Shock sample nearest to `t` (linear interpolation of the history).
    pub fn sample_at(&self, t: f64) -> Option<OracleSample> {
        let i = self.history.partition_point(|s| s.t < t);
        if i == 0 {
            return self.history.first().copied().filter(|s| s.t == t);
        }
        if i == self.history.len() {
            return None;
        }
        let (a, b) = (self.history[i - 1], self.history[i]);
        let f = (t - a.t) / (b.t - a.t);
        let lerp = |p: f64, q: f64| p + f * (q - p);
        Some(OracleSample {
            t,
            piston_x: lerp(a.piston_x, b.piston_x),
            shock_m: lerp(a.shock_m, b.shock_m),
            shock_x: lerp(a.shock_x, b.shock_x),
            rho: lerp(a.rho, b.rho),
            u: lerp(a.u, b.u),
        })
    }
}

/// Run the reference solver from rest at `t = 0` to `t_end`.
pub fn run_oracle(piston: &Piston, rho_inf: f64, gamma: Gamma, t_end: f64, cfg: &OracleConfig) -> Result<OracleTrace> {
    if !(t_end > 0.0) {
        return Err(PistonError::Domain(format!("t_end = {t_end} must be positive")));
    }
    let (_, w_upper) = piston.speed_bounds(t_end, 2001);
    let steady = solve_steady_piston(w_upper, rho_inf, gamma, 1e-12)?;
    let reach = piston.w(t_end) + steady.lead * t_end;
    let total_mass = rho_inf * reach.max(steady.s0 * t_end) * cfg.mass_margin;
    let mut grid = LagGrid::init(rho_inf, total_mass, cfg.n_cells)?;
    let p0 = grid.momentum();
    let mut impulse = 0.0;
    let mut history = Vec::new();
    let mut snapshots = Vec::new();
    let mut pending: Vec<f64> = cfg.snapshot_times.iter().copied().filter(|&t| t <= t_end).collect();
    pending.sort_by(f64::total_cmp);
    let mut pending = pending.into_iter().peekable();
    let mut tainted = false;
    let mut steps = 0usize;
    let every = cfg.history_every.max(1);
    let record = |grid: &LagGrid, history: &mut Vec<OracleSample>, tainted: &mut bool| -> Result<()> {
        let px = piston.w(grid.t);
        if let Ok(loc) = grid.locate_shock(px, cfg.plateau_window, cfg.plateau_gap) {
            if loc.interface as f64 > 0.9 * grid.n_cells() as f64 {
                *tainted = true;
            }
            history.push(OracleSample {
                t: grid.t,
                piston_x: px,
                shock_m: loc.m,
                shock_x: loc.x,
                rho: loc.plateau.rho,
                u: loc.plateau.u,
            });
        }
        Ok(())
    };
    check_cfl(cfg.cfl)?;
    let g = gamma.value();
    while grid.t < t_end {
        let cap = pending.peek().copied().unwrap_or(t_end).min(t_end);
        if cap > grid.t {
            let flux = grid.step_capped(piston, g, cfg.cfl, cap)?;
            impulse += flux.dt * (flux.piston_pressure - flux.far_pressure);
            steps += 1;
        }
        if grid.t + 1e-14 * t_end >= t_end {
            grid.t = t_end;
        }
        let snap = pending.peek().is_some_and(|&ts| grid.t >= ts);
        if snap {
            let t = pending.next().unwrap_or(grid.t);
            snapshots.push(OracleSnapshot {
                t,
                cells: grid.to_eulerian(piston.w(t)),
            });
        }
        if steps.is_multiple_of(every) || grid.t >= t_end {
            record(&grid, &mut history, &mut tainted)?;
        }
    }
    let scale = total_mass * w_upper;
    let momentum_defect = (grid.momentum() - p0 - impulse).abs() / scale;
    Ok(OracleTrace {
        gamma,
        rho_inf,
        t_end,
        total_mass,
        grid,
        history,
        snapshots,
        tainted,
        momentum_defect,
        steps,
    })
}

/// Deviation of the characteristic solver's shock data from the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub window: (f64, f64),
    pub samples: usize,
    /// `max |u_ref/u − 1|` of the post-shock velocity over the window.
    pub max_rel_u: f64,
    /// Same for the post-shock density.
    pub max_rel_rho: f64,
    /// `|s_ref/s − 1|` at the end of the window.
    pub shock_rel_end: f64,
    pub tainted: bool,
}

fn lerp_at(ts: &[f64], vs: &[f64], t: f64) -> Option<f64> {
    let i = ts.partition_point(|&x| x < t);
    if i < ts.len() && ts[i] == t {
        return Some(vs[i]);
    }
    if i == 0 || i == ts.len() {
        return None;
    }
    let f = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
    Some(vs[i - 1] + f * (vs[i] - vs[i - 1]))
}

/// Compare at every shock sample of `moc` with `t ≥ t_from` that the
/// oracle history covers.
pub fn compare_with_oracle(
    moc: &[ShockSample],
    oracle: &[OracleSample],
    t_from: f64,
    tainted: bool,
) -> Result<Comparison> {
    let (Some(o_first), Some(o_last)) = (oracle.first(), oracle.last()) else {
        return Err(PistonError::Insufficient("oracle history is empty".into()));
    };
    let ot: Vec<f64> = oracle.iter().map(|o| o.t).collect();
    let ou: Vec<f64> = oracle.iter().map(|o| o.u).collect();
    let orho: Vec<f64> = oracle.iter().map(|o| o.rho).collect();
    let mut max_rel_u: f64 = 0.0;
    let mut max_rel_rho: f64 = 0.0;
    let mut samples = 0;
    let lo = t_from.max(o_first.t);
    let mut hi = lo;
    for m in moc.iter().filter(|m| m.t >= lo && m.t <= o_last.t) {
        let (Some(u), Some(rho)) = (lerp_at(&ot, &ou, m.t), lerp_at(&ot, &orho, m.t)) else {
            continue;
        };
        max_rel_u = max_rel_u.max((u / m.state.u - 1.0).abs());
        max_rel_rho = max_rel_rho.max((rho / m.state.rho - 1.0).abs());
        samples += 1;
        hi = m.t;
    }
    if samples == 0 {
        return Err(PistonError::Insufficient(format!(
            "no overlapping samples after t = {t_from}"
        )));
    }
    let mt: Vec<f64> = moc.iter().map(|m| m.t).collect();
    let ms: Vec<f64> = moc.iter().map(|m| m.s).collect();
    let os: Vec<f64> = oracle.iter().map(|o| o.shock_x).collect();
    let s_moc = lerp_at(&mt, &ms, hi).unwrap_or(f64::NAN);
    let s_ref = lerp_at(&ot, &os, hi).unwrap_or(f64::NAN);
    Ok(Comparison {
        window: (lo, hi),
        samples,
        max_rel_u,
        max_rel_rho,
        shock_rel_end: (s_ref / s_moc - 1.0).abs(),
        tainted,
    })
}
