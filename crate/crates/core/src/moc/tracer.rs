//! Forward tracing of individual characteristics through successive levels.

use serde::{Deserialize, Serialize};

use super::{LevelInterp, TimeLevel};
use crate::error::Result;
use crate::gas::Gamma;
use crate::interp::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Plus,
    Minus,
}

/// A characteristic to follow: it starts on the first level at or after
/// `t`, at fraction `xi` of the piston–shock interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracerSeed {
    pub family: Family,
    pub t: f64,
    pub xi: f64,
}

/// Path summary of one traced characteristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracerRecord {
    pub seed: TracerSeed,
    pub t_start: f64,
    pub x_start: f64,
    /// Transported invariant (`R+` or `R−`) where the trace starts.
    pub r_start: f64,
    /// Last level at which the trace was still inside the wedge.
    pub t_last: f64,
    pub x_last: f64,
    pub r_last: f64,
    /// Time the trace meets the shock (`Plus`) or piston (`Minus`).
    pub exit_t: Option<f64>,
    pub steps: usize,
}

impl TracerRecord {
    pub fn drift(&self) -> f64 {
        (self.r_last - self.r_start).abs()
    }

    pub fn is_started(&self) -> bool {
        self.t_start.is_finite()
    }
}

fn invariant(interp: &LevelInterp, family: Family, x: f64) -> f64 {
    match family {
        Family::Plus => interp.r_plus(x),
        Family::Minus => interp.r_minus(x),
    }
}

pub(crate) struct TracerSet {
    scheme: Scheme,
    records: Vec<TracerRecord>,
    active: Vec<usize>,
    pending: Vec<usize>,
}

impl TracerSet {
    pub(crate) fn new(seeds: &[TracerSeed], scheme: Scheme) -> Self {
        let records = seeds
            .iter()
            .map(|&seed| TracerRecord {
                seed,
                t_start: f64::NAN,
                x_start: f64::NAN,
                r_start: f64::NAN,
                t_last: f64::NAN,
                x_last: f64::NAN,
                r_last: f64::NAN,
                exit_t: None,
                steps: 0,
            })
            .collect();
        TracerSet {
            scheme,
            records,
            active: Vec::new(),
            pending: (0..seeds.len()).collect(),
        }
    }

    pub(crate) fn activate(&mut self, level: &TimeLevel, gamma: Gamma) -> Result<()> {
        if self.pending.is_empty() {
            return Ok(());
        }
        let ready: Vec<usize> = self
            .pending
            .iter()
            .copied()
            .filter(|&i| self.records[i].seed.t <= level.t)
            .collect();
        if ready.is_empty() {
            return Ok(());
        }
        self.pending.retain(|i| !ready.contains(i));
        let interp = LevelInterp::new(level, gamma, self.scheme)?;
        for i in ready {
            let rec = &mut self.records[i];
            let xi = rec.seed.xi.clamp(0.0, 1.0);
            let x = level.piston_x + xi * level.width();
            let r = invariant(&interp, rec.seed.family, x);
            rec.t_start = level.t;
            rec.x_start = x;
            rec.r_start = r;
            rec.t_last = level.t;
            rec.x_last = x;
            rec.r_last = r;
            let on_exit = match rec.seed.family {
                Family::Plus => xi >= 1.0,
                Family::Minus => xi <= 0.0,
            };
            if on_exit {
                rec.exit_t = Some(level.t);
            } else {
                self.active.push(i);
            }
        }
        Ok(())
    }

    /// Heun step of every active trace from level `a` to level `b`.
    pub(crate) fn advance(&mut self, a: &TimeLevel, b: &TimeLevel, gamma: Gamma) -> Result<()> {
        if self.active.is_empty() {
            return Ok(());
        }
        let ia = LevelInterp::new(a, gamma, self.scheme)?;
        let ib = LevelInterp::new(b, gamma, self.scheme)?;
        let dt = b.t - a.t;
        let mut still = Vec::with_capacity(self.active.len());
        for &i in &self.active {
            let rec = &mut self.records[i];
            let fam = rec.seed.family;
            let x = rec.x_last;
            let la = ia.lambda(fam, x);
            let pred = x + dt * la;
            let x_new = x + 0.5 * dt * (la + ib.lambda(fam, pred));
            let (bd_a, bd_b, crossed) = match fam {
                Family::Plus => (a.shock.s, b.shock.s, x_new >= b.shock.s),
                Family::Minus => (a.piston_x, b.piston_x, x_new <= b.piston_x),
            };
            if crossed {
                let theta = ((bd_a - x) / ((x_new - x) - (bd_b - bd_a))).clamp(0.0, 1.0);
                rec.exit_t = Some(a.t + theta * dt);
            } else {
                rec.x_last = x_new;
                rec.t_last = b.t;
                rec.r_last = invariant(&ib, fam, x_new);
                rec.steps += 1;
                still.push(i);
            }
        }
        self.active = still;
        Ok(())
    }

    pub(crate) fn finish(self) -> Vec<TracerRecord> {
        self.records
    }
}

/// Follow one characteristic through stored levels. The levels should be
/// consecutive steps for the result to carry solver accuracy.
pub fn trace_characteristic(
    levels: &[TimeLevel],
    seed: TracerSeed,
    gamma: Gamma,
    scheme: Scheme,
) -> Result<TracerRecord> {
    let mut set = TracerSet::new(&[seed], scheme);
    if let Some(first) = levels.first() {
        set.activate(first, gamma)?;
    }
    for pair in levels.windows(2) {
        set.advance(&pair[0], &pair[1], gamma)?;
        set.activate(&pair[1], gamma)?;
        if set.active.is_empty() && set.pending.is_empty() {
            break;
        }
    }
    Ok(set.finish().remove(0))
}
