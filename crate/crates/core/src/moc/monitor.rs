//! Continuation-criterion monitors and the narrow-wedge check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Family, SolutionTrace, TracerSeed};
use crate::error::{PistonError, Result};
use crate::gas::Gamma;
use crate::piston::Piston;

/// Monitor constants. `nu_hat` is only used for the sharper bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorParams {
    pub delta1: f64,
    pub delta2: f64,
    pub nu_hat: Option<f64>,
}

impl Default for MonitorParams {
    fn default() -> Self {
        MonitorParams {
            delta1: 0.1,
            delta2: 0.1,
            nu_hat: None,
        }
    }
}

/// Raw monitor quantities on one level; `h3` is NaN when no
/// characteristic derivatives are available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorSample {
    pub t: f64,
    pub w_prime: f64,
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelCheck {
    pub t: f64,
    pub h1: f64,
    pub bound1: f64,
    pub pass1: bool,
    pub h2: f64,
    pub bound2: f64,
    pub pass2: bool,
    pub h3: f64,
    pub bound3: f64,
    pub pass3: Option<bool>,
    pub tilde1: bool,
    pub tilde2: bool,
    pub tilde3: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub params: MonitorParams,
    /// Checked horizon; nothing is claimed beyond it.
    pub horizon: (f64, f64),
    pub levels: Vec<LevelCheck>,
    pub all_pass: bool,
    /// Fraction of evaluated levels passing each bound.
    pub pass_rate: [f64; 3],
    /// Largest `h / bound` per bound.
    pub worst_ratio: [f64; 3],
    /// `2 (1 − h3/bound3) ρ∞^{−(γ−1)/(2γ)}`, worst level.
    pub nu_hat_candidate: Option<f64>,
    pub tilde_all_pass: bool,
}

/// Exponents `((γ+1)/(2γ), (γ−1)/γ, (γ−1)/(2γ))`.
fn exponents(gamma: Gamma) -> (f64, f64, f64) {
    let g = gamma.value();
    ((g + 1.0) / (2.0 * g), (g - 1.0) / g, (g - 1.0) / (2.0 * g))
}

pub fn hypothesis_monitor(
    samples: &[MonitorSample],
    params: MonitorParams,
    gamma: Gamma,
    rho_inf: f64,
) -> HypothesisReport {
    let g = gamma.value();
    let (e1, e2, e3) = exponents(gamma);
    let b1 = rho_inf.powf(e1);
    let scale2 = rho_inf.powf(e2);
    let scale3 = rho_inf.powf(e3);
    let b3 = params.delta2 * scale3;
    let tilde3_factor = params.nu_hat.map(|nu| 1.0 - 0.5 * nu * scale3);

    let mut levels = Vec::with_capacity(samples.len());
    let mut passes = [0usize; 3];
    let mut counts = [0usize; 3];
    let mut worst = [0.0f64; 3];
    let mut nu_min: Option<f64> = None;
    let mut tilde_ok = true;
    for s in samples {
        let wpow = s.w_prime.powf((g - 2.0) / g);
        let b2 = (wpow + params.delta1) * scale2;
        let pass1 = s.h1 <= b1;
        let pass2 = s.h2 <= b2;
        let pass3 = s.h3.is_finite().then_some(s.h3 <= b3);
        let tilde1 = s.h1 <= 0.5 * b1;
        let tilde2 = s.h2 <= (wpow + 2.0 * params.delta1 / 3.0) * scale2;
        let tilde3 = match (s.h3.is_finite(), tilde3_factor) {
            (true, Some(f)) => Some(s.h3 <= f * b3),
            _ => None,
        };
        tilde_ok &= tilde1 && tilde2 && tilde3.unwrap_or(true);
        for (i, p) in [Some(pass1), Some(pass2), pass3].into_iter().enumerate() {
            if let Some(p) = p {
                counts[i] += 1;
                passes[i] += p as usize;
            }
        }
        worst[0] = worst[0].max(s.h1 / b1);
        worst[1] = worst[1].max(s.h2 / b2);
        if s.h3.is_finite() {
            worst[2] = worst[2].max(s.h3 / b3);
            let nu = 2.0 * (1.0 - s.h3 / b3) / scale3;
            nu_min = Some(nu_min.map_or(nu, |m: f64| m.min(nu)));
        }
        levels.push(LevelCheck {
            t: s.t,
            h1: s.h1,
            bound1: b1,
            pass1,
            h2: s.h2,
            bound2: b2,
            pass2,
            h3: s.h3,
            bound3: b3,
            pass3,
            tilde1,
            tilde2,
            tilde3,
        });
    }
    let rate = |i: usize| {
        if counts[i] == 0 {
            f64::NAN
        } else {
            passes[i] as f64 / counts[i] as f64
        }
    };
    let horizon = (
        samples.first().map_or(f64::NAN, |s| s.t),
        samples.last().map_or(f64::NAN, |s| s.t),
    );
    HypothesisReport {
        params,
        horizon,
        all_pass: (0..3).all(|i| passes[i] == counts[i]) && !samples.is_empty(),
        pass_rate: [rate(0), rate(1), rate(2)],
        worst_ratio: worst,
        nu_hat_candidate: nu_min,
        tilde_all_pass: tilde_ok,
        levels,
    }
}

/// Interior sample points for the narrow check, as tracer seeds of both
/// families at each point. Start times stay in the first three quarters
/// of the horizon so that most traces exit before it ends.
pub fn narrow_seeds(points: usize, seed: u64, t0: f64, t_end: f64) -> Vec<TracerSeed> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * points);
    for _ in 0..points {
        let t = t0 + 0.75 * (t_end - t0) * rng.gen::<f64>();
        let xi = rng.gen_range(1e-3..1.0 - 1e-3);
        out.push(TracerSeed {
            family: Family::Plus,
            t,
            xi,
        });
        out.push(TracerSeed {
            family: Family::Minus,
            t,
            xi,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NarrowSample {
    pub family: Family,
    pub t_p: f64,
    pub x_p: f64,
    pub exit_t: Option<f64>,
    pub elapsed: f64,
    pub bound: f64,
    /// `None` when the trace ran out of horizon first.
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrowReport {
    pub delta1: f64,
    pub sigma: f64,
    pub w_star: f64,
    pub w_upper: f64,
    /// Exit-time bound divided by `t_p`.
    pub coefficient: f64,
    pub samples: Vec<NarrowSample>,
    pub n_pass: usize,
    pub n_fail: usize,
    pub n_inconclusive: usize,
    pub width_levels: usize,
    pub width_failures: usize,
    /// Largest `(s − w)/bound` over levels.
    pub worst_width_ratio: f64,
    pub all_pass: bool,
}

/// Exit-time and width bounds against the tracers carried by `trace`.
/// `sigma` defaults to half of its admissible range `√γ w_*^{(γ−1)/γ}`.
pub fn narrow_check(trace: &SolutionTrace, piston: &Piston, delta1: f64, sigma: Option<f64>) -> Result<NarrowReport> {
    let gamma = trace.gamma;
    let g = gamma.value();
    let (_, e2, e3) = exponents(gamma);
    let (w_star, w_upper) = piston.speed_bounds(trace.t_end, 4001);
    let limit = g.sqrt() * w_star.powf(e2);
    let sigma = sigma.unwrap_or(0.5 * limit);
    if !(sigma > 0.0 && sigma < limit) {
        return Err(PistonError::Domain(format!("sigma = {sigma} outside (0, {limit})")));
    }
    let spread = delta1 + w_star.powf(-1.0 / g) * w_upper.powf(e2);
    let coefficient = spread / (limit - sigma) * trace.rho_inf.powf(e3);
    let width_coef = spread * trace.rho_inf.powf(e2);

    let mut samples = Vec::new();
    let (mut n_pass, mut n_fail, mut n_inc) = (0, 0, 0);
    for rec in trace.tracers.iter().filter(|r| r.is_started()) {
        let bound = coefficient * rec.t_start;
        let (elapsed, pass) = match rec.exit_t {
            Some(te) => {
                let e = te - rec.t_start;
                (e, Some(e <= bound))
            }
            None => (f64::NAN, None),
        };
        match pass {
            Some(true) => n_pass += 1,
            Some(false) => n_fail += 1,
            None => n_inc += 1,
        }
        samples.push(NarrowSample {
            family: rec.seed.family,
            t_p: rec.t_start,
            x_p: rec.x_start,
            exit_t: rec.exit_t,
            elapsed,
            bound,
            pass,
        });
    }
    let mut width_failures = 0;
    let mut worst: f64 = 0.0;
    for r in &trace.records {
        let ratio = r.width() / (width_coef * r.t);
        worst = worst.max(ratio);
        width_failures += (ratio > 1.0) as usize;
    }
    Ok(NarrowReport {
        delta1,
        sigma,
        w_star,
        w_upper,
        coefficient,
        samples,
        n_pass,
        n_fail,
        n_inconclusive: n_inc,
        width_levels: trace.records.len(),
        width_failures,
        worst_width_ratio: worst,
        all_pass: n_fail == 0 && width_failures == 0,
    })
}
