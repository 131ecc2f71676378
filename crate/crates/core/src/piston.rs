//! Piston trajectories `w(t)` with `w(0) = 0`, and validation of the
//! hypotheses under which a global piecewise smooth flow is expected:
//! bounded speed `w_* < w' < w^*` with `w^*/w_* < 3`, and
//! `sup |(1+t) w''| < κ ρ∞^{(γ−1)/γ + ϱ}`.

use serde::{Deserialize, Serialize};

use crate::error::{PistonError, Result};
use crate::gas::Gamma;
use crate::interp::MonotoneCubic;

/// Default `κ` when the user supplies none; an artifact choice.
pub const DEFAULT_KAPPA: f64 = 1.0;
/// Default `ϱ` when the user supplies none; an artifact choice.
pub const DEFAULT_VARRHO: f64 = 0.1;
/// Maximum admissible `w^*/w_*`.
pub const MAX_SPEED_RATIO: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PistonSpec {
    Constant {
        w0: f64,
    },
    /// `w'(t) = w_a + w_b cos(ω ln(1+t))`
    LogPeriodic {
        w_a: f64,
        w_b: f64,
        omega: f64,
    },
    /// `w'(t) = w_a + w_b/(1+t)`
    Decaying {
        w_a: f64,
        w_b: f64,
    },
    /// `w'` through `(t, w')` knots by monotone cubic interpolation, held
    /// constant after the last knot. The first knot must sit at `t = 0`.
    Tabulated {
        knots: Vec<(f64, f64)>,
    },
}

/// Position, speed and acceleration of the piston.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PistonPoint {
    pub w: f64,
    pub w_prime: f64,
    pub w_second: f64,
}

/// A piston specification ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Piston {
    spec: PistonSpec,
    table: Option<MonotoneCubic>,
}

impl PistonSpec {
    pub fn build(&self) -> Result<Piston> {
        Piston::new(self.clone())
    }

    /// Decaying piston with `w_b = fraction·κ ρ∞^{(γ−1)/γ+ϱ}`, i.e. an
    /// amplitude that respects the acceleration hypothesis at `ρ∞`.
    pub fn decaying_scaled(w_a: f64, fraction: f64, kappa: f64, varrho: f64, rho_inf: f64, gamma: Gamma) -> Self {
        PistonSpec::Decaying {
            w_a,
            w_b: fraction * acceleration_bound(kappa, varrho, rho_inf, gamma),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PistonSpec::Constant { .. } => "constant",
            PistonSpec::LogPeriodic { .. } => "log_periodic",
            PistonSpec::Decaying { .. } => "decaying",
            PistonSpec::Tabulated { .. } => "tabulated",
        }
    }
}

/// `κ ρ∞^{(γ−1)/γ + ϱ}`.
pub fn acceleration_bound(kappa: f64, varrho: f64, rho_inf: f64, gamma: Gamma) -> f64 {
    let g = gamma.value();
    kappa * rho_inf.powf((g - 1.0) / g + varrho)
}

impl Piston {
    pub fn new(spec: PistonSpec) -> Result<Self> {
        let table = match &spec {
            PistonSpec::Constant { w0 } => {
                if !(*w0 > 0.0) {
                    return Err(PistonError::Domain(format!("piston speed w0 = {w0} must be positive")));
                }
                None
            }
            PistonSpec::LogPeriodic { w_a, w_b, omega } => {
                if !(w_a.is_finite() && w_b.is_finite() && omega.is_finite()) {
                    return Err(PistonError::Domain("non-finite log-periodic parameters".into()));
                }
                if !(w_a - w_b.abs() > 0.0) {
                    return Err(PistonError::Domain(format!(
                        "log-periodic piston recedes: w_a − |w_b| = {} ≤ 0",
                        w_a - w_b.abs()
                    )));
                }
                None
            }
            PistonSpec::Decaying { w_a, w_b } => {
                if !(w_a.is_finite() && w_b.is_finite()) || !(*w_a > 0.0) || !(w_a + w_b > 0.0) {
                    return Err(PistonError::Domain(format!(
                        "decaying piston must keep w' > 0: w_a = {w_a}, w_b = {w_b}"
                    )));
                }
                None
            }
            PistonSpec::Tabulated { knots } => {
                if knots.len() < 2 {
                    return Err(PistonError::Insufficient("tabulated piston needs ≥ 2 knots".into()));
                }
                if knots[0].0 != 0.0 {
                    return Err(PistonError::Domain("first tabulated knot must be at t = 0".into()));
                }
                if knots.iter().any(|&(_, v)| !(v > 0.0)) {
                    return Err(PistonError::Domain("tabulated piston speeds must be positive".into()));
                }
                let (ts, vs): (Vec<f64>, Vec<f64>) = knots.iter().copied().unzip();
                Some(MonotoneCubic::new(ts, vs)?)
            }
        };
        Ok(Piston { spec, table })
    }

    pub fn spec(&self) -> &PistonSpec {
        &self.spec
    }

    pub fn evaluate(&self, t: f64) -> Result<PistonPoint> {
        if !(t >= 0.0) {
            return Err(PistonError::Domain(format!("piston evaluated at negative time {t}")));
        }
        Ok(self.eval_unchecked(t))
    }

    pub fn w(&self, t: f64) -> f64 {
        self.eval_unchecked(t).w
    }

    pub fn w_prime(&self, t: f64) -> f64 {
        self.eval_unchecked(t).w_prime
    }

    pub fn w_second(&self, t: f64) -> f64 {
        self.eval_unchecked(t).w_second
    }

    fn eval_unchecked(&self, t: f64) -> PistonPoint {
        match (&self.spec, &self.table) {
            (PistonSpec::Constant { w0 }, _) => PistonPoint {
                w: w0 * t,
                w_prime: *w0,
                w_second: 0.0,
            },
            (PistonSpec::LogPeriodic { w_a, w_b, omega }, _) => {
                let l = t.ln_1p();
                let (sn, cs) = (omega * l).sin_cos();
                // ∫0^t cos(ω ln(1+s)) ds = ((1+t)(cos ωL + ω sin ωL) − 1)/(1+ω²)
                let integral = ((1.0 + t) * (cs + omega * sn) - 1.0) / (1.0 + omega * omega);
                PistonPoint {
                    w: w_a * t + w_b * integral,
                    w_prime: w_a + w_b * cs,
                    w_second: -w_b * omega * sn / (1.0 + t),
                }
            }
            (PistonSpec::Decaying { w_a, w_b }, _) => PistonPoint {
                w: w_a * t + w_b * t.ln_1p(),
                w_prime: w_a + w_b / (1.0 + t),
                w_second: -w_b / ((1.0 + t) * (1.0 + t)),
            },
            (PistonSpec::Tabulated { .. }, Some(table)) => PistonPoint {
                w: table.integral(t),
                w_prime: table.eval(t),
                w_second: table.derivative(t),
            },
            (PistonSpec::Tabulated { .. }, None) => unreachable!("tabulated piston without table"),
        }
    }

    /// `(inf w', sup w')` over `[0, horizon]`, sampled for tabulated pistons.
    pub fn speed_bounds(&self, horizon: f64, samples: usize) -> (f64, f64) {
        let (lo, hi, _, _) = self.bounds(horizon.max(0.0), samples.max(2));
        (lo, hi)
    }

    /// `(inf w', sup w', sup |(1+t) w''|)`, in closed form where available,
    /// otherwise sampled; the flag reports whether sampling was used.
    fn bounds(&self, horizon: f64, samples: usize) -> (f64, f64, f64, bool) {
        match &self.spec {
            PistonSpec::Constant { w0 } => (*w0, *w0, 0.0, false),
            PistonSpec::LogPeriodic { w_a, w_b, omega } => {
                if *omega == 0.0 {
                    (w_a + w_b, w_a + w_b, 0.0, false)
                } else {
                    (w_a - w_b.abs(), w_a + w_b.abs(), (w_b * omega).abs(), false)
                }
            }
            PistonSpec::Decaying { w_a, w_b } => {
                let (lo, hi) = if *w_b >= 0.0 {
                    (*w_a, w_a + w_b)
                } else {
                    (w_a + w_b, *w_a)
                };
                (lo, hi, w_b.abs(), false)
            }
            PistonSpec::Tabulated { .. } => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                let mut acc: f64 = 0.0;
                for i in 0..samples {
                    let t = horizon * i as f64 / (samples - 1) as f64;
                    let p = self.eval_unchecked(t);
                    lo = lo.min(p.w_prime);
                    hi = hi.max(p.w_prime);
                    acc = acc.max(((1.0 + t) * p.w_second).abs());
                }
                (lo, hi, acc, true)
            }
        }
    }
}

/// Outcome of checking the hypotheses on a piston for given `(ρ∞, γ, κ, ϱ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub w_star: f64,
    pub w_upper: f64,
    pub ratio: f64,
    pub speed_ok: bool,
    pub ratio_ok: bool,
    pub accel_sup: f64,
    pub accel_bound: f64,
    pub accel_ok: bool,
    pub kappa: f64,
    pub varrho: f64,
    pub details: String,
}

impl AssumptionReport {
    pub fn all_ok(&self) -> bool {
        self.speed_ok && self.ratio_ok && self.accel_ok
    }
}

/// Validate a piston. Advisory: failures are carried in the report.
pub fn validate(
    piston: &Piston,
    rho_inf: f64,
    gamma: Gamma,
    kappa: f64,
    varrho: f64,
    horizon: f64,
    samples: usize,
) -> AssumptionReport {
    let samples = samples.max(2);
    let horizon = if horizon > 0.0 { horizon } else { 1.0 };
    let (w_star, w_upper, accel_sup, sampled) = piston.bounds(horizon, samples);
    let ratio = w_upper / w_star;
    let accel_bound = acceleration_bound(kappa, varrho, rho_inf, gamma);
    let speed_ok = w_star > 0.0 && w_upper.is_finite();
    let ratio_ok = speed_ok && ratio < MAX_SPEED_RATIO;
    let accel_ok = accel_sup < accel_bound;
    let mut details = if sampled {
        format!("bounds sampled at {samples} points over [0, {horizon}]")
    } else {
        "closed-form bounds".to_string()
    };
    if kappa == DEFAULT_KAPPA && varrho == DEFAULT_VARRHO {
        details.push_str("; κ, ϱ at artifact defaults (1, 0.1)");
    } else {
        details.push_str(&format!("; κ = {kappa}, ϱ = {varrho}"));
    }
    if !speed_ok {
        details.push_str("; speed not bounded away from zero");
    }
    if !ratio_ok {
        details.push_str(&format!("; speed ratio {ratio:.6} ≥ 3"));
    }
    if !accel_ok {
        details.push_str(&format!("; sup|(1+t)w''| = {accel_sup:e} ≥ {accel_bound:e}"));
    }
    AssumptionReport {
        w_star,
        w_upper,
        ratio,
        speed_ok,
        ratio_ok,
        accel_sup,
        accel_bound,
        accel_ok,
        kappa,
        varrho,
        details,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(v: f64) -> Gamma {
        Gamma::new(v).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let p = PistonSpec::Constant { w0: 1.0 }.build().unwrap();
        assert_eq!(
            p.evaluate(7.0).unwrap(),
            PistonPoint {
                w: 7.0,
                w_prime: 1.0,
                w_second: 0.0
            }
        );
        let p = PistonSpec::LogPeriodic {
            w_a: 1.0,
            w_b: 0.1,
            omega: 2.0,
        }
        .build()
        .unwrap();
        let q = p.evaluate(0.0).unwrap();
        assert!(q.w.abs() < 1e-16 && (q.w_prime - 1.1).abs() < 1e-15 && q.w_second == 0.0);
        let p = PistonSpec::Decaying { w_a: 1.0, w_b: 0.2 }.build().unwrap();
        for i in 0..100 {
            let t = i as f64 * 0.37;
            let q = p.evaluate(t).unwrap();
            assert!((1.0 + t) * q.w_second.abs() <= 0.2 + 1e-15);
            assert!(((1.0 + t) * q.w_second.abs() - 0.2 / (1.0 + t)).abs() < 1e-15);
        }
        assert!(p.evaluate(-1.0).is_err());
    }

    #[test]
    fn w_is_antiderivative() {
        let specs = [
            PistonSpec::Constant { w0: 1.3 },
            PistonSpec::LogPeriodic {
                w_a: 1.0,
                w_b: 0.3,
                omega: 2.5,
            },
            PistonSpec::Decaying { w_a: 1.0, w_b: 0.4 },
            PistonSpec::Tabulated {
                knots: vec![(0.0, 1.0), (1.0, 1.2), (3.0, 1.1), (6.0, 1.5)],
            },
        ];
        for spec in specs {
            let p = spec.build().unwrap();
            assert!(p.w(0.0).abs() < 1e-15);
            for h in [1e-3, 1e-4] {
                for i in 0..40 {
                    let t = 0.2 * i as f64 + 0.05;
                    let central = if t >= h {
                        (p.w(t + h) - p.w(t - h)) / (2.0 * h)
                    } else {
                        (p.w(t + h) - p.w(t)) / h
                    };
                    let tol = if t >= h { 50.0 * h * h } else { 5.0 * h };
                    assert!((central - p.w_prime(t)).abs() < tol, "{:?} t={t}", p.spec());
                }
            }
        }
    }

    #[test]
    fn tabulated_acceleration_is_derivative() {
        let p = PistonSpec::Tabulated {
            knots: vec![(0.0, 1.0), (1.0, 1.2), (3.0, 1.1), (6.0, 1.5)],
        }
        .build()
        .unwrap();
        let h = 1e-6;
        for t in [0.5, 1.7, 2.2, 4.0, 5.5] {
            let fd = (p.w_prime(t + h) - p.w_prime(t - h)) / (2.0 * h);
            assert!((fd - p.w_second(t)).abs() < 1e-6);
        }
        // monotone cubic keeps positivity between positive knots
        for i in 0..600 {
            assert!(p.w_prime(i as f64 * 0.01) > 0.0);
        }
    }

    #[test]
    fn validate_examples() {
        let p = PistonSpec::Constant { w0: 1.0 }.build().unwrap();
        for (kappa, rho) in [(1.0, 1e-4), (1e-9, 0.5), (3.0, 1e-12)] {
            let r = validate(&p, rho, g(1.4), kappa, 0.1, 10.0, 2);
            assert!(r.all_ok());
            assert_eq!(r.ratio, 1.0);
            assert_eq!(r.accel_sup, 0.0);
        }
        let p = PistonSpec::LogPeriodic {
            w_a: 1.0,
            w_b: 0.6,
            omega: 1.0,
        }
        .build()
        .unwrap();
        let r = validate(&p, 1e-4, g(2.0), 1.0, 0.1, 10.0, 2);
        assert!((r.ratio - 4.0).abs() < 1e-12);
        assert!(!r.ratio_ok);

        let p = PistonSpec::LogPeriodic {
            w_a: 1.0,
            w_b: 0.1,
            omega: 1.0,
        }
        .build()
        .unwrap();
        let r = validate(&p, 1e-4, g(2.0), 1.0, 0.1, 10.0, 2);
        assert!((r.accel_sup - 0.1).abs() < 1e-12);
        assert!((r.accel_bound - 1e-4f64.powf(0.6)).abs() < 1e-15);
        assert!((r.accel_bound - 3.98e-3).abs() < 1e-5);
        assert!(!r.accel_ok);
        assert!(r.details.contains("defaults"));
    }

    #[test]
    fn closed_form_accel_sup() {
        let p = PistonSpec::LogPeriodic {
            w_a: 2.0,
            w_b: 0.3,
            omega: 1.7,
        }
        .build()
        .unwrap();
        let r = validate(&p, 1e-6, g(1.4), 1.0, 0.1, 100.0, 2);
        assert!((r.accel_sup - 0.3 * 1.7).abs() < 1e-12);
        // dense sampling never exceeds the closed form
        for i in 0..20000 {
            let t = i as f64 * 0.05;
            assert!(((1.0 + t) * p.w_second(t)).abs() <= r.accel_sup + 1e-12);
        }
        let p = PistonSpec::Decaying { w_a: 1.0, w_b: 0.25 }.build().unwrap();
        let r = validate(&p, 1e-6, g(1.4), 1.0, 0.1, 100.0, 2);
        assert!((r.accel_sup - 0.25).abs() < 1e-12);
    }

    #[test]
    fn tabulated_uses_sampling() {
        let p = PistonSpec::Tabulated {
            knots: vec![(0.0, 1.0), (2.0, 1.5)],
        }
        .build()
        .unwrap();
        let r = validate(&p, 1e-6, g(1.4), 1.0, 0.1, 4.0, 101);
        assert!(r.details.contains("sampled at 101"));
        assert!((r.ratio - 1.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_receding() {
        assert!(PistonSpec::Constant { w0: 0.0 }.build().is_err());
        assert!(PistonSpec::LogPeriodic {
            w_a: 1.0,
            w_b: 1.2,
            omega: 1.0
        }
        .build()
        .is_err());
        assert!(PistonSpec::Decaying { w_a: 1.0, w_b: -1.5 }.build().is_err());
        assert!(PistonSpec::Tabulated {
            knots: vec![(0.5, 1.0), (1.0, 1.0)]
        }
        .build()
        .is_err());
    }
}
