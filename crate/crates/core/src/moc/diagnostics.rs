//! Characteristic derivatives `∂±c` between consecutive levels and the
//! residuals of the decomposition and reflection relations they satisfy.

use serde::{Deserialize, Serialize};

use super::{trace_back, Family, LevelInterp, SolutionTrace, TimeLevel};
use crate::error::{PistonError, Result};
use crate::gas::{eigenvalues, sound_speed, Gamma};
use crate::interp::{Interpolant, Scheme};

const EPS: f64 = 1e-300;

/// `∂±c` and `∂±u` at the nodes of a level, computed from its predecessor.
#[derive(Debug, Clone, PartialEq)]
pub struct CharDiagnostics {
    pub dt: f64,
    pub dpc: Vec<f64>,
    pub dmc: Vec<f64>,
    pub dpu: Vec<f64>,
    pub dmu: Vec<f64>,
    /// C+ foot on the previous level; NaN at the piston node.
    pub foot_plus: Vec<f64>,
    /// C− foot on the previous level; NaN at the shock node.
    pub foot_minus: Vec<f64>,
    /// Raw residual of `∂⁺∂⁻c = K (∂⁺c + ∂⁻c) ∂⁻c / 2c`, `K = (γ+1)/(γ−1)`;
    /// NaN at the end nodes or when no earlier diagnostics exist.
    pub decomposition_residual_plus: Vec<f64>,
    /// Raw residual of `∂⁻∂⁺c = K (∂⁺c + ∂⁻c) ∂⁺c / 2c`.
    pub decomposition_residual_minus: Vec<f64>,
}

/// Second-order one-sided `∂x c` at the left (`forward`) or right end.
fn end_gradient(level: &TimeLevel, gamma: Gamma, forward: bool) -> Result<f64> {
    let n = level.nodes.len();
    let h = level.spacing();
    let idx = if forward { [0, 1, 2] } else { [n - 1, n - 2, n - 3] };
    let c: Vec<f64> = idx
        .iter()
        .map(|&i| sound_speed(level.nodes[i].state.rho, gamma))
        .collect::<Result<_>>()?;
    let d = (-3.0 * c[0] + 4.0 * c[1] - c[2]) / (2.0 * h);
    Ok(if forward { d } else { -d })
}

/// Directional differences along the characteristic segments joining
/// `a` to `b`. The C+ derivative at the piston and the C− derivative at the
/// shock have their feet outside `a`, so they are assembled from the
/// boundary node path and a one-sided `∂x c`.
pub fn char_derivatives(a: &TimeLevel, b: &TimeLevel, gamma: Gamma, scheme: Scheme) -> Result<CharDiagnostics> {
    let dt = b.t - a.t;
    if !(dt > 0.0) {
        return Err(PistonError::Insufficient(format!(
            "levels not ordered in time: {} → {}",
            a.t, b.t
        )));
    }
    let n = b.nodes.len();
    if a.nodes.len() != n || n < 3 {
        return Err(PistonError::Insufficient("levels must share a node count ≥ 3".into()));
    }
    let ia = LevelInterp::new(a, gamma, scheme)?;
    let mut out = CharDiagnostics {
        dt,
        dpc: vec![0.0; n],
        dmc: vec![0.0; n],
        dpu: vec![0.0; n],
        dmu: vec![0.0; n],
        foot_plus: vec![f64::NAN; n],
        foot_minus: vec![f64::NAN; n],
        decomposition_residual_plus: vec![f64::NAN; n],
        decomposition_residual_minus: vec![f64::NAN; n],
    };
    for j in 0..n {
        let nd = b.nodes[j];
        let c_b = sound_speed(nd.state.rho, gamma)?;
        let (lm, lp) = eigenvalues(nd.state, gamma)?;
        if j > 0 {
            let foot = trace_back(&ia, Family::Plus, nd.x, lp, dt, b.t)?;
            out.foot_plus[j] = foot;
            out.dpc[j] = (c_b - ia.sound_speed(foot)) / dt;
        }
        if j + 1 < n {
            let foot = trace_back(&ia, Family::Minus, nd.x, lm, dt, b.t)?;
            out.foot_minus[j] = foot;
            out.dmc[j] = (c_b - ia.sound_speed(foot)) / dt;
        }
    }
    // piston: node moves with u, so ∂⁺ = d/dt|node + c ∂x
    let c_a0 = sound_speed(a.nodes[0].state.rho, gamma)?;
    let c_b0 = sound_speed(b.nodes[0].state.rho, gamma)?;
    let gx = 0.5 * (end_gradient(a, gamma, true)? + end_gradient(b, gamma, true)?);
    out.dpc[0] = (c_b0 - c_a0) / dt + 0.5 * (c_a0 + c_b0) * gx;
    // shock: node moves with s', so ∂⁻ = d/dt|node + (λ− − s') ∂x
    let (sa, sb) = (a.nodes[n - 1].state, b.nodes[n - 1].state);
    let c_an = sound_speed(sa.rho, gamma)?;
    let c_bn = sound_speed(sb.rho, gamma)?;
    let rel = 0.5 * ((sa.u - c_an - a.shock.s_prime) + (sb.u - c_bn - b.shock.s_prime));
    let gx = 0.5 * (end_gradient(a, gamma, false)? + end_gradient(b, gamma, false)?);
    out.dmc[n - 1] = (c_bn - c_an) / dt + rel * gx;

    // The interior values are centred on their segment midpoints
    // `(x − Δt λ/2, t − Δt/2)`; shift the node-path values onto the same
    // convention so that nested differences stay consistent.
    let h = b.spacing();
    let c_mid0 = 0.5 * (c_a0 + c_b0);
    out.dpc[0] -= 0.5 * dt * c_mid0 * (out.dpc[2] - out.dpc[1]) / h;
    out.dmc[n - 1] -= 0.5 * dt * rel * (out.dmc[n - 2] - out.dmc[n - 3]) / h;

    let factor = gamma.invariant_factor();
    for j in 0..n {
        out.dpu[j] = -factor * out.dpc[j];
        out.dmu[j] = factor * out.dmc[j];
    }
    Ok(out)
}

/// Raw decomposition residuals at the interior nodes of `b`, using the
/// diagnostics already attached to `a` and the freshly computed `diag_b`.
pub fn decomposition_residuals(
    a: &TimeLevel,
    b: &TimeLevel,
    diag_b: &CharDiagnostics,
    gamma: Gamma,
    scheme: Scheme,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let da = a
        .diag
        .as_ref()
        .ok_or_else(|| PistonError::Insufficient("earlier level lacks diagnostics".into()))?;
    let n = b.nodes.len();
    let xs: Vec<f64> = a.nodes.iter().map(|nd| nd.x).collect();
    let c_a: Vec<f64> = a
        .nodes
        .iter()
        .map(|nd| sound_speed(nd.state.rho, gamma))
        .collect::<Result<_>>()?;
    let pa = Interpolant::new(scheme, xs.clone(), da.dpc.clone())?;
    let ma = Interpolant::new(scheme, xs.clone(), da.dmc.clone())?;
    let ca = Interpolant::new(scheme, xs, c_a)?;
    let g = gamma.value();
    let big_k = (g + 1.0) / (g - 1.0);
    let rhs = |c: f64, p: f64, m: f64, which: f64| big_k / (2.0 * c) * (p + m) * which;
    let dt = diag_b.dt;
    let mut plus = vec![f64::NAN; n];
    let mut minus = vec![f64::NAN; n];
    for j in 1..n - 1 {
        let c_b = sound_speed(b.nodes[j].state.rho, gamma)?;
        let (p_b, m_b) = (diag_b.dpc[j], diag_b.dmc[j]);

        let fp = diag_b.foot_plus[j];
        let (p_a, m_a, c_f) = (pa.eval(fp), ma.eval(fp), ca.eval(fp));
        let lhs = (m_b - m_a) / dt;
        let r = 0.5 * (rhs(c_b, p_b, m_b, m_b) + rhs(c_f, p_a, m_a, m_a));
        plus[j] = lhs - r;

        let fm = diag_b.foot_minus[j];
        let (p_a, m_a, c_f) = (pa.eval(fm), ma.eval(fm), ca.eval(fm));
        let lhs = (p_b - p_a) / dt;
        let r = 0.5 * (rhs(c_b, p_b, m_b, p_b) + rhs(c_f, p_a, m_a, p_a));
        minus[j] = lhs - r;
    }
    Ok((plus, minus))
}

/// A residual and the scale it is normalized by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: f64,
    pub den: f64,
}

impl Ratio {
    pub fn value(&self) -> f64 {
        if self.num == 0.0 {
            0.0
        } else {
            self.num / self.den.max(EPS)
        }
    }

    fn is_finite(&self) -> bool {
        self.num.is_finite() && self.den.is_finite()
    }
}

/// A residual time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    pub t: Vec<f64>,
    pub values: Vec<Ratio>,
}

impl ResidualSeries {
    /// `Σ num / Σ den` over finite entries with `t ∈ [t_lo, t_hi]`, each
    /// weighted by the time step so different grids aggregate alike.
    pub fn l1(&self, t_lo: f64, t_hi: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 1..self.t.len() {
            let v = self.values[i];
            if self.t[i] < t_lo || self.t[i] > t_hi || !v.is_finite() {
                continue;
            }
            let w = self.t[i] - self.t[i - 1];
            num += w * v.num;
            den += w * v.den;
        }
        if num == 0.0 {
            0.0
        } else {
            num / den.max(EPS)
        }
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .filter(|v| v.is_finite())
            .map(Ratio::value)
            .fold(0.0, f64::max)
    }
}

/// `|∂⁺c + k_g ∂⁻c| / |∂⁻c|` at the shock node of every step.
pub fn shock_reflection_residual(trace: &SolutionTrace) -> ResidualSeries {
    shock_reflection_residual_with(trace, |_, kg| kg)
}

/// As [`shock_reflection_residual`] with the coefficient replaced by
/// `coefficient(k, k_g)`.
pub fn shock_reflection_residual_with<F: Fn(f64, f64) -> f64>(trace: &SolutionTrace, coefficient: F) -> ResidualSeries {
    let mut out = ResidualSeries {
        t: Vec::new(),
        values: Vec::new(),
    };
    for r in &trace.records {
        let kg = coefficient(r.k, r.k_g);
        out.t.push(r.t);
        out.values.push(Ratio {
            num: (r.shock_dpc + kg * r.shock_dmc).abs(),
            den: r.shock_dmc.abs(),
        });
    }
    out
}

/// `|∂⁺c − ∂⁻c − (1−γ)w''|` at the piston node, normalized by the largest
/// of the three terms.
pub fn piston_reflection_residual(trace: &SolutionTrace) -> ResidualSeries {
    let g = trace.gamma.value();
    let mut out = ResidualSeries {
        t: Vec::new(),
        values: Vec::new(),
    };
    for r in &trace.records {
        let forcing = (1.0 - g) * r.w_second;
        out.t.push(r.t);
        out.values.push(Ratio {
            num: (r.piston_dpc - r.piston_dmc - forcing).abs(),
            den: r.piston_dpc.abs().max(r.piston_dmc.abs()).max(forcing.abs()),
        });
    }
    out
}

/// Interior-mean decomposition residuals per step, normalized by
/// `max(|∂⁺c|, |∂⁻c|)/t`.
pub fn decomposition_residual(trace: &SolutionTrace) -> Result<(ResidualSeries, ResidualSeries)> {
    if trace.records.len() < 3 {
        return Err(PistonError::Insufficient("decomposition needs ≥ 3 levels".into()));
    }
    let mut plus = ResidualSeries {
        t: Vec::new(),
        values: Vec::new(),
    };
    let mut minus = ResidualSeries {
        t: Vec::new(),
        values: Vec::new(),
    };
    for r in &trace.records {
        plus.t.push(r.t);
        minus.t.push(r.t);
        plus.values.push(Ratio {
            num: r.decomp_plus,
            den: r.decomp_scale,
        });
        minus.values.push(Ratio {
            num: r.decomp_minus,
            den: r.decomp_scale,
        });
    }
    Ok((plus, minus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moc::{init_from_steady, run, step, StepConfig};
    use crate::piston::PistonSpec;

    fn g(v: f64) -> Gamma {
        Gamma::new(v).unwrap()
    }

    #[test]
    fn uniform_state_has_no_derivatives() {
        let p = PistonSpec::Constant { w0: 1.0 }.build().unwrap();
        let gm = g(1.4);
        let a = init_from_steady(&p, 1e-4, gm, 1.0, 12, 1e-12).unwrap();
        let b = step(&a, &p, 1e-4, gm, &StepConfig::default()).unwrap();
        let d = char_derivatives(&a, &b, gm, Scheme::LocalCubic).unwrap();
        for j in 0..12 {
            assert!(
                d.dpc[j].abs() < 1e-9 && d.dmc[j].abs() < 1e-9,
                "{j}: {} {}",
                d.dpc[j],
                d.dmc[j]
            );
        }
        assert!(char_derivatives(&b, &a, gm, Scheme::LocalCubic).is_err());
    }

    #[test]
    fn velocity_derivatives_follow_sound_speed() {
        let p = PistonSpec::Decaying { w_a: 1.0, w_b: 0.02 }.build().unwrap();
        let gm = g(1.4);
        let a = init_from_steady(&p, 1e-4, gm, 1.0, 12, 1e-12).unwrap();
        let b = step(&a, &p, 1e-4, gm, &StepConfig::default()).unwrap();
        let d = char_derivatives(&a, &b, gm, Scheme::LocalCubic).unwrap();
        for j in 0..12 {
            assert!((d.dpu[j] + 5.0 * d.dpc[j]).abs() < 1e-15);
            assert!((d.dmu[j] - 5.0 * d.dmc[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn decaying_piston_forces_minus_derivative() {
        // w'' < 0 so (1−γ)w'' > 0: ∂⁺c − ∂⁻c > 0 at the piston
        let p = PistonSpec::Decaying { w_a: 1.0, w_b: 0.02 }.build().unwrap();
        let gm = g(1.4);
        let cfg = StepConfig {
            snapshot_every: 1000,
            ..StepConfig::default()
        };
        let tr = run(&p, 1e-4, gm, 1.0, 2.0, 40, &cfg).unwrap();
        let late: Vec<_> = tr.records.iter().filter(|r| r.t > 1.5).collect();
        assert!(!late.is_empty());
        for r in late {
            assert!(r.piston_dpc - r.piston_dmc > 0.0);
        }
    }

    #[test]
    fn x_derivative_consistency() {
        // (∂⁺c − ∂⁻c)/(2c) approximates ∂x c
        let p = PistonSpec::Decaying { w_a: 1.0, w_b: 0.02 }.build().unwrap();
        let gm = g(1.4);
        let mut errs = Vec::new();
        for n in [40, 80] {
            let cfg = StepConfig {
                snapshot_every: 1,
                ..StepConfig::default()
            };
            let tr = run(&p, 1e-4, gm, 1.0, 1.5, n, &cfg).unwrap();
            let lv = tr.last_level().unwrap();
            let d = lv.diag.as_ref().unwrap();
            let h = lv.spacing();
            let mut err: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for j in 1..n - 1 {
                let c = lv.nodes[j].state.sound_speed(gm).unwrap();
                let cl = lv.nodes[j - 1].state.sound_speed(gm).unwrap();
                let cr = lv.nodes[j + 1].state.sound_speed(gm).unwrap();
                let fd = (cr - cl) / (2.0 * h);
                let est = (d.dpc[j] - d.dmc[j]) / (2.0 * c);
                err += (est - fd).abs();
                scale += fd.abs();
            }
            errs.push(err / scale);
        }
        assert!(errs[1] < errs[0], "{errs:?}");
        assert!(errs[1] < 0.05, "{errs:?}");
    }
}
