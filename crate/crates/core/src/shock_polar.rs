//! Shock-front algebra: the shock polar `f(k)`, the steady constant-speed
//! piston solution, the unsteady Rankine–Hugoniot closure, the reflection
//! coefficient `k_g` and the tangent coefficients `(a, b)`.
//!
//! Ratios are handled through their excess `d = k − 1` internally so that
//! weak shocks do not lose digits to cancellation.

use serde::{Deserialize, Serialize};

use crate::error::{PistonError, Result};
use crate::gas::{eigenvalues, sound_speed, Gamma, GasState};
use crate::roots::{solve_increasing, MAX_ITER};

/// Smallest accepted far-field density is `MIN_RHO_INF / γ`.
pub const MIN_RHO_INF: f64 = 1e-300;
/// Lower end of every root bracket on the excess `k − 1`.
pub const BRACKET_LO: f64 = 1e-13;

fn check_k(k: f64) -> Result<f64> {
    if !(k > 1.0) || !k.is_finite() {
        return Err(PistonError::Entropy { k });
    }
    Ok(k - 1.0)
}

fn check_rho_inf(rho_inf: f64, gamma: Gamma) -> Result<()> {
    if !(rho_inf > 0.0) || !rho_inf.is_finite() {
        return Err(PistonError::Domain(format!(
            "far-field density must be positive, got {rho_inf}"
        )));
    }
    if rho_inf < MIN_RHO_INF / gamma.value() {
        return Err(PistonError::Domain(format!(
            "far-field density {rho_inf:e} below the underflow guard {:e}",
            MIN_RHO_INF / gamma.value()
        )));
    }
    Ok(())
}

/// `k^γ − 1` from the excess `d = k − 1`.
#[inline]
fn pow_m1(d: f64, g: f64) -> f64 {
    (g * d.ln_1p()).exp_m1()
}

#[inline]
fn f_of_excess(d: f64, g: f64) -> f64 {
    let k = 1.0 + d;
    ((d / k) * pow_m1(d, g)).sqrt()
}

#[inline]
fn f_prime_of_excess(d: f64, g: f64) -> f64 {
    let k = 1.0 + d;
    // γk^{γ+1} + (1−γ)k^γ − 1 = γ k^γ (k − 1) + (k^γ − 1)
    let num = g * k.powf(g) * d + pow_m1(d, g);
    num / (2.0 * k * k * f_of_excess(d, g))
}

/// Shock polar `f(k) = √((1 − 1/k)(k^γ − 1))`, `k > 1`.
pub fn f_polar(k: f64, gamma: Gamma) -> Result<f64> {
    let d = check_k(k)?;
    Ok(f_of_excess(d, gamma.value()))
}

/// `f'(k) = (γk^{γ+1} + (1−γ)k^γ − 1) / (2k² f(k))`.
pub fn f_polar_prime(k: f64, gamma: Gamma) -> Result<f64> {
    let d = check_k(k)?;
    Ok(f_prime_of_excess(d, gamma.value()))
}

#[inline]
fn h_of_excess(d: f64, g: f64) -> f64 {
    d * pow_m1(d, g) / (1.0 + d)
}

/// `h(τ) = (τ − 1)(τ^γ − 1)/τ`, strictly increasing on `τ > 1`.
pub fn h_of_tau(tau: f64, gamma: Gamma) -> Result<f64> {
    if !(tau > 1.0) || !tau.is_finite() {
        return Err(PistonError::Domain(format!("density ratio τ = {tau} must exceed 1")));
    }
    Ok(h_of_excess(tau - 1.0, gamma.value()))
}

/// Post-shock state and shock speed for a piston moving at constant speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadySolution {
    pub rho0: f64,
    pub u0: f64,
    pub s0: f64,
    pub tau: f64,
    pub rho_inf: f64,
    /// `s0 − u0`, carried separately because it is tiny when `ρ∞ → 0`.
    pub lead: f64,
}

impl SteadySolution {
    pub fn state(&self) -> GasState {
        GasState::new(self.rho0, self.u0)
    }

    /// Relative residuals of the mass and momentum jump conditions.
    pub fn rh_residuals(&self, gamma: Gamma) -> (f64, f64) {
        let g = gamma.value();
        let (r0, u0, s0, ri) = (self.rho0, self.u0, self.s0, self.rho_inf);
        let mass = ((r0 - ri) * s0 - r0 * u0).abs() / (r0 * u0).abs().max(f64::MIN_POSITIVE);
        let flux = r0 * u0 * s0;
        let p0 = r0.powf(g);
        let momentum = (flux - r0 * u0 * u0 - p0 + ri.powf(g)).abs() / flux.abs().max(p0).max(f64::MIN_POSITIVE);
        (mass, momentum)
    }

    /// Sound speed behind the shock.
    pub fn c0(&self, gamma: Gamma) -> f64 {
        sound_speed(self.rho0, gamma).unwrap_or(f64::NAN)
    }

    /// `λ+ − s0 = c0 − (s0 − u0)` without cancellation in `s0`.
    pub fn lambda_plus_gap(&self, gamma: Gamma) -> f64 {
        self.c0(gamma) - self.lead
    }

    /// `s0 − λ− = c0 + (s0 − u0)`.
    pub fn lambda_minus_gap(&self, gamma: Gamma) -> f64 {
        self.c0(gamma) + self.lead
    }
}

/// Solve the steady jump conditions with `u0 = w0`: find `τ` with
/// `h(τ) = w0² ρ∞^{1−γ}`, then `s0 = τ w0 /(τ − 1)`.
pub fn solve_steady_piston(w0: f64, rho_inf: f64, gamma: Gamma, tol: f64) -> Result<SteadySolution> {
    if !(w0 > 0.0) || !w0.is_finite() {
        return Err(PistonError::Domain(format!("piston speed must be positive, got {w0}")));
    }
    if !(tol > 0.0) {
        return Err(PistonError::Domain(format!("tolerance must be positive, got {tol}")));
    }
    check_rho_inf(rho_inf, gamma)?;
    let g = gamma.value();
    let ln_target = 2.0 * w0.ln() + (1.0 - g) * rho_inf.ln();
    let target = ln_target.exp();
    if !target.is_finite() {
        return Err(PistonError::Domain(format!(
            "w0² ρ∞^(1−γ) overflows for w0 = {w0}, ρ∞ = {rho_inf:e}"
        )));
    }
    let phi = |d: f64| {
        let m1 = pow_m1(d, g);
        let val = d.ln() + m1.ln() - d.ln_1p() - ln_target;
        let k = 1.0 + d;
        let der = 1.0 / d + g * k.powf(g - 1.0) / m1 - 1.0 / k;
        (val, der)
    };
    let guess = target.powf(1.0 / g).max((target / g).sqrt());
    let root = solve_increasing(phi, BRACKET_LO, guess, tol, MAX_ITER)?;
    let d = root.x;
    let tau = 1.0 + d;
    let lead = w0 / d;
    Ok(SteadySolution {
        rho0: tau * rho_inf,
        u0: w0,
        s0: w0 + lead,
        tau,
        rho_inf,
        lead,
    })
}

/// Closed-form leading-order surrogate of [`solve_steady_piston`] as `ρ∞ → 0`.
pub fn steady_leading_order(w0: f64, rho_inf: f64, gamma: Gamma) -> SteadySolution {
    let g = gamma.value();
    let rho0 = w0.powf(2.0 / g) * rho_inf.powf(1.0 / g);
    let lead = w0.powf((g - 2.0) / g) * rho_inf.powf((g - 1.0) / g);
    SteadySolution {
        rho0,
        u0: w0,
        s0: w0 + lead,
        tau: rho0 / rho_inf,
        rho_inf,
        lead,
    }
}

/// Tangent coefficients `(a, b)` with `∂_t + s'∂_x = a∂⁺ + b∂⁻` along the shock.
pub fn shock_tangent_coeffs(k: f64, gamma: Gamma) -> Result<(f64, f64)> {
    let d = check_k(k)?;
    let g = gamma.value();
    let f = f_of_excess(d, g);
    let big = g.sqrt() * d * k.powf(0.5 * (g - 1.0));
    Ok(((f + big) / (2.0 * big), (big - f) / (2.0 * big)))
}

/// Reflection coefficient `k_g` in `∂⁺c + k_g ∂⁻c = 0` on the shock.
///
/// `k_g = [(A − f)/(A + f)] · [(X − 1)/(X + 1)]` with
/// `A = √γ (k−1) k^{(γ−1)/2}` and `X = f'(k) k^{(3−γ)/2} / √γ`.
pub fn reflection_coefficient(k: f64, gamma: Gamma) -> Result<f64> {
    let d = check_k(k)?;
    let g = gamma.value();
    let f = f_of_excess(d, g);
    let big = g.sqrt() * d * k.powf(0.5 * (g - 1.0));
    let x = f_prime_of_excess(d, g) * k.powf(0.5 * (3.0 - g)) / g.sqrt();
    Ok((big - f) / (big + f) * (x - 1.0) / (x + 1.0))
}

/// Leading-order large-`k` form `1 − (6/√γ) k^{−1/2}`.
pub fn kg_leading_order(k: f64, gamma: Gamma) -> f64 {
    1.0 - 6.0 / gamma.value().sqrt() / k.sqrt()
}

/// Instantaneous shock data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockSample {
    pub t: f64,
    pub s: f64,
    pub k: f64,
    pub s_prime: f64,
    pub state: GasState,
    pub k_g: f64,
    pub a: f64,
    pub b: f64,
}

/// Post-shock state, shock speed and shock coefficients for a ratio `k`.
/// `t` and `s` are left at zero for the caller to fill.
pub fn shock_state_from_k(k: f64, rho_inf: f64, gamma: Gamma) -> Result<ShockSample> {
    let d = check_k(k)?;
    check_rho_inf(rho_inf, gamma)?;
    let g = gamma.value();
    let q = rho_inf.powf(0.5 * (g - 1.0));
    let f = f_of_excess(d, g);
    let u = q * f;
    let s_prime = q * k * f / d;
    let (a, b) = shock_tangent_coeffs(k, gamma)?;
    let k_g = reflection_coefficient(k, gamma)?;
    Ok(ShockSample {
        t: 0.0,
        s: 0.0,
        k,
        s_prime,
        state: GasState::new(k * rho_inf, u),
        k_g,
        a,
        b,
    })
}

/// `R+` carried to the shock as a function of `k`: `ρ∞^{(γ−1)/2} F(k)` with
/// `F(k) = f(k) + 2√γ k^{(γ−1)/2}/(γ − 1)`.
pub fn shock_r_plus(k: f64, rho_inf: f64, gamma: Gamma) -> Result<f64> {
    let s = shock_state_from_k(k, rho_inf, gamma)?;
    let c = sound_speed(s.state.rho, gamma)?;
    Ok(s.state.u + gamma.invariant_factor() * c)
}

/// `R+` value approached by an infinitely weak shock.
pub fn weak_shock_r_plus(rho_inf: f64, gamma: Gamma) -> f64 {
    let g = gamma.value();
    gamma.invariant_factor() * g.sqrt() * rho_inf.powf(0.5 * (g - 1.0))
}

/// Shock-fitting closure: the ratio `k > 1` whose post-shock state carries
/// the Riemann invariant `r_plus`.
pub fn solve_k_from_r_plus(r_plus: f64, rho_inf: f64, gamma: Gamma, tol: f64) -> Result<f64> {
    check_rho_inf(rho_inf, gamma)?;
    let g = gamma.value();
    let q = rho_inf.powf(0.5 * (g - 1.0));
    let limit = weak_shock_r_plus(rho_inf, gamma);
    if !(r_plus > limit) {
        return Err(PistonError::ShockVanishes { r_plus, limit });
    }
    let target = r_plus / q;
    let ln_target = target.ln();
    let lf = gamma.invariant_factor() * g.sqrt();
    let phi = |d: f64| {
        let k = 1.0 + d;
        let big_f = f_of_excess(d, g) + lf * k.powf(0.5 * (g - 1.0));
        let dbig_f = f_prime_of_excess(d, g) + g.sqrt() * k.powf(0.5 * (g - 3.0));
        (big_f.ln() - ln_target, dbig_f / big_f)
    };
    let lo_limit = lf;
    let guess = target
        .powf(2.0 / g)
        .max((target - lo_limit) / g.sqrt())
        .max(2.0 * BRACKET_LO);
    let root = solve_increasing(phi, BRACKET_LO, guess, tol, MAX_ITER)?;
    Ok(1.0 + root.x)
}

/// Characteristic speeds of the post-shock state.
pub fn post_shock_eigenvalues(sample: &ShockSample, gamma: Gamma) -> Result<(f64, f64)> {
    eigenvalues(sample.state, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gas::riemann_invariants;
    use proptest::prelude::*;

    fn g(v: f64) -> Gamma {
        Gamma::new(v).unwrap()
    }

    #[test]
    fn f_polar_examples() {
        assert!(f_polar(1.0 + 1e-12, g(1.4)).unwrap() < 1e-5);
        assert!((f_polar(2.0, g(2.0)).unwrap() - 1.5f64.sqrt()).abs() < 1e-15);
        for gv in [1.2, 1.4, 2.0, 2.8] {
            let k = 1e10;
            let ratio = f_polar(k, g(gv)).unwrap() / k.powf(gv / 2.0);
            assert!((ratio - 1.0).abs() < 1e-6, "γ={gv}: {ratio}");
        }
        assert!(matches!(f_polar(1.0, g(2.0)), Err(PistonError::Entropy { .. })));
        assert!(f_polar(0.5, g(2.0)).is_err());
    }

    #[test]
    fn f_prime_examples() {
        let v = f_polar_prime(2.0, g(2.0)).unwrap();
        assert!((v - 11.0 / (8.0 * 1.5f64.sqrt())).abs() < 1e-14);
        assert!((v - 1.1226828).abs() < 1e-7);
        let h = 1e-6;
        let fd = (f_polar(3.0 + h, g(1.4)).unwrap() - f_polar(3.0 - h, g(1.4)).unwrap()) / (2.0 * h);
        assert!((fd - f_polar_prime(3.0, g(1.4)).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn f_prime_weak_shock_limit() {
        // f(1 + d) = √γ d (1 + O(d)) so f' → √γ, finite.
        for gv in [1.4, 2.0, 2.5] {
            let fp = f_polar_prime(1.0 + 1e-8, g(gv)).unwrap();
            assert!((fp / gv.sqrt() - 1.0).abs() < 1e-6, "γ={gv}: {fp}");
        }
    }

    #[test]
    fn h_examples() {
        assert!((h_of_tau(2.0, g(2.0)).unwrap() - 1.5).abs() < 1e-15);
        assert!(h_of_tau(1.0 + 1e-12, g(2.0)).unwrap() < 1e-20);
        let ratio = h_of_tau(1e8, g(1.4)).unwrap() / 1e8f64.powf(1.4);
        assert!((ratio - 1.0).abs() < 1e-6);
        assert!(h_of_tau(1.0, g(2.0)).is_err());
    }

    /// Independent bisection on the raw `h(τ)` definition.
    fn bisect_tau(w0: f64, ri: f64, gv: f64) -> f64 {
        let target = w0 * w0 * ri.powf(1.0 - gv);
        let h = |t: f64| (t - 1.0) * (t.powf(gv) - 1.0) / t;
        let (mut a, mut b) = (1.0, 2.0);
        while h(b) < target {
            b *= 2.0;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if h(m) < target {
                a = m
            } else {
                b = m
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn steady_solves_across_wide_grid() {
        // ln-space residuals sit near 60 here, above the absolute 1e-14 floor
        for gv in [1.2, 1.4, 5.0 / 3.0, 2.0, 2.5, 2.9] {
            for i in 0..=40 {
                let ri = 1e-4 * 10f64.powf(-0.25 * i as f64);
                let s = solve_steady_piston(1.0, ri, g(gv), 1e-12).unwrap();
                let (m, p) = s.rh_residuals(g(gv));
                assert!(m < 1e-12 && p < 1e-12, "γ={gv} ρ∞={ri:e}: {m:e} {p:e}");
            }
        }
    }

    #[test]
    fn steady_worked_example() {
        assert!((bisect_tau(1.0, 2.0 / 3.0, 2.0) - 2.0).abs() < 1e-12);
        let s = solve_steady_piston(1.0, 2.0 / 3.0, g(2.0), 1e-12).unwrap();
        assert!((s.tau - 2.0).abs() < 1e-12);
        assert!((s.rho0 - 4.0 / 3.0).abs() < 1e-12);
        assert!((s.s0 - 2.0).abs() < 1e-12);
        assert_eq!(s.u0, 1.0);
        let (r1, r2) = s.rh_residuals(g(2.0));
        assert!(r1 < 1e-12 && r2 < 1e-12);
    }

    #[test]
    fn steady_vanishing_density() {
        let s = solve_steady_piston(1.0, 1e-8, g(2.0), 1e-12).unwrap();
        let ratio = s.rho0 / 1e-4;
        assert!((0.99..=1.01).contains(&ratio), "{ratio}");
    }

    #[test]
    fn steady_depends_on_similarity_combination() {
        // w0² ρ∞^{1−γ} = 4·(1e-6)^{-1} for both inputs at γ = 2.
        let a = solve_steady_piston(2.0, 1e-6, g(2.0), 1e-12).unwrap();
        let b = solve_steady_piston(1.0, 0.25e-6, g(2.0), 1e-12).unwrap();
        assert!((a.tau / b.tau - 1.0).abs() < 1e-12);
    }

    #[test]
    fn steady_matches_independent_bisection() {
        for &(w0, ri, gv) in &[(0.5, 1e-3, 1.2), (3.0, 1e-9, 5.0 / 3.0), (1.0, 0.05, 2.5)] {
            let s = solve_steady_piston(w0, ri, g(gv), 1e-12).unwrap();
            let t = bisect_tau(w0, ri, gv);
            assert!((s.tau / t - 1.0).abs() < 1e-11, "{w0} {ri} {gv}");
        }
    }

    #[test]
    fn steady_rejects_bad_input() {
        assert!(solve_steady_piston(0.0, 1e-3, g(2.0), 1e-12).is_err());
        assert!(solve_steady_piston(1.0, 0.0, g(2.0), 1e-12).is_err());
        assert!(solve_steady_piston(1.0, 1e-3, g(2.0), 0.0).is_err());
        assert!(solve_steady_piston(1.0, 1e-301, g(2.0), 1e-12).is_err());
    }

    #[test]
    fn leading_order_examples() {
        let exact = solve_steady_piston(1.0, 1e-12, g(1.4), 1e-12).unwrap();
        let lo = steady_leading_order(1.0, 1e-12, g(1.4));
        assert!((lo.rho0 / exact.rho0 - 1.0).abs() < 1e-3);
        assert_eq!(lo.u0, 1.0);
        let lo = steady_leading_order(2.0, 1e-10, g(2.0));
        assert!((lo.lead - 1e-5).abs() < 1e-17);
        assert!((lo.s0 - lo.u0 - 1e-5).abs() < 1e-15);
    }

    #[test]
    fn shock_state_worked_example() {
        let s = shock_state_from_k(2.0, 2.0 / 3.0, g(2.0)).unwrap();
        assert!((s.state.u - 1.0).abs() < 1e-14);
        assert!((s.s_prime - 2.0).abs() < 1e-14);
        assert!((s.state.rho - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn tangent_coefficient_example() {
        let (a, b) = shock_tangent_coeffs(2.0, g(2.0)).unwrap();
        assert!((a - 0.806186).abs() < 1e-6 && (b - 0.193814).abs() < 1e-6);
    }

    #[test]
    fn b_positive_for_strong_shocks() {
        for gi in 1..20 {
            let gv = 1.0 + 0.1 * gi as f64;
            let mut k = 4.0;
            while k < 1e12 {
                let (_, b) = shock_tangent_coeffs(k, g(gv)).unwrap();
                assert!(b > 0.0, "γ={gv} k={k}");
                k *= 1.5;
            }
        }
    }

    #[test]
    fn reflection_coefficient_golden() {
        // Factors (A−f)/(A+f) = 0.2404082057734577 and (X−1)/(X+1) with
        // X = f'(2)·2^{1/2}/√2 = f'(2) = 11/(8√1.5).
        let first = (2.0 - 1.5f64.sqrt()) / (2.0 + 1.5f64.sqrt());
        let x = 11.0 / (8.0 * 1.5f64.sqrt());
        let expected = first * (x - 1.0) / (x + 1.0);
        let kg = reflection_coefficient(2.0, g(2.0)).unwrap();
        assert!((kg - expected).abs() < 1e-15);
        assert!((kg - 0.013894658000680).abs() < 1e-12);
    }

    #[test]
    fn reflection_coefficient_large_k() {
        for gv in [1.4, 2.0, 2.5] {
            let k = 1e6;
            let kg = reflection_coefficient(k, g(gv)).unwrap();
            let scaled = (1.0 - kg) * k.sqrt();
            let expect = 6.0 / gv.sqrt();
            assert!((scaled / expect - 1.0).abs() < 0.02, "γ={gv}: {scaled} vs {expect}");
            let lead = 1.0 - kg_leading_order(k, g(gv));
            assert!(((1.0 - kg) / lead - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn reflection_coefficient_weak_shock_scan() {
        for gv in [1.1, 1.4, 2.0, 2.9] {
            for i in 1..=1000 {
                let k = 1.0 + i as f64 * 1e-3;
                let kg = reflection_coefficient(k, g(gv)).unwrap();
                assert!(kg.abs() < 1.0);
            }
        }
    }

    #[test]
    fn kg_leading_order_examples() {
        assert!((kg_leading_order(1e6, Gamma::unchecked(4.0)) - 0.997).abs() < 1e-15);
        // zero of the closed form at k = 36/γ
        assert!(kg_leading_order(36.0 / 2.0, g(2.0)).abs() < 1e-15);
    }

    #[test]
    fn k_from_r_plus_worked_example() {
        let st = GasState::new(4.0 / 3.0, 1.0);
        let (_, rp) = riemann_invariants(st, g(2.0)).unwrap();
        assert!((rp - 4.265986).abs() < 1e-6);
        let k = solve_k_from_r_plus(rp, 2.0 / 3.0, g(2.0), 1e-12).unwrap();
        assert!((k - 2.0).abs() < 1e-10);
    }

    #[test]
    fn k_from_r_plus_rejects_weak_limit() {
        let lim = weak_shock_r_plus(1e-3, g(1.4));
        assert!(matches!(
            solve_k_from_r_plus(lim, 1e-3, g(1.4), 1e-12),
            Err(PistonError::ShockVanishes { .. })
        ));
        assert!(solve_k_from_r_plus(lim * 0.5, 1e-3, g(1.4), 1e-12).is_err());
    }

    #[test]
    fn closure_monotone_grid_scan() {
        // Brute force: the closure R+(k) increases on a dense grid, so the
        // inverse R+ ↦ k increases too.
        for gv in [1.2, 1.4, 2.0, 2.8] {
            for ri in [1e-8, 1e-3, 0.5] {
                let mut prev_r = weak_shock_r_plus(ri, g(gv));
                let mut prev_k = 1.0;
                let mut k = 1.0 + 1e-6;
                while k < 1e9 {
                    let r = shock_r_plus(k, ri, g(gv)).unwrap();
                    assert!(r > prev_r, "γ={gv} ρ∞={ri} k={k}");
                    let kk = solve_k_from_r_plus(r, ri, g(gv), 1e-12).unwrap();
                    assert!(kk > prev_k);
                    prev_r = r;
                    prev_k = kk;
                    k *= 1.7;
                }
            }
        }
    }

    proptest! {
        #[test]
        fn h_monotone(a in 1.0f64 + 1e-9..1e6, b in 1.0f64 + 1e-9..1e6, gv in 1.01f64..2.99) {
            prop_assume!(a != b);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(h_of_tau(lo, g(gv)).unwrap() < h_of_tau(hi, g(gv)).unwrap());
        }

        #[test]
        fn f_monotone(a in 1.0f64 + 1e-9..1e6, b in 1.0f64 + 1e-9..1e6, gv in 1.01f64..2.99) {
            prop_assume!(a != b);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(f_polar(lo, g(gv)).unwrap() < f_polar(hi, g(gv)).unwrap());
        }

        #[test]
        fn k_round_trip(lk in 1e-6f64..20.0, lr in -20.0f64..-0.1, gv in 1.05f64..2.95) {
            let k = 1.0 + lk.exp() - (1e-6f64).exp() + 1e-6;
            let ri = 10f64.powf(lr);
            let r = shock_r_plus(k, ri, g(gv)).unwrap();
            let kk = solve_k_from_r_plus(r, ri, g(gv), 1e-12).unwrap();
            let back = shock_r_plus(kk, ri, g(gv)).unwrap();
            prop_assert!((back / r - 1.0).abs() < 1e-11);
            prop_assert!(kk > 1.0);
        }

        #[test]
        fn sample_identities(lk in -6.0f64..12.0, lr in -12.0f64..-0.1, gv in 1.01f64..2.99) {
            let k = 1.0 + 10f64.powf(lk);
            let ri = 10f64.powf(lr);
            let s = shock_state_from_k(k, ri, g(gv)).unwrap();
            prop_assert!((s.a + s.b - 1.0).abs() <= 1e-14);
            prop_assert!((s.state.u - s.s_prime * (1.0 - 1.0 / k)).abs() <= 1e-10 * s.s_prime);
            let (lm, lp) = post_shock_eigenvalues(&s, g(gv)).unwrap();
            prop_assert!((s.a * lp + s.b * lm - s.s_prime).abs() <= 1e-10 * s.s_prime.max(lp));
            prop_assert!(s.k_g.abs() < 1.0);
            prop_assert!(lm < s.s_prime && s.s_prime < lp);
        }
    }
}
