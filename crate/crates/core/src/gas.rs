//! Equation of state, characteristic speeds, Riemann invariants and the two
//! nondimensionalizing rescalings for a γ-law isentropic gas with `p = ρ^γ`.
//!
//! Everything here is pure algebra on value types. Vacuum (`ρ = 0`) is
//! admitted so degenerate cases can be tested; the solvers reject it.

use serde::{Deserialize, Serialize};

use crate::error::{PistonError, Result};

/// Adiabatic exponent, restricted to the open interval (1, 3).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Gamma(f64);

impl Gamma {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 1.0 && value < 3.0 {
            Ok(Gamma(value))
        } else {
            Err(PistonError::Domain(format!(
                "adiabatic exponent {value} outside γ∈(1,3)"
            )))
        }
    }

    /// Construct without the (1, 3) range check. Only for arithmetic
    /// checks of closed forms outside the physical range.
    pub fn unchecked(value: f64) -> Self {
        Gamma(value)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `2 / (γ − 1)`, the factor relating `c` to the Riemann invariants.
    #[inline]
    pub fn invariant_factor(self) -> f64 {
        2.0 / (self.0 - 1.0)
    }
}

impl TryFrom<f64> for Gamma {
    type Error = PistonError;
    fn try_from(v: f64) -> Result<Self> {
        Gamma::new(v)
    }
}

impl From<Gamma> for f64 {
    fn from(g: Gamma) -> f64 {
        g.0
    }
}

/// Density and velocity at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasState {
    pub rho: f64,
    pub u: f64,
}

impl GasState {
    pub fn new(rho: f64, u: f64) -> Self {
        GasState { rho, u }
    }

    pub fn sound_speed(&self, gamma: Gamma) -> Result<f64> {
        sound_speed(self.rho, gamma)
    }

    pub fn pressure(&self, gamma: Gamma) -> f64 {
        self.rho.powf(gamma.value())
    }
}

fn check_density(rho: f64) -> Result<()> {
    if rho.is_nan() || rho < 0.0 {
        return Err(PistonError::Domain(format!("negative density {rho}")));
    }
    Ok(())
}

/// `c = √γ ρ^{(γ−1)/2}`.
pub fn sound_speed(rho: f64, gamma: Gamma) -> Result<f64> {
    check_density(rho)?;
    let g = gamma.value();
    Ok(g.sqrt() * rho.powf(0.5 * (g - 1.0)))
}

/// Inverse of [`sound_speed`]: `ρ = (c²/γ)^{1/(γ−1)}`.
pub fn density_from_sound_speed(c: f64, gamma: Gamma) -> Result<f64> {
    if c.is_nan() || c < 0.0 {
        return Err(PistonError::NonPhysical(format!("negative sound speed {c}")));
    }
    let g = gamma.value();
    let rho = (c * c / g).powf(1.0 / (g - 1.0));
    if c > 0.0 && !rho.is_normal() {
        return Err(PistonError::NonPhysical(format!(
            "density for sound speed {c:e} at γ = {g} is not representable ({rho:e})"
        )));
    }
    Ok(rho)
}

/// Characteristic speeds `(λ−, λ+) = (u − c, u + c)`.
pub fn eigenvalues(state: GasState, gamma: Gamma) -> Result<(f64, f64)> {
    let c = sound_speed(state.rho, gamma)?;
    Ok((state.u - c, state.u + c))
}

/// Riemann invariants `(R−, R+) = (u − 2c/(γ−1), u + 2c/(γ−1))`.
pub fn riemann_invariants(state: GasState, gamma: Gamma) -> Result<(f64, f64)> {
    let c = sound_speed(state.rho, gamma)?;
    let q = gamma.invariant_factor() * c;
    Ok((state.u - q, state.u + q))
}

/// Algebraic inverse of [`riemann_invariants`].
pub fn state_from_invariants(r_minus: f64, r_plus: f64, gamma: Gamma) -> Result<GasState> {
    if !(r_plus >= r_minus) {
        return Err(PistonError::NonPhysical(format!(
            "R+ = {r_plus} < R− = {r_minus} implies negative sound speed"
        )));
    }
    let u = 0.5 * (r_plus + r_minus);
    let c = 0.25 * (gamma.value() - 1.0) * (r_plus - r_minus);
    let rho = density_from_sound_speed(c, gamma)?;
    Ok(GasState { rho, u })
}

/// Sound speed recovered from an invariant pair without going through ρ.
#[inline]
pub fn sound_speed_from_invariants(r_minus: f64, r_plus: f64, gamma: Gamma) -> f64 {
    0.25 * (gamma.value() - 1.0) * (r_plus - r_minus)
}

/// The two scalings that map `ρ∞ ≪ 1` onto a physical regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RescaleMode {
    /// `(ρ/ρ∞, u, t, x)`: the vanishing pressure limit.
    VanishingPressure,
    /// `(ρ/ρ∞, u ρ∞^{(1−γ)/2}, t ρ∞^{(γ−1)/2}, x)`: a very fast piston.
    HighSpeed,
}

fn check_rho_inf(rho_inf: f64) -> Result<()> {
    if !(rho_inf > 0.0) || !rho_inf.is_finite() {
        return Err(PistonError::Domain(format!(
            "far-field density must be positive, got {rho_inf}"
        )));
    }
    Ok(())
}

/// Map a dimensional `(state, t, x)` into the scaled variables of `mode`.
pub fn rescale(
    state: GasState,
    rho_inf: f64,
    t: f64,
    x: f64,
    mode: RescaleMode,
    gamma: Gamma,
) -> Result<(GasState, f64, f64)> {
    check_rho_inf(rho_inf)?;
    let rho = state.rho / rho_inf;
    match mode {
        RescaleMode::VanishingPressure => Ok((GasState::new(rho, state.u), t, x)),
        RescaleMode::HighSpeed => {
            let e = 0.5 * (gamma.value() - 1.0);
            let s = rho_inf.powf(e);
            Ok((GasState::new(rho, state.u / s), t * s, x))
        }
    }
}

/// Inverse of [`rescale`].
pub fn unscale(
    scaled: GasState,
    rho_inf: f64,
    t: f64,
    x: f64,
    mode: RescaleMode,
    gamma: Gamma,
) -> Result<(GasState, f64, f64)> {
    check_rho_inf(rho_inf)?;
    let rho = scaled.rho * rho_inf;
    match mode {
        RescaleMode::VanishingPressure => Ok((GasState::new(rho, scaled.u), t, x)),
        RescaleMode::HighSpeed => {
            let s = rho_inf.powf(0.5 * (gamma.value() - 1.0));
            Ok((GasState::new(rho, scaled.u * s), t / s, x))
        }
    }
}
