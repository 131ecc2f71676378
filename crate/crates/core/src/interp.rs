//! Piecewise-cubic interpolation: monotone Hermite (Fritsch–Carlson slopes
//! with the weighted harmonic mean of Fritsch–Butland) and a local
//! four-point Lagrange cubic.

use serde::{Deserialize, Serialize};

use crate::error::{PistonError, Result};

fn check_knots(xs: &[f64], ys: &[f64], min: usize) -> Result<()> {
    let n = xs.len();
    if n < min || ys.len() != n {
        return Err(PistonError::Insufficient(format!(
            "interpolation needs ≥ {min} matching knots, got {} x and {} y",
            n,
            ys.len()
        )));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(PistonError::Domain(
            "interpolation knots must be strictly increasing".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        check_knots(&xs, &ys, 2)?;
        let ds = pchip_slopes(&xs, &ys);
        Ok(MonotoneCubic { xs, ys, ds })
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        let i = self.xs.partition_point(|&k| k <= x);
        i.saturating_sub(1).min(n - 2)
    }

    /// Value at `x`, clamped into the knot span.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(self.x_min(), self.x_max());
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        self.ys[i] * h00 + h * self.ds[i] * h10 + self.ys[i + 1] * h01 + h * self.ds[i + 1] * h11
    }

    /// Derivative at `x`; zero outside the knot span.
    pub fn derivative(&self, x: f64) -> f64 {
        if x < self.x_min() || x > self.x_max() {
            return 0.0;
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let s2 = s * s;
        let d00 = 6.0 * s2 - 6.0 * s;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = -6.0 * s2 + 6.0 * s;
        let d11 = 3.0 * s2 - 2.0 * s;
        (self.ys[i] * d00 + self.ys[i + 1] * d01) / h + self.ds[i] * d10 + self.ds[i + 1] * d11
    }

    /// Exact integral of the interpolant from the first knot to `x`, with
    /// constant extension beyond the last knot.
    pub fn integral(&self, x: f64) -> f64 {
        if x <= self.x_min() {
            return 0.0;
        }
        let n = self.xs.len();
        let mut total = 0.0;
        for i in 0..n - 1 {
            let (a, b) = (self.xs[i], self.xs[i + 1]);
            let h = b - a;
            if x >= b {
                total += h * 0.5 * (self.ys[i] + self.ys[i + 1]) + h * h * (self.ds[i] - self.ds[i + 1]) / 12.0;
            } else {
                let s = (x - a) / h;
                let s2 = s * s;
                let s3 = s2 * s;
                let s4 = s3 * s;
                let i00 = s4 / 2.0 - s3 + s;
                let i10 = s4 / 4.0 - 2.0 * s3 / 3.0 + s2 / 2.0;
                let i01 = -s4 / 2.0 + s3;
                let i11 = s4 / 4.0 - s3 / 3.0;
                total +=
                    h * (self.ys[i] * i00 + h * self.ds[i] * i10 + self.ys[i + 1] * i01 + h * self.ds[i + 1] * i11);
                return total;
            }
        }
        total + (x - self.x_max()) * self.ys[n - 1]
    }
}

/// Cubic through the four knots around `x` (shifted inward at the ends).
/// Fourth-order accurate for smooth data, with no slope limiting.
#[derive(Debug, Clone)]
pub struct LocalCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl LocalCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        check_knots(&xs, &ys, 4)?;
        Ok(LocalCubic { xs, ys })
    }

    /// Value at `x`, clamped into the knot span.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let x = x.clamp(self.xs[0], self.xs[n - 1]);
        let i = self.xs.partition_point(|&k| k <= x).saturating_sub(1).min(n - 2);
        let start = i.saturating_sub(1).min(n - 4);
        let px = &self.xs[start..start + 4];
        let py = &self.ys[start..start + 4];
        let mut total = 0.0;
        for a in 0..4 {
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    w *= (x - px[b]) / (px[a] - px[b]);
                }
            }
            total += w * py[a];
        }
        total
    }
}

/// Choice of interpolation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    MonotoneCubic,
    LocalCubic,
}

#[derive(Debug, Clone)]
pub enum Interpolant {
    Monotone(MonotoneCubic),
    Local(LocalCubic),
}

impl Interpolant {
    /// Falls back to the monotone cubic when too few knots exist for the
    /// local cubic.
    pub fn new(scheme: Scheme, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        match scheme {
            Scheme::LocalCubic if xs.len() >= 4 => Ok(Interpolant::Local(LocalCubic::new(xs, ys)?)),
            _ => Ok(Interpolant::Monotone(MonotoneCubic::new(xs, ys)?)),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Interpolant::Monotone(m) => m.eval(x),
            Interpolant::Local(l) => l.eval(x),
        }
    }
}

fn pchip_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a * b <= 0.0 {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() || m0 == 0.0 {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_knots_and_lines() {
        let xs: Vec<f64> = (0..6).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let m = MonotoneCubic::new(xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((m.eval(*x) - y).abs() < 1e-14);
        }
        assert!((m.eval(1.3) - 3.6).abs() < 1e-14);
        assert!((m.derivative(1.3) - 2.0).abs() < 1e-13);
        // ∫0^2.2 (2x+1) dx = 4.84 + 2.2
        assert!((m.integral(2.2) - 7.04).abs() < 1e-13);
    }

    #[test]
    fn monotone_data_stays_monotone() {
        let xs = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = vec![0.0, 0.1, 5.0, 5.1, 9.0];
        let m = MonotoneCubic::new(xs, ys).unwrap();
        let mut prev = m.eval(0.0);
        for i in 1..=400 {
            let v = m.eval(i as f64 * 0.01);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn integral_matches_quadrature() {
        let xs = vec![0.0, 0.7, 1.5, 3.0];
        let ys = vec![1.0, 1.4, 1.1, 1.3];
        let m = MonotoneCubic::new(xs, ys).unwrap();
        let n = 30000;
        let x_end = 2.4;
        let h = x_end / n as f64;
        // Simpson
        let mut acc = m.eval(0.0) + m.eval(x_end);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * m.eval(i as f64 * h);
        }
        acc *= h / 3.0;
        assert!((acc - m.integral(x_end)).abs() < 1e-10);
    }

    #[test]
    fn local_cubic_is_exact_on_cubics() {
        let xs: Vec<f64> = (0..7).map(|i| (i as f64).powf(1.2)).collect();
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x - 0.1 * x * x * x;
        let ys = xs.iter().map(|&x| f(x)).collect();
        let l = LocalCubic::new(xs, ys).unwrap();
        for i in 0..100 {
            let x = i as f64 * 0.085;
            assert!((l.eval(x) - f(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn local_cubic_error_is_fourth_order() {
        let err = |n: usize| {
            let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
            let ys = xs.iter().map(|&x: &f64| x.sin()).collect();
            let l = LocalCubic::new(xs, ys).unwrap();
            (0..997)
                .map(|i| (l.eval(i as f64 / 996.0) - (i as f64 / 996.0).sin()).abs())
                .fold(0.0, f64::max)
        };
        let order = (err(21) / err(41)).log2();
        assert!(order > 3.7, "{order}");
    }

    #[test]
    fn rejects_unsorted() {
        assert!(MonotoneCubic::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(MonotoneCubic::new(vec![0.0], vec![1.0]).is_err());
    }
}
