//! Adaptive Dormand–Prince 5(4) integration of complex ODE systems with
//! continuous (dense) output.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Steps smaller than this fraction of the span abort the integration.
pub const MIN_STEP_FRACTION: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step as a fraction of the integration span.
    pub max_step: f64,
    /// Number of uniformly spaced output samples callers take from the dense
    /// solution (including both end points).
    pub samples: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_step: 1e-3, samples: 1501 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::InvalidInput("integrator tolerances must be positive".into()));
        }
        if !(self.max_step > 0.0 && self.max_step <= 1.0) {
            return Err(Error::InvalidInput("max_step must lie in (0, 1]".into()));
        }
        if self.samples < 2 {
            return Err(Error::InvalidInput("at least two output samples are required".into()));
        }
        Ok(())
    }

    /// Same config with both tolerances scaled by `factor`.
    pub fn with_tolerance_scale(mut self, factor: f64) -> Self {
        self.rtol *= factor;
        self.atol *= factor;
        self
    }

    /// Uniform sample grid over `[t0, t1]`.
    pub fn sample_grid(&self, t0: f64, t1: f64) -> Vec<f64> {
        uniform_grid(t0, t1, self.samples)
    }
}

pub fn uniform_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![t0];
    }
    let span = t1 - t0;
    (0..n)
        .map(|k| if k == n - 1 { t1 } else { t0 + span * (k as f64) / ((n - 1) as f64) })
        .collect()
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Piecewise quartic interpolant covering the whole integration span.
#[derive(Clone, Debug)]
pub struct DenseSolution {
    dim: usize,
    t_start: f64,
    t_end: f64,
    seg_t: Vec<f64>,
    seg_h: Vec<f64>,
    /// Five coefficient vectors per segment, flattened.
    coeffs: Vec<C64>,
    y_end: Vec<C64>,
}

impl DenseSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn span(&self) -> (f64, f64) {
        (self.t_start, self.t_end)
    }

    pub fn steps(&self) -> usize {
        self.seg_t.len()
    }

    pub fn final_state(&self) -> &[C64] {
        &self.y_end
    }

    /// Evaluates the interpolant at `t` (clamped to the span).
    pub fn eval_into(&self, t: f64, out: &mut [C64]) {
        let n = self.dim;
        if self.seg_t.is_empty() {
            out.copy_from_slice(&self.y_end);
            return;
        }
        let t = t.clamp(self.t_start, self.t_end);
        let k = match self.seg_t.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(k) => k,
            Err(0) => 0,
            Err(k) => k - 1,
        };
        let theta = ((t - self.seg_t[k]) / self.seg_h[k]).clamp(0.0, 1.0);
        let theta1 = 1.0 - theta;
        let rc = &self.coeffs[5 * n * k..5 * n * (k + 1)];
        for i in 0..n {
            out[i] = rc[i]
                + (rc[n + i]
                    + (rc[2 * n + i] + (rc[3 * n + i] + rc[4 * n + i] * theta1) * theta) * theta1)
                    * theta;
        }
    }

    pub fn eval(&self, t: f64) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        self.eval_into(t, &mut out);
        out
    }

    pub fn sample(&self, times: &[f64]) -> Vec<Vec<C64>> {
        times.iter().map(|&t| self.eval(t)).collect()
    }
}

fn error_norm(y: &[C64], y_new: &[C64], err: &[C64], cfg: &IntegratorConfig) -> f64 {
    let n = y.len() as f64;
    let s: f64 = y
        .iter()
        .zip(y_new)
        .zip(err)
        .map(|((a, b), e)| {
            let sc = cfg.atol + cfg.rtol * a.norm().max(b.norm());
            (e.norm() / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

/// Integrates `dy/dt = f(t, y)` from `t_span.0` to `t_span.1` (forward only).
///
/// `f` writes the derivative into its third argument.
pub fn integrate_ode<F>(
    mut f: F,
    y0: &[C64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<DenseSolution>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    cfg.validate()?;
    let (t0, t1) = t_span;
    if !(t1 >= t0) {
        return Err(Error::InvalidInput(format!("t_span must be increasing, got {t0}..{t1}")));
    }
    let n = y0.len();
    let mut sol = DenseSolution {
        dim: n,
        t_start: t0,
        t_end: t1,
        seg_t: Vec::new(),
        seg_h: Vec::new(),
        coeffs: Vec::new(),
        y_end: y0.to_vec(),
    };
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(sol);
    }
    let h_max = cfg.max_step * span;
    let h_min = MIN_STEP_FRACTION * span;

    let zero = C64::new(0.0, 0.0);
    let mut y = y0.to_vec();
    let mut y_new = vec![zero; n];
    let mut tmp = vec![zero; n];
    let mut err = vec![zero; n];
    let mut k: [Vec<C64>; 7] = std::array::from_fn(|_| vec![zero; n]);

    let mut t = t0;
    f(t, &y, &mut k[0]);
    if k[0].iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::NonFinite { t });
    }
    let mut h = (1e-3 * span).min(h_max);
    let mut last_rejected = false;

    while t < t1 {
        if t + h > t1 || (t1 - (t + h)) < h_min {
            h = t1 - t;
        }
        if h < h_min {
            return Err(Error::StepSizeUnderflow { t, h });
        }

        macro_rules! stage {
            ($dst:expr, $c:expr, $( ($a:expr, $src:expr) ),+) => {{
                for i in 0..n {
                    tmp[i] = y[i] + h * ( $( $a * k[$src][i] + )+ zero );
                }
                f(t + $c * h, &tmp, &mut k[$dst]);
            }};
        }
        stage!(1, C2, (A21, 0));
        stage!(2, C3, (A31, 0), (A32, 1));
        stage!(3, C4, (A41, 0), (A42, 1), (A43, 2));
        stage!(4, C5, (A51, 0), (A52, 1), (A53, 2), (A54, 3));
        stage!(5, 1.0, (A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4));
        for i in 0..n {
            y_new[i] = y[i]
                + h * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
        }
        let t_new = t + h;
        f(t_new, &y_new, &mut k[6]);
        for i in 0..n {
            err[i] = h
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                    + E7 * k[6][i]);
        }
        let en = error_norm(&y, &y_new, &err, cfg);
        if !en.is_finite() {
            if y_new.iter().chain(k[6].iter()).any(|x| !x.re.is_finite() || !x.im.is_finite()) {
                h *= 0.2;
                last_rejected = true;
                continue;
            }
        }

        if en <= 1.0 {
            // dense output coefficients
            let base = sol.coeffs.len();
            sol.coeffs.resize(base + 5 * n, zero);
            let rc = &mut sol.coeffs[base..];
            for i in 0..n {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                rc[i] = y[i];
                rc[n + i] = ydiff;
                rc[2 * n + i] = bspl;
                rc[3 * n + i] = ydiff - h * k[6][i] - bspl;
                rc[4 * n + i] = h
                    * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i]
                        + D7 * k[6][i]);
            }
            sol.seg_t.push(t);
            sol.seg_h.push(h);

            t = if t_new >= t1 { t1 } else { t_new };
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);

            let mut fac = if en == 0.0 { 10.0 } else { 0.9 * en.powf(-0.2) };
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            last_rejected = false;
            h = (h * fac).min(h_max);
        } else {
            let fac = (0.9 * en.powf(-0.2)).clamp(0.1, 1.0);
            h *= fac;
            last_rejected = true;
        }
    }
    sol.y_end = y;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn zero_derivative_is_constant() {
        let y0 = [c(0.3, -0.2), c(1.0, 0.0)];
        let sol = integrate_ode(|_, _, d| d.fill(c(0.0, 0.0)), &y0, (0.0, 2.0), &Default::default())
            .unwrap();
        for t in [0.0, 0.7, 1.3, 2.0] {
            assert_eq!(sol.eval(t), y0.to_vec());
        }
    }

    #[test]
    fn exponential_decay() {
        let cfg = IntegratorConfig::default();
        let sol = integrate_ode(|_, y, d| d[0] = -y[0], &[c(1.0, 0.0)], (0.0, 1.0), &cfg).unwrap();
        assert!((sol.final_state()[0] - c((-1.0f64).exp(), 0.0)).norm() < 1e-9);
        // dense output between steps
        for t in [0.123, 0.5001, 0.87654] {
            assert!((sol.eval(t)[0].re - (-t as f64).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn rabi_rotation_closed_form() {
        // dy/dt = -i σx y: y(t) = (cos t, -i sin t)
        let cfg = IntegratorConfig::default();
        let rhs = |_: f64, y: &[C64], d: &mut [C64]| {
            d[0] = c(0.0, -1.0) * y[1];
            d[1] = c(0.0, -1.0) * y[0];
        };
        let t_end = std::f64::consts::FRAC_PI_2;
        let sol = integrate_ode(rhs, &[c(1.0, 0.0), c(0.0, 0.0)], (0.0, t_end), &cfg).unwrap();
        let y = sol.final_state();
        assert!((y[0] - c(0.0, 0.0)).norm() < 1e-8);
        assert!((y[1] - c(0.0, -1.0)).norm() < 1e-8);
    }

    #[test]
    fn norm_conserved_for_hermitian_generator() {
        // H = [[0.3, 0.5 - 0.2i], [0.5 + 0.2i, -0.7]] plus a time-dependent diagonal
        let cfg = IntegratorConfig::default();
        let rhs = |t: f64, y: &[C64], d: &mut [C64]| {
            let h00 = c(0.3 + t.sin(), 0.0);
            let h01 = c(0.5, -0.2);
            let h11 = c(-0.7, 0.0);
            let mi = c(0.0, -1.0);
            d[0] = mi * (h00 * y[0] + h01 * y[1]);
            d[1] = mi * (h01.conj() * y[0] + h11 * y[1]);
        };
        let sol = integrate_ode(rhs, &[c(0.6, 0.0), c(0.0, 0.8)], (0.0, 1.0), &cfg).unwrap();
        for k in 0..=50 {
            let y = sol.eval(k as f64 / 50.0);
            let n: f64 = y.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn halving_tolerance_stays_within_looser_tolerance() {
        let rhs = |t: f64, y: &[C64], d: &mut [C64]| {
            d[0] = c(0.0, -1.0) * (1.0 + 0.5 * t) * y[1];
            d[1] = c(0.0, -1.0) * (1.0 + 0.5 * t) * y[0] - 0.3 * y[1];
        };
        let loose = IntegratorConfig { rtol: 1e-8, atol: 1e-10, ..Default::default() };
        let tight = loose.with_tolerance_scale(0.5);
        let a = integrate_ode(rhs, &[c(1.0, 0.0), c(0.0, 0.0)], (0.0, 3.0), &loose).unwrap();
        let b = integrate_ode(rhs, &[c(1.0, 0.0), c(0.0, 0.0)], (0.0, 3.0), &tight).unwrap();
        for t in uniform_grid(0.0, 3.0, 31) {
            let (ya, yb) = (a.eval(t), b.eval(t));
            for i in 0..2 {
                assert!((ya[i] - yb[i]).norm() <= loose.rtol + loose.atol);
            }
        }
    }

    #[test]
    fn step_size_underflow_is_reported() {
        // finite-time blow-up: y' = y², y(0) = 1 explodes at t = 1
        let cfg = IntegratorConfig::default();
        let res = integrate_ode(|_, y, d| d[0] = y[0] * y[0], &[c(1.0, 0.0)], (0.0, 2.0), &cfg);
        assert!(matches!(res, Err(Error::StepSizeUnderflow { .. })), "{res:?}");
    }

    #[test]
    fn deterministic_given_config() {
        let cfg = IntegratorConfig::default();
        let run = || {
            integrate_ode(|t, y, d| d[0] = c(0.0, t) * y[0], &[c(1.0, 0.0)], (0.0, 1.0), &cfg)
                .unwrap()
                .final_state()
                .to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_bad_config() {
        let bad = IntegratorConfig { max_step: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = IntegratorConfig { rtol: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
