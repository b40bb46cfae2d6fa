//! Hermitian dilation of the non-Hermitian evolution.
//!
//! The metric is never integrated directly in production. Instead the
//! propagator `V(t)` of `dψ/dt = −iκH ψ` is integrated (det V = 1 since H is
//! traceless) and `M_nh = X†X` with `X = √M₀ · V⁻¹`. Its spectrum comes from
//! [`gram_eig2`], so the small eigenvalue keeps full relative precision even
//! when M spans twelve decades. Λ and Γ are then built in the eigenbasis of M
//! where η and M⁻¹ are diagonal, and rotated back.

use std::cell::RefCell;
use std::io::Write;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PathSpec;
use crate::numerics::{
    gram_eig2, herm_eig, integrate_ode, inv2, pauli, psd_sqrt, sylvester_solve, CMat2, CMat4, CVec2, CVec4,
    DenseSolution, HermEigen, IntegratorConfig,
};

/// Scalar initial metric, `M(0) = M0_SCALE · I`.
pub const M0_SCALE: f64 = 1.5;
/// Relative asymmetry of Λ or Γ above which a sample is rejected.
pub const HERMITICITY_FAIL: f64 = 1e-6;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaugeConfig {
    /// Required floor on λmin(M − I).
    pub eps_floor: f64,
    /// Extra multiplicative margin on the required gauge factor.
    pub headroom: f64,
    /// Half-width of the max filter and moving average (μs).
    pub window_us: f64,
    /// Grid on which λmin(M_nh) is resolved.
    pub samples: usize,
}

impl Default for GaugeConfig {
    fn default() -> Self {
        Self { eps_floor: 1e-3, headroom: 0.01, window_us: 0.1, samples: 3001 }
    }
}

impl GaugeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_floor > 0.0 && self.headroom >= 0.0 && self.window_us >= 0.0) {
            return Err(Error::InvalidInput("gauge floor, headroom and window must be non-negative".into()));
        }
        if self.samples < 1000 {
            return Err(Error::InvalidInput(format!("gauge grid needs ≥ 1000 samples, got {}", self.samples)));
        }
        Ok(())
    }
}

/// Propagator-based gauge-free metric `M_nh(t)`.
#[derive(Clone, Debug)]
pub struct MetricTrajectory {
    m0: CMat2,
    root_m0: CMat2,
    v: DenseSolution,
}

impl MetricTrajectory {
    pub fn span(&self) -> (f64, f64) {
        self.v.span()
    }

    pub fn propagator(&self, t: f64) -> CMat2 {
        let mut y = [C64::new(0.0, 0.0); 4];
        self.v.eval_into(t, &mut y);
        CMat2::from_flat(&y)
    }

    /// `X = √M₀ · V⁻¹`, so that `M_nh = X†X`.
    pub fn factor(&self, t: f64) -> CMat2 {
        let v = self.propagator(t);
        let adj = CMat2::from_rows([[v[(1, 1)], -v[(0, 1)]], [-v[(1, 0)], v[(0, 0)]]]);
        self.root_m0 * adj.scale(C64::new(1.0, 0.0) / v.det())
    }

    pub fn metric(&self, t: f64) -> CMat2 {
        if t <= self.span().0 {
            return self.m0;
        }
        let x = self.factor(t);
        x.adjoint() * x
    }

    pub fn spectrum(&self, t: f64) -> HermEigen<2> {
        if t <= self.span().0 {
            // the initial condition itself, free of the rounding in √M₀
            if let Ok(e) = herm_eig(&self.m0) {
                return e;
            }
        }
        gram_eig2(&self.factor(t))
    }

    pub fn lambda_min(&self, t: f64) -> f64 {
        self.spectrum(t).min()
    }
}

/// Solves `dM/dt = i(M·κH − κH†·M)` with `M(0) = m0` through the propagator.
pub fn evolve_m_gauge_free(path: &PathSpec, m0: &CMat2, cfg: &IntegratorConfig) -> Result<MetricTrajectory> {
    let root_m0 = psd_sqrt(m0)?;
    let y0 = CMat2::identity().to_flat();
    let minus_i = C64::new(0.0, -1.0);
    let v = integrate_ode(
        |t, y, dy| {
            let d = path.scaled_hamiltonian(t).scale(minus_i) * CMat2::from_flat(y);
            dy.copy_from_slice(&d.to_flat());
        },
        &y0,
        (0.0, path.period_t),
        cfg,
    )?;
    Ok(MetricTrajectory { m0: *m0, root_m0, v })
}

/// Direct integration of `dM/dt = −2b·M + i(M·κH − κH†·M)`; kept as an oracle
/// for the propagator route and the gauge relation.
pub fn evolve_m_direct<B>(path: &PathSpec, m0: &CMat2, b: B, cfg: &IntegratorConfig) -> Result<DenseSolution>
where
    B: Fn(f64) -> f64,
{
    integrate_ode(
        |t, y, dy| {
            let m = CMat2::from_flat(y);
            let k = path.scaled_hamiltonian(t);
            let d = m.scale_re(-2.0 * b(t)) + (m * k - k.adjoint() * m).scale(I);
            dy.copy_from_slice(&d.to_flat());
        },
        &m0.to_flat(),
        (0.0, path.period_t),
        cfg,
    )
}

/// Scalar gauge `G(t) = e^{−2∫₀ᵗ b}` on a uniform grid, interpolated in
/// `ln G` by a C¹ cubic Hermite spline (Catmull–Rom tangents).
#[derive(Clone, Debug)]
pub struct GaugeSchedule {
    pub times: Vec<f64>,
    pub lambda_min: Vec<f64>,
    pub ln_g: Vec<f64>,
    slope: Vec<f64>,
    dt: f64,
}

impl GaugeSchedule {
    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.times.len();
        let x = ((t - self.times[0]) / self.dt).clamp(0.0, (n - 1) as f64);
        let k = (x.floor() as usize).min(n - 2);
        (k, x - k as f64)
    }

    pub fn ln_g_at(&self, t: f64) -> f64 {
        let (k, s) = self.locate(t);
        let (y0, y1) = (self.ln_g[k], self.ln_g[k + 1]);
        let (m0, m1) = (self.slope[k] * self.dt, self.slope[k + 1] * self.dt);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1
    }

    pub fn g_at(&self, t: f64) -> f64 {
        self.ln_g_at(t).exp()
    }

    /// `b(t) = −½ d(ln G)/dt`.
    pub fn b_at(&self, t: f64) -> f64 {
        let (k, s) = self.locate(t);
        let (y0, y1) = (self.ln_g[k], self.ln_g[k + 1]);
        let (m0, m1) = (self.slope[k] * self.dt, self.slope[k + 1] * self.dt);
        let s2 = s * s;
        let d = (6.0 * s2 - 6.0 * s) * y0 + (3.0 * s2 - 4.0 * s + 1.0) * m0 + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * m1;
        -0.5 * d / self.dt
    }

    /// `∫₀ᵗ b = −½ ln G(t)`.
    pub fn integral_b(&self, t: f64) -> f64 {
        -0.5 * self.ln_g_at(t)
    }
}

/// Builds the gauge from λmin(M_nh) sampled on a uniform grid.
///
/// The required `ln G` is max-filtered and then averaged over the same
/// half-window, which keeps it above the requirement at every grid point.
/// Both windows shrink near t = 0 so that G(0) = 1.
pub fn schedule_b_from_samples(times: &[f64], lambda_min: &[f64], cfg: &GaugeConfig) -> Result<GaugeSchedule> {
    let n = times.len();
    if n < 2 || lambda_min.len() != n {
        return Err(Error::InvalidInput("gauge samples must be a grid of ≥ 2 points".into()));
    }
    if !(lambda_min[0] > 0.0) {
        return Err(Error::InfeasibleGauge { t: times[0], lambda_min: lambda_min[0] });
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    let target = (1.0 + cfg.headroom) * (1.0 + cfg.eps_floor);
    let mut need = Vec::with_capacity(n);
    for (k, &l) in lambda_min.iter().enumerate() {
        if !(l > 0.0) {
            return Err(Error::InfeasibleGauge { t: times[k], lambda_min: l });
        }
        need.push((target / l).ln().max(0.0));
    }
    if need[0] > 0.0 {
        return Err(Error::InfeasibleGauge { t: times[0], lambda_min: lambda_min[0] });
    }
    let w = if dt > 0.0 { (cfg.window_us / dt).round() as usize } else { 0 };
    let maxed: Vec<f64> = (0..n)
        .map(|j| {
            let h = w.min(j);
            need[j - h..=(j + h).min(n - 1)].iter().copied().fold(0.0, f64::max)
        })
        .collect();
    let ln_g: Vec<f64> = (0..n)
        .map(|k| {
            let h = w.min(k / 2);
            let win = &maxed[k - h..=(k + h).min(n - 1)];
            win.iter().sum::<f64>() / win.len() as f64
        })
        .collect();
    let slope: Vec<f64> = (0..n)
        .map(|k| match k {
            0 => (ln_g[1] - ln_g[0]) / dt,
            k if k == n - 1 => (ln_g[k] - ln_g[k - 1]) / dt,
            k => (ln_g[k + 1] - ln_g[k - 1]) / (2.0 * dt),
        })
        .collect();
    Ok(GaugeSchedule { times: times.to_vec(), lambda_min: lambda_min.to_vec(), ln_g, slope, dt })
}

pub fn schedule_b(metric: &MetricTrajectory, cfg: &GaugeConfig) -> Result<GaugeSchedule> {
    cfg.validate()?;
    let (t0, t1) = metric.span();
    let times = crate::numerics::uniform_grid(t0, t1, cfg.samples);
    let lmin: Vec<f64> = times.iter().map(|&t| metric.lambda_min(t)).collect();
    schedule_b_from_samples(&times, &lmin, cfg)
}

/// `η = √(M − I)` and `η̇` from `η·η̇ + η̇·η = Ṁ`.
pub fn eta_and_derivative(m: &CMat2, m_dot: &CMat2) -> Result<(CMat2, CMat2)> {
    let eta = psd_sqrt(&(*m - CMat2::identity()))?;
    let eta_dot = sylvester_solve(&eta, m_dot)?;
    Ok((eta, eta_dot))
}

fn check_hermitian(which: &'static str, m: &CMat2) -> Result<()> {
    let defect = m.hermiticity_defect();
    if defect > HERMITICITY_FAIL * m.max_abs().max(1.0) {
        return Err(Error::HermiticityViolation { which, defect });
    }
    Ok(())
}

/// `Λ = {K + ib + [iη̇ + ηK + ibη]η}M⁻¹`, `Γ = i[Kη − ηK − iη̇]M⁻¹` with `K`
/// the scaled system Hamiltonian. Returned as computed; only checked.
pub fn lambda_gamma(
    hs_scaled: &CMat2,
    b: f64,
    eta: &CMat2,
    eta_dot: &CMat2,
    m_inv: &CMat2,
) -> Result<(CMat2, CMat2)> {
    let k = *hs_scaled;
    let ib = CMat2::scalar(I * b);
    let inner = eta_dot.scale(I) + *eta * k + eta.scale(I * b);
    let lambda = (k + ib + inner * *eta) * *m_inv;
    let gamma = (k * *eta - *eta * k - eta_dot.scale(I)).scale(I) * *m_inv;
    check_hermitian("Lambda", &lambda)?;
    check_hermitian("Gamma", &gamma)?;
    Ok((lambda, gamma))
}

/// `Aᵢ = Tr[Λσᵢ]/2`, `Bᵢ = Tr[Γσᵢ]/2`.
pub fn pauli_decompose(lambda: &CMat2, gamma: &CMat2) -> ([f64; 4], [f64; 4]) {
    let coeff = |m: &CMat2| std::array::from_fn(|i| 0.5 * (*m * pauli(i)).trace().re);
    (coeff(lambda), coeff(gamma))
}

/// `H_sa = Λ ⊗ I + Γ ⊗ σz`, system qubit on the left.
pub fn assemble_hsa(lambda: &CMat2, gamma: &CMat2) -> CMat4 {
    lambda.kron(&CMat2::identity()) + gamma.kron(&pauli(3))
}

/// Ancilla `|−⟩ = (|0⟩ − i|1⟩)/√2`.
pub fn ancilla_minus() -> CVec2 {
    CVec2::new([C64::new(1.0, 0.0), C64::new(0.0, -1.0)]).scale_re(std::f64::consts::FRAC_1_SQRT_2)
}

/// Ancilla `|+⟩ = (−i|0⟩ + |1⟩)/√2`.
pub fn ancilla_plus() -> CVec2 {
    CVec2::new([C64::new(0.0, -1.0), C64::new(1.0, 0.0)]).scale_re(std::f64::consts::FRAC_1_SQRT_2)
}

/// `(ψ ⊗ |−⟩ + η₀ψ ⊗ |+⟩)` normalized.
pub fn dilate_initial_state(psi0: &CVec2, eta0: f64) -> CVec4 {
    (psi0.kron(&ancilla_minus()) + psi0.scale_re(eta0).kron(&ancilla_plus())).normalized()
}

/// `⟨ancilla a|Ψ⟩` as a system vector.
pub fn ancilla_project(psi: &CVec4, a: &CVec2) -> CVec2 {
    let mut out = CVec2::zeros();
    for s in 0..2 {
        out[s] = a[0].conj() * psi[2 * s] + a[1].conj() * psi[2 * s + 1];
    }
    out
}

/// Squared norm of the ancilla-|−⟩ projection.
pub fn p_minus(psi: &CVec4) -> f64 {
    ancilla_project(psi, &ancilla_minus()).norm_sqr()
}

/// Returns `(ψ from χ, ψ from |−⟩)`, both normalized.
pub fn recover_psi(psi: &CVec4, eta: &CMat2) -> Result<(CVec2, CVec2)> {
    let chi = ancilla_project(psi, &CVec2::basis(0));
    let w = inv2(&(CMat2::identity() - eta.scale(I)))?;
    let minus = ancilla_project(psi, &ancilla_minus());
    Ok(((w * chi).normalized(), minus.normalized()))
}

#[derive(Clone, Copy, Debug)]
pub struct DilationSample {
    pub t: f64,
    pub b: f64,
    pub ln_g: f64,
    pub m: CMat2,
    pub m_dot: CMat2,
    pub eta: CMat2,
    pub eta_dot: CMat2,
    pub lambda: CMat2,
    pub gamma: CMat2,
    pub a: [f64; 4],
    pub bc: [f64; 4],
    pub lmin_m_minus_i: f64,
}

impl DilationSample {
    pub fn hsa(&self) -> CMat4 {
        assemble_hsa(&self.lambda, &self.gamma)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DilationConfig {
    pub gauge: GaugeConfig,
}

/// The complete dilation of one loop: metric, gauge and the continuous
/// dilated Hamiltonian.
#[derive(Clone, Debug)]
pub struct Dilation {
    pub path: PathSpec,
    pub metric: MetricTrajectory,
    pub gauge: GaugeSchedule,
}

impl Dilation {
    pub fn build(path: &PathSpec, cfg: &DilationConfig, integ: &IntegratorConfig) -> Result<Self> {
        let metric = evolve_m_gauge_free(path, &CMat2::scalar(C64::new(M0_SCALE, 0.0)), integ)?;
        let gauge = schedule_b(&metric, &cfg.gauge)?;
        Ok(Self { path: *path, metric, gauge })
    }

    pub fn eta0(&self) -> f64 {
        (M0_SCALE - 1.0).sqrt()
    }

    /// Every dilation quantity at time `t`, evaluated in the eigenbasis of M.
    pub fn sample(&self, t: f64) -> Result<DilationSample> {
        let spec = self.metric.spectrum(t);
        let u = spec.vectors;
        let ud = u.adjoint();
        let ln_g = self.gauge.ln_g_at(t);
        let g = ln_g.exp();
        let b = self.gauge.b_at(t);
        let m = spec.values.map(|l| g * l);
        let kt = ud * self.path.scaled_hamiltonian(t) * u;
        let mt = CMat2::diag_real(m);
        let mdot_t = mt.scale_re(-2.0 * b) + (mt * kt - kt.adjoint() * mt).scale(I);
        let (eta_t, etadot_t) = eta_and_derivative(&mt, &mdot_t)?;
        let minv_t = CMat2::diag_real(m.map(|x| 1.0 / x));
        let (lam_t, gam_t) = lambda_gamma(&kt, b, &eta_t, &etadot_t, &minv_t)?;
        let rot = |x: CMat2| u * x * ud;
        let (lambda, gamma) = (rot(lam_t), rot(gam_t));
        let (a, bc) = pauli_decompose(&lambda, &gamma);
        Ok(DilationSample {
            t,
            b,
            ln_g,
            m: rot(mt),
            m_dot: rot(mdot_t),
            eta: rot(eta_t),
            eta_dot: rot(etadot_t),
            lambda,
            gamma,
            a,
            bc,
            lmin_m_minus_i: m[0].min(m[1]) - 1.0,
        })
    }

    pub fn hsa(&self, t: f64) -> Result<CMat4> {
        Ok(self.sample(t)?.hsa())
    }

    pub fn trace(&self, times: &[f64]) -> Result<DilationTrace> {
        let samples = times.iter().map(|&t| self.sample(t)).collect::<Result<Vec<_>>>()?;
        Ok(DilationTrace { samples })
    }

    /// Evolves the dilated state from `psi0` under `H_sa(t) + extra`.
    pub fn evolve(&self, psi0: &CVec2, extra: Option<CMat4>, cfg: &IntegratorConfig) -> Result<DilatedTrajectory> {
        let first_err: RefCell<Option<Error>> = RefCell::new(None);
        let psi_init = dilate_initial_state(psi0, self.eta0());
        let hsa = |t: f64| match self.hsa(t) {
            Ok(h) => match extra {
                Some(x) => h + x,
                None => h,
            },
            Err(e) => {
                first_err.borrow_mut().get_or_insert(e);
                CMat4::zeros()
            }
        };
        let traj = evolve_dilated(hsa, &psi_init, (0.0, self.path.period_t), cfg);
        if let Some(e) = first_err.into_inner() {
            return Err(e);
        }
        traj
    }
}

#[derive(Clone, Debug)]
pub struct DilationTrace {
    pub samples: Vec<DilationSample>,
}

pub const TRACE_CSV_HEADER: &str = "t,b,A0,A1,A2,A3,B0,B1,B2,B3,lmin_M_minus_I";

impl DilationTrace {
    pub fn min_lmin_m_minus_i(&self) -> f64 {
        self.samples.iter().map(|s| s.lmin_m_minus_i).fold(f64::INFINITY, f64::min)
    }

    /// Largest relative asymmetry of Λ and Γ over the trace.
    pub fn max_asymmetry(&self) -> f64 {
        let rel = |m: &CMat2| m.hermiticity_defect() / m.max_abs().max(1.0);
        self.samples.iter().map(|s| rel(&s.lambda).max(rel(&s.gamma))).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRACE_CSV_HEADER}")?;
        for s in &self.samples {
            write!(w, "{},{}", s.t, s.b)?;
            for x in s.a.iter().chain(s.bc.iter()) {
                write!(w, ",{x}")?;
            }
            writeln!(w, ",{}", s.lmin_m_minus_i)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DilatedTrajectory {
    pub times: Vec<f64>,
    pub psi: Vec<CVec4>,
    pub p_minus: Vec<f64>,
    dense: DenseSolution,
}

impl DilatedTrajectory {
    pub fn at(&self, t: f64) -> CVec4 {
        CVec4::from_slice(&self.dense.eval(t))
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.psi.iter().map(|p| (p.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn min_p_minus(&self) -> f64 {
        self.p_minus.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Unitary integration of `i dΨ/dt = H_sa(t) Ψ`.
pub fn evolve_dilated<H>(hsa: H, psi0: &CVec4, span: (f64, f64), cfg: &IntegratorConfig) -> Result<DilatedTrajectory>
where
    H: Fn(f64) -> CMat4,
{
    let minus_i = C64::new(0.0, -1.0);
    let dense = integrate_ode(
        |t, y, dy| {
            let d = hsa(t).scale(minus_i) * CVec4::from_slice(y);
            dy.copy_from_slice(d.as_slice());
        },
        psi0.as_slice(),
        span,
        cfg,
    )?;
    let times = cfg.sample_grid(span.0, span.1);
    let psi: Vec<CVec4> = times.iter().map(|&t| CVec4::from_slice(&dense.eval(t))).collect();
    let p_minus = psi.iter().map(p_minus).collect();
    Ok(DilatedTrajectory { times, psi, p_minus, dense })
}
