//! Readout chain: PL-rate tomography of the dilated state, inversion to
//! ρ_χ, transform to ρ_ψ, projection onto physical states, fidelity and
//! quasi-static dephasing.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dilation::Dilation;
use crate::error::{Error, Result};
use crate::numerics::{herm_eig, inv2, pauli, psd_sqrt, CMat, CMat2, CMat4, CVec4};

pub const MIN_PL_GAP: f64 = 1e-6;
pub const MAX_CONDITION: f64 = 1e12;
pub const ZERO_TRACE: f64 = 1e-14;
pub const PHYSICAL_TOL: f64 = 1e-10;

/// Level-resolved photoluminescence rates (counts/shot).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlModel {
    pub l01: f64,
    pub l00: f64,
    pub lm11: f64,
    pub lm10: f64,
    pub shot_noise_sigma: f64,
}

impl Default for PlModel {
    fn default() -> Self {
        Self { l01: 1.00, l00: 0.95, lm11: 0.70, lm10: 0.72, shot_noise_sigma: 0.0 }
    }
}

impl PlModel {
    pub fn validate(&self) -> Result<()> {
        let gaps = [
            ("L01 - Lm11", self.l01 - self.lm11),
            ("L01 - L00", self.l01 - self.l00),
            ("L00 - Lm10", self.l00 - self.lm10),
        ];
        for (name, gap) in gaps {
            if !(gap.abs() >= MIN_PL_GAP) {
                return Err(Error::DegeneratePl { detail: format!("{name} = {gap:e}") });
            }
        }
        Ok(())
    }

    fn rates(&self) -> [f64; 4] {
        [self.l01, self.l00, self.lm11, self.lm10]
    }

    /// Largest level contrast.
    pub fn contrast(&self) -> f64 {
        let r = self.rates();
        r.iter().copied().fold(f64::MIN, f64::max) - r.iter().copied().fold(f64::MAX, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutVector(pub [f64; 8]);

/// `|v⟩⟨v|`.
pub fn pure<const N: usize>(v: &crate::numerics::CVec<N>) -> CMat<N> {
    let u = v.normalized();
    u.outer(&u)
}

/// Trace one, Hermitian and PSD within [`PHYSICAL_TOL`].
pub fn is_physical<const N: usize>(rho: &CMat<N>) -> bool {
    if (rho.trace() - C64::new(1.0, 0.0)).norm() > PHYSICAL_TOL || rho.hermiticity_defect() > PHYSICAL_TOL {
        return false;
    }
    herm_eig(rho).map(|e| e.min() >= -PHYSICAL_TOL).unwrap_or(false)
}

pub fn purity<const N: usize>(rho: &CMat<N>) -> f64 {
    (*rho * *rho).trace().re
}

/// Diagonal populations after each of the eight tomography sequences, in
/// level order (|0,1⟩, |0,0⟩, |−1,1⟩, |−1,0⟩).
fn populations(rho: &CMat4) -> [[f64; 4]; 8] {
    let p = [rho[(0, 0)].re, rho[(1, 1)].re, rho[(2, 2)].re, rho[(3, 3)].re];
    let s = 0.5 * (p[0] + p[2]);
    let x = rho[(0, 2)].re;
    let y = rho[(0, 2)].im;
    [
        p,
        [p[2], p[1], p[0], p[3]],
        [p[0], p[3], p[2], p[1]],
        [p[1], p[0], p[2], p[3]],
        [s - x, p[1], s + x, p[3]],
        [s + x, p[1], s - x, p[3]],
        [s - y, p[1], s + y, p[3]],
        [s + y, p[1], s - y, p[3]],
    ]
}

/// PL rates of the eight sequences, optionally with Gaussian shot noise.
pub fn simulate_readout<R: Rng + ?Sized>(rho4: &CMat4, pl: &PlModel, rng: Option<&mut R>) -> ReadoutVector {
    let l = pl.rates();
    let mut e = populations(rho4).map(|pop| pop.iter().zip(l).map(|(p, l)| p * l).sum::<f64>());
    if let Some(rng) = rng {
        if pl.shot_noise_sigma > 0.0 {
            let noise = Normal::new(0.0, pl.shot_noise_sigma).expect("finite sigma");
            for x in &mut e {
                *x += noise.sample(rng);
            }
        }
    }
    ReadoutVector(e)
}

/// Closed-form inversion to the unnormalized `ρ_χ = [[ρ₁₁, ρ₁₃], [ρ₃₁, ρ₃₃]]`.
pub fn invert_readout(e: &ReadoutVector, pl: &PlModel) -> Result<CMat2> {
    pl.validate()?;
    let e = e.0;
    let d1 = pl.l01 - pl.lm11;
    let d2 = pl.l01 - pl.l00;
    let d3 = pl.l00 - pl.lm10;
    let r11 = 0.25 + (e[0] - e[3]) / (2.0 * d2) + (e[0] - e[1]) / (4.0 * d1) + (e[0] - e[2]) / (4.0 * d3);
    let r33 = 0.25 + (e[0] - e[3]) / (2.0 * d2) - 3.0 * (e[0] - e[1]) / (4.0 * d1) + (e[0] - e[2]) / (4.0 * d3);
    let r13 = C64::new(e[5] - e[4], e[7] - e[6]) / (2.0 * d1);
    Ok(CMat2::from_rows([[C64::new(r11, 0.0), r13], [r13.conj(), C64::new(r33, 0.0)]]))
}

/// Rows of the linear readout model over (ρ₁₁, ρ₂₂, ρ₃₃, ρ₄₄, Re ρ₁₃, Im ρ₁₃).
pub fn design_matrix(pl: &PlModel) -> DMatrix<f64> {
    let [a, b, c, d] = pl.rates();
    let h = 0.5 * (a + c);
    let k = c - a;
    DMatrix::from_row_slice(
        8,
        6,
        &[
            a, b, c, d, 0.0, 0.0, //
            c, b, a, d, 0.0, 0.0, //
            a, d, c, b, 0.0, 0.0, //
            b, a, c, d, 0.0, 0.0, //
            h, b, h, d, k, 0.0, //
            h, b, h, d, -k, 0.0, //
            h, b, h, d, 0.0, k, //
            h, b, h, d, 0.0, -k, //
        ],
    )
}

fn condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Least-squares solve of the readout model with `Σρᵢᵢ = 1` imposed by
/// eliminating ρ₄₄.
pub fn lsq_invert(e: &ReadoutVector, pl: &PlModel) -> Result<CMat2> {
    let full = design_matrix(pl);
    let cond = condition(&full);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::RankDeficient { condition: cond });
    }
    let mut reduced = DMatrix::zeros(8, 5);
    let mut rhs = DVector::zeros(8);
    for r in 0..8 {
        for (col, src) in [0, 1, 2, 4, 5].into_iter().enumerate() {
            reduced[(r, col)] = full[(r, src)] - if src < 3 { full[(r, 3)] } else { 0.0 };
        }
        rhs[r] = e.0[r] - full[(r, 3)];
    }
    let cond = condition(&reduced);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::RankDeficient { condition: cond });
    }
    let x = reduced
        .svd(true, true)
        .solve(&rhs, 0.0)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let r13 = C64::new(x[3], x[4]);
    Ok(CMat2::from_rows([[C64::new(x[0], 0.0), r13], [r13.conj(), C64::new(x[2], 0.0)]]))
}

/// `ρ_ψ = c (I − iη)⁻¹ ρ_χ (I − iη)⁻†` with unit trace.
pub fn chi_to_psi(rho_chi: &CMat2, eta: &CMat2) -> Result<CMat2> {
    let w = inv2(&(CMat2::identity() - eta.scale(C64::new(0.0, 1.0))))?;
    let rho = w * *rho_chi * w.adjoint();
    let tr = rho.trace().re;
    if !(tr >= ZERO_TRACE) {
        return Err(Error::ZeroState { trace: tr });
    }
    Ok(rho.scale_re(1.0 / tr))
}

/// Euclidean projection of a real vector onto the probability simplex.
fn simplex_projection<const N: usize>(v: [f64; N]) -> [f64; N] {
    let mut u = v;
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut shift = 0.0;
    for (k, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            shift = t;
        }
    }
    v.map(|x| (x - shift).max(0.0))
}

/// Nearest unit-trace PSD matrix after renormalizing the trace.
pub fn mle_project<const N: usize>(rho: &CMat<N>) -> CMat<N> {
    let mut h = rho.hermitian_part();
    let tr = h.trace().re;
    if tr > ZERO_TRACE {
        h = h.scale_re(1.0 / tr);
    }
    let eig = herm_eig(&h).expect("hermitian part");
    let p = simplex_projection(eig.values);
    let d = CMat::<N>::diag_real(p);
    (eig.vectors * d * eig.vectors.adjoint()).hermitian_part()
}

/// Uhlmann fidelity `Tr√(√a·b·√a)`.
pub fn fidelity<const N: usize>(a: &CMat<N>, b: &CMat<N>) -> f64 {
    let sa = match psd_sqrt(&a.hermitian_part()) {
        Ok(s) => s,
        Err(_) => return 0.0,
    };
    let inner = (sa * b.hermitian_part() * sa).hermitian_part();
    match herm_eig(&inner) {
        Ok(e) => e.values.iter().map(|x| x.max(0.0).sqrt()).sum::<f64>().clamp(0.0, 1.0),
        Err(_) => 0.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub enabled: bool,
    /// Ramsey dephasing time (μs).
    pub t2_star: f64,
    pub replicas: usize,
    pub seed: u64,
    /// Detuning spread (rad·μs⁻¹); `√2/T2*` when absent.
    pub sigma: Option<f64>,
    /// Fixed RK4 steps per loop shared by all replicas.
    pub steps: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { enabled: false, t2_star: 36.0, replicas: 200, seed: 2024, sigma: None, steps: 12_000 }
    }
}

impl NoiseConfig {
    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(2f64.sqrt() / self.t2_star)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::Config("noise.replicas must be at least 1".into()));
        }
        if !(self.t2_star > 0.0) || !(self.sigma() >= 0.0) {
            return Err(Error::Config("noise.t2_star and noise.sigma must be positive".into()));
        }
        if self.steps < 600 || self.steps % 6 != 0 {
            return Err(Error::Config(format!("noise.steps must be a multiple of 6 and ≥ 600, got {}", self.steps)));
        }
        Ok(())
    }
}

/// Generator for one replica, independent of evaluation order.
pub fn replica_rng(seed: u64, case: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((case << 32) | replica);
    rng
}

/// `H_sa` tabulated at the half-step nodes of a uniform RK4 grid.
#[derive(Clone, Debug)]
pub struct HsaTable {
    pub t0: f64,
    pub h: f64,
    pub nodes: Vec<CMat4>,
}

impl HsaTable {
    pub fn build(dil: &Dilation, steps: usize) -> Result<Self> {
        let t0 = 0.0;
        let h = dil.path.period_t / steps as f64;
        let nodes = (0..=2 * steps)
            .into_par_iter()
            .map(|k| dil.hsa(t0 + 0.5 * h * k as f64))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { t0, h, nodes })
    }

    pub fn steps(&self) -> usize {
        (self.nodes.len() - 1) / 2
    }

    /// Step index of `t`, which must sit on the grid.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = (t - self.t0) / self.h;
        let k = x.round();
        if !((x - k).abs() < 1e-6) || k < 0.0 || k as usize > self.steps() {
            return Err(Error::InvalidInput(format!("t = {t} is not on the RK4 grid")));
        }
        Ok(k as usize)
    }

    /// Classical RK4 under `H_sa + extra`; returns the state at each step in
    /// `record` (ascending).
    pub fn propagate(&self, psi0: &CVec4, extra: &CMat4, record: &[usize]) -> Vec<CVec4> {
        let mi = C64::new(0.0, -1.0);
        let f = |k: usize, v: &CVec4| ((self.nodes[k] + *extra) * *v).scale(mi);
        let mut out = Vec::with_capacity(record.len());
        let mut next = record.iter().peekable();
        let mut psi = *psi0;
        let h = self.h;
        for n in 0..=self.steps() {
            while next.peek() == Some(&&n) {
                out.push(psi);
                next.next();
            }
            if n == self.steps() {
                break;
            }
            let k1 = f(2 * n, &psi);
            let k2 = f(2 * n + 1, &(psi + k1.scale_re(0.5 * h)));
            let k3 = f(2 * n + 1, &(psi + k2.scale_re(0.5 * h)));
            let k4 = f(2 * n + 2, &(psi + k3.scale_re(h)));
            psi = psi + (k1 + k2.scale_re(2.0) + k3.scale_re(2.0) + k4).scale_re(h / 6.0);
        }
        out
    }
}

/// Quasi-static dephasing: each replica draws one detuning `δ ~ N(0, σ)`,
/// evolves under `H_sa + δσz⊗I/2`, and the density matrices at `times`
/// (grid points of `table`) are averaged.
pub fn dephasing_replicas(
    table: &HsaTable,
    psi0: &CVec4,
    times: &[f64],
    noise: &NoiseConfig,
    case: u64,
) -> Result<Vec<CMat4>> {
    noise.validate()?;
    let record = times.iter().map(|&t| table.index_of(t)).collect::<Result<Vec<_>>>()?;
    if record.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("sample times must be ascending".into()));
    }
    let dist = Normal::new(0.0, noise.sigma()).map_err(|e| Error::Config(e.to_string()))?;
    let z = pauli(3).kron(&CMat2::identity());
    let n = noise.replicas as f64;
    let per_replica: Vec<Vec<CMat4>> = (0..noise.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let delta = dist.sample(&mut replica_rng(noise.seed, case, r));
            table.propagate(psi0, &z.scale_re(0.5 * delta), &record).iter().map(pure).collect()
        })
        .collect();
    // fixed summation order keeps results independent of the thread count
    let mut sum = vec![CMat4::zeros(); record.len()];
    for rep in &per_replica {
        for (acc, rho) in sum.iter_mut().zip(rep) {
            *acc = *acc + *rho;
        }
    }
    Ok(sum.into_iter().map(|m| m.scale_re(1.0 / n)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{CVec, CVec2};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_state<const N: usize>(rng: &mut ChaCha8Rng) -> CMat<N> {
        let mut g = CMat::<N>::zeros();
        for i in 0..N {
            for j in 0..N {
                g[(i, j)] = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        let p = g * g.adjoint();
        p.scale_re(1.0 / p.trace().re)
    }

    fn random_hermitian<const N: usize>(rng: &mut ChaCha8Rng) -> CMat<N> {
        let mut g = CMat::<N>::zeros();
        for i in 0..N {
            for j in 0..N {
                g[(i, j)] = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        g.hermitian_part()
    }

    #[test]
    fn readout_examples() {
        let pl = PlModel::default();
        let rho = pure(&CVec4::basis(0));
        let e = simulate_readout::<ChaCha8Rng>(&rho, &pl, None).0;
        assert_eq!((e[0], e[1], e[3]), (pl.l01, pl.lm11, pl.l00));
        let mixed = CMat4::identity().scale_re(0.25);
        let e = simulate_readout::<ChaCha8Rng>(&mixed, &pl, None).0;
        let mean = (pl.l01 + pl.l00 + pl.lm11 + pl.lm10) / 4.0;
        assert!(e.iter().all(|x| (x - mean).abs() < 1e-15));
    }

    #[test]
    fn inversion_examples() {
        let pl = PlModel::default();
        let e = simulate_readout::<ChaCha8Rng>(&pure(&CVec4::basis(0)), &pl, None);
        let r = invert_readout(&e, &pl).unwrap();
        assert!((r[(0, 0)].re - 1.0).abs() < 1e-12 && r[(1, 1)].re.abs() < 1e-12 && r[(0, 1)].norm() < 1e-12);
        let e = ReadoutVector([0.9, 0.8, 0.85, 0.7, 0.75, 0.75, 0.6, 0.6]);
        assert_eq!(invert_readout(&e, &pl).unwrap()[(0, 1)], c(0.0, 0.0));
        let bad = PlModel { l00: 1.0, ..pl };
        assert!(matches!(invert_readout(&e, &bad), Err(Error::DegeneratePl { .. })));
    }

    #[test]
    fn inversion_roundtrip_and_lsq_agree() {
        let pl = PlModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let rho = random_state::<4>(&mut rng);
            let e = simulate_readout::<ChaCha8Rng>(&rho, &pl, None);
            let r = invert_readout(&e, &pl).unwrap();
            assert!((r[(0, 0)] - rho[(0, 0)]).norm() < 1e-10);
            assert!((r[(1, 1)] - rho[(2, 2)]).norm() < 1e-10);
            assert!((r[(0, 1)] - rho[(0, 2)]).norm() < 1e-10);
            let l = lsq_invert(&e, &pl).unwrap();
            assert!((l - r).max_abs() < 1e-8);
        }
    }

    #[test]
    fn design_matrix_has_full_rank() {
        let cond = condition(&design_matrix(&PlModel::default()));
        assert!(cond.is_finite() && cond < 1e3, "{cond}");
        let flat = PlModel { l01: 1.0, l00: 1.0, lm11: 1.0, lm10: 1.0, shot_noise_sigma: 0.0 };
        assert!(matches!(lsq_invert(&ReadoutVector([1.0; 8]), &flat), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn lsq_output_is_hermitian() {
        let pl = PlModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_state::<4>(&mut rng);
        let mut e = simulate_readout::<ChaCha8Rng>(&rho, &pl, None);
        for (k, x) in e.0.iter_mut().enumerate() {
            *x += if k % 2 == 0 { 1e-3 } else { -1e-3 };
        }
        let full = lsq_invert(&e, &pl).unwrap();
        assert!(full.hermiticity_defect() == 0.0);
    }

    #[test]
    fn chi_to_psi_examples() {
        let rho = CMat2::from_rows([[c(0.3, 0.0), c(0.1, 0.05)], [c(0.1, -0.05), c(0.2, 0.0)]]);
        let out = chi_to_psi(&rho, &CMat2::zeros()).unwrap();
        assert!((out - rho.scale_re(2.0)).max_abs() < 1e-15);
        let out = chi_to_psi(&rho, &CMat2::scalar(c(0.5f64.sqrt(), 0.0))).unwrap();
        assert!((out - rho.scale_re(2.0)).max_abs() < 1e-14);
        assert!(matches!(chi_to_psi(&CMat2::zeros(), &CMat2::zeros()), Err(Error::ZeroState { .. })));
    }

    #[test]
    fn mle_examples() {
        let out = mle_project(&CMat2::diag_real([1.2, -0.2]));
        assert!((out - CMat2::diag_real([1.0, 0.0])).max_abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let rho = random_state::<2>(&mut rng);
            assert!((mle_project(&rho) - rho).max_abs() < 1e-12);
            let rho4 = random_state::<4>(&mut rng);
            assert!((mle_project(&rho4) - rho4).max_abs() < 1e-12);
        }
    }

    #[test]
    fn mle_outputs_are_physical_and_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let x = random_hermitian::<4>(&mut rng);
            let p = mle_project(&x);
            assert!(is_physical(&p));
            assert!((mle_project(&p) - p).max_abs() < 1e-12);
            // trace-one inputs: projection never moves away from the feasible set
            let x1 = x + CMat4::identity().scale_re((1.0 - x.trace().re) / 4.0);
            let y = random_state::<4>(&mut rng);
            assert!((mle_project(&x1) - y).frobenius() <= (x1 - y).frobenius() + 1e-12);
        }
    }

    #[test]
    fn simplex_projection_matches_exhaustive_search() {
        // diag(1.2, −0.2): minimize (1.2 − p)² + (−0.2 − (1 − p))² over p ∈ [0, 1]
        let best = (0..=100_000)
            .map(|k| k as f64 / 100_000.0)
            .min_by(|a, b| {
                let f = |p: f64| (1.2 - p).powi(2) + (-0.2 - (1.0 - p)).powi(2);
                f(*a).total_cmp(&f(*b))
            })
            .unwrap();
        assert_eq!(simplex_projection([1.2, -0.2]), [best, 1.0 - best]);
    }

    #[test]
    fn fidelity_examples() {
        let a = pure(&CVec2::basis(0));
        assert!((fidelity(&a, &a) - 1.0).abs() < 1e-12);
        assert!(fidelity(&a, &pure(&CVec2::basis(1))) < 1e-12);
        let mixed = CMat2::identity().scale_re(0.5);
        assert!((fidelity(&a, &mixed) - 0.5f64.sqrt()).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let (x, y) = (random_state::<2>(&mut rng), random_state::<2>(&mut rng));
            assert!((fidelity(&x, &y) - fidelity(&y, &x)).abs() < 1e-10);
            assert!((fidelity(&x, &x) - 1.0).abs() < 1e-10);
            let u = CVec::<2>::new([c(0.6, 0.1), c(-0.3, 0.7)]).normalized();
            let v = CVec::<2>::new([c(0.2, -0.4), c(0.5, 0.1)]).normalized();
            assert!((fidelity(&pure(&u), &pure(&v)) - u.inner(&v).norm()).abs() < 1e-7);
        }
    }

    #[test]
    fn replica_streams_are_keyed() {
        let a: f64 = replica_rng(1, 2, 3).random();
        let b: f64 = replica_rng(1, 2, 3).random();
        let c: f64 = replica_rng(1, 2, 4).random();
        let d: f64 = replica_rng(1, 3, 3).random();
        assert_eq!(a, b);
        assert!(a != c && a != d);
    }

    #[test]
    fn shot_noise_is_seeded() {
        let pl = PlModel { shot_noise_sigma: 0.01, ..Default::default() };
        let rho = pure(&CVec4::basis(0));
        let a = simulate_readout(&rho, &pl, Some(&mut replica_rng(1, 0, 0)));
        let b = simulate_readout(&rho, &pl, Some(&mut replica_rng(1, 0, 0)));
        let clean = simulate_readout::<ChaCha8Rng>(&rho, &pl, None);
        assert_eq!(a, b);
        assert!(a != clean);
    }

    mod noise {
        use super::*;
        use crate::dilation::{dilate_initial_state, DilationConfig};
        use crate::dynamics::{case_path, start_eigensystem, table_thetas, Label, StartPoint};
        use crate::model::{Direction, PathSpec};
        use crate::numerics::IntegratorConfig;

        fn setup() -> (Dilation, HsaTable, CVec4, Vec<f64>) {
            let path = case_path(StartPoint::B, Direction::PositiveTheta, &PathSpec::default());
            let dil = Dilation::build(&path, &DilationConfig::default(), &IntegratorConfig::default()).unwrap();
            let table = HsaTable::build(&dil, 12_000).unwrap();
            let psi0 = dilate_initial_state(&Label::Alpha.vector(&start_eigensystem(&path)), dil.eta0());
            let times = table_thetas().map(|th| path.time_at(th)).to_vec();
            (dil, table, psi0, times)
        }

        #[test]
        fn rk4_table_matches_adaptive_evolution() {
            let (dil, table, psi0, times) = setup();
            let psi_s = Label::Alpha.vector(&start_eigensystem(&dil.path));
            let adaptive = dil.evolve(&psi_s, None, &IntegratorConfig::default().with_tolerance_scale(0.01)).unwrap();
            let idx: Vec<_> = times.iter().map(|&t| table.index_of(t).unwrap()).collect();
            let rk = table.propagate(&psi0, &CMat4::zeros(), &idx);
            for (k, &t) in times.iter().enumerate() {
                let err = (rk[k] - adaptive.at(t)).norm();
                assert!(err < 1e-7, "t={t}: {err}");
            }
        }

        #[test]
        fn zero_spread_single_replica_is_noiseless() {
            let (_, table, psi0, times) = setup();
            let noise = NoiseConfig { replicas: 1, sigma: Some(0.0), ..Default::default() };
            let avg = dephasing_replicas(&table, &psi0, &times, &noise, 0).unwrap();
            let idx: Vec<_> = times.iter().map(|&t| table.index_of(t).unwrap()).collect();
            let clean = table.propagate(&psi0, &CMat4::zeros(), &idx);
            for (rho, psi) in avg.iter().zip(&clean) {
                assert_eq!(*rho, pure(psi));
            }
        }

        #[test]
        fn averaging_lowers_purity_and_is_seeded() {
            let (_, table, psi0, times) = setup();
            let noise = NoiseConfig { replicas: 16, ..Default::default() };
            let a = dephasing_replicas(&table, &psi0, &times, &noise, 3).unwrap();
            let b = dephasing_replicas(&table, &psi0, &times, &noise, 3).unwrap();
            assert_eq!(a, b);
            for rho in &a {
                assert!(is_physical(rho));
                assert!(purity(rho) <= 1.0 + 1e-12);
            }
            assert!(purity(&a[6]) < 1.0 - 1e-6);
            assert!(matches!(table.index_of(0.123), Err(Error::InvalidInput(_))));
        }
    }
}
