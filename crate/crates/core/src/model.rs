//! The non-Hermitian two-level model: Hamiltonian, circular parameter loop,
//! spectrum with α/β branch labels, PT-phase classification and raw
//! Riemann-sheet sampling.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::numerics::{eig_general, CMat2, CVec2};

/// Eigenvalues closer than this are treated as coalesced.
pub const EP_TOL: f64 = 1e-9;
/// Imaginary parts below this count as a real spectrum.
pub const REAL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NhParams {
    pub gamma: f64,
    pub delta: f64,
    pub g: f64,
}

impl NhParams {
    pub fn new(delta: f64, g: f64) -> Self {
        Self { gamma: 1.0, delta, g }
    }
}

/// `H = [[δ/2 + iγ, g], [g, −δ/2 − iγ]]` (dimensionless).
pub fn hamiltonian(p: &NhParams) -> CMat2 {
    let d = C64::new(0.5 * p.delta, p.gamma);
    let g = C64::new(p.g, 0.0);
    CMat2::from_rows([[d, g], [g, -d]])
}

/// Closed-form spectrum `E± = ±√((δ/2 + iγ)² + g²)` (principal root for `E+`).
pub fn closed_form_energies(p: &NhParams) -> [C64; 2] {
    let d = C64::new(0.5 * p.delta, p.gamma);
    let e = (d * d + p.g * p.g).sqrt();
    [e, -e]
}

/// Sense in which the encircling angle advances.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    PositiveTheta,
    NegativeTheta,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::PositiveTheta => 1.0,
            Direction::NegativeTheta => -1.0,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Direction::PositiveTheta => Direction::NegativeTheta,
            Direction::NegativeTheta => Direction::PositiveTheta,
        }
    }
}

/// On-screen encircling sense, mapped to a [`Direction`] through a
/// [`DirectionConvention`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Clockwise,
    Counterclockwise,
}

impl Sense {
    pub fn short(self) -> &'static str {
        match self {
            Sense::Clockwise => "cw",
            Sense::Counterclockwise => "ccw",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DirectionConvention {
    pub clockwise_is_positive_theta: bool,
}

impl Default for DirectionConvention {
    fn default() -> Self {
        Self { clockwise_is_positive_theta: true }
    }
}

impl DirectionConvention {
    pub fn resolve(&self, sense: Sense) -> Direction {
        let cw = if self.clockwise_is_positive_theta {
            Direction::PositiveTheta
        } else {
            Direction::NegativeTheta
        };
        match sense {
            Sense::Clockwise => cw,
            Sense::Counterclockwise => cw.reversed(),
        }
    }
}

/// Circular loop in the (δ, g) plane traversed once in `period_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathSpec {
    /// Start-point offset θ₀ (rad).
    pub theta0: f64,
    pub direction: Direction,
    /// Loop duration (μs).
    pub period_t: f64,
    pub radius: f64,
    pub center_g: f64,
    /// Energy scale κ multiplying the dimensionless Hamiltonian (rad·μs⁻¹).
    pub kappa: f64,
    pub gamma: f64,
}

impl Default for PathSpec {
    fn default() -> Self {
        Self {
            theta0: 0.0,
            direction: Direction::PositiveTheta,
            period_t: 15.0,
            radius: 0.5,
            center_g: 1.0,
            kappa: 1.0,
            gamma: 1.0,
        }
    }
}

impl PathSpec {
    pub fn with_start(mut self, theta0: f64) -> Self {
        self.theta0 = theta0;
        self
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    /// Encircling angle θ(t) = ±2πt/T.
    pub fn theta(&self, t: f64) -> f64 {
        self.direction.sign() * 2.0 * PI * t / self.period_t
    }

    /// Time at which |θ| reaches `abs_theta`.
    pub fn time_at(&self, abs_theta: f64) -> f64 {
        abs_theta / (2.0 * PI) * self.period_t
    }

    /// Dimensionless Hamiltonian at time `t`.
    pub fn hamiltonian(&self, t: f64) -> CMat2 {
        hamiltonian(&path_point(self, t))
    }

    /// `κ·H_s(t)` in rad·μs⁻¹.
    pub fn scaled_hamiltonian(&self, t: f64) -> CMat2 {
        self.hamiltonian(t).scale_re(self.kappa)
    }
}

pub fn path_point(path: &PathSpec, t: f64) -> NhParams {
    let phi = path.theta(t) + path.theta0;
    NhParams {
        gamma: path.gamma,
        delta: path.radius * phi.sin(),
        g: path.center_g + path.radius * phi.cos(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PtPhase {
    PtSymmetric,
    PtBroken,
    AtEp,
}

#[derive(Clone, Copy, Debug)]
pub struct EigenSystem {
    pub e_alpha: C64,
    pub e_beta: C64,
    pub v_alpha: CVec2,
    pub v_beta: CVec2,
    pub phase: PtPhase,
    pub degenerate: bool,
}

/// α is the branch with larger imaginary part; on a real spectrum the larger
/// real part wins.
fn alpha_first(a: C64, b: C64) -> bool {
    if (a.im - b.im).abs() > REAL_TOL {
        a.im > b.im
    } else {
        a.re >= b.re
    }
}

pub fn eigensystem(p: &NhParams) -> EigenSystem {
    let h = hamiltonian(p);
    let eig = eig_general(&h);
    let [l0, l1] = eig.values;
    let (ia, ib) = if alpha_first(l0, l1) { (0, 1) } else { (1, 0) };
    let gap = (l0 - l1).norm();
    let phase = if gap < EP_TOL {
        PtPhase::AtEp
    } else if l0.im.abs() < REAL_TOL && l1.im.abs() < REAL_TOL {
        PtPhase::PtSymmetric
    } else {
        PtPhase::PtBroken
    };
    EigenSystem {
        e_alpha: eig.values[ia],
        e_beta: eig.values[ib],
        v_alpha: eig.vectors[ia],
        v_beta: eig.vectors[ib],
        phase,
        degenerate: eig.degenerate,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SheetPoint {
    pub delta: f64,
    pub g: f64,
    pub e_plus: C64,
    pub e_minus: C64,
}

/// Samples both eigenvalue sheets on an `n_delta × n_g` grid (inclusive
/// ranges, δ varying slowest). Branches follow the principal square root.
pub fn riemann_sample(
    delta_range: (f64, f64),
    g_range: (f64, f64),
    n_delta: usize,
    n_g: usize,
    gamma: f64,
) -> Vec<SheetPoint> {
    assert!(n_delta >= 2 && n_g >= 2, "grid dimensions must be at least 2");
    let axis = |(lo, hi): (f64, f64), n: usize, k: usize| lo + (hi - lo) * (k as f64) / ((n - 1) as f64);
    let mut out = Vec::with_capacity(n_delta * n_g);
    for i in 0..n_delta {
        let delta = axis(delta_range, n_delta, i);
        for j in 0..n_g {
            let g = axis(g_range, n_g, j);
            let [e_plus, e_minus] = closed_form_energies(&NhParams { gamma, delta, g });
            out.push(SheetPoint { delta, g, e_plus, e_minus });
        }
    }
    out
}

pub const SHEET_CSV_HEADER: &str = "delta,g,reEplus,imEplus,reEminus,imEminus";

pub fn write_sheet_csv<W: Write>(mut w: W, points: &[SheetPoint]) -> std::io::Result<()> {
    writeln!(w, "{SHEET_CSV_HEADER}")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            p.delta, p.g, p.e_plus.re, p.e_plus.im, p.e_minus.re, p.e_minus.im
        )?;
    }
    Ok(())
}
