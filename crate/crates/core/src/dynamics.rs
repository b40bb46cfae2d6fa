//! Direct integration of the non-Hermitian Schrödinger equation along the
//! loop, overlap tracking, quasistatic branch tracking and mode-switch
//! classification.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{eigensystem, path_point, Direction, EigenSystem, PathSpec};
use crate::numerics::{eig_general, integrate_ode, CMat2, CVec2, DenseSolution, IntegratorConfig};

pub const NORMALIZED_TOL: f64 = 1e-9;
/// Winning overlap required for a definite final label.
pub const LABEL_THRESHOLD: f64 = 0.9;
pub const BRANCH_MATCH_TOL: f64 = 1e-6;
pub const BRANCH_OVERLAP_MIN: f64 = 0.99;
pub const AMBIGUITY_OVERLAP: f64 = 0.5;
pub const EP_CLEARANCE: f64 = 1e-6;

/// Measurement angles |θ| = kπ/3, k = 0..=6.
pub fn table_thetas() -> [f64; 7] {
    let mut th = [0.0; 7];
    for (k, t) in th.iter_mut().enumerate() {
        *t = k as f64 * PI / 3.0;
    }
    th[6] = 2.0 * PI;
    th
}

/// A norm-split solution: unit state `φ(t)` and `ln‖ψ(t)‖`.
#[derive(Clone, Debug)]
pub struct NhTrajectory {
    pub path: PathSpec,
    pub times: Vec<f64>,
    pub states: Vec<CVec2>,
    pub log_norm: Vec<f64>,
    dense: DenseSolution,
}

impl NhTrajectory {
    /// Normalized state and log-norm at an arbitrary time in the span.
    pub fn at(&self, t: f64) -> (CVec2, f64) {
        let mut y = [C64::new(0.0, 0.0); 3];
        self.dense.eval_into(t, &mut y);
        (CVec2::new([y[0], y[1]]).normalized(), y[2].re)
    }

    /// Unnormalized solution `e^{log_norm} φ`.
    pub fn raw_at(&self, t: f64) -> CVec2 {
        let (phi, ln) = self.at(t);
        phi.scale_re(ln.exp())
    }

    pub fn final_state(&self) -> (CVec2, f64) {
        let y = self.dense.final_state();
        (CVec2::new([y[0], y[1]]).normalized(), y[2].re)
    }

    pub fn span(&self) -> (f64, f64) {
        self.dense.span()
    }
}

/// Integrates `dψ/dt = G(t) ψ` in norm-split form over `span`.
pub fn integrate_generator<G>(
    generator: G,
    psi0: &CVec2,
    span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<DenseSolution>
where
    G: Fn(f64) -> CMat2,
{
    if !psi0.is_normalized(NORMALIZED_TOL) {
        return Err(Error::InvalidInput(format!("initial state has norm {}", psi0.norm())));
    }
    let y0 = [psi0[0], psi0[1], C64::new(0.0, 0.0)];
    integrate_ode(
        |t, y, dy| {
            let phi = CVec2::new([y[0], y[1]]);
            let gphi = generator(t) * phi;
            let r = phi.inner(&gphi).re / phi.norm_sqr();
            dy[0] = gphi[0] - phi[0] * r;
            dy[1] = gphi[1] - phi[1] * r;
            dy[2] = C64::new(r, 0.0);
        },
        &y0,
        span,
        cfg,
    )
}

pub fn integrate_nh(path: &PathSpec, psi0: &CVec2, cfg: &IntegratorConfig) -> Result<NhTrajectory> {
    let minus_i = C64::new(0.0, -1.0);
    let dense = integrate_generator(
        |t| path.scaled_hamiltonian(t).scale(minus_i),
        psi0,
        (0.0, path.period_t),
        cfg,
    )?;
    let times = cfg.sample_grid(0.0, path.period_t);
    let mut states = Vec::with_capacity(times.len());
    let mut log_norm = Vec::with_capacity(times.len());
    let mut y = [C64::new(0.0, 0.0); 3];
    for &t in &times {
        dense.eval_into(t, &mut y);
        states.push(CVec2::new([y[0], y[1]]).normalized());
        log_norm.push(y[2].re);
    }
    log_norm[0] = 0.0;
    Ok(NhTrajectory { path: *path, times, states, log_norm, dense })
}

/// `(|⟨α|state⟩|, |⟨β|state⟩|)` with unit eigenvectors.
pub fn overlaps(state: &CVec2, eig: &EigenSystem) -> (f64, f64) {
    let oa = eig.v_alpha.inner(state).norm().min(1.0);
    let ob = eig.v_beta.inner(state).norm().min(1.0);
    (oa, ob)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StartPoint {
    A,
    B,
}

impl StartPoint {
    pub fn theta0(self) -> f64 {
        match self {
            StartPoint::A => 0.0,
            StartPoint::B => PI,
        }
    }
}

impl fmt::Display for StartPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StartPoint::A => "A",
            StartPoint::B => "B",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Alpha,
    Beta,
}

impl Label {
    pub fn vector(self, eig: &EigenSystem) -> CVec2 {
        match self {
            Label::Alpha => eig.v_alpha,
            Label::Beta => eig.v_beta,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Label::Alpha => "α",
            Label::Beta => "β",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Alpha => "alpha",
            Label::Beta => "beta",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapSample {
    /// Traversed angle |θ| (rad).
    pub theta: f64,
    pub overlap_alpha: f64,
    pub overlap_beta: f64,
    pub log_norm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeSwitchReport {
    pub start: StartPoint,
    pub direction: Direction,
    pub init_label: Label,
    pub table: Vec<OverlapSample>,
    #[serde(skip)]
    pub dense: Vec<OverlapSample>,
    /// `None` when the winning overlap is below [`LABEL_THRESHOLD`].
    pub final_label: Option<Label>,
    pub final_overlap: f64,
    pub final_overlaps: (f64, f64),
    pub final_log_norm: f64,
}

impl ModeSwitchReport {
    pub fn indeterminate(&self) -> bool {
        self.final_label.is_none()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "theta,overlap_alpha,overlap_beta,log_norm")?;
        for s in &self.dense {
            writeln!(w, "{},{},{},{}", s.theta, s.overlap_alpha, s.overlap_beta, s.log_norm)?;
        }
        Ok(())
    }
}

pub fn case_path(start: StartPoint, direction: Direction, base: &PathSpec) -> PathSpec {
    base.with_start(start.theta0()).with_direction(direction)
}

pub fn start_eigensystem(path: &PathSpec) -> EigenSystem {
    eigensystem(&path_point(path, 0.0))
}

/// Runs one encircling case and keeps the direct trajectory.
pub fn encircle_case_full(
    start: StartPoint,
    direction: Direction,
    init_label: Label,
    base: &PathSpec,
    cfg: &IntegratorConfig,
) -> Result<(ModeSwitchReport, NhTrajectory)> {
    let path = case_path(start, direction, base);
    let eig0 = start_eigensystem(&path);
    let traj = integrate_nh(&path, &init_label.vector(&eig0), cfg)?;
    let sample = |t: f64| {
        let (phi, ln) = traj.at(t);
        let (oa, ob) = overlaps(&phi, &eig0);
        OverlapSample { theta: path.theta(t).abs(), overlap_alpha: oa, overlap_beta: ob, log_norm: ln }
    };
    let table: Vec<_> = table_thetas().iter().map(|&th| sample(path.time_at(th))).collect();
    let dense: Vec<_> = traj.times.iter().map(|&t| sample(t)).collect();
    let (phi_end, ln_end) = traj.final_state();
    let (oa, ob) = overlaps(&phi_end, &eig0);
    let (winner, best) = if oa >= ob { (Label::Alpha, oa) } else { (Label::Beta, ob) };
    let report = ModeSwitchReport {
        start,
        direction,
        init_label,
        table,
        dense,
        final_label: (best >= LABEL_THRESHOLD).then_some(winner),
        final_overlap: best,
        final_overlaps: (oa, ob),
        final_log_norm: ln_end,
    };
    Ok((report, traj))
}

pub fn encircle_case(
    start: StartPoint,
    direction: Direction,
    init_label: Label,
    base: &PathSpec,
    cfg: &IntegratorConfig,
) -> Result<ModeSwitchReport> {
    encircle_case_full(start, direction, init_label, base, cfg).map(|(r, _)| r)
}

/// Two eigen-branches continued along the loop.
#[derive(Clone, Debug)]
pub struct BranchTrack {
    /// Traversed angle per sample.
    pub theta: Vec<f64>,
    pub values: [Vec<C64>; 2],
    pub vectors: [Vec<CVec2>; 2],
}

impl BranchTrack {
    fn matches(&self, (i, ki): (usize, usize), (j, kj): (usize, usize)) -> bool {
        let dv = (self.values[i][ki] - self.values[j][kj]).norm();
        let ov = self.vectors[i][ki].inner(&self.vectors[j][kj]).norm();
        dv < BRANCH_MATCH_TOL && ov > BRANCH_OVERLAP_MIN
    }

    /// Branch 0 at the end sits where branch 1 started.
    pub fn swapped(&self) -> bool {
        let end = self.theta.len() - 1;
        self.matches((0, end), (1, 0)) && self.matches((1, end), (0, 0))
    }

    /// Each branch at the end sits where it started.
    pub fn returned(&self) -> bool {
        let end = self.theta.len() - 1;
        self.matches((0, end), (0, 0)) && self.matches((1, end), (1, 0))
    }
}

fn ep_distance(path: &PathSpec) -> f64 {
    // EPs at (δ, g) = (0, ±γ); the loop is a circle around (0, center_g)
    [path.gamma, -path.gamma]
        .iter()
        .map(|&g_ep| ((path.center_g - g_ep).abs() - path.radius).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Follows both eigen-branches by maximal eigenvector overlap for `loops`
/// circuits of `n_steps` steps each.
pub fn quasistatic_track_loops(path: &PathSpec, n_steps: usize, loops: usize) -> Result<BranchTrack> {
    if n_steps < 360 {
        return Err(Error::InvalidInput(format!("quasistatic tracking needs ≥ 360 steps, got {n_steps}")));
    }
    if loops == 0 {
        return Err(Error::InvalidInput("loops must be positive".into()));
    }
    let d = ep_distance(path);
    if d < EP_CLEARANCE {
        return Err(Error::InvalidInput(format!("loop passes within {d:.3e} of an exceptional point")));
    }
    let total = n_steps * loops;
    let mut track = BranchTrack {
        theta: Vec::with_capacity(total + 1),
        values: [Vec::with_capacity(total + 1), Vec::with_capacity(total + 1)],
        vectors: [Vec::with_capacity(total + 1), Vec::with_capacity(total + 1)],
    };
    for k in 0..=total {
        let t = path.period_t * k as f64 / n_steps as f64;
        let eig = eig_general(&crate::model::hamiltonian(&path_point(path, t)));
        let theta = 2.0 * PI * k as f64 / n_steps as f64;
        let order = if k == 0 {
            let es = eigensystem(&path_point(path, t));
            // branch 0 starts on α
            if (eig.values[0] - es.e_alpha).norm() <= (eig.values[1] - es.e_alpha).norm() {
                [0, 1]
            } else {
                [1, 0]
            }
        } else {
            let prev = [track.vectors[0][k - 1], track.vectors[1][k - 1]];
            let ov = |b: usize, s: usize| prev[b].inner(&eig.vectors[s]).norm();
            if ov(0, 0).max(ov(0, 1)) < AMBIGUITY_OVERLAP || ov(1, 0).max(ov(1, 1)) < AMBIGUITY_OVERLAP {
                return Err(Error::BranchAmbiguity { theta });
            }
            if ov(0, 0) + ov(1, 1) >= ov(0, 1) + ov(1, 0) {
                [0, 1]
            } else {
                [1, 0]
            }
        };
        track.theta.push(theta);
        for b in 0..2 {
            track.values[b].push(eig.values[order[b]]);
            track.vectors[b].push(eig.vectors[order[b]]);
        }
    }
    Ok(track)
}

/// One circuit; `swapped()` on the result is the swap indicator.
pub fn quasistatic_track(path: &PathSpec, n_steps: usize) -> Result<BranchTrack> {
    quasistatic_track_loops(path, n_steps, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NhParams;

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    // radius 0 pins the loop to the point (δ = 0, g)
    fn fixed_path(g: f64, gamma: f64) -> PathSpec {
        PathSpec { radius: 0.0, center_g: g, gamma, ..Default::default() }
    }

    #[test]
    fn hermitian_point_keeps_unit_norm() {
        let path = fixed_path(0.8, 0.0);
        let psi0 = CVec2::new([C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let tr = integrate_nh(&path, &psi0, &cfg()).unwrap();
        for ln in &tr.log_norm {
            assert!(ln.abs() < 1e-9);
        }
    }

    #[test]
    fn decoupled_gain_level() {
        let path = fixed_path(0.0, 1.0);
        let tr = integrate_nh(&path, &CVec2::basis(0), &cfg()).unwrap();
        for (k, &t) in tr.times.iter().enumerate() {
            assert!((tr.states[k].inner(&CVec2::basis(0)).norm() - 1.0).abs() < 1e-9);
            assert!((tr.log_norm[k] - path.kappa * t).abs() < 1e-8 * (1.0 + t), "{t}");
        }
    }

    #[test]
    fn stored_states_are_normalized() {
        let path = PathSpec::default();
        let eig = start_eigensystem(&path);
        let tr = integrate_nh(&path, &eig.v_alpha, &cfg()).unwrap();
        assert_eq!(tr.log_norm[0], 0.0);
        assert!(tr.states.iter().all(|s| s.is_normalized(1e-9)));
    }

    #[test]
    fn norm_split_matches_raw_integration() {
        let path = PathSpec::default().with_start(PI);
        let eig = start_eigensystem(&path);
        let tr = integrate_nh(&path, &eig.v_beta, &cfg()).unwrap();
        let minus_i = C64::new(0.0, -1.0);
        let raw = integrate_ode(
            |t, y, dy| {
                let v = path.scaled_hamiltonian(t).scale(minus_i) * CVec2::new([y[0], y[1]]);
                dy.copy_from_slice(v.as_slice());
            },
            eig.v_beta.as_slice(),
            (0.0, path.period_t),
            &cfg(),
        )
        .unwrap();
        for &t in &[3.0, 7.5, 15.0] {
            let a = tr.raw_at(t);
            let b = CVec2::from_slice(&raw.eval(t));
            assert!((a - b).norm() < 1e-7 * b.norm(), "t={t}");
        }
    }

    #[test]
    fn overlap_examples() {
        let eig = eigensystem(&NhParams::new(0.0, 1.5));
        let (oa, ob) = overlaps(&eig.v_alpha, &eig);
        assert!((oa - 1.0).abs() < 1e-12);
        assert!((ob - 2.0 / 3.0).abs() < 1e-9);

        let ep = eigensystem(&NhParams::new(0.0, 1.0));
        let (oa, ob) = overlaps(&ep.v_alpha, &ep);
        assert!((oa - 1.0).abs() < 1e-12 && (ob - 1.0).abs() < 1e-12);

        let a = eig.v_alpha;
        let perp = CVec2::new([-a[1].conj(), a[0].conj()]);
        assert!(overlaps(&perp, &eig).0 < 1e-12);
    }

    #[test]
    fn table_angles() {
        let th = table_thetas();
        assert_eq!(th[0], 0.0);
        assert_eq!(th[6], 2.0 * PI);
        assert!((th[3] - PI).abs() < 1e-15);
    }

    #[test]
    fn reversal_recovers_initial_state() {
        let path = PathSpec::default();
        let eig = start_eigensystem(&path);
        let tr = integrate_nh(&path, &eig.v_alpha, &cfg()).unwrap();
        let (phi_t, _) = tr.final_state();
        let t_end = path.period_t;
        let i = C64::new(0.0, 1.0);
        let back = integrate_generator(|s| path.scaled_hamiltonian(t_end - s).scale(i), &phi_t, (0.0, t_end), &cfg())
            .unwrap();
        let y = back.final_state();
        let psi = CVec2::new([y[0], y[1]]);
        assert!(psi.fidelity(&eig.v_alpha) >= 1.0 - 1e-6);
    }

    #[test]
    fn rejects_unnormalized_input() {
        let psi = CVec2::new([C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        assert!(integrate_nh(&PathSpec::default(), &psi, &cfg()).is_err());
    }

    #[test]
    fn swap_over_one_loop_and_return_over_two() {
        let path = PathSpec::default();
        let one = quasistatic_track(&path, 720).unwrap();
        assert!(one.swapped() && !one.returned());
        let two = quasistatic_track_loops(&path, 720, 2).unwrap();
        assert!(two.returned() && !two.swapped());
    }

    #[test]
    fn non_enclosing_loop_does_not_swap() {
        let path = PathSpec { center_g: 1.6, radius: 0.05, ..Default::default() };
        let tr = quasistatic_track(&path, 720).unwrap();
        assert!(!tr.swapped() && tr.returned());
    }

    #[test]
    fn loop_through_ep_is_rejected() {
        let path = PathSpec { center_g: 1.5, radius: 0.5, ..Default::default() };
        assert!(quasistatic_track(&path, 720).is_err());
        assert!(quasistatic_track(&PathSpec::default(), 100).is_err());
    }

    #[test]
    fn mode_switch_pattern() {
        let base = PathSpec::default();
        let run = |s, d, l| encircle_case(s, d, l, &base, &cfg()).unwrap();
        use Direction::*;
        for l in [Label::Alpha, Label::Beta] {
            let cw = run(StartPoint::A, PositiveTheta, l);
            assert_eq!(cw.final_label, Some(Label::Beta));
            assert!(cw.final_overlaps.1 >= 0.99);
            let ccw = run(StartPoint::A, NegativeTheta, l);
            assert_eq!(ccw.final_label, Some(Label::Alpha));
            assert!(ccw.final_overlaps.0 >= 0.99);
            for d in [PositiveTheta, NegativeTheta] {
                let r = run(StartPoint::B, d, l);
                assert_eq!(r.final_label, Some(Label::Alpha));
                assert!(r.final_overlaps.0 >= 0.99);
            }
        }
    }

    #[test]
    fn overlap_curves_are_continuous_and_tabulated() {
        let base = PathSpec::default();
        let r = encircle_case(StartPoint::B, Direction::PositiveTheta, Label::Beta, &base, &cfg()).unwrap();
        assert_eq!(r.table.len(), 7);
        assert!((r.table[6].theta - 2.0 * PI).abs() < 1e-12);
        for w in r.dense.windows(2) {
            assert!((w[1].overlap_alpha - w[0].overlap_alpha).abs() < 0.05);
            assert!((w[1].overlap_beta - w[0].overlap_beta).abs() < 0.05);
        }
        let a = encircle_case(StartPoint::B, Direction::PositiveTheta, Label::Alpha, &base, &cfg()).unwrap();
        assert!((a.final_log_norm - r.final_log_norm).abs() > 1e-3);
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + cfg().samples);
    }
}
