//! Run configuration, the eight preset experiments, and artifact emission.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dilation::{dilate_initial_state, recover_psi, Dilation, DilationConfig, DilationTrace, M0_SCALE};
use crate::dynamics::{
    case_path, encircle_case_full, quasistatic_track_loops, start_eigensystem, table_thetas, Label,
    ModeSwitchReport, StartPoint,
};
use crate::error::{Error, Result};
use crate::model::{eigensystem, riemann_sample, write_sheet_csv, DirectionConvention, NhParams, PathSpec, Sense};
use crate::numerics::{CMat2, CMat4, CVec2, IntegratorConfig};
use crate::nvcontrol::{export_waveform, reconstruct_hrot, synth_pulses, Format, NvConstants, PulseWaveform};
use crate::tomolab::{
    chi_to_psi, dephasing_replicas, fidelity, invert_readout, is_physical, lsq_invert, mle_project, pure,
    replica_rng, simulate_readout, HsaTable, NoiseConfig, PlModel,
};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const MODE_SWITCH_MIN: f64 = 0.99;
pub const RECOVERY_MIN: f64 = 0.999;
pub const NOISY_FIDELITY_MIN: f64 = 0.94;
pub const NORM_DRIFT_MAX: f64 = 1e-8;
pub const P_MINUS_IDENTITY_MAX: f64 = 1e-6;
pub const PULSE_ROUNDTRIP_MAX: f64 = 1e-10;

/// One of the eight experimental cases: start point, sense and initial
/// eigenstate. Ids read `A-cw-alpha`; `α`/`β` are accepted on input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Preset {
    pub start: StartPoint,
    pub sense: Sense,
    pub init: Label,
}

impl Preset {
    pub const ALL: [Preset; 8] = {
        use Label::*;
        use Sense::*;
        use StartPoint::*;
        [
            Preset { start: A, sense: Clockwise, init: Alpha },
            Preset { start: A, sense: Clockwise, init: Beta },
            Preset { start: A, sense: Counterclockwise, init: Alpha },
            Preset { start: A, sense: Counterclockwise, init: Beta },
            Preset { start: B, sense: Clockwise, init: Alpha },
            Preset { start: B, sense: Clockwise, init: Beta },
            Preset { start: B, sense: Counterclockwise, init: Alpha },
            Preset { start: B, sense: Counterclockwise, init: Beta },
        ]
    };

    pub fn id(&self) -> String {
        format!("{}-{}-{}", self.start, self.sense.short(), self.init)
    }

    /// Position in [`Preset::ALL`]; also the RNG case key.
    pub fn index(&self) -> u64 {
        Self::ALL.iter().position(|p| p == self).expect("preset is one of ALL") as u64
    }

    /// Final eigenstate the encircling should land in.
    pub fn expected_final(&self) -> Label {
        match (self.start, self.sense) {
            (StartPoint::A, Sense::Clockwise) => Label::Beta,
            _ => Label::Alpha,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown preset '{s}' (expected e.g. A-cw-alpha, B-ccw-β)"));
        let parts: Vec<_> = s.split('-').collect();
        let [start, sense, init] = parts.as_slice() else { return Err(bad()) };
        let start = match start.to_ascii_uppercase().as_str() {
            "A" => StartPoint::A,
            "B" => StartPoint::B,
            _ => return Err(bad()),
        };
        let sense = match sense.to_ascii_lowercase().as_str() {
            "cw" => Sense::Clockwise,
            "ccw" => Sense::Counterclockwise,
            _ => return Err(bad()),
        };
        let init = match init.to_lowercase().as_str() {
            "alpha" | "α" => Label::Alpha,
            "beta" | "β" => Label::Beta,
            _ => return Err(bad()),
        };
        Ok(Preset { start, sense, init })
    }
}

impl TryFrom<String> for Preset {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Preset> for String {
    fn from(p: Preset) -> String {
        p.id()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiemannConfig {
    pub delta_range: (f64, f64),
    pub g_range: (f64, f64),
    pub n_delta: usize,
    pub n_g: usize,
}

impl Default for RiemannConfig {
    fn default() -> Self {
        Self { delta_range: (-0.6, 0.6), g_range: (0.4, 1.6), n_delta: 101, n_g: 101 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Artifacts are written only when set.
    pub dir: Option<PathBuf>,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, formats: vec![Format::Csv] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub preset: Option<Preset>,
    pub convention: DirectionConvention,
    /// Base loop; start point and direction come from the preset.
    pub path: PathSpec,
    pub integrator: IntegratorConfig,
    /// Tolerance scale for the noiseless dilated evolution.
    pub dilated_tolerance_scale: f64,
    pub dilation: DilationConfig,
    pub nv: NvConstants,
    pub pl: PlModel,
    pub noise: NoiseConfig,
    pub riemann: RiemannConfig,
    pub output: OutputConfig,
    pub tomography: bool,
    pub synth: bool,
    /// Worker threads for the suite; 0 uses every core.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            preset: None,
            convention: DirectionConvention::default(),
            path: PathSpec::default(),
            integrator: IntegratorConfig::default(),
            dilated_tolerance_scale: 0.01,
            dilation: DilationConfig::default(),
            nv: NvConstants::default(),
            pl: PlModel::default(),
            noise: NoiseConfig::default(),
            riemann: RiemannConfig::default(),
            output: OutputConfig::default(),
            tomography: true,
            synth: true,
            workers: 0,
        }
    }
}

fn keyed(key: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::Config(format!("{key}: {e}"))
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version: expected {CONFIG_SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        let p = &self.path;
        if !(p.period_t > 0.0 && p.radius > 0.0 && p.kappa > 0.0 && p.gamma.is_finite() && p.center_g.is_finite()) {
            return Err(Error::Config("path: period_t, radius and kappa must be positive".into()));
        }
        self.integrator.validate().map_err(keyed("integrator"))?;
        if !(self.dilated_tolerance_scale > 0.0) {
            return Err(Error::Config("dilated_tolerance_scale: must be positive".into()));
        }
        self.dilation.gauge.validate().map_err(keyed("dilation.gauge"))?;
        self.nv.validate().map_err(keyed("nv"))?;
        self.pl.validate().map_err(keyed("pl"))?;
        if !(self.pl.shot_noise_sigma >= 0.0) {
            return Err(Error::Config("pl.shot_noise_sigma: must be non-negative".into()));
        }
        self.noise.validate().map_err(keyed("noise"))?;
        let r = &self.riemann;
        if r.n_delta < 2 || r.n_g < 2 {
            return Err(Error::Config("riemann: grid dimensions must be at least 2".into()));
        }
        if self.output.formats.is_empty() {
            return Err(Error::Config("output.formats: at least one format is required".into()));
        }
        Ok(())
    }

    pub fn preset_path(&self, preset: Preset) -> PathSpec {
        case_path(preset.start, self.convention.resolve(preset.sense), &self.path)
    }

    fn dilated_integrator(&self) -> IntegratorConfig {
        self.integrator.with_tolerance_scale(self.dilated_tolerance_scale)
    }
}

/// A named diagnostic compared against a bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// `true` when `value` must not drop below `bound`.
    pub lower: bool,
    pub passed: bool,
}

impl Check {
    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, lower: true, passed: value >= bound }
    }

    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, lower: false, passed: value <= bound }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.lower { ">=" } else { "<=" };
        let tag = if self.passed { "ok  " } else { "FAIL" };
        write!(f, "{tag} {:<28} {:.6e} {op} {:.3e}", self.name, self.value, self.bound)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub theta: f64,
    /// Via the ancilla-|0⟩ state χ.
    pub f_chi_route: f64,
    /// Via the ancilla-|−⟩ projection.
    pub f_minus_route: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub case: String,
    pub theta: f64,
    #[serde(rename = "F_chi")]
    pub f_chi: f64,
    #[serde(rename = "F_psi")]
    pub f_psi: f64,
}

pub const TABLE_CSV_HEADER: &str = "case,theta,F_chi,F_psi";

pub fn write_table_csv<W: Write>(mut w: W, rows: &[TableRow]) -> std::io::Result<()> {
    writeln!(w, "{TABLE_CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.case, r.theta, r.f_chi, r.f_psi)?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CaseReport {
    pub case: Preset,
    pub mode: ModeSwitchReport,
    pub min_lmin_m_minus_i: f64,
    pub min_p_minus: f64,
    pub max_asymmetry: f64,
    pub max_norm_drift: f64,
    pub max_p_minus_identity: f64,
    pub recovery: Vec<RecoveryRow>,
    pub tomography: Option<Vec<TableRow>>,
    pub noisy: bool,
    pub max_pulse_roundtrip: Option<f64>,
    pub files: Vec<String>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl CaseReport {
    pub fn status(&self) -> &'static str {
        if self.passed {
            "PASSED"
        } else {
            "FAILED"
        }
    }
}

/// Everything a preset run produces.
#[derive(Clone, Debug)]
pub struct CaseRun {
    pub report: CaseReport,
    pub trace: DilationTrace,
    pub waveform: Option<PulseWaveform>,
}

/// Largest elementwise gap between the rebuilt rotating-frame Hamiltonian
/// and `Λ⊗I + Γ⊗σz` over the trace.
pub fn pulse_roundtrip_error(trace: &DilationTrace, w: &PulseWaveform) -> Result<f64> {
    let mut worst = 0.0f64;
    for (s, p) in trace.samples.iter().zip(&w.samples) {
        let h = reconstruct_hrot(p, s.a[0], s.a[3], s.bc[0], s.bc[3], w.carriers)?;
        worst = worst.max((h - s.hsa()).max_abs());
    }
    Ok(worst)
}

fn tomography_rows(
    preset: Preset,
    cfg: &RunConfig,
    rhos: &[CMat4],
    psi_direct: &[CVec2],
    etas: &[CMat2],
) -> Result<Vec<TableRow>> {
    let thetas = table_thetas();
    let mut rows = Vec::with_capacity(thetas.len());
    let mi = C64::new(0.0, 1.0);
    for k in 0..thetas.len() {
        let mut rng = replica_rng(cfg.noise.seed, 0x100 + preset.index(), k as u64);
        let e = simulate_readout(&rhos[k], &cfg.pl, Some(&mut rng));
        // project first: a noisy ρ_χ can map to a non-positive trace
        let rho_chi = mle_project(&invert_readout(&e, &cfg.pl)?);
        let chi_ideal = (CMat2::identity() - etas[k].scale(mi)) * psi_direct[k];
        let f_chi = fidelity(&rho_chi, &pure(&chi_ideal));
        let f_psi = fidelity(&mle_project(&chi_to_psi(&rho_chi, &etas[k])?), &pure(&psi_direct[k]));
        rows.push(TableRow { case: preset.id(), theta: thetas[k], f_chi, f_psi });
    }
    Ok(rows)
}

/// Direct integration, dilation, dilated evolution, and optionally pulse
/// synthesis and tomography for one preset. Writes artifacts when
/// `cfg.output.dir` is set.
pub fn run_preset(preset: Preset, cfg: &RunConfig) -> Result<CaseRun> {
    cfg.validate()?;
    let path = cfg.preset_path(preset);
    let direction = cfg.convention.resolve(preset.sense);
    let (mode, nh) = encircle_case_full(preset.start, direction, preset.init, &cfg.path, &cfg.integrator)?;
    let dil = Dilation::build(&path, &cfg.dilation, &cfg.integrator)?;
    let grid = cfg.integrator.sample_grid(0.0, path.period_t);
    let trace = dil.trace(&grid)?;
    let psi0 = preset.init.vector(&start_eigensystem(&path));
    let dtraj = dil.evolve(&psi0, None, &cfg.dilated_integrator())?;

    let mut identity = 0.0f64;
    for (&t, &pm) in dtraj.times.iter().zip(&dtraj.p_minus) {
        let (_, ln) = nh.at(t);
        let want = (2.0 * ln).exp() / (M0_SCALE * dil.gauge.g_at(t));
        identity = identity.max((pm - want).abs() / want);
    }

    let thetas = table_thetas();
    let times: Vec<f64> = thetas.iter().map(|&th| path.time_at(th)).collect();
    let mut recovery = Vec::new();
    let mut psi_direct = Vec::new();
    let mut etas = Vec::new();
    for (&theta, &t) in thetas.iter().zip(&times) {
        let direct = nh.at(t).0;
        let eta = dil.sample(t)?.eta;
        let (via_chi, via_minus) = recover_psi(&dtraj.at(t), &eta)?;
        recovery.push(RecoveryRow {
            theta,
            f_chi_route: direct.fidelity(&via_chi),
            f_minus_route: direct.fidelity(&via_minus),
        });
        psi_direct.push(direct);
        etas.push(eta);
    }

    let noisy = cfg.noise.enabled;
    let tomography = if cfg.tomography {
        let rhos = if noisy {
            let table = HsaTable::build(&dil, cfg.noise.steps)?;
            let start = dilate_initial_state(&psi0, dil.eta0());
            dephasing_replicas(&table, &start, &times, &cfg.noise, preset.index())?
        } else {
            times.iter().map(|&t| pure(&dtraj.at(t))).collect()
        };
        Some(tomography_rows(preset, cfg, &rhos, &psi_direct, &etas)?)
    } else {
        None
    };

    let waveform = cfg.synth.then(|| synth_pulses(&trace, &cfg.nv));
    let max_pulse_roundtrip = waveform.as_ref().map(|w| pulse_roundtrip_error(&trace, w)).transpose()?;

    let mut checks = vec![
        Check::at_least("final_overlap", mode.final_overlap, MODE_SWITCH_MIN),
        Check::at_least(
            "final_label_expected",
            (mode.final_label == Some(preset.expected_final())) as u8 as f64,
            1.0,
        ),
        Check::at_least("min_lmin_M_minus_I", trace.min_lmin_m_minus_i(), cfg.dilation.gauge.eps_floor),
        Check::at_most("max_lambda_gamma_asymmetry", trace.max_asymmetry(), crate::dilation::HERMITICITY_FAIL),
        Check::at_most("max_norm_drift", dtraj.max_norm_drift(), NORM_DRIFT_MAX),
        Check::at_most("p_minus_identity", identity, P_MINUS_IDENTITY_MAX),
        Check::at_least(
            "min_recovery_fidelity",
            recovery.iter().map(|r| r.f_chi_route).fold(1.0, f64::min),
            RECOVERY_MIN,
        ),
    ];
    if let Some(rows) = &tomography {
        let bound = if noisy || cfg.pl.shot_noise_sigma > 0.0 { NOISY_FIDELITY_MIN } else { RECOVERY_MIN };
        let worst = rows.iter().flat_map(|r| [r.f_chi, r.f_psi]).fold(1.0, f64::min);
        checks.push(Check::at_least("min_tomography_fidelity", worst, bound));
    }
    if let Some(err) = max_pulse_roundtrip {
        checks.push(Check::at_most("pulse_roundtrip", err, PULSE_ROUNDTRIP_MAX));
    }
    let passed = checks.iter().all(|c| c.passed);

    let mut run = CaseRun {
        report: CaseReport {
            case: preset,
            mode,
            min_lmin_m_minus_i: trace.min_lmin_m_minus_i(),
            min_p_minus: dtraj.min_p_minus(),
            max_asymmetry: trace.max_asymmetry(),
            max_norm_drift: dtraj.max_norm_drift(),
            max_p_minus_identity: identity,
            recovery,
            tomography,
            noisy,
            max_pulse_roundtrip,
            files: Vec::new(),
            checks,
            passed,
        },
        trace,
        waveform,
    };
    if let Some(dir) = &cfg.output.dir {
        write_case(&mut run, dir, &cfg.output.formats)?;
    }
    Ok(run)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Writes overlaps, dilation trace, waveform, tomography and the report
/// under `dir/<case id>/`.
pub fn write_case(run: &mut CaseRun, dir: &Path, formats: &[Format]) -> Result<()> {
    let id = run.report.case.id();
    let base = dir.join(&id);
    let mut files = Vec::new();
    let mut put = |name: &str| {
        files.push(format!("{id}/{name}"));
        base.join(name)
    };

    let mut w = create(&put("overlaps.csv"))?;
    run.report.mode.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&put("dilation.csv"))?;
    run.trace.write_csv(&mut w)?;
    w.flush()?;
    if let Some(rows) = &run.report.tomography {
        let mut w = create(&put("tomography.csv"))?;
        write_table_csv(&mut w, rows)?;
        w.flush()?;
    }
    if let Some(wave) = &run.waveform {
        for &f in formats {
            let name = match f {
                Format::Csv => "waveform.csv",
                Format::Json => "waveform.json",
            };
            export_waveform(wave, &put(name), f)?;
        }
    }
    let report_path = put("report.json");
    run.report.files = files;
    write_json(&report_path, &run.report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub cases: Vec<CaseReport>,
    pub table: Vec<TableRow>,
    pub mean_f_chi: f64,
    pub mean_f_psi: f64,
    pub passed: bool,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("workers: {e}")))
}

/// All eight presets with tomography; emits `table.csv` and `suite.json`.
pub fn run_suite(cfg: &RunConfig) -> Result<SuiteReport> {
    let mut cfg = cfg.clone();
    cfg.tomography = true;
    cfg.validate()?;
    let runs = pool(cfg.workers)?
        .install(|| Preset::ALL.par_iter().map(|&p| run_preset(p, &cfg)).collect::<Result<Vec<_>>>())?;
    let cases: Vec<CaseReport> = runs.into_iter().map(|r| r.report).collect();
    let table: Vec<TableRow> = cases.iter().flat_map(|c| c.tomography.clone().unwrap_or_default()).collect();
    let n = table.len().max(1) as f64;
    let report = SuiteReport {
        mean_f_chi: table.iter().map(|r| r.f_chi).sum::<f64>() / n,
        mean_f_psi: table.iter().map(|r| r.f_psi).sum::<f64>() / n,
        passed: cases.iter().all(|c| c.passed),
        cases,
        table,
    };
    if let Some(dir) = &cfg.output.dir {
        let mut w = create(&dir.join("table.csv"))?;
        write_table_csv(&mut w, &report.table)?;
        w.flush()?;
        write_json(&dir.join("suite.json"), &report)?;
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub theta: f64,
    pub delta: f64,
    pub g: f64,
    pub e_alpha: C64,
    pub e_beta: C64,
    /// `⟨ψ|H|ψ⟩/⟨ψ|ψ⟩` of the evolving state.
    pub e_psi: C64,
}

pub const TRAJECTORY_CSV_HEADER: &str = "t,theta,delta,g,reEalpha,imEalpha,reEbeta,imEbeta,reEpsi,imEpsi";

/// Instantaneous eigenvalues and the energy expectation of the evolving
/// state along one preset loop.
pub fn energy_trajectory(preset: Preset, cfg: &RunConfig) -> Result<Vec<TrajectoryPoint>> {
    let path = cfg.preset_path(preset);
    let direction = cfg.convention.resolve(preset.sense);
    let (_, nh) = encircle_case_full(preset.start, direction, preset.init, &cfg.path, &cfg.integrator)?;
    Ok(cfg
        .integrator
        .sample_grid(0.0, path.period_t)
        .into_iter()
        .map(|t| {
            let p: NhParams = crate::model::path_point(&path, t);
            let eig = eigensystem(&p);
            let psi = nh.at(t).0;
            let h = path.hamiltonian(t);
            let e_psi = psi.inner(&(h * psi)) / psi.norm_sqr();
            TrajectoryPoint { t, theta: path.theta(t), delta: p.delta, g: p.g, e_alpha: eig.e_alpha, e_beta: eig.e_beta, e_psi }
        })
        .collect())
}

pub fn write_trajectory_csv<W: Write>(mut w: W, points: &[TrajectoryPoint]) -> std::io::Result<()> {
    writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            p.t, p.theta, p.delta, p.g, p.e_alpha.re, p.e_alpha.im, p.e_beta.re, p.e_beta.im, p.e_psi.re, p.e_psi.im
        )?;
    }
    Ok(())
}

/// Sheet grid plus the trajectory of `preset` (default A-cw-alpha). Returns
/// the files written, or nothing without an output directory.
pub fn emit_riemann(cfg: &RunConfig, preset: Option<Preset>) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let preset = preset.or(cfg.preset).unwrap_or(Preset::ALL[0]);
    let r = &cfg.riemann;
    let sheet = riemann_sample(r.delta_range, r.g_range, r.n_delta, r.n_g, cfg.path.gamma);
    let traj = energy_trajectory(preset, cfg)?;
    let Some(dir) = &cfg.output.dir else { return Ok(Vec::new()) };
    let sheet_path = dir.join("riemann_sheet.csv");
    let traj_path = dir.join(format!("riemann_trajectory_{}.csv", preset.id()));
    let mut w = create(&sheet_path)?;
    write_sheet_csv(&mut w, &sheet)?;
    w.flush()?;
    let mut w = create(&traj_path)?;
    write_trajectory_csv(&mut w, &traj)?;
    w.flush()?;
    Ok(vec![sheet_path, traj_path])
}

fn random_density4(rng: &mut ChaCha8Rng) -> CMat4 {
    let mut g = CMat4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            g[(i, j)] = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    let p = g * g.adjoint();
    p.scale_re(1.0 / p.trace().re)
}

/// The model-level checks that do not need a full preset run.
pub fn verify_core(cfg: &RunConfig, seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    let ep = eigensystem(&NhParams { gamma: 1.0, delta: 0.0, g: 1.0 });
    checks.push(Check::at_most("ep_gap", (ep.e_alpha - ep.e_beta).norm(), 1e-12));
    let coalesced = CVec2::new([C64::new(1.0, 0.0), C64::new(0.0, -1.0)]).normalized();
    checks.push(Check::at_least("ep_vector_alignment", ep.v_alpha.fidelity(&coalesced), 1.0 - 1e-10));

    let one = quasistatic_track_loops(&cfg.path, 3600, 1)?;
    let two = quasistatic_track_loops(&cfg.path, 3600, 2)?;
    checks.push(Check::at_least("quasistatic_swap", one.swapped() as u8 as f64, 1.0));
    checks.push(Check::at_least("quasistatic_return", two.returned() as u8 as f64, 1.0));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut inv_err, mut lsq_err, mut mle_err) = (0.0f64, 0.0f64, 0.0f64);
    let mut unphysical = 0u32;
    for _ in 0..1000 {
        let rho = random_density4(&mut rng);
        let e = simulate_readout::<ChaCha8Rng>(&rho, &cfg.pl, None);
        let r = invert_readout(&e, &cfg.pl)?;
        inv_err = inv_err
            .max((r[(0, 0)] - rho[(0, 0)]).norm())
            .max((r[(1, 1)] - rho[(2, 2)]).norm())
            .max((r[(0, 1)] - rho[(0, 2)]).norm());
        lsq_err = lsq_err.max((lsq_invert(&e, &cfg.pl)? - r).max_abs());
        mle_err = mle_err.max((mle_project(&rho) - rho).max_abs());
        let noise = CMat4::from_flat(
            &(0..16).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect::<Vec<_>>(),
        )
        .hermitian_part();
        if !is_physical(&mle_project(&noise)) {
            unphysical += 1;
        }
    }
    checks.push(Check::at_most("readout_inversion", inv_err, 1e-10));
    checks.push(Check::at_most("lsq_agreement", lsq_err, 1e-8));
    checks.push(Check::at_most("mle_idempotence", mle_err, 1e-12));
    checks.push(Check::at_most("mle_unphysical_outputs", unphysical as f64, 0.0));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_ids_roundtrip() {
        for p in Preset::ALL {
            assert_eq!(p.id().parse::<Preset>().unwrap(), p);
            assert_eq!(Preset::ALL[p.index() as usize], p);
        }
        assert_eq!("A-cw-α".parse::<Preset>().unwrap(), Preset::ALL[0]);
        assert_eq!("b-CCW-β".parse::<Preset>().unwrap(), Preset::ALL[7]);
        assert!(matches!("C-cw-alpha".parse::<Preset>(), Err(Error::Config(_))));
        assert_eq!(Preset::ALL[5].id(), "B-cw-beta");
    }

    #[test]
    fn config_defaults_roundtrip_through_toml() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(RunConfig::from_toml_str("").unwrap(), cfg);
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_values() {
        let err = RunConfig::from_toml_str("schema_version = 1\n[path]\nradius = 0.5\nwobble = 2\n").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Config(_)) && msg.contains("wobble") && msg.contains("line"), "{msg}");
        assert!(matches!(RunConfig::from_toml_str("bogus = 1"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("schema_version = 2"), Err(Error::Config(_))));
        let msg = RunConfig::from_toml_str("[pl]\nl00 = 1.0").unwrap_err().to_string();
        assert!(msg.contains("pl"), "{msg}");
        assert!(matches!(RunConfig::from_toml_str("[noise]\nreplicas = 0"), Err(Error::Config(_))));
        let cfg = RunConfig::from_toml_str("preset = \"B-ccw-β\"\n[output]\nformats = [\"csv\", \"json\"]").unwrap();
        assert_eq!(cfg.preset, Some(Preset::ALL[7]));
        assert_eq!(cfg.output.formats, vec![Format::Csv, Format::Json]);
    }

    #[test]
    fn expected_finals_follow_the_switching_pattern() {
        let finals: Vec<_> = Preset::ALL.iter().map(|p| p.expected_final()).collect();
        use Label::*;
        assert_eq!(finals, vec![Beta, Beta, Alpha, Alpha, Alpha, Alpha, Alpha, Alpha]);
    }

    #[test]
    fn energy_trajectory_starts_at_prepared_eigenvalue() {
        let cfg = RunConfig::default();
        let traj = energy_trajectory(Preset::ALL[0], &cfg).unwrap();
        let first = traj[0];
        assert!((first.e_psi - first.e_alpha).norm() < 1e-12);
        let last = traj.last().unwrap();
        assert!((last.e_psi - last.e_beta).norm() < (last.e_psi - last.e_alpha).norm());
    }

    #[test]
    fn verify_core_passes() {
        for c in verify_core(&RunConfig::default(), 1).unwrap() {
            assert!(c.passed, "{c}");
        }
    }
}
