//! NV-center realization of the dilated Hamiltonian: subspace levels,
//! carriers, two-channel microwave synthesis, the rotating-frame
//! reconstruction and a check of the rotating-wave approximation.
//!
//! Internal frequencies are rad·μs⁻¹. Basis order is
//! {|0,1⟩, |0,0⟩, |−1,1⟩, |−1,0⟩} (electron ⊗ nuclear): the electron state
//! |0⟩ is the system's index 0 and the nuclear |1⟩ the ancilla's index 0.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dilation::{DilationTrace, Dilation};
use crate::error::{Error, Result};
use crate::numerics::{integrate_ode, pauli, CMat2, CMat4, CVec2, CVec4, IntegratorConfig};

/// Electron gyromagnetic ratio (MHz/G).
pub const GAMMA_E_MHZ_PER_G: f64 = 2.8024;
/// ¹⁴N nuclear gyromagnetic ratio (kHz/G).
pub const GAMMA_N_KHZ_PER_G: f64 = 0.3077;
pub const FREQ_CHECK_TOL: f64 = 1e-9;
pub const MIN_SEPARATION: f64 = 20.0;

/// MHz → rad·μs⁻¹.
pub fn mhz(f: f64) -> f64 {
    2.0 * PI * f
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NvConstants {
    pub d_ghz: f64,
    pub q_mhz: f64,
    pub a_hf_mhz: f64,
    pub b_gauss: f64,
    /// Electron Zeeman frequency; derived from the field when absent.
    pub omega_e_ghz: Option<f64>,
    /// Nuclear Zeeman frequency; derived from the field when absent.
    pub omega_n_khz: Option<f64>,
}

impl Default for NvConstants {
    fn default() -> Self {
        Self { d_ghz: 2.87, q_mhz: -4.95, a_hf_mhz: -2.16, b_gauss: 500.0, omega_e_ghz: None, omega_n_khz: None }
    }
}

impl NvConstants {
    pub fn zero() -> Self {
        Self { d_ghz: 0.0, q_mhz: 0.0, a_hf_mhz: 0.0, b_gauss: 0.0, omega_e_ghz: Some(0.0), omega_n_khz: Some(0.0) }
    }

    pub fn omega_e_ghz(&self) -> f64 {
        self.omega_e_ghz.unwrap_or(GAMMA_E_MHZ_PER_G * self.b_gauss * 1e-3)
    }

    pub fn omega_n_khz(&self) -> f64 {
        self.omega_n_khz.unwrap_or(GAMMA_N_KHZ_PER_G * self.b_gauss)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_ghz > 0.0) {
            return Err(Error::Config(format!("D must be positive, got {}", self.d_ghz)));
        }
        if self.b_gauss > 0.0 && !(self.omega_e_ghz() > 0.0) {
            return Err(Error::Config("electron Zeeman frequency must be positive".into()));
        }
        Ok(())
    }
}

/// `H0 = π[−(D−ωe−A/2)σz⊗I + (Q+ωn−A/2)I⊗σz + (A/2)σz⊗σz]` in rad·μs⁻¹.
pub fn nv_subspace_h0(c: &NvConstants) -> CMat4 {
    let d = c.d_ghz * 1e3;
    let we = c.omega_e_ghz() * 1e3;
    let wn = c.omega_n_khz() * 1e-3;
    let a = c.a_hf_mhz;
    let z = pauli(3);
    let id = CMat2::identity();
    (z.kron(&id).scale_re(-(d - we - a / 2.0)) + id.kron(&z).scale_re(c.q_mhz + wn - a / 2.0)
        + z.kron(&z).scale_re(a / 2.0))
    .scale_re(PI)
}

/// `(ω_MW1, ω_MW2) = 2π(D − ωe − A, D − ωe)`.
pub fn carrier_freqs(c: &NvConstants) -> (f64, f64) {
    let base = c.d_ghz * 1e3 - c.omega_e_ghz() * 1e3;
    (mhz(base - c.a_hf_mhz), mhz(base))
}

fn atan2_or_zero(y: f64, x: f64) -> f64 {
    if y == 0.0 && x == 0.0 {
        0.0
    } else {
        y.atan2(x)
    }
}

/// One time slice of the two microwave channels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveformSample {
    pub t_us: f64,
    pub omega1: f64,
    #[serde(rename = "Omega1")]
    pub amp1: f64,
    pub phi1: f64,
    pub omega2: f64,
    #[serde(rename = "Omega2")]
    pub amp2: f64,
    pub phi2: f64,
}

pub fn synth_sample(t: f64, a: &[f64; 4], b: &[f64; 4], carriers: (f64, f64)) -> WaveformSample {
    let (x1, y1) = (a[1] + b[1], a[2] + b[2]);
    let (x2, y2) = (a[1] - b[1], a[2] - b[2]);
    WaveformSample {
        t_us: t,
        omega1: carriers.0 + 2.0 * a[3] + 2.0 * b[3],
        amp1: 2.0 * x1.hypot(y1),
        phi1: -atan2_or_zero(y1, x1),
        omega2: carriers.1 + 2.0 * a[3] - 2.0 * b[3],
        amp2: 2.0 * x2.hypot(y2),
        phi2: -atan2_or_zero(y2, x2),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseWaveform {
    pub constants: NvConstants,
    pub carriers: (f64, f64),
    pub samples: Vec<WaveformSample>,
}

pub fn synth_pulses(trace: &DilationTrace, c: &NvConstants) -> PulseWaveform {
    let carriers = carrier_freqs(c);
    let samples = trace.samples.iter().map(|s| synth_sample(s.t, &s.a, &s.bc, carriers)).collect();
    PulseWaveform { constants: *c, carriers, samples }
}

fn projector(a: usize) -> CMat2 {
    let mut p = CMat2::zeros();
    p[(a, a)] = C64::new(1.0, 0.0);
    p
}

/// Co-rotating drive of one channel, `(Ω/2)[cos φ σx − sin φ σy]` on the
/// electron, conditioned on the nuclear level `a`.
fn co_rotating(amp: f64, phi: f64, a: usize) -> CMat4 {
    (pauli(1).scale_re(phi.cos()) - pauli(2).scale_re(phi.sin())).scale_re(0.5 * amp).kron(&projector(a))
}

/// Counter-rotating remainder at carrier phase `big_phi`.
fn counter_rotating(amp: f64, phi: f64, big_phi: f64, a: usize) -> CMat4 {
    let arg = 2.0 * big_phi + phi;
    (pauli(1).scale_re(arg.cos()) + pauli(2).scale_re(arg.sin())).scale_re(0.5 * amp).kron(&projector(a))
}

/// Rotating-frame Hamiltonian under the rotating-wave approximation.
pub fn reconstruct_hrot(
    w: &WaveformSample,
    a0: f64,
    a3: f64,
    b0: f64,
    b3: f64,
    carriers: (f64, f64),
) -> Result<CMat4> {
    let expect = [carriers.0 + 2.0 * a3 + 2.0 * b3, carriers.1 + 2.0 * a3 - 2.0 * b3];
    for (ch, (got, want)) in [w.omega1, w.omega2].into_iter().zip(expect).enumerate() {
        if (got - want).abs() > FREQ_CHECK_TOL * want.abs().max(1.0) {
            return Err(Error::FrequencyMismatch {
                channel: ch as u8 + 1,
                detail: format!("omega = {got}, expected {want}"),
            });
        }
    }
    let z = pauli(3);
    let id = CMat2::identity();
    let diag = id.kron(&id).scale_re(a0) + z.kron(&id).scale_re(a3) + id.kron(&z).scale_re(b0) + z.kron(&z).scale_re(b3);
    Ok(diag + co_rotating(w.amp1, w.phi1, 0) + co_rotating(w.amp2, w.phi2, 1))
}

/// Largest `|Aᵢ|, |Bᵢ|` over the trace.
pub fn max_coefficient(trace: &DilationTrace) -> f64 {
    trace
        .samples
        .iter()
        .flat_map(|s| s.a.iter().chain(s.bc.iter()))
        .fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Compares rotating-frame evolution with and without the counter-rotating
/// terms. `coeffs(t)` returns the Pauli coefficients (A, B) of the target
/// Hamiltonian; the carriers are the already scaled ones. Returns the largest
/// infidelity over the output grid.
pub fn rwa_deficit<F>(coeffs: F, carriers: (f64, f64), psi0: &CVec4, span: (f64, f64), cfg: &IntegratorConfig) -> Result<f64>
where
    F: Fn(f64) -> ([f64; 4], [f64; 4]),
{
    let minus_i = C64::new(0.0, -1.0);
    let mut y0 = Vec::with_capacity(10);
    y0.extend_from_slice(psi0.as_slice());
    y0.extend_from_slice(psi0.as_slice());
    y0.extend_from_slice(&[C64::new(0.0, 0.0); 2]);
    let sol = integrate_ode(
        |t, y, dy| {
            let (a, b) = coeffs(t);
            let w = synth_sample(t, &a, &b, carriers);
            let z = pauli(3);
            let id = CMat2::identity();
            let h_rwa = id.kron(&id).scale_re(a[0]) + z.kron(&id).scale_re(a[3]) + id.kron(&z).scale_re(b[0])
                + z.kron(&z).scale_re(b[3])
                + co_rotating(w.amp1, w.phi1, 0)
                + co_rotating(w.amp2, w.phi2, 1);
            let (p1, p2) = (y[8].re, y[9].re);
            let h_full =
                h_rwa + counter_rotating(w.amp1, w.phi1, p1, 0) + counter_rotating(w.amp2, w.phi2, p2, 1);
            let d1 = h_rwa.scale(minus_i) * CVec4::from_slice(&y[0..4]);
            let d2 = h_full.scale(minus_i) * CVec4::from_slice(&y[4..8]);
            dy[0..4].copy_from_slice(d1.as_slice());
            dy[4..8].copy_from_slice(d2.as_slice());
            dy[8] = C64::new(w.omega1, 0.0);
            dy[9] = C64::new(w.omega2, 0.0);
        },
        &y0,
        span,
        cfg,
    )?;
    let mut worst = 0.0f64;
    for t in cfg.sample_grid(span.0, span.1) {
        let y = sol.eval(t);
        let f = CVec4::from_slice(&y[0..4]).fidelity(&CVec4::from_slice(&y[4..8]));
        worst = worst.max(1.0 - f);
    }
    Ok(worst.max(0.0))
}

/// RWA check of a dilation at carriers scaled by `carrier_scale`.
pub fn rwa_validate(
    dil: &Dilation,
    trace: &DilationTrace,
    psi0: &CVec2,
    c: &NvConstants,
    carrier_scale: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    if !(carrier_scale > 0.0 && carrier_scale <= 1.0) {
        return Err(Error::InvalidInput(format!("carrier_scale must lie in (0, 1], got {carrier_scale}")));
    }
    let (w1, w2) = carrier_freqs(c);
    let carriers = (w1 * carrier_scale, w2 * carrier_scale);
    let drive = max_coefficient(trace);
    let ratio = carriers.0.abs().min(carriers.1.abs()) / drive.max(f64::MIN_POSITIVE);
    if ratio < MIN_SEPARATION {
        return Err(Error::SeparationTooSmall { ratio, required: MIN_SEPARATION });
    }
    let psi_init = crate::dilation::dilate_initial_state(psi0, dil.eta0());
    // validated upfront by building the trace; a failing sample yields zeros
    let coeffs = |t: f64| dil.sample(t).map(|s| (s.a, s.bc)).unwrap_or(([0.0; 4], [0.0; 4]));
    rwa_deficit(coeffs, carriers, &psi_init, (0.0, dil.path.period_t), cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

pub const WAVEFORM_CSV_HEADER: &str = "t_us,omega1,Omega1,phi1,omega2,Omega2,phi2";
pub const SCHEMA_VERSION: &str = "1";

#[derive(Serialize, Deserialize)]
struct WaveformFile {
    schema_version: String,
    units: Units,
    constants: NvConstants,
    carriers: (f64, f64),
    samples: Vec<WaveformSample>,
}

#[derive(Serialize, Deserialize)]
struct Units {
    time: String,
    frequency: String,
    phase: String,
}

pub fn write_waveform_csv<W: Write>(mut out: W, w: &PulseWaveform) -> std::io::Result<()> {
    writeln!(out, "{WAVEFORM_CSV_HEADER}")?;
    for s in &w.samples {
        writeln!(out, "{},{},{},{},{},{},{}", s.t_us, s.omega1, s.amp1, s.phi1, s.omega2, s.amp2, s.phi2)?;
    }
    Ok(())
}

pub fn write_waveform_json<W: Write>(out: W, w: &PulseWaveform) -> Result<()> {
    let file = WaveformFile {
        schema_version: SCHEMA_VERSION.into(),
        units: Units { time: "us".into(), frequency: "rad/us".into(), phase: "rad".into() },
        constants: w.constants,
        carriers: w.carriers,
        samples: w.samples.clone(),
    };
    serde_json::to_writer_pretty(out, &file)?;
    Ok(())
}

pub fn export_waveform(w: &PulseWaveform, path: &Path, format: Format) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        Format::Csv => write_waveform_csv(&mut out, w)?,
        Format::Json => write_waveform_json(&mut out, w)?,
    }
    out.flush()?;
    Ok(())
}

pub fn import_waveform_json(path: &Path) -> Result<PulseWaveform> {
    let file: WaveformFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!("unsupported waveform schema version {}", file.schema_version)));
    }
    Ok(PulseWaveform { constants: file.constants, carriers: file.carriers, samples: file.samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dilation::DilationConfig;
    use crate::dynamics::{case_path, start_eigensystem, StartPoint};
    use crate::model::{Direction, PathSpec};
    use crate::numerics::uniform_grid;

    fn preset_trace(start: StartPoint, n: usize) -> (Dilation, DilationTrace) {
        let path = case_path(start, Direction::PositiveTheta, &PathSpec::default());
        let d = Dilation::build(&path, &DilationConfig::default(), &IntegratorConfig::default()).unwrap();
        let tr = d.trace(&uniform_grid(0.0, path.period_t, n)).unwrap();
        (d, tr)
    }

    #[test]
    fn h0_examples() {
        assert_eq!(nv_subspace_h0(&NvConstants::zero()), CMat4::zeros());
        let c = NvConstants::default();
        let h = nv_subspace_h0(&c);
        assert!(h.trace().norm() < 1e-9);
        let split = h[(2, 2)].re - h[(0, 0)].re;
        let expect = mhz(c.d_ghz * 1e3 - c.omega_e_ghz() * 1e3 - c.a_hf_mhz);
        assert!((split - expect).abs() < 1e-9 * expect);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(h[(i, j)], C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn carrier_examples() {
        let c = NvConstants { a_hf_mhz: 0.0, omega_e_ghz: Some(2.87), ..Default::default() };
        let (w1, w2) = carrier_freqs(&c);
        assert!(w1.abs() < 1e-9 && w2.abs() < 1e-9);
        let c = NvConstants::default();
        let (w1, w2) = carrier_freqs(&c);
        assert!((w2 - w1 - mhz(c.a_hf_mhz)).abs() < 1e-9);
        assert!((c.omega_e_ghz() - 1.4012).abs() < 1e-12);
        assert!((w1 / (2.0 * PI * 1e3) - 1.4710).abs() < 1e-4);
    }

    #[test]
    fn synth_examples() {
        let carriers = (100.0, 90.0);
        let w = synth_sample(0.0, &[0.0, 1.0, 0.0, 0.25], &[0.0; 4], carriers);
        assert_eq!((w.amp1, w.amp2, w.phi1, w.phi2), (2.0, 2.0, 0.0, 0.0));
        assert_eq!((w.omega1, w.omega2), (100.5, 90.5));
        let w = synth_sample(0.0, &[0.0, 0.0, 1.0, 0.0], &[0.0; 4], carriers);
        assert!((w.phi1 + PI / 2.0).abs() < 1e-15 && (w.phi2 + PI / 2.0).abs() < 1e-15);
        let w = synth_sample(0.0, &[0.0; 4], &[0.0; 4], carriers);
        assert_eq!((w.amp1, w.phi1, w.phi2), (0.0, 0.0, 0.0));
    }

    #[test]
    fn reconstruct_examples() {
        let zero = WaveformSample { t_us: 0.0, omega1: 0.0, amp1: 0.0, phi1: 0.0, omega2: 0.0, amp2: 0.0, phi2: 0.0 };
        assert_eq!(reconstruct_hrot(&zero, 0.0, 0.0, 0.0, 0.0, (0.0, 0.0)).unwrap(), CMat4::zeros());
        let bad = WaveformSample { omega1: 1.0, ..zero };
        assert!(matches!(
            reconstruct_hrot(&bad, 0.0, 0.0, 0.0, 0.0, (0.0, 0.0)),
            Err(Error::FrequencyMismatch { channel: 1, .. })
        ));
        let w = synth_sample(0.0, &[0.0, 0.3, -0.7, 0.0], &[0.0, 0.2, 0.1, 0.0], (0.0, 0.0));
        let h1 = reconstruct_hrot(&w, 0.0, 0.0, 0.0, 0.0, (0.0, 0.0)).unwrap();
        let w2 = WaveformSample { amp1: 2.0 * w.amp1, amp2: 2.0 * w.amp2, ..w };
        let h2 = reconstruct_hrot(&w2, 0.0, 0.0, 0.0, 0.0, (0.0, 0.0)).unwrap();
        assert!((h2 - h1.scale_re(2.0)).max_abs() < 1e-15);
    }

    #[test]
    fn roundtrip_on_preset_traces() {
        for start in [StartPoint::A, StartPoint::B] {
            let (_, tr) = preset_trace(start, 1501);
            let c = NvConstants::default();
            let w = synth_pulses(&tr, &c);
            for (s, ws) in tr.samples.iter().zip(&w.samples) {
                let h = reconstruct_hrot(ws, s.a[0], s.a[3], s.bc[0], s.bc[3], w.carriers).unwrap();
                assert!((h - s.hsa()).max_abs() <= 1e-10, "t={}", s.t);
                assert!(ws.amp1 >= 0.0 && ws.amp2 >= 0.0 && ws.phi1.is_finite() && ws.phi2.is_finite());
            }
            for pair in w.samples.windows(2) {
                let wrap = |d: f64| (d + PI).rem_euclid(2.0 * PI) - PI;
                assert!(wrap(pair[1].phi1 - pair[0].phi1).abs() < PI / 2.0);
                assert!(wrap(pair[1].phi2 - pair[0].phi2).abs() < PI / 2.0);
            }
        }
    }

    #[test]
    fn channel_symmetries() {
        let w = synth_sample(0.0, &[0.1, 0.4, -0.3, 0.0], &[0.7, 0.0, 0.0, 0.2], (50.0, 40.0));
        assert_eq!((w.amp1, w.phi1), (w.amp2, w.phi2));
        assert!(((w.omega1 - 50.0) + (w.omega2 - 40.0)).abs() < 1e-12);
    }

    #[test]
    fn rwa_zero_drive_is_exact() {
        let psi = crate::dilation::dilate_initial_state(&CVec2::basis(0), 0.5f64.sqrt());
        let coeffs = |_t: f64| ([0.2, 0.0, 0.0, 0.3], [0.1, 0.0, 0.0, -0.2]);
        let d = rwa_deficit(coeffs, (60.0, 55.0), &psi, (0.0, 3.0), &IntegratorConfig::default()).unwrap();
        assert!(d < 1e-12, "{d}");
    }

    #[test]
    fn rwa_constant_drive_bloch_siegert_scale() {
        // Ω = 2, carrier/drive = 100
        let psi = CVec2::basis(0).kron(&CVec2::basis(0));
        let coeffs = |_t: f64| ([0.0, 1.0, 0.0, 0.0], [0.0; 4]);
        let cfg = IntegratorConfig { samples: 301, ..Default::default() };
        let d = rwa_deficit(coeffs, (100.0, 100.0), &psi, (0.0, 5.0), &cfg).unwrap();
        assert!(d > 0.0 && d < 1e-3, "{d}");
    }

    #[test]
    fn rwa_on_preset_grows_as_carrier_shrinks() {
        let (d, tr) = preset_trace(StartPoint::A, 1501);
        let c = NvConstants::default();
        let psi0 = start_eigensystem(&d.path).v_alpha;
        let cfg = IntegratorConfig { samples: 301, ..Default::default() };
        let w1 = carrier_freqs(&c).0;
        let scale = 100.0 * max_coefficient(&tr) / w1;
        let hi = rwa_validate(&d, &tr, &psi0, &c, scale, &cfg).unwrap();
        let lo = rwa_validate(&d, &tr, &psi0, &c, scale / 2.0, &cfg).unwrap();
        assert!(lo > hi, "{lo} vs {hi}");
        assert!(matches!(
            rwa_validate(&d, &tr, &psi0, &c, scale / 10.0, &cfg),
            Err(Error::SeparationTooSmall { .. })
        ));
    }

    #[test]
    fn export_formats() {
        let dir = tempfile::tempdir().unwrap();
        let empty = PulseWaveform { constants: NvConstants::default(), carriers: (1.0, 2.0), samples: vec![] };
        let p = dir.path().join("empty.csv");
        export_waveform(&empty, &p, Format::Csv).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), format!("{WAVEFORM_CSV_HEADER}\n"));

        let (_, tr) = preset_trace(StartPoint::B, 1501);
        let w = synth_pulses(&tr, &NvConstants::default());
        let p = dir.path().join("w.csv");
        export_waveform(&w, &p, Format::Csv).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 1 + tr.samples.len());
        let p = dir.path().join("w.json");
        export_waveform(&w, &p, Format::Json).unwrap();
        let back = import_waveform_json(&p).unwrap();
        assert_eq!(back, w);
        for (a, b) in back.samples.iter().zip(&w.samples) {
            assert_eq!(a.phi1.to_bits(), b.phi1.to_bits());
            assert_eq!(a.omega2.to_bits(), b.omega2.to_bits());
        }
    }
}
