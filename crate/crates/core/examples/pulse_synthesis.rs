//! Turn the dilated Hamiltonian of one loop into two microwave channels for
//! the NV electron spin, export them, and check the rotating-wave picture.
//!
//!     cargo run --release --example pulse_synthesis -- out/pulses

use std::path::PathBuf;

use ep_encircle::dilation::{Dilation, DilationConfig};
use ep_encircle::dynamics::start_eigensystem;
use ep_encircle::harness::{pulse_roundtrip_error, Preset, RunConfig};
use ep_encircle::nvcontrol::{carrier_freqs, export_waveform, max_coefficient, rwa_validate, synth_pulses, Format, NvConstants};

fn main() -> ep_encircle::Result<()> {
    let dir: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "out/pulses".into()).into();
    std::fs::create_dir_all(&dir)?;
    let preset: Preset = "A-cw-alpha".parse()?;
    let cfg = RunConfig::default();
    let path = cfg.preset_path(preset);
    let dil = Dilation::build(&path, &DilationConfig::default(), &cfg.integrator)?;
    let trace = dil.trace(&cfg.integrator.sample_grid(0.0, path.period_t))?;

    let nv = NvConstants::default();
    let (w1, w2) = carrier_freqs(&nv);
    println!("carriers: {:.4} and {:.4} rad/us, largest drive coefficient {:.3}", w1, w2, max_coefficient(&trace));

    let wave = synth_pulses(&trace, &nv);
    println!("roundtrip error {:.2e}", pulse_roundtrip_error(&trace, &wave)?);
    for s in wave.samples.iter().step_by(250) {
        println!(
            "  t {:>5.2}  Omega1 {:>7.4} phi1 {:>+7.4}  Omega2 {:>7.4} phi2 {:>+7.4}",
            s.t_us, s.amp1, s.phi1, s.amp2, s.phi2
        );
    }
    export_waveform(&wave, &dir.join("waveform.csv"), Format::Csv)?;
    export_waveform(&wave, &dir.join("waveform.json"), Format::Json)?;
    println!("wrote {}", dir.display());

    // RWA deficit at artificially low carriers, shrinking as they grow
    let psi0 = preset.init.vector(&start_eigensystem(&path));
    let toy = NvConstants { omega_e_ghz: Some(0.0), b_gauss: 0.0, ..nv };
    let coarse = cfg.integrator.with_tolerance_scale(100.0);
    for scale in [0.4, 0.7, 1.0] {
        match rwa_validate(&dil, &trace, &psi0, &toy, scale * 0.02, &coarse) {
            Ok(d) => println!("carrier scale {scale}: RWA infidelity {d:.2e}"),
            Err(e) => println!("carrier scale {scale}: {e}"),
        }
    }
    Ok(())
}
