//! Build the Hermitian dilation of one loop and follow the metric, the gauge
//! and the ancilla postselection probability.
//!
//!     cargo run --release --example dilation_trace -- B-cw-beta

use ep_encircle::dilation::{recover_psi, Dilation, DilationConfig};
use ep_encircle::dynamics::{encircle_case_full, start_eigensystem};
use ep_encircle::harness::{Preset, RunConfig};

fn main() -> ep_encircle::Result<()> {
    let preset: Preset = std::env::args().nth(1).as_deref().unwrap_or("B-cw-beta").parse()?;
    let cfg = RunConfig::default();
    let path = cfg.preset_path(preset);

    let dil = Dilation::build(&path, &DilationConfig::default(), &cfg.integrator)?;
    let psi0 = preset.init.vector(&start_eigensystem(&path));
    let traj = dil.evolve(&psi0, None, &cfg.integrator.with_tolerance_scale(0.01))?;
    let (_, direct) =
        encircle_case_full(preset.start, cfg.convention.resolve(preset.sense), preset.init, &cfg.path, &cfg.integrator)?;

    println!("{preset}: min P- = {:.3e}, norm drift {:.1e}", traj.min_p_minus(), traj.max_norm_drift());
    println!("{:>6} {:>9} {:>8} {:>11} {:>10} {:>9}", "t", "b", "ln G", "lmin(M-I)", "P-", "fidelity");
    for k in 0..=15 {
        let t = k as f64;
        let s = dil.sample(t)?;
        let big = traj.at(t);
        let (psi, _) = recover_psi(&big, &s.eta)?;
        let f = psi.fidelity(&direct.at(t).0);
        println!(
            "{t:>6.1} {:>9.4} {:>8.3} {:>11.4e} {:>10.3e} {:>9.6}",
            s.b,
            s.ln_g,
            s.lmin_m_minus_i,
            ep_encircle::dilation::p_minus(&big),
            f
        );
    }

    let trace = dil.trace(&cfg.integrator.sample_grid(0.0, path.period_t))?;
    println!("Lambda/Gamma asymmetry over {} samples: {:.2e}", trace.samples.len(), trace.max_asymmetry());
    Ok(())
}
