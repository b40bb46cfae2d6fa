//! Simulated eight-sequence PL tomography of a dilated state, inversion to
//! rho_chi, transform back to the system state, and the effect of shot noise.
//!
//!     cargo run --release --example tomography

use ep_encircle::dilation::{Dilation, DilationConfig};
use ep_encircle::dynamics::{encircle_case_full, start_eigensystem, table_thetas};
use ep_encircle::harness::{Preset, RunConfig};
use ep_encircle::tomolab::{
    chi_to_psi, fidelity, invert_readout, lsq_invert, mle_project, pure, replica_rng, simulate_readout, PlModel,
};
use rand_chacha::ChaCha8Rng;

fn main() -> ep_encircle::Result<()> {
    let preset: Preset = "B-ccw-alpha".parse()?;
    let cfg = RunConfig::default();
    let path = cfg.preset_path(preset);
    let dil = Dilation::build(&path, &DilationConfig::default(), &cfg.integrator)?;
    let psi0 = preset.init.vector(&start_eigensystem(&path));
    let traj = dil.evolve(&psi0, None, &cfg.integrator.with_tolerance_scale(0.01))?;
    let (_, direct) =
        encircle_case_full(preset.start, cfg.convention.resolve(preset.sense), preset.init, &cfg.path, &cfg.integrator)?;

    let clean = PlModel::default();
    let noisy = PlModel { shot_noise_sigma: 0.01 * clean.contrast(), ..clean };
    println!("{preset}, shot noise sigma {:.4}", noisy.shot_noise_sigma);
    println!("{:>6} {:>10} {:>10} {:>10}", "theta", "F_psi", "F_psi+SN", "lsq gap");
    for (k, th) in table_thetas().into_iter().enumerate() {
        let t = path.time_at(th);
        let rho4 = pure(&traj.at(t));
        let eta = dil.sample(t)?.eta;
        let target = pure(&direct.at(t).0);

        let e = simulate_readout::<ChaCha8Rng>(&rho4, &clean, None);
        let chi = invert_readout(&e, &clean)?;
        let gap = (lsq_invert(&e, &clean)? - chi).max_abs();
        let f = fidelity(&mle_project(&chi_to_psi(&chi, &eta)?), &target);

        let e = simulate_readout(&rho4, &noisy, Some(&mut replica_rng(1, 0, k as u64)));
        let chi = mle_project(&invert_readout(&e, &noisy)?);
        let f_sn = fidelity(&mle_project(&chi_to_psi(&chi, &eta)?), &target);
        println!("{th:>6.3} {f:>10.6} {f_sn:>10.6} {gap:>10.1e}");
    }
    Ok(())
}
