//! Sample the two eigenvalue sheets around the EP, then overlay the energy
//! expectation of an evolving state. Writes CSVs to the given directory.
//!
//!     cargo run --release --example riemann -- out/riemann

use std::path::PathBuf;

use ep_encircle::harness::{emit_riemann, energy_trajectory, Preset, RunConfig};
use ep_encircle::model::{eigensystem, NhParams};

fn main() -> ep_encircle::Result<()> {
    let dir: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "out/riemann".into()).into();

    let ep = eigensystem(&NhParams::new(0.0, 1.0));
    println!("at the EP: E = {} and {}, phase {:?}", ep.e_alpha, ep.e_beta, ep.phase);
    for g in [0.5, 1.5] {
        let e = eigensystem(&NhParams::new(0.0, g));
        println!("g = {g}: E_alpha = {:.5}, E_beta = {:.5} ({:?})", e.e_alpha, e.e_beta, e.phase);
    }

    let mut cfg = RunConfig::default();
    cfg.output.dir = Some(dir);
    for p in ["A-cw-alpha", "A-ccw-alpha"] {
        let preset: Preset = p.parse()?;
        let files = emit_riemann(&cfg, Some(preset))?;
        let traj = energy_trajectory(preset, &cfg)?;
        let (first, last) = (traj[0], traj[traj.len() - 1]);
        println!(
            "{p}: <H> goes {:.4} -> {:.4} (E_alpha {:.4}, E_beta {:.4})",
            first.e_psi, last.e_psi, last.e_alpha, last.e_beta
        );
        for f in files {
            println!("  wrote {}", f.display());
        }
    }
    Ok(())
}
