//! The full 8-case fidelity table with quasi-static electron dephasing.
//!
//!     cargo run --release --example noisy_suite -- [replicas] [out dir]

use ep_encircle::harness::{run_suite, RunConfig};

fn main() -> ep_encircle::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = RunConfig::default();
    cfg.noise.enabled = true;
    if let Some(n) = args.next() {
        cfg.noise.replicas = n.parse().map_err(|_| ep_encircle::Error::Config(format!("bad replica count {n}")))?;
    }
    cfg.output.dir = args.next().map(Into::into);

    let suite = run_suite(&cfg)?;
    println!("T2* = {} us, {} replicas, sigma = {:.4} rad/us", cfg.noise.t2_star, cfg.noise.replicas, cfg.noise.sigma());
    print!("{:>6}", "theta");
    for c in &suite.cases {
        print!(" {:>12}", c.case.id());
    }
    println!();
    for k in 0..7 {
        let row: Vec<_> = suite.cases.iter().map(|c| &c.tomography.as_ref().unwrap()[k]).collect();
        print!("{:>6.3}", row[0].theta);
        for r in &row {
            print!("  {:.3}/{:.3}", r.f_chi, r.f_psi);
        }
        println!();
    }
    println!("mean F_chi {:.4}, mean F_psi {:.4}", suite.mean_f_chi, suite.mean_f_psi);
    for c in suite.cases.iter().filter(|c| !c.passed) {
        for k in c.checks.iter().filter(|k| !k.passed) {
            println!("{}: {k}", c.case);
        }
    }
    Ok(())
}
