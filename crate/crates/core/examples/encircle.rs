//! Dynamically encircle the EP from both start points, in both senses, from
//! both eigenstates, and print where each run ends up.
//!
//!     cargo run --release --example encircle

use ep_encircle::dynamics::{encircle_case, table_thetas};
use ep_encircle::harness::Preset;
use ep_encircle::model::{DirectionConvention, PathSpec};
use ep_encircle::numerics::IntegratorConfig;

fn main() -> ep_encircle::Result<()> {
    let path = PathSpec::default();
    let integ = IntegratorConfig::default();
    let conv = DirectionConvention::default();

    println!("{:<12} {:>8} {:>8}  final", "case", "|<a|psi>|", "|<b|psi>|");
    for p in Preset::ALL {
        let r = encircle_case(p.start, conv.resolve(p.sense), p.init, &path, &integ)?;
        let (oa, ob) = r.final_overlaps;
        let label = r.final_label.map_or("?".into(), |l| l.symbol().to_string());
        println!("{:<12} {oa:>8.4} {ob:>8.4}  {label}  (log-norm {:+.2})", p.id(), r.final_log_norm);
    }

    // overlap history of one asymmetric case at the tomography angles
    let p: Preset = "A-cw-alpha".parse()?;
    let r = encircle_case(p.start, conv.resolve(p.sense), p.init, &path, &integ)?;
    println!("\n{p}");
    for (th, s) in table_thetas().iter().zip(&r.table) {
        println!("  theta {:>5.3}  alpha {:.4}  beta {:.4}", th, s.overlap_alpha, s.overlap_beta);
    }
    Ok(())
}
