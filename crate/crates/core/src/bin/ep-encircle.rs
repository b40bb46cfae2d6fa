use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ep_encircle::harness::{self, CaseReport, Check, Preset, RunConfig};
use ep_encircle::nvcontrol::Format;
use ep_encircle::Error;

#[derive(Parser)]
#[command(name = "ep-encircle", version, about = "Encircling an exceptional point: direct, dilated and NV-pulse simulations")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Case id such as A-cw-alpha or B-ccw-β
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Enable quasi-static dephasing
    #[arg(long, global = true, overrides_with = "no_noise")]
    noise: bool,
    #[arg(long = "no-noise", global = true)]
    no_noise: bool,
    #[arg(long, global = true, value_enum)]
    format: Option<Fmt>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fmt {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Direct and dilated evolution of one case
    Encircle,
    /// All eight cases with the tomography fidelity table
    Suite,
    /// Eigenvalue sheets and the energy trajectory of one case
    Riemann,
    /// Microwave waveform of one case
    Synth,
    /// Simulated tomography of one case
    Tomo,
    /// Oracle and property checks plus the noiseless suite
    Verify,
}

fn config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &cli.preset {
        cfg.preset = Some(p.parse()?);
    }
    if let Some(s) = cli.seed {
        cfg.noise.seed = s;
    }
    if cli.noise {
        cfg.noise.enabled = true;
    }
    if cli.no_noise {
        cfg.noise.enabled = false;
    }
    if let Some(f) = cli.format {
        cfg.output.formats = vec![match f {
            Fmt::Csv => Format::Csv,
            Fmt::Json => Format::Json,
        }];
    }
    cfg.output.dir = Some(cli.out.clone());
    cfg.validate()?;
    Ok(cfg)
}

fn print_case(r: &CaseReport) {
    let label = r.mode.final_label.map_or("indeterminate".to_string(), |l| l.to_string());
    println!(
        "{}: final {} (overlap {:.4}), min P- {:.3e}, min lmin(M-I) {:.3e}  {}",
        r.case,
        label,
        r.mode.final_overlap,
        r.min_p_minus,
        r.min_lmin_m_minus_i,
        r.status()
    );
    for c in &r.checks {
        println!("  {c}");
    }
}

fn one(cfg: &RunConfig) -> Preset {
    cfg.preset.unwrap_or(Preset::ALL[0])
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let mut cfg = config(cli)?;
    match cli.cmd {
        Cmd::Encircle => {
            cfg.tomography = false;
            cfg.synth = false;
            let r = harness::run_preset(one(&cfg), &cfg)?.report;
            print_case(&r);
            Ok(r.passed)
        }
        Cmd::Synth => {
            cfg.tomography = false;
            cfg.synth = true;
            let r = harness::run_preset(one(&cfg), &cfg)?.report;
            for f in r.files.iter().filter(|f| f.contains("waveform")) {
                println!("wrote {}", cfg.output.dir.as_ref().unwrap().join(f).display());
            }
            print_case(&r);
            Ok(r.passed)
        }
        Cmd::Tomo => {
            cfg.tomography = true;
            cfg.synth = false;
            let r = harness::run_preset(one(&cfg), &cfg)?.report;
            println!("{}", harness::TABLE_CSV_HEADER);
            for row in r.tomography.iter().flatten() {
                println!("{},{},{},{}", row.case, row.theta, row.f_chi, row.f_psi);
            }
            print_case(&r);
            Ok(r.passed)
        }
        Cmd::Suite => {
            let s = harness::run_suite(&cfg)?;
            for r in &s.cases {
                print_case(r);
            }
            println!("mean F_chi {:.6}, mean F_psi {:.6}", s.mean_f_chi, s.mean_f_psi);
            println!("wrote {}", cfg.output.dir.as_ref().unwrap().join("table.csv").display());
            Ok(s.passed)
        }
        Cmd::Riemann => {
            for p in harness::emit_riemann(&cfg, None)? {
                println!("wrote {}", p.display());
            }
            Ok(true)
        }
        Cmd::Verify => {
            cfg.noise.enabled = false;
            let mut checks: Vec<Check> = harness::verify_core(&cfg, cfg.noise.seed)?;
            let s = harness::run_suite(&cfg)?;
            for r in &s.cases {
                checks.extend(r.checks.iter().map(|c| Check { name: format!("{}/{}", r.case, c.name), ..c.clone() }));
            }
            for c in &checks {
                println!("{c}");
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
