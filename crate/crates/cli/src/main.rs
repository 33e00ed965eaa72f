use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use photodiss::experiment::{
    fit_saturation, read_series, run_single, scan_coupling, scan_frequency, write_popes, write_spectral_density,
    ExperimentConfig, Overrides, PointOutcome, ScanPoint,
};
use photodiss::units::hartree_to_ev;
use photodiss::Error;

#[derive(Parser, Debug)]
#[command(name = "photodiss", version, about = "Plasmon-induced photodissociation: runs, scans and fits")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML experiment file; built-in defaults when absent
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides run.output_dir)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Plasmon energy in eV
    #[arg(long = "omega-p", global = true, value_name = "EV")]
    omega_p: Option<f64>,
    /// Single-photon field in mV/bohr
    #[arg(long = "e1ph", global = true, value_name = "MV_PER_BOHR")]
    e_1ph: Option<f64>,
    /// Plasmon linewidth in eV
    #[arg(long, global = true, value_name = "EV")]
    kappa: Option<f64>,
    /// Propagation time in fs
    #[arg(long = "t-final", global = true, value_name = "FS")]
    t_final: Option<f64>,
    /// Worker threads (0: one per core)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print the effective configuration with the origin of each value and exit
    #[arg(long = "print-config", global = true)]
    print_config: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Propagate one trajectory
    Run,
    /// One trajectory per plasmon energy in scan.omega_p, plus the kappa_B* map
    ScanFreq,
    /// Final dissociation over scan.e_1ph x scan.omega_p
    ScanCoupling,
    /// Polaritonic potential curves and induced decay rate
    Popes,
    /// Nanosphere spectral density and its pseudomode fit
    SpectralDensity,
    /// Fit an exponential saturation curve to a dissociation time series
    FitSat(FitSatArgs),
}

#[derive(Args, Debug)]
struct FitSatArgs {
    /// Trajectory CSV; <out>/trajectory.csv by default
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Value column; pd_total sums all pd_* columns
    #[arg(long, default_value = "pd_total")]
    column: String,
    /// Start of the fit window in fs (overrides scan.fit_start)
    #[arg(long, value_name = "FS")]
    start: Option<f64>,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() || matches!(e, Error::FitQuality(_)) {
        3
    } else {
        2
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(&Overrides {
        omega_p: common.omega_p,
        e_1ph: common.e_1ph,
        kappa: common.kappa,
        t_final: common.t_final,
        threads: common.threads,
        output_dir: common.out.clone(),
    })?;
    Ok(cfg)
}

fn report_failures(points: &[ScanPoint]) -> u8 {
    let mut code = 0;
    for p in points {
        if let PointOutcome::Failed { message, numerical } = &p.outcome {
            let numerical = *numerical;
            eprintln!("point omega_p = {} eV, E_1ph = {} mV/bohr failed: {message}", p.omega_p, p.e_1ph);
            code = code.max(if numerical { 3 } else { 2 });
        }
    }
    code
}

fn execute(cli: &Cli, cfg: &ExperimentConfig) -> Result<u8, Error> {
    let out: &Path = &cfg.run.output_dir;
    match &cli.command {
        Command::Run => {
            let run = run_single(cfg)?;
            run.write(out)?;
            let s = &run.record.summary;
            println!(
                "t = {} fs  P_D [X0 B0 X1] = [{:.6} {:.6} {:.6}]  P_A = [{:.6} {:.6} {:.6}]  max |trace deficit| = {:.2e}",
                s.t_final_fs,
                s.dissipated[0],
                s.dissipated[1],
                s.dissipated[2],
                s.active[0],
                s.active[1],
                s.active[2],
                s.max_abs_trace_deficit
            );
            Ok(0)
        }
        Command::ScanFreq => {
            let scan = scan_frequency(cfg)?;
            scan.write(out)?;
            println!("{} frequencies, {} failed", scan.points.len(), scan.failures());
            Ok(report_failures(&scan.points))
        }
        Command::ScanCoupling => {
            let scan = scan_coupling(cfg)?;
            scan.write(out)?;
            println!("{} grid points, {} failed", scan.points.len(), scan.failures());
            Ok(report_failures(&scan.points))
        }
        Command::Popes => {
            let setup = write_popes(cfg, out)?;
            let ex = setup.molecule.excitation_energy();
            println!(
                "min omega_m = {:.4} eV at R = {:.3} bohr; omega_p = {} eV",
                hartree_to_ev(ex.min),
                ex.argmin,
                setup.mode.omega_p
            );
            Ok(0)
        }
        Command::SpectralDensity => {
            let report = write_spectral_density(cfg, out)?;
            match &report.mode {
                Ok(m) => {
                    println!(
                        "omega_p = {:.4} eV  kappa = {:.4} eV  E_1ph = {:.2} mV/bohr  tau = {:.3} fs  V = {:.2} nm^3",
                        m.omega_p, m.kappa, m.e_1ph, m.tau, m.mode_volume
                    );
                    Ok(0)
                }
                Err(msg) => {
                    eprintln!("pseudomode fit rejected: {msg}");
                    Ok(3)
                }
            }
        }
        Command::FitSat(args) => {
            let input = args.input.clone().unwrap_or_else(|| out.join("trajectory.csv"));
            let (t, v) = read_series(&input, "time_fs", &args.column)?;
            let fit = fit_saturation(&t, &v, args.start.or(cfg.scan.fit_start))?;
            let body = serde_json::to_string_pretty(&fit).map_err(|e| Error::Format(e.to_string()))?;
            println!("{body}");
            std::fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
            let path = out.join("saturation.json");
            std::fs::write(&path, body + "\n").map_err(|e| io_error(&path, e))?;
            Ok(0)
        }
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.common.print_config {
        print!("{}", cfg.annotated());
        return ExitCode::SUCCESS;
    }
    match execute(&cli, &cfg) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
