use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use optospring_cli::bundle::{write_error, Bundle, StageStatus};
use optospring_cli::sweep::write_sweep;
use optospring_cli::{run_scenario, sweep_parameter, CliError, ErrorRecord, Profile, Scenario, SweepParameter};

/// Optical-spring cold-damping simulator. Runs the gain-ladder scenario, or a
/// one-parameter sweep with --sweep, and writes a stamped artifact bundle.
#[derive(Debug, Parser)]
#[command(name = "optospring", version)]
struct Args {
    /// Scenario profile (TOML), merged over the built-in default.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "optospring-out")]
    out: PathBuf,
    /// Master seed; entry i uses seed XOR i.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Servo gain ladder in rad/s, replacing the profile's.
    #[arg(long, value_name = "G1,G2,...")]
    gains: Option<String>,
    /// Sweep one parameter instead of running the ladder.
    #[arg(long, value_name = "NAME=V1,V2,...")]
    sweep: Option<String>,
    /// Thermometry band in Hz.
    #[arg(long, value_name = "LO,HI", value_delimiter = ',', num_args = 1)]
    band: Option<Vec<f64>>,
    /// Evaluate the optical spring at every frequency instead of at resonance.
    #[arg(long)]
    exact_spring: bool,
}

fn parse_sweep(spec: &str) -> Result<(SweepParameter, Vec<f64>), CliError> {
    let (name, values) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Scenario(format!("--sweep expects NAME=V1,V2,..., got {spec:?}")))?;
    let parameter: SweepParameter = name.trim().parse()?;
    Ok((parameter, parse_list("--sweep", values)?))
}

fn parse_list(flag: &str, text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<f64>()
                .map_err(|e| CliError::Scenario(format!("{flag} value {v:?}: {e}")))
        })
        .collect()
}

fn resolve_profile(args: &Args) -> Result<Profile, CliError> {
    let mut profile = match &args.config {
        Some(path) => Profile::load(path)?,
        None => Profile::builtin(),
    };
    if let Some(seed) = args.seed {
        profile.seed = seed;
    }
    if let Some(gains) = &args.gains {
        profile.servo.gains_rad_s = parse_list("--gains", gains)?;
    }
    if let Some(band) = &args.band {
        let [lo, hi] = band[..] else {
            return Err(CliError::Scenario(format!(
                "--band expects LO,HI, got {} values",
                band.len()
            )));
        };
        profile.analysis.band_hz = [lo, hi];
    }
    if args.exact_spring {
        profile.servo.exact_spring = true;
    }
    Ok(profile)
}

fn run_sweep(profile: &Profile, spec: &str, out: &Path) -> Result<(), CliError> {
    let (parameter, values) = parse_sweep(spec)?;
    let rows = sweep_parameter(profile, parameter, &values)?;
    let mut bundle = Bundle::create(out, &profile.config_hash(), profile.seed)?;
    bundle.write_profile(&profile.to_toml())?;
    write_sweep(&mut bundle, parameter, &rows)?;
    bundle.stage("sweep", StageStatus::Ok, None);
    bundle.finish()?;
    let stable = rows.iter().filter(|r| r.mode.is_some()).count();
    println!(
        "sweep {}: {} values, {} stable -> {}",
        parameter.name(),
        rows.len(),
        stable,
        out.join("sweep.csv").display()
    );
    Ok(())
}

fn run(args: &Args) -> Result<(), (&'static str, CliError)> {
    let profile = resolve_profile(args).map_err(|e| ("profile", e))?;
    if let Some(spec) = &args.sweep {
        return run_sweep(&profile, spec, &args.out).map_err(|e| ("sweep", e));
    }
    let scenario = Scenario::new(profile, &args.out);
    let outcome = run_scenario(&scenario).map_err(|e| ("run", e))?;
    for e in &outcome.entries {
        let m = &e.mode;
        println!(
            "entry {:>2}  gain {:>10.3} rad/s  Q_eff {:>7.3}  T_eff {:.4e} K  x_rms(band) {:.3e} m",
            e.index, e.servo_gain_rad_s, m.q_eff, m.t_eff_k, e.band_x_rms_m
        );
    }
    let r = &outcome.report;
    println!(
        "cooling factor {:.0}  n_osc gain {:.1}  diluted Q {:.4e}  targets {}",
        r.cooling_factor,
        r.n_osc_gain,
        r.diluted_q,
        if r.pass { "met" } else { "not met" }
    );
    println!("bundle: {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err((stage, err)) => {
            eprintln!("error: {err}");
            let record = ErrorRecord::new(stage, &err);
            if let Err(io) = write_error(&args.out, &record) {
                eprintln!("error: could not write error record: {io}");
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
