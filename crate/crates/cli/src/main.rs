use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use chancust::analysis::{
    crossing_point, crossing_point_closed_form, se_bf_upper, se_db_upper, se_sm_approx, se_sm_upper, ClosedFormParams,
};
use chancust::config::{db_to_linear, watts_to_dbm};
use chancust::geometry::{deployment_at, RX_CENTER};
use chancust::montecarlo::{
    estimate_ber, estimate_ergodic_se, estimate_outage, with_threads, CompanionProfile, Execution,
};
use chancust::report::to_csv_string;
use chancust::selftest::run_selftest;
use chancust::{Error, Scheme, SweepAxis, SweepResult, SystemConfig, TrialPlan};
use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_OTHER: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;
const EXIT_NO_CROSSING: u8 = 5;
const EXIT_IO: u8 = 6;

/// RIS-assisted MIMO channel customization: Monte Carlo sweeps and closed forms.
#[derive(Parser, Debug)]
#[command(name = "chancust", version)]
struct Cli {
    /// TOML configuration file; missing keys take their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override a configuration key, e.g. `--set rician_kappa=5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Shortcut for `--set n_rx=N`.
    #[arg(long, global = true, value_name = "N")]
    n_rx: Option<usize>,

    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Ergodic spectral efficiency with closed-form companion columns.
    SeSweep(SweepArgs),
    /// Bit error rate of Gray-coded QPSK with Wilson intervals.
    BerSweep {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Minimum number of bits per scheme and grid point.
        #[arg(long, default_value_t = 100_000)]
        min_bits: u64,
    },
    /// Outage probability against the SNR threshold.
    OutageSweep(SweepArgs),
    /// Transmit power where the SM and BF upper bounds cross.
    CrossingPoint {
        #[arg(long, value_enum, default_value_t = Profile::Equal)]
        profile: Profile,
    },
    /// Closed-form quantities at the configured operating point.
    Analyze {
        #[arg(long, value_enum, default_value_t = Profile::Equal)]
        profile: Profile,
        /// Print the effective configuration as TOML (to FILE if given) and exit.
        #[arg(long, value_name = "FILE", num_args = 0..=1, default_missing_value = "-")]
        dump_config: Option<PathBuf>,
    },
    /// Quick invariant checks.
    Selftest,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Comma-separated schemes: sm, bf, ds, db, ds:M, db:M.
    #[arg(long, value_delimiter = ',', default_value = "sm", value_parser = parse_scheme)]
    scheme: Vec<Scheme>,

    /// Swept parameter as `name=start:step:stop` or `name=value`.
    #[arg(long, default_value = "E_dBm=0:5:40", value_parser = parse_axis)]
    axis: SweepAxis,

    #[arg(long, default_value_t = 200)]
    angle_epochs: usize,

    #[arg(long, default_value_t = 10)]
    fading_epochs: usize,

    /// Outage threshold in dB.
    #[arg(long, default_value_t = 10.0)]
    gamma_th_db: f64,

    /// Scale profile behind the closed-form columns.
    #[arg(long, value_enum, default_value_t = Profile::Deployment)]
    profile: Profile,

    /// Base seed; defaults to `rng_seed` of the configuration.
    #[arg(long)]
    seed: Option<u64>,

    /// Limit on the exhaustive path search.
    #[arg(long, default_value_t = chancust::customization::DEFAULT_SEARCH_CAP)]
    search_cap: u64,

    /// Run trials on the calling thread only.
    #[arg(long)]
    sequential: bool,

    /// CSV destination; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Profile {
    /// Every RIS at `N_S rho = C`.
    Equal,
    /// Realized deployments (the disk center for the analytic verbs).
    Deployment,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.trim().parse::<Scheme>().map_err(|e| e.to_string())
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse::<SweepAxis>().map_err(|e| e.to_string())
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::Domain(_) => EXIT_CONFIG,
            Error::InvalidArgument(_) => EXIT_USAGE,
            Error::Infeasible(_) | Error::SearchTooLarge { .. } => EXIT_INFEASIBLE,
            Error::NoCrossing { .. } => EXIT_NO_CROSSING,
            Error::Io(_) => EXIT_IO,
            _ => EXIT_OTHER,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: EXIT_IO,
            message: e.to_string(),
        }
    }
}

fn load_config(cli: &Cli) -> Result<SystemConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => SystemConfig::from_file(path).map_err(|e| match e {
            Error::Io(io) => Failure {
                code: EXIT_IO,
                message: format!("{}: {io}", path.display()),
            },
            other => other.into(),
        })?,
        None => SystemConfig::default(),
    };
    for o in &cli.overrides {
        cfg.apply_assignment(o)?;
    }
    if let Some(n) = cli.n_rx {
        cfg.n_rx = n;
    }
    Ok(cfg)
}

fn plan_for(sweep: &SweepArgs, cfg: &SystemConfig) -> TrialPlan {
    let mut plan = TrialPlan::new(sweep.axis.clone(), sweep.scheme.clone(), sweep.seed.unwrap_or(cfg.rng_seed));
    plan.n_angle_epochs = sweep.angle_epochs;
    plan.n_fading_epochs = sweep.fading_epochs;
    plan.gamma_th = db_to_linear(sweep.gamma_th_db);
    plan.search_cap = sweep.search_cap;
    plan.profile = match sweep.profile {
        Profile::Equal => CompanionProfile::Equal,
        Profile::Deployment => CompanionProfile::Deployment,
    };
    if sweep.sequential {
        plan.execution = Execution::Sequential;
    }
    plan
}

fn emit(result: &SweepResult, output: Option<&PathBuf>) -> Result<(), Failure> {
    match output {
        Some(path) => chancust::report::write_csv(result, path)?,
        None => std::io::stdout().write_all(to_csv_string(result)?.as_bytes())?,
    }
    Ok(())
}

fn closed_form_params(cfg: &SystemConfig, profile: Profile) -> Result<ClosedFormParams, Failure> {
    Ok(match profile {
        Profile::Equal => ClosedFormParams::equal_scale(cfg),
        Profile::Deployment => {
            let dep = deployment_at(cfg, RX_CENTER)?;
            let active = ClosedFormParams::strongest_subset(&dep, cfg.n_rx);
            ClosedFormParams::from_deployment(cfg, &dep, &active)
        }
    })
}

fn crossing(cfg: &SystemConfig, profile: Profile) -> Result<(), Failure> {
    cfg.validate()?;
    let params = closed_form_params(cfg, profile)?;
    let e_th = crossing_point(&params)?;
    println!("E_th = {e_th:.9e} W ({:.4} dBm)", watts_to_dbm(e_th));
    match crossing_point_closed_form(&params)? {
        Some(explicit) => println!(
            "closed form = {explicit:.9e} W, relative delta = {:.3e}",
            ((e_th - explicit) / explicit).abs()
        ),
        None => println!("closed form unavailable for n_rx = {}", cfg.n_rx),
    }
    Ok(())
}

fn analyze(cfg: &SystemConfig, profile: Profile) -> Result<(), Failure> {
    cfg.validate()?;
    let params = closed_form_params(cfg, profile)?;
    let c = params.c_values();
    println!("E = {:.6e} W ({:.3} dBm)", cfg.transmit_power, watts_to_dbm(cfg.transmit_power));
    let list: Vec<String> = c.iter().map(|v| format!("{v:.6e}")).collect();
    println!("stream constants c = [{}]", list.join(", "));
    println!("sm approx = {:.6} bits/s/Hz", se_sm_approx(&c)?);
    println!("sm upper = {:.6} bits/s/Hz", se_sm_upper(&c)?);
    println!("bf upper = {:.6} bits/s/Hz", se_bf_upper(&params)?);
    println!("db upper (m_r = {}) = {:.6} bits/s/Hz", cfg.m_r, se_db_upper(&params, cfg.m_r)?);
    match crossing_point(&params) {
        Ok(e) => println!("crossing point = {e:.6e} W ({:.4} dBm)", watts_to_dbm(e)),
        Err(Error::NoCrossing { .. }) => println!("crossing point = none"),
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn dump_config(cfg: &SystemConfig, path: &PathBuf) -> Result<(), Failure> {
    let text = cfg.to_toml_string();
    if path.as_os_str() == "-" {
        print!("{text}");
    } else {
        std::fs::write(path, text)?;
    }
    Ok(())
}

fn selftest(cfg: &SystemConfig) -> Result<(), Failure> {
    let checks = run_selftest(cfg);
    let mut failed = 0;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        return Err(Failure {
            code: EXIT_OTHER,
            message: format!("{failed} of {} checks failed", checks.len()),
        });
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    match &cli.verb {
        Verb::SeSweep(s) => {
            cfg.validate()?;
            emit(&estimate_ergodic_se(&plan_for(s, &cfg), &cfg)?, s.output.as_ref())
        }
        Verb::OutageSweep(s) => {
            cfg.validate()?;
            emit(&estimate_outage(&plan_for(s, &cfg), &cfg)?, s.output.as_ref())
        }
        Verb::BerSweep { sweep, min_bits } => {
            cfg.validate_allow_noiseless()?;
            let mut plan = plan_for(sweep, &cfg);
            plan.min_bits = *min_bits;
            emit(&estimate_ber(&plan, &cfg)?, sweep.output.as_ref())
        }
        Verb::CrossingPoint { profile } => crossing(&cfg, *profile),
        Verb::Analyze { dump_config: Some(path), .. } => {
            cfg.validate()?;
            dump_config(&cfg, path)
        }
        Verb::Analyze { profile, dump_config: None } => analyze(&cfg, *profile),
        Verb::Selftest => selftest(&cfg),
    }
}

fn thread_override() -> Result<Option<usize>, Failure> {
    match std::env::var("CHANCUST_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure {
                code: EXIT_USAGE,
                message: format!("CHANCUST_THREADS must be a positive integer, got `{v}`"),
            }),
        },
        Err(_) => Ok(None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = thread_override().and_then(|threads| match threads {
        Some(n) => with_threads(n, || run(&cli)).map_err(Failure::from)?,
        None => run(&cli),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("chancust: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
