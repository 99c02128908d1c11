use clap::{Parser, Subcommand};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use subslope::config::{Problem, ProblemConfig};
use subslope::continuity::run_path;
use subslope::error::Error;
use subslope::io;
use subslope::subsolution::{dhym_subsolution_criterion, is_c_subsolution, random_trials, subslope_bracket};
use subslope::suite::{self, SuiteOptions};

#[derive(Parser, Debug)]
#[command(name = "subslope", version, about = "Sub-slope and continuity-method solver for f(λ) = h + σ on flat tori")]
struct Cli {
    /// Problem configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for fields and logs.
    #[arg(long, global = true, default_value = "subslope-out")]
    out: PathBuf,
    /// Overrides the trial-ensemble seed (and the verify suite seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the continuity path to t = 1.
    Solve,
    /// Test u_sub as a C-subsolution.
    CheckSubsolution,
    /// Bracket the sub-slope with a random trial ensemble.
    Subslope,
    /// Run the oracle and property suite.
    Verify {
        /// Comma-separated subset of checks.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        only: Option<Vec<String>>,
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
}

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match &cli.command {
        Command::Verify { only, corrupt_gradient } => verify(&cli, only.as_deref(), *corrupt_gradient),
        cmd => {
            let Some(path) = &cli.config else {
                eprintln!("error: --config is required for this command");
                return ExitCode::from(EXIT_USAGE);
            };
            let cfg = match load(path, cli.seed) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::from(EXIT_USAGE);
                }
            };
            let result = match cmd {
                Command::Solve => solve(&cfg, &cli.out),
                Command::CheckSubsolution => check_subsolution(&cfg),
                Command::Subslope => subslope(&cfg),
                Command::Verify { .. } => unreachable!(),
            };
            match result {
                Ok(code) => code,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_FAILURE)
                }
            }
        }
    }
}

fn load(path: &Path, seed: Option<u64>) -> subslope::Result<ProblemConfig> {
    let mut cfg = ProblemConfig::from_file(path)?;
    if let (Some(seed), Some(trials)) = (seed, cfg.trials.as_mut()) {
        trials.seed = seed;
    }
    Ok(cfg)
}

fn solve(cfg: &ProblemConfig, out: &Path) -> subslope::Result<ExitCode> {
    let Problem {
        eq,
        h,
        u_sub,
        u_bar,
        manufactured,
    } = cfg.build()?;
    let outcome = match run_path(&eq, &h, &u_bar, &u_sub, &cfg.path) {
        Ok(o) => o,
        Err(Error::MonitorBreach { t, monitor, log }) => {
            fs::create_dir_all(out)?;
            fs::write(out.join("monitor.csv"), subslope::continuity::monitor_csv(&log))?;
            eprintln!("monitor breach at t = {t}: {monitor}");
            eprintln!("partial log written to {}", out.join("monitor.csv").display());
            return Ok(ExitCode::from(EXIT_FAILURE));
        }
        Err(e) => return Err(e),
    };
    let sigma_trial = match &cfg.trials {
        Some(t) => {
            let trials = random_trials(&eq, t);
            subslope_bracket(&eq, &h, &trials).map(|b| b.upper.value).ok()
        }
        None => None,
    };
    let sigma_trial = sigma_trial.unwrap_or(f64::NAN);

    fs::create_dir_all(out)?;
    let phi = outcome.state.sup_normalized_phi();
    io::write_scalar(&out.join("phi.f64"), &phi)?;
    fs::write(out.join("phi.csv"), io::scalar_csv(&phi))?;
    fs::write(out.join("monitor.csv"), outcome.monitor_csv())?;

    let mut summary = format!(
        "c1 = {:.17e}\nc_bar = {:.17e}\ndelta = {:.17e}\nsigma_lower = {:.17e}\nsigma_trial = {:.17e}\nsteps = {}\nresidual = {:.3e}\nxi_min = {:.6e}\n",
        outcome.state.c,
        outcome.c_bar,
        outcome.delta,
        outcome.sigma_lower,
        sigma_trial,
        outcome.log.len(),
        outcome.state.diagnostics.residual,
        outcome.state.diagnostics.xi_min,
    );
    if let Some(m) = &manufactured {
        let u = u_bar.add_scaled(&outcome.state.phi, 1.0);
        let diff = u.zip_map(&m.u_star, |a, b| a - b);
        let mean = diff.mean();
        summary.push_str(&format!(
            "c_expected = {:.17e}\nmanufactured_error = {:.6e}\n",
            m.c_expected,
            diff.map(|v| v - mean).norm_inf()
        ));
    }
    fs::write(out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(ExitCode::SUCCESS)
}

fn check_subsolution(cfg: &ProblemConfig) -> subslope::Result<ExitCode> {
    let p = cfg.build()?;
    let lambda = p.eq.admissible_eigenvalues(&p.u_sub)?;
    let check = is_c_subsolution(&p.eq.op, &lambda, &p.h, 0.0)?;
    println!("min_margin = {:.17e}", check.min_margin);
    println!("mean_margin = {:.17e}", check.mean_margin());
    println!("argmin = {:?}", p.eq.geometry().point(check.argmin));
    println!("f_infinity_test = {}", verdict(check.is_subsolution));
    if p.eq.op.is_dhym() {
        let phase = dhym_subsolution_criterion(&lambda, &p.h);
        println!("dhym_phase_test = {}", verdict(phase));
        if phase != check.is_subsolution {
            eprintln!("error: the two subsolution tests disagree");
            return Ok(ExitCode::from(EXIT_FAILURE));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "subsolution"
    } else {
        "not a subsolution"
    }
}

fn subslope(cfg: &ProblemConfig) -> subslope::Result<ExitCode> {
    let Some(tc) = &cfg.trials else {
        return Err(Error::Config {
            key: Some("trials.count".into()),
            line: None,
            message: "a positive trial count (with a seed) is required".into(),
        });
    };
    let p = cfg.build()?;
    let trials = random_trials(&p.eq, tc);
    let b = subslope_bracket(&p.eq, &p.h, &trials)?;
    println!("lower = {:.17e}", b.lower);
    println!("upper = {:.17e}", b.upper.value);
    println!("trials = {}", trials.len());
    println!("admissible = {}", b.upper.admissible);
    println!("best_trial = {}", b.upper.best_trial);
    Ok(ExitCode::SUCCESS)
}

fn verify(cli: &Cli, only: Option<&[String]>, corrupt_gradient: bool) -> ExitCode {
    let names = match suite::select(only) {
        Ok(n) => n,
        Err(msg) => {
            eprintln!("usage error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let mut opts = SuiteOptions {
        corrupt_gradient,
        ..SuiteOptions::default()
    };
    if let Some(seed) = cli.seed {
        opts.seed = seed;
    }
    let mut failed = 0;
    for name in names {
        let r = suite::run_check(name, &opts);
        println!(
            "{} {:<15} {:>7.2}s  {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.elapsed.as_secs_f64(),
            r.detail
        );
        failed += usize::from(!r.passed);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("{failed} check(s) failed");
        ExitCode::from(EXIT_FAILURE)
    }
}
