use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use nemfilm::config::{self, ConfigError};
use nemfilm::experiments::{self, Options, Setup};

#[derive(Parser)]
#[command(name = "nemfilm", version, about = "Q-tensor thin-film experiments")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Solve every ε of the sweep and write energies, fields and traces.
    Run(Common),
    /// Fit E = A + B ε ln(1/ε) + C ε to the energies of a finished run.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Energy table; defaults to `<out>/energies.csv`.
        #[arg(long)]
        energies: Option<PathBuf>,
    },
    /// Compare strip energies with the partition energy of the best interface.
    GammaCheck(Common),
    /// Perturbation test of the dumbbell candidate and the constrained ε continuation.
    Dumbbell {
        #[command(flatten)]
        common: Common,
        /// Skip the ε continuation.
        #[arg(long)]
        no_continuation: bool,
    },
    /// Geodesics between wells and from the boundary data to each well.
    Geodesic(Common),
    /// Calibrated wells of the potential.
    Wells(Common),
    /// Print the version.
    Version,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    quiet: bool,
}

impl Common {
    fn options(&self) -> Options {
        Options {
            seed: self.seed,
            threads: self.threads.max(1),
            quiet: self.quiet,
        }
    }
}

enum Outcome {
    Done,
    NotConverged,
}

fn say(quiet: bool, msg: String) {
    if !quiet {
        println!("{msg}");
    }
}

fn converged(flag: bool) -> Outcome {
    if flag {
        Outcome::Done
    } else {
        Outcome::NotConverged
    }
}

fn fit(c: &Common, energies: Option<&Path>) -> Result<Outcome> {
    let loaded = config::load(&c.config)?;
    std::fs::create_dir_all(&c.out)?;
    let path = energies
        .map(Path::to_path_buf)
        .unwrap_or_else(|| c.out.join("energies.csv"));
    let rows = experiments::read_energies(&path)?;
    let s = Setup::new(loaded, c.options())?;
    let f = experiments::fit_run(&s, &rows, &c.out)?;
    say(
        c.quiet,
        format!(
            "A = {:.6} (target {:.6}, {:+.2}%)",
            f.a,
            f.targets.a,
            100.0 * (f.a - f.targets.a) / f.targets.a
        ),
    );
    say(
        c.quiet,
        format!("B = {:.6} (target {:.6}, deviation {:.3})", f.b, f.targets.b, f.rel_b),
    );
    say(c.quiet, format!("C = {:.6}, residual {:.3e}", f.c, f.residual));
    Ok(Outcome::Done)
}

fn dispatch(verb: Verb) -> Result<Outcome> {
    match verb {
        Verb::Version => {
            println!("nemfilm {}", env!("CARGO_PKG_VERSION"));
            Ok(Outcome::Done)
        }
        Verb::Run(c) => {
            let s = experiments::run_scenario(config::load(&c.config)?, &c.out, c.options())?;
            for e in &s.energies {
                say(c.quiet, format!("eps {:<10} energy {:.10}", e.eps, e.energy));
            }
            if let Some(d) = &s.decay {
                say(c.quiet, format!("gap ~ eps^{:.4} (R² {:.6})", d.slope, d.r2));
            }
            Ok(converged(s.converged))
        }
        Verb::Fit { common, energies } => fit(&common, energies.as_deref()),
        Verb::GammaCheck(c) => {
            let r = experiments::gamma_consistency(config::load(&c.config)?, &c.out, c.options())?;
            say(
                c.quiet,
                format!("F0 = {:.8}, interface at x = {:.6}", r.f0, r.optimal_x),
            );
            for row in &r.rows {
                say(
                    c.quiet,
                    format!(
                        "eps {:<10} energy {:.8} deviation {:+.4}",
                        row.eps, row.energy, row.deviation
                    ),
                );
            }
            Ok(converged(r.rows.iter().all(|row| row.converged)))
        }
        Verb::Dumbbell {
            common: c,
            no_continuation,
        } => {
            let d = experiments::dumbbell_setup(config::load(&c.config)?, c.options())?;
            let m = experiments::minimality_check(&d, &c.out)?;
            say(
                c.quiet,
                format!(
                    "F0(candidate) = {:.8}, δ = {:.3e}",
                    m.candidate_f0, m.perturbation.delta_l1
                ),
            );
            say(
                c.quiet,
                format!(
                    "{} perturbations, min ΔF0 = {:.3e}, pass {}",
                    m.perturbation.trials.len(),
                    m.perturbation.min_delta,
                    m.perturbation.pass
                ),
            );
            if no_continuation {
                return Ok(Outcome::Done);
            }
            let r = experiments::local_min_continuation(&d, &c.out)?;
            for row in &r.rows {
                say(
                    c.quiet,
                    format!(
                        "eps {:<10} Λ {:.6} / δ {:.6} interior {} energy {:.8}",
                        row.eps, row.lambda, row.delta, row.interior, row.energy
                    ),
                );
            }
            Ok(converged(r.rows.iter().all(|row| row.converged)))
        }
        Verb::Geodesic(c) => {
            let m = experiments::geodesics(config::load(&c.config)?, &c.out, c.options())?;
            for (k, v) in &m.results {
                say(c.quiet, format!("{k} = {v:.8}"));
            }
            Ok(converged(m.flags.values().all(|f| *f)))
        }
        Verb::Wells(c) => {
            let m = experiments::wells(config::load(&c.config)?, &c.out, c.options())?;
            for (k, v) in &m.results {
                say(c.quiet, format!("{k} = {v:.8}"));
            }
            Ok(Outcome::Done)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.verb) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("warning: at least one solve stopped before convergence");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
