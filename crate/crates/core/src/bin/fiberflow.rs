use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fiberflow::geometry::validate_space;
use fiberflow::lagrangian::{default_xi_grid, legendre_transform};
use fiberflow::report::{self, num};
use fiberflow::scenario::{load_scenario, paper_counterexample, Scenario};
use fiberflow::section::{global_ils, local_slopes};
use fiberflow::semigroup::{EvolutionTable, HopfLax};
use fiberflow::suite::Status;
use fiberflow::variational::solve_variational;
use fiberflow::{par, Error};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_LOAD: u8 = 3;
const EXIT_REFUSED: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser)]
#[command(name = "fiberflow", version, about = "Intrinsic Hopf-Lax evolutions on fibered scenarios")]
struct Cli {
    /// Worker threads for grid evaluation.
    #[arg(long, global = true, env = "FIBERFLOW_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the geometry and the section of a scenario.
    Validate { file: PathBuf },
    /// Evolution table: u, argmin and iD+- per base point and time.
    Evolve {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Global, local and asymptotic intrinsic Lipschitz constants and K.
    Slopes {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Constrained Legendre transform at one base point and time.
    Transform {
        file: PathBuf,
        #[arg(long)]
        y: String,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the discretized curve problem and compare with the evolution.
    Variational {
        file: PathBuf,
        #[arg(long)]
        y: String,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 64)]
        steps: usize,
    },
    /// Run every check and write the report bundle.
    Check {
        file: PathBuf,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Write the counterexample scenario and check it.
    PaperExample {
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

enum Failure {
    Load(Error),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(Error::Io(e))
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    load_scenario(path).map_err(Failure::Load)
}

fn emit(out: Option<&Path>, body: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, body)?,
        None => std::io::stdout().lock().write_all(body.as_bytes())?,
    }
    Ok(())
}

fn run_check(s: &Scenario, out: &Path) -> Result<u8, Failure> {
    let bundle = report::check(s)?;
    bundle.write_to(out)?;
    for v in &bundle.verdicts {
        let slack = v.worst_slack.map(num).unwrap_or_else(|| "-".into());
        println!("{:<7} {:<32} {:>18}  {}", format!("{:?}", v.status).to_uppercase(), v.check, slack, v.location);
    }
    let failed = bundle.verdicts.iter().filter(|v| v.status == Status::Fail).count();
    println!("{} checks, {failed} failed; reports in {}", bundle.verdicts.len(), out.display());
    Ok(if failed == 0 { 0 } else { EXIT_CHECK_FAILED })
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Validate { file } => {
            let s = load(&file)?;
            let rep = validate_space(s.section.space(), s.tolerances().geo);
            println!(
                "{}: {} base points, kappa {}, valid {}, ILS {}",
                s.name(),
                rep.base_count,
                s.file.kappa,
                rep.is_valid(),
                num(global_ils(&s.section))
            );
            Ok(0)
        }
        Command::Evolve { file, times, out } => {
            let s = load(&file)?;
            let hl = HopfLax::new(&s.section, &s.lagrangian, s.tolerances().tie);
            let table = EvolutionTable::build(&hl, &times, None)?;
            emit(out.as_deref(), &report::evolution_csv(&s, &table))?;
            Ok(0)
        }
        Command::Slopes { file, out } => {
            let s = load(&file)?;
            let rep = local_slopes(&s.section, s.radii())?;
            emit(out.as_deref(), &report::slopes_csv(&s, &rep))?;
            Ok(0)
        }
        Command::Transform { file, y, t, out } => {
            let s = load(&file)?;
            let yi = s.index_of(&y)?;
            let xi = default_xi_grid(&s.section, s.file.grids.xi_resolution)?;
            let table = legendre_transform(&s.lagrangian, &s.section, yi, t, &xi)?;
            emit(out.as_deref(), &report::transform_csv(&s, &[table]))?;
            Ok(0)
        }
        Command::Variational { file, y, t, steps } => {
            let s = load(&file)?;
            let yi = s.index_of(&y)?;
            let p = s.parametrization()?;
            let sol = solve_variational(&s.section, &s.lagrangian, &p, yi, t, steps)?;
            let hl = HopfLax::new(&s.section, &s.lagrangian, s.tolerances().tie);
            let u = hl.evolve(yi, t)?.value;
            let mut body = format!(
                "value,{}\nevolve,{}\ngap,{}\nbest_z,{}\nsweeps,{}\nconverged,{}\nk,s,w\n",
                num(sol.value),
                num(u),
                num(sol.value - u),
                s.id(sol.best_z()),
                sol.best.sweeps,
                sol.best.converged
            );
            let ds = sol.best.problem.step();
            for (k, w) in sol.best.problem.nodes.iter().enumerate() {
                body.push_str(&format!("{k},{},{}\n", num(k as f64 * ds), num(*w)));
            }
            emit(None, &body)?;
            Ok(0)
        }
        Command::Check { file, out } => {
            let s = load(&file)?;
            run_check(&s, &out)
        }
        Command::PaperExample { out } => {
            std::fs::create_dir_all(&out)?;
            let path = out.join("paper_counterexample.json");
            paper_counterexample().write(&path)?;
            println!("wrote {}", path.display());
            let s = load(&path)?;
            run_check(&s, &out.join("report"))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    par::init_workers(cli.jobs);
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Load(e)) => {
            eprintln!("error: cannot load scenario: {e}");
            ExitCode::from(EXIT_LOAD)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Refused(_) => EXIT_REFUSED,
                Error::Io(_) => EXIT_IO,
                Error::Parse { .. } | Error::Schema { .. } | Error::Validation(_) => EXIT_LOAD,
                Error::Domain(_) => EXIT_USAGE,
            })
        }
    }
}
