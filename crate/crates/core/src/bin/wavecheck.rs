use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use wavecheck::harness::{
    emit_cfl_report, emit_report, run_case, run_cfl_scenario, steps_for, CaseSpec, CflConfig, OperatorChoice,
    ProblemSpec, StudyConfig, StudyRow, CSV_HEADER,
};
use wavecheck::problems::SampleRule;
use wavecheck::scheme::{Formulation, ZeroSource};
use wavecheck::{Error, Result};

const EXIT_FAILURE: u8 = 1;
const EXIT_RELIABILITY: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "wavecheck", version, about = "Time-stepping error estimation for u'' + Au = f")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study and write CSV, SVG and JSON reports.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "quad-points")]
        quad_points: Option<usize>,
    },
    /// Run the CFL-violation scenario (defaults to preset 1 without a config).
    Cfl {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "quad-points")]
        quad_points: Option<usize>,
    },
    /// Run a single case and print its CSV row.
    Run {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        preset: u8,
        #[arg(long, value_enum, default_value_t = Scheme::Leapfrog)]
        scheme: Scheme,
        #[arg(long, default_value_t = 0.0)]
        q1: f64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        formulation: u8,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        k: f64,
        #[arg(long = "T", default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, value_enum, default_value_t = OperatorArg::Spectral)]
        operator: OperatorArg,
        #[arg(long = "quad-points")]
        quad_points: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Leapfrog,
    Cosine,
}

#[derive(Clone, Copy, ValueEnum)]
enum OperatorArg {
    Spectral,
    Fd1d,
    Fd2d,
}

impl From<OperatorArg> for OperatorChoice {
    fn from(o: OperatorArg) -> Self {
        match o {
            OperatorArg::Spectral => OperatorChoice::Spectral,
            OperatorArg::Fd1d => OperatorChoice::Fd1d,
            OperatorArg::Fd2d => OperatorChoice::Fd2d,
        }
    }
}

enum Outcome {
    Ok,
    Unreliable(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Unreliable(msg)) => {
            eprintln!("reliability violation: {msg}");
            ExitCode::from(EXIT_RELIABILITY)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Json(_) => EXIT_CONFIG,
                Error::ReliabilityViolation { .. } => EXIT_RELIABILITY,
                _ => EXIT_FAILURE,
            })
        }
    }
}

fn check_rows<'a>(rows: impl IntoIterator<Item = &'a StudyRow>) -> Outcome {
    match rows.into_iter().find(|r| !r.is_reliable()) {
        Some(r) => Outcome::Unreliable(format!(
            "level {}: sup e_R / eta_1 = {:.6e} exceeds 1",
            r.level, r.iei_r
        )),
        None => Outcome::Ok,
    }
}

fn execute(command: Command) -> Result<Outcome> {
    match command {
        Command::Study { config, out, quad_points } => {
            let mut cfg = StudyConfig::load(&config)?;
            if let Some(q) = quad_points {
                cfg.quad_points = q;
            }
            let study = wavecheck::harness::run_study(&cfg)?;
            let paths = emit_report(&study, &out)?;
            println!("wrote {}", paths.csv.display());
            Ok(check_rows(study.rows()))
        }
        Command::Cfl { config, out, quad_points } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
                    CflConfig::from_json(&text)?
                }
                None => CflConfig::preset1("cfl"),
            };
            if let Some(q) = quad_points {
                cfg.quad_points = q;
            }
            let report = run_cfl_scenario(&cfg)?;
            let paths = emit_cfl_report(&report, &out)?;
            let v = &report.verdict;
            println!("wrote {}", paths.csv.display());
            println!(
                "error growth {:.3e}, estimator growth {:.3e}, IEI median {:.4}, verdict {}",
                v.error_growth,
                v.estimator_growth,
                v.iei_median,
                if v.passed { "pass" } else { "fail" }
            );
            if !v.bounds_e_r_at_every_node {
                return Ok(Outcome::Unreliable("eta_1 fell below the error during the unstable run".into()));
            }
            Ok(check_rows([&report.control.row, &report.cosine.row]))
        }
        Command::Run {
            preset,
            scheme,
            q1,
            formulation,
            h,
            k,
            t_end,
            operator,
            quad_points,
        } => {
            let formulation = match (scheme, formulation) {
                (Scheme::Leapfrog, _) => Formulation::LeapFrog,
                (Scheme::Cosine, 1) => Formulation::Cosine1 { q1 },
                (Scheme::Cosine, _) => Formulation::Cosine2 { q1 },
            };
            let cfg = StudyConfig {
                name: "run".into(),
                problem: ProblemSpec::Preset { preset },
                operator: operator.into(),
                modes: None,
                h: None,
                time_step: None,
                formulation,
                final_time: t_end,
                quad_points: quad_points.unwrap_or(wavecheck::residual::DEFAULT_QUAD_POINTS),
                samples: SampleRule::default(),
                record_wall_time: true,
                parallel: false,
            };
            let op = cfg.build_operator(Some(h))?;
            let (n_steps, k) = steps_for(t_end, k)?;
            let spec = CaseSpec {
                level: 0,
                h: Some(h),
                k,
                n_steps,
                formulation,
                quad_points: cfg.quad_points,
                samples: cfg.samples,
                record_wall_time: true,
            };
            let solution = cfg.problem.solution()?;
            let case = run_case(&op, &solution, &ZeroSource, &spec)?;
            let r = &case.row;
            let mut out = std::io::stdout().lock();
            writeln!(out, "{}", CSV_HEADER.join(","))?;
            writeln!(
                out,
                "{},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},,,,{:.16e},{:.16e},{}",
                r.level, h, r.k, r.stable, r.sup_e_r, r.sup_e_l, r.eta1, r.iei, r.energy_t, r.wall_ms
            )?;
            Ok(check_rows([r]))
        }
    }
}
